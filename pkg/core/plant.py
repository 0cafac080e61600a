"""Discrete-event model of the pneumatic conveyor.

The plant walks the 20 canonical states of the normal operating cycle,
staying in each for a number of PLC scans (its dwell), and the PLC records
one sensor vector per scan. A simpy clock ticks once per sampling period.
"""

import configparser
import logging
import os
import sys
from dataclasses import dataclass, field
from functools import lru_cache
from types import MappingProxyType

import numpy as np
import simpy

from core.errors import ConfigError, DataValidationError
from core.trace import (DEFAULT_SAMPLING_PERIOD_MS, N_SENSORS, LabeledTrace,
                        PositionLabel, SensorVector)

log = logging.getLogger(__name__)

FIXTURE_NAME = os.path.join("fixtures", "plant_states.ini")
FIXTURE_VERSION = 1
N_STATES = 20
# Table rows where the block rests at a corner position.
POSITION_STATE_IDS = (1, 9, 13, 17)


def resource_path(relative_path):
    """Locate bundled data whether running from source or a frozen build."""
    if getattr(sys, "frozen", False):
        base_path = os.path.join(sys._MEIPASS, "core")
    else:
        base_path = os.path.dirname(__file__)
    return os.path.join(base_path, relative_path)


@dataclass(frozen=True)
class PlantState:
    id: int
    description: str
    sensors: SensorVector
    label: PositionLabel


@lru_cache(maxsize=None)
def _load_fixture(path):
    parser = configparser.ConfigParser()
    if not parser.read(path, encoding="utf-8"):
        raise DataValidationError(f"plant fixture not found: {path}")
    version = parser.getint("fixture", "version", fallback=None)
    if version != FIXTURE_VERSION:
        raise DataValidationError(
            f"plant fixture version {version} unsupported (expected {FIXTURE_VERSION})")
    states = []
    for state_id in range(1, N_STATES + 1):
        section = f"state-{state_id:02d}"
        if section not in parser:
            raise DataValidationError(f"plant fixture lacks [{section}]")
        row = parser[section]
        states.append(PlantState(
            id=state_id,
            description=row["description"],
            sensors=SensorVector.from_bitstring(row["sensors"]),
            label=PositionLabel.from_token(row["label"]),
        ))
    vectors = [s.sensors for s in states]
    if len(set(vectors)) != len(vectors):
        raise DataValidationError("plant fixture encodes two states with the same sensor vector")
    return tuple(states)


def canonical_cycle():
    """The 20 states of one normal conveying cycle, in table order."""
    return _load_fixture(resource_path(FIXTURE_NAME))


def position_map():
    """Sensor vectors of the four corner positions mapped to their labels."""
    states = canonical_cycle()
    return {states[i - 1].sensors: states[i - 1].label for i in POSITION_STATE_IDS}


# --- Configuration ---
@dataclass(frozen=True)
class DwellProfile:
    dwell_samples: MappingProxyType

    def __post_init__(self):
        dwell = {int(k): int(v) for k, v in dict(self.dwell_samples).items()}
        missing = set(range(1, N_STATES + 1)) - set(dwell)
        if missing:
            raise ConfigError(f"dwell profile lacks states {sorted(missing)}")
        bad = {k: v for k, v in dwell.items() if v < 1}
        if bad:
            raise ConfigError(f"dwell counts must be >= 1: {bad}")
        object.__setattr__(self, "dwell_samples", MappingProxyType(dwell))

    @classmethod
    def default(cls, position_dwell=2, transition_dwell=1):
        # The plant idles at the corners, which is where repeated scans come from.
        return cls({i: (position_dwell if i in POSITION_STATE_IDS else transition_dwell)
                    for i in range(1, N_STATES + 1)})

    @classmethod
    def uniform(cls, dwell):
        return cls({i: dwell for i in range(1, N_STATES + 1)})

    def __getitem__(self, state_id):
        return self.dwell_samples[state_id]

    @property
    def cycle_length(self):
        return sum(self.dwell_samples.values())


@dataclass(frozen=True)
class NoiseModel:
    bit_flip_prob: float = 0.0
    dwell_jitter: int = 0

    def __post_init__(self):
        if not 0.0 <= self.bit_flip_prob < 1.0:
            raise ConfigError(f"bit_flip_prob must lie in [0, 1), got {self.bit_flip_prob}")
        if not isinstance(self.dwell_jitter, int) or self.dwell_jitter < 0:
            raise ConfigError(f"dwell_jitter must be a non-negative integer, got {self.dwell_jitter}")


@dataclass(frozen=True)
class SimConfig:
    cycles: int = 51
    dwell: DwellProfile = field(default_factory=DwellProfile.default)
    noise: NoiseModel = field(default_factory=NoiseModel)
    seed: int = 0
    close_final_cycle: bool = True
    sampling_period_ms: int = DEFAULT_SAMPLING_PERIOD_MS

    def __post_init__(self):
        if not isinstance(self.cycles, int) or self.cycles < 1:
            raise ConfigError(f"cycles must be >= 1, got {self.cycles}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError(f"seed must fit in 64 bits, got {self.seed}")
        if self.sampling_period_ms <= 0:
            raise ConfigError("sampling period must be positive")


# --- Simulation ---
class ConveyorPlant:
    """Plant process on a simpy clock; one tick is one PLC scan."""

    def __init__(self, env, config):
        self.env = env
        self.config = config
        self.rng = np.random.default_rng(int(config.seed))
        self.states = canonical_cycle()
        self.samples = []

    def _dwell(self, state):
        dwell = self.config.dwell[state.id]
        jitter = self.config.noise.dwell_jitter
        if jitter:
            dwell = max(1, dwell + int(self.rng.integers(-jitter, jitter + 1)))
        return dwell

    def _scan(self, state):
        sensors = state.sensors
        p = self.config.noise.bit_flip_prob
        if p > 0.0:
            mask = self.rng.random(N_SENSORS) < p
            if mask.any():
                sensors = sensors.flipped(mask)
        self.samples.append((sensors, state.label))

    def _hold(self, state):
        for _ in range(self._dwell(state)):
            self._scan(state)
            yield self.env.timeout(1)

    def run(self):
        for _ in range(self.config.cycles):
            for state in self.states:
                yield from self._hold(state)
        if self.config.close_final_cycle:
            # block arrives back at A; recording stops during that dwell
            yield from self._hold(self.states[0])


def simulate(config: SimConfig):
    env = simpy.Environment()
    plant = ConveyorPlant(env, config)
    env.process(plant.run())
    env.run()
    log.info("simulated %d cycles: %d samples over %d scans (seed %d)",
             config.cycles, len(plant.samples), env.now, config.seed)
    return LabeledTrace(tuple(plant.samples), sampling_period_ms=config.sampling_period_ms)

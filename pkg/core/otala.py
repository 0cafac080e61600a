"""Passive automaton learning from one cycle of observations (OTALA).

1. drop repeated consecutive observations,
2. an observation that is a known corner reading becomes a position state,
3. anything else becomes a fresh anonymous state, chained to its predecessor,
4. stop once the block is back at the starting position A.
"""

import logging
from collections.abc import Mapping
from dataclasses import dataclass
from typing import Optional, Sequence

from core.automaton import Automaton, build_path, select_modal
from core.errors import DataValidationError, IncompleteCycleError
from core.trace import Observation, PositionLabel, SensorVector, dedup_consecutive

log = logging.getLogger(__name__)


class PositionMap(Mapping):
    """Known corner readings: sensor vector -> A/B/C/D."""

    def __init__(self, entries=None):
        entries = dict(entries or {})
        if len(entries) > 4:
            raise DataValidationError(f"a position map holds at most 4 entries, got {len(entries)}")
        values = list(entries.values())
        if len(set(values)) != len(values):
            raise DataValidationError("position map assigns one label to two readings")
        for vector, label in entries.items():
            if not isinstance(vector, SensorVector) or not isinstance(label, PositionLabel) \
                    or not label.is_position:
                raise DataValidationError(f"bad position map entry {vector!r} -> {label!r}")
        self._entries = entries

    @classmethod
    def coerce(cls, pmap):
        return pmap if isinstance(pmap, cls) else cls(pmap)

    def __getitem__(self, key):
        return self._entries[key]

    def __iter__(self):
        return iter(self._entries)

    def __len__(self):
        return len(self._entries)

    def vector_for(self, label):
        for vector, value in self._entries.items():
            if value is label:
                return vector
        return None


def is_position_state(obs: SensorVector, pmap) -> Optional[PositionLabel]:
    return pmap.get(obs)


def learn_otala(cycle: Sequence[Observation], pmap, strict=False) -> Automaton:
    """Learn the automaton of one cycle. Learning stops at the second
    occurrence of the position-A reading, which closes the loop onto the
    initial state. Running out of input first leaves the automaton open."""
    pmap = PositionMap.coerce(pmap)
    if not cycle:
        raise DataValidationError("OTALA needs at least one observation")
    observations = dedup_consecutive(cycle)
    start = observations[0].sensors
    home = pmap.vector_for(PositionLabel.A)
    can_close = home is not None and start == home

    items = []
    closed = False
    for obs in observations:
        if can_close and items and obs.sensors == start:
            closed = True
            break
        # None marks a state minted by CreateNewState()
        items.append((obs.sensors, is_position_state(obs.sensors, pmap)))

    automaton = build_path(items, closing=closed)
    if not closed:
        log.warning("cycle starting at index %d ended before position A recurred (%d states)",
                    observations[0].index, automaton.state_count)
        if strict:
            raise IncompleteCycleError(automaton)
    return automaton


@dataclass(frozen=True)
class OtalaRun:
    per_cycle: tuple
    best_index: int
    support: int

    @property
    def best(self):
        return self.per_cycle[self.best_index]


def learn_otala_all(cycles, pmap) -> OtalaRun:
    """Run OTALA on every cycle (with its closing observation) and keep the
    most frequent automaton as the best description of the plant."""
    pmap = PositionMap.coerce(pmap)
    automata = tuple(learn_otala(c.observations(include_closing=True), pmap) for c in cycles)
    best, support = select_modal(automata)
    log.info("OTALA over %d cycles: best is cycle %d (%d states, seen %d times, %d closed overall)",
             len(automata), best, automata[best].state_count, support,
             sum(a.closed for a in automata))
    return OtalaRun(per_cycle=automata, best_index=best, support=support)

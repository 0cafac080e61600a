import numpy as np
import pytest

from core.errors import ConfigError
from core.plant import DwellProfile, NoiseModel, SimConfig, canonical_cycle, simulate
from core.trace import CLASSES, segment_cycles

A, B, C, D, T = CLASSES


def test_fixture_has_twenty_distinct_states(states):
    assert len(states) == 20
    assert len({s.sensors for s in states}) == 20
    assert [s.id for s in states if s.label is not T] == [1, 9, 13, 17]
    assert [states[i - 1].label for i in (1, 9, 13, 17)] == [A, B, C, D]


def test_single_pass_is_exactly_twenty_samples(states):
    trace = simulate(SimConfig(cycles=1, dwell=DwellProfile.uniform(1), close_final_cycle=False))
    assert len(trace) == 20
    assert trace.sensors == [s.sensors for s in states]
    assert trace.labels == [s.label for s in states]


def test_closing_run_makes_last_cycle_segmentable():
    trace = simulate(SimConfig(cycles=1, dwell=DwellProfile.uniform(1)))
    assert len(trace) == 21
    assert len(segment_cycles(trace)) == 1
    open_trace = simulate(SimConfig(cycles=3, close_final_cycle=False))
    assert len(segment_cycles(open_trace)) == 2


def test_default_run_size():
    trace = simulate(SimConfig())
    assert DwellProfile.default().cycle_length == 24
    assert len(trace) == 51 * 24 + 2
    cycles = segment_cycles(trace)
    assert len(cycles) == 51
    assert all(len(c) == 24 for c in cycles)


def test_same_seed_same_trace():
    cfg = SimConfig(cycles=5, noise=NoiseModel(bit_flip_prob=0.05, dwell_jitter=1), seed=42)
    assert simulate(cfg) == simulate(cfg)
    other = SimConfig(cycles=5, noise=NoiseModel(bit_flip_prob=0.05, dwell_jitter=1), seed=43)
    assert simulate(cfg) != simulate(other)


def test_bit_flip_rate():
    clean = simulate(SimConfig(cycles=51))
    noisy = simulate(SimConfig(cycles=51, noise=NoiseModel(bit_flip_prob=0.05), seed=9))
    flips = np.abs(clean.sensor_matrix() - noisy.sensor_matrix())
    assert 0.04 < flips.mean() < 0.06
    assert noisy.labels == clean.labels


def test_dwell_jitter_keeps_labels_and_cycle_count(states):
    trace = simulate(SimConfig(cycles=10, noise=NoiseModel(dwell_jitter=1), seed=5))
    cycles = segment_cycles(trace)
    assert len(cycles) == 10
    for c in cycles:
        assert 20 <= len(c) <= 44
        assert c.labels[0] is A


def test_config_validation():
    with pytest.raises(ConfigError):
        SimConfig(cycles=0)
    with pytest.raises(ConfigError):
        NoiseModel(bit_flip_prob=1.0)
    with pytest.raises(ConfigError):
        NoiseModel(dwell_jitter=-1)
    with pytest.raises(ConfigError):
        DwellProfile({1: 1})
    with pytest.raises(ConfigError):
        DwellProfile.uniform(0)


def test_canonical_cycle_is_cached():
    assert canonical_cycle() is canonical_cycle()

import numpy as np
import pytest

from core.automaton import check_cycle_closure, compare
from core.errors import DataValidationError, IncompleteCycleError
from core.otala import PositionMap, is_position_state, learn_otala, learn_otala_all
from core.plant import NoiseModel, SimConfig, simulate
from core.trace import CLASSES, Observation, SensorVector, segment_cycles

A, B, C, D, T = CLASSES


def test_single_cycle_gives_twenty_state_loop(single_cycle, pmap):
    a = learn_otala(single_cycle.observations(include_closing=True), pmap)
    assert a.state_count == 20
    assert a.transition_count == 20
    assert a.closed
    assert a.is_deterministic()
    assert [s.id for s in a.states if s.is_position] == [1, 9, 13, 17]
    assert [a.state(i).label for i in (1, 9, 13, 17)] == [A, B, C, D]
    assert all(s.label is None for s in a.states if not s.is_position)
    assert check_cycle_closure(a)


def test_repeated_samples_do_not_change_the_automaton(single_cycle, pmap):
    obs = single_cycle.observations(include_closing=True)
    tripled = [o for o in obs for _ in range(3)]
    assert learn_otala(tripled, pmap) == learn_otala(obs, pmap)


def test_truncated_cycle_stays_open_and_misses_d_to_a(single_cycle, pmap):
    full = learn_otala(single_cycle.observations(include_closing=True), pmap)
    truncated = learn_otala(single_cycle.observations(), pmap)
    assert not truncated.closed
    assert truncated.state_count == 20
    assert truncated.transition_count == 19
    assert not check_cycle_closure(truncated)
    report = compare(truncated, full)
    assert report.missing_position_transitions == [(D, A)]
    assert report.missing_b == ()


def test_strict_mode_raises_with_partial_automaton(single_cycle, pmap):
    with pytest.raises(IncompleteCycleError) as err:
        learn_otala(single_cycle.observations(), pmap, strict=True)
    assert err.value.automaton.state_count == 20


def test_cycle_not_starting_at_a_cannot_close(single_cycle, pmap):
    obs = single_cycle.observations(include_closing=True)
    rotated = obs[1:] + obs[:2]
    a = learn_otala(rotated, pmap)
    assert not a.closed


def test_empty_cycle_is_rejected(pmap):
    with pytest.raises(DataValidationError):
        learn_otala([], pmap)


def test_position_map_validation(states):
    corners = {states[i - 1].sensors: states[i - 1].label for i in (1, 9, 13, 17)}
    pmap = PositionMap(corners)
    assert pmap.vector_for(C) == states[12].sensors
    assert is_position_state(states[0].sensors, pmap) is A
    assert is_position_state(states[1].sensors, pmap) is None
    with pytest.raises(DataValidationError):
        PositionMap({**corners, states[1].sensors: A})
    with pytest.raises(DataValidationError):
        PositionMap({states[0].sensors: A, states[1].sensors: A})
    with pytest.raises(DataValidationError):
        PositionMap({states[1].sensors: T})


def test_learn_all_on_clean_trace_agrees_everywhere(pmap):
    cycles = segment_cycles(simulate(SimConfig(cycles=8, noise=NoiseModel(dwell_jitter=1), seed=2)))
    run = learn_otala_all(cycles, pmap)
    assert len(run.per_cycle) == 8
    assert run.support == 8
    assert run.best_index == 0
    assert run.best.state_count == 20 and run.best.closed


def test_learn_all_picks_the_clean_automaton_under_noise(single_cycle, pmap):
    cycles = segment_cycles(simulate(SimConfig(cycles=20, noise=NoiseModel(bit_flip_prob=0.002), seed=4)))
    run = learn_otala_all(cycles, pmap)
    assert run.support >= 2
    assert run.best == learn_otala(single_cycle.observations(include_closing=True), pmap)


def test_out_degree_at_most_one_on_random_input(pmap):
    rng = np.random.default_rng(5)
    corners = list(pmap)
    for _ in range(100):
        obs = []
        for k in range(int(rng.integers(1, 40))):
            if rng.random() < 0.3:
                v = corners[int(rng.integers(0, 4))]
            else:
                v = SensorVector(tuple(rng.integers(0, 2, 11)))
            obs.append(Observation(k, v))
        a = learn_otala(obs, pmap)
        assert a.is_deterministic()
        assert a.transition_count == a.state_count - (0 if a.closed else 1)

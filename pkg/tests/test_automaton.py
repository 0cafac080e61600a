import json

import numpy as np
import pytest

from core.automaton import (Automaton, State, build_from_predictions, build_path,
                            check_cycle_closure, compare, from_json, read_automaton,
                            select_modal, to_dot, to_json, write_automaton)
from core.errors import AutomatonFormatError, DataValidationError
from core.trace import CLASSES, SensorVector

A, B, C, D, T = CLASSES


def _vec(k):
    return SensorVector.from_bitstring(f"{k:011b}")


def _random_automaton(rng):
    n = int(rng.integers(1, 25))
    labels = [None] + list(CLASSES)
    items = [(SensorVector(tuple(rng.integers(0, 2, 11))), labels[int(rng.integers(0, 6))])
             for _ in range(n)]
    return build_path(items, closing=bool(rng.integers(0, 2)))


def test_automaton_validation():
    states = (State(1, _vec(1), A), State(2, _vec(2)))
    with pytest.raises(DataValidationError):
        Automaton(states, initial=3, transitions=frozenset())
    with pytest.raises(DataValidationError):
        Automaton(states, initial=1, transitions=frozenset({(1, 5)}))
    with pytest.raises(DataValidationError):
        Automaton(states, initial=1, transitions=frozenset({(1, 2), (2, 1)}), closed=False)
    with pytest.raises(DataValidationError):
        Automaton(states + (State(1, _vec(3)),), initial=1, transitions=frozenset())


def test_build_from_perfect_labels(single_cycle):
    a = build_from_predictions(single_cycle.sensors_with_closing(), single_cycle.labels_with_closing())
    assert a.state_count == 20 and a.transition_count == 20 and a.closed
    assert a.position_labels() == {A, B, C, D}
    assert check_cycle_closure(a)


def test_build_from_predictions_dedups_pairs():
    obs = [_vec(1), _vec(1), _vec(2), _vec(2), _vec(3), _vec(1)]
    labels = [A, A, T, B, T, A]
    a = build_from_predictions(obs, labels)
    # (vec2, T) and (vec2, B) are different states
    assert a.state_count == 4
    assert a.closed
    with pytest.raises(DataValidationError):
        build_from_predictions(obs, labels[:-1])
    with pytest.raises(DataValidationError):
        build_from_predictions([], [])


def test_predictions_never_branch():
    rng = np.random.default_rng(13)
    for _ in range(100):
        n = int(rng.integers(1, 40))
        obs = [_vec(int(k)) for k in rng.integers(0, 6, size=n)]
        labels = [CLASSES[int(k)] for k in rng.integers(0, 5, size=n)]
        a = build_from_predictions(obs, labels)
        assert a.is_deterministic()
        assert all(a.out_degree(s.id) <= 1 for s in a.states)


def test_closure_needs_loop_order():
    items = [(_vec(1), A), (_vec(2), C), (_vec(3), B), (_vec(4), D)]
    assert not check_cycle_closure(build_path(items, closing=True))
    items = [(_vec(1), A), (_vec(2), B), (_vec(3), C), (_vec(4), D)]
    assert check_cycle_closure(build_path(items, closing=True))
    assert not check_cycle_closure(build_path(items, closing=False))


def test_select_modal_prefers_count_then_closed():
    items = [(_vec(1), A), (_vec(2), B)]
    open_a = build_path(items)
    closed_a = build_path(items, closing=True)
    assert select_modal([open_a, closed_a]) == (1, 1)
    assert select_modal([open_a, closed_a, open_a]) == (0, 2)
    with pytest.raises(DataValidationError):
        select_modal([])


def test_compare_fields():
    loop = build_path([(_vec(1), A), (_vec(2), B), (_vec(3), C), (_vec(4), D)], closing=True)
    partial = build_path([(_vec(1), A), (_vec(2), B), (_vec(5), None)])
    report = compare(partial, loop)
    assert (report.state_count_a, report.state_count_b) == (3, 4)
    assert (report.transition_count_a, report.transition_count_b) == (2, 4)
    assert (report.closed_a, report.closed_b) == (False, True)
    assert report.position_labels_present_a == (A, B)
    assert report.missing_a == ((B, C), (C, D), (D, A))
    assert report.missing_position_transitions == [(B, C), (C, D), (D, A)]
    assert report.rows()[0] == ("states", "3", "4")


def test_dot_export():
    a = build_path([(_vec(1), A), (_vec(2), None), (_vec(3), T)], closing=True)
    dot = to_dot(a)
    assert dot.startswith('digraph "automaton" {')
    assert "rankdir=LR;" in dot
    assert dot.count("peripheries=2") == 1
    assert dot.count("fillcolor") == 1
    assert dot.count(" -> ") == 3
    assert dot.rstrip().endswith("}")


def test_json_round_trip_on_random_automata():
    rng = np.random.default_rng(17)
    for _ in range(100):
        a = _random_automaton(rng)
        assert from_json(to_json(a)) == a


def test_json_errors_name_the_location():
    with pytest.raises(AutomatonFormatError) as err:
        from_json('{"schema_version": 1,\n "states": [}')
    assert err.value.line == 2
    doc = '{"schema_version": 1, "initial": 1, "closed": false, "transitions": [],' \
          ' "states": [{"id": 1, "output": "101", "label": null}]}'
    with pytest.raises(AutomatonFormatError, match=r"states\[0\]\.output"):
        from_json(doc)
    with pytest.raises(AutomatonFormatError, match="closed"):
        from_json('{"schema_version": 1, "initial": 1, "closed": true, "transitions": [],'
                  ' "states": [{"id": 1, "output": "00000000000", "label": "A"}]}')
    with pytest.raises(AutomatonFormatError, match="schema_version"):
        from_json('{"schema_version": 99}')


@pytest.mark.parametrize("path, value, field", [
    (("states", 0, "label"), 5, "states[0].label"),
    (("states", 0, "label"), ["A"], "states[0].label"),
    (("input_alphabet",), 5, "input_alphabet"),
    (("output_alphabet",), "00000000001", "output_alphabet"),
    (("input_alphabet", 0), 1, "input_alphabet[0]"),
    (("transitions", 0), [True, 1], "transitions[0]"),
    (("transitions", 0), [1, 2.0], "transitions[0]"),
])
def test_json_rejects_wrongly_typed_fields(path, value, field):
    a = build_path([(_vec(1), A), (_vec(2), B)], closing=True)
    doc = json.loads(to_json(a))
    target = doc
    for key in path[:-1]:
        target = target[key]
    target[path[-1]] = value
    with pytest.raises(AutomatonFormatError) as err:
        from_json(json.dumps(doc))
    assert err.value.field == field
    assert err.value.exit_code == 2


def test_write_and_read_files(tmp_path):
    a = build_path([(_vec(1), A), (_vec(2), B)], closing=True)
    write_automaton(a, tmp_path / "a.json", dot_path=tmp_path / "a.dot")
    assert read_automaton(tmp_path / "a.json") == a
    assert (tmp_path / "a.dot").read_text(encoding="utf-8") == to_dot(a)


def test_read_automaton_rejects_invalid_utf8(tmp_path):
    path = tmp_path / "a.json"
    path.write_bytes(b'{\n  "schema_version": 1,\n  "name": "\xc3"\n}\n')
    with pytest.raises(AutomatonFormatError, match="not valid UTF-8") as err:
        read_automaton(path)
    assert err.value.line == 3

"""Deterministic state-output automaton A = (I, O, S, f, T).

Each state outputs the sensor vector it stands for and may carry the corner
position label. Construction here only ever yields a path, optionally closed
back onto the initial state, but the data model admits branching.
"""

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Sequence

from core.errors import AutomatonFormatError, DataValidationError
from core.trace import POSITIONS, PositionLabel, SensorVector, dedup_consecutive

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
# Adjacent corner pairs of one conveying loop.
POSITION_CYCLE = tuple(zip(POSITIONS, POSITIONS[1:] + POSITIONS[:1]))


@dataclass(frozen=True)
class State:
    id: int
    output: SensorVector
    label: Optional[PositionLabel] = None

    @property
    def is_position(self):
        return self.label is not None and self.label.is_position


@dataclass(frozen=True)
class Automaton:
    states: tuple
    initial: int
    transitions: frozenset
    input_alphabet: frozenset = frozenset()
    output_alphabet: frozenset = frozenset()
    closed: bool = False

    def __post_init__(self):
        states = tuple(self.states)
        transitions = frozenset((int(a), int(b)) for a, b in self.transitions)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "transitions", transitions)
        object.__setattr__(self, "input_alphabet", frozenset(self.input_alphabet))
        object.__setattr__(self, "output_alphabet",
                           frozenset(self.output_alphabet) or frozenset(s.output for s in states))
        ids = [s.id for s in states]
        if len(set(ids)) != len(ids):
            raise DataValidationError("automaton state ids are not unique")
        known = set(ids)
        if self.initial not in known:
            raise DataValidationError(f"initial state {self.initial} is not a declared state")
        for a, b in transitions:
            if a not in known or b not in known:
                raise DataValidationError(f"transition {a}->{b} references an undeclared state")
        if self.closed != any(b == self.initial for _, b in transitions):
            raise DataValidationError("closed flag disagrees with transitions into the initial state")

    # --- Queries ---
    @property
    def state_count(self):
        return len(self.states)

    @property
    def transition_count(self):
        return len(self.transitions)

    def state(self, state_id):
        for s in self.states:
            if s.id == state_id:
                return s
        raise KeyError(state_id)

    def successors(self, state_id):
        return sorted(b for a, b in self.transitions if a == state_id)

    def out_degree(self, state_id):
        return len(self.successors(state_id))

    def is_deterministic(self):
        return all(self.out_degree(s.id) <= 1 for s in self.states)

    def position_labels(self):
        return {s.label for s in self.states if s.is_position}

    def signature(self):
        """Structural identity used to find the most frequent automaton."""
        return (tuple((s.output.bitstring(), s.label.token if s.label else None) for s in self.states),
                tuple(sorted(self.transitions)), self.closed)


# --- Construction ---
def build_path(items, closing=False):
    """One state per (output, label) item, chained in order; `closing` adds
    the edge from the last state back to the first."""
    states = tuple(State(k + 1, output, label) for k, (output, label) in enumerate(items))
    if not states:
        raise DataValidationError("cannot build an automaton from no observations")
    transitions = {(k, k + 1) for k in range(1, len(states))}
    if closing:
        transitions.add((len(states), 1))
    return Automaton(
        states=states,
        initial=1,
        transitions=frozenset(transitions),
        input_alphabet=frozenset(output for output, _ in items),
        closed=closing,
    )


def build_from_predictions(observations: Sequence[SensorVector], labels: Sequence[PositionLabel]):
    """Automaton from a classified sequence: dedup consecutive equal
    (observation, label) pairs, one state per pair, close on recurrence of
    the initial pair."""
    if len(observations) != len(labels):
        raise DataValidationError(
            f"{len(observations)} observations but {len(labels)} labels")
    if not observations:
        raise DataValidationError("cannot build an automaton from an empty sequence")
    pairs = dedup_consecutive(list(zip(observations, labels)), key=lambda pair: pair)
    items = [pairs[0]]
    closing = False
    for pair in pairs[1:]:
        if pair == pairs[0]:
            closing = True
            break
        items.append(pair)
    automaton = build_path(items, closing=closing)
    log.debug("built %d-state automaton from %d predictions (closed=%s)",
              automaton.state_count, len(observations), closing)
    return automaton


def select_modal(automata: Sequence[Automaton]):
    """Index of the most frequent automaton and its support. Ties prefer a
    closed automaton, then the earliest one."""
    if not automata:
        raise DataValidationError("no automata to choose from")
    signatures = [a.signature() for a in automata]
    counts = Counter(signatures)
    best = min(range(len(automata)),
               key=lambda k: (-counts[signatures[k]], not automata[k].closed, k))
    return best, counts[signatures[best]]


# --- Analysis ---
def _position_walk(a: Automaton, start):
    """Position labels met while following transitions from `start`,
    stopping at a dead end or an already visited state."""
    seen = {start}
    labels = []
    current = start
    while True:
        nxt = a.successors(current)
        if not nxt:
            return labels, False
        current = nxt[0]
        if current in seen:
            return labels, current == start
        seen.add(current)
        state = a.state(current)
        if state.is_position:
            labels.append(state.label)


def check_cycle_closure(a: Automaton):
    """True when the transitions lead from the initial state back to it,
    passing A, B, C and D in loop order."""
    initial = a.state(a.initial)
    labels, returned = _position_walk(a, a.initial)
    if not returned:
        return False
    sequence = ([initial.label] if initial.is_position else []) + labels
    collapsed = [l for k, l in enumerate(sequence) if k == 0 or l != sequence[k - 1]]
    if len(collapsed) > 1 and collapsed[0] == collapsed[-1]:
        collapsed.pop()
    if len(collapsed) != len(POSITIONS):
        return False
    k = collapsed.index(PositionLabel.A) if PositionLabel.A in collapsed else -1
    return k >= 0 and tuple(collapsed[k:] + collapsed[:k]) == POSITIONS


def missing_position_transitions(a: Automaton):
    """Adjacent corner pairs (X, Y) for which no path leads from an
    X-labelled state to a Y-labelled one without passing another corner."""
    missing = []
    for src, dst in POSITION_CYCLE:
        starts = [s.id for s in a.states if s.label is src]
        found = False
        for start in starts:
            labels, _ = _position_walk(a, start)
            nxt = [l for l in labels if l is not src][:1]
            if nxt == [dst]:
                found = True
                break
        if not found:
            missing.append((src, dst))
    return missing


@dataclass(frozen=True)
class ComparisonReport:
    state_count_a: int
    state_count_b: int
    transition_count_a: int
    transition_count_b: int
    closed_a: bool
    closed_b: bool
    position_labels_present_a: tuple
    position_labels_present_b: tuple
    missing_a: tuple = field(default=())
    missing_b: tuple = field(default=())

    @property
    def missing_position_transitions(self):
        """Pairs missing in either automaton, in loop order."""
        return [pair for pair in POSITION_CYCLE if pair in self.missing_a or pair in self.missing_b]

    def rows(self):
        def labels(ls):
            return ",".join(l.value for l in ls) or "-"

        def pairs(ps):
            return ", ".join(f"{x.value}->{y.value}" for x, y in ps) or "none"

        return [
            ("states", str(self.state_count_a), str(self.state_count_b)),
            ("transitions", str(self.transition_count_a), str(self.transition_count_b)),
            ("closed", str(self.closed_a).lower(), str(self.closed_b).lower()),
            ("positions", labels(self.position_labels_present_a), labels(self.position_labels_present_b)),
            ("missing", pairs(self.missing_a), pairs(self.missing_b)),
        ]


def compare(a: Automaton, b: Automaton):
    def present(x):
        return tuple(p for p in POSITIONS if p in x.position_labels())

    return ComparisonReport(
        state_count_a=a.state_count,
        state_count_b=b.state_count,
        transition_count_a=a.transition_count,
        transition_count_b=b.transition_count,
        closed_a=a.closed,
        closed_b=b.closed,
        position_labels_present_a=present(a),
        position_labels_present_b=present(b),
        missing_a=tuple(missing_position_transitions(a)),
        missing_b=tuple(missing_position_transitions(b)),
    )


# --- Export ---
def to_dot(a: Automaton, name="automaton"):
    lines = [f'digraph "{name}" {{', "\trankdir=LR;", "\tnode [shape=circle, fontname=monospace];"]
    for s in a.states:
        tag = f" {s.label.value}" if s.is_position else ""
        attrs = [f'label="{s.id}{tag}\\n{s.output.bitstring()}"']
        if s.id == a.initial:
            attrs.append("peripheries=2")
        if s.is_position:
            attrs.append('style=filled, fillcolor="#cde7f0"')
        lines.append(f"\t{s.id} [{', '.join(attrs)}];")
    for src, dst in sorted(a.transitions):
        lines.append(f"\t{src} -> {dst};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def to_json(a: Automaton):
    document = {
        "schema_version": SCHEMA_VERSION,
        "initial": a.initial,
        "closed": a.closed,
        "states": [
            {"id": s.id, "output": s.output.bitstring(), "label": s.label.token if s.label else None}
            for s in a.states
        ],
        "transitions": [[src, dst] for src, dst in sorted(a.transitions)],
        "input_alphabet": sorted(v.bitstring() for v in a.input_alphabet),
        "output_alphabet": sorted(v.bitstring() for v in a.output_alphabet),
    }
    return json.dumps(document, indent=2) + "\n"


def _require(doc, key, kind, where):
    if key not in doc:
        raise AutomatonFormatError("missing field", field=f"{where}{key}")
    value = doc[key]
    if kind is int and isinstance(value, bool) or not isinstance(value, kind):
        raise AutomatonFormatError(f"expected {kind.__name__}", field=f"{where}{key}")
    return value


def _vector(text, where):
    if not isinstance(text, str):
        raise AutomatonFormatError("expected str", field=where)
    try:
        return SensorVector.from_bitstring(text)
    except (DataValidationError, ValueError, AttributeError) as e:
        raise AutomatonFormatError(str(e), field=where)


def _is_int(value):
    return isinstance(value, int) and not isinstance(value, bool)


def _alphabet(doc, key):
    entries = doc.get(key, [])
    if not isinstance(entries, list):
        raise AutomatonFormatError("expected list", field=key)
    return [_vector(v, f"{key}[{k}]") for k, v in enumerate(entries)]


def from_json(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise AutomatonFormatError(e.msg, line=e.lineno, column=e.colno)
    if not isinstance(doc, dict):
        raise AutomatonFormatError("top level must be an object", line=1, column=1)
    version = _require(doc, "schema_version", int, "")
    if version > SCHEMA_VERSION:
        raise AutomatonFormatError(f"schema_version {version} is newer than {SCHEMA_VERSION}",
                                   field="schema_version")
    states = []
    for k, entry in enumerate(_require(doc, "states", list, "")):
        where = f"states[{k}]."
        if not isinstance(entry, dict):
            raise AutomatonFormatError("expected object", field=f"states[{k}]")
        label = entry.get("label")
        if label is not None and not isinstance(label, str):
            raise AutomatonFormatError("expected str or null", field=f"{where}label")
        try:
            label = PositionLabel.from_token(label) if label is not None else None
        except ValueError as e:
            raise AutomatonFormatError(str(e), field=f"{where}label")
        states.append(State(_require(entry, "id", int, where),
                            _vector(_require(entry, "output", str, where), f"{where}output"),
                            label))
    transitions = []
    for k, pair in enumerate(_require(doc, "transitions", list, "")):
        if not (isinstance(pair, list) and len(pair) == 2 and all(_is_int(x) for x in pair)):
            raise AutomatonFormatError("expected [from, to]", field=f"transitions[{k}]")
        transitions.append(tuple(pair))
    inputs = _alphabet(doc, "input_alphabet")
    outputs = _alphabet(doc, "output_alphabet")
    try:
        return Automaton(
            states=tuple(states),
            initial=_require(doc, "initial", int, ""),
            transitions=frozenset(transitions),
            input_alphabet=frozenset(inputs),
            output_alphabet=frozenset(outputs),
            closed=_require(doc, "closed", bool, ""),
        )
    except DataValidationError as e:
        raise AutomatonFormatError(str(e))


def read_automaton(path):
    with open(path, "rb") as f:
        raw = f.read()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as e:
        raise AutomatonFormatError(f"byte 0x{raw[e.start]:02x} is not valid UTF-8",
                                   line=raw[:e.start].count(b"\n") + 1)
    return from_json(text)


def write_automaton(a: Automaton, path, dot_path=None):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(to_json(a))
    if dot_path is not None:
        with open(dot_path, "w", encoding="utf-8", newline="\n") as f:
            f.write(to_dot(a))

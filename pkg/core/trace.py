"""Trace data model: sensor vectors, position labels, labeled traces and
cycles, plus the CSV trace format.

Trace CSV::

    # sampling_period_ms=500
    1,0,0,0,1,0,0,0,0,1,0,A
    ...

Eleven binary sensor columns followed by a label token (A, B, C, D, T for
Transition, ? for an unlabeled sample).
"""

import csv
import io
import logging
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from operator import attrgetter
from typing import Iterable, Optional, Sequence

import numpy as np

from core.errors import DataValidationError, SegmentationError, TraceFormatError

log = logging.getLogger(__name__)

N_SENSORS = 11
DEFAULT_SAMPLING_PERIOD_MS = 500
HEADER_PATTERN = re.compile(r"^#\s*sampling_period_ms\s*=\s*(\S+)\s*$")
UNLABELED_TOKEN = "?"


# --- Domain types ---
@dataclass(frozen=True)
class SensorVector:
    """One PLC scan of the eleven proximity sensors (index = sensor id)."""

    bits: tuple

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if len(bits) != N_SENSORS:
            raise DataValidationError(f"sensor vector needs {N_SENSORS} bits, got {len(bits)}")
        if any(b not in (0, 1) for b in bits):
            raise DataValidationError(f"sensor values must be 0 or 1: {bits}")
        object.__setattr__(self, "bits", bits)

    @classmethod
    def from_bitstring(cls, text):
        return cls(tuple(int(ch) for ch in text.strip()))

    @classmethod
    def zeros(cls):
        return cls((0,) * N_SENSORS)

    def bitstring(self):
        return "".join(str(b) for b in self.bits)

    def flipped(self, mask):
        return SensorVector(tuple(b ^ int(m) for b, m in zip(self.bits, mask)))

    def __iter__(self):
        return iter(self.bits)

    def __len__(self):
        return len(self.bits)

    def __getitem__(self, index):
        return self.bits[index]

    def __str__(self):
        return self.bitstring()


class PositionLabel(Enum):
    A = "A"
    B = "B"
    C = "C"
    D = "D"
    TRANSITION = "T"

    @property
    def index(self):
        return _LABEL_ORDER.index(self)

    @property
    def token(self):
        return self.value

    @property
    def is_position(self):
        return self is not PositionLabel.TRANSITION

    @classmethod
    def from_token(cls, token):
        token = token.strip()
        if token in ("Transition", "TRANSITION"):
            return cls.TRANSITION
        try:
            return cls(token)
        except ValueError:
            raise ValueError(f"unknown label '{token}'") from None


# Class order of the classifier output; ties in argmax resolve to the lowest index.
_LABEL_ORDER = (PositionLabel.A, PositionLabel.B, PositionLabel.C, PositionLabel.D,
                PositionLabel.TRANSITION)
CLASSES = _LABEL_ORDER
N_CLASSES = len(CLASSES)
POSITIONS = _LABEL_ORDER[:4]


@dataclass(frozen=True)
class Observation:
    index: int
    sensors: SensorVector


@dataclass(frozen=True)
class LabeledTrace:
    samples: tuple
    sampling_period_ms: int = DEFAULT_SAMPLING_PERIOD_MS

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple((s, l) for s, l in self.samples))
        if not isinstance(self.sampling_period_ms, int) or self.sampling_period_ms <= 0:
            raise DataValidationError(
                f"sampling_period_ms must be a positive integer, got {self.sampling_period_ms!r}")

    def __len__(self):
        return len(self.samples)

    @property
    def sensors(self):
        return [s for s, _ in self.samples]

    @property
    def labels(self):
        return [l for _, l in self.samples]

    @property
    def is_labeled(self):
        return all(l is not None for _, l in self.samples)

    def observations(self):
        return [Observation(i, s) for i, (s, _) in enumerate(self.samples)]

    def sensor_matrix(self):
        if not self.samples:
            return np.zeros((0, N_SENSORS))
        return np.array([s.bits for s, _ in self.samples], dtype=np.float64)


@dataclass(frozen=True)
class Cycle:
    """Half-open slice [start_index, end_index) of a trace beginning at an
    A-run onset. `closing` is the sample at end_index, i.e. the block back
    at position A at the start of the next cycle."""

    start_index: int
    end_index: int
    samples: tuple
    closing: Optional[tuple] = field(default=None, compare=False)

    def __post_init__(self):
        if self.end_index <= self.start_index:
            raise SegmentationError(
                f"empty cycle [{self.start_index}, {self.end_index})")
        if len(self.samples) != self.end_index - self.start_index:
            raise SegmentationError("cycle samples do not match its index range")

    def __len__(self):
        return len(self.samples)

    @property
    def sensors(self):
        return [s for s, _ in self.samples]

    @property
    def labels(self):
        return [l for _, l in self.samples]

    def observations(self, include_closing=False):
        obs = [Observation(self.start_index + k, s) for k, (s, _) in enumerate(self.samples)]
        if include_closing and self.closing is not None:
            obs.append(Observation(self.end_index, self.closing[0]))
        return obs

    def sensors_with_closing(self):
        sensors = self.sensors
        if self.closing is not None:
            sensors.append(self.closing[0])
        return sensors

    def labels_with_closing(self):
        labels = self.labels
        if self.closing is not None:
            labels.append(self.closing[1])
        return labels

    def sensor_matrix(self):
        return np.array([s.bits for s, _ in self.samples], dtype=np.float64)


# --- Operations ---
def dedup_consecutive(trace: Sequence, key=attrgetter("sensors")):
    """Drop every element whose key equals its predecessor's (repeated PLC
    scans while the plant is idle)."""
    result = []
    previous = object()
    for item in trace:
        current = key(item)
        if not result or current != previous:
            result.append(item)
        previous = current
    return result


def _a_onsets(labels):
    return [i for i, label in enumerate(labels)
            if label is PositionLabel.A and (i == 0 or labels[i - 1] is not PositionLabel.A)]


def segment_cycles(trace: LabeledTrace):
    """Cut the trace at the onsets of maximal A-runs. The tail after the last
    onset is an incomplete cycle and is dropped."""
    labels = trace.labels
    if not trace.is_labeled:
        raise SegmentationError("cycle segmentation needs a fully labeled trace")
    onsets = _a_onsets(labels)
    if len(onsets) < 2:
        log.debug("found %d A-onset(s); no complete cycle", len(onsets))
        return []
    cycles = []
    for start, end in zip(onsets, onsets[1:]):
        cycles.append(Cycle(start, end, trace.samples[start:end], closing=trace.samples[end]))
    log.debug("segmented %d cycles, discarded %d tail samples",
              len(cycles), len(trace) - onsets[-1])
    return cycles


def split_segments(trace: LabeledTrace):
    """Index ranges covering the whole trace, cut at every A-onset (head
    before the first onset and tail after the last one included)."""
    if not trace.samples:
        return []
    bounds = _a_onsets(trace.labels) if trace.is_labeled else []
    bounds = sorted(set([0] + bounds + [len(trace)]))
    return list(zip(bounds, bounds[1:]))


def split_train_test(cycles: Sequence[Cycle], train_fraction: float):
    n = len(cycles)
    if not 0.0 < train_fraction < 1.0:
        raise DataValidationError(f"train fraction must lie in (0, 1), got {train_fraction}")
    if n < 2:
        raise SegmentationError("need ≥2 cycles to split")
    n_train = math.floor(train_fraction * n + 1e-9)
    if n_train == 0 or n_train == n:
        raise SegmentationError(
            f"train fraction {train_fraction} on {n} cycles leaves an empty split")
    return list(cycles[:n_train]), list(cycles[n_train:])


def validate_cycles(cycles: Iterable[Cycle]):
    """Every cycle must carry one label per timestep, from the five classes,
    on 11-feature vectors."""
    for k, cycle in enumerate(cycles):
        sensors, labels = cycle.sensors, cycle.labels
        if len(sensors) != len(labels):
            raise DataValidationError(
                f"cycle {k}: {len(sensors)} timesteps but {len(labels)} labels")
        for t, (vector, label) in enumerate(zip(sensors, labels)):
            if not isinstance(label, PositionLabel):
                raise DataValidationError(f"cycle {k}, step {t}: label {label!r} outside the classes")
            if len(vector) != N_SENSORS:
                raise DataValidationError(
                    f"cycle {k}, step {t}: {len(vector)} features instead of {N_SENSORS}")


# --- File format ---
def _parse_rows(lines, source):
    period = DEFAULT_SAMPLING_PERIOD_MS
    samples = []
    start = 0
    if lines and lines[0].startswith("#"):
        match = HEADER_PATTERN.match(lines[0])
        if not match:
            raise TraceFormatError(f"bad header {lines[0].strip()!r}", line=1)
        try:
            period = int(match.group(1))
        except ValueError:
            raise TraceFormatError(f"sampling period {match.group(1)!r} is not an integer", line=1)
        start = 1
    for offset, row in enumerate(csv.reader(lines[start:])):
        line_no = start + offset + 1
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != N_SENSORS + 1:
            raise TraceFormatError(
                f"expected {N_SENSORS} sensor columns and a label, got {len(row) - 1} sensor columns",
                line=line_no)
        cells = [c.strip() for c in row]
        if any(c not in ("0", "1") for c in cells[:N_SENSORS]):
            raise TraceFormatError(f"non-binary sensor value in {cells[:N_SENSORS]}", line=line_no)
        token = cells[N_SENSORS]
        if token == UNLABELED_TOKEN:
            label = None
        else:
            try:
                label = PositionLabel.from_token(token)
            except ValueError as e:
                raise TraceFormatError(str(e), line=line_no)
        samples.append((SensorVector(tuple(int(c) for c in cells[:N_SENSORS])), label))
    try:
        return LabeledTrace(tuple(samples), sampling_period_ms=period)
    except DataValidationError as e:
        raise TraceFormatError(f"{source}: {e}", line=1)


def parse_trace(text, source="<string>"):
    return _parse_rows(text.splitlines(keepends=True), source)


def format_trace(trace: LabeledTrace):
    out = io.StringIO()
    out.write(f"# sampling_period_ms={trace.sampling_period_ms}\n")
    writer = csv.writer(out, lineterminator="\n")
    for sensors, label in trace.samples:
        writer.writerow(list(sensors.bits) + [label.token if label is not None else UNLABELED_TOKEN])
    return out.getvalue()


def read_trace_file(path):
    with open(path, "rb") as f:
        raw = f.read()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as e:
        raise TraceFormatError(f"{path}: byte 0x{raw[e.start]:02x} is not valid UTF-8",
                               line=raw[:e.start].count(b"\n") + 1)
    trace = parse_trace(text, source=str(path))
    log.info("read %d samples from %s", len(trace), path)
    return trace


def write_trace_file(trace: LabeledTrace, path):
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(format_trace(trace))
    log.info("wrote %d samples to %s", len(trace), path)

"""End-to-end run: trace -> cycles -> LSTM and OTALA automata -> comparison.

Stages run in order and each failure is re-raised as a StageError naming the
stage, so the command line can tell where a run stopped. Artifacts are
written only after every stage has succeeded.
"""

import logging
import os
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from typing import Optional

from core.automaton import (build_from_predictions, compare, select_modal, to_dot,
                            to_json)
from core.errors import PlcAutomataError, StageError, UsageError
from core.lstm import TrainConfig, classify_sequence, evaluate, model_to_json, train
from core.otala import OtalaRun, PositionMap, learn_otala, learn_otala_all
from core.plant import SimConfig, position_map, simulate
from core.report import render_comparison, render_confusion
from core.trace import CLASSES, read_trace_file, segment_cycles, split_train_test, validate_cycles

log = logging.getLogger(__name__)

ARTIFACTS = ("model.json", "history.csv", "otala.json", "otala.dot",
             "lstm.json", "lstm.dot", "report.txt")


@dataclass(frozen=True)
class RunConfig:
    out_dir: str
    trace_path: Optional[str] = None
    sim: SimConfig = field(default_factory=SimConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    train_fraction: float = 0.8
    otala_cycle: Optional[int] = None

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise UsageError(f"train fraction must lie in (0, 1), got {self.train_fraction}")
        if self.trace_path is not None and not os.path.isfile(self.trace_path):
            raise UsageError(f"trace file not found: {self.trace_path}")
        if self.otala_cycle is not None and self.otala_cycle < 0:
            raise UsageError(f"otala cycle must be >= 0, got {self.otala_cycle}")
        if os.path.exists(self.out_dir) and not os.path.isdir(self.out_dir):
            raise UsageError(f"output path is not a directory: {self.out_dir}")
        parent = os.path.dirname(os.path.abspath(self.out_dir))
        if not os.path.isdir(parent):
            raise UsageError(f"parent of output directory does not exist: {parent}")


@dataclass
class PipelineResult:
    trace: object = None
    cycles: list = field(default_factory=list)
    train_cycles: list = field(default_factory=list)
    test_cycles: list = field(default_factory=list)
    params: object = None
    history: object = None
    evaluation: object = None
    lstm_automata: tuple = ()
    lstm_index: int = 0
    lstm_support: int = 0
    otala: Optional[OtalaRun] = None
    report: object = None
    artifacts: dict = field(default_factory=dict)

    @property
    def lstm_automaton(self):
        return self.lstm_automata[self.lstm_index]

    @property
    def otala_automaton(self):
        return self.otala.best


@contextmanager
def stage(name):
    log.info("stage %s", name)
    try:
        yield
    except StageError:
        raise
    except PlcAutomataError as e:
        raise StageError(name, e) from e
    except OSError as e:
        raise StageError(name, UsageError(f"{e.strerror}: {e.filename}")) from e


def lstm_automata(cycles, params):
    """One automaton per cycle from the classifier's labels, the closing
    observation included. The recurrent state restarts at every A-onset, so
    the closing sample is classified on its own."""
    automata = []
    for cycle in cycles:
        labels = classify_sequence(cycle.sensor_matrix(), params)
        if cycle.closing is not None:
            labels.append(classify_sequence([cycle.closing[0]], params)[0])
        automata.append(build_from_predictions(cycle.sensors_with_closing(), labels))
    return tuple(automata)


def format_report(result, enable_color=False):
    ev = result.evaluation
    otala = result.otala
    lines = [
        "plcautomata pipeline report",
        "",
        f"samples: {len(result.trace)}",
        f"cycles: {len(result.cycles)} (train {len(result.train_cycles)}, test {len(result.test_cycles)})",
        f"final training loss: {result.history.loss[-1]:.4f}",
        f"final training accuracy: {result.history.train_accuracy[-1]:.4f}",
        f"test accuracy (pooled): {ev.pooled:.4f}",
        f"test accuracy (per cycle): min {min(ev.per_cycle):.4f}, max {max(ev.per_cycle):.4f}",
        f"OTALA automaton: cycle {otala.best_index} (support {otala.support}/{len(otala.per_cycle)})",
        f"LSTM automaton: test cycle {result.lstm_index} "
        f"(support {result.lstm_support}/{len(result.lstm_automata)})",
        "",
        render_comparison(result.report, enable_color=enable_color),
        "",
        render_confusion(ev.confusion, CLASSES, enable_color=enable_color),
    ]
    missing = result.report.missing_position_transitions
    if missing:
        lines.append("")
        lines.append("missing position transitions: "
                     + ", ".join(f"{x.value}->{y.value}" for x, y in missing))
    return "\n".join(lines) + "\n"


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)


def export(result, cfg: RunConfig):
    os.makedirs(cfg.out_dir, exist_ok=True)
    contents = {
        "model.json": model_to_json(result.params, cfg.train, result.history),
        "history.csv": result.history.to_csv(),
        "otala.json": to_json(result.otala_automaton),
        "otala.dot": to_dot(result.otala_automaton, name="otala"),
        "lstm.json": to_json(result.lstm_automaton),
        "lstm.dot": to_dot(result.lstm_automaton, name="lstm"),
        "report.txt": format_report(result),
    }
    for name in ARTIFACTS:
        path = os.path.join(cfg.out_dir, name)
        _write(path, contents[name])
        result.artifacts[name] = path
    log.info("wrote %d artifacts to %s", len(ARTIFACTS), cfg.out_dir)


def run_pipeline(cfg: RunConfig, pmap=None):
    result = PipelineResult()
    pmap = PositionMap.coerce(pmap if pmap is not None else position_map())

    with stage("ingest"):
        result.trace = read_trace_file(cfg.trace_path) if cfg.trace_path else simulate(cfg.sim)
    with stage("segment"):
        result.cycles = segment_cycles(result.trace)
        log.info("%d cycles in %d samples", len(result.cycles), len(result.trace))
    with stage("split"):
        result.train_cycles, result.test_cycles = split_train_test(result.cycles, cfg.train_fraction)
    with stage("validate"):
        validate_cycles(result.train_cycles)
        validate_cycles(result.test_cycles)
    with stage("train"):
        result.params, result.history = train(result.train_cycles, cfg.train,
                                              val_cycles=result.test_cycles)
    with stage("classify"):
        result.evaluation = evaluate(result.test_cycles, result.params)
        result.history = replace(result.history, test_accuracy=result.evaluation.pooled)
        log.info("test accuracy %.4f over %d cycles", result.evaluation.pooled, len(result.test_cycles))
    with stage("lstm-automaton"):
        result.lstm_automata = lstm_automata(result.test_cycles, result.params)
        result.lstm_index, result.lstm_support = select_modal(result.lstm_automata)
    with stage("otala"):
        if cfg.otala_cycle is None:
            result.otala = learn_otala_all(result.cycles, pmap)
        else:
            if cfg.otala_cycle >= len(result.cycles):
                raise UsageError(f"otala cycle {cfg.otala_cycle} out of range "
                                 f"(trace has {len(result.cycles)} cycles)")
            chosen = result.cycles[cfg.otala_cycle]
            automaton = learn_otala(chosen.observations(include_closing=True), pmap)
            result.otala = OtalaRun(per_cycle=(automaton,), best_index=0, support=1)
    with stage("compare"):
        result.report = compare(result.otala_automaton, result.lstm_automaton)
    with stage("export"):
        export(result, cfg)
    return result

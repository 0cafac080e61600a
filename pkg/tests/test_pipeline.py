import os

import pytest

from core.automaton import check_cycle_closure, read_automaton
from core.errors import StageError, UsageError
from core.lstm import TrainConfig, load_model
from core.pipeline import ARTIFACTS, RunConfig, lstm_automata, run_pipeline
from core.plant import NoiseModel, SimConfig, simulate
from core.trace import write_trace_file


def _config(out_dir, **kw):
    kw.setdefault("sim", SimConfig(cycles=6, seed=2))
    kw.setdefault("train", TrainConfig(hidden=6, epochs=4, seed=2))
    return RunConfig(out_dir=str(out_dir), **kw)


def test_pipeline_writes_readable_artifacts(tmp_path):
    result = run_pipeline(_config(tmp_path / "run"))
    assert sorted(result.artifacts) == sorted(ARTIFACTS)
    for name in ARTIFACTS:
        assert os.path.isfile(tmp_path / "run" / name)
    params, cfg, history = load_model(tmp_path / "run" / "model.json")
    assert cfg.hidden == 6 and len(history) == 4
    assert history.test_accuracy == result.evaluation.pooled
    assert read_automaton(tmp_path / "run" / "otala.json") == result.otala_automaton
    assert read_automaton(tmp_path / "run" / "lstm.json") == result.lstm_automaton
    assert result.otala_automaton.state_count == 20 and result.otala_automaton.closed
    assert len(result.train_cycles) == 4 and len(result.test_cycles) == 2
    report = (tmp_path / "run" / "report.txt").read_text(encoding="utf-8")
    assert "test accuracy (pooled)" in report
    assert str(tmp_path) not in report


def test_pipeline_is_deterministic(tmp_path):
    cfg = dict(sim=SimConfig(cycles=6, seed=8, noise=NoiseModel(bit_flip_prob=0.01)))
    run_pipeline(_config(tmp_path / "one", **cfg))
    run_pipeline(_config(tmp_path / "two", **cfg))
    for name in ARTIFACTS:
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes(), name


def test_pipeline_reads_a_trace_file(tmp_path):
    path = tmp_path / "trace.csv"
    write_trace_file(simulate(SimConfig(cycles=5)), path)
    result = run_pipeline(_config(tmp_path / "run", trace_path=str(path), otala_cycle=3))
    assert len(result.cycles) == 5
    assert len(result.otala.per_cycle) == 1 and check_cycle_closure(result.otala_automaton)


def test_one_cycle_fails_in_split_stage(tmp_path):
    with pytest.raises(StageError, match=r"\[split\] need ≥2 cycles to split") as err:
        run_pipeline(_config(tmp_path / "run", sim=SimConfig(cycles=1)))
    assert err.value.stage == "split"
    assert err.value.exit_code == 2
    assert not (tmp_path / "run").exists()


def test_otala_cycle_out_of_range(tmp_path):
    with pytest.raises(StageError) as err:
        run_pipeline(_config(tmp_path / "run", otala_cycle=99))
    assert err.value.stage == "otala" and err.value.exit_code == 1


def test_run_config_validates_paths(tmp_path):
    with pytest.raises(UsageError):
        RunConfig(out_dir=str(tmp_path / "out"), trace_path=str(tmp_path / "missing.csv"))
    with pytest.raises(UsageError):
        RunConfig(out_dir=str(tmp_path / "no" / "such" / "dir"))
    with pytest.raises(UsageError):
        RunConfig(out_dir=str(tmp_path), train_fraction=1.5)


def test_lstm_automata_from_a_perfect_classifier(single_cycle, monkeypatch):
    from core import pipeline

    def oracle(seq, params):
        if len(seq) == 1:
            return single_cycle.labels_with_closing()[-1:]
        return single_cycle.labels

    monkeypatch.setattr(pipeline, "classify_sequence", oracle)
    (a,) = lstm_automata([single_cycle], params=None)
    assert a.state_count == 20 and a.closed and check_cycle_closure(a)


@pytest.mark.slow
def test_full_size_pipeline(tmp_path):
    cfg = RunConfig(out_dir=str(tmp_path / "run"),
                    sim=SimConfig(noise=NoiseModel(bit_flip_prob=0.01)))
    result = run_pipeline(cfg)
    assert len(result.train_cycles) == 40 and len(result.test_cycles) == 11
    assert result.evaluation.pooled >= 0.90
    assert result.history.train_accuracy[500] >= 0.95
    assert result.otala_automaton.closed
    assert read_automaton(tmp_path / "run" / "lstm.json") == result.lstm_automaton

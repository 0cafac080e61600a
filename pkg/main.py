import argparse
import logging
import sys

from __version__ import __version__, __description__
from core.ansi import RED_FG, ColorFormatter, colorize
from core.automaton import compare, read_automaton, to_dot, to_json, write_automaton
from core.braillify import plot_series
from core.configman import ConfigManager
from core.errors import PlcAutomataError, UsageError
from core.lstm import TrainConfig, accuracy, classify_sequence, evaluate, load_model, save_model, train
from core.otala import learn_otala, learn_otala_all
from core.pipeline import RunConfig, format_report, run_pipeline
from core.plant import DwellProfile, NoiseModel, SimConfig, position_map, simulate
from core.report import render_comparison
from core.trace import (LabeledTrace, read_trace_file, segment_cycles, split_segments,
                        split_train_test, write_trace_file)


class ArgumentParser(argparse.ArgumentParser):
    """Usage errors exit with status 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def setup_logging(verbose, quiet, enable_color):
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(ColorFormatter(enable_color=enable_color and sys.stderr.isatty()))
    root = logging.getLogger()
    root.handlers[:] = [handler]
    root.setLevel(level)


# --- Settings ---
def load_settings(args):
    """Typed settings: command line flag > config file > default."""
    cm = ConfigManager(args.config)
    overrides = {}
    for dest, value in vars(args).items():
        key = dest.replace("_", "-")
        if key in cm.DEFAULT_CONFIG:
            overrides[key] = value
    settings = cm.merged(overrides)
    settings["_explicit"] = cm.from_file | {k for k, v in overrides.items() if v is not None}
    return settings


def sim_config(s):
    if s["dwell"] is not None:
        position = s["position-dwell"] if "position-dwell" in s["_explicit"] else s["dwell"]
        dwell = DwellProfile.default(position_dwell=position, transition_dwell=s["dwell"])
    else:
        dwell = DwellProfile.default(position_dwell=s["position-dwell"])
    return SimConfig(
        cycles=s["cycles"],
        dwell=dwell,
        noise=NoiseModel(bit_flip_prob=s["bit-flip-prob"], dwell_jitter=s["dwell-jitter"]),
        seed=s["seed"],
        close_final_cycle=s["close-final-cycle"],
        sampling_period_ms=s["sampling-period-ms"],
    )


def train_config(s):
    return TrainConfig(
        hidden=s["hidden"],
        epochs=s["epochs"],
        learning_rate=s["learning-rate"],
        beta1=s["beta1"],
        beta2=s["beta2"],
        epsilon=s["epsilon"],
        init_scale=s["init-scale"],
        forget_bias=s["forget-bias"],
        seed=s["seed"],
        layers=s["layers"],
    )


def print_curves(history, enable_color):
    print(plot_series(history.loss, "loss", lo=0.0, enable_color=enable_color))
    print(plot_series(history.train_accuracy, "training accuracy", lo=0.0, hi=1.0,
                      enable_color=enable_color))


# --- Commands ---
def cmd_simulate(args, s):
    trace = simulate(sim_config(s))
    try:
        write_trace_file(trace, args.out)
    except OSError as e:
        raise UsageError(f"cannot write {args.out}: {e.strerror}")
    cycles = segment_cycles(trace)
    print(f"{len(trace)} samples, {len(cycles)} cycles -> {args.out}")


def cmd_train(args, s):
    cfg = train_config(s)
    trace = read_trace_file(args.trace)
    train_cycles, test_cycles = split_train_test(segment_cycles(trace), s["train-fraction"])
    params, history = train(train_cycles, cfg, val_cycles=test_cycles)
    history.test_accuracy = evaluate(test_cycles, params).pooled
    save_model(args.model, params, cfg, history)
    if args.history:
        with open(args.history, "w", encoding="utf-8", newline="\n") as f:
            f.write(history.to_csv())
    print(f"trained on {len(train_cycles)} cycles: loss {history.loss[-1]:.4f}, "
          f"training accuracy {history.train_accuracy[-1]:.4f}, "
          f"test accuracy {history.test_accuracy:.4f}")
    if s["ascii-plot"]:
        print_curves(history, not s["no-color"])


def cmd_classify(args, s):
    params, _, _ = load_model(args.model)
    trace = read_trace_file(args.trace)
    X = trace.sensor_matrix()
    predictions = []
    # recurrent state restarts at each A-onset of a labeled trace
    for start, end in split_segments(trace):
        predictions.extend(classify_sequence(X[start:end], params))
    if args.out:
        write_trace_file(LabeledTrace(tuple(zip(trace.sensors, predictions)),
                                      sampling_period_ms=trace.sampling_period_ms), args.out)
    if trace.is_labeled and len(trace):
        print(f"{len(trace)} samples classified, accuracy {accuracy(predictions, trace.labels):.4f}")
    else:
        print(f"{len(trace)} samples classified")


def cmd_otala(args, s):
    trace = read_trace_file(args.trace)
    pmap = position_map()
    cycle = s["otala-cycle"]
    if not trace.is_labeled:
        automaton = learn_otala(trace.observations(), pmap, strict=args.strict)
        source = "whole trace"
    else:
        cycles = segment_cycles(trace)
        if cycle is not None:
            if not 0 <= cycle < len(cycles):
                raise UsageError(f"cycle {cycle} out of range (trace has {len(cycles)} cycles)")
            automaton = learn_otala(cycles[cycle].observations(include_closing=True), pmap,
                                    strict=args.strict)
            source = f"cycle {cycle}"
        else:
            run = learn_otala_all(cycles, pmap)
            automaton = run.best
            source = f"cycle {run.best_index}, support {run.support}/{len(cycles)}"
    summary = (f"OTALA ({source}): {automaton.state_count} states, "
               f"{automaton.transition_count} transitions, closed={str(automaton.closed).lower()}")
    if args.out:
        write_automaton(automaton, args.out, dot_path=args.dot)
    elif args.dot:
        with open(args.dot, "w", encoding="utf-8", newline="\n") as f:
            f.write(to_dot(automaton))
    else:
        # stdout carries the JSON document followed by the DOT graph
        print(to_json(automaton), end="")
        print(to_dot(automaton), end="")
        print(summary, file=sys.stderr)
        return
    print(summary)


def cmd_pipeline(args, s):
    cfg = RunConfig(
        out_dir=args.out_dir,
        trace_path=args.trace,
        sim=sim_config(s),
        train=train_config(s),
        train_fraction=s["train-fraction"],
        otala_cycle=s["otala-cycle"],
    )
    result = run_pipeline(cfg)
    color = not s["no-color"]
    print(format_report(result, enable_color=color), end="")
    if s["ascii-plot"]:
        print_curves(result.history, color)


def cmd_compare(args, s):
    a, b = read_automaton(args.a), read_automaton(args.b)
    print(render_comparison(compare(a, b), title="comparison", names=(args.a, args.b),
                            enable_color=not s["no-color"]))


def cmd_export_dot(args, s):
    dot = to_dot(read_automaton(args.automaton))
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as f:
            f.write(dot)
    else:
        print(dot, end="")


# --- Argument parsing ---
def _add_sim_flags(p):
    g = p.add_argument_group("simulation")
    g.add_argument("--cycles", type=int, help="plant cycles to simulate (default 51)")
    g.add_argument("--dwell", type=int, help="samples per state, for every state; --dwell 1 "
                   "--no-close-final-cycle gives exactly cycles x 20 samples")
    g.add_argument("--position-dwell", type=int, help="samples per corner state (default 2)")
    g.add_argument("--bit-flip-prob", type=float, help="per-bit flip probability (default 0)")
    g.add_argument("--dwell-jitter", type=int, help="max +/- samples added to each dwell")
    g.add_argument("--sampling-period-ms", type=int, help="PLC scan period (default 500)")
    g.add_argument("--close-final-cycle", action=argparse.BooleanOptionalAction, default=None,
                   help="end the trace with the block back at position A (default on)")


def _add_train_flags(p):
    g = p.add_argument_group("training")
    g.add_argument("--epochs", type=int, help="full-batch iterations (default 1000)")
    g.add_argument("--hidden", type=int, help="LSTM hidden units (default 50)")
    g.add_argument("--layers", type=int, help="LSTM layers (only 1 is supported)")
    g.add_argument("--learning-rate", type=float, help="Adam step size (default 0.001)")
    g.add_argument("--beta1", type=float)
    g.add_argument("--beta2", type=float)
    g.add_argument("--epsilon", type=float)
    g.add_argument("--init-scale", type=float, help="uniform weight init range (default 0.08)")
    g.add_argument("--forget-bias", type=float, help="initial forget gate bias (default 1.0)")
    g.add_argument("--train-fraction", type=float, help="share of cycles for training (default 0.8)")
    g.add_argument("--ascii-plot", action="store_const", const=True,
                   help="print loss and accuracy curves")


def build_parser():
    parser = ArgumentParser(prog="plcautomata", description=__description__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="INI file with a [settings] section")
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("-q", "--quiet", action="store_true")
    parser.add_argument("--no-color", action="store_const", const=True)
    parser.add_argument("--seed", type=int, help="random seed (default 0)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a simulated conveyor trace")
    p.add_argument("--out", required=True, help="trace CSV to write")
    _add_sim_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="train the LSTM classifier on a labeled trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--model", required=True, help="model JSON to write")
    p.add_argument("--history", help="history CSV to write")
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("classify", help="label a trace with a trained model")
    p.add_argument("--trace", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", help="trace CSV with predicted labels")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("otala", help="learn an automaton with OTALA")
    p.add_argument("--trace", required=True)
    p.add_argument("--otala-cycle", "--cycle", dest="otala_cycle", type=int,
                   help="learn from this cycle only (default: modal automaton over all cycles)")
    p.add_argument("--strict", action="store_true", help="fail when the cycle does not close")
    p.add_argument("--out", help="automaton JSON to write")
    p.add_argument("--dot", help="DOT file to write")
    p.set_defaults(func=cmd_otala)

    p = sub.add_parser("pipeline", help="simulate or read, train, learn, compare, export")
    p.add_argument("--trace", help="labeled trace CSV (default: simulate one)")
    p.add_argument("--out-dir", required=True, help="directory for the artifacts")
    p.add_argument("--otala-cycle", type=int, help="learn OTALA from this cycle only")
    _add_sim_flags(p)
    _add_train_flags(p)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("compare", help="compare two automaton JSON files")
    p.add_argument("a")
    p.add_argument("b")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("export-dot", help="convert automaton JSON to DOT")
    p.add_argument("automaton")
    p.add_argument("--out", help="DOT file (default stdout)")
    p.set_defaults(func=cmd_export_dot)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    color = not args.no_color
    setup_logging(args.verbose, args.quiet, color)
    try:
        settings = load_settings(args)
        color = not settings["no-color"]
        setup_logging(args.verbose, args.quiet, color)
        args.func(args, settings)
    except PlcAutomataError as e:
        print(colorize(f"error: {e}", RED_FG, color and sys.stderr.isatty()), file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(colorize(f"error: {e.strerror}: {e.filename}", RED_FG, color and sys.stderr.isatty()),
              file=sys.stderr)
        return UsageError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())

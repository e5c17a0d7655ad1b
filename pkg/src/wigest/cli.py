"""Command-line interface: synth, classify, eval, fpeval and rate-sweep.

Every command takes ``--seed``, ``--out`` and ``--config``. The config file
is JSON with optional sections ``sim``, ``corpus``, ``condition``, ``peaks``,
``classify`` and ``gate``, each overriding that module's defaults; explicit
flags override the config file. Exit status is 0 on success, 1 for usage or
configuration errors and 2 for data errors.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, WigestError, ZeroDuration
from .evaluate import EvalReport, FalsePositiveReport, evaluate_corpus, rate_sweep, rate_sweep_csv, validate_report
from .gate import GateConfig
from .peaks import PeakParams
from .recognizer import GestureRecognizer
from .synth import (
    GESTURES,
    CorpusConfig,
    GestureKind,
    GestureScript,
    ScriptEntry,
    SimConfig,
    random_entry,
    synth_trace,
)
from .trace import read_trace_file, write_trace

CONFIG_SECTIONS = ("sim", "corpus", "condition", "peaks", "classify", "gate")
CONDITION_KEYS = ("agg", "rate_hz", "window_ms", "max_gap_ms")
SCRIPT_GAP_S = 3.0


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _seed(text):
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _rates(text):
    try:
        rates = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad rate list {text!r}") from None
    if not rates or any(r <= 0 for r in rates):
        raise argparse.ArgumentTypeError("rates must be a comma-separated list of positive numbers")
    return rates


def load_config(path) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    unknown = set(cfg) - set(CONFIG_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    return cfg


def _sim_config(args, cfg) -> SimConfig:
    sim = SimConfig.from_dict(cfg.get("sim", {}))
    if getattr(args, "rate", None) is not None:
        sim = replace(sim, packet_rate_pps=args.rate)
    if getattr(args, "snr_db", None) is not None:
        sim = sim.with_snr_db(args.snr_db)
    if getattr(args, "no_phase", False):
        sim = replace(sim, record_phase=False)
    return replace(sim, seed=args.seed)


def _recognizer(args, cfg) -> GestureRecognizer:
    params = {}
    cond = dict(cfg.get("condition", {}))
    unknown = set(cond) - set(CONDITION_KEYS)
    if unknown:
        raise ConfigError(f"unknown condition config keys: {sorted(unknown)}")
    params.update(cond)
    peaks = dict(cfg.get("peaks", {}))
    unknown = set(peaks) - {f.name for f in fields(PeakParams)}
    if unknown:
        raise ConfigError(f"unknown peaks config keys: {sorted(unknown)}")
    params.update(peaks)
    cls_cfg = dict(cfg.get("classify", {}))
    if set(cls_cfg) - {"hysteresis_frac"}:
        raise ConfigError(f"unknown classify config keys: {sorted(set(cls_cfg) - {'hysteresis_frac'})}")
    params.update(cls_cfg)
    gate = GateConfig.from_dict(cfg.get("gate", {}))
    if getattr(args, "gate", None) is not None:
        gate = replace(gate, mode=args.gate)
    params["gate"] = gate
    if getattr(args, "agg", None) is not None:
        params["agg"] = args.agg
    if getattr(args, "rate_hz", None) is not None:
        params["rate_hz"] = args.rate_hz
    return GestureRecognizer(**params).fit()


def _out_path(args, default):
    return Path(args.out) if args.out else Path(default)


def _sibling(path: Path, suffix: str) -> Path:
    """``run.jsonl`` -> ``run<suffix>``."""
    name = path.name
    for ext in (".jsonl", ".json", ".csv"):
        if name.endswith(ext):
            name = name[: -len(ext)]
            break
    return path.with_name(name + suffix)


def _write_text(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _labels_for(trace_path: Path):
    side = _sibling(trace_path, ".labels.json")
    if not side.exists():
        return None
    return json.loads(side.read_text())


def _build_script(args, corpus, rng) -> tuple[GestureScript, float]:
    if args.script is not None:
        if args.script == "all4":
            entries, t = [], corpus.padding_s
            for _ in range(args.n):
                for kind in GESTURES:
                    e = random_entry(kind, rng, corpus, start_s=t)
                    entries.append(e)
                    t = e.end_s + SCRIPT_GAP_S
            return GestureScript(entries), entries[-1].end_s + corpus.padding_s
        try:
            raw = json.loads(Path(args.script).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read script {args.script!r}: {exc}") from None
        script = GestureScript([ScriptEntry(**e) for e in raw])
        return script, (args.duration if args.duration is not None else script.end_s + corpus.padding_s)
    kind = GestureKind.parse(args.gesture)
    if kind in (GestureKind.AMBIENT_WALK, GestureKind.IDLE):
        duration = args.duration if args.duration is not None else 60.0
        if kind is GestureKind.IDLE:
            return GestureScript(), duration
        return GestureScript([ScriptEntry(0.0, kind, duration)]), duration
    entries, t = [], corpus.padding_s
    for _ in range(args.n):
        e = random_entry(kind, rng, corpus, start_s=t)
        entries.append(e)
        t = e.end_s + SCRIPT_GAP_S
    return GestureScript(entries), entries[-1].end_s + corpus.padding_s


def cmd_synth(args, cfg) -> int:
    sim = _sim_config(args, cfg)
    corpus = CorpusConfig.from_dict(cfg.get("corpus", {}))
    rng = np.random.default_rng(args.seed)
    script, duration = _build_script(args, corpus, rng)
    out = _out_path(args, "trace.jsonl")
    label = out.name[: -len(".jsonl")] if out.name.endswith(".jsonl") else out.stem
    trace, labels = synth_trace(sim, script, duration_s=duration, label=label)
    out.write_bytes(write_trace(trace))
    labels_path = _sibling(out, ".labels.json")
    _write_text(labels_path, _dump_json(labels))
    print(f"wrote {out} ({len(trace)} packets, {trace.duration_s:.3f} s, {len(labels)} gestures) and {labels_path}")
    return 0


def cmd_classify(args, cfg) -> int:
    rec = _recognizer(args, cfg)
    trace = read_trace_file(args.trace)
    events = rec.predict_events(trace)[0]
    text = _dump_json([e.to_json() for e in events])
    if args.out:
        _write_text(Path(args.out), text)
        print(f"wrote {args.out} ({len(events)} events)")
    else:
        sys.stdout.write(text)
    return 0


def cmd_eval(args, cfg) -> int:
    rec = _recognizer(args, cfg)
    if args.traces:
        report = EvalReport()
        for path in map(Path, args.traces):
            trace = read_trace_file(path)
            report.add(rec.predict_events(trace)[0], _labels_for(path))
    else:
        sim = _sim_config(args, cfg)
        corpus = CorpusConfig.from_dict(cfg.get("corpus", {}))
        report = evaluate_corpus(sim, args.n, args.seed, rec, corpus)
    obj = report.to_json()
    validate_report(obj)
    out = _out_path(args, "report.json")
    _write_text(out, _dump_json(obj))
    csv_path = _sibling(out, ".csv")
    _write_text(csv_path, report.to_csv())
    acc = obj["overall_accuracy"]
    acc_text = "n/a" if acc is None else f"{acc:.2f}%"
    print(f"overall accuracy {acc_text} over {obj['n_trials']} trials; wrote {out} and {csv_path}")
    return 0


def cmd_fpeval(args, cfg) -> int:
    rec = _recognizer(args, cfg)
    if args.trace:
        trace = read_trace_file(args.trace)
    else:
        if not args.minutes > 0:
            raise ZeroDuration("--minutes must be > 0")
        sim = replace(_sim_config(args, cfg), record_phase=False)
        seconds = 60.0 * args.minutes
        script = GestureScript([ScriptEntry(0.0, GestureKind.AMBIENT_WALK, seconds)])
        trace, _ = synth_trace(sim, script, duration_s=seconds)
    minutes = trace.duration_s / 60.0 if len(trace) > 1 else 0.0
    if not minutes > 0:
        raise ZeroDuration("trace has zero duration")
    events = rec.with_gate("none").predict_events(trace)[0]
    report = FalsePositiveReport.from_events(events, minutes, rec.gate_config_)
    out = _out_path(args, "fpeval.json")
    _write_text(out, _dump_json(report.to_json()))
    timeline = _sibling(out, ".timeline.csv")
    _write_text(timeline, report.timeline_csv())
    rates = ", ".join(f"{m} {r:.3f}/min" for m, r in report.rates.items())
    print(f"false positives over {minutes:.2f} min: {rates}; wrote {out} and {timeline}")
    return 0


def cmd_rate_sweep(args, cfg) -> int:
    rec = _recognizer(args, cfg)
    sim = _sim_config(args, cfg)
    corpus = CorpusConfig.from_dict(cfg.get("corpus", {}))
    rows = rate_sweep(args.rates, sim, args.n, args.seed, rec, corpus)
    text = rate_sweep_csv(rows)
    if args.out:
        _write_text(Path(args.out), text)
        print(f"wrote {args.out} ({len(rows)} rates)")
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=_seed, default=0, help="RNG seed (unsigned 64-bit)")
    common.add_argument("--out", help="output path")
    common.add_argument("--config", help="JSON file overriding module defaults")

    pipeline = _Parser(add_help=False)
    pipeline.add_argument("--agg", help="mean | rssi | sub:<k> (default mean)")
    pipeline.add_argument("--gate", choices=["none", "single", "double"], help="start-gesture gate (default none)")
    pipeline.add_argument("--rate-hz", type=float, help="resampling rate (default 1000)")

    simflags = _Parser(add_help=False)
    simflags.add_argument("--rate", type=float, help="mean packet rate in packets/s")
    simflags.add_argument("--snr-db", type=float, help="idle per-subcarrier SNR; omit for a noiseless trace")

    p = _Parser(prog="wigest", description="Wi-Fi amplitude gesture recognition toolkit.")
    sub = p.add_subparsers(dest="command", metavar="command")
    sub.required = True

    s = sub.add_parser("synth", parents=[common, simflags], help="simulate a trace and its ground truth")
    what = s.add_mutually_exclusive_group(required=True)
    what.add_argument("--gesture", help="push, pull, punch, lever, ambient_walk or idle")
    what.add_argument("--script", help="'all4' or a JSON file of script entries")
    s.add_argument("--n", type=int, default=1, help="repetitions per gesture (default 1)")
    s.add_argument("--duration", type=float, help="trace length in s for ambient_walk/idle or a script file")
    s.add_argument("--no-phase", action="store_true", help="omit CSI phase from the trace")
    s.set_defaults(func=cmd_synth)

    c = sub.add_parser("classify", parents=[common, pipeline], help="detect and label gestures in a trace")
    c.add_argument("trace", help="JSONL trace file")
    c.set_defaults(func=cmd_classify)

    e = sub.add_parser("eval", parents=[common, pipeline, simflags], help="accuracy report with confusion matrix")
    e.add_argument("traces", nargs="*", help="trace files with .labels.json sidecars; omit to synthesize a corpus")
    e.add_argument("--n", type=int, default=50, help="synthesized trials per gesture (default 50)")
    e.set_defaults(func=cmd_eval)

    f = sub.add_parser("fpeval", parents=[common, pipeline, simflags], help="false positives per gate mode")
    f.add_argument("trace", nargs="?", help="gesture-free trace; omit to synthesize an ambient-walk trace")
    f.add_argument("--minutes", type=float, default=60.0, help="length of the synthesized trace (default 60)")
    f.set_defaults(func=cmd_fpeval, rate=None)

    r = sub.add_parser("rate-sweep", parents=[common, pipeline, simflags], help="accuracy against packet rate")
    r.add_argument("--rates", type=_rates, default=[20, 50, 100, 200, 500, 1000], help="comma-separated packet rates")
    r.add_argument("--n", type=int, default=50, help="trials per gesture per rate (default 50)")
    r.set_defaults(func=cmd_rate_sweep)
    return p


FPEVAL_DEFAULT_RATE = 200.0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "fpeval" and args.rate is None and args.trace is None:
        # an hour at 1000 packets/s does not fit comfortably in memory
        args.rate = FPEVAL_DEFAULT_RATE
    if getattr(args, "n", 1) < 1:
        parser.error("--n must be >= 1")
    try:
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except (ConfigError, UsageError) as exc:
        print(f"wigest: error: {exc}", file=sys.stderr)
        return 1
    except (WigestError, OSError, ValueError, KeyError, TypeError) as exc:
        print(f"wigest: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Accuracy, packet-rate and false-positive evaluation over synthetic corpora."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import NamedTuple

import numpy as np

from .classify import Gesture
from .errors import MissingLabels
from .gate import GateConfig, GateMode, apply_gate, fp_rate
from .synth import GESTURES, CorpusConfig, SimConfig, synth_corpus

TRUE_CLASSES = tuple(g.value for g in GESTURES)
PREDICTED_CLASSES = TRUE_CLASSES + (Gesture.UNKNOWN.value,)
MATCH_OVERLAP = 0.5


def label_window_ms(label: dict) -> tuple[float, float]:
    start = float(label["start_s"]) * 1000.0
    return start, start + float(label["duration_s"]) * 1000.0


def match_events(events, labels, min_overlap: float = MATCH_OVERLAP):
    """Pair each scripted gesture with at most one predicted event.

    An event matches when it overlaps the scripted window by at least
    ``min_overlap`` of the window's length; the largest overlap wins and an
    event is never used twice. Returns ``(pairs, unmatched_events)`` where
    ``pairs`` holds ``(label, event_or_None)``.
    """
    used = set()
    pairs = []
    for label in labels:
        lo, hi = label_window_ms(label)
        need = min_overlap * (hi - lo)
        best, best_ov = None, 0.0
        for i, e in enumerate(events):
            if i in used:
                continue
            ov = min(hi, e.end_ms) - max(lo, e.start_ms)
            if ov >= need and ov > best_ov:
                best, best_ov = i, ov
        if best is not None:
            used.add(best)
        pairs.append((label, None if best is None else events[best]))
    unmatched = [e for i, e in enumerate(events) if i not in used]
    return pairs, unmatched


@dataclass
class EvalReport:
    """Confusion counts, rows predicted and columns true.

    Missed gestures (no matching event) land in the ``unknown`` row and are
    also counted in ``missed``. Predicted events that match no scripted
    gesture are tallied in ``false_positives``.
    """

    confusion: np.ndarray = field(default_factory=lambda: np.zeros((5, 4), dtype=np.int64))
    false_positives: int = 0
    missed: int = 0

    def add(self, events, labels) -> None:
        if labels is None:
            raise MissingLabels("no ground-truth labels for trace")
        pairs, unmatched = match_events(list(events), labels)
        for label, event in pairs:
            col = TRUE_CLASSES.index(label["kind"])
            if event is None:
                self.missed += 1
                row = PREDICTED_CLASSES.index(Gesture.UNKNOWN.value)
            else:
                row = PREDICTED_CLASSES.index(event.gesture.value)
            self.confusion[row, col] += 1
        self.false_positives += len(unmatched)

    @property
    def n_trials(self) -> int:
        return int(self.confusion.sum())

    @property
    def per_gesture_accuracy(self) -> dict:
        out = {}
        for j, name in enumerate(TRUE_CLASSES):
            total = self.confusion[:, j].sum()
            out[name] = round(100.0 * float(self.confusion[j, j]) / float(total), 6) if total else None
        return out

    @property
    def overall_accuracy(self) -> float | None:
        n = self.n_trials
        if not n:
            return None
        return round(100.0 * float(np.trace(self.confusion[:4])) / n, 6)

    def to_json(self) -> dict:
        return {
            "n_trials": self.n_trials,
            "overall_accuracy": self.overall_accuracy,
            "per_gesture_accuracy": self.per_gesture_accuracy,
            "confusion": {
                p: {t: int(self.confusion[i, j]) for j, t in enumerate(TRUE_CLASSES)}
                for i, p in enumerate(PREDICTED_CLASSES)
            },
            "false_positives": int(self.false_positives),
            "missed": int(self.missed),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["predicted"] + list(TRUE_CLASSES))
        for i, p in enumerate(PREDICTED_CLASSES):
            w.writerow([p] + [int(c) for c in self.confusion[i]])
        return buf.getvalue()


def load_schema(name: str = "eval_report") -> dict:
    text = resources.files("wigest").joinpath("schemas").joinpath(f"{name}.schema.json").read_text()
    return json.loads(text)


def validate_report(obj: dict, name: str = "eval_report") -> None:
    """Raise ``jsonschema.ValidationError`` if ``obj`` breaks the shipped schema."""
    import jsonschema

    jsonschema.validate(obj, load_schema(name))


def evaluate_items(items, recognizer) -> EvalReport:
    """Run ``recognizer`` over corpus items (anything with ``trace`` and ``labels``)."""
    report = EvalReport()
    items = list(items)
    events = recognizer.predict_events([it.trace for it in items])
    for it, ev in zip(items, events):
        report.add(ev, it.labels)
    return report


def evaluate_corpus(
    sim: SimConfig, n_per_gesture: int, seed: int, recognizer, corpus: CorpusConfig = CorpusConfig()
) -> EvalReport:
    """Synthesize a per-gesture corpus and score ``recognizer`` on it.

    Traces are generated and scored one gesture kind at a time to bound
    memory.
    """
    report = EvalReport()
    rng = np.random.default_rng(seed)
    for kind in GESTURES:
        kind_seed = int(rng.integers(0, 2**63 - 1))
        items = synth_corpus(sim, n_per_gesture, kind_seed, corpus, kinds=(kind,))
        part = evaluate_items(items, recognizer)
        report.confusion += part.confusion
        report.false_positives += part.false_positives
        report.missed += part.missed
    return report


class RateSweepRow(NamedTuple):
    rate_pps: float
    accuracy_pct: float


def rate_sweep(rates, sim: SimConfig, n_per_gesture: int, seed: int, recognizer, corpus=CorpusConfig()):
    """One accuracy row per packet rate; every rate reuses ``seed``."""
    rows = []
    for rate in rates:
        if not rate > 0:
            raise ValueError(f"packet rate must be > 0, got {rate}")
        report = evaluate_corpus(replace(sim, packet_rate_pps=float(rate)), n_per_gesture, seed, recognizer, corpus)
        rows.append(RateSweepRow(float(rate), report.overall_accuracy))
    return rows


def rate_sweep_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rate_pps", "accuracy_pct"])
    for r in rows:
        w.writerow([f"{r.rate_pps:g}", f"{r.accuracy_pct:.6f}"])
    return buf.getvalue()


GATE_MODES = (GateMode.NONE, GateMode.SINGLE, GateMode.DOUBLE)


@dataclass
class FalsePositiveReport:
    """Emitted events per gate mode on a gesture-free trace."""

    minutes: float
    emitted: dict

    @classmethod
    def from_events(cls, events, minutes: float, gate: GateConfig = GateConfig()) -> "FalsePositiveReport":
        events = list(events)
        emitted = {m.value: apply_gate(events, replace(gate, mode=m)) for m in GATE_MODES}
        fp_rate(events, minutes)  # validates the duration
        return cls(float(minutes), emitted)

    @property
    def rates(self) -> dict:
        return {m: fp_rate(ev, self.minutes) for m, ev in self.emitted.items()}

    def to_json(self) -> dict:
        return {
            "minutes": self.minutes,
            "events": {m: len(ev) for m, ev in self.emitted.items()},
            "fp_per_min": {m: round(r, 6) for m, r in self.rates.items()},
        }

    def timeline(self) -> list[tuple]:
        """Cumulative emitted count per mode at the end of each whole minute."""
        n = int(np.ceil(self.minutes - 1e-9))
        rows = []
        for minute in range(1, n + 1):
            cutoff = minute * 60_000.0
            rows.append((minute,) + tuple(sum(e.end_ms <= cutoff for e in ev) for ev in self.emitted.values()))
        return rows

    def timeline_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["minute"] + list(self.emitted))
        w.writerows(self.timeline())
        return buf.getvalue()

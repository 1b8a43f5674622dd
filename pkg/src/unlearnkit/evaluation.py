"""Forget/Retain scoring, degenerate-output detection, and report rendering.

Both scores compare the unlearned model against the original on TEST-half
questions only: the forget score is the relative accuracy drop on the forget
set, the retain score the accuracy ratio on the retain set. Scores are stored
as unit fractions and rendered as percentages; a scope whose predictions are
degenerate ("nonsense") renders as NS and contributes 0 to the average.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import PersonRecord, SplitAssignment, corpus_index
from .errors import UndefinedScoreError, UnlearnkitError
from .judge import Judge, VerdictRow, judge_set
from .probes import ProbeTask

logger = logging.getLogger(__name__)


def forget_score(acc_original: float, acc_unlearned: float) -> float:
    """Relative accuracy decrease on the forget set; negative when accuracy rose."""
    if acc_original <= 0:
        raise UndefinedScoreError(
            f"forget score is undefined at original accuracy {acc_original}"
        )
    return 1.0 - acc_unlearned / acc_original

def retain_score(acc_original: float, acc_unlearned: float) -> float:
    """Accuracy ratio on the retain set; not clamped."""
    if acc_original <= 0:
        raise UndefinedScoreError(
            f"retain score is undefined at original accuracy {acc_original}"
        )
    return acc_unlearned / acc_original


# ---------------------------------------------------------------------------
# Degenerate-output ("NonSense") detection.
# ---------------------------------------------------------------------------

_REPEAT_RUN = 5
_CHAR_REPETITION_LIMIT = 0.9


def _is_degenerate(text: str) -> bool:
    stripped = text.strip()
    if not stripped:
        return True
    tokens = stripped.split()
    run = 1
    for prev, cur in zip(tokens, tokens[1:]):
        run = run + 1 if cur == prev else 1
        if run >= _REPEAT_RUN:
            return True
    if len(stripped) >= 10:
        repetition = 1.0 - len(set(stripped)) / len(stripped)
        if repetition > _CHAR_REPETITION_LIMIT:
            return True
    return False


def detect_nonsense(predictions: list[str]) -> bool:
    """True when a majority of predictions are degenerate.

    Degenerate means empty output, one token repeated at least five times in a
    row, or a character-level repetition ratio above 0.9.
    """
    if not predictions:
        raise UnlearnkitError("cannot judge an empty prediction list for nonsense")
    degenerate = sum(_is_degenerate(p) for p in predictions)
    return degenerate > len(predictions) / 2


# ---------------------------------------------------------------------------
# Report.
# ---------------------------------------------------------------------------

@dataclass
class UnlearningReport:
    """Scores are unit fractions; avg_unlearning_score is in percent points
    with NS scopes contributing 0, mirroring how result tables are averaged."""

    acc_o_forget: float
    acc_u_forget: float
    acc_o_retain: float
    acc_u_retain: float
    forget_score: float
    retain_score: float
    avg_unlearning_score: float
    probe_accuracies: dict[str, float] = field(default_factory=dict)
    ns_flags: dict[str, bool] = field(default_factory=lambda: {"forget": False, "retain": False})

    def to_dict(self) -> dict:
        return {
            "acc_o_forget": self.acc_o_forget,
            "acc_u_forget": self.acc_u_forget,
            "acc_o_retain": self.acc_o_retain,
            "acc_u_retain": self.acc_u_retain,
            "forget_score": self.forget_score,
            "retain_score": self.retain_score,
            "avg_unlearning_score": self.avg_unlearning_score,
            "probe_accuracies": dict(self.probe_accuracies),
            "ns_flags": dict(self.ns_flags),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "UnlearningReport":
        return cls(**payload)

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path

    @classmethod
    def load(cls, path: str | Path) -> "UnlearningReport":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def average_unlearning_score(
    forget: float, retain: float, ns_forget: bool = False, ns_retain: bool = False
) -> float:
    """Mean of the two scores in percent points; NS scopes contribute 0."""
    forget_pct = 0.0 if ns_forget else forget * 100.0
    retain_pct = 0.0 if ns_retain else retain * 100.0
    return (forget_pct + retain_pct) / 2.0


def _test_items(split: SplitAssignment, by_name: dict[str, PersonRecord], side: str):
    return [(i, by_name[name].qa_pairs[i]) for name, i in split.qa_ids(side, "test")]


def evaluate_detailed(
    model_o,
    model_u,
    split: SplitAssignment,
    corpus: list[PersonRecord],
    judge: Judge,
    probes: list[ProbeTask] = (),
) -> tuple[UnlearningReport, dict[str, list[VerdictRow]]]:
    """Full evaluation plus the per-question verdict tables for audit."""
    by_name = corpus_index(corpus)
    test_ids = set(split.qa_ids("forget", "test")) | set(split.qa_ids("retain", "test"))
    train_ids = set(split.qa_ids("forget", "train")) | set(split.qa_ids("retain", "train"))
    leaked = test_ids & train_ids
    if leaked:
        raise UnlearnkitError(f"split assigns {len(leaked)} questions to both halves: {sorted(leaked)[:3]}")

    forget_items = _test_items(split, by_name, "forget")
    retain_items = _test_items(split, by_name, "retain")

    audit = {
        "original_forget": judge_set(judge, model_o, forget_items),
        "unlearned_forget": judge_set(judge, model_u, forget_items),
        "original_retain": judge_set(judge, model_o, retain_items),
        "unlearned_retain": judge_set(judge, model_u, retain_items),
    }

    def _acc(rows: list[VerdictRow]) -> float:
        return sum(r.correct for r in rows) / len(rows)

    acc_o_forget = _acc(audit["original_forget"])
    acc_u_forget = _acc(audit["unlearned_forget"])
    acc_o_retain = _acc(audit["original_retain"])
    acc_u_retain = _acc(audit["unlearned_retain"])

    ns_flags = {
        "forget": detect_nonsense([r.predicted for r in audit["unlearned_forget"]]),
        "retain": detect_nonsense([r.predicted for r in audit["unlearned_retain"]]),
    }

    fs = forget_score(acc_o_forget, acc_u_forget)
    rs = retain_score(acc_o_retain, acc_u_retain)
    if fs < 0:
        logger.warning("negative forget score %.4f: unlearning raised forget-set accuracy", fs)

    report = UnlearningReport(
        acc_o_forget=acc_o_forget,
        acc_u_forget=acc_u_forget,
        acc_o_retain=acc_o_retain,
        acc_u_retain=acc_u_retain,
        forget_score=fs,
        retain_score=rs,
        avg_unlearning_score=average_unlearning_score(fs, rs, **{
            "ns_forget": ns_flags["forget"], "ns_retain": ns_flags["retain"],
        }),
        probe_accuracies={probe.name: probe.evaluate(model_u) for probe in probes},
        ns_flags=ns_flags,
    )
    return report, audit


def evaluate(
    model_o,
    model_u,
    split: SplitAssignment,
    corpus: list[PersonRecord],
    judge: Judge,
    probes: list[ProbeTask] = (),
) -> UnlearningReport:
    report, _ = evaluate_detailed(model_o, model_u, split, corpus, judge, probes)
    return report


# ---------------------------------------------------------------------------
# Rendering.
# ---------------------------------------------------------------------------

def _fmt_score(value: float, ns: bool = False) -> str:
    return "NS" if ns else f"{value * 100.0:.2f}"


def render_report_table(rows: list[tuple[str, UnlearningReport]]) -> str:
    """Comparison grid across runs: one row per method, scores in percent."""
    if not rows:
        raise UnlearnkitError("no reports to render")
    probe_names = sorted({name for _, report in rows for name in report.probe_accuracies})
    header = ["Method", "Forget S.", "Retain S.", "Avg."] + probe_names
    if probe_names:
        header.append("Probe Avg.")
    table = [header]
    for label, report in rows:
        line = [
            label,
            _fmt_score(report.forget_score, report.ns_flags.get("forget", False)),
            _fmt_score(report.retain_score, report.ns_flags.get("retain", False)),
            f"{report.avg_unlearning_score:.2f}",
        ]
        for name in probe_names:
            acc = report.probe_accuracies.get(name)
            line.append("-" if acc is None else f"{acc * 100.0:.2f}")
        if probe_names:
            present = [report.probe_accuracies[n] for n in probe_names if n in report.probe_accuracies]
            line.append(f"{sum(present) / len(present) * 100.0:.2f}" if present else "-")
        table.append(line)
    return _grid(table)


def render_epoch_curves(points: list[tuple[int, UnlearningReport]]) -> str:
    """Per-epoch metric table (the curve data behind an epoch-sweep plot)."""
    if not points:
        raise UnlearnkitError("no epoch reports to render")
    table = [["Epoch", "Forget S.", "Retain S.", "Avg."]]
    for epoch, report in sorted(points, key=lambda p: p[0]):
        table.append([
            str(epoch),
            _fmt_score(report.forget_score, report.ns_flags.get("forget", False)),
            _fmt_score(report.retain_score, report.ns_flags.get("retain", False)),
            f"{report.avg_unlearning_score:.2f}",
        ])
    return _grid(table)


def _grid(table: list[list[str]]) -> str:
    widths = [max(len(row[i]) for row in table) for i in range(len(table[0]))]
    lines = []
    for r, row in enumerate(table):
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
        if r == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)

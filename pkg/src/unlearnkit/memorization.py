"""Identify which individuals a model has deeply memorized."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .corpus import PersonRecord
from .errors import UnlearnkitError
from .judge import Judge, accuracy


@dataclass
class AccuracyTable:
    per_individual: dict[str, float] = field(default_factory=dict)
    threshold: float = 0.8

    def __post_init__(self):
        if not (0.0 < self.threshold <= 1.0):
            raise UnlearnkitError(f"threshold must be in (0, 1], got {self.threshold}")
        for name, acc in self.per_individual.items():
            if not (0.0 <= acc <= 1.0):
                raise UnlearnkitError(f"accuracy for {name!r} out of range: {acc}")

    def save(self, path: str | Path) -> Path:
        """Two-column file (name TAB accuracy), histogram-ready."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = [f"{name}\t{self.per_individual[name]:.6f}" for name in sorted(self.per_individual)]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    @classmethod
    def load(cls, path: str | Path, threshold: float = 0.8) -> "AccuracyTable":
        table: dict[str, float] = {}
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            try:
                name, value = line.rsplit("\t", 1)
                table[name] = float(value)
            except ValueError as exc:
                raise UnlearnkitError(f"{path}:{lineno}: bad accuracy row: {line!r}") from exc
        return cls(per_individual=table, threshold=threshold)


def profile_memorization(model, corpus: list[PersonRecord], judge: Judge) -> AccuracyTable:
    """Per-individual accuracy of the model over each person's full QA list."""
    table: dict[str, float] = {}
    for record in corpus:
        try:
            table[record.name] = accuracy(judge, model, record.qa_pairs)
        except UnlearnkitError as exc:
            raise type(exc)(f"while profiling {record.name!r}: {exc}") from exc
    return AccuracyTable(per_individual=table)


def select_memorized(table: AccuracyTable, threshold: float | None = None) -> list[str]:
    """Names whose accuracy meets the threshold (inclusive), sorted lexicographically."""
    cut = table.threshold if threshold is None else threshold
    if not (0.0 < cut <= 1.0):
        raise UnlearnkitError(f"threshold must be in (0, 1], got {cut}")
    return sorted(name for name, acc in table.per_individual.items() if acc >= cut)

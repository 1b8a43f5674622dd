"""Answer correctness judging.

A prediction is correct unless it contradicts the gold answer: partially
correct answers that do not conflict are labeled neutral and count as correct.
The exact-match judge is the desk-scale reference path; full-scale runs bind
an external NLI classifier through the HTTP client judge.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import httpx

from .corpus import QAPair
from .errors import JudgeError

NLI_URL_ENV = "UNLEARNKIT_NLI_URL"


class Label(str, Enum):
    ENTAILMENT = "entailment"
    NEUTRAL = "neutral"
    CONTRADICTION = "contradiction"


@dataclass(frozen=True)
class Verdict:
    label: Label

    @property
    def correct(self) -> bool:
        return self.label in (Label.ENTAILMENT, Label.NEUTRAL)


class Judge(Protocol):
    def judge_answer(self, question: str, gold: str, predicted: str) -> Verdict: ...


_ARTICLES = {"a", "an", "the"}


def _normalize_tokens(text: str) -> list[str]:
    text = re.sub(r"[^\w\s]", " ", text.casefold())
    return [tok for tok in text.split() if tok not in _ARTICLES]


class ExactMatchJudge:
    """Deterministic reference judge over normalized token overlap.

    Normalized-equal strings are entailment; strings sharing no content token
    are contradiction; anything in between is neutral.
    """

    def judge_answer(self, question: str, gold: str, predicted: str) -> Verdict:
        if not gold.strip():
            raise JudgeError("gold answer is empty")
        gold_tokens = _normalize_tokens(gold)
        pred_tokens = _normalize_tokens(predicted)
        if gold_tokens == pred_tokens:
            return Verdict(Label.ENTAILMENT)
        if not set(gold_tokens) & set(pred_tokens):
            return Verdict(Label.CONTRADICTION)
        return Verdict(Label.NEUTRAL)


class NliClientJudge:
    """Client for an external 3-way NLI service.

    Request: JSON {premise, hypothesis, question}; by default the gold answer
    is the premise and the prediction the hypothesis, with the question along
    for context. Response: JSON {"label": "entailment"|"neutral"|"contradiction"}.
    The service endpoint comes from the constructor or the UNLEARNKIT_NLI_URL
    environment variable; no NLI model is bundled.
    """

    def __init__(
        self,
        url: str | None = None,
        timeout: float = 30.0,
        transport: httpx.BaseTransport | None = None,
    ):
        self.url = url or os.environ.get(NLI_URL_ENV)
        if not self.url:
            raise JudgeError(
                f"no NLI service configured: pass a URL or set {NLI_URL_ENV}"
            )
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def judge_answer(self, question: str, gold: str, predicted: str) -> Verdict:
        if not gold.strip():
            raise JudgeError("gold answer is empty")
        try:
            response = self._client.post(
                self.url,
                json={"premise": gold, "hypothesis": predicted, "question": question},
            )
            response.raise_for_status()
            label = response.json()["label"]
        except (httpx.HTTPError, KeyError, ValueError) as exc:
            raise JudgeError(f"NLI judge at {self.url} unavailable: {exc}") from exc
        try:
            return Verdict(Label(label))
        except ValueError:
            raise JudgeError(f"NLI judge returned unknown label {label!r}") from None


def make_judge(kind: str = "exact", url: str | None = None) -> Judge:
    if kind == "exact":
        return ExactMatchJudge()
    if kind == "nli":
        return NliClientJudge(url)
    raise JudgeError(f"unknown judge kind {kind!r} (expected 'exact' or 'nli')")


@dataclass(frozen=True)
class VerdictRow:
    """One judged question, exportable for audit."""

    owner_name: str
    qa_index: int
    question: str
    gold: str
    predicted: str
    label: Label

    @property
    def correct(self) -> bool:
        return Verdict(self.label).correct

    def to_dict(self) -> dict:
        return {
            "owner_name": self.owner_name,
            "qa_index": self.qa_index,
            "question": self.question,
            "gold": self.gold,
            "predicted": self.predicted,
            "label": self.label.value,
            "correct": self.correct,
        }


def judge_set(judge: Judge, model, qa_set: Sequence[QAPair | tuple]) -> list[VerdictRow]:
    """Generate and judge a prediction for every pair.

    ``qa_set`` holds QAPair objects or (qa_index, QAPair) tuples; indices
    default to list position.
    """
    rows = []
    for position, item in enumerate(qa_set):
        index, qa = item if isinstance(item, tuple) else (position, item)
        predicted = model.generate(qa.question)
        verdict = judge.judge_answer(qa.question, qa.gold_answer, predicted)
        rows.append(
            VerdictRow(
                owner_name=qa.owner_name,
                qa_index=index,
                question=qa.question,
                gold=qa.gold_answer,
                predicted=predicted,
                label=verdict.label,
            )
        )
    return rows


def accuracy(judge: Judge, model, qa_set: Sequence[QAPair | tuple]) -> float:
    """Fraction of pairs judged correct (micro-average over QA pairs)."""
    if not qa_set:
        raise JudgeError("cannot compute accuracy of an empty QA set")
    rows = judge_set(judge, model, qa_set)
    return sum(row.correct for row in rows) / len(rows)


def save_verdicts(rows: Iterable[VerdictRow], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for row in rows:
            handle.write(json.dumps(row.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")
    return path

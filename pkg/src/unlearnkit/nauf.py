"""Name-aware refusal answers and contrastive data augmentation (CDA).

The forget side is taught WHO to protect by relabeling questions with refusal
answers that mention the protected name. CDA borrows questions from other
individuals, swaps in the target's name, and labels them with a refusal
(forget side) or with the frozen original model's own prediction (retain
side), doubling each side's training data by default.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .corpus import PersonRecord, SplitAssignment, corpus_index
from .errors import AugmentationError

NAME_PLACEHOLDER = "[NAME]"

CDA_FORGET = "cda-forget-refusal"
CDA_RETAIN = "cda-retain-selflabel"
ORIGINAL_REFUSAL = "original-refusal"
ORIGINAL_RETAIN = "original-retain"

_SHIPPED_FILES = {
    "name-aware": "refusal_name_aware.txt",
    "uninformed": "refusal_uninformed.txt",
}


@dataclass(frozen=True)
class RefusalTemplateSet:
    templates: tuple[str, ...]
    kind: str  # "name-aware" | "uninformed"

    def __post_init__(self):
        if self.kind not in _SHIPPED_FILES:
            raise AugmentationError(f"unknown template kind {self.kind!r}")
        if not self.templates:
            raise AugmentationError("template set is empty")
        for i, template in enumerate(self.templates):
            count = template.count(NAME_PLACEHOLDER)
            if self.kind == "name-aware" and count != 1:
                raise AugmentationError(
                    f"name-aware template {i + 1} must contain {NAME_PLACEHOLDER} exactly once: "
                    f"{template!r}"
                )
            if self.kind == "uninformed" and count != 0:
                raise AugmentationError(
                    f"uninformed template {i + 1} must not contain {NAME_PLACEHOLDER}: {template!r}"
                )

    def __len__(self) -> int:
        return len(self.templates)


def load_template_set(path: str | Path, kind: str) -> RefusalTemplateSet:
    """One template per line, placeholder literal [NAME]."""
    lines = [ln for ln in Path(path).read_text(encoding="utf-8").splitlines() if ln.strip()]
    return RefusalTemplateSet(templates=tuple(lines), kind=kind)


def shipped_templates(kind: str = "name-aware") -> RefusalTemplateSet:
    """The bundled 100-entry template sets."""
    if kind not in _SHIPPED_FILES:
        raise AugmentationError(f"unknown template kind {kind!r} (expected {sorted(_SHIPPED_FILES)})")
    text = resources.files("unlearnkit.data").joinpath(_SHIPPED_FILES[kind]).read_text("utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    return RefusalTemplateSet(templates=tuple(lines), kind=kind)


def instantiate_refusal(template_set: RefusalTemplateSet, name: str, rng: random.Random) -> str:
    """Uniformly sampled template with the placeholder replaced by the given name."""
    template = rng.choice(template_set.templates)
    if template_set.kind == "uninformed":
        return template
    return template.replace(NAME_PLACEHOLDER, name)


def substitute_name(question: str, donor_name: str, target_name: str) -> str:
    """Replace every occurrence of the donor's name with the target's; no other edits."""
    if donor_name not in question:
        raise AugmentationError(
            f"donor name {donor_name!r} does not occur in question {question!r}"
        )
    return question.replace(donor_name, target_name)


@dataclass(frozen=True)
class AugmentedExample:
    target_name: str
    donor_name: str
    question: str
    answer: str
    side: str  # "forget" | "retain"
    provenance: str

    def __post_init__(self):
        if self.side not in ("forget", "retain"):
            raise AugmentationError(f"bad side {self.side!r}")
        expected = {
            "forget": (CDA_FORGET, ORIGINAL_REFUSAL),
            "retain": (CDA_RETAIN, ORIGINAL_RETAIN),
        }[self.side]
        if self.provenance not in expected:
            raise AugmentationError(
                f"provenance {self.provenance!r} not valid for side {self.side!r}"
            )
        if self.provenance in (CDA_FORGET, CDA_RETAIN):
            if self.donor_name == self.target_name:
                raise AugmentationError(
                    f"augmented example for {self.target_name!r} borrowed from itself"
                )
            if self.donor_name in self.question:
                raise AugmentationError(
                    f"augmented question still mentions donor {self.donor_name!r}: {self.question!r}"
                )
        if self.target_name not in self.question:
            raise AugmentationError(
                f"question for {self.target_name!r} does not mention them: {self.question!r}"
            )

    def to_dict(self) -> dict:
        return {
            "target_name": self.target_name,
            "donor_name": self.donor_name,
            "question": self.question,
            "answer": self.answer,
            "side": self.side,
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "AugmentedExample":
        return cls(**payload)


def _sample_donor_pool(pool: list, k: int, rng: random.Random) -> list:
    """Without replacement until the pool is exhausted, then with replacement."""
    if k <= len(pool):
        return rng.sample(pool, k)
    chosen = rng.sample(pool, len(pool))
    chosen.extend(rng.choice(pool) for _ in range(k - len(pool)))
    return chosen


def augment(
    split: SplitAssignment,
    corpus: list[PersonRecord],
    model_o,
    templates: RefusalTemplateSet,
    per_person: int | None = None,
    seed: int = 0,
) -> list[AugmentedExample]:
    """Cross-individual question borrowing for every individual in the split.

    For each target, ``per_person`` donor questions are sampled from OTHER
    individuals' train halves (test questions stay unseen) and name-substituted.
    Forget-side targets get refusal answers; retain-side targets get the frozen
    original model's greedy prediction on the substituted question. The default
    ``per_person`` matches each individual's train-question count, doubling the
    training data.
    """
    if per_person is not None and per_person < 0:
        raise AugmentationError(f"per_person must be >= 0, got {per_person}")
    if templates.kind != "name-aware":
        raise AugmentationError("augmentation requires the name-aware template set")
    if len(split.all_names()) < 2:
        raise AugmentationError("augmentation needs at least two individuals (no donors exist)")
    if not model_o.supports_generation:
        raise AugmentationError("retain-side self-labels need a generation-capable original model")

    by_name = corpus_index(corpus)
    rng = random.Random(seed)
    train_pool = [
        (name, by_name[name].qa_pairs[i])
        for name in split.all_names()
        for i in split.indices(name, "train")
    ]

    examples: list[AugmentedExample] = []
    for side, names in (("forget", split.forget_names), ("retain", split.retain_names)):
        for target in names:
            k = per_person if per_person is not None else len(split.indices(target, "train"))
            donors = [(d, qa) for d, qa in train_pool if d != target]
            if not donors:
                raise AugmentationError(f"no donor questions available for {target!r}")
            for donor, qa in _sample_donor_pool(donors, k, rng):
                question = substitute_name(qa.question, donor, target)
                if side == "forget":
                    answer = instantiate_refusal(templates, target, rng)
                    provenance = CDA_FORGET
                else:
                    answer = model_o.generate(question)
                    provenance = CDA_RETAIN
                examples.append(
                    AugmentedExample(
                        target_name=target,
                        donor_name=donor,
                        question=question,
                        answer=answer,
                        side=side,
                        provenance=provenance,
                    )
                )
    return examples


def save_augmented(examples: list[AugmentedExample], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        json.dumps(ex.to_dict(), ensure_ascii=False, sort_keys=True, separators=(",", ":"))
        for ex in examples
    ]
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    return path


def load_augmented(path: str | Path) -> list[AugmentedExample]:
    path = Path(path)
    if not path.exists():
        raise AugmentationError(f"augmented-set file not found: {path}")
    examples = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            examples.append(AugmentedExample.from_dict(json.loads(line)))
        except (json.JSONDecodeError, TypeError) as exc:
            raise AugmentationError(f"{path}:{lineno}: bad augmented example: {exc}") from exc
    return examples

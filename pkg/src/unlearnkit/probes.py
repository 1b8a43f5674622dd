"""General-capability probe tasks.

A probe measures whether unlearning damaged capabilities unrelated to the
protected individuals. Probes here are likelihood-scored multiple choice;
the shipped synthetic probes cover generic factual material disjoint from any
corpus individual. Adapters for real benchmarks live out of tree and only
need to implement ProbeTask.
"""

from __future__ import annotations

import random
from abc import ABC, abstractmethod
from dataclasses import dataclass


class ProbeTask(ABC):
    name: str

    @abstractmethod
    def evaluate(self, model) -> float:
        """Accuracy in [0, 1]; deterministic for a fixed model."""


@dataclass(frozen=True)
class ProbeItem:
    question: str
    choices: tuple[str, ...]
    answer_index: int


class MultipleChoiceProbe(ProbeTask):
    """Picks the highest-likelihood choice for each item."""

    def __init__(self, name: str, items: list[ProbeItem]):
        if not items:
            raise ValueError(f"probe {name!r} has no items")
        self.name = name
        self.items = list(items)

    def evaluate(self, model) -> float:
        hits = 0
        for item in self.items:
            scores = [
                model.answer_log_likelihood(item.question, choice).item()
                for choice in item.choices
            ]
            best = max(range(len(scores)), key=lambda i: (scores[i], -i))
            hits += best == item.answer_index
        return hits / len(self.items)

    def texts(self) -> list[str]:
        """Every string the probe will show a model (for vocabulary building)."""
        out = []
        for item in self.items:
            out.append(item.question)
            out.extend(item.choices)
        return out


_FACT_BANK: tuple[tuple[str, tuple[str, ...]], ...] = (
    ("What do bees collect from flowers?", ("nectar", "gravel", "vinegar", "wool")),
    ("What is frozen water called?", ("ice", "steam", "sand", "smoke")),
    ("Which instrument has black and white keys?", ("piano", "drum", "trumpet", "triangle")),
    ("What do caterpillars turn into?", ("butterflies", "snails", "spiders", "beetles")),
    ("Which season comes after winter?", ("spring", "autumn", "summer", "harvest")),
    ("What is bread baked in?", ("an oven", "a freezer", "a kettle", "a sink")),
    ("Which animal is known for building dams?", ("beaver", "camel", "penguin", "moth")),
    ("What falls from clouds during rain?", ("water", "ash", "leaves", "salt")),
    ("Which tool is used to drive nails?", ("a hammer", "a spoon", "a brush", "a whistle")),
    ("What do spiders spin?", ("webs", "ropes", "rugs", "sails")),
    ("Which direction does the sun rise?", ("east", "west", "north", "south")),
    ("What is honey made by?", ("bees", "crows", "mice", "trout")),
    ("Which vegetable is orange and long?", ("a carrot", "a cabbage", "a leek", "a beet")),
    ("What covers most of the Earth's surface?", ("water", "forest", "desert", "snow")),
    ("Which bird is famous for mimicry?", ("a parrot", "a duck", "a swan", "a stork")),
    ("What do you use an umbrella for?", ("rain", "cooking", "digging", "painting")),
    ("Which metal is attracted to magnets?", ("iron", "copper", "tin", "lead")),
    ("What do cows drink as calves?", ("milk", "tea", "cider", "broth")),
    ("Which shape has three sides?", ("a triangle", "a square", "a circle", "an oval")),
    ("What melts in the sun?", ("ice cream", "granite", "glass", "iron")),
    ("Which organ pumps blood?", ("the heart", "the liver", "the ear", "the rib")),
    ("What do you light a candle with?", ("a match", "a fork", "a hose", "a stone")),
    ("Which fruit is yellow and curved?", ("a banana", "a plum", "a grape", "a fig")),
    ("What do sailors use to navigate by the stars?", ("a sextant", "a shovel", "a ladle", "an anvil")),
)


def make_synthetic_probes(
    seed: int = 0, n_tasks: int = 2, items_per_task: int = 8
) -> list[MultipleChoiceProbe]:
    """Seeded synthetic probe tasks, disjoint from all corpus individuals."""
    if n_tasks * items_per_task > len(_FACT_BANK):
        raise ValueError(
            f"at most {len(_FACT_BANK)} probe items are available, "
            f"requested {n_tasks * items_per_task}"
        )
    rng = random.Random(seed)
    bank = list(_FACT_BANK)
    rng.shuffle(bank)
    probes = []
    for t in range(n_tasks):
        items = []
        for question, choices in bank[t * items_per_task : (t + 1) * items_per_task]:
            order = list(range(len(choices)))
            rng.shuffle(order)
            shuffled = tuple(choices[i] for i in order)
            items.append(
                ProbeItem(question=question, choices=shuffled, answer_index=order.index(0))
            )
        probes.append(MultipleChoiceProbe(name=f"probe-{t + 1}", items=items))
    return probes


def probe_texts(probes: list[MultipleChoiceProbe]) -> list[str]:
    out: list[str] = []
    for probe in probes:
        out.extend(probe.texts())
    return out

"""Analytically tractable backend: one logit row per question over a closed answer vocabulary.

Used as the gradient oracle for loss verification: the gradient of
log-probability with respect to a question's logits is exactly
one-hot(answer) - softmax(logits).
"""

from __future__ import annotations

import torch

from ..errors import FrozenModelError, UnknownQuestionError, VocabularyError
from .base import Model


class TabularModel(Model):
    backend_kind = "tabular"
    default_learning_rate = 0.1

    def __init__(
        self,
        questions: list[str],
        answers: list[str],
        logits: torch.Tensor | None = None,
        frozen: bool = False,
    ):
        if len(set(questions)) != len(questions):
            raise ValueError("duplicate questions in tabular model")
        if len(set(answers)) != len(answers):
            raise ValueError("duplicate answers in tabular vocabulary")
        self.questions = list(questions)
        self.answers = list(answers)
        self._q_index = {q: i for i, q in enumerate(self.questions)}
        self._a_index = {a: i for i, a in enumerate(self.answers)}
        if logits is None:
            logits = torch.zeros(len(self.questions), len(self.answers), dtype=torch.float64)
        if logits.shape != (len(self.questions), len(self.answers)):
            raise ValueError(
                f"logits shape {tuple(logits.shape)} does not match "
                f"({len(self.questions)}, {len(self.answers)})"
            )
        self._frozen = frozen
        self.logits = logits.detach().clone().to(torch.float64)
        self.logits.requires_grad_(not frozen)

    # -- contract -----------------------------------------------------------

    @property
    def supports_gradients(self) -> bool:
        return not self._frozen

    @property
    def supports_generation(self) -> bool:
        return True

    @property
    def is_frozen(self) -> bool:
        return self._frozen

    @property
    def vocab_signature(self) -> tuple:
        return ("tabular", tuple(self.answers))

    def _row(self, question: str) -> torch.Tensor:
        try:
            return self.logits[self._q_index[question]]
        except KeyError:
            raise UnknownQuestionError(
                f"question not in tabular model (closed question set): {question!r}"
            ) from None

    def _answer_id(self, answer: str) -> int:
        try:
            return self._a_index[answer]
        except KeyError:
            raise VocabularyError(f"answer not in tabular vocabulary: {answer!r}") from None

    def answer_log_likelihood(self, question: str, answer: str) -> torch.Tensor:
        logp = torch.log_softmax(self._row(question), dim=0)[self._answer_id(answer)]
        return logp.detach() if self._frozen else logp

    def probabilities(self, question: str) -> torch.Tensor:
        return torch.softmax(self._row(question), dim=0).detach()

    def generate(self, question: str) -> str:
        row = self._row(question).detach()
        # Ties break toward the lowest answer index.
        best = int(torch.nonzero(row == row.max())[0])
        return self.answers[best]

    def conditional_log_distributions(self, question: str, answer: str) -> torch.Tensor:
        logp = torch.log_softmax(self._row(question), dim=0).unsqueeze(0)
        return logp.detach() if self._frozen else logp

    def clone_frozen(self) -> "TabularModel":
        return TabularModel(self.questions, self.answers, self.logits, frozen=True)

    def clone_trainable(self) -> "TabularModel":
        return TabularModel(self.questions, self.answers, self.logits, frozen=False)

    def trainable_parameters(self) -> list[torch.Tensor]:
        if self._frozen:
            raise FrozenModelError("frozen tabular model has no trainable parameters")
        return [self.logits]

    def _build_optimizer(self, learning_rate: float) -> torch.optim.Optimizer:
        # Plain gradient descent: adaptivity is noise at this scale.
        return torch.optim.SGD(self.trainable_parameters(), lr=learning_rate)

    def state_payload(self) -> dict:
        return {
            "config": {"questions": self.questions, "answers": self.answers},
            "tensors": {"logits": self.logits.detach()},
        }

    @classmethod
    def from_state_payload(cls, config: dict, tensors: dict[str, torch.Tensor]) -> "TabularModel":
        return cls(config["questions"], config["answers"], tensors["logits"])

    # -- construction helpers -------------------------------------------------

    def set_row(self, question: str, values: list[float]) -> None:
        if self._frozen:
            raise FrozenModelError("cannot edit a frozen tabular model")
        with torch.no_grad():
            self._row(question)[:] = torch.tensor(values, dtype=torch.float64)


def build_tabular_world(
    records,
    extra_answers: list[str] = (),
    extra_questions: list[str] = (),
    gold_logit: float = 0.3,
) -> TabularModel:
    """Greedy-memorized tabular model over a corpus: gold answer is the argmax of every row.

    ``gold_logit`` controls how entrenched the memorized answer is; the default
    keeps desk-scale unlearning runs able to flip rows in a few epochs.
    Extra questions get uniform rows (no memorized answer).
    """
    questions: list[str] = []
    answers: list[str] = []
    seen_a: set[str] = set()
    gold_of: dict[str, str] = {}
    for record in records:
        for qa in record.qa_pairs:
            questions.append(qa.question)
            gold_of[qa.question] = qa.gold_answer
            if qa.gold_answer not in seen_a:
                seen_a.add(qa.gold_answer)
                answers.append(qa.gold_answer)
    for answer in extra_answers:
        if answer not in seen_a:
            seen_a.add(answer)
            answers.append(answer)
    for question in extra_questions:
        if question not in gold_of:
            questions.append(question)
            gold_of[question] = None
    model = TabularModel(questions, answers)
    with torch.no_grad():
        for q, gold in gold_of.items():
            if gold is not None:
                model.logits[model._q_index[q], model._a_index[gold]] = gold_logit
    return model

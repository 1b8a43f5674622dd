"""Model contract every pipeline stage talks to.

A backend owns tokenization and any prompt formatting; the pipeline passes raw
question/answer text. Likelihoods are natural-log. For a fixed parameter
snapshot, likelihood and greedy generation are deterministic and safe to call
concurrently; parameter updates require exclusive access (one writer, many
readers between steps).
"""

from __future__ import annotations

from abc import ABC, abstractmethod

import torch

from ..errors import FrozenModelError


class Model(ABC):
    """Conditional sequence model exposing answer log-likelihood and greedy decoding."""

    backend_kind: str = "abstract"
    default_learning_rate: float = 1e-5

    @property
    @abstractmethod
    def supports_gradients(self) -> bool: ...

    @property
    @abstractmethod
    def supports_generation(self) -> bool: ...

    @property
    @abstractmethod
    def is_frozen(self) -> bool: ...

    @property
    @abstractmethod
    def vocab_signature(self) -> tuple:
        """Identity of the output vocabulary; distribution-level ops require a match."""

    @abstractmethod
    def answer_log_likelihood(self, question: str, answer: str) -> torch.Tensor:
        """log M(answer | question) as a 0-dim tensor.

        Connected to the parameter graph when the model is trainable, so losses
        built from it can be backpropagated; detached on frozen handles.
        """

    @abstractmethod
    def generate(self, question: str) -> str:
        """Deterministic greedy decode."""

    @abstractmethod
    def conditional_log_distributions(self, question: str, answer: str) -> torch.Tensor:
        """Per-position log-distributions over the answer vocabulary, shape [positions, vocab].

        Tabular backends expose a single position (the whole-answer
        distribution); sequence backends expose the teacher-forced next-token
        distribution at every answer position.
        """

    @abstractmethod
    def clone_frozen(self) -> "Model":
        """Independent snapshot whose outputs never change as the source trains."""

    @abstractmethod
    def clone_trainable(self) -> "Model":
        """Independent copy with gradient tracking enabled."""

    @abstractmethod
    def trainable_parameters(self) -> list[torch.Tensor]: ...

    @abstractmethod
    def state_payload(self) -> dict:
        """Checkpoint payload: plain config plus named tensors (see backends.io)."""

    def make_optimizer(self, learning_rate: float | None = None) -> torch.optim.Optimizer:
        if self.is_frozen:
            raise FrozenModelError(f"cannot optimize a frozen {self.backend_kind} model")
        lr = self.default_learning_rate if learning_rate is None else learning_rate
        return self._build_optimizer(lr)

    @abstractmethod
    def _build_optimizer(self, learning_rate: float) -> torch.optim.Optimizer: ...

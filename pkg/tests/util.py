"""Shared test helpers: independent oracles kept deliberately separate from
the library code paths they check."""

from __future__ import annotations

import random

import torch

from unlearnkit.backends import TabularModel


def random_tabular(
    rng: random.Random, n_questions: int = 3, n_answers: int = 5, scale: float = 2.0
) -> TabularModel:
    questions = [f"q{i}" for i in range(n_questions)]
    answers = [f"a{j}" for j in range(n_answers)]
    logits = torch.tensor(
        [[rng.uniform(-scale, scale) for _ in answers] for _ in questions],
        dtype=torch.float64,
    )
    return TabularModel(questions, answers, logits)


def finite_difference_gradient(loss_fn, model: TabularModel, eps: float = 1e-5) -> torch.Tensor:
    """Central finite differences of loss_fn w.r.t. every logit entry."""
    grad = torch.zeros_like(model.logits)
    with torch.no_grad():
        for i in range(grad.shape[0]):
            for j in range(grad.shape[1]):
                probe = model.clone_trainable()
                probe.logits[i, j] += eps
                plus = float(loss_fn(probe))
                probe.logits[i, j] -= 2 * eps
                minus = float(loss_fn(probe))
                grad[i, j] = (plus - minus) / (2 * eps)
    return grad


def analytic_gradient(loss_fn, model: TabularModel) -> torch.Tensor:
    probe = model.clone_trainable()
    loss = loss_fn(probe)
    loss.backward()
    return probe.logits.grad.detach().clone()


def max_relative_error(analytic: torch.Tensor, numeric: torch.Tensor, floor: float = 1e-6) -> float:
    """Relative error with a floor so near-zero entries compare absolutely."""
    denom = torch.maximum(numeric.abs(), torch.full_like(numeric, floor))
    return float(((analytic - numeric).abs() / denom).max())


class ScriptedModel:
    """Generation-only stand-in with fully scripted outputs."""

    backend_kind = "scripted"
    supports_gradients = False
    supports_generation = True
    is_frozen = True

    def __init__(self, outputs: dict[str, str], default: str | None = None):
        self.outputs = dict(outputs)
        self.default = default

    def generate(self, question: str) -> str:
        if question in self.outputs:
            return self.outputs[question]
        if self.default is None:
            raise KeyError(f"no scripted output for {question!r}")
        return self.default

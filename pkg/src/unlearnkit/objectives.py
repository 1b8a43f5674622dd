"""Unlearning loss terms and their combination into a single step objective.

Five forget-side objectives (plain likelihood ascent, reference-ratio
preference losses, and relabel-based descent) plus two retain-side
regularizers (likelihood descent and distribution matching against the frozen
original model). All values are natural-log based means over the batch, so
every loss is invariant to duplicating its examples. Descending on each value
implements the intended update; in particular the ascent objective returns
+log-likelihood, so gradient descent on it pushes likelihood down.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import torch
import torch.nn.functional as F

from .backends.base import Model
from .errors import LossError

logger = logging.getLogger(__name__)

FORGET_LOSSES = ("ga", "npo", "rgd", "rdpo", "nauf")
REGULARIZERS = ("none", "gd", "kld")
RELABELED = ("rgd", "rdpo", "nauf")

# Probabilities are floored at 1e-12 inside ratio/log computations: reference
# ratios blow up exactly when unlearning succeeds, and silent infs would
# poison whole batches.
PROB_FLOOR = 1e-12
LOG_FLOOR = math.log(PROB_FLOOR)

_clamp_count = 0


def clamp_count() -> int:
    """Number of log-probabilities floored since the last reset."""
    return _clamp_count


def reset_clamp_count() -> None:
    global _clamp_count
    _clamp_count = 0


def _floor_logp(logp: torch.Tensor, context: str) -> torch.Tensor:
    global _clamp_count
    if not bool(torch.isfinite(logp).all()):
        raise LossError(f"{context}: log-probability is not finite (probability underflowed to 0)")
    below = int((logp < LOG_FLOOR).sum())
    if below:
        _clamp_count += below
        logger.warning("%s: clamped %d log-probabilities to the 1e-12 floor", context, below)
        logp = logp.clamp(min=LOG_FLOOR)
    return logp


@dataclass(frozen=True)
class LossConfig:
    forget_loss: str
    regularizer: str = "none"
    beta: float = 0.1
    forget_weight: float = 1.0
    regularizer_weight: float = 1.0

    def __post_init__(self):
        if self.forget_loss not in FORGET_LOSSES:
            raise LossError(f"unknown forget loss {self.forget_loss!r} (expected one of {FORGET_LOSSES})")
        if self.regularizer not in REGULARIZERS:
            raise LossError(f"unknown regularizer {self.regularizer!r} (expected one of {REGULARIZERS})")
        if self.beta <= 0:
            raise LossError(f"beta must be positive, got {self.beta}")

    @property
    def needs_reference(self) -> bool:
        return self.forget_loss in ("npo", "rdpo") or self.regularizer == "kld"

    @property
    def needs_relabels(self) -> bool:
        return self.forget_loss in RELABELED


@dataclass(frozen=True)
class ForgetExample:
    question: str
    target_answer: str  # relabel for rgd/rdpo/nauf, the gold answer itself for ga/npo
    gold_answer: str
    owner_name: str = ""
    provenance: str = "original-forget"


@dataclass(frozen=True)
class RetainExample:
    question: str
    answer: str
    owner_name: str = ""
    provenance: str = "original-retain"


@dataclass
class LossBatch:
    forget_examples: list[ForgetExample] = field(default_factory=list)
    retain_examples: list[RetainExample] = field(default_factory=list)


def _forget(batch) -> list[ForgetExample]:
    examples = batch.forget_examples if isinstance(batch, LossBatch) else list(batch)
    if not examples:
        raise LossError("empty forget batch")
    return examples


def _retain(batch) -> list[RetainExample]:
    examples = batch.retain_examples if isinstance(batch, LossBatch) else list(batch)
    if not examples:
        raise LossError("empty retain batch")
    return examples


def _require_relabels(examples: list[ForgetExample], loss_name: str) -> None:
    for ex in examples:
        if not ex.target_answer.strip():
            raise LossError(f"{loss_name} requires a relabeled target answer for {ex.question!r}")


# ---------------------------------------------------------------------------
# Forget-side objectives.
# ---------------------------------------------------------------------------

def loss_ga(model_u: Model, batch) -> torch.Tensor:
    """Likelihood-ascent objective: mean +log M_u(y|x) over the forget batch."""
    examples = _forget(batch)
    terms = [model_u.answer_log_likelihood(ex.question, ex.target_answer) for ex in examples]
    return torch.stack(terms).mean()


def loss_npo(model_u: Model, model_o: Model, batch, beta: float) -> torch.Tensor:
    """Reference-anchored unlearning: mean (2/beta) * log(1 + (p_u/p_o)^beta).

    Computed in log space as softplus(beta * (log p_u - log p_o)); the frozen
    reference probability must be nonzero.
    """
    if beta <= 0:
        raise LossError(f"beta must be positive, got {beta}")
    examples = _forget(batch)
    terms = []
    for ex in examples:
        logp_u = _floor_logp(model_u.answer_log_likelihood(ex.question, ex.target_answer), "npo: M_u")
        logp_o = _floor_logp(
            model_o.answer_log_likelihood(ex.question, ex.target_answer).detach(), "npo: M_o"
        )
        terms.append((2.0 / beta) * F.softplus(beta * (logp_u - logp_o)))
    return torch.stack(terms).mean()


def loss_rgd(model_u: Model, batch) -> torch.Tensor:
    """Descent on relabeled forget data: mean -log M_u(relabel|x).

    Same functional form as the retain-side descent regularizer, applied to a
    relabeled forget set; the name-aware variant differs only in how the
    relabels were constructed.
    """
    examples = _forget(batch)
    _require_relabels(examples, "relabeled descent")
    terms = [-model_u.answer_log_likelihood(ex.question, ex.target_answer) for ex in examples]
    return torch.stack(terms).mean()


def loss_rdpo(model_u: Model, model_o: Model, batch, beta: float) -> torch.Tensor:
    """Preference-style relabel objective.

    mean -log sigmoid(beta*log[p_u(relabel)/p_o(relabel)] - beta*log[p_u(gold)/p_o(gold)])
    with the relabel preferred and the gold answer dispreferred.
    """
    if beta <= 0:
        raise LossError(f"beta must be positive, got {beta}")
    examples = _forget(batch)
    _require_relabels(examples, "preference relabel loss")
    terms = []
    for ex in examples:
        if not ex.gold_answer.strip():
            raise LossError(f"preference relabel loss requires the gold answer for {ex.question!r}")
        lu_pref = _floor_logp(model_u.answer_log_likelihood(ex.question, ex.target_answer), "rdpo: M_u preferred")
        lo_pref = _floor_logp(
            model_o.answer_log_likelihood(ex.question, ex.target_answer).detach(), "rdpo: M_o preferred"
        )
        lu_gold = _floor_logp(model_u.answer_log_likelihood(ex.question, ex.gold_answer), "rdpo: M_u gold")
        lo_gold = _floor_logp(
            model_o.answer_log_likelihood(ex.question, ex.gold_answer).detach(), "rdpo: M_o gold"
        )
        margin = beta * (lu_pref - lo_pref) - beta * (lu_gold - lo_gold)
        terms.append(-F.logsigmoid(margin))
    return torch.stack(terms).mean()


# ---------------------------------------------------------------------------
# Retain-side regularizers.
# ---------------------------------------------------------------------------

def loss_gd_reg(model_u: Model, batch) -> torch.Tensor:
    """Likelihood descent on the retain batch: mean -log M_u(y|x)."""
    examples = _retain(batch)
    terms = [-model_u.answer_log_likelihood(ex.question, ex.answer) for ex in examples]
    return torch.stack(terms).mean()


def loss_kld_reg(model_u: Model, model_o: Model, batch) -> torch.Tensor:
    """Mean KL(M_o || M_u) over retain examples.

    Tabular backends contribute one whole-answer distribution per question;
    sequence backends contribute teacher-forced next-token distributions at
    each gold-answer position, averaged over positions.
    """
    if model_u.vocab_signature != model_o.vocab_signature:
        raise LossError("vocabulary mismatch between the two models")
    examples = _retain(batch)
    terms = []
    for ex in examples:
        logp_o = model_o.conditional_log_distributions(ex.question, ex.answer).detach()
        logp_u = _floor_logp(
            model_u.conditional_log_distributions(ex.question, ex.answer), "kld: M_u"
        )
        per_position = (logp_o.exp() * (logp_o - logp_u)).sum(dim=1)
        terms.append(per_position.mean())
    return torch.stack(terms).mean()


# ---------------------------------------------------------------------------
# Combination.
# ---------------------------------------------------------------------------

@dataclass
class CombinedLoss:
    total: torch.Tensor
    forget_term: torch.Tensor
    regularizer_term: torch.Tensor


def validate_batch(config: LossConfig, batch: LossBatch) -> None:
    """Raise a LossError naming the missing field when batch and config disagree."""
    if not batch.forget_examples:
        raise LossError("batch has no forget examples")
    if config.needs_relabels:
        _require_relabels(batch.forget_examples, config.forget_loss)
    else:
        for ex in batch.forget_examples:
            if ex.target_answer != ex.gold_answer:
                raise LossError(
                    f"{config.forget_loss} trains on the gold answer, but {ex.question!r} "
                    "carries a relabel"
                )
    if config.regularizer != "none":
        if not batch.retain_examples:
            raise LossError(
                f"regularizer {config.regularizer!r} requires retain examples, batch has none"
            )
        if len(batch.retain_examples) != len(batch.forget_examples):
            raise LossError(
                f"pairing rule violated: {len(batch.forget_examples)} forget vs "
                f"{len(batch.retain_examples)} retain examples"
            )


def combined_loss(
    config: LossConfig, model_u: Model, model_o: Model | None, batch: LossBatch
) -> CombinedLoss:
    """Forget term plus regularizer term with configurable (default unit) weights."""
    validate_batch(config, batch)
    if config.needs_reference and model_o is None:
        raise LossError(f"{config.forget_loss}/{config.regularizer} needs the frozen original model")

    if config.forget_loss == "ga":
        forget_term = loss_ga(model_u, batch)
    elif config.forget_loss == "npo":
        forget_term = loss_npo(model_u, model_o, batch, config.beta)
    elif config.forget_loss in ("rgd", "nauf"):
        # The name-aware method optimizes the relabel-descent form; it differs
        # from plain relabeled descent only in data construction.
        forget_term = loss_rgd(model_u, batch)
    else:
        forget_term = loss_rdpo(model_u, model_o, batch, config.beta)

    if config.regularizer == "gd":
        reg_term = loss_gd_reg(model_u, batch.retain_examples)
    elif config.regularizer == "kld":
        reg_term = loss_kld_reg(model_u, model_o, batch.retain_examples)
    else:
        reg_term = torch.zeros_like(forget_term)

    total = config.forget_weight * forget_term + config.regularizer_weight * reg_term
    return CombinedLoss(total=total, forget_term=forget_term, regularizer_term=reg_term)

"""The unlearning loop: batching with the forget/retain pairing rule,
optimization, epoch scheduling, checkpointing, and run manifests.

Per epoch, every forget-train example is seen exactly once (reshuffled under
the run seed); when a regularizer is active each forget example is paired with
one seeded-random retain example, so the retain budget per epoch equals the
forget-set size. The original model is never mutated: the unlearned model and
any frozen reference are clones.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import random
from dataclasses import dataclass, field
from pathlib import Path

from .backends import save_model
from .backends.base import Model
from .corpus import PersonRecord, SplitAssignment, corpus_index
from .errors import TrainingDivergedError, TrainingError
from .nauf import (
    CDA_FORGET,
    CDA_RETAIN,
    ORIGINAL_REFUSAL,
    ORIGINAL_RETAIN,
    AugmentedExample,
    RefusalTemplateSet,
    instantiate_refusal,
    shipped_templates,
)
from .objectives import (
    CombinedLoss,
    ForgetExample,
    LossBatch,
    LossConfig,
    RetainExample,
    combined_loss,
)

logger = logging.getLogger(__name__)

DIVERGENCE_LIMIT = 1e4
RETAIN_BUDGET_RULES = ("match-forget",)


@dataclass(frozen=True)
class TrainConfig:
    loss: LossConfig
    learning_rate: float | None = None  # None: backend default
    batch_size: int = 32
    epochs: int = 5
    seed: int = 0
    retain_budget: str = "match-forget"

    def __post_init__(self):
        if self.learning_rate is not None and self.learning_rate <= 0:
            raise TrainingError(f"learning rate must be positive, got {self.learning_rate}")
        if self.batch_size < 1:
            raise TrainingError(f"batch size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise TrainingError(f"epochs must be >= 0, got {self.epochs}")
        if self.retain_budget not in RETAIN_BUDGET_RULES:
            raise TrainingError(
                f"unknown retain budget rule {self.retain_budget!r} "
                f"(expected one of {RETAIN_BUDGET_RULES})"
            )


def prepare_training_data(
    split: SplitAssignment,
    corpus: list[PersonRecord],
    loss: LossConfig,
    seed: int,
    augmented: list[AugmentedExample] | None = None,
    name_aware: RefusalTemplateSet | None = None,
    uninformed: RefusalTemplateSet | None = None,
) -> tuple[list[ForgetExample], list[RetainExample]]:
    """Assemble the forget examples and the retain pool for one run.

    Relabels for the relabel-based objectives are sampled here under the run
    seed: uninformed answers for rgd/rdpo, name-aware refusals for nauf.
    A pre-built augmentation list extends a nauf run on both sides.
    """
    by_name = corpus_index(corpus)
    rng = random.Random(f"relabel:{seed}")

    forget: list[ForgetExample] = []
    for name in split.forget_names:
        for i in split.indices(name, "train"):
            qa = by_name[name].qa_pairs[i]
            if loss.forget_loss in ("ga", "npo"):
                target, provenance = qa.gold_answer, "original-forget"
            elif loss.forget_loss in ("rgd", "rdpo"):
                templates = uninformed or shipped_templates("uninformed")
                target, provenance = instantiate_refusal(templates, name, rng), ORIGINAL_REFUSAL
            else:  # nauf
                templates = name_aware or shipped_templates("name-aware")
                target, provenance = instantiate_refusal(templates, name, rng), ORIGINAL_REFUSAL
            forget.append(
                ForgetExample(
                    question=qa.question,
                    target_answer=target,
                    gold_answer=qa.gold_answer,
                    owner_name=name,
                    provenance=provenance,
                )
            )

    retain: list[RetainExample] = [
        RetainExample(
            question=by_name[name].qa_pairs[i].question,
            answer=by_name[name].qa_pairs[i].gold_answer,
            owner_name=name,
            provenance=ORIGINAL_RETAIN,
        )
        for name in split.retain_names
        for i in split.indices(name, "train")
    ]

    if augmented:
        if loss.forget_loss != "nauf":
            raise TrainingError(
                f"augmented data is part of the name-aware method; "
                f"forget loss is {loss.forget_loss!r}"
            )
        for ex in augmented:
            if ex.provenance == CDA_FORGET:
                forget.append(
                    ForgetExample(
                        question=ex.question,
                        target_answer=ex.answer,
                        gold_answer="",
                        owner_name=ex.target_name,
                        provenance=CDA_FORGET,
                    )
                )
            elif ex.provenance == CDA_RETAIN:
                retain.append(
                    RetainExample(
                        question=ex.question,
                        answer=ex.answer,
                        owner_name=ex.target_name,
                        provenance=CDA_RETAIN,
                    )
                )
            else:
                raise TrainingError(f"unexpected provenance in augmented file: {ex.provenance!r}")

    if not forget:
        raise TrainingError("forget train set is empty")
    return forget, retain


def make_epoch_schedule(
    forget_examples: list[ForgetExample],
    retain_pool: list[RetainExample],
    config: TrainConfig,
    epoch_seed: int | str,
) -> list[LossBatch]:
    """One epoch of batches: every forget example once, paired retain sampling."""
    if not forget_examples:
        raise TrainingError("forget train set is empty")
    pair_retain = config.loss.regularizer != "none"
    if pair_retain and not retain_pool:
        raise TrainingError(
            f"regularizer {config.loss.regularizer!r} requires a retain set, none available"
        )
    rng = random.Random(epoch_seed)
    order = list(forget_examples)
    rng.shuffle(order)
    paired = [rng.choice(retain_pool) for _ in order] if pair_retain else []

    batches = []
    for start in range(0, len(order), config.batch_size):
        stop = start + config.batch_size
        batches.append(
            LossBatch(
                forget_examples=order[start:stop],
                retain_examples=paired[start:stop] if pair_retain else [],
            )
        )
    return batches


@dataclass
class StepRecord:
    epoch: int
    step: int
    forget_term: float
    regularizer_term: float
    total: float

    def to_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "step": self.step,
            "forget_term": self.forget_term,
            "regularizer_term": self.regularizer_term,
            "total": self.total,
        }


@dataclass
class UnlearningRun:
    model_u: Model
    trace: list[StepRecord]
    epoch_checkpoints: dict[int, Path] = field(default_factory=dict)
    model_u_path: Path | None = None
    trace_path: Path | None = None
    manifest_path: Path | None = None


def _check_step(parts: CombinedLoss, epoch: int, step: int) -> None:
    total = parts.total.item()
    if not math.isfinite(total):
        raise TrainingDivergedError(
            f"loss became non-finite at epoch {epoch} step {step}", epoch, step
        )
    if abs(total) > DIVERGENCE_LIMIT:
        raise TrainingDivergedError(
            f"loss {total:.3e} exceeded the divergence guard ({DIVERGENCE_LIMIT:.0e}) "
            f"at epoch {epoch} step {step}",
            epoch,
            step,
        )


def run_unlearning(
    model_o: Model,
    split: SplitAssignment,
    corpus: list[PersonRecord],
    config: TrainConfig,
    augmented: list[AugmentedExample] | None = None,
    name_aware: RefusalTemplateSet | None = None,
    uninformed: RefusalTemplateSet | None = None,
    out_dir: str | Path | None = None,
    input_files: dict[str, str] | None = None,
) -> UnlearningRun:
    """Train an unlearned model from a frozen original.

    Returns the trained model plus the per-step loss trace; when ``out_dir``
    is set, writes a checkpoint at the end of every epoch, the final model,
    the trace, and a replayable run manifest.
    """
    if not model_o.supports_gradients and not model_o.is_frozen:
        raise TrainingError("original model does not expose gradients")

    forget_examples, retain_pool = prepare_training_data(
        split, corpus, config.loss, config.seed, augmented, name_aware, uninformed
    )
    if config.loss.regularizer != "none" and not retain_pool:
        raise TrainingError("regularizer configured but the retain pool is empty")

    model_u = model_o.clone_trainable()
    reference = model_o.clone_frozen() if config.loss.needs_reference else None
    optimizer = model_u.make_optimizer(config.learning_rate)

    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)

    trace: list[StepRecord] = []
    run = UnlearningRun(model_u=model_u, trace=trace)
    global_step = 0
    for epoch in range(1, config.epochs + 1):
        for batch in make_epoch_schedule(
            forget_examples, retain_pool, config, f"epoch:{config.seed}:{epoch}"
        ):
            parts = combined_loss(config.loss, model_u, reference, batch)
            _check_step(parts, epoch, global_step)
            optimizer.zero_grad()
            parts.total.backward()
            optimizer.step()
            trace.append(
                StepRecord(
                    epoch=epoch,
                    step=global_step,
                    forget_term=parts.forget_term.item(),
                    regularizer_term=parts.regularizer_term.item(),
                    total=parts.total.item(),
                )
            )
            global_step += 1
        logger.info(
            "epoch %d/%d: total %.4f", epoch, config.epochs,
            trace[-1].total if trace else float("nan"),
        )
        if out_path is not None:
            run.epoch_checkpoints[epoch] = save_model(
                model_u, out_path / f"epoch_{epoch:03d}.ckpt.json"
            )

    if out_path is not None:
        run.model_u_path = save_model(model_u, out_path / "model_u.ckpt.json")
        run.trace_path = save_trace(trace, out_path / "trace.jsonl")
        run.manifest_path = write_manifest(
            out_path / "manifest.json", config, input_files or {}, run
        )
    return run


def save_trace(trace: list[StepRecord], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for record in trace:
            handle.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")
    return path


def file_sha256(path: str | Path) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(
    path: str | Path,
    config: TrainConfig,
    input_files: dict[str, str],
    run: UnlearningRun,
) -> Path:
    """Replayable record of a run: resolved config, seeds, input hashes, outputs."""
    manifest = {
        "config": {
            "loss": {
                "forget_loss": config.loss.forget_loss,
                "regularizer": config.loss.regularizer,
                "beta": config.loss.beta,
                "forget_weight": config.loss.forget_weight,
                "regularizer_weight": config.loss.regularizer_weight,
            },
            "learning_rate": config.learning_rate,
            "batch_size": config.batch_size,
            "epochs": config.epochs,
            "seed": config.seed,
            "retain_budget": config.retain_budget,
        },
        "inputs": {
            label: {"path": str(p), "sha256": file_sha256(p)}
            for label, p in sorted(input_files.items())
        },
        "outputs": {
            "model_u": str(run.model_u_path) if run.model_u_path else None,
            "trace": str(run.trace_path) if run.trace_path else None,
            "epoch_checkpoints": {
                str(epoch): str(p) for epoch, p in sorted(run.epoch_checkpoints.items())
            },
        },
        "n_steps": len(run.trace),
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_manifest(path: str | Path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise TrainingError(f"cannot read run manifest {path}: {exc}") from exc

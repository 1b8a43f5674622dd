"""Person-level unlearning toolkit: make a conditional sequence model stop
answering questions about designated individuals while preserving the rest."""

__version__ = "0.1.0"

from .corpus import (
    PersonRecord,
    QAPair,
    SplitAssignment,
    generate_synthetic_corpus,
    load_corpus,
    make_split,
    save_corpus,
)
from .errors import UnlearnkitError
from .evaluation import UnlearningReport, evaluate, forget_score, retain_score
from .judge import ExactMatchJudge, NliClientJudge, Verdict, accuracy
from .memorization import AccuracyTable, profile_memorization, select_memorized
from .objectives import LossBatch, LossConfig, combined_loss
from .trainer import TrainConfig, run_unlearning

__all__ = [
    "__version__",
    "QAPair",
    "PersonRecord",
    "SplitAssignment",
    "generate_synthetic_corpus",
    "load_corpus",
    "save_corpus",
    "make_split",
    "ExactMatchJudge",
    "NliClientJudge",
    "Verdict",
    "accuracy",
    "AccuracyTable",
    "profile_memorization",
    "select_memorized",
    "LossConfig",
    "LossBatch",
    "combined_loss",
    "TrainConfig",
    "run_unlearning",
    "UnlearningReport",
    "evaluate",
    "forget_score",
    "retain_score",
    "UnlearnkitError",
]

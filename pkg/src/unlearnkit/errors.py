"""Exception hierarchy shared across the package."""


class UnlearnkitError(Exception):
    """Base class for all package errors."""


class CorpusError(UnlearnkitError):
    """Corpus file is malformed or violates a record invariant."""


class SplitError(UnlearnkitError):
    """Split request cannot be satisfied (bad ratio, empty input, ...)."""


class BackendError(UnlearnkitError):
    """Model backend misuse or failure."""


class VocabularyError(BackendError):
    """Text contains a token outside the backend vocabulary."""


class UnknownQuestionError(BackendError):
    """Question not present in a closed-question-set backend."""


class FrozenModelError(BackendError):
    """Attempt to mutate a frozen model handle."""


class CheckpointError(BackendError):
    """Model checkpoint file is unreadable or has an unknown format."""


class JudgeError(UnlearnkitError):
    """Judge backend unavailable or misconfigured."""


class LossError(UnlearnkitError):
    """Loss evaluated on an inconsistent or empty batch."""


class AugmentationError(UnlearnkitError):
    """Refusal-template or augmentation construction failure."""


class TrainingError(UnlearnkitError):
    """Unlearning run failed (divergence, budget violation, bad config)."""


class TrainingDivergedError(TrainingError):
    """Loss became non-finite or exceeded the divergence guard."""

    def __init__(self, message: str, epoch: int, step: int):
        super().__init__(message)
        self.epoch = epoch
        self.step = step


class UndefinedScoreError(UnlearnkitError):
    """Score denominator (original-model accuracy) is zero."""


class ConfigError(UnlearnkitError):
    """Run configuration file is missing keys or self-contradictory."""

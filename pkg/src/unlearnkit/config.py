"""Run configuration files: flat key-value INI with one section per concern.

All training hyperparameters are surfaced as keys with the standard defaults
(batch size 32, 5 epochs, beta 0.1; learning rate empty means the backend
default). Relative paths are resolved against the config file's directory.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError
from .objectives import LossConfig
from .trainer import TrainConfig

_KNOWN_KEYS = {
    "data": {"corpus", "split", "augmented"},
    "model": {"checkpoint"},
    "loss": {"forget", "regularizer", "beta", "forget_weight", "regularizer_weight"},
    "train": {"learning_rate", "batch_size", "epochs", "seed", "retain_budget"},
    "output": {"dir"},
}


@dataclass
class RunSpec:
    corpus_path: Path
    split_path: Path
    model_path: Path
    out_dir: Path
    train: TrainConfig
    augmented_path: Path | None = None

    def input_files(self) -> dict[str, str]:
        files = {
            "corpus": str(self.corpus_path),
            "split": str(self.split_path),
            "model": str(self.model_path),
        }
        if self.augmented_path is not None:
            files["augmented"] = str(self.augmented_path)
        return files


def _get(parser: configparser.ConfigParser, section: str, key: str, default=None, required=False):
    value = parser.get(section, key, fallback=None)
    if value is None or value.strip() == "":
        if required:
            raise ConfigError(f"missing required key [{section}] {key}")
        return default
    return value.strip()


def _number(value, kind, section, key):
    try:
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"[{section}] {key} must be a {kind.__name__}, got {value!r}") from None


def parse_run_config(path: str | Path) -> RunSpec:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    for section in parser.sections():
        if section not in _KNOWN_KEYS:
            raise ConfigError(f"{path}: unknown section [{section}] (expected {sorted(_KNOWN_KEYS)})")
        unknown = set(parser.options(section)) - _KNOWN_KEYS[section]
        if unknown:
            raise ConfigError(
                f"{path}: unknown keys in [{section}]: {sorted(unknown)} "
                f"(expected {sorted(_KNOWN_KEYS[section])})"
            )

    base = path.parent

    def _path(section, key, required=True) -> Path | None:
        raw = _get(parser, section, key, required=required)
        if raw is None:
            return None
        p = Path(raw)
        return p if p.is_absolute() else (base / p)

    loss = LossConfig(
        forget_loss=_get(parser, "loss", "forget", required=True),
        regularizer=_get(parser, "loss", "regularizer", default="none"),
        beta=_number(_get(parser, "loss", "beta", default="0.1"), float, "loss", "beta"),
        forget_weight=_number(
            _get(parser, "loss", "forget_weight", default="1.0"), float, "loss", "forget_weight"
        ),
        regularizer_weight=_number(
            _get(parser, "loss", "regularizer_weight", default="1.0"),
            float, "loss", "regularizer_weight",
        ),
    )
    lr_raw = _get(parser, "train", "learning_rate")
    train = TrainConfig(
        loss=loss,
        learning_rate=None if lr_raw is None else _number(lr_raw, float, "train", "learning_rate"),
        batch_size=_number(_get(parser, "train", "batch_size", default="32"), int, "train", "batch_size"),
        epochs=_number(_get(parser, "train", "epochs", default="5"), int, "train", "epochs"),
        seed=_number(_get(parser, "train", "seed", default="0"), int, "train", "seed"),
        retain_budget=_get(parser, "train", "retain_budget", default="match-forget"),
    )
    spec = RunSpec(
        corpus_path=_path("data", "corpus"),
        split_path=_path("data", "split"),
        augmented_path=_path("data", "augmented", required=False),
        model_path=_path("model", "checkpoint"),
        out_dir=_path("output", "dir"),
        train=train,
    )
    for label, file_path in spec.input_files().items():
        if not Path(file_path).exists():
            raise ConfigError(f"{path}: {label} file does not exist: {file_path}")
    return spec

"""Request/response models for the pipeline service."""

from __future__ import annotations

from pydantic import BaseModel, Field, model_validator


class BuildDatasetRequest(BaseModel):
    out_path: str
    source_path: str | None = None
    n_people: int | None = Field(default=None, ge=2)
    qa_per_person: int = Field(default=20, ge=2)
    seed: int = 0

    @model_validator(mode="after")
    def _one_source(self):
        if (self.source_path is None) == (self.n_people is None):
            raise ValueError("provide exactly one of source_path (load) or n_people (synthesize)")
        return self


class BuildDatasetResponse(BaseModel):
    out_path: str
    n_records: int
    n_qa_pairs: int
    n_invalid: int


class BuildModelRequest(BaseModel):
    corpus_path: str
    out_path: str
    kind: str = "tabular"  # "tabular" | "tiny-neural"
    seed: int = 0
    gold_logit: float = 0.3  # tabular: how entrenched memorized answers start
    memorize: bool = True  # tiny-neural: run the memorization recipe
    memorize_target: float = Field(default=0.8, gt=0, le=1)
    memorize_max_epochs: int = Field(default=400, ge=1)
    with_probes: bool = False  # include probe texts in a neural vocabulary
    probe_seed: int = 0


class BuildModelResponse(BaseModel):
    out_path: str
    kind: str
    n_parameters: int | None = None
    memorization_min_accuracy: float | None = None
    memorization_epochs: int | None = None


class IdentifyRequest(BaseModel):
    corpus_path: str
    model_path: str
    out_table_path: str
    judge: str = "exact"
    nli_url: str | None = None
    threshold: float = Field(default=0.8, gt=0, le=1)


class IdentifyResponse(BaseModel):
    table_path: str
    n_individuals: int
    n_memorized: int
    memorized_names: list[str]
    mean_accuracy: float


class SplitRequest(BaseModel):
    corpus_path: str
    out_path: str
    ratio: str = "1:9"
    seed: int = 0
    table_path: str | None = None  # restrict to memorized individuals
    threshold: float = Field(default=0.8, gt=0, le=1)


class SplitResponse(BaseModel):
    out_path: str
    n_forget: int
    n_retain: int
    forget_names: list[str]


class AugmentRequest(BaseModel):
    corpus_path: str
    split_path: str
    model_path: str
    out_path: str
    per_person: int | None = Field(default=None, ge=0)
    seed: int = 0
    templates_path: str | None = None  # defaults to the shipped name-aware set


class AugmentResponse(BaseModel):
    out_path: str
    n_examples: int
    n_forget_side: int
    n_retain_side: int


class UnlearnRequest(BaseModel):
    config_path: str
    out_dir: str | None = None  # overrides for sweeps
    epochs: int | None = Field(default=None, ge=0)
    seed: int | None = None


class UnlearnResponse(BaseModel):
    out_dir: str
    model_u_path: str
    trace_path: str
    manifest_path: str
    epoch_checkpoints: dict[str, str]
    n_steps: int
    final_total_loss: float | None


class EvaluateRequest(BaseModel):
    corpus_path: str
    split_path: str
    model_original_path: str
    model_unlearned_path: str
    out_report_path: str
    out_audit_path: str | None = None
    judge: str = "exact"
    nli_url: str | None = None
    probes: bool = False
    probe_seed: int = 0


class EvaluateResponse(BaseModel):
    report_path: str
    audit_path: str | None
    acc_o_forget: float
    acc_u_forget: float
    acc_o_retain: float
    acc_u_retain: float
    forget_score: float
    retain_score: float
    avg_unlearning_score: float
    probe_accuracies: dict[str, float]
    ns_flags: dict[str, bool]


class ReportEntry(BaseModel):
    label: str
    report_path: str


class ReportRequest(BaseModel):
    entries: list[ReportEntry] = Field(min_length=1)
    mode: str = "table"  # "table" | "epochs" (labels are epoch numbers)
    out_path: str | None = None

    @model_validator(mode="after")
    def _mode_known(self):
        if self.mode not in ("table", "epochs"):
            raise ValueError(f"mode must be 'table' or 'epochs', got {self.mode!r}")
        if self.mode == "epochs":
            for entry in self.entries:
                if not entry.label.isdigit():
                    raise ValueError(f"epoch labels must be integers, got {entry.label!r}")
        return self


class ReportResponse(BaseModel):
    text: str
    out_path: str | None


class HealthResponse(BaseModel):
    status: str
    version: str

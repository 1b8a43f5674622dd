"""Pipeline stage runners.

Each stage takes a request model and returns a response model; the HTTP routes
and the CLI are both thin wrappers around these functions. Paths are local to
the process running the stage.
"""

from __future__ import annotations

from pathlib import Path

from .. import corpus as corpus_mod
from ..backends import (
    build_tabular_world,
    corpus_model,
    load_model,
    save_model,
    train_memorization,
)
from ..config import parse_run_config
from ..errors import ConfigError, UnlearnkitError
from ..evaluation import UnlearningReport, evaluate_detailed, render_epoch_curves, render_report_table
from ..judge import make_judge, save_verdicts
from ..memorization import AccuracyTable, profile_memorization, select_memorized
from ..nauf import augment, load_augmented, load_template_set, save_augmented, shipped_templates
from ..probes import make_synthetic_probes, probe_texts
from ..trainer import run_unlearning
from . import schemas


def build_dataset(req: schemas.BuildDatasetRequest) -> schemas.BuildDatasetResponse:
    if req.n_people is not None:
        records = corpus_mod.generate_synthetic_corpus(req.n_people, req.qa_per_person, req.seed)
        expected = req.qa_per_person
    else:
        records = corpus_mod.load_corpus(req.source_path)
        expected = None
    valid = corpus_mod.valid_records(records, expected)
    out = corpus_mod.save_corpus(records, req.out_path)
    return schemas.BuildDatasetResponse(
        out_path=str(out),
        n_records=len(records),
        n_qa_pairs=sum(len(r.qa_pairs) for r in records),
        n_invalid=len(records) - len(valid),
    )


def build_model(req: schemas.BuildModelRequest) -> schemas.BuildModelResponse:
    records = _load_valid_corpus(req.corpus_path)
    if req.kind == "tabular":
        refusal_texts = [
            t.replace("[NAME]", r.name)
            for t in shipped_templates("name-aware").templates
            for r in records
        ]
        uninformed_texts = list(shipped_templates("uninformed").templates)
        model = build_tabular_world(
            records, extra_answers=refusal_texts + uninformed_texts, gold_logit=req.gold_logit
        )
        out = save_model(model, req.out_path)
        return schemas.BuildModelResponse(out_path=str(out), kind=req.kind)
    if req.kind == "tiny-neural":
        extra = [t for t in shipped_templates("name-aware").templates]
        extra += [t.replace("[NAME]", r.name) for t in extra[:1] for r in records]
        extra += list(shipped_templates("uninformed").templates)
        if req.with_probes:
            extra += probe_texts(make_synthetic_probes(req.probe_seed))
        model = corpus_model(records, extra_texts=extra, seed=req.seed)
        min_acc = None
        epochs = None
        if req.memorize:
            history = train_memorization(
                model,
                records,
                target_accuracy=req.memorize_target,
                max_epochs=req.memorize_max_epochs,
                seed=req.seed,
            )
            min_acc = history[-1]["min_accuracy"]
            epochs = history[-1]["epoch"]
        out = save_model(model, req.out_path)
        return schemas.BuildModelResponse(
            out_path=str(out),
            kind=req.kind,
            n_parameters=model.parameter_count(),
            memorization_min_accuracy=min_acc,
            memorization_epochs=epochs,
        )
    raise UnlearnkitError(f"unknown model kind {req.kind!r} (expected 'tabular' or 'tiny-neural')")


def _load_valid_corpus(path: str):
    records = corpus_mod.valid_records(corpus_mod.load_corpus(path))
    if not records:
        raise UnlearnkitError(f"corpus {path} has no valid records")
    return records


def identify(req: schemas.IdentifyRequest) -> schemas.IdentifyResponse:
    records = _load_valid_corpus(req.corpus_path)
    model = load_model(req.model_path)
    judge = make_judge(req.judge, req.nli_url)
    table = profile_memorization(model, records, judge)
    table.threshold = req.threshold
    out = table.save(req.out_table_path)
    memorized = select_memorized(table, req.threshold)
    accs = table.per_individual.values()
    return schemas.IdentifyResponse(
        table_path=str(out),
        n_individuals=len(table.per_individual),
        n_memorized=len(memorized),
        memorized_names=memorized,
        mean_accuracy=sum(accs) / len(accs),
    )


def split(req: schemas.SplitRequest) -> schemas.SplitResponse:
    records = _load_valid_corpus(req.corpus_path)
    if req.table_path is not None:
        table = AccuracyTable.load(req.table_path, threshold=req.threshold)
        keep = set(select_memorized(table))
        records = [r for r in records if r.name in keep]
        if not records:
            raise UnlearnkitError(
                f"no corpus records pass the memorization threshold {req.threshold}"
            )
    ratio = corpus_mod.parse_ratio(req.ratio)
    assignment = corpus_mod.make_split(records, ratio, req.seed)
    out = assignment.save(req.out_path)
    return schemas.SplitResponse(
        out_path=str(out),
        n_forget=len(assignment.forget_names),
        n_retain=len(assignment.retain_names),
        forget_names=list(assignment.forget_names),
    )


def augment_stage(req: schemas.AugmentRequest) -> schemas.AugmentResponse:
    records = _load_valid_corpus(req.corpus_path)
    assignment = corpus_mod.SplitAssignment.load(req.split_path)
    model = load_model(req.model_path)
    templates = (
        load_template_set(req.templates_path, "name-aware")
        if req.templates_path
        else shipped_templates("name-aware")
    )
    examples = augment(assignment, records, model.clone_frozen(), templates, req.per_person, req.seed)
    out = save_augmented(examples, req.out_path)
    n_forget = sum(1 for e in examples if e.side == "forget")
    return schemas.AugmentResponse(
        out_path=str(out),
        n_examples=len(examples),
        n_forget_side=n_forget,
        n_retain_side=len(examples) - n_forget,
    )


def unlearn(req: schemas.UnlearnRequest) -> schemas.UnlearnResponse:
    spec = parse_run_config(req.config_path)
    train_config = spec.train
    if req.epochs is not None or req.seed is not None:
        from dataclasses import replace

        train_config = replace(
            train_config,
            epochs=train_config.epochs if req.epochs is None else req.epochs,
            seed=train_config.seed if req.seed is None else req.seed,
        )
    out_dir = Path(req.out_dir) if req.out_dir else spec.out_dir

    records = _load_valid_corpus(spec.corpus_path)
    assignment = corpus_mod.SplitAssignment.load(spec.split_path)
    model_o = load_model(spec.model_path)
    augmented = load_augmented(spec.augmented_path) if spec.augmented_path else None

    run = run_unlearning(
        model_o,
        assignment,
        records,
        train_config,
        augmented=augmented,
        out_dir=out_dir,
        input_files=spec.input_files(),
    )
    return schemas.UnlearnResponse(
        out_dir=str(out_dir),
        model_u_path=str(run.model_u_path),
        trace_path=str(run.trace_path),
        manifest_path=str(run.manifest_path),
        epoch_checkpoints={str(e): str(p) for e, p in sorted(run.epoch_checkpoints.items())},
        n_steps=len(run.trace),
        final_total_loss=run.trace[-1].total if run.trace else None,
    )


def evaluate_stage(req: schemas.EvaluateRequest) -> schemas.EvaluateResponse:
    records = _load_valid_corpus(req.corpus_path)
    assignment = corpus_mod.SplitAssignment.load(req.split_path)
    model_o = load_model(req.model_original_path)
    model_u = load_model(req.model_unlearned_path)
    judge = make_judge(req.judge, req.nli_url)
    probes = make_synthetic_probes(req.probe_seed) if req.probes else []
    report, audit = evaluate_detailed(model_o, model_u, assignment, records, judge, probes)
    report_path = report.save(req.out_report_path)
    audit_path = None
    if req.out_audit_path:
        rows = [row for scope in sorted(audit) for row in audit[scope]]
        audit_path = str(save_verdicts(rows, req.out_audit_path))
    return schemas.EvaluateResponse(
        report_path=str(report_path),
        audit_path=audit_path,
        acc_o_forget=report.acc_o_forget,
        acc_u_forget=report.acc_u_forget,
        acc_o_retain=report.acc_o_retain,
        acc_u_retain=report.acc_u_retain,
        forget_score=report.forget_score,
        retain_score=report.retain_score,
        avg_unlearning_score=report.avg_unlearning_score,
        probe_accuracies=report.probe_accuracies,
        ns_flags=report.ns_flags,
    )


def report(req: schemas.ReportRequest) -> schemas.ReportResponse:
    loaded = []
    for entry in req.entries:
        path = Path(entry.report_path)
        if not path.exists():
            raise UnlearnkitError(f"report file not found: {path}")
        loaded.append((entry.label, UnlearningReport.load(path)))
    if req.mode == "table":
        text = render_report_table(loaded)
    else:
        text = render_epoch_curves([(int(label), rep) for label, rep in loaded])
    out_path = None
    if req.out_path:
        out = Path(req.out_path)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text + "\n", encoding="utf-8")
        out_path = str(out)
    return schemas.ReportResponse(text=text, out_path=out_path)


STAGES = {
    "build-dataset": (schemas.BuildDatasetRequest, build_dataset),
    "build-model": (schemas.BuildModelRequest, build_model),
    "identify": (schemas.IdentifyRequest, identify),
    "split": (schemas.SplitRequest, split),
    "augment": (schemas.AugmentRequest, augment_stage),
    "unlearn": (schemas.UnlearnRequest, unlearn),
    "evaluate": (schemas.EvaluateRequest, evaluate_stage),
    "report": (schemas.ReportRequest, report),
}


# Referenced by error handlers: config errors should surface as config errors,
# not generic failures.
__all__ = ["STAGES", "ConfigError"]

"""Command-line client for the pipeline service.

Each subcommand builds a request model and executes the matching stage, either
in-process (default) or against a running service (--server / UNLEARNKIT_SERVER).
All randomness flows from the seeds recorded in the outputs, so replaying a
command with identical inputs reproduces identical files.
"""

from __future__ import annotations

import json

import click
import httpx
from pydantic import BaseModel, ValidationError

from .errors import UnlearnkitError
from .service import schemas, stages


def _execute(ctx: click.Context, stage: str, request: BaseModel):
    _, runner = stages.STAGES[stage]
    server = ctx.obj.get("server")
    if server:
        try:
            response = httpx.post(
                f"{server.rstrip('/')}/{stage}", json=request.model_dump(mode="json"),
                timeout=None,
            )
        except httpx.HTTPError as exc:
            raise click.ClickException(f"cannot reach server {server}: {exc}") from exc
        if response.status_code != 200:
            try:
                detail = response.json().get("detail", response.text)
            except ValueError:
                detail = response.text
            raise click.ClickException(f"server returned {response.status_code}: {detail}")
        return response.json()
    try:
        return runner(request)
    except UnlearnkitError as exc:
        raise click.ClickException(str(exc)) from exc


def _emit(result) -> None:
    if isinstance(result, BaseModel):
        result = result.model_dump(mode="json")
    click.echo(json.dumps(result, indent=2, sort_keys=True))


def _request(cls, **kwargs) -> BaseModel:
    try:
        return cls(**kwargs)
    except ValidationError as exc:
        first = exc.errors()[0]
        location = ".".join(str(piece) for piece in first["loc"]) or "request"
        raise click.ClickException(f"{location}: {first['msg']}")


@click.group()
@click.option("--server", envvar="UNLEARNKIT_SERVER", default=None,
              help="Base URL of a running unlearnkit service; default runs in-process.")
@click.pass_context
def main(ctx: click.Context, server: str | None) -> None:
    """Person-level unlearning pipeline."""
    ctx.ensure_object(dict)
    ctx.obj["server"] = server


@main.command("build-dataset")
@click.option("--out", "out_path", required=True, help="Corpus file to write.")
@click.option("--source", "source_path", default=None, help="Existing corpus file to load and canonicalize.")
@click.option("--people", "n_people", type=int, default=None, help="Synthesize this many fictional people.")
@click.option("--qa", "qa_per_person", type=int, default=20, show_default=True, help="QA pairs per person.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.pass_context
def build_dataset(ctx, out_path, source_path, n_people, qa_per_person, seed):
    """Synthesize or load a corpus and write it in canonical form."""
    req = _request(schemas.BuildDatasetRequest, out_path=out_path, source_path=source_path,
                   n_people=n_people, qa_per_person=qa_per_person, seed=seed)
    _emit(_execute(ctx, "build-dataset", req))


@main.command("build-model")
@click.option("--corpus", "corpus_path", required=True)
@click.option("--out", "out_path", required=True, help="Checkpoint file to write.")
@click.option("--kind", type=click.Choice(["tabular", "tiny-neural"]), default="tabular", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--gold-logit", type=float, default=0.3, show_default=True,
              help="Tabular: initial logit of each memorized answer.")
@click.option("--memorize/--no-memorize", default=True, show_default=True,
              help="Tiny-neural: run the memorization recipe before saving.")
@click.option("--memorize-target", type=float, default=0.8, show_default=True)
@click.option("--memorize-max-epochs", type=int, default=400, show_default=True)
@click.option("--with-probes", is_flag=True, help="Tiny-neural: include probe texts in the vocabulary.")
@click.option("--probe-seed", type=int, default=0, show_default=True)
@click.pass_context
def build_model(ctx, corpus_path, out_path, kind, seed, gold_logit, memorize,
                memorize_target, memorize_max_epochs, with_probes, probe_seed):
    """Build a desk-scale base model over a corpus (the stand-in for a memorizing LLM)."""
    req = _request(schemas.BuildModelRequest, corpus_path=corpus_path, out_path=out_path, kind=kind,
                   seed=seed, gold_logit=gold_logit, memorize=memorize,
                   memorize_target=memorize_target, memorize_max_epochs=memorize_max_epochs,
                   with_probes=with_probes, probe_seed=probe_seed)
    _emit(_execute(ctx, "build-model", req))


@main.command("identify")
@click.option("--corpus", "corpus_path", required=True)
@click.option("--model", "model_path", required=True)
@click.option("--out", "out_table_path", required=True, help="Accuracy table file (name TAB accuracy).")
@click.option("--judge", type=click.Choice(["exact", "nli"]), default="exact", show_default=True)
@click.option("--nli-url", default=None, help="External NLI service URL (judge=nli).")
@click.option("--threshold", type=float, default=0.8, show_default=True)
@click.pass_context
def identify(ctx, corpus_path, model_path, out_table_path, judge, nli_url, threshold):
    """Profile per-individual accuracy and select deeply memorized individuals."""
    req = _request(schemas.IdentifyRequest, corpus_path=corpus_path, model_path=model_path,
                   out_table_path=out_table_path, judge=judge, nli_url=nli_url, threshold=threshold)
    _emit(_execute(ctx, "identify", req))


@main.command("split")
@click.option("--corpus", "corpus_path", required=True)
@click.option("--out", "out_path", required=True, help="Split file to write.")
@click.option("--ratio", default="1:9", show_default=True, help="forget:retain ratio, e.g. 1:9 or 20:80.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--table", "table_path", default=None, help="Accuracy table restricting the split to memorized names.")
@click.option("--threshold", type=float, default=0.8, show_default=True)
@click.pass_context
def split(ctx, corpus_path, out_path, ratio, seed, table_path, threshold):
    """Produce a forget/retain split with per-individual train/test QA halves."""
    req = _request(schemas.SplitRequest, corpus_path=corpus_path, out_path=out_path, ratio=ratio,
                   seed=seed, table_path=table_path, threshold=threshold)
    _emit(_execute(ctx, "split", req))


@main.command("augment")
@click.option("--corpus", "corpus_path", required=True)
@click.option("--split", "split_path", required=True)
@click.option("--model", "model_path", required=True, help="Frozen original model (labels the retain side).")
@click.option("--out", "out_path", required=True)
@click.option("--per-person", type=int, default=None,
              help="Augmented questions per individual; default doubles each train half.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--templates", "templates_path", default=None, help="Name-aware template file override.")
@click.pass_context
def augment(ctx, corpus_path, split_path, model_path, out_path, per_person, seed, templates_path):
    """Contrastive data augmentation: borrowed questions, refusal/self-labeled answers."""
    req = _request(schemas.AugmentRequest, corpus_path=corpus_path, split_path=split_path,
                   model_path=model_path, out_path=out_path, per_person=per_person, seed=seed,
                   templates_path=templates_path)
    _emit(_execute(ctx, "augment", req))


@main.command("unlearn")
@click.option("--config", "config_path", required=True, help="Run config file (INI).")
@click.option("--out-dir", default=None, help="Override the config's output directory.")
@click.option("--epochs", type=int, default=None, help="Override the config's epoch count.")
@click.option("--seed", type=int, default=None, help="Override the config's seed.")
@click.pass_context
def unlearn(ctx, config_path, out_dir, epochs, seed):
    """Run unlearning per a config file: checkpoints + trace + manifest."""
    req = _request(schemas.UnlearnRequest, config_path=config_path, out_dir=out_dir,
                   epochs=epochs, seed=seed)
    _emit(_execute(ctx, "unlearn", req))


@main.command("evaluate")
@click.option("--corpus", "corpus_path", required=True)
@click.option("--split", "split_path", required=True)
@click.option("--original", "model_original_path", required=True)
@click.option("--unlearned", "model_unlearned_path", required=True)
@click.option("--out", "out_report_path", required=True, help="Report file to write.")
@click.option("--audit", "out_audit_path", default=None, help="Verdict-level audit file (JSONL).")
@click.option("--judge", type=click.Choice(["exact", "nli"]), default="exact", show_default=True)
@click.option("--nli-url", default=None)
@click.option("--probes/--no-probes", default=False, show_default=True,
              help="Also score the synthetic general-capability probes.")
@click.option("--probe-seed", type=int, default=0, show_default=True)
@click.pass_context
def evaluate(ctx, corpus_path, split_path, model_original_path, model_unlearned_path,
             out_report_path, out_audit_path, judge, nli_url, probes, probe_seed):
    """Score an unlearned model against the original on the test halves."""
    req = _request(schemas.EvaluateRequest, corpus_path=corpus_path, split_path=split_path,
                   model_original_path=model_original_path,
                   model_unlearned_path=model_unlearned_path,
                   out_report_path=out_report_path, out_audit_path=out_audit_path,
                   judge=judge, nli_url=nli_url, probes=probes, probe_seed=probe_seed)
    _emit(_execute(ctx, "evaluate", req))


@main.command("report")
@click.argument("entries", nargs=-1, required=True, metavar="LABEL=REPORT_PATH...")
@click.option("--mode", type=click.Choice(["table", "epochs"]), default="table", show_default=True)
@click.option("--out", "out_path", default=None, help="Also write the rendered grid to this file.")
@click.pass_context
def report(ctx, entries, mode, out_path):
    """Render comparison grids across runs (method table or epoch curves)."""
    parsed = []
    for entry in entries:
        label, _, path = entry.partition("=")
        if not label or not path:
            raise click.ClickException(f"entries look like LABEL=PATH, got {entry!r}")
        parsed.append(schemas.ReportEntry(label=label, report_path=path))
    req = _request(schemas.ReportRequest, entries=parsed, mode=mode, out_path=out_path)
    result = _execute(ctx, "report", req)
    text = result["text"] if isinstance(result, dict) else result.text
    click.echo(text)


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host, port):
    """Run the pipeline as an HTTP service."""
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()

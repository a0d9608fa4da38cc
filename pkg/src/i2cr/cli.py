"""Command-line surface: link one mention, evaluate a dataset, export
instruction data, or serve the linker over HTTP.

Configuration precedence: built-in defaults < preset < config file < I2CR_*
environment variables < flags (--preset, --set key=value).
"""

import base64
import json
import re
import sys
from pathlib import Path

import click

from .backends.base import Backends
from .backends.http import http_backends
from .backends.mock import mock_backends
from .config import AppConfig, load_app_config, parse_config_text
from .errors import ConfigError, I2crError
from .evaluation import format_report_table, run_ablation, summarize_repeats
from .instructions import export_instructions, load_dataset_jsonl
from .kg import load_kg
from .manifest import build_manifest
from .pipeline import MentionSample, link, link_topk
from .service import create_app, result_payload


def _common_options(fn):
    fn = click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
                      default=None, help="Flat key=value config file.")(fn)
    fn = click.option("--preset", default=None, help="Dataset preset: wikimel, wikidiverse, or richmel.")(fn)
    fn = click.option("--set", "set_values", multiple=True, metavar="KEY=VALUE",
                      help="Override one config key; repeatable.")(fn)
    fn = click.option("--mock-transcript", type=click.Path(exists=True, dir_okay=False), default=None,
                      help="Serve every model role from this transcript file.")(fn)
    fn = click.option("--mock-lenient", is_flag=True, default=None,
                      help="Answer transcript misses with role defaults instead of failing.")(fn)
    fn = click.option("--backend-url", default=None, help="Base URL of the live model endpoints.")(fn)
    return fn


def _app_config(config_path, preset, set_values, mock_transcript, mock_lenient, backend_url) -> AppConfig:
    overrides = {
        "preset": preset,
        "mock_transcript": mock_transcript,
        "mock_lenient": mock_lenient,
        "backend_url": backend_url,
    }
    try:
        for item in set_values:
            if "=" not in item:
                raise click.UsageError(f"--set expects KEY=VALUE, got {item!r}")
            overrides.update(parse_config_text(item, source="--set"))
        return load_app_config(config_path, overrides=overrides)
    except ConfigError as exc:
        raise click.UsageError(str(exc)) from exc


def _backends(app: AppConfig) -> Backends:
    if app.mock_transcript:
        return mock_backends(app.mock_transcript, strict=not app.mock_lenient)
    if app.backend_url:
        return http_backends(
            app.backend_url, timeout=app.request_timeout, max_attempts=app.max_attempts
        )
    raise click.UsageError("no model backends configured: pass --mock-transcript or --backend-url")


def _load_sample(mention, context, image_path, sample_path) -> MentionSample:
    if sample_path:
        obj = json.loads(Path(sample_path).read_text(encoding="utf-8"))
        if not isinstance(obj, dict):
            raise click.UsageError("--sample file must hold one JSON object")
        image = None
        if obj.get("image"):
            image = (Path(sample_path).parent / obj["image"]).read_bytes()
        elif obj.get("image_b64"):
            image = base64.b64decode(obj["image_b64"])
        try:
            return MentionSample(
                mention=obj.get("mention", ""),
                context=obj.get("context", ""),
                image=image,
                gold_id=obj.get("gold_id"),
                out_of_kg=bool(obj.get("out_of_kg", False)),
            )
        except ValueError as exc:
            raise click.UsageError(str(exc)) from exc
    if not mention:
        raise click.UsageError("pass --mention or --sample")
    image = Path(image_path).read_bytes() if image_path else None
    return MentionSample(mention=mention, context=context or "", image=image)


def _slug(label: str) -> str:
    return re.sub(r"[^a-z0-9]+", "_", label.lower()).strip("_") or "run"


@click.group()
@click.version_option()
def main():
    """Multimodal entity linking over a local knowledge-graph snapshot."""


@main.command("link")
@click.option("--kg", "kg_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--kg-format", type=click.Choice(["jsonl", "tsv"]), default=None)
@click.option("--mention", default=None)
@click.option("--context", default=None)
@click.option("--image", "image_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--sample", "sample_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="JSON file with mention/context/image fields.")
@click.option("--K", "k_top", type=int, default=None, help="Also return the top-K ranked entity ids.")
@click.option("--explain", is_flag=True, help="Include the full decision trace.")
@_common_options
def cmd_link(kg_path, kg_format, mention, context, image_path, sample_path, k_top, explain, **common):
    """Link one mention and print the result as JSON."""
    app = _app_config(**common)
    backends = _backends(app)
    kg = load_kg(kg_path, kg_format)
    sample = _load_sample(mention, context, image_path, sample_path)
    try:
        if k_top is None:
            result = link(sample, kg, backends, app.pipeline)
        else:
            result = link_topk(sample, kg, backends, app.pipeline, k_top)
    except I2crError as exc:
        raise click.ClickException(f"linking failed: {exc}") from exc
    payload = result_payload(result, include_trace=explain)
    payload["wall_time"] = result.wall_time
    payload["manifest"] = build_manifest(app, kg, command=" ".join(sys.argv)).to_jsonable()
    click.echo(json.dumps(payload, ensure_ascii=False, sort_keys=True))


@main.command("eval")
@click.option("--kg", "kg_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--kg-format", type=click.Choice(["jsonl", "tsv"]), default=None)
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--K", "k_values", default="1,3,5", help="Comma-separated accuracy cutoffs.")
@click.option("--ablate", default=None,
              help="Semicolon-separated deltas, e.g. 'full;b;c;d;bcd' or 'ocr,cap'.")
@click.option("--nil-mode", type=click.Choice(["strict", "ignore_nil"]), default="strict")
@click.option("--workers", type=int, default=4)
@click.option("--failure-cap", type=float, default=0.5)
@click.option("--repeats", type=int, default=1, help="Repeat runs; mean/stddev summarized.")
@_common_options
def cmd_eval(kg_path, kg_format, dataset_path, out_dir, k_values, ablate, nil_mode,
             workers, failure_cap, repeats, **common):
    """Evaluate a dataset and write report, timing, and manifest files."""
    app = _app_config(**common)
    backends = _backends(app)
    kg = load_kg(kg_path, kg_format)
    dataset = load_dataset_jsonl(dataset_path)
    try:
        k_list = tuple(int(v) for v in k_values.split(",") if v.strip())
    except ValueError:
        raise click.UsageError(f"--K expects integers, got {k_values!r}") from None

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    eval_kwargs = dict(k_list=k_list, nil_mode=nil_mode, workers=workers, failure_cap=failure_cap)

    deltas = [t.strip() for t in ablate.split(";")] if ablate else ["full"]
    repeat_reports = []
    try:
        for repeat in range(repeats):
            labelled = run_ablation(dataset, kg, backends, app.pipeline, deltas, **eval_kwargs)
            repeat_reports.append(labelled)
    except I2crError as exc:
        raise click.ClickException(f"evaluation failed: {exc}") from exc

    suffixes = [""] if repeats == 1 else [f"_r{i}" for i in range(repeats)]
    for repeat, labelled in enumerate(repeat_reports):
        for label, report in labelled:
            stem = _slug(label) + suffixes[repeat]
            (out / f"report_{stem}.json").write_text(
                json.dumps(report.to_jsonable(), ensure_ascii=False, sort_keys=True, indent=2) + "\n",
                encoding="utf-8",
            )
            (out / f"timings_{stem}.json").write_text(
                json.dumps(report.timings_jsonable(), ensure_ascii=False) + "\n", encoding="utf-8"
            )

    table = format_report_table([report for _, report in repeat_reports[0]])
    (out / "table.txt").write_text(table + "\n", encoding="utf-8")
    if repeats > 1:
        by_label = {
            label: summarize_repeats([run[i][1] for run in repeat_reports])
            for i, (label, _) in enumerate(repeat_reports[0])
        }
        (out / "repeats.json").write_text(
            json.dumps(by_label, ensure_ascii=False, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
    manifest = build_manifest(
        app, kg, command=" ".join(sys.argv),
        dataset=str(dataset_path), k_list=list(k_list), deltas=deltas, nil_mode=nil_mode,
    )
    (out / "manifest.json").write_text(
        json.dumps(manifest.to_jsonable(), ensure_ascii=False, sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
    click.echo(table)
    click.echo(f"reports written to {out}")


@main.command("export-instructions")
@click.option("--kg", "kg_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--kg-format", type=click.Choice(["jsonl", "tsv"]), default=None)
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@_common_options
def cmd_export_instructions(kg_path, kg_format, dataset_path, out_path, **common):
    """Write the selector fine-tuning dataset as JSONL."""
    app = _app_config(**common)
    kg = load_kg(kg_path, kg_format)
    dataset = load_dataset_jsonl(dataset_path)
    try:
        stats = export_instructions(
            dataset, kg, k=app.pipeline.k, out=out_path,
            instruction=app.pipeline.instruction_template,
        )
    except I2crError as exc:
        raise click.ClickException(f"export failed: {exc}") from exc
    click.echo(stats.summary())


@main.command("serve")
@click.option("--kg", "kg_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--kg-format", type=click.Choice(["jsonl", "tsv"]), default=None)
@click.option("--listen", default="127.0.0.1:8080", help="host:port to bind.")
@_common_options
def cmd_serve(kg_path, kg_format, listen, **common):
    """Run the HTTP linking service until interrupted."""
    import uvicorn

    app_config = _app_config(**common)
    backends = _backends(app_config)
    kg = load_kg(kg_path, kg_format)
    host, _, port_text = listen.rpartition(":")
    if not host or not port_text.isdigit():
        raise click.UsageError(f"--listen expects host:port, got {listen!r}")
    app = create_app(kg, backends, app_config.pipeline)
    uvicorn.run(app, host=host, port=int(port_text), log_level="warning")


if __name__ == "__main__":
    main()

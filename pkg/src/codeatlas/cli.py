"""Batch and headless entry points: ingest, generate, evaluate, export, serve."""

from __future__ import annotations

import json
import shutil
import subprocess
import sys
from pathlib import Path
from typing import Optional

import click

from . import model
from .errors import CodeAtlasError, ConfigurationError
from .gateway import (
    SCRIPTED,
    ProviderConfig,
    build_provider,
    load_provider_config,
    load_script,
)
from .ingest import CodebaseSnapshot, scan, select_context
from .refine import evaluate as run_evaluation
from .refine import refine
from .service import MapService, create_app

KIND_FLAGS = {
    "business": model.BUSINESS_COMPONENT,
    "function-call": model.FUNCTION_CALL,
}


@click.group()
def cli():
    """Generate and inspect LLM-built code maps."""


@cli.command()
@click.argument("directory", type=click.Path(exists=True, file_okay=False))
@click.option("--ext", "extensions", multiple=True, required=True, help="File extension to include (repeatable).")
@click.option("--exclude", "excludes", multiple=True, help="Glob of paths to skip (repeatable).")
@click.option("--out", "out_path", default="snapshot.json", show_default=True, type=click.Path())
def ingest(directory, extensions, excludes, out_path):
    """Scan DIRECTORY into a snapshot file."""
    snapshot = scan(directory, extensions, excludes)
    snapshot.save(out_path)
    click.echo(
        f"wrote {out_path}: {len(snapshot.files)} files, {snapshot.total_loc} lines"
    )


def _provider_config(config_path, provider, script):
    if config_path:
        config = load_provider_config(config_path)
        if script:
            config = ProviderConfig(
                **{**config.__dict__, "script_path": str(script)}
            )
        return config
    return ProviderConfig(provider_kind=provider or SCRIPTED, script_path=script)


def _file_contents(snapshot: CodebaseSnapshot, root: Optional[str]) -> dict[str, str]:
    if root is None:
        # Scripted runs need no real contents; stubs keep the upload honest
        # about which paths went up.
        return {f.path: "" for f in snapshot.files}
    base = Path(root)
    return {
        f.path: (base / f.path).read_text("utf-8", errors="replace")
        for f in snapshot.files
    }


def _single_session_script(config: ProviderConfig) -> Optional[list]:
    if config.provider_kind != SCRIPTED or not config.script_path:
        return None
    script = load_script(config.script_path)
    if script and isinstance(script[0], list):
        raise ConfigurationError(
            "this command takes a flat script; per-run scripts are for 'evaluate'"
        )
    return script


@cli.command()
@click.option("--snapshot", "snapshot_path", required=True, type=click.Path(exists=True))
@click.option("--kind", required=True, help="business or function-call")
@click.option("--max-iter", default=5, show_default=True, type=click.IntRange(min=1))
@click.option("--out-dir", default="out", show_default=True, type=click.Path())
@click.option("--root", default=None, type=click.Path(exists=True), help="Source root for file contents (required for live provider).")
@click.option("--provider", type=click.Choice(["scripted", "live"]), default=None)
@click.option("--script", default=None, type=click.Path(exists=True), help="Scripted responses JSON file.")
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
def generate(snapshot_path, kind, max_iter, out_dir, root, provider, script, config_path):
    """Run the refinement loop once and write graph.dot, overview.json, trace.json."""
    if kind not in KIND_FLAGS:
        raise click.UsageError(
            "only global kinds are batch-generable (business, function-call); "
            "local maps require a node"
        )
    map_kind = KIND_FLAGS[kind]
    config = _provider_config(config_path, provider, script)
    if config.provider_kind != SCRIPTED and root is None:
        raise click.UsageError("--root is required for the live provider")
    snapshot = CodebaseSnapshot.load(snapshot_path)
    contents = _file_contents(snapshot, root)
    llm = build_provider(config, script=_single_session_script(config))
    handle = llm.upload_context(select_context(snapshot), contents)
    trace = refine(
        llm, handle, snapshot, map_kind,
        session_id=f"{snapshot.snapshot_id}-{kind}",
        max_iterations=max_iter,
    )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    trace_path = out / "trace.json"
    trace_path.write_text(trace.to_json(), "utf-8")
    graph = trace.final_graph()
    if graph is not None:
        from .dotio import serialize_dot

        (out / "graph.dot").write_text(serialize_dot(graph), "utf-8")
    overview = trace.final_overview()
    if overview is not None:
        (out / "overview.json").write_text(
            json.dumps(overview.to_dict(), indent=2, sort_keys=True) + "\n", "utf-8"
        )
    click.echo(
        f"{len(trace.iterations)} iterations, stopped: {trace.stopped_because}; "
        f"outputs in {out}"
    )
    if trace.stopped_because == "parse-failure":
        raise CodeAtlasError("generation ended in parse failure; see trace.json")


@cli.command()
@click.option("--snapshot", "snapshot_path", required=True, type=click.Path(exists=True))
@click.option("--kind", default="business", show_default=True)
@click.option("--runs", default=10, show_default=True, type=click.IntRange(min=1))
@click.option("--rounds", default=5, show_default=True, type=click.IntRange(min=1))
@click.option("--csv", "csv_path", default="evaluation.csv", show_default=True, type=click.Path())
@click.option("--root", default=None, type=click.Path(exists=True))
@click.option("--provider", type=click.Choice(["scripted", "live"]), default=None)
@click.option("--script", default=None, type=click.Path(exists=True))
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--workers", default=4, show_default=True, type=click.IntRange(min=1))
def evaluate(snapshot_path, kind, runs, rounds, csv_path, root, provider, script, config_path, workers):
    """Run the multi-session evaluation protocol and write a per-iteration CSV."""
    if kind not in KIND_FLAGS:
        raise click.UsageError("kind must be business or function-call")
    config = _provider_config(config_path, provider, script)
    if config.provider_kind != SCRIPTED and root is None:
        raise click.UsageError("--root is required for the live provider")
    snapshot = CodebaseSnapshot.load(snapshot_path)
    contents = _file_contents(snapshot, root)

    per_run_scripts = None
    if config.provider_kind == SCRIPTED:
        if not config.script_path:
            raise click.UsageError("scripted evaluation needs --script")
        loaded = load_script(config.script_path)
        if loaded and isinstance(loaded[0], list):
            if len(loaded) < runs:
                raise click.UsageError(
                    f"script file holds {len(loaded)} run scripts; {runs} runs requested"
                )
            per_run_scripts = loaded
        else:
            per_run_scripts = [list(loaded) for _ in range(runs)]

    def session_factory(run_index: int):
        script_for_run = (
            per_run_scripts[run_index - 1] if per_run_scripts is not None else None
        )
        llm = build_provider(config, script=script_for_run)
        handle = llm.upload_context(select_context(snapshot), contents)
        return llm, handle

    result = run_evaluation(
        snapshot, KIND_FLAGS[kind], session_factory,
        runs=runs, rounds=rounds, max_workers=workers,
    )
    result.write_csv(csv_path)
    means = ", ".join(f"{float(m):.4f}" for m in result.mean_accuracy_by_iteration)
    click.echo(f"wrote {csv_path}; mean accuracy by iteration: {means}")
    if result.failed_runs:
        click.echo(f"failed runs (excluded from means): {list(result.failed_runs)}")


@cli.command()
@click.option("--trace", "trace_path", required=True, type=click.Path(exists=True))
@click.option("--format", "fmt", type=click.Choice(["dot", "json", "svg"]), required=True)
@click.option("--out", "out_path", default=None, type=click.Path())
def export(trace_path, fmt, out_path):
    """Export a trace file's final graph (dot, svg) or the full trace (json)."""
    data = json.loads(Path(trace_path).read_text("utf-8"))
    final_dot = None
    for iteration in reversed(data.get("iterations", [])):
        if iteration.get("graphDot"):
            final_dot = iteration["graphDot"]
            break
    if fmt == "json":
        text = json.dumps(data, indent=2, sort_keys=True) + "\n"
    elif final_dot is None:
        raise CodeAtlasError("trace holds no parsed graph to export")
    elif fmt == "dot":
        text = final_dot
    else:  # svg via an external renderer
        renderer = shutil.which("dot")
        if renderer is None:
            raise CodeAtlasError(
                "svg export needs the graphviz 'dot' renderer on PATH"
            )
        result = subprocess.run(
            [renderer, "-Tsvg"], input=final_dot.encode(), capture_output=True
        )
        if result.returncode != 0:
            raise CodeAtlasError(f"dot renderer failed: {result.stderr.decode()}")
        text = result.stdout.decode()
    destination = out_path or f"export.{fmt}"
    Path(destination).write_text(text, "utf-8")
    click.echo(f"wrote {destination}")


@cli.command()
@click.option("--port", default=8000, show_default=True, type=int)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--storage", default="sessions", show_default=True, type=click.Path())
@click.option("--provider", type=click.Choice(["scripted", "live"]), default=None)
@click.option("--script", default=None, type=click.Path(exists=True))
def serve(port, host, config_path, storage, provider, script):
    """Serve the session HTTP API."""
    import uvicorn

    config = _provider_config(config_path, provider, script)
    service = MapService(
        storage_root=storage,
        provider_config=config,
        script=_single_session_script(config),
    )
    uvicorn.run(create_app(service), host=host, port=port)


def main(argv=None) -> int:
    """Exit 0 on success, 1 on usage errors, 2 on runtime failures."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.exceptions.Abort:
        return 1
    except CodeAtlasError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except (OSError, subprocess.SubprocessError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())

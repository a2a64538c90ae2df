"""Iterative map refinement with per-iteration coverage measurement.

Each round feeds the model its own prior graph and overview plus the list
of snapshot files the graph does not cover yet, then re-measures coverage.
The loop stops when coverage stops growing across a window of consecutive
iterations, or at the round cap. The multi-run evaluation protocol runs
independent sessions at a fixed round count and averages accuracy per
iteration index.
"""

from __future__ import annotations

import csv
import dataclasses
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

from . import model
from .dotio import extract_dot_block, parse_dot, serialize_dot
from .errors import (
    CodeAtlasError,
    DotSyntaxError,
    GatewayError,
    GraphValidationError,
    OverviewValidationError,
    RefinementError,
)
from .gateway import Completion, ContextHandle
from .ingest import CodebaseSnapshot
from .model import GlobalOverview, MapGraph, files_in_graph
from .overview import extract_overview_json, parse_overview
from .prompts import AssembledPrompt, assemble_global, assemble_refinement

MAX_ITERATIONS = 5
STABILIZATION_WINDOW = 2

STOPPED_MAX_ITERATIONS = "max-iterations"
STOPPED_STABILIZED = "stabilized"
STOPPED_PARSE_FAILURE = "parse-failure"

FORMAT_REMINDER = (
    "\n\nReminder: your previous reply could not be parsed. Reply with a "
    "single valid DOT digraph (plus the JSON overview for global maps), "
    "with no commentary outside the code blocks."
)


@dataclass(frozen=True)
class AccuracyReport:
    true_positives: int
    false_positives: int
    false_negatives: int
    #: graph-only files whose basename matches a missed snapshot file;
    #: diagnostic for near-misses, never counted in accuracy
    basename_matches: int = 0

    @property
    def accuracy(self) -> Fraction:
        denominator = self.true_positives + self.false_positives + self.false_negatives
        if denominator == 0:
            return Fraction(0)
        return Fraction(self.true_positives, denominator)

    def to_dict(self) -> dict:
        return {
            "tp": self.true_positives,
            "fp": self.false_positives,
            "fn": self.false_negatives,
            "basenameMatches": self.basename_matches,
            "accuracy": float(self.accuracy),
        }


def measure_accuracy(graph: MapGraph, snapshot: CodebaseSnapshot) -> AccuracyReport:
    """Coverage of snapshot files by the graph's key-file set.

    accuracy = TP / (TP + FP + FN): TP are snapshot files the graph names,
    FP are graph files absent from the snapshot (hallucinations included),
    FN are snapshot files the graph misses. True negatives are fixed at
    zero: there is no negative file class.
    """
    graph_files = files_in_graph(graph)
    truth = snapshot.paths
    if not truth:
        raise CodeAtlasError("accuracy is undefined for an empty snapshot")
    tp = len(graph_files & truth)
    fp_set = graph_files - truth
    fn_set = truth - graph_files
    missed_basenames = {p.rsplit("/", 1)[-1] for p in fn_set}
    basename_matches = sum(
        1 for p in fp_set if p.rsplit("/", 1)[-1] in missed_basenames
    )
    return AccuracyReport(
        true_positives=tp,
        false_positives=len(fp_set),
        false_negatives=len(fn_set),
        basename_matches=basename_matches,
    )


@dataclass(frozen=True)
class Iteration:
    index: int  # 1-based
    raw_completion: str
    prompt_ref: str
    graph: Optional[MapGraph]
    overview: Optional[GlobalOverview]
    report: Optional[AccuracyReport]
    coverage_delta: int
    parse_error: str = ""

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "rawCompletion": self.raw_completion,
            "promptRef": self.prompt_ref,
            "graphDot": serialize_dot(self.graph) if self.graph else None,
            "overview": self.overview.to_dict() if self.overview else None,
            "report": self.report.to_dict() if self.report else None,
            "coverageDelta": self.coverage_delta,
            "parseError": self.parse_error,
        }


@dataclass(frozen=True)
class RefinementTrace:
    session_id: str
    kind: str
    snapshot_id: str
    iterations: tuple[Iteration, ...]
    stopped_because: str

    def final_graph(self) -> Optional[MapGraph]:
        for iteration in reversed(self.iterations):
            if iteration.graph is not None:
                return iteration.graph
        return None

    def final_overview(self) -> Optional[GlobalOverview]:
        for iteration in reversed(self.iterations):
            if iteration.overview is not None:
                return iteration.overview
        return None

    def accuracy_sequence(self) -> list[Fraction]:
        return [i.report.accuracy for i in self.iterations if i.report]

    def to_dict(self) -> dict:
        return {
            "sessionId": self.session_id,
            "kind": self.kind,
            "snapshotId": self.snapshot_id,
            "iterations": [i.to_dict() for i in self.iterations],
            "stoppedBecause": self.stopped_because,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def save(self, directory: str | Path) -> Path:
        path = Path(directory) / f"trace-{self.session_id}.json"
        path.write_text(self.to_json(), encoding="utf-8")
        return path


def _parse_completion(
    raw: str, kind: str
) -> tuple[MapGraph, Optional[GlobalOverview], str, str]:
    """Returns (graph, overview, dot_text, overview_json_text).

    The graph is the gating artifact; a present-but-invalid overview is
    dropped rather than failing the iteration.
    """
    dot_text = extract_dot_block(raw)
    graph = parse_dot(dot_text, kind)
    overview = None
    overview_text = ""
    if kind in model.GLOBAL_KINDS:
        candidate = extract_overview_json(raw)
        if candidate is not None:
            overview_text = candidate
            try:
                overview = parse_overview(candidate)
            except OverviewValidationError:
                overview = None
    return graph, overview, dot_text, overview_text


def refine(
    provider,
    handle: ContextHandle,
    snapshot: CodebaseSnapshot,
    kind: str,
    session_id: str,
    max_iterations: int = MAX_ITERATIONS,
    stabilization_window: int = STABILIZATION_WINDOW,
    stabilization_enabled: bool = True,
) -> RefinementTrace:
    """Run the refinement loop for one session.

    Iteration 1 sends the initial global prompt; later iterations replay
    the prior outputs with the computed missing-file list. A completion
    that fails to parse is re-asked once with a format reminder; a second
    failure ends the trace with a parse-failure stop. With stabilization
    enabled the loop stops early once the last ``stabilization_window``
    iterations report the same coverage.
    """
    if max_iterations < 1:
        raise RefinementError("max_iterations must be at least 1")
    if stabilization_window < 1:
        raise RefinementError("stabilization_window must be at least 1")
    if kind not in model.GLOBAL_KINDS:
        raise RefinementError(f"refinement applies to global map kinds, not {kind!r}")

    iterations: list[Iteration] = []
    prior_dot = ""
    prior_overview_json = ""
    tp_history: list[int] = []

    def partial() -> RefinementTrace:
        return RefinementTrace(
            session_id=session_id,
            kind=kind,
            snapshot_id=snapshot.snapshot_id,
            iterations=tuple(iterations),
            stopped_because=STOPPED_PARSE_FAILURE,
        )

    for index in range(1, max_iterations + 1):
        if index == 1:
            prompt = assemble_global(kind)
        else:
            missing = sorted(
                snapshot.paths - files_in_graph(iterations[-1].graph)
            )
            prompt = assemble_refinement(kind, prior_dot, prior_overview_json, missing)

        completion, parsed, error = _complete_with_retry(provider, handle, prompt, kind, iterations, partial)
        if parsed is None:
            iterations.append(
                Iteration(
                    index=index,
                    raw_completion=completion.raw_text,
                    prompt_ref=completion.prompt_ref,
                    graph=None,
                    overview=None,
                    report=None,
                    coverage_delta=0,
                    parse_error=error,
                )
            )
            return RefinementTrace(
                session_id=session_id,
                kind=kind,
                snapshot_id=snapshot.snapshot_id,
                iterations=tuple(iterations),
                stopped_because=STOPPED_PARSE_FAILURE,
            )

        graph, overview, dot_text, overview_text = parsed
        report = measure_accuracy(graph, snapshot)
        previous_tp = tp_history[-1] if tp_history else 0
        tp_history.append(report.true_positives)
        iterations.append(
            Iteration(
                index=index,
                raw_completion=completion.raw_text,
                prompt_ref=completion.prompt_ref,
                graph=graph,
                overview=overview,
                report=report,
                coverage_delta=report.true_positives - previous_tp,
            )
        )
        prior_dot = dot_text
        prior_overview_json = overview_text

        if (
            stabilization_enabled
            and len(tp_history) >= stabilization_window
            and len(set(tp_history[-stabilization_window:])) == 1
        ):
            return RefinementTrace(
                session_id=session_id,
                kind=kind,
                snapshot_id=snapshot.snapshot_id,
                iterations=tuple(iterations),
                stopped_because=STOPPED_STABILIZED,
            )

    return RefinementTrace(
        session_id=session_id,
        kind=kind,
        snapshot_id=snapshot.snapshot_id,
        iterations=tuple(iterations),
        stopped_because=STOPPED_MAX_ITERATIONS,
    )


def _complete_with_retry(provider, handle, prompt, kind, iterations, partial):
    """One completion plus a single format-reminder re-ask on parse failure.

    Returns (completion, parsed-or-None, error-text). Gateway failures
    propagate wrapped with the partial trace attached.
    """
    try:
        completion = provider.complete(handle, prompt)
    except GatewayError as exc:
        raise RefinementError(str(exc), partial_trace=partial()) from exc
    try:
        return completion, _parse_completion(completion.raw_text, kind), ""
    except (DotSyntaxError, GraphValidationError) as first_error:
        reminder = dataclasses.replace(
            prompt, rendered_text=prompt.rendered_text + FORMAT_REMINDER
        )
        try:
            completion = provider.complete(handle, reminder)
        except GatewayError as exc:
            raise RefinementError(str(exc), partial_trace=partial()) from exc
        try:
            return completion, _parse_completion(completion.raw_text, kind), ""
        except (DotSyntaxError, GraphValidationError) as second_error:
            return completion, None, f"{first_error}; after reminder: {second_error}"


@dataclass(frozen=True)
class EvaluationResult:
    project_label: str
    runs: int
    rounds: int
    mean_accuracy_by_iteration: tuple[Fraction, ...]
    per_run_traces: tuple[RefinementTrace, ...]
    failed_runs: tuple[int, ...] = ()

    def to_csv_rows(self) -> list[dict]:
        rows = []
        for run_index, trace in enumerate(self.per_run_traces, start=1):
            for iteration in trace.iterations:
                if iteration.report is None:
                    continue
                rows.append(
                    {
                        "project": self.project_label,
                        "run": run_index,
                        "iteration": iteration.index,
                        "tp": iteration.report.true_positives,
                        "fp": iteration.report.false_positives,
                        "fn": iteration.report.false_negatives,
                        "accuracy": f"{float(iteration.report.accuracy):.10f}",
                    }
                )
        return rows

    def write_csv(self, path: str | Path) -> None:
        fieldnames = ["project", "run", "iteration", "tp", "fp", "fn", "accuracy"]
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.DictWriter(handle, fieldnames=fieldnames)
            writer.writeheader()
            writer.writerows(self.to_csv_rows())


def evaluate(
    snapshot: CodebaseSnapshot,
    kind: str,
    session_factory: Callable[[int], tuple[object, ContextHandle]],
    runs: int = 10,
    rounds: int = 5,
    max_workers: int = 4,
) -> EvaluationResult:
    """Run ``runs`` independent refinement sessions of exactly ``rounds``
    iterations each (early stopping disabled; the evaluation protocol is
    fixed-round) and average accuracy per iteration index.

    ``session_factory(run_index)`` must hand back a fresh provider and an
    already-uploaded context handle: one upload per session, no re-upload
    between iterations. Failed runs are excluded from the means and
    reported in ``failed_runs``.
    """
    if runs < 1 or rounds < 1:
        raise RefinementError("runs and rounds must both be at least 1")

    def one_run(run_index: int) -> RefinementTrace:
        provider, handle = session_factory(run_index)
        return refine(
            provider,
            handle,
            snapshot,
            kind,
            session_id=f"run-{run_index}",
            max_iterations=rounds,
            stabilization_enabled=False,
        )

    traces: list[Optional[RefinementTrace]] = [None] * runs
    failed: list[int] = []
    with ThreadPoolExecutor(max_workers=max(1, max_workers)) as pool:
        futures = {pool.submit(one_run, i + 1): i for i in range(runs)}
        for future, position in futures.items():
            try:
                traces[position] = future.result()
            except RefinementError:
                failed.append(position + 1)

    completed = [
        t
        for t in traces
        if t is not None
        and t.stopped_because != STOPPED_PARSE_FAILURE
        and len(t.iterations) == rounds
    ]
    completed_ids = {id(t) for t in completed}
    failed.extend(
        i + 1
        for i, t in enumerate(traces)
        if t is not None and id(t) not in completed_ids
    )
    if not completed:
        raise RefinementError("every evaluation run failed")

    means = []
    for iteration_index in range(rounds):
        values = [
            t.iterations[iteration_index].report.accuracy for t in completed
        ]
        means.append(sum(values, Fraction(0)) / len(values))

    return EvaluationResult(
        project_label=snapshot.root_label,
        runs=runs,
        rounds=rounds,
        mean_accuracy_by_iteration=tuple(means),
        per_run_traces=tuple(t for t in traces if t is not None),
        failed_runs=tuple(sorted(set(failed))),
    )

"""Retrieval evaluation (Recall@K, MRR@K) and the speed/recall benchmark.

Qrels map query ids to sets of relevant passage ids; a run maps query ids to
ranked passage-id lists. The benchmark feeds queries one at a time in fixed
order, averages total wall time over repeated runs, and reports per-system
speedup against a single-context exact full scan plus recall as a percent of
the baseline's recall.
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

Qrels = Mapping[str, set]
RunRanking = Mapping[str, Sequence[str]]


def _check_queries(run: RunRanking, qrels: Qrels) -> None:
    missing = sorted(q for q in run if q not in qrels)
    if missing:
        raise ValueError(f"queries missing from qrels: {missing}")
    for qid, ranking in run.items():
        if len(set(ranking)) != len(ranking):
            raise ValueError(f"duplicate passage id in ranking for query {qid!r}")


def recall_at_k(run: RunRanking, qrels: Qrels, k: int) -> float:
    """Mean over queries of |relevant in top-k| / |relevant|."""
    _check_queries(run, qrels)
    if not run:
        raise ValueError("empty run")
    total = 0.0
    for qid, ranking in run.items():
        relevant = qrels[qid]
        if not relevant:
            raise ValueError(f"empty relevance set for query {qid!r}")
        total += len(relevant.intersection(ranking[:k])) / len(relevant)
    return total / len(run)


def mrr_at_k(run: RunRanking, qrels: Qrels, k: int = 10) -> float:
    """Mean reciprocal rank of the first relevant passage within top-k."""
    _check_queries(run, qrels)
    if not run:
        raise ValueError("empty run")
    total = 0.0
    for qid, ranking in run.items():
        relevant = qrels[qid]
        if not relevant:
            raise ValueError(f"empty relevance set for query {qid!r}")
        for rank, pid in enumerate(ranking[:k], 1):
            if pid in relevant:
                total += 1.0 / rank
                break
    return total / len(run)


def relative_recall(sut_run: RunRanking, baseline_run: RunRanking, qrels: Qrels, k: int) -> float:
    """100 x recall(sut) / recall(baseline), both at the same k."""
    if set(sut_run) != set(baseline_run):
        raise ValueError("system and baseline must rank the same query set")
    base = recall_at_k(baseline_run, qrels, k)
    if base == 0.0:
        raise ValueError("baseline recall is zero; relative recall undefined")
    return 100.0 * recall_at_k(sut_run, qrels, k) / base


SearchFn = Callable[[object], Sequence[tuple[str, float]]]
"""A system under test: query vector -> ranked (passage id, score) list."""


@dataclass
class BenchResult:
    name: str
    mean_seconds: float
    speedup: float
    recall_pct: float


def bench(
    baseline: tuple[str, SearchFn],
    systems: Sequence[tuple[str, SearchFn]],
    queries: Sequence[tuple[str, object]],
    qrels: Qrels,
    k: int = 100,
    runs: int = 10,
) -> list[BenchResult]:
    """Time every system over the query stream and score it against qrels.

    ``queries`` are (query id, vector) pairs issued linearly; rankings are
    deterministic per system so recall is computed from a single pass while
    wall time is averaged over ``runs`` repetitions.
    """
    if not queries:
        raise ValueError("benchmark needs at least one query")
    if runs < 1:
        raise ValueError("runs must be >= 1")

    all_systems = [baseline] + list(systems)
    rankings: dict[str, RunRanking] = {}
    times: dict[str, float] = {}
    for name, fn in all_systems:
        rankings[name] = {qid: [pid for pid, _ in fn(vec)] for qid, vec in queries}
        elapsed = []
        for _ in range(runs):
            t0 = time.perf_counter()
            for _, vec in queries:
                fn(vec)
            elapsed.append(time.perf_counter() - t0)
        times[name] = sum(elapsed) / runs

    base_name = baseline[0]
    results = []
    for name, _ in all_systems:
        results.append(
            BenchResult(
                name=name,
                mean_seconds=times[name],
                speedup=times[base_name] / times[name],
                recall_pct=relative_recall(rankings[name], rankings[base_name], qrels, k),
            )
        )
    return results


def report_json(results: Sequence[BenchResult]) -> str:
    return json.dumps(
        {
            "systems": [
                {
                    "name": r.name,
                    "mean_seconds": r.mean_seconds,
                    "speedup": r.speedup,
                    "recall_pct": r.recall_pct,
                }
                for r in results
            ]
        },
        indent=2,
    )


def report_csv(results: Sequence[BenchResult]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["system", "mean_seconds", "speedup", "recall_pct"])
    for r in results:
        writer.writerow([r.name, f"{r.mean_seconds:.6f}", f"{r.speedup:.3f}", f"{r.recall_pct:.2f}"])
    return buf.getvalue()


def report_table(results: Sequence[BenchResult]) -> str:
    rows = [("SUT", "Speedup", "Recall")]
    rows += [(r.name, f"{r.speedup:.1f}x", f"{r.recall_pct:.0f}%") for r in results]
    widths = [max(len(row[i]) for row in rows) for i in range(3)]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)) for row in rows]
    return "\n".join(lines)


def read_qrels(path: str | Path) -> dict[str, set]:
    """Tab-separated "query_id<TAB>passage_id" lines."""
    qrels: dict[str, set] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'query_id\\tpassage_id'")
            qrels.setdefault(parts[0], set()).add(parts[1])
    return qrels

"""Command-line interface.

Subcommands: ingest, search, serve, bench, surgery reduce, surgery extend,
bpe train, loss demo. Exit codes: 0 success, 1 runtime error, 2 usage error.
Every flag can also be set via a QIRAT_-prefixed environment variable.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import ann, metrics, store, surgery
from .embedders import HashEmbedder
from .errors import QiratError
from .exact import WorkerPool, full_scan
from .objective import toy_training_run
from .service import ServiceConfig, SearchEngine, create_app

CONTEXT_SETTINGS = {"auto_envvar_prefix": "QIRAT"}


@click.group(context_settings=CONTEXT_SETTINGS)
def cli() -> None:
    """Multilingual dense-retrieval toolkit: ingest, search, serve, benchmark."""


@cli.command()
@click.option("--corpus", required=True, type=click.Path(exists=True), help="JSON-lines passages")
@click.option("--out", required=True, type=click.Path(), help="output .emb path")
@click.option("--dim", default=64, show_default=True, help="stub embedder dimension")
@click.option("--seed", default=0, show_default=True, help="stub embedder seed")
@click.option("--dtype", default="float32", type=click.Choice(["float32", "float16"]), show_default=True)
def ingest(corpus: str, out: str, dim: int, seed: int, dtype: str) -> None:
    """Embed a passage corpus and write the index file pair."""
    passages = store.read_passages(corpus)
    matrix, idmap = store.ingest_corpus(passages, HashEmbedder(dim, seed), out, dtype=dtype)
    click.echo(f"ingested {matrix.count} passages (dim={matrix.dim}) -> {out}")


def _build_backend_fn(name: str, matrix, idmap, workers: int, seed: int):
    """Returns (search_fn(vec) -> [(id, score)], cleanup_fn)."""
    if name == "exact":
        pool = WorkerPool(matrix, idmap, workers=workers)
        return lambda vec, k: pool.search(vec, k), pool.close
    if name == "sq":
        index = ann.sq_build(matrix)
        return lambda vec, k: [(idmap[h.row], h.score) for h in ann.sq_search(index, vec, k)], None
    if name == "pq":
        index = ann.pq_encode(ann.pq_train(matrix, seed=seed), matrix)
        return lambda vec, k: [(idmap[h.row], h.score) for h in ann.pq_search(index, vec, k)], None
    if name == "hnsw":
        index = ann.hnsw_build(matrix, seed=seed)
        return (
            lambda vec, k: [
                (idmap[h.row], h.score)
                for h in ann.hnsw_search(index, vec, k, ef_search=max(100, k))
            ],
            None,
        )
    raise click.UsageError(f"unknown backend {name!r}")


@cli.command()
@click.option("--index", "index_path", required=True, type=click.Path(exists=True))
@click.option("--query", required=True, help="query text (embedded with the stub embedder)")
@click.option("--topk", default=10, show_default=True)
@click.option("--workers", default=1, show_default=True)
@click.option("--backend", default="exact", type=click.Choice(["exact", "sq", "pq", "hnsw"]), show_default=True)
@click.option("--corpus", type=click.Path(exists=True), help="optional corpus JSONL for passage texts")
@click.option("--seed", default=0, show_default=True)
def search(index_path: str, query: str, topk: int, workers: int, backend: str, corpus: str | None, seed: int) -> None:
    """Search an index and print a rank/score/id/text table."""
    matrix, idmap = store.load_index(index_path)
    texts = {}
    if corpus:
        texts = {p.id: p.text for p in store.read_passages(corpus)}
    vec = HashEmbedder(matrix.dim, seed).embed(query)
    fn, cleanup = _build_backend_fn(backend, matrix, idmap, workers, seed)
    try:
        ranked = fn(vec, topk)
    finally:
        if cleanup:
            cleanup()
    click.echo(f"{'rank':>4}  {'score':>9}  id\ttext")
    for rank, (pid, score) in enumerate(ranked, 1):
        text = texts.get(pid, "")
        click.echo(f"{rank:>4}  {score:>9.6f}  {pid}\t{text}")


@cli.command()
@click.option("--index", "index_path", required=True, type=click.Path(exists=True))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--workers", default=1, show_default=True)
@click.option("--backends", default="exact", show_default=True, help="comma-separated backends to enable")
@click.option("--default-backend", default="exact", show_default=True)
@click.option("--topk", default=10, show_default=True)
@click.option("--corpus", type=click.Path(exists=True))
@click.option("--seed", default=0, show_default=True)
def serve(index_path: str, host: str, port: int, workers: int, backends: str,
          default_backend: str, topk: int, corpus: str | None, seed: int) -> None:
    """Run the HTTP search service."""
    import uvicorn

    config = ServiceConfig(
        index_path=index_path,
        workers=workers,
        topk=topk,
        backend=default_backend,
        host=host,
        port=port,
        backends=tuple(b.strip() for b in backends.split(",") if b.strip()),
        corpus_path=corpus,
        seed=seed,
        embedder_seed=seed,
    )
    engine = SearchEngine(config)
    app = create_app(engine)
    try:
        uvicorn.run(app, host=host, port=port, log_level="info")
    finally:
        engine.close()


def _read_queries(path: str, embedder: HashEmbedder) -> list[tuple[str, np.ndarray]]:
    queries = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if "vector" in obj:
                vec = np.asarray(obj["vector"], dtype=np.float32)
            else:
                vec = embedder.embed(obj["text"])
            queries.append((str(obj["id"]), vec))
    if not queries:
        raise ValueError(f"no queries in {path}")
    return queries


@cli.command()
@click.option("--index", "index_path", required=True, type=click.Path(exists=True))
@click.option("--queries", "queries_path", required=True, type=click.Path(exists=True), help="JSON-lines with id and text or vector")
@click.option("--qrels", "qrels_path", required=True, type=click.Path(exists=True), help="TSV query_id<TAB>passage_id")
@click.option("--runs", default=10, show_default=True)
@click.option("--k", default=100, show_default=True, help="recall cutoff")
@click.option("--backends", default="exact:1,exact:2,exact:4,exact:6,sq,pq,hnsw", show_default=True,
              help="comma-separated systems; exact:N uses N workers")
@click.option("--out-prefix", default="bench_report", show_default=True)
@click.option("--seed", default=0, show_default=True)
def bench(index_path: str, queries_path: str, qrels_path: str, runs: int, k: int,
          backends: str, out_prefix: str, seed: int) -> None:
    """Benchmark systems against the single-context exact-scan baseline and
    emit JSON, CSV, and an aligned text table."""
    matrix, idmap = store.load_index(index_path)
    embedder = HashEmbedder(matrix.dim, seed)
    queries = _read_queries(queries_path, embedder)
    qrels = metrics.read_qrels(qrels_path)

    cleanups = []
    systems = []
    for token in (t.strip() for t in backends.split(",")):
        if not token:
            continue
        if token.startswith("exact"):
            workers = int(token.split(":")[1]) if ":" in token else 1
            fn, cleanup = _build_backend_fn("exact", matrix, idmap, workers, seed)
            name = f"exact-{workers}w"
        else:
            fn, cleanup = _build_backend_fn(token, matrix, idmap, 1, seed)
            name = token
        if cleanup:
            cleanups.append(cleanup)
        systems.append((name, lambda vec, fn=fn: fn(vec, k)))

    baseline = (
        "baseline-full-scan",
        lambda vec: [(idmap[h.row], h.score) for h in full_scan(vec, matrix, k)],
    )
    try:
        results = metrics.bench(baseline, systems, queries, qrels, k=k, runs=runs)
    finally:
        for cleanup in cleanups:
            cleanup()

    Path(out_prefix + ".json").write_text(metrics.report_json(results), encoding="utf-8")
    Path(out_prefix + ".csv").write_text(metrics.report_csv(results), encoding="utf-8")
    click.echo(metrics.report_table(results))
    click.echo(f"wrote {out_prefix}.json and {out_prefix}.csv")


@cli.group()
def bpe() -> None:
    """Tokenizer training."""


@bpe.command("train")
@click.option("--corpus", required=True, type=click.Path(exists=True), help="plain-text training corpus")
@click.option("--vocab-size", required=True, type=int)
@click.option("--out", required=True, type=click.Path())
def bpe_train(corpus: str, vocab_size: int, out: str) -> None:
    """Train a BPE tokenizer and serialize it as JSON."""
    with open(corpus, encoding="utf-8") as f:
        model = surgery.train_bpe(f, vocab_size)
    model.save(out)
    click.echo(f"trained tokenizer: {model.vocab_size} tokens, {len(model.merges)} merges -> {out}")


@cli.group(name="surgery")
def surgery_group() -> None:
    """Vocabulary reduction and extension on embedding tables."""


@surgery_group.command("reduce")
@click.option("--orig", required=True, type=click.Path(exists=True), help="original tokenizer JSON")
@click.option("--fresh", required=True, type=click.Path(exists=True), help="freshly trained tokenizer JSON")
@click.option("--embeddings", required=True, type=click.Path(exists=True), help="original table (.emb with .vocab sidecar)")
@click.option("--out", required=True, type=click.Path(), help="output directory")
def surgery_reduce(orig: str, fresh: str, embeddings: str, out: str) -> None:
    """Keep only tokens shared by both tokenizers; write reduced table + report."""
    original = surgery.TokenizerModel.load(orig)
    new = surgery.TokenizerModel.load(fresh)
    table = surgery.load_table(embeddings)
    kept = surgery.intersect_vocab(original, new)
    reduced, remap, report = surgery.reduce_embeddings(table, kept)
    outdir = Path(out)
    outdir.mkdir(parents=True, exist_ok=True)
    surgery.save_table(reduced, outdir / "reduced.emb")
    (outdir / "remap.json").write_text(json.dumps(remap), encoding="utf-8")
    (outdir / "report.json").write_text(json.dumps(report.to_dict(), indent=2), encoding="utf-8")
    click.echo(f"kept {report.kept} / dropped {report.dropped} tokens -> {outdir}")


@surgery_group.command("extend")
@click.option("--tokenizer", required=True, type=click.Path(exists=True), help="post-reduction tokenizer JSON")
@click.option("--embeddings", required=True, type=click.Path(exists=True))
@click.option("--new-tokens", "new_tokens_path", required=True, type=click.Path(exists=True), help="one token per line")
@click.option("--out", required=True, type=click.Path())
def surgery_extend(tokenizer: str, embeddings: str, new_tokens_path: str, out: str) -> None:
    """Append new tokens initialized as the mean of their subtoken rows."""
    model = surgery.TokenizerModel.load(tokenizer)
    table = surgery.load_table(embeddings)
    new_tokens = [t for t in Path(new_tokens_path).read_text(encoding="utf-8").splitlines() if t]
    extended, report = surgery.extend_vocab(table, model, new_tokens)
    outdir = Path(out)
    outdir.mkdir(parents=True, exist_ok=True)
    surgery.save_table(extended, outdir / "extended.emb")
    (outdir / "report.json").write_text(json.dumps(report.to_dict(), indent=2), encoding="utf-8")
    click.echo(f"added {report.added} tokens ({report.old_vocab} -> {report.new_vocab}) -> {outdir}")


@cli.group()
def loss() -> None:
    """Contrastive-objective utilities."""


@loss.command("demo")
@click.option("--batch", default=8, show_default=True)
@click.option("--dim", default=16, show_default=True)
@click.option("--steps", default=50, show_default=True)
@click.option("--lr", default=0.5, show_default=True)
@click.option("--tau", default=0.05, show_default=True)
@click.option("--seed", default=0, show_default=True)
def loss_demo(batch: int, dim: int, steps: int, lr: float, tau: float, seed: int) -> None:
    """Train a toy batch by gradient descent and print the loss trace."""
    losses = toy_training_run(batch, dim, steps, lr, tau, seed)
    for step, value in enumerate(losses):
        click.echo(f"step {step:3d}  loss {value:.6f}")
    if losses[-1] < losses[0]:
        click.echo("loss decreased")
    else:
        raise click.ClickException("loss did not decrease")


def main(argv: list[str] | None = None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.UsageError as exc:
        exc.show()
        return 2
    except click.ClickException as exc:
        exc.show()
        return 1
    except (QiratError, ValueError, OSError, json.JSONDecodeError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())

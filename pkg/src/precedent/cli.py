"""Command-line surface.

Every pipeline stage is a subcommand over file artifacts. By default
commands run in-process; with --server (or LEIBI_SERVER) they POST the
same request to a running service instead. Exit codes: 0 success, 2
configuration error, 3 missing input artifact, 1 anything else.
"""

import json
import sys
from pathlib import Path
from typing import Dict, Optional

import click
from pydantic import ValidationError

from .config import PipelineConfig, load_config
from .errors import ConfigError, MissingArtifactError, PrecedentError
from .service import handlers, schemas

EXIT_CONFIG = 2
EXIT_MISSING = 3

_HANDLERS = {
    "index": handlers.handle_index,
    "reformulate": handlers.handle_reformulate,
    "search": handlers.handle_search,
    "rerank": handlers.handle_rerank,
    "fuse": handlers.handle_fuse,
    "evaluate": handlers.handle_evaluate,
    "sweep-cutoff": handlers.handle_sweep_cutoff,
    "tune": handlers.handle_tune,
    "synth": handlers.handle_synth,
    "pipeline": handlers.handle_pipeline,
}


def _fail(message: str, code: int) -> None:
    click.echo(json.dumps({"error": message, "exit_code": code}), err=True)
    sys.exit(code)


def _execute(ctx: click.Context, op: str, request) -> None:
    server = ctx.obj.get("server")
    try:
        if server:
            response = _remote_call(server, op, request)
        else:
            response = _HANDLERS[op](request).model_dump()
    except ConfigError as exc:
        _fail(str(exc), EXIT_CONFIG)
    except MissingArtifactError as exc:
        _fail(str(exc), EXIT_MISSING)
    except PrecedentError as exc:
        _fail(str(exc), 1)
    except ValidationError as exc:
        _fail(str(exc), EXIT_CONFIG)
    else:
        click.echo(json.dumps(response, separators=(",", ":")))


def _remote_call(server: str, op: str, request) -> dict:
    import httpx

    url = f"{server.rstrip('/')}/v1/{op}"
    try:
        resp = httpx.post(url, json=request.model_dump(mode="json"), timeout=600.0)
    except httpx.HTTPError as exc:
        raise PrecedentError(f"server {server} unreachable: {exc}") from exc
    if resp.status_code == 422:
        raise ConfigError(_remote_error(resp))
    if resp.status_code == 404:
        raise MissingArtifactError(_remote_error(resp))
    if resp.status_code >= 400:
        raise PrecedentError(_remote_error(resp))
    return resp.json()


def _remote_error(resp) -> str:
    try:
        body = resp.json()
    except ValueError:
        return resp.text.strip() or f"HTTP {resp.status_code}"
    if isinstance(body, dict):
        if "error" in body:
            return str(body["error"])
        if "detail" in body:  # request-model validation from the server
            return json.dumps(body["detail"])
    return json.dumps(body)


def _load_cfg(ctx: click.Context, extra: Optional[Dict] = None) -> PipelineConfig:
    overrides: Dict = {}
    if ctx.obj.get("seed") is not None:
        seed = ctx.obj["seed"]
        overrides["seed"] = seed
        overrides["rerank"] = {"kmeans_seed": seed}
    if ctx.obj.get("threads") is not None:
        overrides["threads"] = ctx.obj["threads"]
    if extra:
        for key, value in extra.items():
            if isinstance(value, dict) and isinstance(overrides.get(key), dict):
                overrides[key].update(value)
            else:
                overrides[key] = value
    try:
        return load_config(ctx.obj.get("config"), overrides=overrides)
    except ConfigError as exc:
        _fail(str(exc), EXIT_CONFIG)


def _corpus_section(cfg: PipelineConfig, corpus, labels, queries, qrels):
    """Resolve corpus flags against the config: a directory means the
    case-files layout, a file means JSONL."""
    data = cfg.corpus.model_dump()
    if corpus is not None:
        if Path(corpus).is_dir():
            data.update(case_dir=str(corpus), corpus_file=None)
        else:
            data.update(corpus_file=str(corpus), case_dir=None, labels_file=None)
    if labels is not None:
        data["labels_file"] = str(labels)
    if queries is not None:
        data["queries_file"] = str(queries)
    if qrels is not None:
        data["qrels_file"] = str(qrels)
    return data


def _prune_none(d: Dict) -> Dict:
    return {k: v for k, v in d.items() if v is not None}


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="TOML config file; LEIBI_* env vars override it.")
@click.option("--server", envvar="LEIBI_SERVER", default=None,
              help="Run against this service URL instead of in-process.")
@click.option("--seed", type=int, default=None,
              help="Fix every stochastic choice (overrides config).")
@click.option("--threads", type=int, default=None, help="Worker thread cap.")
@click.option("--resume", is_flag=True, default=False,
              help="Skip commands whose outputs already exist.")
@click.pass_context
def main(ctx, config_path, server, seed, threads, resume):
    """Query-by-document case-law retrieval pipeline."""
    ctx.ensure_object(dict)
    ctx.obj.update(
        config=config_path, server=server, seed=seed, threads=threads, resume=resume
    )


@main.command()
@click.option("--corpus", type=click.Path(), default=None,
              help="JSONL corpus file or a directory of .txt cases.")
@click.option("--labels", type=click.Path(), default=None,
              help="JSON labels map (directory layout).")
@click.option("--queries", type=click.Path(), default=None,
              help="Query-id list file (JSONL layout).")
@click.option("--include-queries", is_flag=True, default=False,
              help="Index query documents too.")
@click.option("--out", required=True, type=click.Path())
@click.pass_context
def index(ctx, corpus, labels, queries, include_queries, out):
    """Build the inverted index from a corpus."""
    cfg = _load_cfg(ctx)
    req = schemas.IndexRequest(
        corpus=_corpus_section(cfg, corpus, labels, queries, None),
        tokenizer=cfg.tokenizer,
        exclude_queries=not include_queries,
        out=out,
        resume=ctx.obj["resume"],
    )
    _execute(ctx, "index", req)


@main.command()
@click.option("--method", type=click.Choice(
    ["kli", "plm", "idf", "keyex", "summary-file", "original"]), default=None)
@click.option("--proportion", type=float, default=None,
              help="Fraction of top-scored terms to keep.")
@click.option("--plm-lambda", type=float, default=None)
@click.option("--summary-file", type=click.Path(), default=None)
@click.option("--corpus", type=click.Path(), default=None)
@click.option("--labels", type=click.Path(), default=None)
@click.option("--queries", type=click.Path(), default=None)
@click.option("--index", "index_file", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path())
@click.pass_context
def reformulate(ctx, method, proportion, plm_lambda, summary_file, corpus, labels,
                queries, index_file, out):
    """Rewrite query documents as weighted term multisets."""
    termex_over = _prune_none(
        {
            "method": method,
            "proportion": proportion,
            "plm_lambda": plm_lambda,
            "summary_file": summary_file,
        }
    )
    cfg = _load_cfg(ctx, {"termex": termex_over} if termex_over else None)
    req = schemas.ReformulateRequest(
        corpus=_corpus_section(cfg, corpus, labels, queries, None),
        index_file=index_file,
        tokenizer=cfg.tokenizer,
        termex=cfg.termex,
        keyex=cfg.keyex,
        provider=cfg.provider,
        out=out,
        resume=ctx.obj["resume"],
    )
    _execute(ctx, "reformulate", req)


@main.command()
@click.option("--ranker", type=click.Choice(["bm25", "lmjm", "dfr"]), default=None)
@click.option("--k1", type=float, default=None)
@click.option("--b", type=float, default=None)
@click.option("--lam", type=float, default=None, help="Smoothing weight (lmjm).")
@click.option("--c", type=float, default=None, help="Length normalisation (dfr).")
@click.option("--top-k", type=int, default=None)
@click.option("--tag", default=None)
@click.option("--index", "index_file", required=True, type=click.Path())
@click.option("--queries", "queries_file", required=True, type=click.Path(),
              help="Reformulated-query JSONL.")
@click.option("--out", required=True, type=click.Path())
@click.pass_context
def search(ctx, ranker, k1, b, lam, c, top_k, tag, index_file, queries_file, out):
    """Score reformulated queries against the index; write a TREC run."""
    ranker_over = _prune_none({"name": ranker, "k1": k1, "b": b, "lam": lam, "c": c})
    cfg = _load_cfg(ctx, {"ranker": ranker_over} if ranker_over else None)
    req = schemas.SearchRequest(
        index_file=index_file,
        queries_file=queries_file,
        ranker=cfg.ranker,
        top_k=top_k if top_k is not None else 1000,
        tag=tag if tag is not None else cfg.output.tag,
        out=out,
        resume=ctx.obj["resume"],
    )
    _execute(ctx, "search", req)


@main.command()
@click.option("--run", "run_file", required=True, type=click.Path(),
              help="First-stage TREC run.")
@click.option("--corpus", type=click.Path(), default=None)
@click.option("--labels", type=click.Path(), default=None)
@click.option("--queries", type=click.Path(), default=None)
@click.option("--depth", type=int, default=None)
@click.option("--clusters", type=int, default=None, help="k-means cluster count.")
@click.option("--out", required=True, type=click.Path())
@click.pass_context
def rerank(ctx, run_file, corpus, labels, queries, depth, clusters, out):
    """Re-rank first-stage results with the cluster-driven sentence scorer."""
    rerank_over = _prune_none({"depth": depth, "k": clusters})
    cfg = _load_cfg(ctx, {"rerank": rerank_over} if rerank_over else None)
    req = schemas.RerankRequest(
        run_file=run_file,
        corpus=_corpus_section(cfg, corpus, labels, queries, None),
        tokenizer=cfg.tokenizer,
        provider=cfg.provider,
        rerank=cfg.rerank,
        threads=cfg.effective_threads(),
        out=out,
        resume=ctx.obj["resume"],
    )
    _execute(ctx, "rerank", req)


@main.command()
@click.option("--lexical", "lexical_run", required=True, type=click.Path())
@click.option("--neural", "neural_run", required=True, type=click.Path())
@click.option("--alpha", type=float, default=None)
@click.option("--beta", type=float, default=None)
@click.option("--normalize/--no-normalize", "normalize", default=None)
@click.option("--tag", default="fused")
@click.option("--out", required=True, type=click.Path())
@click.pass_context
def fuse(ctx, lexical_run, neural_run, alpha, beta, normalize, tag, out):
    """Linearly combine a lexical run with a re-ranked run."""
    cfg = _load_cfg(ctx)
    req = schemas.FuseRequest(
        lexical_run=lexical_run,
        neural_run=neural_run,
        alpha=alpha if alpha is not None else cfg.aggregation.alpha,
        beta=beta if beta is not None else cfg.aggregation.beta,
        normalize=normalize if normalize is not None else cfg.aggregation.normalize,
        tag=tag,
        out=out,
        resume=ctx.obj["resume"],
    )
    _execute(ctx, "fuse", req)


@main.command()
@click.option("--run", "run_file", required=True, type=click.Path())
@click.option("--qrels", "qrels_file", required=True, type=click.Path(),
              help="TREC qrels, or a .json labels map.")
@click.option("--cutoff", type=int, default=None)
@click.option("--macro", is_flag=True, default=False,
              help="Also report macro-averaged scores.")
@click.option("--out", type=click.Path(), default=None)
@click.pass_context
def evaluate(ctx, run_file, qrels_file, cutoff, macro, out):
    """Micro-averaged precision/recall/F1 at a cut-off."""
    cfg = _load_cfg(ctx)
    req = schemas.EvaluateRequest(
        run_file=run_file,
        qrels_file=qrels_file,
        cutoff=cutoff if cutoff is not None else cfg.eval.cutoff,
        macro=macro,
        out=out,
    )
    _execute(ctx, "evaluate", req)


@main.command("sweep-cutoff")
@click.option("--run", "run_file", required=True, type=click.Path())
@click.option("--qrels", "qrels_file", required=True, type=click.Path())
@click.option("--k-min", type=int, default=None)
@click.option("--k-max", type=int, default=None)
@click.option("--out", type=click.Path(), default=None, help="Curve CSV path.")
@click.pass_context
def sweep_cutoff_cmd(ctx, run_file, qrels_file, k_min, k_max, out):
    """Evaluate at every cut-off in a range; report the F1-best."""
    cfg = _load_cfg(ctx)
    req = schemas.SweepCutoffRequest(
        run_file=run_file,
        qrels_file=qrels_file,
        k_min=k_min if k_min is not None else cfg.eval.k_min,
        k_max=k_max if k_max is not None else cfg.eval.k_max,
        out=out,
    )
    _execute(ctx, "sweep-cutoff", req)


@main.command()
@click.option("--target", type=click.Choice(
    ["bm25", "lmjm", "dfr", "proportion", "fusion"]), default=None)
@click.option("--ranker", type=click.Choice(["bm25", "lmjm", "dfr"]), default=None,
              help="Shorthand for --target when tuning a ranker.")
@click.option("--grid", default="default",
              help='"default", inline JSON, or @file.json.')
@click.option("--objective", type=click.Choice(["f1", "p_at_k"]), default=None)
@click.option("--cutoff", type=int, default=None)
@click.option("--index", "index_file", type=click.Path(), default=None)
@click.option("--queries", "queries_file", type=click.Path(), default=None)
@click.option("--corpus", type=click.Path(), default=None)
@click.option("--labels", type=click.Path(), default=None)
@click.option("--query-ids", type=click.Path(), default=None)
@click.option("--qrels", "qrels_file", required=True, type=click.Path())
@click.option("--lexical", "lexical_run", type=click.Path(), default=None)
@click.option("--neural", "neural_run", type=click.Path(), default=None)
@click.option("--out", type=click.Path(), default=None, help="Ledger JSON path.")
@click.pass_context
def tune(ctx, target, ranker, grid, objective, cutoff, index_file, queries_file,
         corpus, labels, query_ids, qrels_file, lexical_run, neural_run, out):
    """Exhaustive grid search for ranker, selection, or fusion parameters."""
    target = target or ranker
    if target is None:
        _fail("tune needs --target or --ranker", EXIT_CONFIG)
    if grid == "default":
        grid_map = {}
    elif grid.startswith("@"):
        grid_path = Path(grid[1:])
        if not grid_path.is_file():
            _fail(f"grid file not found: {grid_path}", EXIT_MISSING)
        grid_map = json.loads(grid_path.read_text(encoding="utf-8"))
    else:
        try:
            grid_map = json.loads(grid)
        except json.JSONDecodeError as exc:
            _fail(f"--grid is not valid JSON: {exc}", EXIT_CONFIG)
    cfg = _load_cfg(ctx)
    corpus_section = None
    if corpus is not None or cfg.corpus.corpus_file or cfg.corpus.case_dir:
        corpus_section = _corpus_section(cfg, corpus, labels, query_ids, None)
    req = schemas.TuneRequest(
        target=target,
        index_file=index_file,
        corpus=corpus_section,
        tokenizer=cfg.tokenizer,
        termex=cfg.termex,
        ranker=cfg.ranker,
        queries_file=queries_file,
        qrels_file=qrels_file,
        lexical_run=lexical_run,
        neural_run=neural_run,
        grid=grid_map,
        objective=objective,
        cutoff=cutoff if cutoff is not None else cfg.eval.cutoff,
        threads=cfg.effective_threads(),
        normalize=cfg.aggregation.normalize,
        out=out,
    )
    _execute(ctx, "tune", req)


@main.command()
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--topics", type=int, default=20)
@click.option("--min-docs", type=int, default=4)
@click.option("--max-docs", type=int, default=16)
@click.option("--noise-docs", type=int, default=20)
@click.pass_context
def synth(ctx, out_dir, topics, min_docs, max_docs, noise_docs):
    """Generate the synthetic planted-relevance corpus."""
    req = schemas.SynthRequest(
        out_dir=out_dir,
        n_topics=topics,
        min_docs_per_topic=min_docs,
        max_docs_per_topic=max_docs,
        n_noise_docs=noise_docs,
        seed=ctx.obj["seed"] if ctx.obj["seed"] is not None else 7,
    )
    _execute(ctx, "synth", req)


@main.command()
@click.option("--out-dir", type=click.Path(), default=None,
              help="Override output.dir from the config.")
@click.pass_context
def pipeline(ctx, out_dir):
    """Run the full pipeline from the config: reformulate, search, re-rank,
    fuse, sweep, report."""
    extra = {"output": {"dir": out_dir}} if out_dir else None
    cfg = _load_cfg(ctx, extra)
    req = schemas.PipelineRequest(config=cfg, resume=ctx.obj["resume"])
    _execute(ctx, "pipeline", req)


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8765)
def serve(host, port):
    """Start the HTTP service exposing all stages."""
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()

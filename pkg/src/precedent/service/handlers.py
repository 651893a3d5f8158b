"""Stage handlers: each takes a validated request model, reads/writes file
artifacts, and returns a response model. The CLI calls these in-process;
the FastAPI app exposes them over HTTP.
"""

import json
import time
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from .. import __version__
from ..config import (
    CorpusSection,
    KeyexSection,
    ProviderSection,
    RankerSection,
    RerankSection,
    TermexSection,
    TokenizerSection,
)
from ..corpus import (
    Corpus,
    Qrels,
    TokenizerConfig,
    load_coliee_layout,
    load_jsonl_corpus,
    load_labels_json,
    load_trec_qrels,
    make_document,
)
from ..embed import ProviderConfig, make_provider
from ..errors import ConfigError, CorpusError, MissingArtifactError, TermExtractionError
from ..keyex import KeyexParams, reformulate_query_keyex
from ..pipeline import (
    GridSpec,
    OBJECTIVE_F1,
    OBJECTIVE_P_AT_K,
    AggregationParams,
    aggregate_scores,
    evaluate,
    evaluate_macro,
    grid_search,
    sweep_cutoff,
    tune_fusion_weights,
    write_curve_csv,
    write_eval_json,
    write_grid_json,
)
from ..rerank import RERANK_TAG, RerankParams, rerank_topk
from ..retrieval import (
    InvertedIndex,
    RankedList,
    build_index,
    load_index,
    read_trec_run,
    retrieve_topk,
    save_index,
    score_bm25,
    score_dfr_inexpc2,
    score_lm_jelinek_mercer,
    write_trec_run,
)
from ..synth import SynthSpec, generate_corpus, write_corpus_files
from ..termex import (
    SOURCE_SUMMARY,
    ReformulatedQuery,
    original_query,
    read_reformulated,
    reformulate_idf,
    reformulate_kli,
    reformulate_plm,
    write_reformulated,
)
from . import schemas


def _require_file(path, what: str) -> Path:
    path = Path(path)
    if not path.is_file():
        raise MissingArtifactError(f"{what} not found: {path}")
    return path


def _tokenizer_config(section: TokenizerSection) -> TokenizerConfig:
    return TokenizerConfig(
        lowercase=section.lowercase,
        min_token_length=section.min_token_length,
        remove_stopwords=section.remove_stopwords,
        strip_suppressed_fragments=section.strip_suppressed_fragments,
    )


def _provider_config(section: ProviderSection) -> ProviderConfig:
    return ProviderConfig(
        kind=section.kind,
        dim=section.dim,
        vectors_file=section.vectors_file,
        command=tuple(section.command),
        endpoint=section.endpoint,
        clustering_model=section.clustering_model,
        similarity_model=section.similarity_model,
        cross_model=section.cross_model,
        max_batch=section.max_batch,
        timeout=section.timeout,
    )


def _rerank_params(section: RerankSection) -> RerankParams:
    return RerankParams(
        k=section.k,
        depth=section.depth,
        kmeans_seed=section.kmeans_seed,
        kmeans_max_iters=section.kmeans_max_iters,
        kmeans_restarts=section.kmeans_restarts,
        min_sentences_for_clustering=section.min_sentences_for_clustering,
    )


def _keyex_params(section: KeyexSection) -> KeyexParams:
    return KeyexParams(
        ngram_min=section.ngram_min,
        ngram_max=section.ngram_max,
        top_n_per_paragraph=section.top_n_per_paragraph,
        diversifier=section.diversifier,
        diversity_coeff=section.diversity_coeff,
        pool_mult=section.pool_mult,
        char_budget=section.char_budget,
    )


def _load_corpus(section: CorpusSection, config: TokenizerConfig) -> Corpus:
    if section.case_dir is not None:
        _require_file(section.labels_file, "labels file")
        if not Path(section.case_dir).is_dir():
            raise MissingArtifactError(f"case directory not found: {section.case_dir}")
        corpus, _ = load_coliee_layout(section.case_dir, section.labels_file, config)
        return corpus
    if section.corpus_file is None:
        raise ConfigError("corpus: corpus_file or case_dir must be configured")
    path = _require_file(section.corpus_file, "corpus file")
    query_ids: Tuple[str, ...] = ()
    if section.queries_file:
        qpath = _require_file(section.queries_file, "query-id file")
        query_ids = tuple(
            line.strip()
            for line in qpath.read_text(encoding="utf-8").splitlines()
            if line.strip()
        )
    return load_jsonl_corpus(path, query_ids=query_ids, config=config)


def _load_qrels(section: CorpusSection) -> Qrels:
    if section.labels_file is not None:
        _require_file(section.labels_file, "labels file")
        return load_labels_json(section.labels_file)
    if section.qrels_file is None:
        raise ConfigError("corpus: qrels_file or labels_file must be configured")
    path = _require_file(section.qrels_file, "qrels file")
    return _read_qrels_path(path)


def _read_qrels_path(path) -> Qrels:
    path = Path(path)
    if path.suffix == ".json":
        return load_labels_json(path)
    return load_trec_qrels(path)


_SCORERS = {
    "bm25": lambda index, terms, r, qid: score_bm25(index, terms, r.k1, r.b, qid),
    "lmjm": lambda index, terms, r, qid: score_lm_jelinek_mercer(index, terms, r.lam, qid),
    "dfr": lambda index, terms, r, qid: score_dfr_inexpc2(index, terms, r.c, qid),
}


# ---------------------------------------------------------------------------
# index

def handle_index(req: schemas.IndexRequest) -> schemas.IndexResponse:
    out = Path(req.out)
    if req.resume and out.is_file():
        index = load_index(out)
        return schemas.IndexResponse(
            index_file=str(out),
            n_docs=index.n_docs,
            vocabulary_size=index.vocabulary_size(),
            total_tokens=index.total_tokens,
            avg_doc_length=index.avg_doc_length,
            skipped=True,
        )
    config = _tokenizer_config(req.tokenizer)
    corpus = _load_corpus(req.corpus, config)
    if req.exclude_queries and corpus.query_ids:
        corpus = corpus.without_queries()
    index = build_index(corpus, config)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_index(out, index)
    return schemas.IndexResponse(
        index_file=str(out),
        n_docs=index.n_docs,
        vocabulary_size=index.vocabulary_size(),
        total_tokens=index.total_tokens,
        avg_doc_length=index.avg_doc_length,
    )


# ---------------------------------------------------------------------------
# reformulate

def _load_summaries(path) -> Dict[str, str]:
    path = _require_file(path, "summary file")
    out = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            out[str(rec["id"])] = str(rec["text"])
        except (json.JSONDecodeError, KeyError) as exc:
            raise CorpusError(f"{path}:{lineno}: bad summary record: {exc}") from exc
    return out


def reformulate_queries(
    corpus: Corpus,
    index: InvertedIndex,
    base_config: TokenizerConfig,
    termex_cfg: TermexSection,
    keyex_cfg: KeyexSection,
    provider_cfg: ProviderSection,
) -> List[ReformulatedQuery]:
    """Reformulate every query document of the corpus with the configured
    method. Statistical extractors see queries tokenized with stopword
    removal when termex.remove_stopwords is on; the index is left as built."""
    extraction_config = base_config.with_stopwords(termex_cfg.remove_stopwords)
    method = termex_cfg.method
    queries: List[ReformulatedQuery] = []
    provider = None
    summaries = None
    if method == "keyex":
        provider = make_provider(_provider_config(provider_cfg))
    if method == "summary-file":
        if not termex_cfg.summary_file:
            raise ConfigError("termex.summary_file is required for method summary-file")
        summaries = _load_summaries(termex_cfg.summary_file)
    try:
        for qid in corpus.query_ids:
            raw = corpus.documents[qid].raw_text
            if method == "keyex":
                queries.append(
                    reformulate_query_keyex(
                        corpus.documents[qid], provider, _keyex_params(keyex_cfg)
                    )
                )
                continue
            if method == "summary-file":
                if qid not in summaries:
                    raise TermExtractionError(f"summary file has no entry for {qid}")
                doc = make_document(qid, summaries[qid], extraction_config)
                queries.append(
                    ReformulatedQuery(
                        query_id=qid,
                        terms=doc.tokens,
                        source=SOURCE_SUMMARY,
                        proportion=1.0,
                    )
                )
                continue
            doc = make_document(qid, raw, extraction_config)
            if method == "kli":
                queries.append(reformulate_kli(doc, index, termex_cfg.proportion))
            elif method == "plm":
                queries.append(
                    reformulate_plm(
                        doc,
                        index,
                        termex_cfg.proportion,
                        lam=termex_cfg.plm_lambda,
                        max_iters=termex_cfg.plm_max_iters,
                        tol=termex_cfg.plm_tol,
                    )
                )
            elif method == "idf":
                queries.append(reformulate_idf(doc, index, termex_cfg.proportion))
            elif method == "original":
                queries.append(original_query(doc))
            else:
                raise ConfigError(f"termex.method: unknown method {method!r}")
    finally:
        if provider is not None:
            provider.close()
    return queries


def handle_reformulate(req: schemas.ReformulateRequest) -> schemas.ReformulateResponse:
    out = Path(req.out)
    if req.resume and out.is_file():
        existing = read_reformulated(out)
        source = existing[0].source if existing else ""
        return schemas.ReformulateResponse(
            queries_file=str(out), n_queries=len(existing), source=source, skipped=True
        )
    config = _tokenizer_config(req.tokenizer)
    corpus = _load_corpus(req.corpus, config)
    if not corpus.query_ids:
        raise ConfigError("corpus has no query documents to reformulate")
    index = load_index(_require_file(req.index_file, "index file"))
    queries = reformulate_queries(
        corpus, index, config, req.termex, req.keyex, req.provider
    )
    out.parent.mkdir(parents=True, exist_ok=True)
    write_reformulated(out, queries)
    source = queries[0].source if queries else ""
    return schemas.ReformulateResponse(
        queries_file=str(out), n_queries=len(queries), source=source
    )


# ---------------------------------------------------------------------------
# search

def run_searches(
    index: InvertedIndex,
    queries: List[ReformulatedQuery],
    ranker: RankerSection,
    top_k: int,
) -> List[RankedList]:
    scorer = _SCORERS[ranker.name]
    runs = []
    for q in queries:
        ranked = scorer(index, list(q.terms), ranker, q.query_id)
        runs.append(retrieve_topk(ranked, top_k))
    return runs


def handle_search(req: schemas.SearchRequest) -> schemas.SearchResponse:
    out = Path(req.out)
    if req.resume and out.is_file():
        existing = read_trec_run(out)
        return schemas.SearchResponse(
            run_file=str(out), n_queries=len(existing), skipped=True
        )
    index = load_index(_require_file(req.index_file, "index file"))
    queries = read_reformulated(_require_file(req.queries_file, "query file"))
    runs = run_searches(index, queries, req.ranker, req.top_k)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_trec_run(out, runs, tag=req.tag)
    return schemas.SearchResponse(run_file=str(out), n_queries=len(runs))


# ---------------------------------------------------------------------------
# rerank

def handle_rerank(req: schemas.RerankRequest) -> schemas.RerankResponse:
    out = Path(req.out)
    if req.resume and out.is_file():
        existing = read_trec_run(out)
        return schemas.RerankResponse(
            run_file=str(out), n_queries=len(existing), skipped=True
        )
    config = _tokenizer_config(req.tokenizer)
    corpus = _load_corpus(req.corpus, config)
    first_stage = read_trec_run(_require_file(req.run_file, "run file"))
    params = _rerank_params(req.rerank)
    provider = make_provider(_provider_config(req.provider))
    try:
        runs = [
            rerank_topk(first_stage[qid], corpus, provider, params, threads=req.threads)
            for qid in sorted(first_stage)
        ]
    finally:
        provider.close()
    out.parent.mkdir(parents=True, exist_ok=True)
    write_trec_run(out, runs, tag=RERANK_TAG)
    return schemas.RerankResponse(run_file=str(out), n_queries=len(runs))


# ---------------------------------------------------------------------------
# fuse

def fuse_runs(
    lexical: Dict[str, RankedList],
    neural: Dict[str, RankedList],
    params: AggregationParams,
) -> List[RankedList]:
    fused = []
    for qid in sorted(neural):
        if qid not in lexical:
            continue
        fused.append(aggregate_scores(lexical[qid], neural[qid], params))
    return fused


def handle_fuse(req: schemas.FuseRequest) -> schemas.FuseResponse:
    out = Path(req.out)
    if req.resume and out.is_file():
        existing = read_trec_run(out)
        return schemas.FuseResponse(
            run_file=str(out), n_queries=len(existing), skipped=True
        )
    lexical = read_trec_run(_require_file(req.lexical_run, "lexical run"))
    neural = read_trec_run(_require_file(req.neural_run, "neural run"))
    params = AggregationParams(alpha=req.alpha, beta=req.beta, normalize=req.normalize)
    fused = fuse_runs(lexical, neural, params)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_trec_run(out, fused, tag=req.tag)
    return schemas.FuseResponse(run_file=str(out), n_queries=len(fused))


# ---------------------------------------------------------------------------
# evaluate

def handle_evaluate(req: schemas.EvaluateRequest) -> schemas.EvaluateResponse:
    runs = read_trec_run(_require_file(req.run_file, "run file"))
    qrels = _read_qrels_path(_require_file(req.qrels_file, "qrels file"))
    result = evaluate(runs.values(), qrels, req.cutoff)
    macro = evaluate_macro(runs.values(), qrels, req.cutoff) if req.macro else None
    report_file = None
    if req.out:
        write_eval_json(req.out, result)
        report_file = str(req.out)
    return schemas.EvaluateResponse(
        precision=result.precision,
        recall=result.recall,
        f1=result.f1,
        cutoff=result.cutoff,
        n_queries=len(result.per_query),
        macro_precision=macro[0] if macro else None,
        macro_recall=macro[1] if macro else None,
        macro_f1=macro[2] if macro else None,
        report_file=report_file,
    )


# ---------------------------------------------------------------------------
# sweep-cutoff

def handle_sweep_cutoff(req: schemas.SweepCutoffRequest) -> schemas.SweepCutoffResponse:
    if req.k_min > req.k_max:
        raise ConfigError("k_min must not exceed k_max")
    runs = read_trec_run(_require_file(req.run_file, "run file"))
    qrels = _read_qrels_path(_require_file(req.qrels_file, "qrels file"))
    best_k, curve = sweep_cutoff(
        list(runs.values()), qrels, range(req.k_min, req.k_max + 1)
    )
    curve_file = None
    if req.out:
        write_curve_csv(req.out, curve)
        curve_file = str(req.out)
    return schemas.SweepCutoffResponse(
        best_k=best_k,
        best_f1=curve[best_k].f1,
        curve=[
            schemas.CurvePoint(
                k=k, precision=curve[k].precision, recall=curve[k].recall, f1=curve[k].f1
            )
            for k in sorted(curve)
        ],
        curve_file=curve_file,
    )


# ---------------------------------------------------------------------------
# tune

def _float_range(start: float, stop: float, step: float) -> List[float]:
    out = []
    value = start
    # round() keeps 0.30000000000000004-style drift out of the grids
    while value <= stop + 1e-9:
        out.append(round(value, 10))
        value += step
    return out


def _default_grid(target: str) -> Dict[str, List[float]]:
    if target == "bm25":
        return {"b": _float_range(0.0, 1.0, 0.1), "k1": _float_range(0.0, 3.0, 0.1)}
    if target == "lmjm":
        return {"lam": _float_range(0.1, 0.9, 0.1)}
    if target == "dfr":
        return {"c": _float_range(0.1, 2.0, 0.1)}
    if target == "proportion":
        return {"proportion": _float_range(0.1, 1.0, 0.1)}
    if target == "fusion":
        return {
            "alpha": [float(x) for x in range(1, 101)],
            "beta": [float(x) for x in range(1, 101)],
        }
    raise ConfigError(f"unknown tune target: {target}")


def _tune_objective(target: str, requested: Optional[str]) -> str:
    if requested is not None:
        if requested not in (OBJECTIVE_F1, OBJECTIVE_P_AT_K):
            raise ConfigError(f"unknown objective: {requested}")
        return requested
    # DFR is conventionally tuned for early precision; everything else F1.
    return OBJECTIVE_P_AT_K if target == "dfr" else OBJECTIVE_F1


def handle_tune(req: schemas.TuneRequest) -> schemas.TuneResponse:
    target = req.target
    grid = {k: list(v) for k, v in req.grid.items()} or _default_grid(target)
    objective = _tune_objective(target, req.objective)
    qrels = _read_qrels_path(_require_file(req.qrels_file, "qrels file"))

    if target == "fusion":
        if not (req.lexical_run and req.neural_run):
            raise ConfigError("fusion tuning needs lexical_run and neural_run")
        lexical = read_trec_run(_require_file(req.lexical_run, "lexical run"))
        neural = read_trec_run(_require_file(req.neural_run, "neural run"))
        result = tune_fusion_weights(
            lexical,
            neural,
            qrels,
            cutoffs=(req.cutoff,),
            alphas=grid.get("alpha", _default_grid("fusion")["alpha"]),
            betas=grid.get("beta", _default_grid("fusion")["beta"]),
            normalize=req.normalize,
        )
    elif target in ("bm25", "lmjm", "dfr"):
        index = load_index(_require_file(req.index_file, "index file"))
        queries = read_reformulated(_require_file(req.queries_file, "query file"))
        scorer = _SCORERS[target]

        def eval_point(assignment):
            ranker = req.ranker.model_copy(update=dict(assignment, name=target))
            runs = [
                scorer(index, list(q.terms), ranker, q.query_id) for q in queries
            ]
            return evaluate(runs, qrels, req.cutoff)

        spec = GridSpec(params=grid, objective=objective, objective_k=req.cutoff)
        result = grid_search(spec, eval_point, threads=req.threads)
    elif target == "proportion":
        if req.corpus is None:
            raise ConfigError("proportion tuning needs a corpus")
        config = _tokenizer_config(req.tokenizer)
        corpus = _load_corpus(req.corpus, config)
        index = load_index(_require_file(req.index_file, "index file"))

        def eval_point(assignment):
            termex_cfg = req.termex.model_copy(
                update={"proportion": float(assignment["proportion"])}
            )
            queries = reformulate_queries(
                corpus, index, config, termex_cfg, KeyexSection(), ProviderSection()
            )
            runs = run_searches(index, queries, req.ranker, top_k=1000)
            return evaluate(runs, qrels, req.cutoff)

        spec = GridSpec(params=grid, objective=objective, objective_k=req.cutoff)
        result = grid_search(spec, eval_point, threads=req.threads)
    else:
        raise ConfigError(f"unknown tune target: {target}")

    ledger_file = None
    if req.out:
        write_grid_json(req.out, result)
        ledger_file = str(req.out)
    n_failed = sum(1 for t in result.trials if t.error is not None)
    return schemas.TuneResponse(
        target=target,
        best_assignment={k: float(v) for k, v in result.best_assignment.items()},
        precision=result.best_result.precision,
        recall=result.best_result.recall,
        f1=result.best_result.f1,
        cutoff=result.best_result.cutoff,
        n_trials=len(result.trials),
        n_failed=n_failed,
        ledger_file=ledger_file,
    )


# ---------------------------------------------------------------------------
# synth

def handle_synth(req: schemas.SynthRequest) -> schemas.SynthResponse:
    spec = SynthSpec(
        n_topics=req.n_topics,
        min_docs_per_topic=req.min_docs_per_topic,
        max_docs_per_topic=req.max_docs_per_topic,
        n_noise_docs=req.n_noise_docs,
        seed=req.seed,
    )
    corpus, qrels = generate_corpus(spec)
    paths = write_corpus_files(corpus, qrels, req.out_dir)
    return schemas.SynthResponse(
        corpus_file=str(paths["corpus"]),
        queries_file=str(paths["queries"]),
        qrels_file=str(paths["qrels"]),
        n_documents=len(corpus.documents) - len(corpus.query_ids),
        n_queries=len(corpus.query_ids),
    )


# ---------------------------------------------------------------------------
# pipeline (end to end)

def handle_pipeline(req: schemas.PipelineRequest) -> schemas.PipelineResponse:
    cfg = req.config
    out_dir = Path(cfg.output.dir)
    report_path = out_dir / "report.json"
    if req.resume and report_path.is_file():
        report = json.loads(report_path.read_text(encoding="utf-8"))
        return schemas.PipelineResponse(**dict(report, skipped=True))

    started = time.perf_counter()
    out_dir.mkdir(parents=True, exist_ok=True)
    config = _tokenizer_config(cfg.tokenizer)
    corpus = _load_corpus(cfg.corpus, config)
    if not corpus.query_ids:
        raise ConfigError("corpus has no query documents")
    qrels = _load_qrels(cfg.corpus)

    index = build_index(corpus.without_queries(), config)
    save_index(out_dir / "index.json", index)

    queries = reformulate_queries(
        corpus, index, config, cfg.termex, cfg.keyex, cfg.provider
    )
    write_reformulated(out_dir / "queries.jsonl", queries)

    top_k = max(cfg.rerank.depth, 1000)
    lexical_runs = run_searches(index, queries, cfg.ranker, top_k)
    write_trec_run(out_dir / "run_lexical.trec", lexical_runs, tag=cfg.output.tag)
    lexical_by_qid = {r.query_id: r for r in lexical_runs}

    k_range = range(cfg.eval.k_min, cfg.eval.k_max + 1)
    stages: Dict[str, schemas.StageReport] = {}
    best_k, curve = sweep_cutoff(lexical_runs, qrels, k_range)
    write_curve_csv(out_dir / "curve_lexical.csv", curve)
    stages["lexical"] = schemas.StageReport(
        best_k=best_k,
        precision=curve[best_k].precision,
        recall=curve[best_k].recall,
        f1=curve[best_k].f1,
    )

    fusion_alpha = fusion_beta = None
    if cfg.rerank.enabled:
        params = _rerank_params(cfg.rerank)
        provider = make_provider(_provider_config(cfg.provider))
        try:
            neural_runs = [
                rerank_topk(
                    lexical_by_qid[qid],
                    corpus,
                    provider,
                    params,
                    threads=cfg.effective_threads(),
                )
                for qid in sorted(lexical_by_qid)
            ]
        finally:
            provider.close()
        write_trec_run(out_dir / "run_rerank.trec", neural_runs, tag=RERANK_TAG)
        neural_by_qid = {r.query_id: r for r in neural_runs}

        best_k, curve = sweep_cutoff(neural_runs, qrels, k_range)
        write_curve_csv(out_dir / "curve_rerank.csv", curve)
        stages["rerank"] = schemas.StageReport(
            best_k=best_k,
            precision=curve[best_k].precision,
            recall=curve[best_k].recall,
            f1=curve[best_k].f1,
        )

        if cfg.aggregation.tune:
            weights = [float(x) for x in range(cfg.aggregation.weight_min, cfg.aggregation.weight_max + 1)]
            grid_result = tune_fusion_weights(
                lexical_by_qid,
                neural_by_qid,
                qrels,
                cutoffs=list(k_range),
                alphas=weights,
                betas=weights,
                normalize=cfg.aggregation.normalize,
            )
            write_grid_json(out_dir / "fusion_grid.json", grid_result)
            fusion_alpha = float(grid_result.best_assignment["alpha"])
            fusion_beta = float(grid_result.best_assignment["beta"])
        else:
            fusion_alpha = cfg.aggregation.alpha
            fusion_beta = cfg.aggregation.beta
        agg = AggregationParams(
            alpha=fusion_alpha, beta=fusion_beta, normalize=cfg.aggregation.normalize
        )
        fused_runs = fuse_runs(lexical_by_qid, neural_by_qid, agg)
        write_trec_run(out_dir / "run_fused.trec", fused_runs, tag="fused")

        best_k, curve = sweep_cutoff(fused_runs, qrels, k_range)
        write_curve_csv(out_dir / "curve_fused.csv", curve)
        stages["fused"] = schemas.StageReport(
            best_k=best_k,
            precision=curve[best_k].precision,
            recall=curve[best_k].recall,
            f1=curve[best_k].f1,
        )

    elapsed = time.perf_counter() - started
    response = schemas.PipelineResponse(
        output_dir=str(out_dir),
        seed=cfg.seed,
        stages=stages,
        fusion_alpha=fusion_alpha,
        fusion_beta=fusion_beta,
        report_file=str(report_path),
        elapsed_seconds=round(elapsed, 3),
    )
    report_path.write_text(
        json.dumps(response.model_dump(), indent=2) + "\n", encoding="utf-8"
    )
    return response

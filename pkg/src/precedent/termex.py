"""Statistical term extraction for query reformulation.

Three extractors score the terms of a query document against collection
statistics; a proportional selector keeps the top fraction and re-emits
the query with original term multiplicities preserved.
"""

import json
import math
import os
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, NamedTuple, Sequence, Tuple

from .corpus import CaseDocument
from .errors import CorpusError, EmptyQueryError, TermExtractionError
from .retrieval import InvertedIndex

SOURCE_KLI = "KLI"
SOURCE_PLM = "PLM"
SOURCE_IDF = "IDF"
SOURCE_KEYBERT = "KEYBERT"
SOURCE_SUMMARY = "SUMMARY"
SOURCE_ORIGINAL = "ORIGINAL"

QUERY_SOURCES = frozenset(
    {SOURCE_KLI, SOURCE_PLM, SOURCE_IDF, SOURCE_KEYBERT, SOURCE_SUMMARY, SOURCE_ORIGINAL}
)


class TermScore(NamedTuple):
    term: str
    score: float


@dataclass(frozen=True)
class ReformulatedQuery:
    """A query rewritten as a term multiset plus how it was produced."""

    query_id: str
    terms: Tuple[str, ...]
    source: str
    proportion: float = 1.0

    def __post_init__(self):
        if self.source not in QUERY_SOURCES:
            raise ValueError(f"unknown query source: {self.source}")
        if not 0.0 < self.proportion <= 1.0:
            raise ValueError("proportion must be in (0, 1]")


def _sorted_scores(scores: Dict[str, float]) -> List[TermScore]:
    # Descending score; ascending term on ties.
    return [
        TermScore(t, s)
        for t, s in sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    ]


def _collection_prob(term: str, index: InvertedIndex) -> float:
    """Background probability with a floor for terms absent from the index."""
    cf = index.cf.get(term, 0)
    if cf > 0:
        return cf / index.total_tokens
    return 1.0 / (index.total_tokens + 1)


def kli_scores(query_doc: CaseDocument, index: InvertedIndex) -> List[TermScore]:
    """Kullback-Leibler informativeness of each query term.

    score(t) = P(t|Q) * ln(P(t|Q) / P(t|C)) where P(t|Q) is the in-query
    maximum-likelihood estimate. A term matching its background rate scores
    exactly zero; rarer-than-background terms score positive.
    """
    if not query_doc.tokens:
        raise EmptyQueryError(f"query {query_doc.id} has no tokens")
    counts = Counter(query_doc.tokens)
    q_len = len(query_doc.tokens)
    scores = {}
    for term, tf in counts.items():
        p_q = tf / q_len
        p_c = _collection_prob(term, index)
        scores[term] = p_q * math.log(p_q / p_c)
    return _sorted_scores(scores)


@dataclass
class PLMState:
    """Fitted parsimonious language model for one query document.

    p_foreground holds the query-specific term distribution after EM;
    expected_counts the final E-step responsibilities.
    """

    p_foreground: Dict[str, float]
    expected_counts: Dict[str, float]
    term_freqs: Dict[str, int]
    lam: float
    iterations: int


def fit_parsimonious_model(
    query_doc: CaseDocument,
    index: InvertedIndex,
    lam: float = 0.1,
    max_iters: int = 50,
    tol: float = 1e-6,
) -> PLMState:
    """EM fit of a two-component mixture that concentrates probability mass
    on terms the background model explains poorly.

    E-step: e_t = tf(t) * lam*P(t) / ((1-lam)*P(t|C) + lam*P(t))
    M-step: P(t) = e_t / sum(e)

    Stops when the max probability change drops below tol or after
    max_iters. With lam=1 the maximum-likelihood estimate is a fixed point.
    """
    if not 0.0 < lam <= 1.0:
        raise ValueError("lambda must be in (0, 1]")
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not query_doc.tokens:
        raise EmptyQueryError(f"query {query_doc.id} has no tokens")

    tf = dict(Counter(query_doc.tokens))
    q_len = len(query_doc.tokens)
    p_bg = {t: _collection_prob(t, index) for t in tf}
    p = {t: c / q_len for t, c in tf.items()}

    expected = {t: float(c) for t, c in tf.items()}
    iterations = 0
    for _ in range(max_iters):
        iterations += 1
        expected = {}
        for t in tf:
            denom = (1.0 - lam) * p_bg[t] + lam * p[t]
            expected[t] = tf[t] * lam * p[t] / denom if denom > 0 else 0.0
        total = sum(expected.values())
        if total <= 0:
            break
        new_p = {t: e / total for t, e in expected.items()}
        delta = max(abs(new_p[t] - p[t]) for t in tf)
        p = new_p
        if delta < tol:
            break
    return PLMState(
        p_foreground=p,
        expected_counts=expected,
        term_freqs=tf,
        lam=lam,
        iterations=iterations,
    )


def plm_scores(
    query_doc: CaseDocument,
    index: InvertedIndex,
    lam: float = 0.1,
    max_iters: int = 50,
    tol: float = 1e-6,
) -> List[TermScore]:
    state = fit_parsimonious_model(query_doc, index, lam, max_iters, tol)
    return _sorted_scores(state.p_foreground)


def idf_scores(query_doc: CaseDocument, index: InvertedIndex) -> List[TermScore]:
    """Inverse document frequency ln(N/df) of each unique query term.

    Terms absent from the index get ln(N+1), above every indexed term.
    """
    if not query_doc.tokens:
        raise EmptyQueryError(f"query {query_doc.id} has no tokens")
    n = index.n_docs
    scores = {}
    for term in set(query_doc.tokens):
        df = index.df.get(term, 0)
        scores[term] = math.log(n / df) if df > 0 else math.log(n + 1.0)
    return _sorted_scores(scores)


def proportional_ceiling(proportion: float, count: int) -> int:
    """ceil(proportion * count) with a tiny slack so float noise in decimal
    proportions (0.4 * 10 -> 4.000000000000001) cannot bump the ceiling."""
    return max(0, math.ceil(proportion * count - 1e-9))


def select_proportion(
    scores: Sequence[TermScore],
    query_doc: CaseDocument,
    proportion: float,
    source: str,
) -> ReformulatedQuery:
    """Keep the top ceil(proportion * U) scored terms (U = unique terms) and
    re-emit the query's tokens restricted to the kept set.

    Original multiplicities and order are preserved; proportion=1 reproduces
    the full query. Boundary ties resolve by ascending term.
    """
    if not 0.0 < proportion <= 1.0:
        raise ValueError("proportion must be in (0, 1]")
    if not scores:
        raise TermExtractionError("no scored terms to select from")
    ordered = sorted(scores, key=lambda ts: (-ts.score, ts.term))
    keep_n = proportional_ceiling(proportion, len(ordered))
    kept = {ts.term for ts in ordered[:keep_n]}
    terms = tuple(t for t in query_doc.tokens if t in kept)
    if not terms:
        raise TermExtractionError(
            f"selection left query {query_doc.id} with no terms"
        )
    return ReformulatedQuery(
        query_id=query_doc.id, terms=terms, source=source, proportion=proportion
    )


def reformulate_kli(query_doc, index, proportion) -> ReformulatedQuery:
    return select_proportion(kli_scores(query_doc, index), query_doc, proportion, SOURCE_KLI)


def reformulate_plm(
    query_doc, index, proportion, lam=0.1, max_iters=50, tol=1e-6
) -> ReformulatedQuery:
    scored = plm_scores(query_doc, index, lam, max_iters, tol)
    return select_proportion(scored, query_doc, proportion, SOURCE_PLM)


def reformulate_idf(query_doc, index, proportion) -> ReformulatedQuery:
    return select_proportion(idf_scores(query_doc, index), query_doc, proportion, SOURCE_IDF)


def original_query(query_doc: CaseDocument) -> ReformulatedQuery:
    if not query_doc.tokens:
        raise EmptyQueryError(f"query {query_doc.id} has no tokens")
    return ReformulatedQuery(
        query_id=query_doc.id,
        terms=tuple(query_doc.tokens),
        source=SOURCE_ORIGINAL,
        proportion=1.0,
    )


# ---------------------------------------------------------------------------
# JSONL persistence for reformulated queries

def write_reformulated(path, queries: Sequence[ReformulatedQuery]) -> None:
    lines = [
        json.dumps(
            {
                "query_id": q.query_id,
                "terms": list(q.terms),
                "source": q.source,
                "proportion": q.proportion,
            },
            ensure_ascii=False,
        )
        for q in queries
    ]
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    os.replace(tmp, path)


def read_reformulated(path) -> List[ReformulatedQuery]:
    path = Path(path)
    if not path.is_file():
        raise CorpusError(f"reformulated-query file not found: {path}")
    out = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
        try:
            out.append(
                ReformulatedQuery(
                    query_id=str(rec["query_id"]),
                    terms=tuple(str(t) for t in rec["terms"]),
                    source=str(rec["source"]),
                    proportion=float(rec.get("proportion", 1.0)),
                )
            )
        except (KeyError, ValueError) as exc:
            raise CorpusError(f"{path}:{lineno}: bad record: {exc}") from exc
    return out

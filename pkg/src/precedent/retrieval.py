"""Inverted index and lexical rankers: BM25, query-likelihood with
Jelinek-Mercer smoothing, and a divergence-from-randomness model
(inverse expected document frequency with Laplace aftereffect and
second normalisation).

All rankers return deterministically ordered rankings: descending score,
ties broken by ascending document id.
"""

import json
import math
import os
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .corpus import Corpus, TokenizerConfig, tokenize
from .errors import CorpusError


@dataclass
class RankedList:
    """Ranking for one query: (doc_id, score) pairs, best first."""

    query_id: str
    entries: List[Tuple[str, float]] = field(default_factory=list)

    def doc_ids(self) -> List[str]:
        return [d for d, _ in self.entries]

    def scores(self) -> Dict[str, float]:
        return dict(self.entries)


def ranked_from_scores(query_id: str, scores: Dict[str, float]) -> RankedList:
    """Build a RankedList with the canonical order: score desc, doc id asc."""
    entries = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return RankedList(query_id=query_id, entries=entries)


@dataclass
class InvertedIndex:
    postings: Dict[str, List[Tuple[str, int]]]
    doc_lengths: Dict[str, int]
    tokenizer: TokenizerConfig = TokenizerConfig()

    # Derived statistics, filled in __post_init__.
    df: Dict[str, int] = field(default_factory=dict)
    cf: Dict[str, int] = field(default_factory=dict)
    total_tokens: int = 0

    def __post_init__(self):
        self.df = {t: len(p) for t, p in self.postings.items()}
        self.cf = {t: sum(tf for _, tf in p) for t, p in self.postings.items()}
        self.total_tokens = sum(self.doc_lengths.values())

    @property
    def n_docs(self) -> int:
        return len(self.doc_lengths)

    @property
    def avg_doc_length(self) -> float:
        return self.total_tokens / self.n_docs if self.n_docs else 0.0

    def vocabulary_size(self) -> int:
        return len(self.postings)


def build_index(corpus: Corpus, config: Optional[TokenizerConfig] = None) -> InvertedIndex:
    """Index every document in the corpus.

    Callers that want query documents excluded must pass a corpus without
    them; no id is treated specially here. Documents are tokenized from raw
    text with the given config (defaults to the corpus-standard tokenizer
    without stopword removal).
    """
    if config is None:
        config = TokenizerConfig()
    if not corpus.documents:
        raise CorpusError("cannot index an empty corpus")
    postings: Dict[str, List[Tuple[str, int]]] = {}
    doc_lengths = {}
    # Sorted ids keep posting-list order independent of dict insertion order.
    for doc_id in sorted(corpus.documents):
        tokens = tokenize(corpus.documents[doc_id].raw_text, config)
        doc_lengths[doc_id] = len(tokens)
        for term, tf in sorted(Counter(tokens).items()):
            postings.setdefault(term, []).append((doc_id, tf))
    return InvertedIndex(postings=postings, doc_lengths=doc_lengths, tokenizer=config)


def score_bm25(
    index: InvertedIndex,
    query_terms: Sequence[str],
    k1: float = 1.2,
    b: float = 0.75,
    query_id: str = "",
) -> RankedList:
    """BM25 with the non-negative idf variant ln(1 + (N - df + 0.5)/(df + 0.5)).

    Only documents containing at least one query term are scored; with b=0
    length normalisation is disabled.
    """
    if k1 < 0:
        raise ValueError("k1 must be >= 0")
    if not 0.0 <= b <= 1.0:
        raise ValueError("b must be in [0, 1]")
    n = index.n_docs
    avg = index.avg_doc_length
    scores: Dict[str, float] = {}
    for term, qtf in sorted(Counter(query_terms).items()):
        postings = index.postings.get(term)
        if not postings:
            continue
        df = index.df[term]
        idf = math.log(1.0 + (n - df + 0.5) / (df + 0.5))
        for doc_id, tf in postings:
            denom = tf + k1 * (1.0 - b + b * index.doc_lengths[doc_id] / avg)
            contrib = qtf * idf * tf * (k1 + 1.0) / denom
            scores[doc_id] = scores.get(doc_id, 0.0) + contrib
    scores = {d: s for d, s in scores.items() if s > 0.0}
    return ranked_from_scores(query_id, scores)


def score_lm_jelinek_mercer(
    index: InvertedIndex,
    query_terms: Sequence[str],
    lam: float = 0.1,
    query_id: str = "",
) -> RankedList:
    """Query log-likelihood under Jelinek-Mercer smoothing.

    score(d) = sum_t qtf(t) * ln((1-lam) * tf/|d| + lam * cf/|C|), summed over
    query terms with nonzero collection frequency. Every document gets a
    score (log-probabilities are negative, so absence is informative); with
    lam=1 all documents tie. If no query term occurs in the collection the
    ranking is empty.
    """
    if not 0.0 < lam <= 1.0:
        raise ValueError("lambda must be in (0, 1]")
    counts = [
        (t, qtf)
        for t, qtf in sorted(Counter(query_terms).items())
        if index.cf.get(t, 0) > 0
    ]
    if not counts:
        return RankedList(query_id=query_id)
    total = index.total_tokens
    # Background-only score first; per-document adjustments from postings.
    base = 0.0
    for term, qtf in counts:
        base += qtf * math.log(lam * index.cf[term] / total)
    scores = {doc_id: base for doc_id in index.doc_lengths}
    for term, qtf in counts:
        p_c = index.cf[term] / total
        for doc_id, tf in index.postings[term]:
            mixed = (1.0 - lam) * tf / index.doc_lengths[doc_id] + lam * p_c
            scores[doc_id] += qtf * (math.log(mixed) - math.log(lam * p_c))
    return ranked_from_scores(query_id, scores)


def score_dfr_inexpc2(
    index: InvertedIndex,
    query_terms: Sequence[str],
    c: float = 1.0,
    query_id: str = "",
) -> RankedList:
    """Divergence-from-randomness ranker (inverse expected document
    frequency, Laplace aftereffect, second length normalisation).

    tfn = tf * log2(1 + c * avg_len / len(d))
    n_exp = N * (1 - ((N-1)/N)^cf)
    contribution = qtf * (cf+1)/(df*(tfn+1)) * tfn * log2((N+1)/(n_exp+0.5))

    With c=0 every tfn is 0 and the ranking is empty.
    """
    if c < 0:
        raise ValueError("c must be >= 0")
    n = index.n_docs
    avg = index.avg_doc_length
    scores: Dict[str, float] = {}
    for term, qtf in sorted(Counter(query_terms).items()):
        postings = index.postings.get(term)
        if not postings:
            continue
        df = index.df[term]
        cf = index.cf[term]
        n_exp = n * (1.0 - ((n - 1.0) / n) ** cf)
        info = math.log2((n + 1.0) / (n_exp + 0.5))
        for doc_id, tf in postings:
            length = index.doc_lengths[doc_id]
            tfn = tf * math.log2(1.0 + c * avg / length)
            gain = (cf + 1.0) / (df * (tfn + 1.0))
            scores[doc_id] = scores.get(doc_id, 0.0) + qtf * gain * tfn * info
    scores = {d: s for d, s in scores.items() if s > 0.0}
    return ranked_from_scores(query_id, scores)


def retrieve_topk(ranked: RankedList, k: int) -> RankedList:
    if k < 1:
        raise ValueError("k must be >= 1")
    return RankedList(query_id=ranked.query_id, entries=list(ranked.entries[:k]))


# ---------------------------------------------------------------------------
# Persistence

INDEX_FORMAT_VERSION = 1


def save_index(path, index: InvertedIndex) -> None:
    """Write the index as JSON, atomically (write temp file then rename)."""
    payload = {
        "format_version": INDEX_FORMAT_VERSION,
        "tokenizer": {
            "lowercase": index.tokenizer.lowercase,
            "min_token_length": index.tokenizer.min_token_length,
            "remove_stopwords": index.tokenizer.remove_stopwords,
            "strip_suppressed_fragments": index.tokenizer.strip_suppressed_fragments,
        },
        "doc_lengths": index.doc_lengths,
        "postings": {t: p for t, p in sorted(index.postings.items())},
    }
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(payload, ensure_ascii=False), encoding="utf-8")
    os.replace(tmp, path)


def load_index(path) -> InvertedIndex:
    path = Path(path)
    if not path.is_file():
        raise CorpusError(f"index file not found: {path}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CorpusError(f"index file {path} is not valid JSON: {exc}") from exc
    if payload.get("format_version") != INDEX_FORMAT_VERSION:
        raise CorpusError(f"unsupported index format in {path}")
    tok = payload.get("tokenizer", {})
    config = TokenizerConfig(
        lowercase=tok.get("lowercase", True),
        min_token_length=tok.get("min_token_length", 2),
        remove_stopwords=tok.get("remove_stopwords", False),
        strip_suppressed_fragments=tok.get("strip_suppressed_fragments", True),
    )
    postings = {
        t: [(str(d), int(tf)) for d, tf in plist]
        for t, plist in payload["postings"].items()
    }
    doc_lengths = {str(d): int(n) for d, n in payload["doc_lengths"].items()}
    return InvertedIndex(postings=postings, doc_lengths=doc_lengths, tokenizer=config)


# ---------------------------------------------------------------------------
# TREC run files

def write_trec_run(path, runs: Iterable[RankedList], tag: str = "precedent") -> None:
    """Write rankings in the six-column TREC run format."""
    lines = []
    for run in runs:
        for rank, (doc_id, score) in enumerate(run.entries, start=1):
            lines.append(f"{run.query_id} Q0 {doc_id} {rank} {score:.6f} {tag}")
    text = "\n".join(lines) + ("\n" if lines else "")
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def read_trec_run(path) -> Dict[str, RankedList]:
    """Read a TREC run file into per-query rankings ordered by rank field."""
    path = Path(path)
    if not path.is_file():
        raise CorpusError(f"run file not found: {path}")
    rows: Dict[str, List[Tuple[int, str, float]]] = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 6:
            raise CorpusError(f"{path}:{lineno}: expected 6 fields, got {len(parts)}")
        qid, _, doc_id, rank, score, _ = parts
        try:
            rows.setdefault(qid, []).append((int(rank), doc_id, float(score)))
        except ValueError as exc:
            raise CorpusError(f"{path}:{lineno}: bad rank or score: {exc}") from exc
    runs = {}
    for qid, entries in rows.items():
        entries.sort(key=lambda e: (e[0], e[1]))
        seen = set()
        for _, doc_id, _ in entries:
            if doc_id in seen:
                raise CorpusError(f"{path}: duplicate doc {doc_id} for query {qid}")
            seen.add(doc_id)
        runs[qid] = RankedList(qid, [(d, s) for _, d, s in entries])
    return runs

"""Embedding-based keyword extraction over query-case paragraphs.

Per paragraph: build candidate n-grams, embed them and the paragraph,
rank candidates by cosine to the paragraph, optionally diversify with
maximal marginal relevance or max-sum subset selection, and emit the
selections of all paragraphs concatenated as one reformulated query.
"""

import itertools
from dataclasses import dataclass
from typing import FrozenSet, List, Sequence, Tuple

import numpy as np

from .corpus import CaseDocument, TokenizerConfig, tokenize
from .embed import ROLE_SIMILARITY, EmbeddingVector, cosine, normalized_vector, zero_sentinel
from .stopwords import ENGLISH_STOPWORDS
from .termex import SOURCE_KEYBERT, ReformulatedQuery, TermScore

DIVERSIFIER_MMR = "mmr"
DIVERSIFIER_MAXSUM = "maxsum"
DIVERSIFIER_NONE = "none"

MAXSUM_POOL_CAP = 20

# Candidate stream keeps stopwords and single letters: adjacency matters,
# pruning happens per n-gram.
_CANDIDATE_TOKENIZER = TokenizerConfig(min_token_length=1)


@dataclass(frozen=True)
class KeyexParams:
    ngram_min: int = 1
    ngram_max: int = 2
    top_n_per_paragraph: int = 20
    diversifier: str = DIVERSIFIER_MMR
    diversity_coeff: float = 0.6
    pool_mult: int = 2
    char_budget: int = 2000

    def __post_init__(self):
        if not 1 <= self.ngram_min <= self.ngram_max:
            raise ValueError("need 1 <= ngram_min <= ngram_max")
        if self.top_n_per_paragraph < 1:
            raise ValueError("top_n_per_paragraph must be >= 1")
        if self.diversifier not in (DIVERSIFIER_MMR, DIVERSIFIER_MAXSUM, DIVERSIFIER_NONE):
            raise ValueError(f"unknown diversifier: {self.diversifier}")
        if not 0.0 <= self.diversity_coeff <= 1.0:
            raise ValueError("diversity_coeff must be in [0, 1]")
        if self.pool_mult < 1:
            raise ValueError("pool_mult must be >= 1")
        if self.char_budget < 1:
            raise ValueError("char_budget must be >= 1")


def candidate_ngrams(
    paragraph: str,
    params: KeyexParams = KeyexParams(),
    stopwords: FrozenSet[str] = ENGLISH_STOPWORDS,
) -> List[str]:
    """Unique candidate n-grams of a paragraph, in first-occurrence order
    per n-gram size (all unigrams, then all bigrams, ...).

    An n-gram is pruned when its first or last token is a stopword, so
    interior stopwords survive in longer grams but unigram stopwords never
    appear.
    """
    tokens = tokenize(paragraph, _CANDIDATE_TOKENIZER)
    seen = set()
    out = []
    for n in range(params.ngram_min, params.ngram_max + 1):
        for i in range(len(tokens) - n + 1):
            gram = tokens[i : i + n]
            if gram[0] in stopwords or gram[-1] in stopwords:
                continue
            text = " ".join(gram)
            if text not in seen:
                seen.add(text)
                out.append(text)
    return out


def _valid_candidates(
    candidates: Sequence[Tuple[str, EmbeddingVector]],
) -> List[Tuple[str, EmbeddingVector]]:
    return [(t, v) for t, v in candidates if v.valid]


def _unit_rows(vectors: Sequence[EmbeddingVector]) -> np.ndarray:
    # Providers normalize on emission; re-dividing makes dot products honest
    # cosines even for vectors read verbatim from a file.
    rows = np.stack([v.values for v in vectors])
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return rows / norms


def rank_by_doc_similarity(
    paragraph_vec: EmbeddingVector,
    candidates: Sequence[Tuple[str, EmbeddingVector]],
) -> List[TermScore]:
    """Candidates sorted by cosine to the paragraph vector, descending.

    Zero-sentinel candidate vectors are excluded. Ties keep candidate order
    (the sort is stable).
    """
    valid = _valid_candidates(candidates)
    scored = [TermScore(t, cosine(v, paragraph_vec)) for t, v in valid]
    return sorted(scored, key=lambda ts: -ts.score)


def mmr_diversify(
    paragraph_vec: EmbeddingVector,
    candidates: Sequence[Tuple[str, EmbeddingVector]],
    top_n: int,
    coeff: float,
) -> List[str]:
    """Greedy maximal-marginal-relevance selection.

    First pick maximizes cosine to the paragraph; each later pick maximizes
    coeff * cos(c, paragraph) - (1 - coeff) * max_selected cos(c, s).
    Ties resolve to the earliest candidate. coeff=1 reduces to plain
    similarity ranking.
    """
    if not 0.0 <= coeff <= 1.0:
        raise ValueError("coeff must be in [0, 1]")
    valid = _valid_candidates(candidates)
    if not valid or top_n < 1:
        return []
    doc_sim = np.array([cosine(v, paragraph_vec) for _, v in valid])
    vectors = _unit_rows([v for _, v in valid])
    remaining = list(range(len(valid)))
    # argmax over a list keeps the first index on ties.
    first = max(remaining, key=lambda i: (doc_sim[i], -i))
    selected = [first]
    remaining.remove(first)
    while remaining and len(selected) < top_n:
        sel_matrix = vectors[selected]
        best_i = None
        best_val = None
        for i in remaining:
            redundancy = float(np.max(sel_matrix @ vectors[i]))
            val = coeff * doc_sim[i] - (1.0 - coeff) * redundancy
            if best_val is None or val > best_val:
                best_val = val
                best_i = i
        selected.append(best_i)
        remaining.remove(best_i)
    return [valid[i][0] for i in selected]


def max_sum_select(
    paragraph_vec: EmbeddingVector,
    candidates: Sequence[Tuple[str, EmbeddingVector]],
    top_n: int,
    pool_mult: int = 2,
) -> List[str]:
    """Pick the size-top_n subset of the most doc-similar pool whose summed
    pairwise cosine is minimal (least mutually similar terms).

    Pool = top pool_mult*top_n candidates by doc similarity, capped at
    MAXSUM_POOL_CAP so the exhaustive subset search stays bounded. A pool
    no larger than top_n is returned whole. Ties pick the lexicographically
    smallest index subset (itertools.combinations enumeration order).
    """
    if pool_mult < 1:
        raise ValueError("pool_mult must be >= 1")
    valid = _valid_candidates(candidates)
    if not valid or top_n < 1:
        return []
    ranked = rank_by_doc_similarity(paragraph_vec, valid)
    by_text = {t: v for t, v in valid}
    pool_size = min(pool_mult * top_n, MAXSUM_POOL_CAP, len(ranked))
    pool = [ts.term for ts in ranked[:pool_size]]
    if len(pool) <= top_n:
        return pool
    vectors = _unit_rows([by_text[t] for t in pool])
    sims = vectors @ vectors.T
    best_subset = None
    best_cost = None
    for subset in itertools.combinations(range(len(pool)), top_n):
        cost = 0.0
        for a, b in itertools.combinations(subset, 2):
            cost += sims[a, b]
        if best_cost is None or cost < best_cost:
            best_cost = cost
            best_subset = subset
    return [pool[i] for i in best_subset]


def paragraph_vector(paragraph: str, provider, char_budget: int) -> EmbeddingVector:
    """Embed a full paragraph; over-budget paragraphs are chunked at
    whitespace and the chunk vectors mean-pooled."""
    if len(paragraph) <= char_budget:
        return provider.embed_texts([paragraph], ROLE_SIMILARITY)[0]
    chunks = []
    words = paragraph.split()
    current: List[str] = []
    length = 0
    for w in words:
        if current and length + 1 + len(w) > char_budget:
            chunks.append(" ".join(current))
            current = [w]
            length = len(w)
        else:
            length += len(w) + (1 if current else 0)
            current.append(w)
    if current:
        chunks.append(" ".join(current))
    vectors = provider.embed_texts(chunks, ROLE_SIMILARITY)
    valid = [v.values for v in vectors if v.valid]
    if not valid:
        return zero_sentinel(vectors[0].dim)
    return normalized_vector(np.mean(valid, axis=0))


def reformulate_query_keyex(
    query_doc: CaseDocument,
    provider,
    params: KeyexParams = KeyexParams(),
    stopwords: FrozenSet[str] = ENGLISH_STOPWORDS,
) -> ReformulatedQuery:
    """Extract diversified keywords per paragraph and concatenate them, in
    paragraph order, into one reformulated query.

    Duplicate n-grams across paragraphs are kept: repeated selection is a
    frequency signal for the lexical rankers downstream.
    """
    terms: List[str] = []
    for paragraph in query_doc.paragraphs:
        cands = candidate_ngrams(paragraph, params, stopwords)
        if not cands:
            continue
        para_vec = paragraph_vector(paragraph, provider, params.char_budget)
        if not para_vec.valid:
            continue
        cand_vecs = provider.embed_texts(cands, ROLE_SIMILARITY)
        pairs = list(zip(cands, cand_vecs))
        if params.diversifier == DIVERSIFIER_MMR:
            picks = mmr_diversify(
                para_vec, pairs, params.top_n_per_paragraph, params.diversity_coeff
            )
        elif params.diversifier == DIVERSIFIER_MAXSUM:
            picks = max_sum_select(
                para_vec, pairs, params.top_n_per_paragraph, params.pool_mult
            )
        else:
            ranked = rank_by_doc_similarity(para_vec, pairs)
            picks = [ts.term for ts in ranked[: params.top_n_per_paragraph]]
        for ngram in picks:
            terms.extend(ngram.split(" "))
    return ReformulatedQuery(
        query_id=query_doc.id,
        terms=tuple(terms),
        source=SOURCE_KEYBERT,
        proportion=1.0,
    )

"""Cluster-driven re-ranking.

Representative sentences of the query document are chosen by k-means over
sentence embeddings (the member closest to each centroid); each
representative is matched to its most cosine-similar sentence in a
candidate document, and the candidate's score is the sum of pair-relevance
scores of those matches. The first-stage top-depth pool is reordered by
this score.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .corpus import CaseDocument, Corpus
from .embed import ROLE_CLUSTERING, ROLE_SIMILARITY, EmbeddingVector, cosine
from .errors import RerankError
from .retrieval import RankedList, ranked_from_scores

RERANK_TAG = "cluster-driven"


@dataclass(frozen=True)
class RerankParams:
    k: int = 3
    depth: int = 50
    kmeans_seed: int = 42
    kmeans_max_iters: int = 100
    kmeans_restarts: int = 4
    # Queries with fewer sentences than this skip clustering and use all
    # sentences directly; avoids degenerate k-means on tiny inputs.
    min_sentences_for_clustering: int = 4

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        if self.kmeans_max_iters < 1:
            raise ValueError("kmeans_max_iters must be >= 1")
        if self.kmeans_restarts < 1:
            raise ValueError("kmeans_restarts must be >= 1")


@dataclass
class KMeansResult:
    labels: np.ndarray
    centroids: np.ndarray
    inertia: float
    # Inertia after each assignment step of the winning restart; Lloyd
    # iterations never increase it.
    history: List[float] = field(default_factory=list)


def _assign(points: np.ndarray, centroids: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    # Squared Euclidean distances, points x centroids.
    d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    labels = np.argmin(d2, axis=1)  # ties -> lowest cluster index
    return labels, d2


def _plus_plus_seed(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    first = int(rng.integers(n))
    centroids = [points[first]]
    d2 = ((points - centroids[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = float(d2.sum())
        if total > 0.0:
            probs = d2 / total
            idx = int(rng.choice(n, p=probs))
        else:
            # All points coincide with a centroid already.
            idx = int(rng.integers(n))
        centroids.append(points[idx])
        d2 = np.minimum(d2, ((points - centroids[-1]) ** 2).sum(axis=1))
    return np.stack(centroids)


def kmeans(
    points: np.ndarray,
    k: int,
    seed: int = 42,
    restarts: int = 4,
    max_iters: int = 100,
) -> KMeansResult:
    """Lloyd's k-means with k-means++ seeding.

    Deterministic given (seed, restarts, max_iters): one generator drives
    all restarts, the best restart by inertia wins, and first-found wins
    ties. Empty clusters are re-seeded from the point farthest from its
    assigned centroid.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] == 0:
        raise ValueError("points must be a non-empty 2-d array")
    n = points.shape[0]
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > n:
        raise ValueError("k cannot exceed the number of points")
    rng = np.random.Generator(np.random.PCG64(seed))
    best: Optional[KMeansResult] = None
    for _ in range(restarts):
        centroids = _plus_plus_seed(points, k, rng)
        labels = np.zeros(n, dtype=int)
        history: List[float] = []
        for _ in range(max_iters):
            labels, d2 = _assign(points, centroids)
            # Re-seed empty clusters from the farthest assigned point. A
            # point with positive distance always has cluster-mates, so the
            # move cannot empty its source cluster; at most k fixes needed.
            for _fix in range(k):
                empty = [c for c in range(k) if not np.any(labels == c)]
                if not empty:
                    break
                assigned = d2[np.arange(n), labels]
                if float(assigned.max()) == 0.0:
                    break  # fewer distinct points than k; leave cluster empty
                centroids[empty[0]] = points[int(np.argmax(assigned))]
                labels, d2 = _assign(points, centroids)
            inertia = float(d2[np.arange(n), labels].sum())
            history.append(inertia)
            new_centroids = centroids.copy()
            for cluster in range(k):
                members = points[labels == cluster]
                if members.shape[0]:
                    new_centroids[cluster] = members.mean(axis=0)
            if np.array_equal(new_centroids, centroids):
                break
            centroids = new_centroids
        labels, d2 = _assign(points, centroids)
        inertia = float(d2[np.arange(n), labels].sum())
        if best is None or inertia < best.inertia:
            best = KMeansResult(
                labels=labels, centroids=centroids, inertia=inertia, history=history
            )
    return best


@dataclass
class RepresentativeSet:
    """Representative query sentences: (sentence index, text, embedding)."""

    query_id: str
    sentences: List[Tuple[int, str, EmbeddingVector]]


@dataclass
class SentenceMatch:
    query_sentence: int
    doc_sentence: int
    cosine: float
    pair_relevance: Optional[float] = None


def representative_sentences(
    query: CaseDocument,
    provider,
    params: RerankParams = RerankParams(),
) -> RepresentativeSet:
    """Pick min(k, #sentences) representative sentences of the query.

    Short queries (below the clustering threshold) contribute all their
    sentences. Otherwise sentences are clustered with k-means and each
    cluster is represented by its member closest to the centroid (ties to
    the lowest sentence index). Output is ordered by sentence index.
    """
    if not query.sentences:
        raise RerankError(f"query {query.id} has no sentences")
    vectors = provider.embed_texts(list(query.sentences), ROLE_CLUSTERING)
    valid = [(i, query.sentences[i], v) for i, v in enumerate(vectors) if v.valid]
    if not valid:
        raise RerankError(f"no sentence of query {query.id} embeds validly")
    if len(valid) <= params.k or len(valid) < params.min_sentences_for_clustering:
        return RepresentativeSet(query_id=query.id, sentences=valid)
    points = np.stack([v.values for _, _, v in valid])
    result = kmeans(
        points,
        params.k,
        seed=params.kmeans_seed,
        restarts=params.kmeans_restarts,
        max_iters=params.kmeans_max_iters,
    )
    chosen: List[int] = []
    for cluster in range(params.k):
        members = np.flatnonzero(result.labels == cluster)
        if members.size == 0:
            continue
        dists = ((points[members] - result.centroids[cluster]) ** 2).sum(axis=1)
        chosen.append(int(members[int(np.argmin(dists))]))
    reps = [valid[i] for i in sorted(set(chosen))]
    return RepresentativeSet(query_id=query.id, sentences=reps)


def match_sentences(
    reps: RepresentativeSet,
    doc: CaseDocument,
    provider,
) -> List[SentenceMatch]:
    """Match each representative to its most similar doc sentence.

    The same doc sentence may serve several representatives; ties go to the
    lowest doc-sentence index. A doc with no valid sentence embeddings
    yields no matches (it will score 0).
    """
    if not doc.sentences:
        return []
    vectors = provider.embed_texts(list(doc.sentences), ROLE_SIMILARITY)
    valid = [(i, v) for i, v in enumerate(vectors) if v.valid]
    if not valid:
        return []
    matches = []
    for q_idx, _, q_vec in reps.sentences:
        best_idx = None
        best_cos = None
        for d_idx, d_vec in valid:
            c = cosine(q_vec, d_vec)
            if best_cos is None or c > best_cos:
                best_cos = c
                best_idx = d_idx
        matches.append(
            SentenceMatch(query_sentence=q_idx, doc_sentence=best_idx, cosine=best_cos)
        )
    return matches


def cluster_driven_score(
    reps: RepresentativeSet,
    matches: Sequence[SentenceMatch],
    doc: CaseDocument,
    provider,
) -> float:
    """Sum of pair-relevance scores over the matches; range [0, |reps|]."""
    if not matches:
        return 0.0
    rep_text = {idx: text for idx, text, _ in reps.sentences}
    pairs = [
        (rep_text[m.query_sentence], doc.sentences[m.doc_sentence]) for m in matches
    ]
    scores = provider.score_pairs(pairs)
    for m, s in zip(matches, scores):
        m.pair_relevance = s
    return float(sum(scores))


def rerank_topk(
    first_stage: RankedList,
    corpus: Corpus,
    provider,
    params: RerankParams = RerankParams(),
    threads: int = 1,
) -> RankedList:
    """Re-rank the first-stage top-depth entries by cluster-driven score.

    The output is a permutation of that pool (entries past depth are
    dropped; downstream cut-offs are <= depth by contract). Per-document
    scoring is independent, so it parallelizes; results merge in pool order
    regardless of thread count.
    """
    if not first_stage.entries:
        return RankedList(query_id=first_stage.query_id)
    if first_stage.query_id not in corpus.documents:
        raise RerankError(f"query document {first_stage.query_id} not in corpus")
    query = corpus.documents[first_stage.query_id]
    reps = representative_sentences(query, provider, params)
    pool = first_stage.entries[: params.depth]
    missing = [d for d, _ in pool if d not in corpus.documents]
    if missing:
        raise RerankError(f"pool documents missing from corpus: {sorted(missing)}")

    def score_doc(doc_id: str) -> float:
        doc = corpus.documents[doc_id]
        matches = match_sentences(reps, doc, provider)
        return cluster_driven_score(reps, matches, doc, provider)

    doc_ids = [d for d, _ in pool]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool_exec:
            scores = list(pool_exec.map(score_doc, doc_ids))
    else:
        scores = [score_doc(d) for d in doc_ids]
    return ranked_from_scores(first_stage.query_id, dict(zip(doc_ids, scores)))

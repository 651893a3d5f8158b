"""Independent brute-force reference implementations.

Everything here is written straight from the scoring formulas with plain
loops over whole documents. Nothing imports the package under test, so a
bug there cannot leak into the reference values.
"""

import math
from collections import Counter
from typing import Dict, Iterable, List, Mapping, Sequence, Set, Tuple


def _collection_stats(docs: Mapping[str, Sequence[str]]):
    n_docs = len(docs)
    df = Counter()
    cf = Counter()
    total = 0
    for tokens in docs.values():
        counts = Counter(tokens)
        for term, tf in counts.items():
            df[term] += 1
            cf[term] += tf
        total += len(tokens)
    avg_len = total / n_docs if n_docs else 0.0
    return n_docs, df, cf, total, avg_len


def brute_bm25(docs: Mapping[str, Sequence[str]], query: Sequence[str],
               k1: float, b: float) -> Dict[str, float]:
    """Per-document BM25, every document scored directly."""
    n_docs, df, _, _, avg_len = _collection_stats(docs)
    qtf = Counter(query)
    out = {}
    for doc_id, tokens in docs.items():
        counts = Counter(tokens)
        dl = len(tokens)
        score = 0.0
        for term, q_count in qtf.items():
            tf = counts.get(term, 0)
            if tf == 0 or df[term] == 0:
                continue
            idf = math.log(1 + (n_docs - df[term] + 0.5) / (df[term] + 0.5))
            denom = tf + k1 * (1 - b + b * dl / avg_len)
            score += q_count * idf * tf * (k1 + 1) / denom
        if score > 0:
            out[doc_id] = score
    return out


def brute_lmjm(docs: Mapping[str, Sequence[str]], query: Sequence[str],
               lam: float) -> Dict[str, float]:
    """Jelinek-Mercer smoothed query log-likelihood.

    Terms absent from the collection contribute nothing; every document
    gets a score as long as one query term occurs somewhere.
    """
    _, _, cf, total, _ = _collection_stats(docs)
    qtf = Counter(query)
    seen = [t for t in qtf if cf.get(t, 0) > 0]
    if not seen:
        return {}
    out = {}
    for doc_id, tokens in docs.items():
        counts = Counter(tokens)
        dl = len(tokens)
        score = 0.0
        for term in seen:
            p_doc = counts.get(term, 0) / dl if dl else 0.0
            p_col = cf[term] / total
            score += qtf[term] * math.log((1 - lam) * p_doc + lam * p_col)
        out[doc_id] = score
    return out


def brute_dfr(docs: Mapping[str, Sequence[str]], query: Sequence[str],
              c: float) -> Dict[str, float]:
    """DFR In_expC2: inverse expected df, Bernoulli after-effect, second
    length normalization."""
    n_docs, df, cf, _, avg_len = _collection_stats(docs)
    qtf = Counter(query)
    out = {}
    for doc_id, tokens in docs.items():
        counts = Counter(tokens)
        dl = len(tokens)
        score = 0.0
        for term, q_count in qtf.items():
            tf = counts.get(term, 0)
            if tf == 0 or df[term] == 0:
                continue
            tfn = tf * math.log2(1 + c * avg_len / dl)
            n_exp = n_docs * (1 - ((n_docs - 1) / n_docs) ** cf[term])
            info = math.log2((n_docs + 1) / (n_exp + 0.5))
            score += q_count * (cf[term] + 1) / (df[term] * (tfn + 1)) * tfn * info
        if score > 0:
            out[doc_id] = score
    return out


def brute_kli(query_tokens: Sequence[str],
              collection_prob: Mapping[str, float]) -> Dict[str, float]:
    qlen = len(query_tokens)
    counts = Counter(query_tokens)
    out = {}
    for term, tf in counts.items():
        p_q = tf / qlen
        p_c = collection_prob[term]
        out[term] = p_q * math.log(p_q / p_c)
    return out


def brute_plm(query_tokens: Sequence[str], collection_prob: Mapping[str, float],
              lam: float, steps: int) -> Dict[str, float]:
    """EM for the parsimonious foreground model, fixed number of steps."""
    counts = Counter(query_tokens)
    qlen = len(query_tokens)
    p = {t: tf / qlen for t, tf in counts.items()}
    for _ in range(steps):
        e = {}
        for t, tf in counts.items():
            num = lam * p[t]
            den = (1 - lam) * collection_prob[t] + lam * p[t]
            e[t] = tf * num / den if den > 0 else 0.0
        s = sum(e.values())
        if s <= 0:
            break
        p = {t: v / s for t, v in e.items()}
    return p


def brute_idf(docs: Mapping[str, Sequence[str]],
              terms: Iterable[str]) -> Dict[str, float]:
    n_docs, df, _, _, _ = _collection_stats(docs)
    out = {}
    for term in terms:
        d = df.get(term, 0)
        out[term] = math.log(n_docs / d) if d > 0 else math.log(n_docs + 1)
    return out


def brute_micro_eval(run: Mapping[str, Sequence[str]],
                     qrels: Mapping[str, Set[str]],
                     cutoff: int) -> Tuple[float, float, float]:
    """Counting oracle: sum retrieved / relevant / correct over queries,
    then one precision, one recall, one F1."""
    retrieved = relevant = correct = 0
    for qid, judged in qrels.items():
        ranked = list(run.get(qid, []))[:cutoff]
        retrieved += len(ranked)
        relevant += len(judged)
        correct += sum(1 for d in ranked if d in judged)
    p = correct / retrieved if retrieved else 0.0
    r = correct / relevant if relevant else 0.0
    f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f1


def brute_minmax(scores: Mapping[str, float]) -> Dict[str, float]:
    if not scores:
        return {}
    lo = min(scores.values())
    hi = max(scores.values())
    if hi == lo:
        return {d: 1.0 for d in scores}
    return {d: (s - lo) / (hi - lo) for d, s in scores.items()}


def brute_fuse(lex: Mapping[str, float], neu: Mapping[str, float],
               alpha: float, beta: float,
               normalize: bool = True) -> List[Tuple[str, float]]:
    pool = [d for d in neu if d in lex]
    lex_p = {d: lex[d] for d in pool}
    neu_p = {d: neu[d] for d in pool}
    if normalize:
        lex_p = brute_minmax(lex_p)
        neu_p = brute_minmax(neu_p)
    fused = {d: alpha * lex_p[d] + beta * neu_p[d] for d in pool}
    return sorted(fused.items(), key=lambda kv: (-kv[1], kv[0]))


def brute_nearest_to_centroid(points, labels, centroids) -> List[int]:
    """For each cluster pick the member closest to the centroid, lowest
    index on ties. Returns sorted unique indices."""
    import numpy as np

    chosen = []
    for c in range(centroids.shape[0]):
        members = [i for i, l in enumerate(labels) if l == c]
        if not members:
            continue
        best = None
        best_d = None
        for i in members:
            d = float(np.sum((points[i] - centroids[c]) ** 2))
            if best_d is None or d < best_d:
                best, best_d = i, d
        chosen.append(best)
    return sorted(set(chosen))


def random_doc_set(rng, max_docs: int = 50, max_vocab: int = 200):
    """Random small corpus keyed case-0..n, token alphabet t0..tV."""
    n_docs = int(rng.integers(2, max_docs + 1))
    vocab_size = int(rng.integers(3, max_vocab + 1))
    vocab = [f"t{i}" for i in range(vocab_size)]
    docs = {}
    for i in range(n_docs):
        length = int(rng.integers(1, 60))
        idx = rng.integers(0, vocab_size, size=length)
        docs[f"case-{i:03d}"] = [vocab[j] for j in idx]
    return docs, vocab

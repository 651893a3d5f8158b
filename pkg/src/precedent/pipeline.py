"""Experiment harness: linear score fusion, micro-averaged evaluation,
cut-off sweeps, and exhaustive hyperparameter grid search.
"""

import csv
import itertools
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .corpus import Qrels
from .errors import AggregationError, EvaluationError, GridSearchError
from .retrieval import RankedList, ranked_from_scores

OBJECTIVE_F1 = "f1"
OBJECTIVE_P_AT_K = "p_at_k"


@dataclass(frozen=True)
class AggregationParams:
    """Linear fusion weights: final = alpha * lexical + beta * neural.

    Either weight may be zero (degenerating to the other ranking) but not
    both. Normalization min-maxes each list within the shared pool first.
    """

    alpha: float
    beta: float
    normalize: bool = True

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("weights must be >= 0")
        if self.alpha + self.beta <= 0:
            raise ValueError("alpha + beta must be > 0")


def _minmax(values: Dict[str, float]) -> Dict[str, float]:
    lo = min(values.values())
    hi = max(values.values())
    if hi == lo:
        return {d: 1.0 for d in values}
    span = hi - lo
    return {d: (v - lo) / span for d, v in values.items()}


def aggregate_scores(
    lexical: RankedList,
    neural: RankedList,
    params: AggregationParams,
) -> RankedList:
    """Fuse two rankings over their common pool.

    The neural list is normally the re-ranked top-depth subset of the
    lexical list, so the pool is its doc set; documents outside the
    intersection are dropped. Disjoint doc sets mean the lists do not
    describe the same retrieval and are rejected.
    """
    lex = lexical.scores()
    neu = neural.scores()
    if not neu:
        # Nothing was re-ranked (empty first stage); nothing to fuse.
        return RankedList(query_id=lexical.query_id)
    pool = [d for d in neu if d in lex]
    if not pool:
        raise AggregationError(
            f"rankings for query {lexical.query_id!r} share no documents"
        )
    lex_pool = {d: lex[d] for d in pool}
    neu_pool = {d: neu[d] for d in pool}
    if params.normalize:
        lex_pool = _minmax(lex_pool)
        neu_pool = _minmax(neu_pool)
    fused = {
        d: params.alpha * lex_pool[d] + params.beta * neu_pool[d] for d in pool
    }
    return ranked_from_scores(lexical.query_id, fused)


class QueryCounts(NamedTuple):
    retrieved: int
    relevant: int
    correct: int


@dataclass
class EvalResult:
    precision: float
    recall: float
    f1: float
    cutoff: int
    per_query: Dict[str, QueryCounts] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "cutoff": self.cutoff,
            "per_query": {
                q: {"retrieved": c.retrieved, "relevant": c.relevant, "correct": c.correct}
                for q, c in sorted(self.per_query.items())
            },
        }


def _f1(p: float, r: float) -> float:
    return 2.0 * p * r / (p + r) if p + r > 0 else 0.0


def evaluate(
    runs: Iterable[RankedList],
    qrels: Qrels,
    cutoff: int,
) -> EvalResult:
    """Micro-averaged precision/recall/F1 at a cut-off.

    The top-cutoff documents of every run are declared relevant; counts are
    summed over queries before the ratios. Queries retrieving fewer than
    cutoff documents contribute what they have. Every run query must be
    judged.
    """
    if cutoff < 1:
        raise ValueError("cutoff must be >= 1")
    runs = list(runs)
    seen = set()
    for run in runs:
        if run.query_id in seen:
            raise EvaluationError(f"duplicate run for query {run.query_id}")
        seen.add(run.query_id)
    unjudged = sorted(r.query_id for r in runs if r.query_id not in qrels.judgments)
    if unjudged:
        raise EvaluationError(f"run queries without judgments: {unjudged}")
    total_retrieved = total_relevant = total_correct = 0
    per_query = {}
    for run in runs:
        rel = qrels.judgments[run.query_id]
        top = [d for d, _ in run.entries[:cutoff]]
        correct = sum(1 for d in top if d in rel)
        counts = QueryCounts(retrieved=len(top), relevant=len(rel), correct=correct)
        per_query[run.query_id] = counts
        total_retrieved += counts.retrieved
        total_relevant += counts.relevant
        total_correct += counts.correct
    p = total_correct / total_retrieved if total_retrieved else 0.0
    r = total_correct / total_relevant if total_relevant else 0.0
    return EvalResult(precision=p, recall=r, f1=_f1(p, r), cutoff=cutoff, per_query=per_query)


def evaluate_macro(
    runs: Iterable[RankedList],
    qrels: Qrels,
    cutoff: int,
) -> Tuple[float, float, float]:
    """Secondary report: per-query P/R/F1 averaged over queries."""
    result = evaluate(runs, qrels, cutoff)
    ps, rs, f1s = [], [], []
    for counts in result.per_query.values():
        p = counts.correct / counts.retrieved if counts.retrieved else 0.0
        r = counts.correct / counts.relevant if counts.relevant else 0.0
        ps.append(p)
        rs.append(r)
        f1s.append(_f1(p, r))
    n = len(ps)
    if n == 0:
        return 0.0, 0.0, 0.0
    return sum(ps) / n, sum(rs) / n, sum(f1s) / n


def sweep_cutoff(
    runs: Sequence[RankedList],
    qrels: Qrels,
    k_range: Sequence[int],
) -> Tuple[int, Dict[int, EvalResult]]:
    """Evaluate at every cut-off; best k maximizes F1, ties to the smaller k."""
    ks = list(k_range)
    if not ks:
        raise ValueError("k_range must be non-empty")
    curve = {}
    best_k = None
    for k in sorted(ks):
        result = evaluate(runs, qrels, k)
        curve[k] = result
        if best_k is None or result.f1 > curve[best_k].f1:
            best_k = k
    return best_k, curve


@dataclass
class GridSpec:
    """Ordered parameter grids plus the tuning objective."""

    params: Dict[str, Sequence]
    objective: str = OBJECTIVE_F1
    objective_k: Optional[int] = None

    def __post_init__(self):
        if not self.params:
            raise GridSearchError("grid has no parameters")
        for name, values in self.params.items():
            if not list(values):
                raise GridSearchError(f"grid for {name!r} is empty")
        if self.objective not in (OBJECTIVE_F1, OBJECTIVE_P_AT_K):
            raise GridSearchError(f"unknown objective: {self.objective}")

    def points(self) -> List[Dict[str, object]]:
        names = list(self.params)
        out = []
        for combo in itertools.product(*(self.params[n] for n in names)):
            out.append(dict(zip(names, combo)))
        return out


@dataclass
class GridTrial:
    assignment: Dict[str, object]
    result: Optional[EvalResult] = None
    error: Optional[str] = None

    def objective_value(self, objective: str) -> Optional[float]:
        if self.result is None:
            return None
        if objective == OBJECTIVE_P_AT_K:
            return self.result.precision
        return self.result.f1


@dataclass
class GridSearchResult:
    best_assignment: Dict[str, object]
    best_result: EvalResult
    trials: List[GridTrial]

    def as_dict(self) -> dict:
        return {
            "best_assignment": self.best_assignment,
            "best_result": {
                "precision": self.best_result.precision,
                "recall": self.best_result.recall,
                "f1": self.best_result.f1,
                "cutoff": self.best_result.cutoff,
            },
            "trials": [
                {
                    "assignment": t.assignment,
                    "precision": t.result.precision if t.result else None,
                    "recall": t.result.recall if t.result else None,
                    "f1": t.result.f1 if t.result else None,
                    "error": t.error,
                }
                for t in self.trials
            ],
        }


def grid_search(
    spec: GridSpec,
    eval_fn: Callable[[Dict[str, object]], EvalResult],
    threads: int = 1,
) -> GridSearchResult:
    """Exhaustive Cartesian search.

    Every point lands in the trial ledger, failed points with their error
    message. Best point maximizes the objective; ties go to the earliest
    point in enumeration order, which also makes the result independent of
    evaluation parallelism.
    """
    points = spec.points()

    def run_point(assignment: Dict[str, object]) -> GridTrial:
        try:
            return GridTrial(assignment=assignment, result=eval_fn(assignment))
        except Exception as exc:  # recorded, search continues
            return GridTrial(assignment=assignment, error=f"{type(exc).__name__}: {exc}")

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trials = list(pool.map(run_point, points))
    else:
        trials = [run_point(p) for p in points]

    best: Optional[GridTrial] = None
    best_val: Optional[float] = None
    for trial in trials:
        val = trial.objective_value(spec.objective)
        if val is None:
            continue
        if best_val is None or val > best_val:
            best_val = val
            best = trial
    if best is None:
        raise GridSearchError("every grid point failed")
    return GridSearchResult(
        best_assignment=best.assignment, best_result=best.result, trials=trials
    )


def tune_fusion_weights(
    lexical_runs: Dict[str, RankedList],
    neural_runs: Dict[str, RankedList],
    qrels: Qrels,
    cutoffs: Sequence[int] = (4,),
    alphas: Sequence[float] = tuple(range(1, 101)),
    betas: Sequence[float] = tuple(range(1, 101)),
    normalize: bool = True,
) -> GridSearchResult:
    """Grid search over fusion weights, vectorized over the whole grid.

    Equivalent to grid_search over aggregate_scores + evaluate with the
    same alpha-major enumeration and first-wins tie rule, but the per-point
    dict path costs minutes on a 100x100 grid, so rankings for all weight
    points are computed with one stable argsort per query. Each weight
    point is evaluated at every cut-off; its ledger row carries the best
    (F1-max, ties to the smaller cut-off).
    """
    cutoffs = sorted(set(int(k) for k in cutoffs))
    if not cutoffs or cutoffs[0] < 1:
        raise ValueError("cutoffs must be >= 1")
    alphas = [float(a) for a in alphas]
    betas = [float(b) for b in betas]
    if not alphas or not betas:
        raise GridSearchError("fusion grid is empty")
    shared = [q for q in lexical_runs if q in neural_runs]
    unjudged = sorted(q for q in shared if q not in qrels.judgments)
    if unjudged:
        raise EvaluationError(f"run queries without judgments: {unjudged}")
    if not shared:
        raise AggregationError("no queries shared between the two run sets")

    # Weight grid flattened alpha-major, matching nested-loop enumeration.
    a_flat = np.repeat(alphas, len(betas))
    b_flat = np.tile(betas, len(alphas))
    n_points = a_flat.shape[0]
    n_ks = len(cutoffs)
    correct = np.zeros((n_points, n_ks), dtype=np.int64)
    retrieved = np.zeros(n_ks, dtype=np.int64)
    total_relevant = 0

    for qid in shared:
        lex = lexical_runs[qid].scores()
        neu = neural_runs[qid].scores()
        rel = qrels.judgments[qid]
        total_relevant += len(rel)
        if not neu:
            continue  # empty first stage: counts toward recall only
        pool = [d for d in neu if d in lex]
        if not pool:
            raise AggregationError(f"rankings for query {qid!r} share no documents")
        lex_pool = {d: lex[d] for d in pool}
        neu_pool = {d: neu[d] for d in pool}
        if normalize:
            lex_pool = _minmax(lex_pool)
            neu_pool = _minmax(neu_pool)
        docs = sorted(pool)  # columns in id order: stable sort = id tie-break
        lex_arr = np.array([lex_pool[d] for d in docs])
        neu_arr = np.array([neu_pool[d] for d in docs])
        rel_arr = np.array([d in rel for d in docs])
        n = len(docs)
        fused = a_flat[:, None] * lex_arr[None, :] + b_flat[:, None] * neu_arr[None, :]
        order = np.argsort(-fused, axis=1, kind="stable")
        correct_cum = np.cumsum(rel_arr[order], axis=1)
        for ki, k in enumerate(cutoffs):
            take = min(k, n)
            correct[:, ki] += correct_cum[:, take - 1]
            retrieved[ki] += take

    with np.errstate(divide="ignore", invalid="ignore"):
        p_mat = np.where(retrieved > 0, correct / np.maximum(retrieved, 1), 0.0)
        r_mat = correct / total_relevant if total_relevant else np.zeros_like(p_mat)
        denom = p_mat + r_mat
        f1_mat = np.where(denom > 0, 2.0 * p_mat * r_mat / np.maximum(denom, 1e-300), 0.0)

    # argmax returns the first maximum: smaller cut-off, then earliest point.
    best_k_idx = np.argmax(f1_mat, axis=1)
    rows = np.arange(n_points)
    row_f1 = f1_mat[rows, best_k_idx]
    best_row = int(np.argmax(row_f1))

    trials = []
    for i in range(n_points):
        ki = int(best_k_idx[i])
        result = EvalResult(
            precision=float(p_mat[i, ki]),
            recall=float(r_mat[i, ki]),
            f1=float(f1_mat[i, ki]),
            cutoff=cutoffs[ki],
            per_query={},
        )
        trials.append(
            GridTrial(
                assignment={
                    "alpha": float(a_flat[i]),
                    "beta": float(b_flat[i]),
                    "cutoff": cutoffs[ki],
                },
                result=result,
            )
        )
    best = trials[best_row]
    return GridSearchResult(
        best_assignment=best.assignment, best_result=best.result, trials=trials
    )


def holdout_split(query_ids: Sequence[str], n_holdout: int = 250) -> Tuple[List[str], List[str]]:
    """Split query ids into (train, validation) with the last n as validation,
    preserving the given order."""
    ids = list(query_ids)
    if n_holdout < 0:
        raise ValueError("n_holdout must be >= 0")
    if n_holdout > len(ids):
        raise ValueError(f"cannot hold out {n_holdout} of {len(ids)} queries")
    cut = len(ids) - n_holdout
    return ids[:cut], ids[cut:]


# ---------------------------------------------------------------------------
# Report files

def _atomic_write(path, text: str) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def write_eval_json(path, result: EvalResult) -> None:
    _atomic_write(path, json.dumps(result.as_dict(), indent=2) + "\n")


def write_curve_csv(path, curve: Dict[int, EvalResult]) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "precision", "recall", "f1"])
        for k in sorted(curve):
            r = curve[k]
            writer.writerow([k, f"{r.precision:.6f}", f"{r.recall:.6f}", f"{r.f1:.6f}"])
    os.replace(tmp, path)


def write_grid_json(path, result: GridSearchResult) -> None:
    _atomic_write(path, json.dumps(result.as_dict(), indent=2) + "\n")

"""Embedding providers: deterministic built-in baseline, precomputed-vector
files, and a client for an external model service.

Every provider L2-normalizes on emission so that cosine similarity is a
plain dot product downstream. Texts that produce no tokens map to a
zero-sentinel vector flagged invalid.
"""

import hashlib
import json
import os
import subprocess
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .corpus import TokenizerConfig, tokenize
from .errors import (
    EmbeddingError,
    EmbeddingLookupError,
    EmbeddingTransportError,
)

ROLE_CLUSTERING = "clustering"
ROLE_SIMILARITY = "similarity"
ROLES = (ROLE_CLUSTERING, ROLE_SIMILARITY)

DEFAULT_DIM = 384
MAX_BATCH = 64
NORM_TOLERANCE = 1e-6

# Baseline tokenization keeps every token: single letters carry signal here.
_BASELINE_TOKENIZER = TokenizerConfig(min_token_length=1)


@dataclass(frozen=True)
class EmbeddingVector:
    values: np.ndarray
    valid: bool = True

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])

    def __post_init__(self):
        object.__setattr__(
            self, "values", np.asarray(self.values, dtype=np.float64)
        )
        if self.values.ndim != 1:
            raise EmbeddingError("embedding must be one-dimensional")
        if not np.all(np.isfinite(self.values)):
            raise EmbeddingError("embedding has non-finite components")


def zero_sentinel(dim: int) -> EmbeddingVector:
    return EmbeddingVector(values=np.zeros(dim), valid=False)


def normalized_vector(values) -> EmbeddingVector:
    """L2-normalize, or return the invalid zero sentinel for a zero vector."""
    arr = np.asarray(values, dtype=np.float64)
    norm = float(np.linalg.norm(arr))
    if norm == 0.0 or not np.isfinite(norm):
        return zero_sentinel(arr.shape[0])
    return EmbeddingVector(values=arr / norm, valid=True)


def cosine(u: EmbeddingVector, v: EmbeddingVector) -> float:
    """Cosine similarity; 0 when either vector is the invalid sentinel."""
    if not (u.valid and v.valid):
        return 0.0
    num = float(np.dot(u.values, v.values))
    denom = float(np.linalg.norm(u.values) * np.linalg.norm(v.values))
    if denom == 0.0:
        return 0.0
    return max(-1.0, min(1.0, num / denom))


def _clamp01(x: float) -> float:
    return max(0.0, min(1.0, float(x)))


# ---------------------------------------------------------------------------
# Baseline provider

def _token_seed(token: str) -> int:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def baseline_token_vector(token: str, dim: int) -> np.ndarray:
    """Unit vector drawn from a Gaussian seeded by a 64-bit hash of the token."""
    rng = np.random.Generator(np.random.PCG64(_token_seed(token)))
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def baseline_embed(text: str, dim: int = DEFAULT_DIM) -> EmbeddingVector:
    """Deterministic sentence embedding: normalized mean of per-token
    hash-seeded unit vectors. Empty token lists yield the invalid sentinel."""
    if dim < 8:
        raise ValueError("dim must be >= 8")
    tokens = tokenize(text, _BASELINE_TOKENIZER)
    if not tokens:
        return zero_sentinel(dim)
    acc = np.zeros(dim)
    for t in tokens:
        acc += baseline_token_vector(t, dim)
    return normalized_vector(acc / len(tokens))


class BaselineProvider:
    """Self-contained deterministic provider; stands in for real encoders."""

    kind = "baseline"

    def __init__(self, dim: int = DEFAULT_DIM):
        if dim < 8:
            raise ValueError("dim must be >= 8")
        self.dim = dim
        self._token_cache: Dict[str, np.ndarray] = {}

    def _embed_one(self, text: str) -> EmbeddingVector:
        tokens = tokenize(text, _BASELINE_TOKENIZER)
        if not tokens:
            return zero_sentinel(self.dim)
        acc = np.zeros(self.dim)
        for t in tokens:
            vec = self._token_cache.get(t)
            if vec is None:
                vec = baseline_token_vector(t, self.dim)
                self._token_cache[t] = vec
            acc += vec
        return normalized_vector(acc / len(tokens))

    def embed_texts(self, texts: Sequence[str], role: str) -> List[EmbeddingVector]:
        if not texts:
            raise ValueError("texts must be non-empty")
        if role not in ROLES:
            raise ValueError(f"unknown role: {role}")
        return [self._embed_one(t) for t in texts]

    def score_pairs(self, pairs: Sequence[Tuple[str, str]]) -> List[float]:
        if not pairs:
            raise ValueError("pairs must be non-empty")
        out = []
        for a, b in pairs:
            out.append(_clamp01((cosine(self._embed_one(a), self._embed_one(b)) + 1.0) / 2.0))
        return out

    def close(self):
        pass


# ---------------------------------------------------------------------------
# Precomputed-vector file provider

def content_id(text: str, role: str) -> str:
    """Role-namespaced content hash used as the record id in vector files."""
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=16).hexdigest()
    return f"{role}:{digest}"


def write_embedding_file(path, dim: int, records: Dict[str, Sequence[float]]) -> None:
    """Write a JSONL vector store: header {"dim": D} then one
    {"id", "vector"} record per line, sorted by id. Components are stored at
    float32 precision."""
    lines = [json.dumps({"dim": dim})]
    for rec_id in sorted(records):
        vec = [float(np.float32(x)) for x in records[rec_id]]
        if len(vec) != dim:
            raise EmbeddingError(f"record {rec_id} has dim {len(vec)}, expected {dim}")
        lines.append(json.dumps({"id": rec_id, "vector": vec}))
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text("\n".join(lines) + "\n", encoding="utf-8")
    os.replace(tmp, path)


def read_embedding_file(path) -> Tuple[int, Dict[str, np.ndarray]]:
    path = Path(path)
    if not path.is_file():
        raise EmbeddingError(f"embedding file not found: {path}")
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise EmbeddingError(f"embedding file {path} is empty")
    try:
        header = json.loads(lines[0])
        dim = int(header["dim"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise EmbeddingError(f'{path}: first line must be {{"dim": int}}: {exc}') from exc
    records = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            rec_id = str(rec["id"])
            vec = np.asarray(rec["vector"], dtype=np.float64)
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise EmbeddingError(f"{path}:{lineno}: bad record: {exc}") from exc
        if vec.shape != (dim,):
            raise EmbeddingError(f"{path}:{lineno}: vector dim {vec.shape} != {dim}")
        records[rec_id] = vec
    return dim, records


class FileProvider:
    """Serves vectors precomputed into a JSONL store, keyed by content hash."""

    kind = "file"

    def __init__(self, path):
        self.path = Path(path)
        self.dim, self._records = read_embedding_file(self.path)

    def _lookup(self, text: str, role: str) -> EmbeddingVector:
        rec_id = content_id(text, role)
        vec = self._records.get(rec_id)
        if vec is None:
            raise EmbeddingLookupError(
                f"no stored vector for id {rec_id} in {self.path}"
            )
        if not np.any(vec):
            return zero_sentinel(self.dim)
        return EmbeddingVector(values=vec, valid=True)

    def embed_texts(self, texts: Sequence[str], role: str) -> List[EmbeddingVector]:
        if not texts:
            raise ValueError("texts must be non-empty")
        if role not in ROLES:
            raise ValueError(f"unknown role: {role}")
        return [self._lookup(t, role) for t in texts]

    def score_pairs(self, pairs: Sequence[Tuple[str, str]]) -> List[float]:
        # No separate pair-score store; score from the similarity-role vectors
        # with the same cosine-to-[0,1] map the baseline uses.
        if not pairs:
            raise ValueError("pairs must be non-empty")
        out = []
        for a, b in pairs:
            u = self._lookup(a, ROLE_SIMILARITY)
            v = self._lookup(b, ROLE_SIMILARITY)
            out.append(_clamp01((cosine(u, v) + 1.0) / 2.0))
        return out

    def close(self):
        pass


# ---------------------------------------------------------------------------
# External service client (line-JSON over stdio or HTTP POST)

class StdioTransport:
    """Runs the service as a child process; one JSON object per line."""

    def __init__(self, command: Sequence[str]):
        if not command:
            raise ValueError("command must be non-empty")
        self.command = list(command)
        self._proc: Optional[subprocess.Popen] = None

    def _ensure(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            try:
                self._proc = subprocess.Popen(
                    self.command,
                    stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE,
                    text=True,
                    encoding="utf-8",
                )
            except OSError as exc:
                raise EmbeddingTransportError(
                    f"cannot start embedding service {self.command}: {exc}"
                ) from exc
        return self._proc

    def request(self, payload: dict) -> dict:
        proc = self._ensure()
        try:
            proc.stdin.write(json.dumps(payload) + "\n")
            proc.stdin.flush()
            line = proc.stdout.readline()
        except (BrokenPipeError, OSError) as exc:
            raise EmbeddingTransportError(f"embedding service pipe failed: {exc}") from exc
        if not line:
            raise EmbeddingTransportError("embedding service closed its output")
        try:
            return json.loads(line)
        except json.JSONDecodeError as exc:
            raise EmbeddingTransportError(f"unparsable service reply: {exc}") from exc

    def close(self):
        if self._proc is not None and self._proc.poll() is None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
        self._proc = None


class HttpTransport:
    """POSTs each request object to a single endpoint (e.g. .../rpc)."""

    def __init__(self, endpoint: str, timeout: float = 30.0):
        import httpx

        self.endpoint = endpoint
        self._client = httpx.Client(timeout=timeout)

    def request(self, payload: dict) -> dict:
        import httpx

        try:
            resp = self._client.post(self.endpoint, json=payload)
            resp.raise_for_status()
            return resp.json()
        except httpx.HTTPError as exc:
            raise EmbeddingTransportError(
                f"embedding service at {self.endpoint} failed: {exc}"
            ) from exc
        except json.JSONDecodeError as exc:
            raise EmbeddingTransportError(f"unparsable service reply: {exc}") from exc

    def close(self):
        self._client.close()


class ExternalProvider:
    """Client for an external embedding/scoring service.

    Requests are serialized per connection and batched at MAX_BATCH items.
    Vectors are re-normalized defensively on receipt; pair scores are
    clamped to [0,1] (external cross-encoders may emit logits).
    """

    kind = "external"

    def __init__(
        self,
        transport,
        dim: int = DEFAULT_DIM,
        clustering_model: str = "",
        similarity_model: str = "",
        cross_model: str = "",
        max_batch: int = MAX_BATCH,
    ):
        if max_batch < 1:
            raise ValueError("max_batch must be >= 1")
        self.transport = transport
        self.dim = dim
        self.models = {
            ROLE_CLUSTERING: clustering_model,
            ROLE_SIMILARITY: similarity_model,
        }
        self.cross_model = cross_model
        self.max_batch = max_batch
        self._next_id = 0

    def _call(self, op: str, model: str, key: str, items: list) -> dict:
        self._next_id += 1
        req_id = self._next_id
        reply = self.transport.request(
            {"op": op, "id": req_id, "model": model, key: items}
        )
        if not isinstance(reply, dict):
            raise EmbeddingTransportError("service reply is not an object")
        if "error" in reply:
            raise EmbeddingError(f"embedding service error: {reply['error']}")
        if reply.get("id") != req_id:
            raise EmbeddingTransportError(
                f"service reply id {reply.get('id')!r} does not match request {req_id}"
            )
        return reply

    def embed_texts(self, texts: Sequence[str], role: str) -> List[EmbeddingVector]:
        if not texts:
            raise ValueError("texts must be non-empty")
        if role not in ROLES:
            raise ValueError(f"unknown role: {role}")
        model = self.models[role]
        out: List[EmbeddingVector] = []
        for start in range(0, len(texts), self.max_batch):
            batch = list(texts[start : start + self.max_batch])
            reply = self._call("embed", model, "texts", batch)
            vectors = reply.get("vectors")
            if not isinstance(vectors, list) or len(vectors) != len(batch):
                raise EmbeddingTransportError(
                    "service returned a wrong-length vector list"
                )
            for vec in vectors:
                arr = np.asarray(vec, dtype=np.float64)
                if arr.shape != (self.dim,):
                    raise EmbeddingError(
                        f"service vector dim {arr.shape} != expected {self.dim}"
                    )
                out.append(normalized_vector(arr))
        return out

    def score_pairs(self, pairs: Sequence[Tuple[str, str]]) -> List[float]:
        if not pairs:
            raise ValueError("pairs must be non-empty")
        out: List[float] = []
        for start in range(0, len(pairs), self.max_batch):
            batch = [[a, b] for a, b in pairs[start : start + self.max_batch]]
            reply = self._call("score_pairs", self.cross_model, "pairs", batch)
            scores = reply.get("scores")
            if not isinstance(scores, list) or len(scores) != len(batch):
                raise EmbeddingTransportError(
                    "service returned a wrong-length score list"
                )
            out.extend(_clamp01(s) for s in scores)
        return out

    def close(self):
        self.transport.close()


# ---------------------------------------------------------------------------
# Configuration-driven construction

@dataclass
class ProviderConfig:
    kind: str = "baseline"  # baseline | file | external
    dim: int = DEFAULT_DIM
    vectors_file: Optional[str] = None
    command: Tuple[str, ...] = ()
    endpoint: Optional[str] = None
    clustering_model: str = ""
    similarity_model: str = ""
    cross_model: str = ""
    max_batch: int = MAX_BATCH
    timeout: float = 30.0


def make_provider(config: ProviderConfig):
    if config.kind == "baseline":
        return BaselineProvider(dim=config.dim)
    if config.kind == "file":
        if not config.vectors_file:
            raise EmbeddingError("file provider needs vectors_file")
        return FileProvider(config.vectors_file)
    if config.kind == "external":
        if config.endpoint:
            transport = HttpTransport(config.endpoint, timeout=config.timeout)
        elif config.command:
            transport = StdioTransport(config.command)
        else:
            raise EmbeddingError("external provider needs an endpoint or command")
        return ExternalProvider(
            transport,
            dim=config.dim,
            clustering_model=config.clustering_model,
            similarity_model=config.similarity_model,
            cross_model=config.cross_model,
            max_batch=config.max_batch,
        )
    raise EmbeddingError(f"unknown provider kind: {config.kind}")

"""Encoder backends.

Two families behind one interface:

* "hash-*" identifiers build deterministic local encoders. Each token maps
  to a pseudo-random unit vector seeded by a 64-bit hash of (model, token);
  a sentence is the L2-normalized mean of its token vectors. No weights,
  no downloads, bit-identical across processes. Intended for tests and
  offline pipelines, not retrieval quality.
* Any other identifier loads through sentence-transformers in evaluation
  mode. The import is lazy so the dependency stays optional.

Bi-encoders expose `encode(texts) -> (n, dim) float array` with every row
unit-norm; cross models expose `predict(pairs) -> scores in [0, 1]`.
"""

import hashlib
import re
import struct
from typing import List, Sequence, Tuple

import numpy as np

# hash encoders truncate here, mirroring the fixed context window of the
# transformer models they stand in for
MAX_TOKENS = 256

_TOKEN_RE = re.compile(r"[a-z0-9]+")


class ModelLoadError(Exception):
    """A configured model identifier could not be resolved or loaded."""


def _seed(model: str, text: str) -> int:
    key = f"{model}\x00{text}".encode("utf-8")
    digest = hashlib.blake2b(key, digest_size=8).digest()
    return struct.unpack(">Q", digest)[0]


def _unit(v: np.ndarray) -> np.ndarray:
    n = float(np.linalg.norm(v))
    return v / n if n > 0 else v


class HashBiEncoder:
    """Deterministic hashed random-projection sentence encoder."""

    def __init__(self, name: str, dim: int):
        if dim < 8:
            raise ModelLoadError(f"{name}: dim must be >= 8, got {dim}")
        self.name = name
        self.dim = dim
        self._token_cache: dict = {}

    def _token_vector(self, token: str) -> np.ndarray:
        v = self._token_cache.get(token)
        if v is None:
            rng = np.random.default_rng(_seed(self.name, token))
            v = _unit(rng.standard_normal(self.dim))
            self._token_cache[token] = v
        return v

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        out = np.empty((len(texts), self.dim), dtype=np.float64)
        for i, text in enumerate(texts):
            tokens = _TOKEN_RE.findall(text.lower())[:MAX_TOKENS]
            if tokens:
                mean = np.mean([self._token_vector(t) for t in tokens], axis=0)
            else:
                # tokenless input still gets a stable unit vector so the
                # norm invariant holds for every emitted row
                rng = np.random.default_rng(_seed(self.name, text))
                mean = rng.standard_normal(self.dim)
            out[i] = _unit(mean)
        return out


class HashCrossEncoder:
    """Pair scorer over an internal hash encoder: (cosine + 1) / 2."""

    def __init__(self, name: str, dim: int = 256):
        self.name = name
        self._encoder = HashBiEncoder(name + "::enc", dim)

    def predict(self, pairs: Sequence[Tuple[str, str]]) -> List[float]:
        if not pairs:
            return []
        left = self._encoder.encode([a for a, _ in pairs])
        right = self._encoder.encode([b for _, b in pairs])
        cos = np.sum(left * right, axis=1)
        return [float(min(1.0, max(0.0, (c + 1.0) / 2.0))) for c in cos]


def _hash_dim(name: str, default_dim: int) -> int:
    # a trailing "-<int>" picks the dimension: hash-bi-128 -> 128
    tail = name.rsplit("-", 1)[-1]
    return int(tail) if tail.isdigit() else default_dim


def load_bi_model(name: str, default_dim: int = 384, device: str = "cpu"):
    if name.startswith("hash-"):
        return HashBiEncoder(name, _hash_dim(name, default_dim))
    try:
        from sentence_transformers import SentenceTransformer
    except ImportError as exc:
        raise ModelLoadError(
            f"cannot load {name!r}: sentence-transformers is not installed"
        ) from exc
    try:
        model = SentenceTransformer(name, device=device)
    except Exception as exc:
        raise ModelLoadError(f"cannot load {name!r}: {exc}") from exc
    return _SentenceTransformerBi(name, model)


def load_cross_model(name: str, device: str = "cpu"):
    if name.startswith("hash-"):
        return HashCrossEncoder(name)
    try:
        from sentence_transformers import CrossEncoder
    except ImportError as exc:
        raise ModelLoadError(
            f"cannot load {name!r}: sentence-transformers is not installed"
        ) from exc
    try:
        model = CrossEncoder(name, device=device)
    except Exception as exc:
        raise ModelLoadError(f"cannot load {name!r}: {exc}") from exc
    return _SentenceTransformerCross(name, model)


class _SentenceTransformerBi:
    """Normalized mean-pooled encodings from a pretrained bi-encoder."""

    def __init__(self, name: str, model):
        self.name = name
        self._model = model
        self.dim = int(model.get_sentence_embedding_dimension())

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        vecs = self._model.encode(
            list(texts),
            convert_to_numpy=True,
            normalize_embeddings=True,
            show_progress_bar=False,
        )
        return np.asarray(vecs, dtype=np.float64).reshape(len(texts), self.dim)


class _SentenceTransformerCross:
    def __init__(self, name: str, model):
        self.name = name
        self._model = model

    def predict(self, pairs: Sequence[Tuple[str, str]]) -> List[float]:
        if not pairs:
            return []
        raw = self._model.predict([list(p) for p in pairs],
                                  show_progress_bar=False)
        # pretrained heads may emit logits; clamp to the declared range
        return [float(min(1.0, max(0.0, s))) for s in np.atleast_1d(raw)]

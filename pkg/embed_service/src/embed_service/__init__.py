"""Embedding and pair-scoring service speaking line-delimited JSON.

Serves `embed` and `score_pairs` requests over stdio or HTTP POST /rpc.
Model identifiers starting with "hash-" resolve to deterministic local
encoders; anything else loads through sentence-transformers.
"""

__version__ = "0.1.0"

from .config import ServiceConfig
from .encoders import (
    HashBiEncoder,
    HashCrossEncoder,
    ModelLoadError,
    load_bi_model,
    load_cross_model,
)
from .server import ModelRegistry, handle_request, stdio_loop

__all__ = [
    "ServiceConfig",
    "HashBiEncoder",
    "HashCrossEncoder",
    "ModelLoadError",
    "load_bi_model",
    "load_cross_model",
    "ModelRegistry",
    "handle_request",
    "stdio_loop",
]

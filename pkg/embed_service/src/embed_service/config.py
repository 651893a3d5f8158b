"""Service configuration."""

from dataclasses import dataclass

TRANSPORTS = ("stdio", "http")


@dataclass(frozen=True)
class ServiceConfig:
    """Which models to load and how to listen.

    The three model slots mirror the client's roles: one encoder for
    clustering, one for similarity matching, and a cross model for pair
    scoring. Slots may share an identifier; the model loads once.
    """

    clustering_model: str = "hash-bi"
    similarity_model: str = "hash-bi"
    cross_model: str = "hash-cross"
    device: str = "cpu"
    max_batch: int = 64
    transport: str = "stdio"
    host: str = "127.0.0.1"
    port: int = 8876
    default_dim: int = 384

    def __post_init__(self):
        if self.max_batch < 1:
            raise ValueError("max_batch must be >= 1")
        if self.transport not in TRANSPORTS:
            raise ValueError(f"transport must be one of {TRANSPORTS}")
        if self.default_dim < 8:
            raise ValueError("default_dim must be >= 8")
        for field in ("clustering_model", "similarity_model", "cross_model"):
            if not getattr(self, field):
                raise ValueError(f"{field} must be set")

"""Pipeline configuration: TOML file + LEIBI_* environment overrides.

Unknown keys are rejected and every value is validated against its domain
before any work starts; failures surface as ConfigError carrying the field
path.
"""

import json
import os
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError

ENV_PREFIX = "LEIBI_"

# Env vars claimed by the CLI/test harness, not config fields.
_ENV_SKIP = {"LEIBI_SERVER", "LEIBI_SERVICE_CMD"}


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class CorpusSection(_Section):
    # Either a JSONL corpus (+ optional query-id list and qrels) or a
    # directory of .txt cases with a JSON labels map.
    corpus_file: Optional[str] = None
    queries_file: Optional[str] = None
    qrels_file: Optional[str] = None
    case_dir: Optional[str] = None
    labels_file: Optional[str] = None

    @model_validator(mode="after")
    def _check_source(self):
        jsonl = self.corpus_file is not None
        coliee = self.case_dir is not None or self.labels_file is not None
        if jsonl and coliee:
            raise ValueError("configure either corpus_file or case_dir, not both")
        if coliee and (self.case_dir is None or self.labels_file is None):
            raise ValueError("case_dir and labels_file must be set together")
        return self


class TokenizerSection(_Section):
    lowercase: bool = True
    min_token_length: int = Field(default=2, ge=1)
    remove_stopwords: bool = False
    strip_suppressed_fragments: bool = True


class RankerSection(_Section):
    name: Literal["bm25", "lmjm", "dfr"] = "bm25"
    k1: float = Field(default=1.2, ge=0)
    b: float = Field(default=0.75, ge=0, le=1)
    lam: float = Field(default=0.1, gt=0, le=1)
    c: float = Field(default=1.0, ge=0)


class TermexSection(_Section):
    method: Literal["kli", "plm", "idf", "keyex", "summary-file", "original"] = "kli"
    proportion: float = Field(default=0.4, gt=0, le=1)
    plm_lambda: float = Field(default=0.1, gt=0, le=1)
    plm_max_iters: int = Field(default=50, ge=1)
    plm_tol: float = Field(default=1e-6, gt=0)
    summary_file: Optional[str] = None
    remove_stopwords: bool = True


class KeyexSection(_Section):
    ngram_min: int = Field(default=1, ge=1)
    ngram_max: int = Field(default=2, ge=1)
    top_n_per_paragraph: int = Field(default=20, ge=1)
    diversifier: Literal["mmr", "maxsum", "none"] = "mmr"
    diversity_coeff: float = Field(default=0.6, ge=0, le=1)
    pool_mult: int = Field(default=2, ge=1)
    char_budget: int = Field(default=2000, ge=1)

    @model_validator(mode="after")
    def _check_ngrams(self):
        if self.ngram_min > self.ngram_max:
            raise ValueError("ngram_min must not exceed ngram_max")
        return self


class ProviderSection(_Section):
    kind: Literal["baseline", "file", "external"] = "baseline"
    dim: int = Field(default=384, ge=8)
    vectors_file: Optional[str] = None
    endpoint: Optional[str] = None
    command: List[str] = Field(default_factory=list)
    clustering_model: str = ""
    similarity_model: str = ""
    cross_model: str = ""
    max_batch: int = Field(default=64, ge=1)
    timeout: float = Field(default=30.0, gt=0)

    @model_validator(mode="after")
    def _check_kind(self):
        if self.kind == "file" and not self.vectors_file:
            raise ValueError("file provider needs vectors_file")
        if self.kind == "external" and not (self.endpoint or self.command):
            raise ValueError("external provider needs endpoint or command")
        return self


class RerankSection(_Section):
    enabled: bool = True
    k: int = Field(default=3, ge=1)
    depth: int = Field(default=50, ge=1)
    kmeans_seed: int = 42
    kmeans_max_iters: int = Field(default=100, ge=1)
    kmeans_restarts: int = Field(default=4, ge=1)
    min_sentences_for_clustering: int = Field(default=4, ge=1)


class AggregationSection(_Section):
    alpha: float = Field(default=1.0, ge=0)
    beta: float = Field(default=1.0, ge=0)
    normalize: bool = True
    tune: bool = True
    weight_min: int = Field(default=1, ge=0)
    weight_max: int = Field(default=100, ge=1)

    @model_validator(mode="after")
    def _check_weights(self):
        if self.alpha + self.beta <= 0:
            raise ValueError("alpha + beta must be > 0")
        if self.weight_min > self.weight_max:
            raise ValueError("weight_min must not exceed weight_max")
        return self


class EvalSection(_Section):
    cutoff: int = Field(default=4, ge=1)
    k_min: int = Field(default=1, ge=1)
    k_max: int = Field(default=10, ge=1)

    @model_validator(mode="after")
    def _check_range(self):
        if self.k_min > self.k_max:
            raise ValueError("k_min must not exceed k_max")
        return self


class OutputSection(_Section):
    dir: str = "out"
    tag: str = "precedent"


class PipelineConfig(_Section):
    seed: int = 42
    threads: int = Field(default=0, ge=0)  # 0 = available cores
    corpus: CorpusSection = Field(default_factory=CorpusSection)
    tokenizer: TokenizerSection = Field(default_factory=TokenizerSection)
    ranker: RankerSection = Field(default_factory=RankerSection)
    termex: TermexSection = Field(default_factory=TermexSection)
    keyex: KeyexSection = Field(default_factory=KeyexSection)
    provider: ProviderSection = Field(default_factory=ProviderSection)
    rerank: RerankSection = Field(default_factory=RerankSection)
    aggregation: AggregationSection = Field(default_factory=AggregationSection)
    eval: EvalSection = Field(default_factory=EvalSection)
    output: OutputSection = Field(default_factory=OutputSection)

    def effective_threads(self) -> int:
        if self.threads > 0:
            return self.threads
        return os.cpu_count() or 1


def _parse_env_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def env_overrides(environ=None) -> Dict:
    """Collect LEIBI_* variables into a nested override mapping.

    LEIBI_SECTION__FIELD targets a section field, LEIBI_FIELD a top-level
    one. Values parse as JSON when possible, else stay strings.
    """
    if environ is None:
        environ = os.environ
    overrides: Dict = {}
    for key in sorted(environ):
        if not key.startswith(ENV_PREFIX) or key in _ENV_SKIP:
            continue
        rest = key[len(ENV_PREFIX):]
        value = _parse_env_value(environ[key])
        if "__" in rest:
            section, field_name = rest.split("__", 1)
            overrides.setdefault(section.lower(), {})[field_name.lower()] = value
        else:
            overrides[rest.lower()] = value
    return overrides


def _deep_merge(base: Dict, extra: Dict) -> Dict:
    merged = dict(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _format_validation_error(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        path = ".".join(str(p) for p in err["loc"]) or "<root>"
        parts.append(f"{path}: {err['msg']}")
    return "; ".join(parts)


def config_from_mapping(data: Dict) -> PipelineConfig:
    try:
        return PipelineConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_validation_error(exc)) from exc


def load_config(path=None, environ=None, overrides: Optional[Dict] = None) -> PipelineConfig:
    """Load TOML config (optional), apply env overrides, then explicit
    overrides (e.g. CLI flags), and validate the result."""
    data: Dict = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid TOML: {exc}") from exc
    data = _deep_merge(data, env_overrides(environ))
    if overrides:
        data = _deep_merge(data, overrides)
    return config_from_mapping(data)

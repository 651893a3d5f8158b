"""Request/response models for every pipeline stage.

Unknown keys are rejected on every request model so a typo fails fast
instead of silently running with defaults.
"""

from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field

from ..config import (
    CorpusSection,
    KeyexSection,
    PipelineConfig,
    ProviderSection,
    RankerSection,
    RerankSection,
    TermexSection,
    TokenizerSection,
)


class _Request(BaseModel):
    model_config = ConfigDict(extra="forbid")


class _Response(BaseModel):
    model_config = ConfigDict(extra="forbid")


class IndexRequest(_Request):
    corpus: CorpusSection
    tokenizer: TokenizerSection = Field(default_factory=TokenizerSection)
    exclude_queries: bool = True
    out: str
    resume: bool = False


class IndexResponse(_Response):
    index_file: str
    n_docs: int
    vocabulary_size: int
    total_tokens: int
    avg_doc_length: float
    skipped: bool = False


class ReformulateRequest(_Request):
    corpus: CorpusSection
    index_file: str
    tokenizer: TokenizerSection = Field(default_factory=TokenizerSection)
    termex: TermexSection = Field(default_factory=TermexSection)
    keyex: KeyexSection = Field(default_factory=KeyexSection)
    provider: ProviderSection = Field(default_factory=ProviderSection)
    out: str
    resume: bool = False


class ReformulateResponse(_Response):
    queries_file: str
    n_queries: int
    source: str
    skipped: bool = False


class SearchRequest(_Request):
    index_file: str
    queries_file: str
    ranker: RankerSection = Field(default_factory=RankerSection)
    top_k: int = Field(default=1000, ge=1)
    tag: str = "precedent"
    out: str
    resume: bool = False


class SearchResponse(_Response):
    run_file: str
    n_queries: int
    skipped: bool = False


class RerankRequest(_Request):
    run_file: str
    corpus: CorpusSection
    tokenizer: TokenizerSection = Field(default_factory=TokenizerSection)
    provider: ProviderSection = Field(default_factory=ProviderSection)
    rerank: RerankSection = Field(default_factory=RerankSection)
    threads: int = Field(default=1, ge=1)
    out: str
    resume: bool = False


class RerankResponse(_Response):
    run_file: str
    n_queries: int
    skipped: bool = False


class FuseRequest(_Request):
    lexical_run: str
    neural_run: str
    alpha: float = Field(default=1.0, ge=0)
    beta: float = Field(default=1.0, ge=0)
    normalize: bool = True
    tag: str = "fused"
    out: str
    resume: bool = False


class FuseResponse(_Response):
    run_file: str
    n_queries: int
    skipped: bool = False


class EvaluateRequest(_Request):
    run_file: str
    qrels_file: str
    cutoff: int = Field(default=4, ge=1)
    macro: bool = False
    out: Optional[str] = None


class EvaluateResponse(_Response):
    precision: float
    recall: float
    f1: float
    cutoff: int
    n_queries: int
    macro_precision: Optional[float] = None
    macro_recall: Optional[float] = None
    macro_f1: Optional[float] = None
    report_file: Optional[str] = None


class SweepCutoffRequest(_Request):
    run_file: str
    qrels_file: str
    k_min: int = Field(default=1, ge=1)
    k_max: int = Field(default=10, ge=1)
    out: Optional[str] = None


class CurvePoint(_Response):
    k: int
    precision: float
    recall: float
    f1: float


class SweepCutoffResponse(_Response):
    best_k: int
    best_f1: float
    curve: List[CurvePoint]
    curve_file: Optional[str] = None


class TuneRequest(_Request):
    # Targets: bm25 | lmjm | dfr tune ranker params over an index and a
    # reformulated-query file; proportion tunes the term-selection fraction;
    # fusion tunes aggregation weights over two existing runs.
    target: str
    index_file: Optional[str] = None
    corpus: Optional[CorpusSection] = None
    tokenizer: TokenizerSection = Field(default_factory=TokenizerSection)
    termex: TermexSection = Field(default_factory=TermexSection)
    ranker: RankerSection = Field(default_factory=RankerSection)
    queries_file: Optional[str] = None
    qrels_file: str
    lexical_run: Optional[str] = None
    neural_run: Optional[str] = None
    grid: Dict[str, List[float]] = Field(default_factory=dict)
    objective: Optional[str] = None  # None: f1, or the target's convention
    cutoff: int = Field(default=4, ge=1)
    threads: int = Field(default=1, ge=1)
    normalize: bool = True
    out: Optional[str] = None


class TuneResponse(_Response):
    target: str
    best_assignment: Dict[str, float]
    precision: float
    recall: float
    f1: float
    cutoff: int
    n_trials: int
    n_failed: int
    ledger_file: Optional[str] = None


class PipelineRequest(_Request):
    config: PipelineConfig = Field(default_factory=PipelineConfig)
    resume: bool = False


class StageReport(_Response):
    best_k: int
    precision: float
    recall: float
    f1: float


class PipelineResponse(_Response):
    output_dir: str
    seed: int
    stages: Dict[str, StageReport]
    fusion_alpha: Optional[float] = None
    fusion_beta: Optional[float] = None
    report_file: str
    elapsed_seconds: float
    skipped: bool = False


class SynthRequest(_Request):
    out_dir: str
    n_topics: int = Field(default=20, ge=1)
    min_docs_per_topic: int = Field(default=4, ge=1)
    max_docs_per_topic: int = Field(default=16, ge=1)
    n_noise_docs: int = Field(default=20, ge=0)
    seed: int = 7


class SynthResponse(_Response):
    corpus_file: str
    queries_file: str
    qrels_file: str
    n_documents: int
    n_queries: int


class HealthResponse(_Response):
    status: str
    version: str

"""Query-by-document case-law retrieval.

Pipeline: query reformulation (statistical term extraction or embedding
keyword extraction), tuned lexical ranking (BM25, query-likelihood,
divergence-from-randomness), cluster-driven sentence-embedding re-ranking,
and linear score fusion, with a micro-averaged evaluation harness.
"""

__version__ = "0.1.0"

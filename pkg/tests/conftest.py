import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from precedent.corpus import Corpus, TokenizerConfig, make_document
from precedent.retrieval import build_index
from precedent.synth import SynthSpec, generate_corpus

# min_token_length=1 so single-letter toy tokens survive
TOY_TOKENIZER = TokenizerConfig(min_token_length=1)


@pytest.fixture
def toy_index():
    """Two documents, three terms. All fixture values in the retrieval
    tests were hand-computed against this exact corpus."""
    docs = {
        "d1": make_document("d1", "a a b", TOY_TOKENIZER),
        "d2": make_document("d2", "a c", TOY_TOKENIZER),
    }
    corpus = Corpus(documents=docs)
    return build_index(corpus, TOY_TOKENIZER)


@pytest.fixture(scope="session")
def synth_small():
    """Small planted-relevance corpus shared by the slower tests."""
    spec = SynthSpec(n_topics=6, min_docs_per_topic=3, max_docs_per_topic=6,
                     n_noise_docs=5, seed=11)
    return generate_corpus(spec)

"""Synthetic corpus generator with planted relevance.

Produces a topic-structured collection: each query document shares an
exclusive topic vocabulary with its relevant candidates, so lexical
rankers, embedding similarity, and the evaluation harness all have signal
to find. Everything is a pure function of the seed.
"""

import random
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Tuple

from .corpus import Corpus, Qrels, make_document, write_jsonl_corpus, write_trec_qrels

_CONSONANTS = "bcdfglmnprstvz"
_VOWELS = "aeiou"

# Realistic function words keep stopword handling honest end to end.
_FUNCTION_WORDS = (
    "the of to and in that for with was on as is at by this from or "
    "be are an it not which had were his her their been has have"
).split()


@dataclass(frozen=True)
class SynthSpec:
    n_topics: int = 20
    min_docs_per_topic: int = 4
    max_docs_per_topic: int = 16
    n_noise_docs: int = 20
    n_background_words: int = 140
    topic_words_per_topic: int = 12
    seed: int = 7

    def __post_init__(self):
        if self.n_topics < 1:
            raise ValueError("n_topics must be >= 1")
        if not 1 <= self.min_docs_per_topic <= self.max_docs_per_topic:
            raise ValueError("bad docs-per-topic range")


def _pseudo_word(rng: random.Random, taken: set) -> str:
    while True:
        n_syll = rng.randint(2, 4)
        word = "".join(
            rng.choice(_CONSONANTS) + rng.choice(_VOWELS) for _ in range(n_syll)
        )
        if word not in taken:
            taken.add(word)
            return word


def _zipf_weights(n: int) -> List[float]:
    return [1.0 / (rank + 1) for rank in range(n)]


class _TextSampler:
    def __init__(self, rng: random.Random, spec: SynthSpec):
        self.rng = rng
        taken = set(_FUNCTION_WORDS)
        self.background = [
            _pseudo_word(rng, taken) for _ in range(spec.n_background_words)
        ]
        self.topics = [
            [_pseudo_word(rng, taken) for _ in range(spec.topic_words_per_topic)]
            for _ in range(spec.n_topics)
        ]
        self.bg_weights = _zipf_weights(len(self.background))
        self.fn_weights = _zipf_weights(len(_FUNCTION_WORDS))
        self.topic_weights = _zipf_weights(spec.topic_words_per_topic)

    def _word(self, topic: int) -> str:
        roll = self.rng.random()
        if topic >= 0 and roll < 0.35:
            return self.rng.choices(self.topics[topic], self.topic_weights)[0]
        if roll < 0.65:
            return self.rng.choices(_FUNCTION_WORDS, self.fn_weights)[0]
        return self.rng.choices(self.background, self.bg_weights)[0]

    def sentence(self, topic: int) -> str:
        words = [self._word(topic) for _ in range(self.rng.randint(6, 14))]
        return words[0].capitalize() + " " + " ".join(words[1:]) + "."

    def paragraph(self, topic: int, n_sentences: int, number: int = 0) -> str:
        sentences = [self.sentence(topic) for _ in range(n_sentences)]
        if self.rng.random() < 0.15:
            # Redaction placeholder, as appears in published case law.
            sentences.insert(self.rng.randrange(len(sentences)), "FRAGMENT_SUPPRESSED")
        body = " ".join(sentences)
        return f"[{number}] {body}" if number else body

    def document_text(self, topic: int, n_paragraphs: int, numbered: bool) -> str:
        paragraphs = []
        for i in range(n_paragraphs):
            n_sent = self.rng.randint(2, 5)
            paragraphs.append(
                self.paragraph(topic, n_sent, number=i + 1 if numbered else 0)
            )
        return "\n\n".join(paragraphs)


def generate_corpus(spec: SynthSpec = SynthSpec()) -> Tuple[Corpus, Qrels]:
    """Build the planted-relevance corpus: one query per topic, that topic's
    candidate documents as its relevant set, plus topicless noise documents."""
    rng = random.Random(spec.seed)
    sampler = _TextSampler(rng, spec)

    documents = {}
    judgments: Dict[str, frozenset] = {}
    doc_serial = 0
    for topic in range(spec.n_topics):
        n_docs = rng.randint(spec.min_docs_per_topic, spec.max_docs_per_topic)
        topic_doc_ids = []
        for _ in range(n_docs):
            doc_serial += 1
            doc_id = f"case-{doc_serial:04d}"
            text = sampler.document_text(
                topic, n_paragraphs=rng.randint(2, 4), numbered=rng.random() < 0.5
            )
            documents[doc_id] = make_document(doc_id, text)
            topic_doc_ids.append(doc_id)
        query_id = f"query-{topic + 1:03d}"
        # Queries are long enough that clustering always engages.
        text = sampler.document_text(
            topic, n_paragraphs=rng.randint(4, 6), numbered=rng.random() < 0.5
        )
        documents[query_id] = make_document(query_id, text)
        judgments[query_id] = frozenset(topic_doc_ids)
    for _ in range(spec.n_noise_docs):
        doc_serial += 1
        doc_id = f"case-{doc_serial:04d}"
        text = sampler.document_text(
            -1, n_paragraphs=rng.randint(2, 4), numbered=rng.random() < 0.5
        )
        documents[doc_id] = make_document(doc_id, text)

    query_ids = tuple(sorted(judgments))
    return Corpus(documents=documents, query_ids=query_ids), Qrels(judgments)


def write_corpus_files(corpus: Corpus, qrels: Qrels, out_dir) -> Dict[str, Path]:
    """Write corpus.jsonl, query_ids.txt, and qrels.txt under out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "corpus": out_dir / "corpus.jsonl",
        "queries": out_dir / "query_ids.txt",
        "qrels": out_dir / "qrels.txt",
    }
    write_jsonl_corpus(paths["corpus"], corpus)
    paths["queries"].write_text(
        "\n".join(corpus.query_ids) + "\n", encoding="utf-8"
    )
    write_trec_qrels(paths["qrels"], qrels)
    return paths

"""Tokenization, sentence/paragraph segmentation, corpus loading."""

import json

import pytest

from precedent.corpus import (
    Corpus,
    Qrels,
    TokenizerConfig,
    load_coliee_layout,
    load_jsonl_corpus,
    load_labels_json,
    load_trec_qrels,
    make_document,
    split_paragraphs,
    split_sentences,
    tokenize,
    write_jsonl_corpus,
    write_trec_qrels,
)
from precedent.errors import CorpusError, LabelValidationError


class TestTokenize:
    def test_lowercase_and_length_filter(self):
        cfg = TokenizerConfig()
        assert tokenize("The Court HELD a hearing", cfg) == [
            "the", "court", "held", "hearing"]

    def test_min_length_drops_single_letters(self):
        cfg = TokenizerConfig()
        assert "a" not in tokenize("a judgment", cfg)

    def test_punctuation_split(self):
        cfg = TokenizerConfig(min_token_length=1)
        assert tokenize("self-serving, (allegedly)", cfg) == [
            "self", "serving", "allegedly"]

    def test_underscore_is_a_separator(self):
        cfg = TokenizerConfig(min_token_length=1)
        assert tokenize("FRAGMENT_x", TokenizerConfig(
            min_token_length=1, strip_suppressed_fragments=False)) == ["fragment", "x"]
        assert tokenize("a_b", cfg) == ["a", "b"]

    def test_stopword_removal_is_opt_in(self):
        cfg = TokenizerConfig()
        assert "the" in tokenize("the court", cfg)
        assert "the" not in tokenize("the court", cfg.with_stopwords())

    def test_suppressed_fragments_removed(self):
        cfg = TokenizerConfig()
        toks = tokenize("before FRAGMENT_SUPPRESSED after", cfg)
        assert toks == ["before", "after"]

    def test_numbers_kept(self):
        cfg = TokenizerConfig(min_token_length=1)
        assert tokenize("section 7 applies", cfg) == ["section", "7", "applies"]

    def test_unicode_words(self):
        cfg = TokenizerConfig(min_token_length=1)
        assert tokenize("Québec case", cfg) == ["québec", "case"]


class TestSentences:
    def test_basic_split(self):
        text = "The motion was denied. The appeal followed. It failed."
        assert len(split_sentences(text)) == 3

    def test_abbreviation_not_a_boundary(self):
        text = "Smith v. Jones was cited. The court agreed."
        sents = split_sentences(text)
        assert len(sents) == 2
        assert sents[0].startswith("Smith v. Jones")

    def test_no_terminal_punctuation(self):
        assert split_sentences("no terminal punctuation here") == [
            "no terminal punctuation here"]

    def test_question_and_exclamation(self):
        assert len(split_sentences("Really? Yes. Indeed!")) == 3

    def test_lowercase_continuation_not_split(self):
        # next word lowercase: not a sentence boundary
        sents = split_sentences("found at p. 44 of the record. Next point.")
        assert len(sents) == 2

    def test_empty(self):
        assert split_sentences("") == []


class TestParagraphs:
    def test_blank_line_split(self):
        assert split_paragraphs("one\n\ntwo") == ["one", "two"]

    def test_numbered_markers_start_paragraphs(self):
        text = "[1] First point continues\n[2] Second point"
        paras = split_paragraphs(text)
        assert len(paras) == 2
        assert paras[1].startswith("[2]")

    def test_plain_newline_keeps_paragraph(self):
        assert split_paragraphs("line one\nline two") == ["line one\nline two"]


class TestCorpus:
    def test_document_derivations(self):
        doc = make_document("x", "[1] The court ruled. Appeal denied.\n\n[2] Costs.",
                            TokenizerConfig())
        assert doc.id == "x"
        assert len(doc.paragraphs) == 2
        assert len(doc.sentences) >= 2
        assert "court" in doc.tokens

    def test_duplicate_query_ids_rejected(self):
        doc = make_document("q", "text here", TokenizerConfig())
        with pytest.raises(CorpusError):
            Corpus(documents={"q": doc}, query_ids=("q", "q"))

    def test_query_id_must_exist(self):
        doc = make_document("d", "text here", TokenizerConfig())
        with pytest.raises(CorpusError):
            Corpus(documents={"d": doc}, query_ids=("missing",))

    def test_candidate_ids_excludes_queries(self):
        docs = {i: make_document(i, "some text", TokenizerConfig())
                for i in ("d1", "d2", "q1")}
        corpus = Corpus(documents=docs, query_ids=("q1",))
        assert corpus.candidate_ids() == ["d1", "d2"]
        assert "q1" not in corpus.without_queries().documents


class TestLoaders:
    def test_jsonl_round_trip(self, tmp_path):
        docs = {i: make_document(i, f"body of {i}", TokenizerConfig())
                for i in ("b", "a")}
        corpus = Corpus(documents=docs)
        path = tmp_path / "corpus.jsonl"
        write_jsonl_corpus(path, corpus)
        lines = path.read_text().splitlines()
        # sorted by id on disk
        assert [json.loads(l)["id"] for l in lines] == ["a", "b"]
        loaded = load_jsonl_corpus(path, config=TokenizerConfig())
        assert set(loaded.documents) == {"a", "b"}
        assert loaded.get("a").raw_text == "body of a"

    def test_labels_json(self, tmp_path):
        p = tmp_path / "labels.json"
        p.write_text(json.dumps({"q1.txt": ["d1.txt", "d2.txt"]}))
        qrels = load_labels_json(p)
        assert qrels.judgments["q1"] == frozenset({"d1", "d2"})

    def test_labels_empty_list_rejected(self, tmp_path):
        p = tmp_path / "labels.json"
        p.write_text(json.dumps({"q1.txt": []}))
        with pytest.raises(LabelValidationError):
            load_labels_json(p)

    def test_directory_layout(self, tmp_path):
        d = tmp_path / "cases"
        d.mkdir()
        (d / "q1.txt").write_text("query case text")
        (d / "d1.txt").write_text("candidate one")
        (d / "d2.txt").write_text("candidate two")
        labels = tmp_path / "labels.json"
        labels.write_text(json.dumps({"q1.txt": ["d1.txt"]}))
        corpus, qrels = load_coliee_layout(d, labels, TokenizerConfig())
        assert corpus.query_ids == ("q1",)
        assert set(corpus.documents) == {"q1", "d1", "d2"}
        assert qrels.judgments["q1"] == frozenset({"d1"})

    def test_directory_layout_orphan_label(self, tmp_path):
        d = tmp_path / "cases"
        d.mkdir()
        (d / "q1.txt").write_text("query")
        labels = tmp_path / "labels.json"
        labels.write_text(json.dumps({"q1.txt": ["ghost.txt"]}))
        with pytest.raises(LabelValidationError) as exc:
            load_coliee_layout(d, labels, TokenizerConfig())
        assert "ghost" in str(exc.value)

    def test_trec_qrels_round_trip(self, tmp_path):
        qrels = Qrels(judgments={"q1": frozenset({"d1", "d3"})})
        p = tmp_path / "qrels.txt"
        write_trec_qrels(p, qrels)
        loaded = load_trec_qrels(p)
        assert loaded.judgments == qrels.judgments

    def test_trec_qrels_drops_zero_relevance(self, tmp_path):
        p = tmp_path / "qrels.txt"
        p.write_text("q1 0 d1 1\nq1 0 d2 0\n")
        loaded = load_trec_qrels(p)
        assert loaded.judgments["q1"] == frozenset({"d1"})

    def test_qrels_empty_set_rejected(self):
        with pytest.raises(CorpusError):
            Qrels(judgments={"q1": frozenset()})

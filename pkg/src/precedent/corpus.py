"""Corpus loading, tokenization, and sentence/paragraph segmentation.

Documents come either from a directory of .txt files plus a JSON labels map
(query file -> list of relevant candidate files) or from a JSONL file with
one {"id", "text"} object per line. Loading is deterministic regardless of
filesystem enumeration order.
"""

import json
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Optional, Tuple

from .errors import CorpusError, LabelValidationError
from .stopwords import ENGLISH_STOPWORDS

# Redaction placeholder found in published case law; stripped before any splitting.
SUPPRESSED_FRAGMENT = "FRAGMENT_SUPPRESSED"

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

# Numbered-paragraph marker at start of line, e.g. "[12] The appellant ...".
DEFAULT_PARAGRAPH_MARKER = re.compile(r"\[\d+\]")

_BLANK_LINE_RE = re.compile(r"\n\s*\n")

# Words whose trailing period is an abbreviation, not a sentence end.
_ABBREVIATIONS = frozenset(
    """
    v vs no nos mr mrs ms dr st jr sr prof hon rev fig art para paras
    pp cf al seq ss cc co corp inc ltd dept div sec subsec
    """.split()
)


@dataclass(frozen=True)
class TokenizerConfig:
    lowercase: bool = True
    min_token_length: int = 2
    remove_stopwords: bool = False
    stopword_list: FrozenSet[str] = ENGLISH_STOPWORDS
    strip_suppressed_fragments: bool = True

    def __post_init__(self):
        if self.min_token_length < 1:
            raise ValueError("min_token_length must be >= 1")

    def with_stopwords(self, remove: bool = True) -> "TokenizerConfig":
        return replace(self, remove_stopwords=remove)


DEFAULT_TOKENIZER = TokenizerConfig()


def tokenize(text: str, config: TokenizerConfig = DEFAULT_TOKENIZER) -> List[str]:
    """Split text into alphanumeric tokens and apply the configured filters.

    Token boundaries are runs of non-alphanumeric characters (underscore
    counts as a boundary). Idempotent: tokenizing the joined output again
    yields the same list.
    """
    if config.strip_suppressed_fragments:
        text = text.replace(SUPPRESSED_FRAGMENT, " ")
    if config.lowercase:
        text = text.lower()
    tokens = _TOKEN_RE.findall(text)
    if config.min_token_length > 1:
        tokens = [t for t in tokens if len(t) >= config.min_token_length]
    if config.remove_stopwords:
        sw = config.stopword_list
        tokens = [t for t in tokens if t not in sw]
    return tokens


def _is_abbreviation(before: str) -> bool:
    m = re.search(r"[A-Za-z]+$", before)
    if m is None:
        return False
    word = m.group(0)
    # Single letters are initials ("J. Smith") or statute sections ("s. 91").
    return len(word) == 1 or word.lower() in _ABBREVIATIONS


def split_sentences(text: str) -> List[str]:
    """Split a paragraph into sentences.

    A boundary is a run of .!? followed by whitespace and an uppercase letter
    or digit, unless the word before the punctuation is a known abbreviation
    or a single letter. Text with no boundary comes back as one sentence;
    whitespace-only input yields no sentences.
    """
    stripped = text.strip()
    if not stripped:
        return []
    sentences = []
    start = 0
    for m in re.finditer(r"[.!?]+(?=\s)", stripped):
        end = m.end()
        rest = stripped[end:].lstrip()
        if not rest:
            continue
        nxt = rest[0]
        if not (nxt.isupper() or nxt.isdigit()):
            continue
        if _is_abbreviation(stripped[: m.start()]):
            continue
        piece = stripped[start:end].strip()
        if piece:
            sentences.append(piece)
        start = end
    tail = stripped[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


def split_paragraphs(
    text: str,
    marker: Optional[re.Pattern] = DEFAULT_PARAGRAPH_MARKER,
) -> List[str]:
    """Split text into paragraphs on blank lines and numbered-paragraph markers.

    A line whose first non-split content matches ``marker`` starts a new
    paragraph even without a preceding blank line. Whitespace-only pieces
    are dropped.
    """
    paragraphs = []
    for block in _BLANK_LINE_RE.split(text):
        if marker is None:
            pieces = [block]
        else:
            pieces = []
            current: List[str] = []
            for line in block.splitlines():
                if marker.match(line.lstrip()) and any(s.strip() for s in current):
                    pieces.append("\n".join(current))
                    current = [line]
                else:
                    current.append(line)
            if current:
                pieces.append("\n".join(current))
        for piece in pieces:
            piece = piece.strip()
            if piece:
                paragraphs.append(piece)
    return paragraphs


@dataclass(frozen=True)
class CaseDocument:
    """One case: raw text plus derived token, sentence, and paragraph views."""

    id: str
    raw_text: str
    tokens: Tuple[str, ...]
    sentences: Tuple[str, ...]
    paragraphs: Tuple[str, ...]

    def __post_init__(self):
        if not self.id:
            raise CorpusError("document id must be non-empty")


def make_document(
    doc_id: str,
    text: str,
    config: TokenizerConfig = DEFAULT_TOKENIZER,
    marker: Optional[re.Pattern] = DEFAULT_PARAGRAPH_MARKER,
) -> CaseDocument:
    cleaned = text
    if config.strip_suppressed_fragments:
        cleaned = cleaned.replace(SUPPRESSED_FRAGMENT, " ")
    paragraphs = split_paragraphs(cleaned, marker)
    sentences = [s for p in paragraphs for s in split_sentences(p)]
    return CaseDocument(
        id=doc_id,
        raw_text=text,
        tokens=tuple(tokenize(text, config)),
        sentences=tuple(sentences),
        paragraphs=tuple(paragraphs),
    )


@dataclass
class Corpus:
    """Document store with a designated subset of query documents."""

    documents: Dict[str, CaseDocument]
    query_ids: Tuple[str, ...] = ()

    def __post_init__(self):
        missing = [q for q in self.query_ids if q not in self.documents]
        if missing:
            raise CorpusError(f"query ids not in corpus: {sorted(missing)}")
        if len(set(self.query_ids)) != len(self.query_ids):
            raise CorpusError("duplicate query ids")

    def __len__(self) -> int:
        return len(self.documents)

    def get(self, doc_id: str) -> CaseDocument:
        try:
            return self.documents[doc_id]
        except KeyError:
            raise CorpusError(f"unknown document id: {doc_id}") from None

    def candidate_ids(self) -> List[str]:
        qs = set(self.query_ids)
        return sorted(d for d in self.documents if d not in qs)

    def without_queries(self) -> "Corpus":
        qs = set(self.query_ids)
        return Corpus(
            documents={d: doc for d, doc in self.documents.items() if d not in qs},
            query_ids=(),
        )


@dataclass
class Qrels:
    """Relevance judgments: query id -> non-empty set of relevant doc ids."""

    judgments: Dict[str, FrozenSet[str]]

    def __post_init__(self):
        empty = sorted(q for q, rel in self.judgments.items() if not rel)
        if empty:
            raise CorpusError(f"queries with empty relevant sets: {empty}")

    def relevant(self, query_id: str) -> FrozenSet[str]:
        return self.judgments.get(query_id, frozenset())


def _read_text(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8", errors="replace")
    except OSError as exc:
        raise CorpusError(f"cannot read {path}: {exc}") from exc


def load_labels_json(path) -> Qrels:
    """Read a labels map {query file: [relevant candidate files]} as judgments.

    File names may carry a .txt suffix; ids are the stems.
    """
    path = Path(path)
    if not path.is_file():
        raise CorpusError(f"labels file not found: {path}")
    try:
        raw = json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise CorpusError(f"labels file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise CorpusError(f"labels file {path} must contain an object")
    judgments = {}
    for qname, rel_names in raw.items():
        if not isinstance(rel_names, list):
            raise CorpusError(f"labels for {qname} must be a list")
        qid = Path(qname).stem
        rel = frozenset(Path(r).stem for r in rel_names)
        if not rel:
            raise LabelValidationError(f"query {qid} has an empty relevant list")
        judgments[qid] = rel
    return Qrels(judgments)


def load_coliee_layout(
    case_dir,
    labels_file,
    config: TokenizerConfig = DEFAULT_TOKENIZER,
    marker: Optional[re.Pattern] = DEFAULT_PARAGRAPH_MARKER,
) -> Tuple[Corpus, Qrels]:
    """Load a directory of .txt case files plus a JSON labels map.

    Ids are file stems. Labels referencing files absent from the directory
    are reported (all of them, sorted) via LabelValidationError. Files are
    processed in sorted-name order so the result is independent of
    filesystem enumeration order.
    """
    case_dir = Path(case_dir)
    if not case_dir.is_dir():
        raise CorpusError(f"case directory not found: {case_dir}")
    qrels = load_labels_json(labels_file)

    files = sorted(case_dir.glob("*.txt"), key=lambda p: p.name)
    documents = {}
    for f in files:
        doc_id = f.stem
        if doc_id in documents:
            raise CorpusError(f"duplicate document id: {doc_id}")
        documents[doc_id] = make_document(doc_id, _read_text(f), config, marker)

    have = set(documents)
    orphans = sorted(
        {q for q in qrels.judgments if q not in have}
        | {d for rel in qrels.judgments.values() for d in rel if d not in have}
    )
    if orphans:
        raise LabelValidationError(
            f"labels reference files missing from {case_dir}: {orphans}"
        )
    query_ids = tuple(sorted(qrels.judgments))
    return Corpus(documents=documents, query_ids=query_ids), qrels


def load_jsonl_corpus(
    path,
    query_ids: Iterable[str] = (),
    config: TokenizerConfig = DEFAULT_TOKENIZER,
    marker: Optional[re.Pattern] = DEFAULT_PARAGRAPH_MARKER,
) -> Corpus:
    """Read a JSONL corpus of {"id": ..., "text": ...} records."""
    path = Path(path)
    if not path.is_file():
        raise CorpusError(f"corpus file not found: {path}")
    documents = {}
    for lineno, line in enumerate(_read_text(path).splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
        if not isinstance(rec, dict) or "id" not in rec or "text" not in rec:
            raise CorpusError(f'{path}:{lineno}: record needs "id" and "text"')
        doc_id = str(rec["id"])
        if doc_id in documents:
            raise CorpusError(f"{path}:{lineno}: duplicate document id: {doc_id}")
        documents[doc_id] = make_document(doc_id, str(rec["text"]), config, marker)
    return Corpus(documents=documents, query_ids=tuple(query_ids))


def write_jsonl_corpus(path, corpus: Corpus) -> None:
    lines = [
        json.dumps({"id": d, "text": corpus.documents[d].raw_text}, ensure_ascii=False)
        for d in sorted(corpus.documents)
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_trec_qrels(path) -> Qrels:
    """Read TREC qrels lines ``qid 0 docid rel``; rel=0 lines are dropped."""
    path = Path(path)
    if not path.is_file():
        raise CorpusError(f"qrels file not found: {path}")
    judgments: Dict[str, set] = {}
    for lineno, line in enumerate(_read_text(path).splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 4:
            raise CorpusError(f"{path}:{lineno}: expected 4 fields, got {len(parts)}")
        qid, _, doc_id, rel = parts
        if rel not in ("0", "1"):
            raise CorpusError(f"{path}:{lineno}: relevance must be 0 or 1")
        if rel == "1":
            judgments.setdefault(qid, set()).add(doc_id)
    return Qrels({q: frozenset(rel) for q, rel in judgments.items()})


def write_trec_qrels(path, qrels: Qrels) -> None:
    lines = []
    for qid in sorted(qrels.judgments):
        for doc_id in sorted(qrels.judgments[qid]):
            lines.append(f"{qid} 0 {doc_id} 1")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

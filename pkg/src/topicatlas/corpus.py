"""Bag-of-words corpora over a controllable vocabulary.

Documents are ingested from tagged text sources in a one-line-per-document
format (``doc_id<TAB>source_tag<TAB>token:count ...``).  The vocabulary is
either grown on the fly or frozen, in which case unknown tokens are treated
like stopwords and silently dropped.
"""

from __future__ import annotations

import hashlib
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator

from .errors import (
    DuplicateDocIdError,
    EmptyDocumentError,
    EmptyVocabularyError,
    FrozenVocabularyError,
    MalformedLineError,
)

logger = logging.getLogger(__name__)

# Runs of unicode letters/digits; underscore is a separator like punctuation.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

PSEUDO_SOURCE = "_pseudo"


@dataclass(frozen=True)
class TokenizerConfig:
    min_len: int = 3
    stopwords: frozenset[str] = frozenset()


@dataclass(frozen=True)
class PruneConfig:
    min_df: int = 2
    max_df_fraction: float = 0.5


def tokenize(raw_text: str, config: TokenizerConfig = TokenizerConfig()) -> list[str]:
    """Lowercase and split on non-alphanumeric boundaries.

    Tokens shorter than ``config.min_len`` or contained in the stopword set
    are removed; order is preserved.  May return an empty list.
    """
    tokens = _TOKEN_RE.findall(raw_text.lower())
    return [t for t in tokens if len(t) >= config.min_len and t not in config.stopwords]


class Vocabulary:
    """Ordered token <-> index map with a freeze switch.

    Indices are assigned 0..N-1 in insertion order.  Once frozen, insertion
    raises; parsing against a frozen vocabulary drops unknown tokens instead
    of extending the entry list.
    """

    __slots__ = ("entries", "index", "frozen")

    def __init__(self, entries: Iterable[str] = (), frozen: bool = False):
        self.entries: list[str] = list(entries)
        self.index: dict[str, int] = {t: i for i, t in enumerate(self.entries)}
        if len(self.index) != len(self.entries):
            raise ValueError("vocabulary entries must be unique")
        self.frozen = bool(frozen)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Vocabulary)
            and self.entries == other.entries
            and self.frozen == other.frozen
        )

    def add(self, token: str) -> int:
        """Return the token's index, inserting it if new."""
        idx = self.index.get(token)
        if idx is not None:
            return idx
        if self.frozen:
            raise FrozenVocabularyError(f"cannot add {token!r} to a frozen vocabulary")
        idx = len(self.entries)
        self.entries.append(token)
        self.index[token] = idx
        return idx

    def frozen_copy(self) -> "Vocabulary":
        return Vocabulary(self.entries, frozen=True)

    def is_prefix_of(self, other: "Vocabulary") -> bool:
        """True when this vocabulary's entries open ``other`` index-for-index."""
        if len(self) > len(other):
            return False
        return all(a == b for a, b in zip(self.entries, other.entries))

    def digest(self) -> str:
        h = hashlib.sha256()
        for token in self.entries:
            h.update(token.encode("utf-8"))
            h.update(b"\n")
        return h.hexdigest()


@dataclass
class Document:
    """One bag-of-words document.

    ``counts`` maps vocabulary index -> count.  File-ingested documents carry
    positive integer counts; internally generated ones (parent-topic pseudo
    documents) carry fractional counts.
    """

    doc_id: str
    source: str
    counts: dict[int, float]

    @property
    def total(self) -> float:
        return sum(self.counts.values())

    def project(self, index_map: dict[int, int]) -> "Document | None":
        """Remap token indices through ``index_map``, dropping unmapped ones.

        Returns None when nothing survives.
        """
        counts = {index_map[w]: c for w, c in self.counts.items() if w in index_map}
        if not counts:
            return None
        return Document(self.doc_id, self.source, counts)


@dataclass
class Corpus:
    vocabulary: Vocabulary
    documents: list[Document] = field(default_factory=list)
    source_tags: set[str] = field(default_factory=set)

    def __post_init__(self):
        seen: set[str] = set()
        for doc in self.documents:
            if doc.doc_id in seen:
                raise DuplicateDocIdError(doc.doc_id)
            seen.add(doc.doc_id)
            self.source_tags.add(doc.source)

    def __len__(self) -> int:
        return len(self.documents)

    @property
    def total_tokens(self) -> float:
        return sum(doc.total for doc in self.documents)


@dataclass
class MergeResult:
    corpus: Corpus
    dropped_doc_ids: list[str]

    @property
    def dropped_documents(self) -> int:
        return len(self.dropped_doc_ids)


def _iter_lines(stream: IO[str] | Iterable[str]) -> Iterator[tuple[int, str]]:
    for line_no, line in enumerate(stream, start=1):
        yield line_no, line.rstrip("\n")


def _parse_line(line_no: int, line: str) -> tuple[str, str, list[tuple[str, int]]]:
    parts = line.split("\t")
    if len(parts) != 3:
        raise MalformedLineError(line_no, f"expected 3 tab-separated fields, got {len(parts)}")
    doc_id, source, body = parts
    if not doc_id:
        raise MalformedLineError(line_no, "empty document id")
    if not source:
        raise MalformedLineError(line_no, "empty source tag")
    pairs: list[tuple[str, int]] = []
    for chunk in body.split():
        token, sep, count_text = chunk.rpartition(":")
        if not sep or not token or ":" in token:
            raise MalformedLineError(line_no, f"bad token:count entry {chunk!r}")
        try:
            count = int(count_text)
        except ValueError:
            raise MalformedLineError(line_no, f"bad count in {chunk!r}") from None
        if count < 1:
            raise MalformedLineError(line_no, f"count must be positive in {chunk!r}")
        pairs.append((token, count))
    if not pairs:
        raise MalformedLineError(line_no, "document has no tokens")
    return doc_id, source, pairs


def parse_corpus_file(stream: IO[str] | Iterable[str], vocabulary: Vocabulary | None = None) -> Corpus:
    """Parse a corpus file, one document per line.

    With no vocabulary (or an unfrozen one) unseen tokens are appended as
    they appear.  With a frozen vocabulary unseen tokens are dropped; a
    document losing every token raises EmptyDocumentError.
    """
    vocab = vocabulary if vocabulary is not None else Vocabulary()
    documents: list[Document] = []
    seen_ids: set[str] = set()
    dropped_tokens = 0
    for line_no, line in _iter_lines(stream):
        if not line.strip():
            continue
        doc_id, source, pairs = _parse_line(line_no, line)
        if doc_id in seen_ids:
            raise DuplicateDocIdError(doc_id)
        seen_ids.add(doc_id)
        counts: dict[int, float] = {}
        for token, count in pairs:
            if vocab.frozen:
                idx = vocab.index.get(token)
                if idx is None:
                    dropped_tokens += count
                    continue
            else:
                idx = vocab.add(token)
            counts[idx] = counts.get(idx, 0) + count
        if not counts:
            raise EmptyDocumentError(doc_id)
        documents.append(Document(doc_id, source, counts))
    if dropped_tokens:
        logger.info("parse: dropped %d out-of-vocabulary token occurrences", dropped_tokens)
    return Corpus(vocab, documents)


def write_corpus_file(corpus: Corpus, stream: IO[str]) -> None:
    """Inverse of parse_corpus_file; counts must be integral."""
    for doc in corpus.documents:
        cells = []
        for idx in sorted(doc.counts):
            count = doc.counts[idx]
            if count != int(count):
                raise ValueError(f"document {doc.doc_id!r} has a fractional count; not serializable")
            cells.append(f"{corpus.vocabulary.entries[idx]}:{int(count)}")
        stream.write(f"{doc.doc_id}\t{doc.source}\t{' '.join(cells)}\n")


def build_vocabulary(stream: IO[str] | Iterable[str], prune: PruneConfig = PruneConfig()) -> Vocabulary:
    """Build a pruned vocabulary from a corpus stream.

    Keeps tokens with document frequency >= ``min_df`` and document-frequency
    fraction <= ``max_df_fraction``; entries are ordered by descending total
    count with lexicographic tie-breaks, so the result is reproducible.
    """
    df: Counter[str] = Counter()
    totals: Counter[str] = Counter()
    n_docs = 0
    seen_ids: set[str] = set()
    for line_no, line in _iter_lines(stream):
        if not line.strip():
            continue
        doc_id, _source, pairs = _parse_line(line_no, line)
        if doc_id in seen_ids:
            raise DuplicateDocIdError(doc_id)
        seen_ids.add(doc_id)
        n_docs += 1
        doc_tokens = set()
        for token, count in pairs:
            totals[token] += count
            doc_tokens.add(token)
        df.update(doc_tokens)
    kept = [
        t
        for t in totals
        if df[t] >= prune.min_df and (df[t] / n_docs) <= prune.max_df_fraction
    ]
    if not kept:
        raise EmptyVocabularyError("no tokens survive pruning")
    kept.sort(key=lambda t: (-totals[t], t))
    return Vocabulary(kept)


def project_corpus(corpus: Corpus, vocabulary: Vocabulary) -> MergeResult:
    """Reproject a corpus onto ``vocabulary``, dropping unknown tokens.

    Documents that lose every token are excluded (their ids are reported) --
    zero-length documents would break EM normalization downstream.
    """
    index_map: dict[int, int] = {}
    for old_idx, token in enumerate(corpus.vocabulary.entries):
        new_idx = vocabulary.index.get(token)
        if new_idx is not None:
            index_map[old_idx] = new_idx
    documents: list[Document] = []
    dropped: list[str] = []
    for doc in corpus.documents:
        projected = doc.project(index_map)
        if projected is None:
            dropped.append(doc.doc_id)
        else:
            documents.append(projected)
    if dropped:
        logger.info("projection dropped %d empty documents", len(dropped))
    return MergeResult(Corpus(vocabulary, documents), dropped)


def merge_corpora(initial: Corpus, added: Corpus, vocab_policy: str = "union") -> MergeResult:
    """Merge two corpora under a vocabulary policy.

    ``union`` keeps the initial vocabulary as an index prefix and appends
    added-only tokens.  ``keep_initial`` freezes the initial vocabulary and
    reprojects the added documents onto it, dropping out-of-vocabulary tokens
    (stopword treatment); documents emptied by the projection are excluded
    and reported.
    """
    if vocab_policy not in ("union", "keep_initial"):
        raise ValueError(f"unknown vocab_policy {vocab_policy!r}")
    initial_ids = {d.doc_id for d in initial.documents}
    for doc in added.documents:
        if doc.doc_id in initial_ids:
            raise DuplicateDocIdError(doc.doc_id)

    if vocab_policy == "union":
        merged_vocab = Vocabulary(initial.vocabulary.entries)
        for token in added.vocabulary.entries:
            merged_vocab.add(token)
    else:
        merged_vocab = initial.vocabulary.frozen_copy()

    projected = project_corpus(added, merged_vocab)
    documents = list(initial.documents) + list(projected.corpus.documents)
    merged = Corpus(merged_vocab, documents)
    merged.source_tags |= initial.source_tags | added.source_tags
    return MergeResult(merged, projected.dropped_doc_ids)


def subcorpus(corpus: Corpus, start: int, stop: int) -> Corpus:
    """Slice of a corpus sharing the same vocabulary object."""
    return Corpus(corpus.vocabulary, corpus.documents[start:stop])

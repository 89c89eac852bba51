"""Exploratory search over a fitted hierarchy.

Three pieces: a search index of per-document topic distributions, fold-in
inference that places free-text queries into the same topic space, and the
knowledge map (topics, subtopics, document cells) rendered by the UI.
Documents are matched to queries by Hellinger distance over the equal-weight
concatenation of their level-1 and level-2 distributions.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .artm import top_words
from .corpus import Corpus, Document, TokenizerConfig, tokenize
from .errors import CorruptBundleError, QueryEmptyError, VocabularyMismatchError
from .hierarchy import HierarchicalModel
from .modelstore import (
    hierarchy_from_parts,
    hierarchy_parts,
    model_fingerprint,
    read_container,
    write_container,
)

logger = logging.getLogger(__name__)

DEFAULT_EDGE_TAU = 0.05
DEFAULT_DOCS_PER_CELL = 10
DEFAULT_FOLD_IN_ITERATIONS = 20
SNIPPET_CHARS = 120

# Treemap cells need strictly positive areas even for zero-weight edges.
MIN_CELL_WEIGHT = 1e-9

ROOT_ID = "root"


@dataclass
class DocumentProfile:
    doc_id: str
    source: str
    level1_dist: np.ndarray
    level2_dist: np.ndarray
    title_snippet: str


@dataclass
class SearchIndex:
    """Per-document topic distributions, column-aligned across both levels."""

    profiles: list[DocumentProfile]
    model_ref: str
    level1_matrix: np.ndarray       # T1 x N, column d = profile d's level-1 dist
    level2_matrix: np.ndarray       # T2 x N
    _position: dict[str, int] = field(init=False, repr=False)
    _sqrt_half: np.ndarray | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self._position = {}
        for pos, profile in enumerate(self.profiles):
            if profile.doc_id in self._position:
                raise ValueError(f"duplicate doc_id in index: {profile.doc_id!r}")
            self._position[profile.doc_id] = pos
        for name, matrix in (("level1", self.level1_matrix), ("level2", self.level2_matrix)):
            if matrix.shape[1] != len(self.profiles):
                raise ValueError(f"{name} matrix has {matrix.shape[1]} columns for {len(self.profiles)} profiles")
            sums = matrix.sum(axis=0)
            if len(self.profiles) and float(np.abs(sums - 1.0).max()) > 1e-6:
                raise ValueError(f"{name} distributions do not sum to 1")

    @property
    def n_documents(self) -> int:
        return len(self.profiles)

    def position(self, doc_id: str) -> int | None:
        return self._position.get(doc_id)

    def sqrt_half(self) -> np.ndarray:
        """sqrt of the stacked half-weight distributions, cached (the index is immutable)."""
        if self._sqrt_half is None:
            stacked = np.vstack([self.level1_matrix, self.level2_matrix]) / 2.0
            self._sqrt_half = np.sqrt(stacked)
        return self._sqrt_half


@dataclass
class MapNode:
    kind: str                       # root | topic | subtopic | document | more
    id: str
    label: str
    weight: float
    children: list["MapNode"] = field(default_factory=list)


@dataclass(frozen=True)
class SearchHit:
    doc_id: str
    score: float
    rank: int
    matched_topics: tuple[int, ...]


@dataclass
class ServiceBundle:
    """Everything the HTTP service needs, immutable once loaded."""

    model: HierarchicalModel
    index: SearchIndex
    meta: dict
    digest: str = ""                # container checksum, set when saved/loaded


def make_snippet(doc: Document, corpus: Corpus, limit: int = SNIPPET_CHARS) -> str:
    """Display snippet for a bag-of-words document: most frequent tokens first."""
    order = sorted(doc.counts.items(), key=lambda wc: (-wc[1], wc[0]))
    words = [corpus.vocabulary.entries[w] for w, _ in order]
    return " ".join(words)[:limit]


def _fold_level(word_topic: np.ndarray, counts: dict[int, float], iterations: int) -> np.ndarray:
    """EM over a single pseudo theta column with the word distributions frozen."""
    w_idx = np.fromiter(counts.keys(), dtype=np.int64, count=len(counts))
    weights = np.fromiter(counts.values(), dtype=np.float64, count=len(counts))
    if w_idx.size and int(w_idx.max()) >= word_topic.shape[0]:
        raise VocabularyMismatchError("query references words outside the model vocabulary")
    phi = word_topic[w_idx, :]
    usable = phi.sum(axis=1) > 0.0
    if not usable.any():
        raise QueryEmptyError("every query term has zero probability under the model")
    phi = phi[usable]
    weights = weights[usable]
    n_topics = word_topic.shape[1]
    theta = np.full(n_topics, 1.0 / n_topics)
    for _ in range(iterations):
        denom = phi @ theta
        z = np.divide(weights, denom, out=np.zeros_like(weights), where=denom > 0.0)
        n_t = theta * (phi.T @ z)
        total = n_t.sum()
        if total <= 0.0:
            break
        theta = n_t / total
    return theta


def fold_in(
    model: HierarchicalModel,
    query_doc: Document,
    iterations: int = DEFAULT_FOLD_IN_ITERATIONS,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Estimate the query's theta column at each level with the model frozen.

    The query document must already be indexed against the model vocabulary.
    Inference starts uniform and is fully deterministic; ``seed`` is reserved
    for future stochastic initialization schemes.
    """
    del seed
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    if not query_doc.counts:
        raise QueryEmptyError("query has no terms after projection")
    level1 = _fold_level(model.parent_level.word_topic, query_doc.counts, iterations)
    level2 = _fold_level(model.child_level.word_topic, query_doc.counts, iterations)
    return level1, level2


def build_index(model: HierarchicalModel, corpus: Corpus) -> SearchIndex:
    """One profile per real corpus document, reading the trained theta columns.

    The child level's pseudo-document columns (one per parent topic) are
    excluded; the corpus must be the one the model was fitted on.
    """
    n_real = len(corpus.documents)
    if model.parent_level.n_docs != n_real:
        raise VocabularyMismatchError(
            f"model was fitted on {model.parent_level.n_docs} documents, corpus has {n_real}"
        )
    if model.child_level.n_docs != n_real + model.n_parents:
        raise VocabularyMismatchError("child level does not carry one pseudo-document per parent topic")
    if model.parent_level.doc_ids is not None:
        expected = [doc.doc_id for doc in corpus.documents]
        if model.parent_level.doc_ids != expected:
            raise VocabularyMismatchError("corpus document ids do not match the model's training order")
    level1_matrix = model.parent_level.topic_doc.copy()
    level2_matrix = model.child_level.topic_doc[:, :n_real].copy()
    profiles = [
        DocumentProfile(
            doc_id=doc.doc_id,
            source=doc.source,
            level1_dist=level1_matrix[:, pos],
            level2_dist=level2_matrix[:, pos],
            title_snippet=make_snippet(doc, corpus),
        )
        for pos, doc in enumerate(corpus.documents)
    ]
    return SearchIndex(profiles, model_fingerprint(model), level1_matrix, level2_matrix)


def query_document(model: HierarchicalModel, query_text: str) -> Document:
    """Tokenize free text and project it onto the model vocabulary."""
    vocabulary = model.parent_level.vocabulary
    counts: dict[int, float] = {}
    for token in tokenize(query_text, TokenizerConfig()):
        w = vocabulary.index.get(token)
        if w is not None:
            counts[w] = counts.get(w, 0.0) + 1.0
    if not counts:
        raise QueryEmptyError("no query term is in the model vocabulary")
    return Document("_query", "_query", counts)


def search(
    index: SearchIndex,
    model: HierarchicalModel,
    query_text: str,
    top_n: int = 10,
    iterations: int = DEFAULT_FOLD_IN_ITERATIONS,
) -> list[SearchHit]:
    """Rank documents by topical closeness to a free-text query.

    score(d) = 1 - H(q, d) with H the Hellinger distance between the
    equal-weight concatenations of the level-1 and level-2 distributions;
    ties are broken by ascending doc_id.
    """
    if top_n < 1:
        raise ValueError("top_n must be >= 1")
    q1, q2 = fold_in(model, query_document(model, query_text), iterations)
    sqrt_query = np.sqrt(np.concatenate([q1, q2]) / 2.0)
    # H^2 = 1 - sum(sqrt(u_q * u_d)) for stochastic vectors, so one matvec
    # against the cached sqrt matrix scores every document.
    affinity = sqrt_query @ index.sqrt_half()
    h = np.sqrt(np.maximum(0.0, 1.0 - affinity))
    scores = 1.0 - h
    order = sorted(range(index.n_documents), key=lambda pos: (-scores[pos], index.profiles[pos].doc_id))
    matched = tuple(int(t) for t in np.argsort(-q2, kind="stable")[:3])
    return [
        SearchHit(index.profiles[pos].doc_id, float(scores[pos]), rank, matched)
        for rank, pos in enumerate(order[:top_n], start=1)
    ]


def _subject_argmax(matrix: np.ndarray, subject_indices: np.ndarray) -> np.ndarray:
    """Per column, the subject row with the highest value (ties: lowest index)."""
    return subject_indices[np.argmax(matrix[subject_indices, :], axis=0)]


def assign_documents(model: HierarchicalModel, edge_tau: float = DEFAULT_EDGE_TAU) -> tuple[np.ndarray, np.ndarray]:
    """Map every real document to one (parent, child) subject topic pair.

    The child is the document's argmax subject level-2 topic.  The parent is
    its argmax level-1 topic among parents the child connects to at
    ``edge_tau``; a child with no such parent attaches to its strongest
    parent overall, so every document lands somewhere.
    """
    n_real = model.parent_level.n_docs
    theta1 = model.parent_level.topic_doc
    theta2 = model.child_level.topic_doc[:, :n_real]
    subject1 = model.parent_level.subject_indices
    subject2 = model.child_level.subject_indices
    if subject1.size == 0 or subject2.size == 0:
        raise ValueError("the map needs at least one subject topic per level")
    child = _subject_argmax(theta2, subject2)

    passing = model.child_given_parent >= edge_tau          # T2 x T1
    passing[:, ~model.parent_level.subject_mask] = False
    doc_passing = passing[child, :]                         # N x T1
    has_passing = doc_passing.any(axis=1)
    masked = np.where(doc_passing, theta1.T, -np.inf)
    parent = np.empty(n_real, dtype=np.int64)
    parent[has_passing] = np.argmax(masked[has_passing], axis=1)

    psi_subject = np.where(model.parent_level.subject_mask[None, :], model.child_given_parent, -np.inf)
    fallback = np.argmax(psi_subject, axis=1)               # per child topic
    parent[~has_passing] = fallback[child[~has_passing]]
    return parent, child


def subtopic_members(
    model: HierarchicalModel,
    index: SearchIndex,
    parent: int,
    child: int,
    edge_tau: float = DEFAULT_EDGE_TAU,
) -> list[int]:
    """Profile positions assigned to one (parent, child) cell, best first.

    Ordered by descending level-2 weight, ties by ascending doc_id; this is
    the full listing an offset/limit page is cut from.
    """
    parents, children = assign_documents(model, edge_tau)
    members = np.flatnonzero((parents == parent) & (children == child))
    theta2 = index.level2_matrix[child, :]
    return sorted(map(int, members), key=lambda pos: (-theta2[pos], index.profiles[pos].doc_id))


def topic_label(model_level, topic_index: int, n_words: int = 3) -> str:
    return ", ".join(w for w, _ in top_words(model_level, topic_index, n_words))


def build_map(
    model: HierarchicalModel,
    index: SearchIndex,
    edge_tau: float = DEFAULT_EDGE_TAU,
    docs_per_cell: int = DEFAULT_DOCS_PER_CELL,
) -> MapNode:
    """The knowledge map: subject topics, their subtopics, document cells.

    Topic cell weights are token mass shares; subtopic weights are the
    child-given-parent edge weights; document weights are the document's
    level-2 probability.  A subtopic holding more than ``docs_per_cell``
    documents gets a trailing ``more`` node carrying the hidden count.
    """
    if docs_per_cell < 1:
        raise ValueError("docs_per_cell must be >= 1")
    subject1 = model.parent_level.subject_indices
    subject2 = model.child_level.subject_indices
    parents, children = assign_documents(model, edge_tau)

    # (parent, child) -> member profile positions, already page-ordered
    members: dict[tuple[int, int], list[int]] = {}
    theta2 = index.level2_matrix
    for t in subject1:
        for a in subject2:
            cell = np.flatnonzero((parents == t) & (children == a))
            if cell.size:
                members[(int(t), int(a))] = sorted(
                    map(int, cell), key=lambda pos: (-theta2[a, pos], index.profiles[pos].doc_id)
                )

    passing = model.child_given_parent >= edge_tau
    passing[:, ~model.parent_level.subject_mask] = False
    psi_subject = np.where(model.parent_level.subject_mask[None, :], model.child_given_parent, -np.inf)
    fallback = np.argmax(psi_subject, axis=1)
    orphan = ~passing[:, subject1].any(axis=1)              # per child topic

    mass = model.parent_level.topic_mass[subject1]
    total_mass = float(mass.sum())
    shares = mass / total_mass if total_mass > 0 else np.full(mass.size, 1.0 / mass.size)

    root = MapNode(kind="root", id=ROOT_ID, label="All topics", weight=1.0)
    for share, t in zip(shares, subject1):
        t = int(t)
        topic_node = MapNode(
            kind="topic",
            id=f"t{t}",
            label=topic_label(model.parent_level, t),
            weight=max(float(share), MIN_CELL_WEIGHT),
        )
        for a in subject2:
            a = int(a)
            attached = bool(passing[a, t]) or (bool(orphan[a]) and int(fallback[a]) == t)
            if not attached:
                continue
            sub_node = MapNode(
                kind="subtopic",
                id=f"t{t}-s{a}",
                label=topic_label(model.child_level, a),
                weight=max(float(model.child_given_parent[a, t]), MIN_CELL_WEIGHT),
            )
            cell = members.get((t, a), [])
            for pos in cell[:docs_per_cell]:
                profile = index.profiles[pos]
                sub_node.children.append(
                    MapNode(
                        kind="document",
                        id=f"d-{profile.doc_id}",
                        label=profile.title_snippet,
                        weight=max(float(theta2[a, pos]), MIN_CELL_WEIGHT),
                    )
                )
            hidden = len(cell) - docs_per_cell
            if hidden > 0:
                sub_node.children.append(
                    MapNode(kind="more", id=f"t{t}-s{a}-more", label=f"+{hidden} more", weight=float(hidden))
                )
            topic_node.children.append(sub_node)
        root.children.append(topic_node)
    return root


BUNDLE_KIND = "bundle"


def save_bundle(bundle: ServiceBundle, path: str | Path) -> str:
    """Write model + index + metadata as one container; returns its digest.

    Contains no timestamps or environment state, so identical bundles are
    byte-identical files.
    """
    parts, arrays = hierarchy_parts(bundle.model)
    header = {
        "kind": BUNDLE_KIND,
        **parts,
        "model_ref": bundle.index.model_ref,
        "meta": bundle.meta,
        "profiles": {
            "doc_ids": [p.doc_id for p in bundle.index.profiles],
            "sources": [p.source for p in bundle.index.profiles],
            "snippets": [p.title_snippet for p in bundle.index.profiles],
        },
    }
    arrays["index.level1"] = bundle.index.level1_matrix
    arrays["index.level2"] = bundle.index.level2_matrix
    with open(path, "wb") as fh:
        digest = write_container(fh, header, arrays)
    bundle.digest = digest
    return digest


def load_bundle(path: str | Path) -> ServiceBundle:
    with open(path, "rb") as fh:
        header, arrays, digest = read_container(fh)
    if header.get("kind") != BUNDLE_KIND:
        raise CorruptBundleError(f"expected a service bundle, found {header.get('kind')!r}")
    model = hierarchy_from_parts(header, arrays)
    level1_matrix = arrays["index.level1"]
    level2_matrix = arrays["index.level2"]
    names = header["profiles"]
    profiles = [
        DocumentProfile(
            doc_id=doc_id,
            source=source,
            level1_dist=level1_matrix[:, pos],
            level2_dist=level2_matrix[:, pos],
            title_snippet=snippet,
        )
        for pos, (doc_id, source, snippet) in enumerate(
            zip(names["doc_ids"], names["sources"], names["snippets"])
        )
    ]
    index = SearchIndex(profiles, header["model_ref"], level1_matrix, level2_matrix)
    if index.model_ref != model_fingerprint(model):
        raise CorruptBundleError("bundle index does not reference the bundled model")
    return ServiceBundle(model, index, dict(header["meta"]), digest)


def build_bundle(model: HierarchicalModel, corpus: Corpus, meta: dict | None = None) -> ServiceBundle:
    """Index a corpus against its model and attach serving defaults."""
    base = {
        "edge_tau": DEFAULT_EDGE_TAU,
        "docs_per_cell": DEFAULT_DOCS_PER_CELL,
        "fold_in_iterations": DEFAULT_FOLD_IN_ITERATIONS,
    }
    if meta:
        base.update(meta)
    return ServiceBundle(model, build_index(model, corpus), base)

"""Two-level hierarchical topic model.

The parent level is a flat model; the child level is trained on the corpus
plus one *pseudo document* per parent topic (token counts proportional to the
parent's word distribution scaled by its token mass).  The child-given-parent
edge matrix is read off the child model's document columns for those pseudo
documents, making it a by-product of training.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from typing import IO, Sequence

import numpy as np

from .artm import (
    FitSchedule,
    RegularizerConfig,
    TopicConfig,
    TopicModel,
    fit,
    init_model,
)
from .corpus import PSEUDO_SOURCE, Corpus, Document
from .errors import NotFittedError

logger = logging.getLogger(__name__)

DEFAULT_TAU_GRID = tuple(i / 100 for i in range(101))


@dataclass(frozen=True)
class HierarchyConfig:
    level1: TopicConfig = TopicConfig(n_subject=20, n_background=1, seed=0)
    level2: TopicConfig = TopicConfig(n_subject=60, n_background=1, seed=1)
    pseudo_doc_weight: float = 1.0
    reg1: RegularizerConfig = RegularizerConfig()
    reg2: RegularizerConfig = RegularizerConfig()
    schedule: FitSchedule = FitSchedule()

    def __post_init__(self):
        if self.pseudo_doc_weight <= 0:
            raise ValueError("pseudo_doc_weight must be positive")


@dataclass
class HierarchicalModel:
    parent_level: TopicModel    # T1 topics; document columns = real corpus
    child_level: TopicModel     # T2 topics; document columns = real corpus + pseudo docs
    child_given_parent: np.ndarray  # T2 x T1, column t = p(child | parent t)

    @property
    def n_parents(self) -> int:
        return self.child_given_parent.shape[1]

    @property
    def n_children(self) -> int:
        return self.child_given_parent.shape[0]


@dataclass(frozen=True)
class Edge:
    parent: int
    child: int
    weight: float


def build_pseudo_documents(level1: TopicModel, pseudo_doc_weight: float = 1.0) -> list[Document]:
    """One fractional-count document per parent topic.

    Token counts are ``pseudo_doc_weight * n_t * p(w|t)``, so each pseudo
    document carries the parent's expected token mass spread over its word
    distribution.
    """
    if pseudo_doc_weight <= 0:
        raise ValueError("pseudo_doc_weight must be positive")
    if float(level1.topic_mass.sum()) <= 0:
        raise NotFittedError("parent level has no token mass; fit it before building pseudo documents")
    docs = []
    for t in range(level1.n_topics):
        scaled = pseudo_doc_weight * level1.topic_mass[t] * level1.word_topic[:, t]
        counts = {int(w): float(c) for w, c in enumerate(scaled) if c > 0.0}
        docs.append(Document(f"_parent_{t}", PSEUDO_SOURCE, counts))
    return docs


def with_pseudo_documents(corpus: Corpus, pseudo_docs: Sequence[Document]) -> Corpus:
    """Corpus with pseudo documents appended after the real ones."""
    return Corpus(corpus.vocabulary, list(corpus.documents) + list(pseudo_docs))


def fit_child_level(
    level1: TopicModel,
    corpus: Corpus,
    config: HierarchyConfig,
    warm_from: TopicModel | None = None,
) -> HierarchicalModel:
    """Train the child level against a fitted parent level.

    The child model is fitted on the corpus extended with the parent pseudo
    documents; the edge matrix column for parent t is the child model's
    document column for pseudo document t (a probability vector by
    construction).
    """
    pseudo_docs = build_pseudo_documents(level1, config.pseudo_doc_weight)
    combined = with_pseudo_documents(corpus, pseudo_docs)
    child = init_model(corpus.vocabulary, config.level2, warm_start=warm_from)
    child, trace = fit(child, combined, config.schedule, config.reg2)
    logger.info("child level fitted in %d passes (perplexity %.2f)", len(trace), trace[-1])
    n_real = len(corpus.documents)
    child_given_parent = child.topic_doc[:, n_real:].copy()
    return HierarchicalModel(level1, child, child_given_parent)


def train_hierarchy(corpus: Corpus, config: HierarchyConfig) -> HierarchicalModel:
    """Fit both levels from scratch on one corpus."""
    level1 = init_model(corpus.vocabulary, config.level1)
    level1, trace = fit(level1, corpus, config.schedule, config.reg1)
    logger.info("parent level fitted in %d passes (perplexity %.2f)", len(trace), trace[-1])
    return fit_child_level(level1, corpus, config)


def edge_list(model: HierarchicalModel, subject_only: bool = True) -> list[Edge]:
    """All (child, parent) pairs ordered by descending weight.

    With ``subject_only`` the pairs are restricted to subject x subject
    topics, which is what the edge metrics and the knowledge map use;
    background topics absorb the common lexicon and carry no topical edges.
    Ties are broken by ascending (parent, child) index.
    """
    parents = (
        model.parent_level.subject_indices
        if subject_only
        else np.arange(model.n_parents)
    )
    children = (
        model.child_level.subject_indices
        if subject_only
        else np.arange(model.n_children)
    )
    edges = [
        Edge(int(t), int(a), float(model.child_given_parent[a, t]))
        for t in parents
        for a in children
    ]
    edges.sort(key=lambda e: (-e.weight, e.parent, e.child))
    return edges


def count_edges(edges: Sequence[Edge], tau_grid: Sequence[float] = DEFAULT_TAU_GRID) -> list[tuple[float, int]]:
    """Number of edges with weight >= tau, for each grid point."""
    if any(b < a for a, b in zip(tau_grid, list(tau_grid)[1:])):
        raise ValueError("tau grid must be sorted ascending")
    weights = np.sort(np.array([e.weight for e in edges]))
    return [
        (float(tau), int(weights.size - np.searchsorted(weights, tau, side="left")))
        for tau in tau_grid
    ]


def write_edge_curve(curve: Sequence[tuple[float, int]], stream: IO[str]) -> None:
    writer = csv.writer(stream)
    writer.writerow(["tau", "n_tau"])
    for tau, n in curve:
        writer.writerow([f"{tau:g}", n])

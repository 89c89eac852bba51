"""Model quality metrics and the strategy ablation report.

Topic quality is the mean pairwise cosine similarity between a topic's top
words' embeddings (scaled x100); hierarchy edge quality ranks subject edges
by their weight and scores the ranking with average precision at k, with
relevance derived from cross-topic top-word embedding similarity thresholded
at a percentile.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import IO, Iterable, Sequence

import numpy as np

from .aggregate import AggregationResult, Strategy, aggregate
from .artm import SUBJECT, TopicModel, top_words
from .corpus import Corpus
from .errors import (
    DimensionMismatchError,
    MalformedEmbeddingLineError,
    TooFewEmbeddedWordsError,
    TopicAtlasError,
)
from .hierarchy import (
    DEFAULT_TAU_GRID,
    Edge,
    HierarchicalModel,
    HierarchyConfig,
    count_edges,
    edge_list,
)

logger = logging.getLogger(__name__)

DEFAULT_K_LIST = (100, 200, 500, 1000)
DEFAULT_RELEVANCE_PERCENTILE = 75.0

# Table row labels for each strategy, in the report's display order.
STRATEGY_LABELS = {
    "D-I-": "No init, no fixed vocab (Baseline)",
    "D+I-": "No init, fixed vocab",
    "D-I+": "Init, no fixed vocab",
    "D-I+-": "Iterative init, no fixed vocab",
    "D+I+-": "Iterative init, fixed vocab",
    "D+I+": "Init, fixed vocab (Proposed)",
}


@dataclass
class EmbeddingTable:
    dim: int
    vectors: dict[str, np.ndarray]
    duplicates: int = 0

    def __contains__(self, token: str) -> bool:
        return token in self.vectors


@dataclass
class EdgeJudgment:
    edge: Edge
    similarity: float
    relevant: bool | None = None


@dataclass
class StrategyRow:
    strategy: str
    label: str
    status: str = "ok"                    # "ok" | "failed"
    error: str | None = None
    level1_quality: float | None = None
    level2_quality: float | None = None
    ap_at: dict[int, float] = field(default_factory=dict)
    edge_curve: list[tuple[float, int]] = field(default_factory=list)
    judged_edges: int = 0
    unjudgeable_edges: int = 0
    dropped_documents: int = 0


@dataclass
class AblationReport:
    rows: list[StrategyRow]
    k_list: tuple[int, ...]
    provenance: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "rows": [
                {
                    "strategy": r.strategy,
                    "label": r.label,
                    "status": r.status,
                    "error": r.error,
                    "level1_quality": r.level1_quality,
                    "level2_quality": r.level2_quality,
                    "ap_at": {str(k): v for k, v in r.ap_at.items()},
                    "edge_curve": [[tau, n] for tau, n in r.edge_curve],
                    "judged_edges": r.judged_edges,
                    "unjudgeable_edges": r.unjudgeable_edges,
                    "dropped_documents": r.dropped_documents,
                }
                for r in self.rows
            ],
            "k_list": list(self.k_list),
            "provenance": self.provenance,
        }

    def to_text(self) -> str:
        """Aligned table: topic quality per level, then AP at each cutoff."""
        label_width = max([len(r.label) for r in self.rows] + [len("Strategy")])
        headers = ["level 1", "level 2"] + [f"AP@{k}" for k in self.k_list]
        lines = [
            f"{'':{label_width}}  {'Average topic quality':^17}  {'Hierarchy edges quality':^{9 * len(self.k_list)}}",
            f"{'Strategy':{label_width}}  " + "  ".join(f"{h:>7}" for h in headers),
        ]
        for r in self.rows:
            if r.status != "ok":
                lines.append(f"{r.label:{label_width}}  failed: {r.error}")
                continue
            cells = [f"{r.level1_quality:7.1f}", f"{r.level2_quality:7.1f}"]
            cells += [f"{r.ap_at[k]:7.1f}" for k in self.k_list]
            lines.append(f"{r.label:{label_width}}  " + "  ".join(cells))
        return "\n".join(lines) + "\n"


def load_embeddings(stream: IO[str] | Iterable[str]) -> EmbeddingTable:
    """Parse a text embedding table: header ``count dim``, then token rows."""
    lines = iter(enumerate(stream, start=1))
    try:
        line_no, header = next(lines)
    except StopIteration:
        raise MalformedEmbeddingLineError(0, "empty stream") from None
    parts = header.split()
    if len(parts) != 2:
        raise MalformedEmbeddingLineError(line_no, "header must be 'count dim'")
    try:
        _count, dim = int(parts[0]), int(parts[1])
    except ValueError:
        raise MalformedEmbeddingLineError(line_no, "header must be 'count dim'") from None
    if dim < 1:
        raise MalformedEmbeddingLineError(line_no, "dimension must be positive")
    vectors: dict[str, np.ndarray] = {}
    duplicates = 0
    for line_no, line in lines:
        if not line.strip():
            continue
        cells = line.split()
        if len(cells) != dim + 1:
            raise DimensionMismatchError(
                f"line {line_no}: expected {dim} values, got {len(cells) - 1}"
            )
        token = cells[0]
        try:
            vec = np.array([float(x) for x in cells[1:]], dtype=np.float64)
        except ValueError:
            raise MalformedEmbeddingLineError(line_no, "non-numeric vector entry") from None
        if not np.all(np.isfinite(vec)):
            raise MalformedEmbeddingLineError(line_no, "vector has NaN/Inf entries")
        if token in vectors:
            duplicates += 1
        vectors[token] = vec
    if duplicates:
        logger.info("embedding table had %d duplicate tokens (last wins)", duplicates)
    return EmbeddingTable(dim, vectors, duplicates)


def _embedded(words: Sequence[str], table: EmbeddingTable) -> list[np.ndarray]:
    """Unit-normalized vectors for the words present in the table."""
    out = []
    for w in words:
        vec = table.vectors.get(w)
        if vec is None:
            continue
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            continue
        out.append(vec / norm)
    return out


def topic_coherence(words: Sequence[str], table: EmbeddingTable) -> float:
    """Mean pairwise cosine similarity of the words' embeddings, x100.

    Words missing from the table are skipped; fewer than two embeddable
    words is an error.
    """
    unit = _embedded(words, table)
    if len(unit) < 2:
        raise TooFewEmbeddedWordsError(f"only {len(unit)} of {len(words)} words have embeddings")
    total = 0.0
    n_pairs = 0
    for i in range(len(unit)):
        for j in range(i + 1, len(unit)):
            total += float(np.dot(unit[i], unit[j]))
            n_pairs += 1
    return 100.0 * total / n_pairs


def level_quality(level: TopicModel, table: EmbeddingTable, k: int = 10) -> float:
    """Mean coherence over subject topics (background topics excluded)."""
    scores = []
    failures = 0
    for t in range(level.n_topics):
        if level.roles[t] != SUBJECT:
            continue
        words = [w for w, _ in top_words(level, t, k)]
        try:
            scores.append(topic_coherence(words, table))
        except TooFewEmbeddedWordsError:
            failures += 1
    if not scores:
        raise TooFewEmbeddedWordsError("no subject topic had enough embedded top words")
    if failures:
        logger.info("level_quality skipped %d topics with too few embedded words", failures)
    return float(np.mean(scores))


def edge_relevance(
    edge: Edge,
    level1: TopicModel,
    level2: TopicModel,
    table: EmbeddingTable,
    k: int = 10,
) -> EdgeJudgment:
    """Graded relevance: mean cosine over all (parent word, child word) pairs."""
    if level1.roles[edge.parent] != SUBJECT or level2.roles[edge.child] != SUBJECT:
        raise ValueError("edge relevance is defined for subject topics only")
    parent_vecs = _embedded([w for w, _ in top_words(level1, edge.parent, k)], table)
    child_vecs = _embedded([w for w, _ in top_words(level2, edge.child, k)], table)
    if not parent_vecs or not child_vecs:
        raise TooFewEmbeddedWordsError("an edge endpoint has no embedded top words")
    sims = np.array(parent_vecs) @ np.array(child_vecs).T
    return EdgeJudgment(edge, float(sims.mean()))


def binarize_judgments(
    judgments: Sequence[EdgeJudgment], percentile: float = DEFAULT_RELEVANCE_PERCENTILE
) -> list[EdgeJudgment]:
    """Mark judgments at or above the nearest-rank similarity percentile as relevant."""
    if not judgments:
        raise ValueError("no judgments to binarize")
    if not 0 <= percentile <= 100:
        raise ValueError("percentile must be in [0, 100]")
    sims = sorted(j.similarity for j in judgments)
    rank = min(int(percentile / 100.0 * len(sims)) + 1, len(sims))
    threshold = sims[rank - 1]
    return [replace(j, relevant=j.similarity >= threshold) for j in judgments]


def average_precision_at_k(ranked_relevance: Sequence[bool], k: int) -> float:
    """AP@k x100 over a ranked relevance list.

    Precision is accumulated at each relevant rank up to k and normalized by
    min(k, R) where R counts relevant items in the whole list; 0 when the
    list has no relevant items.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    total_relevant = sum(bool(r) for r in ranked_relevance)
    if total_relevant == 0:
        return 0.0
    hits = 0
    score = 0.0
    for i, rel in enumerate(ranked_relevance[:k], start=1):
        if rel:
            hits += 1
            score += hits / i
    return 100.0 * score / min(k, total_relevant)


def judge_edges(
    model: HierarchicalModel,
    table: EmbeddingTable,
    k: int = 10,
    percentile: float = DEFAULT_RELEVANCE_PERCENTILE,
) -> tuple[list[EdgeJudgment], int]:
    """Judge all subject edges in ranking order; unjudgeable ones are dropped.

    Returns the binarized judgments (still in descending-weight order) and
    the number of edges that could not be judged.
    """
    edges = edge_list(model, subject_only=True)
    judgments = []
    unjudgeable = 0
    for edge in edges:
        try:
            judgments.append(edge_relevance(edge, model.parent_level, model.child_level, table, k))
        except TooFewEmbeddedWordsError:
            unjudgeable += 1
    if not judgments:
        raise TooFewEmbeddedWordsError("no edge could be judged against the embedding table")
    return binarize_judgments(judgments, percentile), unjudgeable


def ablation_report(
    initial_corpus: Corpus,
    initial_model: HierarchicalModel,
    added_corpus: Corpus,
    strategies: Sequence[str],
    table: EmbeddingTable,
    config: HierarchyConfig,
    k_list: Sequence[int] = DEFAULT_K_LIST,
    tau_grid: Sequence[float] = DEFAULT_TAU_GRID,
    percentile: float = DEFAULT_RELEVANCE_PERCENTILE,
    top_k_words: int = 10,
) -> AblationReport:
    """Run every strategy and score the resulting hierarchies.

    A strategy that raises is reported as a failed row rather than silently
    dropped.  Results are deterministic given the config seeds.
    """
    rows = []
    for name in strategies:
        strategy = Strategy.from_name(name)
        label = STRATEGY_LABELS[strategy.name]
        try:
            result: AggregationResult = aggregate(
                initial_model, initial_corpus, added_corpus, strategy, config
            )
            model = result.model
            judged, unjudgeable = judge_edges(model, table, top_k_words, percentile)
            ranked = [bool(j.relevant) for j in judged]
            row = StrategyRow(
                strategy=strategy.name,
                label=label,
                level1_quality=level_quality(model.parent_level, table, top_k_words),
                level2_quality=level_quality(model.child_level, table, top_k_words),
                ap_at={k: average_precision_at_k(ranked, k) for k in k_list},
                edge_curve=count_edges(edge_list(model, subject_only=True), tau_grid),
                judged_edges=len(judged),
                unjudgeable_edges=unjudgeable,
                dropped_documents=result.dropped_documents,
            )
        except TopicAtlasError as exc:
            logger.error("strategy %s failed: %s", strategy.name, exc)
            row = StrategyRow(strategy=strategy.name, label=label, status="failed", error=str(exc))
        rows.append(row)
    provenance = {
        "relevance_percentile": percentile,
        "top_k_words": top_k_words,
        "embedding_dim": table.dim,
        "seeds": {"level1": config.level1.seed, "level2": config.level2.seed},
    }
    return AblationReport(rows, tuple(k_list), provenance)

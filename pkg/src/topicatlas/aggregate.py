"""Merging an added collection into an existing hierarchical model.

Six strategies ablate two switches: whether the vocabulary is frozen at merge
time (added-only words dropped like stopwords) and how the merged model is
initialized (from scratch, warm-started from the initial model, or merged
iteratively in batches of gradually increasing size with each round
warm-started from the previous one).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .artm import fit, init_model
from .corpus import Corpus, merge_corpora, project_corpus, subcorpus
from .errors import ScheduleEmptyError
from .hierarchy import HierarchicalModel, HierarchyConfig, fit_child_level, train_hierarchy

logger = logging.getLogger(__name__)

INIT_NONE = "none"
INIT_WARM = "warm"
INIT_ITERATIVE = "iterative"

# CLI-facing strategy names and friendly aliases.
STRATEGY_NAMES = ("D-I-", "D+I-", "D-I+", "D+I+", "D+I+-", "D-I+-")
STRATEGY_ALIASES = {"baseline": "D-I-", "proposed": "D+I+"}


@dataclass(frozen=True)
class Strategy:
    fixed_vocabulary: bool = False
    initialization: str = INIT_NONE
    batch_cap_fraction: float = 0.10

    def __post_init__(self):
        if self.initialization not in (INIT_NONE, INIT_WARM, INIT_ITERATIVE):
            raise ValueError(f"unknown initialization {self.initialization!r}")
        if not 0 < self.batch_cap_fraction <= 1:
            raise ValueError("batch_cap_fraction must be in (0, 1]")

    @classmethod
    def from_name(cls, name: str, batch_cap_fraction: float = 0.10) -> "Strategy":
        canonical = STRATEGY_ALIASES.get(name.lower(), name)
        if canonical not in STRATEGY_NAMES:
            raise ValueError(f"unknown strategy {name!r}; expected one of {STRATEGY_NAMES}")
        fixed = canonical.startswith("D+")
        tail = canonical[2:]
        init = {"I-": INIT_NONE, "I+": INIT_WARM, "I+-": INIT_ITERATIVE}[tail]
        return cls(fixed, init, batch_cap_fraction)

    @property
    def name(self) -> str:
        tail = {INIT_NONE: "I-", INIT_WARM: "I+", INIT_ITERATIVE: "I+-"}[self.initialization]
        return ("D+" if self.fixed_vocabulary else "D-") + tail


@dataclass
class AggregationResult:
    model: HierarchicalModel
    merged_corpus: Corpus
    dropped_documents: int
    batch_sizes: list[int] = field(default_factory=list)
    provenance: dict = field(default_factory=dict)


def batch_schedule(initial_size: int, added_size: int, cap: float) -> list[int]:
    """Greedy maximal batch sizes under the growth cap.

    Each batch is at most ``cap`` times the merged collection size after the
    previous batch (at least 1 document); the last batch is clipped to the
    remaining documents.
    """
    if initial_size < 1:
        raise ValueError("initial_size must be positive")
    if added_size < 1:
        raise ScheduleEmptyError("added collection is empty")
    if not 0 < cap <= 1:
        raise ValueError("cap must be in (0, 1]")
    sizes: list[int] = []
    merged = initial_size
    remaining = added_size
    while remaining > 0:
        batch = min(max(1, int(cap * merged)), remaining)
        sizes.append(batch)
        merged += batch
        remaining -= batch
    return sizes


def _fit_merged(
    merged: Corpus,
    config: HierarchyConfig,
    warm_model: HierarchicalModel | None,
) -> HierarchicalModel:
    if warm_model is None:
        return train_hierarchy(merged, config)
    level1 = init_model(merged.vocabulary, config.level1, warm_start=warm_model.parent_level)
    level1, _ = fit(level1, merged, config.schedule, config.reg1)
    return fit_child_level(level1, merged, config, warm_from=warm_model.child_level)


def aggregate(
    initial_model: HierarchicalModel,
    initial_corpus: Corpus,
    added_corpus: Corpus,
    strategy: Strategy,
    config: HierarchyConfig,
) -> AggregationResult:
    """Fold ``added_corpus`` into the model of ``initial_corpus``.

    Topic counts never change: the merged model has exactly the configured
    shape for every strategy, and added-collection structure is absorbed by
    re-estimating existing topics.
    """
    if not added_corpus.documents:
        raise ScheduleEmptyError("added collection is empty")
    policy = "keep_initial" if strategy.fixed_vocabulary else "union"
    dropped = 0
    batch_sizes: list[int] = []

    if strategy.initialization == INIT_ITERATIVE:
        pending = added_corpus
        if strategy.fixed_vocabulary:
            projected = project_corpus(added_corpus, initial_corpus.vocabulary.frozen_copy())
            dropped = projected.dropped_documents
            pending = projected.corpus
            if not pending.documents:
                raise ScheduleEmptyError("every added document was dropped by vocabulary projection")
        batch_sizes = batch_schedule(
            len(initial_corpus.documents), len(pending.documents), strategy.batch_cap_fraction
        )
        current_corpus = initial_corpus
        current_model = initial_model
        offset = 0
        for i, size in enumerate(batch_sizes):
            batch = subcorpus(pending, offset, offset + size)
            offset += size
            step = merge_corpora(current_corpus, batch, policy)
            dropped += step.dropped_documents
            current_corpus = step.corpus
            current_model = _fit_merged(current_corpus, config, current_model)
            logger.info("iteration %d/%d: merged %d documents", i + 1, len(batch_sizes), size)
        merged_corpus, model = current_corpus, current_model
    else:
        merge = merge_corpora(initial_corpus, added_corpus, policy)
        dropped = merge.dropped_documents
        merged_corpus = merge.corpus
        warm = initial_model if strategy.initialization == INIT_WARM else None
        model = _fit_merged(merged_corpus, config, warm)

    provenance = {
        "strategy": strategy.name,
        "batch_cap_fraction": strategy.batch_cap_fraction,
        "seeds": {"level1": config.level1.seed, "level2": config.level2.seed},
        "dropped_documents": dropped,
        "batch_sizes": batch_sizes,
        "config": {
            "level1": {"n_subject": config.level1.n_subject, "n_background": config.level1.n_background},
            "level2": {"n_subject": config.level2.n_subject, "n_background": config.level2.n_background},
            "pseudo_doc_weight": config.pseudo_doc_weight,
            "max_passes": config.schedule.max_passes,
            "rel_tol": config.schedule.rel_tol,
        },
    }
    return AggregationResult(model, merged_corpus, dropped, batch_sizes, provenance)

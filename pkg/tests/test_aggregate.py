"""Collection aggregation: batch schedule, strategy grid, warm starting."""

import numpy as np
import pytest

from generators import random_corpus
from topicatlas.aggregate import (
    INIT_ITERATIVE,
    INIT_NONE,
    INIT_WARM,
    STRATEGY_ALIASES,
    STRATEGY_NAMES,
    Strategy,
    aggregate,
    batch_schedule,
)
from topicatlas.artm import FitSchedule, RegularizerConfig, TopicConfig
from topicatlas.corpus import Corpus, Document, Vocabulary, subcorpus
from topicatlas.errors import ScheduleEmptyError
from topicatlas.hierarchy import HierarchyConfig, train_hierarchy


def _config(seed=0, max_passes=5):
    return HierarchyConfig(
        level1=TopicConfig(3, 1, seed=seed),
        level2=TopicConfig(6, 1, seed=seed + 1),
        reg1=RegularizerConfig(smooth_beta=0.1, smooth_alpha=0.1),
        reg2=RegularizerConfig(smooth_beta=0.1, smooth_alpha=0.1),
        schedule=FitSchedule(max_passes=max_passes, rel_tol=0.0),
    )


def _collections(seed=0):
    initial = random_corpus(n_docs=40, vocab_size=50, seed=seed, min_len=10, max_len=20, source="old")
    extra = random_corpus(n_docs=25, vocab_size=65, seed=seed + 100, min_len=10, max_len=20, source="new")
    added = Corpus(extra.vocabulary, [
        Document(f"a{d.doc_id}", d.source, dict(d.counts)) for d in extra.documents
    ])
    return initial, added


class TestBatchSchedule:
    def test_worked_example(self):
        # 3000 initial, 1000 added, cap 0.10: 300, 330, 363, then the 7 left over
        assert batch_schedule(3000, 1000, 0.10) == [300, 330, 363, 7]

    def test_single_batch_when_cap_allows_everything(self):
        assert batch_schedule(100, 30, 0.5) == [30]

    def test_floor_keeps_batches_under_cap(self):
        initial, added, cap = 57, 40, 0.13
        merged = initial
        for size in batch_schedule(initial, added, cap):
            assert size <= cap * merged or size == 1  # min-1 floor may override tiny caps
            merged += size

    def test_sum_equals_added(self):
        rng = np.random.default_rng(47)
        for _ in range(200):
            initial = int(rng.integers(1, 5000))
            added = int(rng.integers(1, 2000))
            cap = float(rng.uniform(0.01, 1.0))
            assert sum(batch_schedule(initial, added, cap)) == added

    def test_minimum_batch_is_one(self):
        schedule = batch_schedule(3, 4, 0.1)  # cap * merged < 1 at the start
        assert schedule[0] == 1
        assert sum(schedule) == 4

    def test_validation(self):
        with pytest.raises(ScheduleEmptyError):
            batch_schedule(100, 0, 0.1)
        with pytest.raises(ValueError):
            batch_schedule(100, 10, 0.0)
        with pytest.raises(ValueError):
            batch_schedule(100, 10, 1.5)
        with pytest.raises(ValueError):
            batch_schedule(0, 10, 0.1)


class TestStrategy:
    def test_grid_names_round_trip(self):
        for name in STRATEGY_NAMES:
            strategy = Strategy.from_name(name)
            assert strategy.name == name

    def test_aliases(self):
        assert Strategy.from_name("baseline").name == "D-I-"
        assert Strategy.from_name("proposed").name == "D+I+"
        assert STRATEGY_ALIASES == {"baseline": "D-I-", "proposed": "D+I+"}

    def test_fields(self):
        s = Strategy.from_name("D+I+-")
        assert s.fixed_vocabulary is True
        assert s.initialization == INIT_ITERATIVE
        assert Strategy.from_name("D-I-").initialization == INIT_NONE
        assert Strategy.from_name("D-I+").initialization == INIT_WARM
        assert Strategy.from_name("D-I+").fixed_vocabulary is False

    def test_unknown_name_rejected(self):
        for bad in ["D*I+", "D+", "I+", "", "d+i+"]:
            with pytest.raises(ValueError):
                Strategy.from_name(bad)


class TestAggregate:
    def test_fixed_vocabulary_is_untouched(self):
        initial, added = _collections(seed=51)
        config = _config(seed=51)
        model = train_hierarchy(initial, config)
        result = aggregate(model, initial, added, Strategy.from_name("D+I+"), config)
        assert result.merged_corpus.vocabulary.entries == initial.vocabulary.entries
        assert result.model.parent_level.vocabulary.entries == initial.vocabulary.entries

    def test_union_vocabulary_grows_with_prefix(self):
        initial, added = _collections(seed=53)
        config = _config(seed=53)
        model = train_hierarchy(initial, config)
        result = aggregate(model, initial, added, Strategy.from_name("D-I+"), config)
        merged_vocab = result.merged_corpus.vocabulary
        assert initial.vocabulary.is_prefix_of(merged_vocab)
        assert len(merged_vocab) > len(initial.vocabulary)

    def test_merged_corpus_order_and_model_coverage(self):
        initial, added = _collections(seed=59)
        config = _config(seed=59)
        model = train_hierarchy(initial, config)
        result = aggregate(model, initial, added, Strategy.from_name("D-I-"), config)
        ids = [d.doc_id for d in result.merged_corpus.documents]
        assert ids[: len(initial)] == [d.doc_id for d in initial.documents]
        assert ids[len(initial):] == [d.doc_id for d in added.documents]
        assert result.model.parent_level.n_docs == len(result.merged_corpus.documents)

    def test_topic_shape_is_preserved_by_every_strategy(self):
        initial, added = _collections(seed=61)
        config = _config(seed=61, max_passes=3)
        model = train_hierarchy(initial, config)
        for name in STRATEGY_NAMES:
            result = aggregate(model, initial, added, Strategy.from_name(name), config)
            assert result.model.n_parents == model.n_parents
            assert result.model.n_children == model.n_children

    def test_iterative_batches_follow_schedule(self):
        initial, added = _collections(seed=67)
        config = _config(seed=67, max_passes=3)
        model = train_hierarchy(initial, config)
        strategy = Strategy.from_name("D-I+-")
        result = aggregate(model, initial, added, strategy, config)
        assert result.batch_sizes == batch_schedule(len(initial), len(added), strategy.batch_cap_fraction)
        assert sum(result.batch_sizes) == len(added)

    def test_iterative_fixed_vocabulary_projects_then_schedules(self):
        initial, added = _collections(seed=71)
        config = _config(seed=71, max_passes=3)
        model = train_hierarchy(initial, config)
        strategy = Strategy.from_name("D+I+-")
        result = aggregate(model, initial, added, strategy, config)
        kept = len(added) - result.dropped_documents
        assert sum(result.batch_sizes) == kept
        assert len(result.merged_corpus.documents) == len(initial) + kept

    def test_non_iterative_strategies_record_no_batches(self):
        """batch_sizes belongs to iterative runs only; one-shot merges leave it empty."""
        initial, added = _collections(seed=73)
        config = _config(seed=73, max_passes=3)
        model = train_hierarchy(initial, config)
        result = aggregate(model, initial, added, Strategy.from_name("D+I-"), config)
        assert result.batch_sizes == []

    def test_dropped_documents_counted_under_fixed_vocabulary(self):
        initial, _ = _collections(seed=79)
        config = _config(seed=79, max_passes=3)
        model = train_hierarchy(initial, config)
        in_vocab = Document("known0", "new", {0: 3.0, 1: 2.0})
        added = Corpus(Vocabulary(initial.vocabulary.entries + ["zzzalien"]),
                       [in_vocab, Document("alien1", "new", {len(initial.vocabulary): 4.0})])
        result = aggregate(model, initial, added, Strategy.from_name("D+I+"), config)
        assert result.dropped_documents == 1
        assert [d.doc_id for d in result.merged_corpus.documents][-1] == "known0"
        result_union = aggregate(model, initial, added, Strategy.from_name("D-I+"), config)
        assert result_union.dropped_documents == 0

    def test_iterative_with_everything_dropped_raises(self):
        """Iterative fixed-vocabulary runs have no batches left to schedule
        when projection drops every added document."""
        initial, _ = _collections(seed=83)
        config = _config(seed=83, max_passes=3)
        model = train_hierarchy(initial, config)
        added = Corpus(Vocabulary(["zzzalien"]), [Document("alien0", "new", {0: 5.0})])
        with pytest.raises(ScheduleEmptyError):
            aggregate(model, initial, added, Strategy.from_name("D+I+-"), config)

    def test_single_batch_with_everything_dropped_still_trains(self):
        """A one-shot fixed-vocabulary merge records the drops and trains on
        what remains (the initial documents)."""
        initial, _ = _collections(seed=83)
        config = _config(seed=83, max_passes=3)
        model = train_hierarchy(initial, config)
        added = Corpus(Vocabulary(["zzzalien"]), [Document("alien0", "new", {0: 5.0})])
        result = aggregate(model, initial, added, Strategy.from_name("D+I+"), config)
        assert result.dropped_documents == 1
        assert len(result.merged_corpus.documents) == len(initial.documents)

    def test_empty_added_collection_raises(self):
        initial, _ = _collections(seed=89)
        config = _config(seed=89, max_passes=3)
        model = train_hierarchy(initial, config)
        with pytest.raises(ScheduleEmptyError):
            aggregate(model, initial, Corpus(initial.vocabulary, []), Strategy.from_name("D-I-"), config)

    def test_provenance_records_the_run(self):
        initial, added = _collections(seed=97)
        config = _config(seed=97, max_passes=3)
        model = train_hierarchy(initial, config)
        result = aggregate(model, initial, added, Strategy.from_name("D+I+"), config)
        prov = result.provenance
        assert prov["strategy"] == "D+I+"
        assert prov["seeds"] == {"level1": config.level1.seed, "level2": config.level2.seed}
        assert prov["dropped_documents"] == result.dropped_documents
        assert prov["config"]["level1"]["n_subject"] == config.level1.n_subject
        assert prov["config"]["max_passes"] == config.schedule.max_passes

    def test_warm_start_reuses_initial_structure(self):
        # re-aggregating a few extra documents with warm start keeps the
        # parent topics near the initial model, while a differently seeded
        # cold rebuild lands on an unrelated factorization
        initial, added = _collections(seed=101)
        config = _config(seed=101, max_passes=2)
        model = train_hierarchy(initial, config)
        tiny = subcorpus(added, 0, 3)
        result = aggregate(model, initial, tiny, Strategy.from_name("D-I+"), config)
        W = model.parent_level.n_words
        drift = np.abs(result.model.parent_level.word_topic[:W] - model.parent_level.word_topic).max()
        cold = aggregate(model, initial, tiny, Strategy.from_name("D-I-"), _config(seed=424242, max_passes=2))
        cold_drift = np.abs(cold.model.parent_level.word_topic[:W] - model.parent_level.word_topic).max()
        assert drift < 0.05
        assert drift < cold_drift

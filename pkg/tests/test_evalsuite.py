"""Embedding-based topic quality, edge judging, ranking metrics, ablation."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from generators import random_corpus, two_collections
from topicatlas.artm import (
    BACKGROUND,
    SUBJECT,
    FitSchedule,
    RegularizerConfig,
    TopicConfig,
    TopicModel,
)
from topicatlas.corpus import Corpus, Document, Vocabulary
from topicatlas.errors import (
    DimensionMismatchError,
    MalformedEmbeddingLineError,
    TooFewEmbeddedWordsError,
)
from topicatlas.evalsuite import (
    DEFAULT_RELEVANCE_PERCENTILE,
    STRATEGY_LABELS,
    EdgeJudgment,
    ablation_report,
    average_precision_at_k,
    binarize_judgments,
    edge_relevance,
    judge_edges,
    load_embeddings,
    level_quality,
    topic_coherence,
)
from topicatlas.hierarchy import Edge, HierarchicalModel, HierarchyConfig, train_hierarchy


def _table(vectors: dict[str, np.ndarray]):
    dim = len(next(iter(vectors.values())))
    lines = [f"{len(vectors)} {dim}"]
    for word, vec in vectors.items():
        lines.append(word + " " + " ".join(repr(float(x)) for x in vec))
    return load_embeddings(lines)


class TestLoadEmbeddings:
    def test_header_and_vectors(self):
        table = load_embeddings(["2 3", "cat 1 0 0", "dog 0 1 0"])
        assert table.dim == 3
        assert set(table.vectors) == {"cat", "dog"}
        np.testing.assert_allclose(table.vectors["cat"], [1, 0, 0])
        assert "cat" in table and "bird" not in table

    def test_duplicates_last_one_wins(self):
        table = load_embeddings(["3 2", "cat 1 0", "dog 0 1", "cat 0 1"])
        np.testing.assert_allclose(table.vectors["cat"], [0, 1])
        assert table.duplicates == 1

    @pytest.mark.parametrize(
        "lines",
        [
            [],                                  # empty stream
            ["not a header", "cat 1 0"],         # malformed header
            ["1 2", "cat 1 x"],                  # non-numeric
            ["1 2", "cat 1 nan"],                # non-finite
            ["1 2", "cat 1 inf"],                # non-finite
            ["1 0", "cat"],                      # zero dimension
        ],
    )
    def test_malformed_input(self, lines):
        with pytest.raises(MalformedEmbeddingLineError):
            load_embeddings(lines)

    @pytest.mark.parametrize("lines", [["1 2", "cat 1"], ["1 2", "cat 1 2 3"]])
    def test_wrong_cell_count_rejected(self, lines):
        with pytest.raises(DimensionMismatchError):
            load_embeddings(lines)


class TestTopicCoherence:
    def test_pairwise_cosine_oracle(self):
        # three unit vectors with pairwise cosines 0.5, 0.2, 0.8 -> mean 0.5 -> 50.0
        gram = np.array([[1.0, 0.5, 0.2], [0.5, 1.0, 0.8], [0.2, 0.8, 1.0]])
        vecs = np.linalg.cholesky(gram)
        table = _table({"aaa": vecs[0], "bbb": vecs[1], "ccc": vecs[2]})
        assert topic_coherence(["aaa", "bbb", "ccc"], table) == pytest.approx(50.0, abs=1e-9)

    def test_identical_vectors_give_100(self):
        table = _table({"aaa": np.array([0.6, 0.8]), "bbb": np.array([0.6, 0.8])})
        assert topic_coherence(["aaa", "bbb"], table) == pytest.approx(100.0, abs=1e-9)

    def test_orthogonal_vectors_give_0(self):
        table = _table({"aaa": np.array([1.0, 0.0]), "bbb": np.array([0.0, 1.0])})
        assert topic_coherence(["aaa", "bbb"], table) == pytest.approx(0.0, abs=1e-12)

    def test_length_invariance(self):
        # cosine ignores magnitudes: scaling a vector must not change the score
        table_a = _table({"aaa": np.array([1.0, 1.0]), "bbb": np.array([1.0, 0.0])})
        table_b = _table({"aaa": np.array([10.0, 10.0]), "bbb": np.array([0.25, 0.0])})
        words = ["aaa", "bbb"]
        assert topic_coherence(words, table_a) == pytest.approx(topic_coherence(words, table_b))

    def test_missing_words_skipped(self):
        table = _table({"aaa": np.array([1.0, 0.0]), "bbb": np.array([1.0, 0.0])})
        assert topic_coherence(["aaa", "bbb", "zzz"], table) == pytest.approx(100.0)

    def test_fewer_than_two_embeddable_words(self):
        table = _table({"aaa": np.array([1.0, 0.0])})
        with pytest.raises(TooFewEmbeddedWordsError):
            topic_coherence(["aaa", "zzz"], table)

    def test_zero_norm_vectors_skipped(self):
        table = _table({
            "aaa": np.array([1.0, 0.0]),
            "bbb": np.array([0.0, 0.0]),
            "ccc": np.array([1.0, 0.0]),
        })
        assert topic_coherence(["aaa", "bbb", "ccc"], table) == pytest.approx(100.0)


class TestLevelQuality:
    def _level(self, columns, roles, entries):
        phi = np.array(columns, dtype=np.float64).T
        return TopicModel(phi, np.zeros((phi.shape[1], 0)), list(roles),
                          Vocabulary(entries), np.zeros(phi.shape[1]))

    def test_mean_over_subject_topics_only(self):
        entries = ["aaa", "bbb", "ccc", "ddd"]
        # topic 0 -> top words aaa, bbb; topic 1 (background) would score 0
        level = self._level(
            [[0.6, 0.4, 0.0, 0.0], [0.0, 0.0, 0.5, 0.5]], [SUBJECT, BACKGROUND], entries
        )
        table = _table({
            "aaa": np.array([1.0, 0.0]),
            "bbb": np.array([1.0, 0.0]),
            "ccc": np.array([1.0, 0.0]),
            "ddd": np.array([0.0, 1.0]),
        })
        assert level_quality(level, table, k=2) == pytest.approx(100.0)

    def test_unscorable_topics_skipped(self):
        entries = ["aaa", "bbb", "yyy", "zzz"]
        level = self._level(
            [[0.6, 0.4, 0.0, 0.0], [0.0, 0.0, 0.5, 0.5]], [SUBJECT, SUBJECT], entries
        )
        table = _table({"aaa": np.array([1.0, 0.0]), "bbb": np.array([1.0, 0.0])})
        assert level_quality(level, table, k=2) == pytest.approx(100.0)

    def test_no_scorable_topic_raises(self):
        level = self._level([[0.6, 0.4]], [SUBJECT], ["yyy", "zzz"])
        table = _table({"aaa": np.array([1.0, 0.0])})
        with pytest.raises(TooFewEmbeddedWordsError):
            level_quality(level, table, k=2)


class TestEdgeRelevance:
    def _models(self):
        entries = ["pwa", "pwb", "cwa", "cwb"]
        parent_phi = np.array([[0.6], [0.4], [0.0], [0.0]])
        child_phi = np.array([[0.0], [0.0], [0.7], [0.3]])
        parent = TopicModel(parent_phi, np.zeros((1, 0)), [SUBJECT], Vocabulary(entries), np.zeros(1))
        child = TopicModel(child_phi, np.zeros((1, 0)), [SUBJECT], Vocabulary(entries), np.zeros(1))
        return parent, child

    def test_cross_pair_mean_oracle(self):
        # cross cosines (0.1, 0.3, 0.5, 0.7) -> 0.4
        u1 = np.array([1.0, 0.0, 0.0, 0.0])
        u2 = np.array([0.0, 1.0, 0.0, 0.0])
        v1 = np.array([0.1, 0.5, np.sqrt(1 - 0.01 - 0.25), 0.0])
        v2 = np.array([0.3, 0.7, 0.0, np.sqrt(1 - 0.09 - 0.49)])
        table = _table({"pwa": u1, "pwb": u2, "cwa": v1, "cwb": v2})
        parent, child = self._models()
        judgment = edge_relevance(Edge(0, 0, 0.9), parent, child, table, k=2)
        assert judgment.similarity == pytest.approx(0.4, abs=1e-9)
        assert judgment.relevant is None

    def test_background_endpoint_rejected(self):
        parent, child = self._models()
        background_child = TopicModel(child.word_topic, child.topic_doc, [BACKGROUND],
                                      child.vocabulary, child.topic_mass)
        table = _table({w: np.array([1.0, 0.0]) for w in ["pwa", "pwb", "cwa", "cwb"]})
        with pytest.raises(ValueError):
            edge_relevance(Edge(0, 0, 0.9), parent, background_child, table, k=2)

    def test_unembeddable_endpoint_raises(self):
        parent, child = self._models()
        table = _table({"pwa": np.array([1.0, 0.0]), "pwb": np.array([1.0, 0.0])})
        with pytest.raises(TooFewEmbeddedWordsError):
            edge_relevance(Edge(0, 0, 0.9), parent, child, table, k=2)


class TestBinarizeJudgments:
    def _judgments(self, sims):
        return [EdgeJudgment(Edge(0, i, 1.0 - i * 0.01), s) for i, s in enumerate(sims)]

    def test_percentile_75_oracle(self):
        # similarities {0.1, 0.2, 0.3, 0.4} at the 75th percentile: only 0.4 is relevant
        out = binarize_judgments(self._judgments([0.1, 0.2, 0.3, 0.4]), 75.0)
        assert [j.relevant for j in out] == [False, False, False, True]

    def test_percentile_0_marks_everything(self):
        out = binarize_judgments(self._judgments([0.3, 0.1, 0.2]), 0.0)
        assert all(j.relevant for j in out)

    def test_percentile_100_keeps_the_maximum(self):
        out = binarize_judgments(self._judgments([0.3, 0.1, 0.2]), 100.0)
        assert [j.relevant for j in out] == [True, False, False]

    def test_ties_at_threshold_are_relevant(self):
        out = binarize_judgments(self._judgments([0.4, 0.4, 0.1, 0.1]), 50.0)
        assert [j.relevant for j in out] == [True, True, False, False]

    def test_order_preserved_and_default_percentile(self):
        sims = [0.9, 0.1, 0.5, 0.7]
        out = binarize_judgments(self._judgments(sims))
        assert [j.similarity for j in out] == sims
        assert DEFAULT_RELEVANCE_PERCENTILE == 75.0

    def test_validation(self):
        with pytest.raises(ValueError):
            binarize_judgments([])
        with pytest.raises(ValueError):
            binarize_judgments(self._judgments([0.1]), 101.0)


class TestAveragePrecisionAtK:
    def test_worked_oracle(self):
        # [relevant, not, relevant] at k=3 -> (1/1 + 2/3)/2 * 100 = 83.33...
        assert average_precision_at_k([True, False, True], 3) == pytest.approx(250.0 / 3.0, abs=1e-9)

    def test_perfect_prefix(self):
        assert average_precision_at_k([True, True, False, False], 2) == pytest.approx(100.0)

    def test_no_relevant_items(self):
        assert average_precision_at_k([False, False], 2) == 0.0

    def test_relevant_only_after_k(self):
        # R counts the whole list, the sum only ranks <= k
        assert average_precision_at_k([False, False, True], 2) == 0.0

    def test_k_beyond_list_length(self):
        assert average_precision_at_k([True], 10) == pytest.approx(100.0)

    def test_k_validation(self):
        with pytest.raises(ValueError):
            average_precision_at_k([True], 0)

    def test_brute_force_small_lists(self):
        def brute(flags, k):
            R = sum(flags)
            if R == 0:
                return 0.0
            total = 0.0
            for i in range(1, min(k, len(flags)) + 1):
                if flags[i - 1]:
                    total += sum(flags[:i]) / i
            return 100.0 * total / min(k, R)

        rng = np.random.default_rng(107)
        for _ in range(300):
            n = int(rng.integers(1, 10))
            flags = [bool(b) for b in rng.integers(0, 2, size=n)]
            k = int(rng.integers(1, n + 3))
            assert average_precision_at_k(flags, k) == pytest.approx(brute(flags, k), abs=1e-12)

    @given(st.lists(st.booleans(), min_size=1, max_size=30), st.integers(1, 40))
    @settings(max_examples=100, deadline=None)
    def test_bounds_property(self, flags, k):
        score = average_precision_at_k(flags, k)
        assert 0.0 <= score <= 100.0
        if all(flags[: min(k, len(flags))]) and any(flags[: min(k, len(flags))]):
            assert score == pytest.approx(100.0)


class TestJudgeEdges:
    def _hierarchy(self):
        corpus = random_corpus(n_docs=30, vocab_size=30, seed=109, min_len=10, max_len=20)
        config = HierarchyConfig(
            level1=TopicConfig(2, 1, seed=1),
            level2=TopicConfig(4, 1, seed=2),
            reg1=RegularizerConfig(smooth_beta=0.1, smooth_alpha=0.1),
            reg2=RegularizerConfig(smooth_beta=0.1, smooth_alpha=0.1),
            schedule=FitSchedule(max_passes=4, rel_tol=0.0),
        )
        return train_hierarchy(corpus, config)

    def test_all_edges_judged_with_full_table(self):
        model = self._hierarchy()
        rng = np.random.default_rng(113)
        entries = model.parent_level.vocabulary.entries
        table = _table({w: rng.normal(size=4) for w in entries})
        judgments, unjudgeable = judge_edges(model, table, k=5)
        assert unjudgeable == 0
        assert len(judgments) == 2 * 4
        assert all(j.relevant is not None for j in judgments)
        weights = [j.edge.weight for j in judgments]
        assert weights == sorted(weights, reverse=True)

    def test_no_judgeable_edge_raises(self):
        model = self._hierarchy()
        table = _table({"zzzz": np.array([1.0, 0.0])})
        with pytest.raises(TooFewEmbeddedWordsError):
            judge_edges(model, table)


class TestAblationReport:
    def test_two_strategies_on_synthetic_collections(self):
        data = two_collections(seed=3, n_initial_docs=40, n_added_docs=60,
                               n_initial_topics=4, n_added_topics=2, doc_len=30)
        config = HierarchyConfig(
            level1=TopicConfig(4, 1, seed=0),
            level2=TopicConfig(8, 1, seed=1),
            reg1=RegularizerConfig(smooth_beta=0.1, smooth_alpha=0.1),
            reg2=RegularizerConfig(smooth_beta=0.1, smooth_alpha=0.1),
            schedule=FitSchedule(max_passes=5, rel_tol=0.0),
        )
        initial_model = train_hierarchy(data.initial, config)
        report = ablation_report(
            data.initial, initial_model, data.added, ["D-I-", "D+I+"],
            data.table, config, k_list=(5, 10),
        )
        assert [r.strategy for r in report.rows] == ["D-I-", "D+I+"]
        for row in report.rows:
            assert row.status == "ok"
            assert row.label == STRATEGY_LABELS[row.strategy]
            assert 0.0 <= row.level1_quality <= 100.0
            assert 0.0 <= row.level2_quality <= 100.0
            assert set(row.ap_at) == {5, 10}
            assert row.judged_edges > 0
            assert row.edge_curve[0][1] >= row.edge_curve[-1][1]
        text = report.to_text()
        assert "AP@5" in text and "Baseline" in text
        payload = report.to_dict()
        assert payload["k_list"] == [5, 10]

    def test_failing_strategy_recorded_not_raised(self):
        initial = random_corpus(n_docs=20, vocab_size=30, seed=127, min_len=10, max_len=15)
        added = Corpus(Vocabulary(["zzzalien"]), [Document("alien0", "new", {0: 5.0})])
        config = HierarchyConfig(
            level1=TopicConfig(2, 1, seed=0),
            level2=TopicConfig(4, 1, seed=1),
            schedule=FitSchedule(max_passes=3, rel_tol=0.0),
        )
        initial_model = train_hierarchy(initial, config)
        rng = np.random.default_rng(131)
        table = _table({w: rng.normal(size=4) for w in initial.vocabulary.entries})
        report = ablation_report(initial, initial_model, added, ["D+I+-", "D-I-"],
                                 table, config, k_list=(5,))
        by_name = {r.strategy: r for r in report.rows}
        assert by_name["D+I+-"].status == "failed"
        assert by_name["D+I+-"].error
        assert by_name["D-I-"].status == "ok"
        assert "failed" in report.to_text()

"""Flat regularized topic model trained by EM.

The model factorizes the word-document count matrix into column-stochastic
``word_topic`` (p(w|t), W x T) and ``topic_doc`` (p(t|d), T x D) matrices.
Topics are split into *subject* topics (kept sparse and mutually
decorrelated) and *background* topics (smoothed toward the common lexicon).

E-step responsibilities:  p(t|d,w) = phi_wt * theta_td / sum_s phi_ws * theta_sd
M-step updates:           phi_wt  ~ max(n_wt + r_wt, 0)
                          theta_td ~ max(n_td + a_td, 0)
where r_wt is +smooth_beta on background topics and, on subject topics,
-sparse_beta - decorr_gamma * phi_wt * sum_{s != t, s subject} phi_ws;
a_td is +smooth_alpha on background topics and 0 otherwise.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .corpus import Corpus, Vocabulary
from .errors import VocabularyMismatchError, ZeroDenominatorError

logger = logging.getLogger(__name__)

SUBJECT = "subject"
BACKGROUND = "background"

# Probability floor used when a token gets zero likelihood under the model.
LOG_FLOOR = 1e-15

# Mass assigned to rows of new vocabulary words on warm start.
NEW_WORD_EPSILON = 1e-6

# Fraction of token mass allowed to hit a zero denominator before the pass
# is considered degenerate and aborted.
MAX_SKIPPED_FRACTION = 0.01

_DENOM_CHUNK = 1 << 20


@dataclass(frozen=True)
class TopicConfig:
    n_subject: int
    n_background: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.n_subject < 1 or self.n_background < 0:
            raise ValueError("need at least one subject topic and no negative counts")

    @property
    def total(self) -> int:
        return self.n_subject + self.n_background


@dataclass(frozen=True)
class RegularizerConfig:
    smooth_beta: float = 0.0
    smooth_alpha: float = 0.0
    sparse_beta: float = 0.0
    decorr_gamma: float = 0.0

    def __post_init__(self):
        for name in ("smooth_beta", "smooth_alpha", "sparse_beta", "decorr_gamma"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be a non-negative finite real")


@dataclass(frozen=True)
class FitSchedule:
    max_passes: int = 40
    rel_tol: float = 1e-3


@dataclass
class TopicModel:
    """One hierarchy level: stochastic factor matrices plus topic roles."""

    word_topic: np.ndarray          # W x T, columns p(w|t)
    topic_doc: np.ndarray           # T x D, columns p(t|d)
    roles: list[str]                # SUBJECT | BACKGROUND per topic
    vocabulary: Vocabulary
    topic_mass: np.ndarray          # expected token mass per topic (n_t)
    doc_ids: list[str] | None = None  # identity of each topic_doc column

    @property
    def n_words(self) -> int:
        return self.word_topic.shape[0]

    @property
    def n_topics(self) -> int:
        return self.word_topic.shape[1]

    @property
    def n_docs(self) -> int:
        return self.topic_doc.shape[1]

    @property
    def subject_mask(self) -> np.ndarray:
        return np.array([r == SUBJECT for r in self.roles], dtype=bool)

    @property
    def subject_indices(self) -> np.ndarray:
        return np.flatnonzero(self.subject_mask)


@dataclass
class SufficientStats:
    """EM counters accumulated over a document batch."""

    n_wt: np.ndarray                # W x T expected word-topic counts
    n_td: np.ndarray                # T x D expected topic-doc counts
    skipped_tokens: int = 0         # (d, w) entries hit by a zero denominator
    skipped_mass: float = 0.0
    log_likelihood: float = 0.0

    def __iadd__(self, other: "SufficientStats") -> "SufficientStats":
        self.n_wt += other.n_wt
        self.n_td += other.n_td
        self.skipped_tokens += other.skipped_tokens
        self.skipped_mass += other.skipped_mass
        self.log_likelihood += other.log_likelihood
        return self


class _Bag:
    """Fixed CSR view of a corpus: one (word, doc, count) triple per entry."""

    def __init__(self, corpus: Corpus, positions=None):
        n_docs = len(corpus.documents)
        n_words = len(corpus.vocabulary)
        if positions is None:
            positions = range(n_docs)
        d_list, w_list, c_list = [], [], []
        for pos in positions:
            doc = corpus.documents[pos]
            for w, c in sorted(doc.counts.items()):
                d_list.append(pos)
                w_list.append(w)
                c_list.append(c)
        coo = sp.coo_matrix(
            (np.asarray(c_list, dtype=np.float64),
             (np.asarray(w_list, dtype=np.int64), np.asarray(d_list, dtype=np.int64))),
            shape=(n_words, n_docs),
        )
        self.matrix = coo.tocsr()
        self.matrix.sum_duplicates()
        # per-entry coordinates in the CSR's own ordering
        self.w_idx = np.repeat(
            np.arange(n_words, dtype=np.int64), np.diff(self.matrix.indptr)
        )
        self.d_idx = self.matrix.indices.astype(np.int64)
        self.counts = self.matrix.data.copy()
        self.total = float(self.counts.sum())
        self.n_docs = n_docs
        self.n_words = n_words


def _check_vocabulary(model: TopicModel, corpus: Corpus) -> None:
    if len(corpus.vocabulary) != model.n_words or corpus.vocabulary.entries != model.vocabulary.entries:
        raise VocabularyMismatchError("corpus is not indexed against the model vocabulary")


def init_model(
    vocabulary: Vocabulary,
    topic_config: TopicConfig,
    warm_start: TopicModel | None = None,
    new_word_epsilon: float = NEW_WORD_EPSILON,
    n_docs: int = 0,
) -> TopicModel:
    """Create a model, either randomly or warm-started from another model.

    Random initialization draws each word-topic column as normalized uniform
    positives from a seeded generator, so identical seeds give bit-identical
    models.  Warm starting requires the source vocabulary to be an index
    prefix of ``vocabulary``: shared rows are copied, rows for new words are
    set to ``new_word_epsilon`` and every column is renormalized.

    ``topic_doc`` starts uniform; it is (re)sized by ``fit`` to match the
    training corpus.
    """
    n_words = len(vocabulary)
    n_topics = topic_config.total
    if warm_start is None:
        rng = np.random.default_rng(topic_config.seed)
        word_topic = rng.random((n_words, n_topics)) + 1e-12
        word_topic /= word_topic.sum(axis=0, keepdims=True)
        roles = [SUBJECT] * topic_config.n_subject + [BACKGROUND] * topic_config.n_background
    else:
        if not warm_start.vocabulary.is_prefix_of(vocabulary):
            raise VocabularyMismatchError(
                "warm-start vocabulary is not an index prefix of the target vocabulary"
            )
        if warm_start.n_topics != n_topics:
            raise VocabularyMismatchError(
                f"warm-start has {warm_start.n_topics} topics, config wants {n_topics}"
            )
        word_topic = np.full((n_words, n_topics), new_word_epsilon, dtype=np.float64)
        word_topic[: warm_start.n_words, :] = warm_start.word_topic
        word_topic /= word_topic.sum(axis=0, keepdims=True)
        roles = list(warm_start.roles)
    topic_doc = np.full((n_topics, n_docs), 1.0 / n_topics, dtype=np.float64)
    return TopicModel(word_topic, topic_doc, roles, vocabulary, np.zeros(n_topics))


def _e_step_bag(model: TopicModel, bag: _Bag, track_likelihood: bool = False) -> SufficientStats:
    phi = model.word_topic
    theta = model.topic_doc
    nnz = bag.counts.size
    denom = np.empty(nnz, dtype=np.float64)
    for start in range(0, nnz, _DENOM_CHUNK):
        stop = min(start + _DENOM_CHUNK, nnz)
        rows = phi[bag.w_idx[start:stop], :]
        cols = theta[:, bag.d_idx[start:stop]]
        denom[start:stop] = np.einsum("nt,tn->n", rows, cols)
    ok = denom > 0.0
    z = np.zeros(nnz, dtype=np.float64)
    np.divide(bag.counts, denom, out=z, where=ok)

    weighted = bag.matrix.copy()
    weighted.data = z
    n_wt = phi * (weighted @ theta.T)
    n_td = theta * (weighted.T @ phi).T

    skipped = int(np.count_nonzero(~ok))
    skipped_mass = float(bag.counts[~ok].sum()) if skipped else 0.0
    log_likelihood = 0.0
    if track_likelihood:
        log_probs = np.log(np.maximum(denom, LOG_FLOOR))
        log_likelihood = float(np.dot(bag.counts, log_probs))
    if skipped_mass > MAX_SKIPPED_FRACTION * bag.total:
        raise ZeroDenominatorError(
            f"{skipped_mass:.1f} of {bag.total:.1f} token occurrences had zero probability"
        )
    if skipped:
        logger.warning("e_step skipped %d token entries with zero denominator", skipped)
    return SufficientStats(n_wt, n_td, skipped, skipped_mass, log_likelihood)


def e_step(model: TopicModel, corpus: Corpus, positions=None) -> SufficientStats:
    """Accumulate EM counters over a document batch (all documents by default).

    ``n_td`` spans the whole corpus; columns outside the batch stay zero, so
    stats over a partition of the corpus sum to the full-corpus stats.
    """
    _check_vocabulary(model, corpus)
    if model.n_docs != len(corpus.documents):
        raise VocabularyMismatchError(
            f"model holds {model.n_docs} document columns, corpus has {len(corpus.documents)}"
        )
    return _e_step_bag(model, _Bag(corpus, positions))


def _normalize_columns(raw: np.ndarray) -> tuple[np.ndarray, int]:
    """Column-normalize, resetting all-zero columns to uniform."""
    sums = raw.sum(axis=0)
    dead = sums <= 0.0
    repairs = int(np.count_nonzero(dead))
    if repairs:
        raw[:, dead] = 1.0 / raw.shape[0]
        sums = raw.sum(axis=0)
    return raw / sums, repairs


def m_step(model: TopicModel, stats: SufficientStats, reg: RegularizerConfig) -> TopicModel:
    """Rebuild the stochastic matrices from counters plus regularizer terms.

    With all strengths zero this reduces to plain count normalization.
    Columns truncated to zero are reset to uniform (counted and logged) so
    the stochasticity invariant holds unconditionally.
    """
    if stats.n_wt.shape != model.word_topic.shape or stats.n_td.shape != model.topic_doc.shape:
        raise VocabularyMismatchError("stats shape does not match the model")
    subject = model.subject_mask
    background = ~subject

    r = np.zeros_like(stats.n_wt)
    if reg.smooth_beta and background.any():
        r[:, background] += reg.smooth_beta
    if reg.sparse_beta and subject.any():
        r[:, subject] -= reg.sparse_beta
    if reg.decorr_gamma and np.count_nonzero(subject) > 1:
        phi_s = model.word_topic[:, subject]
        others = phi_s.sum(axis=1, keepdims=True) - phi_s
        r[:, subject] -= reg.decorr_gamma * phi_s * others
    word_topic, phi_repairs = _normalize_columns(np.maximum(stats.n_wt + r, 0.0))

    a = np.zeros_like(stats.n_td)
    if reg.smooth_alpha and background.any():
        a[background, :] += reg.smooth_alpha
    topic_doc, theta_repairs = _normalize_columns(np.maximum(stats.n_td + a, 0.0))

    if phi_repairs or theta_repairs:
        logger.warning(
            "m_step reset %d word-topic and %d topic-doc columns to uniform",
            phi_repairs,
            theta_repairs,
        )
    return TopicModel(
        word_topic,
        topic_doc,
        list(model.roles),
        model.vocabulary,
        stats.n_wt.sum(axis=0),
    )


def fit(
    model: TopicModel,
    corpus: Corpus,
    schedule: FitSchedule = FitSchedule(),
    reg: RegularizerConfig = RegularizerConfig(),
) -> tuple[TopicModel, list[float]]:
    """Alternate full-corpus E/M passes until the perplexity settles.

    Returns the fitted model and the per-pass training perplexity trace
    (each entry evaluates the model as it entered that pass).  Stops after
    ``max_passes`` or when the relative perplexity change drops below
    ``rel_tol``.
    """
    if not corpus.documents:
        raise ValueError("corpus is empty")
    _check_vocabulary(model, corpus)
    if model.n_docs != len(corpus.documents):
        model = replace(
            model,
            topic_doc=np.full(
                (model.n_topics, len(corpus.documents)), 1.0 / model.n_topics
            ),
        )
    bag = _Bag(corpus)
    trace: list[float] = []
    for _ in range(schedule.max_passes):
        stats = _e_step_bag(model, bag, track_likelihood=True)
        trace.append(math.exp(-stats.log_likelihood / bag.total))
        model = m_step(model, stats, reg)
        if len(trace) >= 2:
            prev, cur = trace[-2], trace[-1]
            if abs(cur - prev) / prev < schedule.rel_tol:
                break
    model.doc_ids = [doc.doc_id for doc in corpus.documents]
    return model, trace


def perplexity(model: TopicModel, corpus: Corpus) -> float:
    """exp(-(1/n) sum_d sum_w n_dw ln p(w|d)) with a 1e-15 probability floor."""
    _check_vocabulary(model, corpus)
    bag = _Bag(corpus)
    phi = model.word_topic
    theta = model.topic_doc
    log_total = 0.0
    for start in range(0, bag.counts.size, _DENOM_CHUNK):
        stop = min(start + _DENOM_CHUNK, bag.counts.size)
        rows = phi[bag.w_idx[start:stop], :]
        cols = theta[:, bag.d_idx[start:stop]]
        probs = np.einsum("nt,tn->n", rows, cols)
        log_total += float(np.dot(bag.counts[start:stop], np.log(np.maximum(probs, LOG_FLOOR))))
    return math.exp(-log_total / bag.total)


def top_words(model: TopicModel, topic_index: int, k: int = 10) -> list[tuple[str, float]]:
    """The k most probable tokens of a topic, ties broken by token index."""
    if not 0 <= topic_index < model.n_topics:
        raise IndexError(f"topic index {topic_index} out of range")
    if k < 1:
        raise ValueError("k must be >= 1")
    column = model.word_topic[:, topic_index]
    order = np.argsort(-column, kind="stable")[:k]
    return [(model.vocabulary.entries[int(w)], float(column[w])) for w in order]

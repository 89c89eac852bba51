"""Exception hierarchy shared across the package.

Every error that the CLI reports as a domain failure (exit code 1)
derives from ``TopicAtlasError``.
"""


class TopicAtlasError(Exception):
    """Base class for all domain errors."""

    code = "error"


class MalformedLineError(TopicAtlasError):
    code = "malformed_line"

    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class DuplicateDocIdError(TopicAtlasError):
    code = "duplicate_doc_id"

    def __init__(self, doc_id: str):
        super().__init__(f"duplicate document id: {doc_id!r}")
        self.doc_id = doc_id


class EmptyDocumentError(TopicAtlasError):
    """A document lost all of its tokens when projected onto a vocabulary."""

    code = "empty_document_after_projection"

    def __init__(self, doc_id: str):
        super().__init__(f"document {doc_id!r} is empty after vocabulary projection")
        self.doc_id = doc_id


class EmptyVocabularyError(TopicAtlasError):
    code = "empty_vocabulary"


class FrozenVocabularyError(TopicAtlasError):
    code = "frozen_vocabulary"


class VocabularyMismatchError(TopicAtlasError):
    code = "vocabulary_mismatch"


class NotFittedError(TopicAtlasError):
    code = "not_fitted"


class ZeroDenominatorError(TopicAtlasError):
    """Too many tokens had zero probability under the current model."""

    code = "zero_denominator"


class ScheduleEmptyError(TopicAtlasError):
    code = "schedule_empty"


class MalformedEmbeddingLineError(TopicAtlasError):
    code = "malformed_embedding_line"

    def __init__(self, line_no: int, reason: str):
        super().__init__(f"embedding line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class DimensionMismatchError(TopicAtlasError):
    code = "dimension_mismatch"


class TooFewEmbeddedWordsError(TopicAtlasError):
    code = "too_few_embedded_words"


class QueryEmptyError(TopicAtlasError):
    """Query text has no tokens left after projection onto the model vocabulary."""

    code = "no_recognizable_terms"


class VersionMismatchError(TopicAtlasError):
    code = "version_mismatch"


class CorruptBundleError(TopicAtlasError):
    code = "corrupt_bundle"

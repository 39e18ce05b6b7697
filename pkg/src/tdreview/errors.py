"""Exception hierarchy.

Every error carries a short machine-readable ``code`` (the class name) so the
command line can print a single parseable line.
"""


class TdReviewError(Exception):
    @property
    def code(self) -> str:
        return type(self).__name__


# ingest
class RateLimitedError(TdReviewError):
    def __init__(self, retry_after: float, url: str = ""):
        super().__init__(f"rate limited, retry after {retry_after:.1f}s ({url})")
        self.retry_after = retry_after
        self.url = url


class AuthFailedError(TdReviewError):
    pass


class NotFoundError(TdReviewError):
    pass


class MalformedPageError(TdReviewError):
    def __init__(self, url: str, reason: str = ""):
        super().__init__(f"malformed page {url}: {reason}")
        self.url = url


class SerializationError(TdReviewError):
    pass


class UnresolvedCommentError(TdReviewError):
    pass


class InsufficientLexiconError(TdReviewError):
    def __init__(self, td_type: str):
        super().__init__(f"no source sentence of type {td_type!r} has a replaceable token")
        self.td_type = td_type


class LexiconError(TdReviewError):
    pass


# features / learning
class EmptyVocabularyError(TdReviewError):
    pass


class SingleClassDataError(TdReviewError):
    pass


class EmptyTrainingSetError(TdReviewError):
    pass


class DimensionMismatchError(TdReviewError):
    pass


class TooFewExamplesError(TdReviewError):
    def __init__(self, label: str, have: int, need: int):
        super().__init__(f"class {label!r} has {have} examples, needs at least {need}")
        self.label = label


# hierarchy
class ZeroRowError(TdReviewError):
    def __init__(self, row: int):
        super().__init__(f"confusion matrix row {row} sums to zero")
        self.row = row


class DegenerateSimilarityError(TdReviewError):
    pass


class KTooLargeError(TdReviewError):
    pass


# pipeline
class MissingClusterDataError(TdReviewError):
    def __init__(self, cluster: str, td_type: str):
        super().__init__(f"cluster {cluster!r}: type {td_type!r} has no training sentences")
        self.cluster = cluster
        self.td_type = td_type


class SchemaMismatchError(TdReviewError):
    pass


class CorruptModelError(TdReviewError):
    pass


# eval / analytics
class LengthMismatchError(TdReviewError):
    pass


class ConstantVectorError(TdReviewError):
    pass


class MissingYearError(TdReviewError):
    def __init__(self, year: int):
        super().__init__(f"no package count for year {year}")
        self.year = year


class UndefinedCagrError(TdReviewError):
    pass

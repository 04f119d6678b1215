"""Custom exceptions for the opinion alignment toolkit."""

from typing import Optional


class OpinionEvalError(Exception):
    """Base exception for the opinion alignment toolkit."""
    pass


class ConfigurationError(OpinionEvalError):
    """Raised when a run configuration is invalid."""
    pass


class ReportIOError(OpinionEvalError):
    """Raised when report files cannot be written."""

    def __init__(self, message: str, path: Optional[str] = None):
        super().__init__(message)
        self.path = path


# Survey ingestion

class SurveyError(OpinionEvalError):
    """Base class for survey schema and microdata problems."""
    pass


class SchemaError(SurveyError):
    """Raised when a survey document is malformed."""
    pass


class InvariantError(SurveyError):
    """Raised when a well-formed survey violates a structural invariant."""

    def __init__(self, message: str, qid: Optional[str] = None, reason: Optional[str] = None):
        super().__init__(message)
        self.qid = qid
        self.reason = reason


class UnknownLabelError(SurveyError):
    """Raised when microdata holds an answer label the question lacks."""

    def __init__(self, qid: str, label: str):
        super().__init__(f"Unknown option label {label!r} for question {qid}")
        self.qid = qid
        self.label = label


class NegativeWeightError(SurveyError):
    """Raised when a respondent weight is negative or not finite."""

    def __init__(self, respondent_id: str, weight: Optional[float] = None):
        super().__init__(f"Invalid weight {weight!r} for respondent {respondent_id}")
        self.respondent_id = respondent_id
        self.weight = weight


class UnknownTopicError(SurveyError):
    """Raised when a topic is not part of the taxonomy."""

    def __init__(self, topic: str):
        super().__init__(f"Unknown topic: {topic}")
        self.topic = topic


# Human aggregation

class AggregationError(OpinionEvalError):
    """Base class for human opinion aggregation failures."""

    def __init__(self, message: str, qid: Optional[str] = None, group: Optional[str] = None):
        super().__init__(message)
        self.qid = qid
        self.group = group


class EmptyCellError(AggregationError):
    """Raised when no respondent in a filter answered a question."""
    pass


class AllRefusedError(AggregationError):
    """Raised when every answering respondent chose the refusal option."""
    pass


class NoRefusalOptionError(AggregationError):
    """Raised when no question in a set offers a refusal option."""
    pass


# Language model probing

class ProbeError(OpinionEvalError):
    """Base class for prompt construction and log-prob extraction failures."""
    pass


class BadPermutationError(ProbeError):
    """Raised when an option permutation is not a bijection of the options."""
    pass


class AllMissingError(ProbeError):
    """Raised when a provider returned none of the expected option labels."""

    def __init__(self, message: str, prompt_hash: Optional[str] = None):
        super().__init__(message)
        self.prompt_hash = prompt_hash


class ProviderError(ProbeError):
    """Raised when a provider query fails after retries."""

    def __init__(self, message: str, model_id: Optional[str] = None, attempts: int = 0):
        super().__init__(message)
        self.model_id = model_id
        self.attempts = attempts


class AuthError(ProviderError):
    """Raised when the provider rejects the credentials."""
    pass


class RateLimitError(ProviderError):
    """Raised when the provider keeps rate limiting after the retry budget."""
    pass


class TransientProviderError(ProviderError):
    """Retryable transport failure; surfaced as ProviderError once retries run out."""
    pass


# Metrics

class MetricError(OpinionEvalError):
    """Base class for alignment metric failures."""
    pass


class SupportMismatchError(MetricError):
    """Raised when distributions and ordinal support disagree in shape."""
    pass


class EmptySetError(MetricError):
    """Raised when a metric is requested over an empty question set."""
    pass


class BadTemperatureError(MetricError):
    """Raised for non-positive temperatures."""
    pass


class IncompleteMatrixError(MetricError):
    """Raised when a groups x topics score matrix has holes."""
    pass


class DegenerateScoreError(MetricError):
    """Raised when a significance ratio would divide by a non-positive score."""
    pass

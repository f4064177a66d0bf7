"""Exception types shared across the pipeline.

Names follow the error contracts of the operations that raise them, so a
caller can catch e.g. ``NoMdnaFound`` without caring which parser variant
produced it.
"""


class DistresskitError(Exception):
    """Base class for all errors raised by this package."""


# -- filing corpus ----------------------------------------------------------

class NoMdnaFound(DistresskitError):
    """No qualifying MD&A item heading pair exists in the filing."""


class EmptySection(DistresskitError):
    """The extracted MD&A region has no sentences left after cleaning."""


# -- lexicon tone -----------------------------------------------------------

class MalformedLexicon(DistresskitError):
    """A lexicon file contains a non-alphabetic entry."""


class OverlappingLists(DistresskitError):
    """A word appears in both the positive and the negative list."""


class EmptyDocument(DistresskitError):
    """The document has no word tokens (or no sentences) to score."""


# -- sentiment scoring ------------------------------------------------------

class EmptyScoreList(DistresskitError):
    """Aggregation was asked to combine an empty list of sentence scores."""


class MixedDocuments(DistresskitError):
    """Sentence scores from different documents were mixed in one call."""


class BackendUnavailable(DistresskitError):
    """Transport-level failure talking to a scoring backend; retriable."""


class BackendRejected(DistresskitError):
    """The scoring backend returned a malformed or contract-violating response."""


class InvalidDistribution(DistresskitError):
    """A probability vector has a negative component or does not sum to one."""


# -- domain adaptation ------------------------------------------------------

class CorpusTooSmall(DistresskitError):
    """Fewer documents available than the adaptation config wants to sample."""


class EmptyTrainingSet(DistresskitError):
    """No pseudo-labels survived to be written as a training set."""


class IoFailure(DistresskitError):
    """An output file could not be written."""


# -- features ---------------------------------------------------------------

class InvalidDateOrder(DistresskitError):
    """bankruptcy_date precedes filing_date."""


class InsufficientData(DistresskitError):
    """Not enough observations for the requested fit or test."""


class MissingSentiment(DistresskitError):
    """A record lacks the sentiment scores its variable set requires."""


class DegenerateFeatureWarning(UserWarning):
    """A feature was constant on the training split and has been dropped."""


# -- classifiers ------------------------------------------------------------

class Separation(DistresskitError):
    """Logistic MLE diverged; the classes are (quasi-)perfectly separable."""


class NoConvergence(DistresskitError):
    """An iterative solver hit its iteration cap before reaching tolerance."""


class DimensionMismatch(DistresskitError):
    """An input vector's length does not match the fitted model."""


# -- evaluation -------------------------------------------------------------

class EmptyClass(DistresskitError):
    """Accuracy was requested for a class with zero observations."""


class InvalidLikelihoodOrder(DistresskitError):
    """log-likelihood of the fitted model is below the null model's."""


class WindowTooSparse(DistresskitError):
    """The test window has too few observations for the split plan."""

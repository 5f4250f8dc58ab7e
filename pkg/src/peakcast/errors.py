"""Exception hierarchy shared across the toolkit.

Every domain failure raises a subclass of PeakcastError so the CLI can map
them to exit code 1 while genuine usage mistakes stay on argparse's exit
code 2.
"""


class PeakcastError(Exception):
    """Base class for all domain errors raised by this package."""


# --- trace ingestion / generation ---------------------------------------

class MalformedRow(PeakcastError):
    """A CSV row could not be parsed into a demand record."""


class GapError(PeakcastError):
    """Timestamps are not a strict 1-hour grid (gap, duplicate, or disorder)."""


class DomainError(PeakcastError):
    """A field value is outside its allowed domain."""


class ConfigError(PeakcastError):
    """A configuration object or file violates its invariants."""


class BoundaryError(PeakcastError):
    """A split boundary is outside the trace or not midnight-aligned."""


# --- feature construction ------------------------------------------------

class DegenerateChannel(PeakcastError):
    """A channel is constant, so min-max normalization is undefined."""


class TooShort(PeakcastError):
    """The trace does not cover enough hours for windowing."""


# --- model / serialization ----------------------------------------------

class DimensionMismatch(PeakcastError):
    """Array dimensions are inconsistent with the model parameters."""


class ShapeMismatch(PeakcastError):
    """Gradient or accumulator shapes do not mirror the parameters."""


class BadMagic(PeakcastError):
    """The model file does not start with the expected magic string."""


class VersionMismatch(PeakcastError):
    """The model file declares an unsupported format or feature layout."""


class TruncatedFile(PeakcastError):
    """The model file ends before all declared tensors were read."""


# --- training ------------------------------------------------------------

class LengthMismatch(PeakcastError):
    """Paired sequences have different lengths."""


class RangeError(PeakcastError):
    """A scalar argument is outside its documented range."""


class EmptyDataset(PeakcastError):
    """Training requires at least one sample."""


class EmptyCandidates(PeakcastError):
    """Grid search requires at least one candidate."""


# --- labeling / metrics --------------------------------------------------

class KOutOfRange(PeakcastError):
    """k must satisfy 1 <= k <= 12 so top and bottom sets stay disjoint."""


class CardinalityMismatch(PeakcastError):
    """A predicted or true hour set does not have exactly k members."""


class NonPositiveActual(PeakcastError):
    """MAPE requires strictly positive actual values."""


# --- baselines -----------------------------------------------------------

class MissingHistory(PeakcastError):
    """The trace does not contain the full previous day."""


class SingularSystem(PeakcastError):
    """The unregularized normal equations are singular."""


# --- battery -------------------------------------------------------------

class SocOutOfRange(PeakcastError):
    """Initial state of charge is outside [0, capacity]."""


class IncompleteMonth(PeakcastError):
    """Monthly aggregation needs a complete month of daily results."""


class NoSavings(PeakcastError):
    """Payback is undefined when annual savings are not positive."""


# --- reports -------------------------------------------------------------

class IoError(PeakcastError):
    """A report file could not be written."""

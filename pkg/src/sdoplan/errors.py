"""Exception types shared across the package."""


class SdoError(Exception):
    """Base class for all package-specific errors."""


# --- phantom / instance ---

class EmptyStructure(SdoError):
    """A generated structure contains no voxels."""


class SpecOverlap(SdoError):
    """An organ-at-risk overlaps the tumor volume."""


class FormatError(SdoError):
    """Malformed instance or model file; message names the offending field."""


class UnknownStructure(SdoError):
    """A structure name does not exist in the instance."""


class ShapeMismatch(SdoError):
    """An array argument has the wrong shape for the instance."""


# --- LP core ---

class NumericalBreakdown(SdoError):
    """The simplex solver could not recover after refactorization retries."""


class NotOptimal(SdoError):
    """Operation requires an Optimal outcome."""


# --- epsilon engine ---

class InfeasibleModel(SdoError):
    """The base multiobjective model has no feasible solution."""


class EmptyRange(SdoError):
    """Range tightening produced a lower bound above the upper bound."""


class DegenerateAxis(SdoError):
    """A grid axis with more than one point was requested on a zero-width range."""


# --- ml ---

class EmptyData(SdoError):
    """Training set is empty."""


class TooFewRows(SdoError):
    """Not enough rows for the requested number of folds."""


# --- two-phase orchestration ---

class NoQualifyingSolutions(SdoError):
    """No Phase-I solution passed the clinical thresholds."""


class InsufficientSample(SdoError):
    """The random sample for the ML round is below the configured minimum."""

"""Exception types raised by the simulation and estimation layers.

All classes derive from :class:`ToolkitError` so callers can catch the whole
family at once.  The CLI maps configuration problems to exit code 2 and
numerical failures to exit code 3.
"""


class ToolkitError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(ToolkitError):
    """Invalid or inconsistent experiment configuration."""


# ---------------------------------------------------------------------------
# state space

class EmptyDistribution(ToolkitError):
    """An OAM amplitude distribution with no entries was supplied."""


class NonNormalizable(ToolkitError):
    """All supplied amplitudes are zero; the state cannot be normalized."""


class GuardBandViolation(ToolkitError):
    """Amplitude touched the guard band of the truncated OAM window."""


class SupportInGuardBand(GuardBandViolation):
    """A state was created with support inside the guard band."""


class ShiftIntoGuardBand(GuardBandViolation):
    """A ladder shift would move amplitude into (or out of) the guard band."""


class DimensionMismatch(ToolkitError):
    """Operator and state live on incompatible windows or array shapes."""


class UnnormalizedState(ToolkitError):
    """A normalized state was required but the input is not normalized."""


class StageMismatch(ToolkitError):
    """Internal trace inconsistency between declared and applied operators."""


# ---------------------------------------------------------------------------
# metrology

class StepTooSmall(ToolkitError):
    """Finite-difference step so small that cancellation dominates."""


class NonPositiveInput(ToolkitError):
    """A strictly positive quantity (counts, spread, bound) was not."""


class DegenerateOperatingPoint(ToolkitError):
    """Fisher information undefined: probability pinned at 0 or 1."""


# ---------------------------------------------------------------------------
# estimation

class OutOfBranch(ToolkitError):
    """Measured frequency inconsistent with the hinted fringe branch."""


class DegeneratePoint(ToolkitError):
    """Fringe inversion attempted at an extremum where it is singular."""


class InsufficientSpan(ToolkitError):
    """Sweep too short or too sparse to constrain a fringe fit."""


class NonConvergence(ToolkitError):
    """Iterative fit exhausted its iteration budget without converging."""


class InsufficientPairs(ToolkitError):
    """A scaling regression needs at least three (m, l) pairs."""

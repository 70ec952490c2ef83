"""Exception hierarchy.

Every error raised by the package derives from :class:`SpindleError`, so
callers (the CLI in particular) can catch a single base class and still tag
the message with the module that failed.
"""


class SpindleError(Exception):
    module = "spindle"

    def __str__(self):
        return f"[{self.module}] {super().__str__()}"


class RangeViolation(SpindleError, ValueError):
    """Besse function ``h`` reaches the degeneracy bound ``(m+n)/2``."""

    module = "profile"


class MonotonicityViolation(SpindleError, ValueError):
    module = "profile"


class DegenerateCritical(SpindleError, ValueError):
    """``r'`` vanishes on an interval (a flat critical set)."""

    module = "profile"


class StepFailure(SpindleError, RuntimeError):
    module = "flow"


class ToleranceAmbiguity(SpindleError, ValueError):
    """``|K|`` sits too close to a critical value of ``r`` to classify."""

    module = "flow"


class NoReturn(SpindleError, RuntimeError):
    module = "annulus"


class QuadratureFailure(SpindleError, RuntimeError):
    module = "genfun"


class InconsistentData(SpindleError, ValueError):
    module = "genfun"


class NotADivisor(SpindleError, ValueError):
    module = "topology"


class GridTooCoarse(SpindleError, RuntimeError):
    module = "systole"


class CutoffTooSmall(SpindleError, RuntimeError):
    module = "systole"


class ConfigParse(SpindleError, ValueError):
    module = "cli"

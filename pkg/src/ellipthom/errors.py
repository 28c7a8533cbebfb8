"""Exception types raised across the package.

Everything derives from EllipthomError so callers (and the CLI) can catch
the package's failures in one clause and map them to exit codes.
"""

from __future__ import annotations


class EllipthomError(Exception):
    """Base class for all errors raised by this package."""


class ConstraintViolation(EllipthomError):
    """Phase moduli violate the compatibility constraints of the pair.

    Carries a list of human-readable descriptions of every failed
    constraint, not just the first one found.
    """

    def __init__(self, failures: list[str]):
        self.failures = list(failures)
        super().__init__("; ".join(self.failures))


class NonPositiveMu(EllipthomError):
    """A shear modulus that must be strictly positive is not."""


class NonIntegerBandWidth(EllipthomError):
    """Laminate volume fraction theta*n is not an integer pixel count."""


class OddN(EllipthomError):
    """Grid resolution must be even for this microstructure."""


class PackingStalled(EllipthomError):
    """Random disk insertion hit the rejection limit before the target fraction.

    Attributes record how far packing got so callers can decide whether the
    partial configuration is still useful.
    """

    def __init__(self, achieved_theta: float, placed: int, target_theta: float):
        self.achieved_theta = float(achieved_theta)
        self.placed = int(placed)
        self.target_theta = float(target_theta)
        super().__init__(
            f"packing stalled at theta={achieved_theta:.4f} "
            f"({placed} disks) before target {target_theta:.4f}"
        )


class DimensionMismatch(EllipthomError):
    """A field's shape is inconsistent with the grid it is used with."""


class NotConverged(EllipthomError):
    """Iterative solver exhausted its budget above the requested tolerance."""

    def __init__(self, residual: float, iterations: int, what: str = "solver"):
        self.residual = float(residual)
        self.iterations = int(iterations)
        super().__init__(
            f"{what} stopped at relative residual {residual:.3e} "
            f"after {iterations} iterations"
        )


class IndefinitenessDetected(EllipthomError):
    """The shifted operator is not positive definite (shift at or above lambda_6).

    CG observed nonpositive curvature; the Rayleigh quotient of the offending
    direction is recorded.
    """

    def __init__(self, shift: float, quotient: float):
        self.shift = float(shift)
        self.quotient = float(quotient)
        super().__init__(
            f"operator indefinite at shift t={shift:.6g} "
            f"(direction with Rayleigh quotient {quotient:.3e})"
        )


class DegenerateCell(EllipthomError):
    """Cell problem has no positive coercivity; homogenization is degenerate."""


class ShiftExceedsLambda6(EllipthomError):
    """Root bracket for the shifted cell problem collapsed (lambda_6 too small)."""


class SingularSystem(EllipthomError):
    """Laminate layer system is singular along a direction energy cannot ignore.

    The offending null direction of the reduced system matrix is recorded.
    """

    def __init__(self, null_direction):
        self.null_direction = null_direction
        super().__init__(f"singular layer system, null direction {null_direction}")


class ConfigError(EllipthomError):
    """Run configuration file is malformed or semantically invalid."""

"""Exception types shared across the package."""


class PainleveWhithamError(Exception):
    """Base class for all package errors."""


class DomainError(PainleveWhithamError, ValueError):
    """Argument outside the domain where a function is defined."""


class UnsupportedRegimeError(PainleveWhithamError):
    """The Weierstrass cubic has a complex-conjugate root pair.

    Only the three-real-roots (oscillatory) regime is supported.
    """


class PoleProximityError(PainleveWhithamError):
    """Evaluation point is too close to a pole of the Weierstrass function."""

    def __init__(self, distance, guard):
        self.distance = distance
        self.guard = guard
        super().__init__(f"argument within {distance:.3e} of a lattice point (guard {guard:.3e})")


class SingularityError(PainleveWhithamError):
    """State too close to a fixed singularity of the sixth Painleve equation."""

    def __init__(self, message, distance=None):
        self.distance = distance
        super().__init__(message)


class UnsupportedParameterError(PainleveWhithamError):
    """Parameter choice the construction cannot handle (e.g. theta_inf = 0)."""


class GaugeDegenerateError(PainleveWhithamError):
    """One of the residue parameters u0, u1, ux vanishes, so omega_i is undefined."""


class LaxConsistencyError(PainleveWhithamError):
    """Lax data fails one of its algebraic invariants beyond tolerance."""


class NoCycleError(PainleveWhithamError):
    """The curve discriminant has no real interval to average over."""


class ImplicitDegeneracyError(PainleveWhithamError):
    """The implicit modulation equation cannot be solved for dF/dX."""

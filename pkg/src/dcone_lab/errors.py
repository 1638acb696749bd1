"""Exception types raised across the package."""


class DconeError(Exception):
    """Base class for all package errors."""


class AdmissibilityViolation(DconeError):
    def __init__(self, condition1: float, condition2: float, message: str = ""):
        self.condition1 = condition1
        self.condition2 = condition2
        super().__init__(
            message
            or f"profile inadmissible: condition1={condition1:.3e}, condition2={condition2:.3e}"
        )


class NonPeriodicZeta(DconeError):
    def __init__(self, gap: float):
        self.gap = gap
        super().__init__(f"zeta does not close up: |zeta(2pi) - zeta(0)| = {gap:.3e}")


class OriginUndefined(DconeError):
    """Cone fields are not defined at x = 0."""


class UnresolvedCore(DconeError):
    """Quadrature too coarse to resolve the smoothed core."""


class DegenerateBending(DconeError):
    """Bending integral vanishes, the outer power is not differentiable."""


class LineSearchFailure(DconeError):
    """Backtracking did not produce sufficient decrease."""


class TooCloseToCurve(DconeError):
    """Winding number requested too close to the curve image."""


class NonIntegerWinding(DconeError):
    def __init__(self, value: float):
        self.value = value
        super().__init__(f"winding sum {value:.6f} is not close to an integer")


class NoWitness(DconeError):
    """Degree field vanishes identically; no positive test function exists."""


class ConfigError(DconeError):
    """Malformed or out-of-range experiment configuration."""

class ConeVortexError(Exception):
    """Base class for all library errors."""


class NonZeroMean(ConeVortexError):
    """Poisson right-hand side is not orthogonal to constants."""


class InfeasibleProblem(ConeVortexError):
    def __init__(self, reason: str, detail: str = ""):
        self.reason = reason
        super().__init__(f"{reason}: {detail}" if detail else reason)


class MaxIterationsExceeded(ConeVortexError):
    def __init__(self, message: str, best=None):
        self.best = best
        super().__init__(message)


class BundleMismatch(ConeVortexError):
    pass


class NonIntegralDegree(ConeVortexError):
    pass


class EdgeZero(ConeVortexError):
    """A zero sits on (or numerically at) a plaquette edge or vertex."""


class NonReebAction(ConeVortexError):
    pass


class BelowThreshold(ConeVortexError):
    def __init__(self, tau: float, threshold: float):
        self.tau = tau
        self.threshold = threshold
        super().__init__(f"tau={tau!r} is not above the threshold {threshold!r}")


class Unstable(ConeVortexError):
    """mu(u) vanishes identically: the pair is not semistable."""


class ZeroSection(ConeVortexError):
    pass


class NotHolomorphic(ConeVortexError):
    pass


class ConnectionMismatch(ConeVortexError):
    pass


class NotCertified(ConeVortexError):
    """Configuration does not meet its residual certificate."""

"""Exception types raised by ringtoss."""


class RingTossError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(RingTossError, ValueError):
    pass


class NotStochastic(RingTossError, ValueError):
    pass


class NotAbsolutelyContinuous(RingTossError, ValueError):
    pass


class UnsupportedSymbol(RingTossError, ValueError):
    """Output symbol has zero marginal probability."""


class NotSingular(RingTossError, ValueError):
    pass


class Exhausted(RingTossError, RuntimeError):
    """No proposal was accepted within ``k_max`` steps."""

    def __init__(self, k_max):
        super().__init__(f"no proposal accepted within k_max={k_max} steps")
        self.k_max = k_max


class ZeroProbabilityIndex(RingTossError, RuntimeError):
    pass


class MalformedCodeword(RingTossError, ValueError):
    pass


class TooLarge(RingTossError, ValueError):
    pass


class UnboundedRatio(RingTossError, ValueError):
    pass


class QuadratureFailure(RingTossError, RuntimeError):
    pass

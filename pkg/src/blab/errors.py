"""Exception hierarchy shared by all blab modules."""


class BlabError(Exception):
    """Base class for every error raised by blab."""


class DomainError(BlabError, ValueError):
    """Invalid domain parameters or a point of the wrong dimension."""


class OutsideDomainError(BlabError, ValueError):
    """A point was expected to lie strictly inside a domain."""


class QuadratureError(BlabError, ValueError):
    """Unsupported domain or resolution for a quadrature rule."""


class NonFiniteIntegrandError(BlabError, FloatingPointError):
    """An integrand produced nan/inf at some quadrature node."""


class StencilError(BlabError, ValueError):
    """A finite-difference stencil left the domain of definition."""


class IndefiniteGramError(BlabError, ArithmeticError):
    """A Gram matrix turned out numerically indefinite."""


class KernelError(BlabError, ValueError):
    """A kernel strategy is unavailable for the requested domain."""


class MetricError(BlabError, ArithmeticError):
    """A computed metric is not positive definite.

    The offending matrix is kept on ``matrix``.
    """

    def __init__(self, message, matrix=None):
        super().__init__(message)
        self.matrix = matrix


class ZeroKernelError(BlabError, ArithmeticError):
    """The kernel vanishes at a pair where a relative quantity needs it."""


class DiastasisUndefined(ZeroKernelError):
    """The kernel vanishes at the pair, so the diastasis is infinite."""


class MapError(BlabError, ValueError):
    """Invalid proper-map specification or domain pairing."""


class BranchPointError(BlabError, ValueError):
    """A target point lies in the exclusion tube around the critical image."""


class FisherError(BlabError, ArithmeticError):
    """A Fisher matrix failed its positivity check."""


class ConfigError(BlabError, ValueError):
    """Malformed experiment configuration."""

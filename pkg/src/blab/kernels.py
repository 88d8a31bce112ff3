"""Bergman kernels of the model domains.

Three construction strategies are supported:

``closed``
    Disk ``1/(pi (1 - z conj(xi))^2)``, polydisk (product of disk
    kernels) and the ball in C^2, ``2/(pi^2 (1 - <z, xi>)^3)``.
``series``
    Annulus ``{r < |z| < 1}``: the Laurent monomials ``z^j`` are
    orthogonal there, so ``K(z, xi) = sum_j (z conj(xi))^j / ||z^j||^2``
    truncated to ``|j| <= J``.
``ortho``
    Any supported domain: monomials (Laurent monomials on the annulus)
    up to a total degree, orthonormalized against a quadrature rule.

Batched methods take points with a trailing axis of length n and
broadcast ``z`` against ``xi``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import accel
from ._grammar import parse_int, reject_unknown, split_spec
from .domains import Domain, as_point
from .errors import ConfigError, KernelError, OutsideDomainError
from .numerics import (
    DEFAULT_RESOLUTION,
    DEFAULT_STENCIL,
    build_quadrature,
    holomorphic_from_real,
    orthonormal_coefficients,
    real_gradient,
    weighted_sum,
)

STRATEGIES = ("closed_form", "annulus_series", "orthonormalized")
# Negative-index terms decay like (r / |z|)^|j| near the inner circle; 120
# terms keep Fisher integrals converged for |z| >= r + 0.1 when r = 0.5.
DEFAULT_J = 120
DEFAULT_DEGREE = 12

_CLOSED_KINDS = ("unit_disk", "polydisk", "unit_ball")


def annulus_norms(r, J):
    """Squared L2 norms of z**j on {r < |z| < 1} for j = -J..J."""
    j = np.arange(-J, J + 1, dtype=np.float64)
    out = np.empty_like(j)
    log_case = j == -1
    k = 2.0 * j[~log_case] + 2.0
    out[~log_case] = 2.0 * np.pi * (1.0 - r**k) / k
    out[log_case] = 2.0 * np.pi * math.log(1.0 / r)
    return out


def monomial_exponents(domain, degree):
    if domain.dimension == 1:
        lo = -degree if domain.kind == "annulus" else 0
        return np.arange(lo, degree + 1)[:, None]
    return np.array([(a, t - a) for t in range(degree + 1) for a in range(t, -1, -1)])


def eval_monomials(exponents, z):
    """Values of z**e for each exponent row; z has shape (..., n)."""
    z = np.asarray(z, dtype=np.complex128)
    out = np.ones(z.shape[:-1] + (exponents.shape[0],), dtype=np.complex128)
    for a in range(exponents.shape[1]):
        out = out * z[..., a, None] ** exponents[:, a]
    return out


def _pair(z, xi):
    z = np.asarray(z, dtype=np.complex128)
    xi = np.asarray(xi, dtype=np.complex128)
    return z, xi


@dataclass(frozen=True, eq=False)
class KernelModel:
    domain: Domain
    strategy: str
    params: dict = field(default_factory=dict)
    coeffs: np.ndarray = None  # annulus series, j = -J..J
    basis: np.ndarray = None  # orthonormalized: s_j = sum_k basis[j, k] m_k
    exponents: np.ndarray = None
    rule: object = None

    @property
    def dimension(self):
        return self.domain.dimension

    @property
    def is_closed_form(self):
        return self.strategy == "closed_form"

    def label(self):
        if self.strategy == "closed_form":
            return "closed"
        if self.strategy == "annulus_series":
            return f"series:J={self.params['J']}"
        return f"ortho:deg={self.params['degree']},res={self.params['resolution']}"

    # -- evaluation --------------------------------------------------------

    def __call__(self, z, xi):
        """K(z, xi) for batched points (no membership checks)."""
        z, xi = _pair(z, xi)
        kind = self.domain.kind
        if self.strategy == "closed_form":
            if kind == "unit_disk":
                w = z[..., 0] * np.conj(xi[..., 0])
                return 1.0 / (np.pi * (1.0 - w) ** 2)
            if kind == "polydisk":
                w = z * np.conj(xi)
                return np.prod(1.0 / (np.pi * (1.0 - w) ** 2), axis=-1)
            s = np.sum(z * np.conj(xi), axis=-1)
            return 2.0 / (np.pi**2 * (1.0 - s) ** 3)
        if self.strategy == "annulus_series":
            w = z[..., 0] * np.conj(xi[..., 0])
            w, = np.broadcast_arrays(w)
            return accel.laurent_sum(w, self.coeffs, self.params["J"])
        C = self.basis
        sz = eval_monomials(self.exponents, z) @ C.T
        sx = eval_monomials(self.exponents, xi) @ C.T
        return np.sum(sz * np.conj(sx), axis=-1)

    def diag(self, z):
        """K(z, z) as a real array."""
        return self(z, z).real

    def dlog(self, z, xi, stencil=DEFAULT_STENCIL):
        """d/dz_alpha log K(z, xi) for a single z and batched xi, shape (..., n).

        Closed forms are differentiated analytically; other strategies use
        the central-difference stencil on K itself (never on a branch of
        the complex logarithm).
        """
        z = np.asarray(z, dtype=np.complex128).reshape(self.dimension)
        xi = np.asarray(xi, dtype=np.complex128)
        if self.strategy == "closed_form":
            kind = self.domain.kind
            cx = np.conj(xi)
            if kind == "unit_disk":
                return 2.0 * cx / (1.0 - z * cx)
            if kind == "polydisk":
                return 2.0 * cx / (1.0 - z * cx)
            s = np.sum(z * cx, axis=-1)
            return 3.0 * cx / (1.0 - s)[..., None]
        h = stencil.absolute_step(z)
        grad = real_gradient(lambda pts: self(pts.reshape((-1,) + (1,) * (xi.ndim - 1) + (self.dimension,)), xi), z, h)
        dK = holomorphic_from_real(grad)  # (n, ...)
        return np.moveaxis(dK / self(z, xi), 0, -1)

    def closed_metric(self, z):
        """Analytic matrix of d^2 log K(z,z) / dz_alpha dzbar_beta."""
        if self.strategy != "closed_form":
            raise KernelError(f"{self.label()} kernel has no closed-form metric")
        z = np.asarray(z, dtype=np.complex128).reshape(self.dimension)
        kind = self.domain.kind
        a2 = np.abs(z) ** 2
        if kind == "unit_disk":
            return np.array([[2.0 / (1.0 - a2[0]) ** 2]], dtype=np.complex128)
        if kind == "polydisk":
            return np.diag(2.0 / (1.0 - a2) ** 2).astype(np.complex128)
        t = 1.0 - a2.sum()
        return 3.0 * (t * np.eye(2) + np.outer(np.conj(z), z)) / t**2


def make_kernel(domain, strategy="closed_form", *, J=DEFAULT_J, degree=DEFAULT_DEGREE,
                resolution=None, rule=None, drop_tol=None):
    """Build a :class:`KernelModel` for ``domain``.

    ``strategy`` accepts ``closed_form``/``closed``, ``annulus_series``/
    ``series`` and ``orthonormalized``/``ortho``.
    """
    strategy = {"closed": "closed_form", "series": "annulus_series", "ortho": "orthonormalized"}.get(
        strategy, strategy
    )
    if strategy not in STRATEGIES:
        raise KernelError(f"unknown kernel strategy {strategy!r}; choose from {STRATEGIES}")
    kind = domain.kind
    if strategy == "closed_form":
        if kind not in _CLOSED_KINDS:
            raise KernelError(
                f"no closed-form Bergman kernel for {domain.label()}; use 'series' (annulus) or 'ortho'"
            )
        return KernelModel(domain, strategy)
    if strategy == "annulus_series":
        if kind != "annulus":
            raise KernelError(f"the Laurent series strategy needs an annulus, got {domain.label()}")
        if J < 0:
            raise KernelError(f"series truncation must be >= 0, got J={J}")
        coeffs = 1.0 / annulus_norms(domain.spec.r, J)
        return KernelModel(domain, strategy, params={"J": int(J)}, coeffs=coeffs)

    if degree < 0:
        raise KernelError(f"degree must be >= 0, got {degree}")
    if rule is None:
        resolution = DEFAULT_RESOLUTION[domain.kind] if resolution is None else resolution
        rule = build_quadrature(domain, resolution)
    exps = monomial_exponents(domain, degree)
    V = eval_monomials(exps, rule.nodes)
    kw = {} if drop_tol is None else {"drop_tol": drop_tol}
    T, _ = orthonormal_coefficients(V, rule.weights, **kw)
    return KernelModel(
        domain,
        strategy,
        params={"degree": int(degree), "resolution": int(rule.resolution), "rank": int(T.shape[1])},
        basis=np.ascontiguousarray(T.T),
        exponents=exps,
        rule=rule,
    )


def parse_kernel(domain, text):
    """Parse ``closed``, ``series:J=120`` or ``ortho:deg=12,res=64``."""
    name, params = split_spec(text)
    if name == "closed":
        reject_unknown(params, set(), text)
        return make_kernel(domain, "closed_form")
    if name == "series":
        reject_unknown(params, {"j"}, text)
        return make_kernel(domain, "annulus_series", J=parse_int(params.get("j", str(DEFAULT_J)), "series J"))
    if name == "ortho":
        reject_unknown(params, {"deg", "res"}, text)
        deg = parse_int(params.get("deg", str(DEFAULT_DEGREE)), "ortho deg")
        res = params.get("res")
        res = None if res is None else parse_int(res, "ortho res")
        return make_kernel(domain, "orthonormalized", degree=deg, resolution=res)
    raise ConfigError(f"unknown kernel spec {text!r}; expected closed, series:J=..., ortho:deg=...,res=...")


def default_kernel(domain):
    if domain.kind in _CLOSED_KINDS:
        return make_kernel(domain, "closed_form")
    if domain.kind == "annulus":
        return make_kernel(domain, "annulus_series")
    return make_kernel(domain, "orthonormalized")


def _checked(K, p):
    p = as_point(p, K.dimension)
    if not K.domain.contains_many(p[None, :])[0]:
        raise OutsideDomainError(f"point {p if p.size > 1 else p[0]} is not inside {K.domain.label()}")
    return p


def eval_kernel(K, z, xi):
    """K(z, xi) for two points inside the domain."""
    return complex(K(_checked(K, z), _checked(K, xi)))


def reproducing_residual(K, z, rule):
    """|int |K(z, xi)|^2 dV(xi) - K(z, z)| / K(z, z)."""
    z = _checked(K, z)
    kzz = float(K.diag(z))
    vals = K(z, rule.nodes)
    mass = weighted_sum(rule, vals.real**2 + vals.imag**2)
    return abs(float(mass) - kzz) / kzz


def reproducing_convergence(K, z, resolutions):
    """Residuals of the reproducing identity at ``z`` for several resolutions."""
    return [(int(R), reproducing_residual(K, z, build_quadrature(K.domain, int(R)))) for R in resolutions]

"""Bergman metric, Calabi diastasis and the isometry checks for proper maps."""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .domains import as_point
from .errors import DiastasisUndefined, MetricError, OutsideDomainError, ZeroKernelError
from .numerics import DEFAULT_STENCIL, mixed_wirtinger

CRITICAL_JACOBIAN = 1e-10


@dataclass(frozen=True, eq=False)
class HermitianMetric:
    point: np.ndarray
    matrix: np.ndarray  # matrix[a, b] = g_{a bbar}

    def eigenvalues(self):
        return np.linalg.eigvalsh(self.matrix)

    def realified(self):
        return realify(self.matrix)


@dataclass(frozen=True, eq=False)
class IsometryReport:
    lambda_hat: float
    defect: float
    sample: list
    ratios: list = field(default_factory=list)
    deviations: list = field(default_factory=list)
    skipped: list = field(default_factory=list)


def realify(H):
    """Real 2n x 2n form of a Hermitian matrix in coordinates (x1, y1, x2, y2, ...).

    Block (a, b) is ``[[Re H_ab, Im H_ab], [-Im H_ab, Re H_ab]]``. With
    this layout a real Fisher matrix of the Bergman family equals twice
    the realified Bergman metric.
    """
    H = np.asarray(H, dtype=np.complex128)
    n = H.shape[0]
    R = np.empty((2 * n, 2 * n))
    R[0::2, 0::2] = H.real
    R[1::2, 1::2] = H.real
    R[0::2, 1::2] = H.imag
    R[1::2, 0::2] = -H.imag
    return R


def _inside(K, z):
    p = as_point(z, K.dimension)
    if not K.domain.contains_many(p[None, :])[0]:
        raise OutsideDomainError(f"{z} is not inside {K.domain.label()}")
    return p


def bergman_metric(K, z, stencil=DEFAULT_STENCIL):
    """Matrix of d^2 log K(z, z) / (dz_alpha dzbar_beta) at z."""
    p = _inside(K, z)
    if K.is_closed_form:
        g = K.closed_metric(p)
    else:
        g = mixed_wirtinger(lambda pts: np.log(K.diag(pts)), p, stencil)
        g = 0.5 * (g + g.conj().T)
    eig = np.linalg.eigvalsh(g)
    if not eig.min() > 0.0:
        raise MetricError(
            f"Bergman metric at {z} is not positive definite (min eigenvalue {eig.min():.3e}); "
            "the point is probably too close to the boundary",
            matrix=g,
        )
    return HermitianMetric(point=p, matrix=g)


def _abs2(c):
    return c.real * c.real + c.imag * c.imag


def diastasis_batch(K, W, Z):
    """Calabi diastasis for batched point pairs; +inf where K(w, zeta) = 0."""
    c = K(W, Z)
    ratio = _abs2(c) / (K(W, W).real * K(Z, Z).real)
    with np.errstate(divide="ignore"):
        d = -np.log(ratio)
    # Cauchy-Schwarz gives d >= 0; only rounding can push it below
    return np.maximum(d, 0.0)


def diastasis(K, w, zeta):
    """log(K(w,w) K(zeta,zeta) / |K(w,zeta)|^2)."""
    pw = _inside(K, w)
    pz = _inside(K, zeta)
    d = float(diastasis_batch(K, pw, pz))
    if math.isinf(d):
        raise DiastasisUndefined(f"K({w}, {zeta}) = 0, the diastasis is infinite")
    return d


def transformation_residual(K1, K2, f, z, xi, absolute=False):
    """|K1(z,xi) - J(z) K2(f(z), f(xi)) conj(J(xi))|, relative to |K1(z,xi)|.

    With ``absolute=True`` the plain difference is returned, which is the
    fallback when K1(z, xi) vanishes.
    """
    pz = _inside(K1, z)
    px = _inside(K1, xi)
    lhs = complex(K1(pz, px))
    rhs = complex(f.jacobian(pz) * K2(f.forward(pz), f.forward(px)) * np.conj(f.jacobian(px)))
    diff = abs(lhs - rhs)
    if absolute:
        return diff
    if lhs == 0:
        raise ZeroKernelError(f"K1({z}, {xi}) = 0; pass absolute=True for the absolute residual")
    return diff / abs(lhs)


def pullback_metric(f, K2, z, stencil=DEFAULT_STENCIL):
    """(f^* g_B2)(z) for the holomorphic map f."""
    p = as_point(z, f.dimension)
    J = f.jacobian_matrix(p)  # J[a, alpha] = d f_a / d z_alpha
    g2 = bergman_metric(K2, f.forward(p), stencil).matrix
    return J.T @ g2 @ J.conj()


def isometry_defect(K1, K2, f, sample, stencil=DEFAULT_STENCIL):
    """Estimate lambda in f^* g_B2 = lambda g_B1 and the worst deviation.

    lambda is the median of the per-point ratios tr(f^* g_B2) / tr(g_B1);
    the defect is the largest ``|f^* g_B2 - lambda g_B1|_F`` relative to
    the larger of the two Frobenius norms. Critical points of f are
    skipped with a warning.
    """
    used, skipped, pulls, bases = [], [], [], []
    for z in sample:
        p = as_point(z, f.dimension)
        if abs(complex(f.jacobian(p))) < CRITICAL_JACOBIAN:
            warnings.warn(f"skipping critical point {z} of {f.label()}")
            skipped.append(z)
            continue
        pulls.append(pullback_metric(f, K2, p, stencil))
        bases.append(bergman_metric(K1, p, stencil).matrix)
        used.append(z)
    if not used:
        raise ValueError("isometry_defect: no sample points left after removing critical points")
    ratios = [float(np.trace(a).real / np.trace(b).real) for a, b in zip(pulls, bases)]
    lam = float(np.median(ratios))
    devs = []
    for a, b in zip(pulls, bases):
        scale = max(np.linalg.norm(a), np.linalg.norm(lam * b))
        devs.append(float(np.linalg.norm(a - lam * b) / scale))
    return IsometryReport(lambda_hat=lam, defect=max(devs), sample=used, ratios=ratios,
                          deviations=devs, skipped=skipped)

"""Quadrature, compensated integration, Wirtinger stencils, Hermitian factorization.

Quadrature rules
    Disk and annulus use polar coordinates: Gauss-Legendre in the radius
    and the periodic trapezoid rule in the angle. At resolution ``R`` this
    is ``R`` radial by ``2R`` angular nodes, which integrates
    ``r**k * exp(i*m*theta)`` exactly for ``k < 2R`` and ``|m| < 2R``.
    The ellipse is the disk rule pushed through ``(x, y) -> (a x, b y)``
    and then masked by the membership test. The polydisk is the tensor
    square of the disk rule; the ball uses ``|z1| = rho cos(phi)``,
    ``|z2| = rho sin(phi)`` with Gauss-Legendre in ``rho`` and ``phi``.

Derivatives
    Wirtinger derivatives are assembled from central differences in the
    real coordinates ``(x1, y1, x2, y2, ...)``:
    ``d/dz = (d/dx - i d/dy) / 2`` and ``d/dzbar = (d/dx + i d/dy) / 2``.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from . import accel
from .domains import Domain
from .errors import (
    IndefiniteGramError,
    NonFiniteIntegrandError,
    QuadratureError,
    StencilError,
)

MIN_RESOLUTION = 4
# polydisk integrands factor, so the tensor rule pays R^2 per factor; the
# ball rule is 4 R^4 nodes and 16 already resolves |z| <= 0.5 well
DEFAULT_RESOLUTION = {"unit_disk": 64, "annulus": 64, "ellipse": 64, "polydisk": 24, "unit_ball": 16}
DEFAULT_STEP = 1e-5
PIVOT_DROP_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    nodes: np.ndarray  # (N, n) complex
    weights: np.ndarray  # (N,) positive
    domain_id: str
    resolution: int

    def __post_init__(self):
        self.nodes.flags.writeable = False
        self.weights.flags.writeable = False

    @property
    def dimension(self):
        return self.nodes.shape[1]

    @property
    def size(self):
        return self.weights.shape[0]

    @property
    def points(self):
        """Nodes as integrands see them: (N,) for n = 1, else (N, n)."""
        return self.nodes[:, 0] if self.dimension == 1 else self.nodes

    def weight_sum(self):
        return float(accel.compensated_colsum(self.weights[:, None])[0])

    def masked(self, keep, tag="masked"):
        keep = np.asarray(keep, dtype=bool)
        return QuadratureRule(
            nodes=np.array(self.nodes[keep]),
            weights=np.array(self.weights[keep]),
            domain_id=f"{self.domain_id}|{tag}",
            resolution=self.resolution,
        )


@dataclass(frozen=True)
class DerivativeStencil:
    step: float = DEFAULT_STEP
    order: int = 1
    scheme: str = "central"

    def __post_init__(self):
        if not (1e-8 <= self.step <= 1e-2):
            raise StencilError(f"stencil step must lie in [1e-8, 1e-2], got {self.step}")
        if self.order not in (1, 2):
            raise StencilError(f"stencil order must be 1 or 2, got {self.order}")
        if self.scheme != "central":
            raise StencilError(f"only the central scheme is supported, got {self.scheme!r}")

    def absolute_step(self, point):
        return self.step * (1.0 + float(np.linalg.norm(point)))


DEFAULT_STENCIL = DerivativeStencil()


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

def _gauss_legendre(n, lo, hi):
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), half * w


def _polar(R, r_inner):
    r, wr = _gauss_legendre(R, r_inner, 1.0)
    M = 2 * R
    theta = 2.0 * np.pi * np.arange(M) / M
    nodes = (r[:, None] * np.exp(1j * theta)[None, :]).ravel()
    weights = ((wr * r)[:, None] * np.full(M, 2.0 * np.pi / M)[None, :]).ravel()
    return nodes, weights


def _ball(R):
    rho, wrho = _gauss_legendre(R, 0.0, 1.0)
    phi, wphi = _gauss_legendre(R, 0.0, 0.5 * np.pi)
    M = 2 * R
    theta = 2.0 * np.pi * np.arange(M) / M
    wt = 2.0 * np.pi / M
    # |z1| |z2| d|z1| d|z2| = rho^3 cos(phi) sin(phi) drho dphi
    r1 = rho[:, None] * np.cos(phi)[None, :]
    r2 = rho[:, None] * np.sin(phi)[None, :]
    wrad = (wrho * rho**3)[:, None] * (wphi * np.cos(phi) * np.sin(phi))[None, :]
    e = np.exp(1j * theta)
    z1 = r1[:, :, None, None] * e[None, None, :, None]
    z2 = r2[:, :, None, None] * e[None, None, None, :]
    z1, z2 = np.broadcast_arrays(z1, z2)
    w = np.broadcast_to(wrad[:, :, None, None] * wt * wt, z1.shape)
    return np.stack([z1.ravel(), z2.ravel()], axis=1), np.array(w.ravel())


def build_quadrature(domain, resolution):
    """Deterministic product rule for one of the model domains."""
    if not isinstance(domain, Domain):
        raise QuadratureError(f"unsupported domain spec {domain!r}")
    if not isinstance(resolution, (int, np.integer)) or resolution < MIN_RESOLUTION:
        raise QuadratureError(f"resolution must be an integer >= {MIN_RESOLUTION}, got {resolution!r}")
    R = int(resolution)
    kind = domain.kind
    if kind == "unit_disk":
        z, w = _polar(R, 0.0)
        nodes = z[:, None]
    elif kind == "annulus":
        z, w = _polar(R, domain.spec.r)
        nodes = z[:, None]
    elif kind == "ellipse":
        z, w = _polar(R, 0.0)
        a, b = domain.spec.a, domain.spec.b
        nodes = (a * z.real + 1j * b * z.imag)[:, None]
        w = w * (a * b)
    elif kind == "polydisk":
        z, w1 = _polar(R, 0.0)
        n1 = z.size
        nodes = np.stack([np.repeat(z, n1), np.tile(z, n1)], axis=1)
        w = np.repeat(w1, n1) * np.tile(w1, n1)
    elif kind == "unit_ball":
        nodes, w = _ball(R)
    else:  # pragma: no cover - make_domain rejects other kinds
        raise QuadratureError(f"unsupported domain kind {kind!r}")
    keep = domain.contains_many(nodes) & (w > 0)
    return QuadratureRule(
        nodes=np.ascontiguousarray(nodes[keep]),
        weights=np.ascontiguousarray(w[keep]),
        domain_id=domain.label(),
        resolution=R,
    )


def default_rule(domain, resolution=None):
    if resolution is None:
        resolution = DEFAULT_RESOLUTION[domain.kind]
    return build_quadrature(domain, resolution)


# ---------------------------------------------------------------------------
# integration
# ---------------------------------------------------------------------------

def _check_finite(rule, values):
    bad = ~np.isfinite(values)
    if bad.ndim > 1:
        bad = bad.reshape(bad.shape[0], -1).any(axis=1)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        node = rule.nodes[i]
        where = node[0] if node.size == 1 else tuple(node)
        raise NonFiniteIntegrandError(
            f"integrand is not finite at node {i} ({where}); {int(bad.sum())} bad node(s) in total"
        )


def weighted_sum(rule, values):
    """Compensated sum of ``weight * value`` over the nodes.

    ``values`` has shape (N,) or (N, k), real or complex. Returns a scalar
    for 1-D input and a length-k array otherwise.
    """
    values = np.asarray(values)
    if values.shape[0] != rule.size:
        raise ValueError(f"expected {rule.size} values, got {values.shape[0]}")
    _check_finite(rule, values)
    flat = values.reshape(rule.size, -1)
    wv = flat * rule.weights[:, None]
    if np.iscomplexobj(wv):
        cols = accel.compensated_colsum(np.concatenate([wv.real, wv.imag], axis=1))
        k = flat.shape[1]
        out = cols[:k] + 1j * cols[k:]
    else:
        out = accel.compensated_colsum(wv)
    return out[0] if values.ndim == 1 else out


def integrate(rule, integrand, vectorized=True):
    """Integrate ``integrand`` against Lebesgue measure using ``rule``.

    With ``vectorized=True`` the integrand is called once with all nodes
    (``rule.points``); otherwise once per node. Returns a complex number,
    or a complex array when the integrand returns an (N, k) array.
    """
    if vectorized:
        values = np.asarray(integrand(rule.points))
    else:
        values = np.array([integrand(p) for p in rule.points])
    if values.ndim == 2 and values.shape[1] == 1:
        values = values[:, 0]
    if values.shape[:1] != (rule.size,):
        raise ValueError(f"integrand returned shape {values.shape} for {rule.size} nodes")
    total = weighted_sum(rule, values.astype(np.complex128))
    return complex(total) if np.ndim(total) == 0 else np.asarray(total)


# ---------------------------------------------------------------------------
# finite differences
# ---------------------------------------------------------------------------

def _real_directions(n):
    """Unit displacements for (x1, y1, ..., xn, yn), shape (2n, n)."""
    D = np.zeros((2 * n, n), dtype=np.complex128)
    for a in range(n):
        D[2 * a, a] = 1.0
        D[2 * a + 1, a] = 1j
    return D


def real_gradient(F, z, h):
    """Central-difference gradient in real coordinates.

    ``F`` maps points of shape (m, n) to values of shape (m, ...). Returns
    an array of shape (2n, ...).
    """
    z = np.asarray(z, dtype=np.complex128)
    D = _real_directions(z.size)
    pts = np.concatenate([z + h * D, z - h * D])
    vals = np.asarray(F(pts))
    m = D.shape[0]
    return (vals[:m] - vals[m:]) / (2.0 * h)


def real_hessian(F, z, h):
    """Central-difference Hessian in real coordinates, shape (2n, 2n, ...)."""
    z = np.asarray(z, dtype=np.complex128)
    D = _real_directions(z.size)
    m = D.shape[0]
    pts = [z]
    for a in range(m):
        pts += [z + h * D[a], z - h * D[a]]
    pairs = [(a, b) for a in range(m) for b in range(a + 1, m)]
    for a, b in pairs:
        pts += [
            z + h * (D[a] + D[b]),
            z + h * (D[a] - D[b]),
            z - h * (D[a] - D[b]),
            z - h * (D[a] + D[b]),
        ]
    vals = np.asarray(F(np.array(pts)))
    H = np.empty((m, m) + vals.shape[1:], dtype=vals.dtype)
    f0 = vals[0]
    for a in range(m):
        H[a, a] = (vals[1 + 2 * a] - 2.0 * f0 + vals[2 + 2 * a]) / (h * h)
    base = 1 + 2 * m
    for p, (a, b) in enumerate(pairs):
        pp, pm, mp, mm = vals[base + 4 * p: base + 4 * p + 4]
        H[a, b] = H[b, a] = (pp - pm - mp + mm) / (4.0 * h * h)
    return H


def holomorphic_from_real(grad):
    """(2n, ...) real-coordinate gradient -> (n, ...) d/dz_alpha values."""
    return 0.5 * (grad[0::2] - 1j * grad[1::2])


def antiholomorphic_from_real(grad):
    return 0.5 * (grad[0::2] + 1j * grad[1::2])


def mixed_from_hessian(H):
    """Real Hessian -> matrix of d^2/(dz_alpha dzbar_beta)."""
    xx = H[0::2, 0::2]
    yy = H[1::2, 1::2]
    xy = H[0::2, 1::2]
    yx = H[1::2, 0::2]
    return 0.25 * (xx + yy + 1j * (xy - yx))


def _parse_which(which):
    if isinstance(which, str):
        which = (0, which)
    alpha, kind = which
    kind = {"z": "holomorphic", "zbar": "antiholomorphic"}.get(kind, kind)
    if kind not in ("holomorphic", "antiholomorphic"):
        raise ValueError(f"which must name 'holomorphic' or 'antiholomorphic', got {kind!r}")
    return int(alpha), kind


def complex_derivative(f, z, which=(0, "holomorphic"), stencil=DEFAULT_STENCIL, domain=None):
    """Wirtinger derivative of ``f`` at ``z`` by central differences.

    ``f`` takes a point (a complex number when n = 1, otherwise a length-n
    array) and returns a complex number. ``which`` is ``(alpha, kind)``
    with kind ``"holomorphic"`` (d/dz) or ``"antiholomorphic"`` (d/dzbar).
    If ``domain`` is given, every stencil point must lie inside it.
    """
    alpha, kind = _parse_which(which)
    zz = np.atleast_1d(np.asarray(z, dtype=np.complex128))
    n = zz.size
    if not 0 <= alpha < n:
        raise ValueError(f"variable index {alpha} out of range for C^{n}")
    h = stencil.absolute_step(zz)
    shifts = np.array([h, -h, 1j * h, -1j * h])
    pts = np.repeat(zz[None, :], 4, axis=0)
    pts[:, alpha] += shifts
    if domain is not None:
        inside = domain.contains_many(pts)
        if not inside.all():
            raise StencilError(f"stencil around {z} with step {h:.3g} leaves {domain.label()}")
    vals = []
    for p in pts:
        try:
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                v = complex(f(p[0] if n == 1 else p))
        except (ValueError, ZeroDivisionError, ArithmeticError) as exc:
            raise StencilError(f"function undefined on the stencil around {z}: {exc}") from exc
        if not (math.isfinite(v.real) and math.isfinite(v.imag)):
            raise StencilError(f"function is not finite on the stencil around {z}")
        vals.append(v)
    dx = (vals[0] - vals[1]) / (2.0 * h)
    dy = (vals[2] - vals[3]) / (2.0 * h)
    if kind == "holomorphic":
        return 0.5 * (dx - 1j * dy)
    return 0.5 * (dx + 1j * dy)


def mixed_wirtinger(F, z, stencil=DEFAULT_STENCIL):
    """Matrix of d^2 F / (dz_alpha dzbar_beta) for batched real-valued F."""
    z = np.atleast_1d(np.asarray(z, dtype=np.complex128))
    h = stencil.absolute_step(z)
    return mixed_from_hessian(real_hessian(F, z, h))


# ---------------------------------------------------------------------------
# Hermitian factorization
# ---------------------------------------------------------------------------

def pivoted_cholesky(G, drop_tol=PIVOT_DROP_TOL):
    """Hermitian Cholesky with diagonal pivoting.

    Returns ``(L, piv, rank)`` such that
    ``G[np.ix_(piv[:rank], piv[:rank])] == L @ L.conj().T`` up to rounding.
    Elimination stops once every remaining pivot is below
    ``drop_tol * max(diag(G))``.
    """
    A = np.array(G, dtype=np.complex128)
    d = A.shape[0]
    if A.shape != (d, d):
        raise ValueError("Gram matrix must be square")
    diag = A.diagonal().real.copy()
    scale = diag.max() if d else 0.0
    if not scale > 0.0:
        raise IndefiniteGramError("Gram matrix has no positive diagonal entry")
    threshold = drop_tol * scale
    piv = np.arange(d)
    L = np.zeros((d, d), dtype=np.complex128)
    rank = 0
    for k in range(d):
        j = k + int(np.argmax(diag[k:]))
        if diag[j] <= threshold:
            break
        if j != k:
            piv[[k, j]] = piv[[j, k]]
            diag[[k, j]] = diag[[j, k]]
            A[[k, j], :] = A[[j, k], :]
            A[:, [k, j]] = A[:, [j, k]]
            L[[k, j], :k] = L[[j, k], :k]
        lkk = math.sqrt(diag[k])
        L[k, k] = lkk
        L[k + 1:, k] = (A[k + 1:, k] - L[k + 1:, :k] @ L[k, :k].conj()) / lkk
        diag[k + 1:] -= np.abs(L[k + 1:, k]) ** 2
        rank += 1
    rest = diag[rank:]
    if rest.size and rest.min() < -threshold:
        raise IndefiniteGramError(
            f"Gram matrix is numerically indefinite (Schur pivot {rest.min():.3e} "
            f"after rank {rank}); lower the degree or raise the quadrature resolution"
        )
    return L[:rank, :rank], piv, rank


def orthonormal_coefficients(V, weights, drop_tol=PIVOT_DROP_TOL):
    """Coefficients turning the columns of ``V`` into an orthonormal system.

    ``V`` holds basis functions sampled at quadrature nodes, shape (N, d).
    Returns ``T`` of shape (d, r) with ``(V @ T)^H W (V @ T) = I``. The
    columns are equilibrated first, factored with pivoting, and a second
    Cholesky pass removes the residual loss of orthogonality.
    """
    V = np.asarray(V, dtype=np.complex128)
    G = accel.weighted_gram(V, weights)
    scale = np.sqrt(G.diagonal().real)
    if not np.all(scale > 0):
        raise IndefiniteGramError("a basis function vanishes at every quadrature node")
    Gs = G / np.outer(scale, scale)
    L, piv, r = pivoted_cholesky(Gs, drop_tol)
    Linv = solve_triangular(L, np.eye(r), lower=True)
    T = np.zeros((V.shape[1], r), dtype=np.complex128)
    T[piv[:r], :] = Linv.conj().T / scale[piv[:r], None]
    G2 = accel.weighted_gram(V @ T, weights)
    try:
        L2 = np.linalg.cholesky(G2)
    except np.linalg.LinAlgError:
        raise IndefiniteGramError(
            "re-orthonormalization failed; lower the degree or raise the quadrature resolution"
        ) from None
    T = solve_triangular(L2, T.conj().T, lower=True).conj().T
    return T, piv[:r]


"""Bergman statistical models and the sufficiency tests for proper maps.

A bounded domain becomes a statistical model through the density
``P(z, xi) = |K(z, xi)|^2 / K(z, z)`` on the domain itself. A proper map
f acts as a statistic; comparing the Fisher metric of the family before
and after pushing forward along f measures the information f destroys.
Three independent checks are offered:

* deficiency: the PSD gap between the two Fisher matrices,
* score equality: d/dz log K(z, w) agrees across all preimages w of a
  point, and
* ratio invariance: P(z, xi) / Q(z, f(xi)) does not depend on z.

They all vanish for injective maps and are expected to be strictly
positive otherwise.
"""

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .domains import as_point
from .errors import (
    ConfigError,
    DiastasisUndefined,
    FisherError,
    KernelError,
    OutsideDomainError,
)
from .geometry import diastasis_batch
from .maps import local_inverses, pushforward_terms
from .numerics import (
    DEFAULT_STENCIL,
    QuadratureRule,
    _real_directions,
    default_rule,
    weighted_sum,
)

FISHER_NEG_TOL = 1e-6
GAUSS_NORMALIZATION_TOL = 1e-8
RENORMALIZE_ABOVE = 1e-6


@dataclass(frozen=True)
class Tolerances:
    suff: float = 1e-3
    score_closed: float = 1e-6
    score_stencil: float = 1e-4
    ratio: float = 1e-4
    mono: float = 1e-4

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (isinstance(v, (int, float)) and v > 0 and math.isfinite(v)):
                raise ConfigError(f"tolerance {f.name} must be a positive real, got {v!r}")

    def score_for(self, kernel):
        return self.score_closed if kernel.is_closed_form else self.score_stencil

    def with_overrides(self, overrides):
        known = {f.name for f in fields(self)}
        bad = sorted(set(overrides) - known)
        if bad:
            raise ConfigError(f"unknown tolerance(s) {bad}; known: {sorted(known)}")
        return replace(self, **overrides)


@dataclass(frozen=True, eq=False)
class StatModel:
    kernel: object

    @property
    def domain(self):
        return self.kernel.domain

    @property
    def parameter_dim(self):
        return 2 * self.kernel.dimension

    def log_density(self, Z, nodes):
        """log P(z, xi) for parameter points Z (m, n) and nodes (N, n) -> (m, N)."""
        K = self.kernel
        Z = np.asarray(Z, dtype=np.complex128)
        c = K(Z[:, None, :], nodes[None, :, :])
        return np.log(c.real**2 + c.imag**2) - np.log(K.diag(Z))[:, None]

    def default_rule(self):
        if self.kernel.rule is not None:
            return self.kernel.rule
        return default_rule(self.domain)


@dataclass(frozen=True, eq=False)
class FisherMatrix:
    point: np.ndarray  # real coordinates (x1, y1, ...)
    matrix: np.ndarray
    rule_id: str


@dataclass(frozen=True, eq=False)
class DeficiencyReport:
    point: np.ndarray
    fisher_before: FisherMatrix
    fisher_after: FisherMatrix
    gap: np.ndarray
    min_gap_eigenvalue: float
    gap_norm: float
    sufficient: bool
    monotone: bool
    masked_mass: float


@dataclass(frozen=True, eq=False)
class VerdictRecord:
    verdict: str
    map_label: str
    deficiency: float
    score_gap: float
    ratio_spread: float
    tolerances: dict
    passes: dict
    evidence: list = field(default_factory=list)


def _real_coords(p):
    out = np.empty(2 * p.size)
    out[0::2] = p.real
    out[1::2] = p.imag
    return out


def _inside(domain, z):
    p = as_point(z, domain.dimension)
    if not domain.contains_many(p[None, :])[0]:
        raise OutsideDomainError(f"{z} is not inside {domain.label()}")
    return p


def fisher_from_log_density(log_density, z, rule, stencil=DEFAULT_STENCIL, check=True):
    """Fisher matrix of a family given by its log-density on ``rule``.

    ``log_density`` maps parameter points (m, n), complex, to an (m, N)
    array of log-densities at the rule's nodes. Parameters are the real
    coordinates (x1, y1, ...) of z; scores are central differences.
    """
    z = np.atleast_1d(np.asarray(z, dtype=np.complex128))
    h = stencil.absolute_step(z)
    D = _real_directions(z.size)
    m = D.shape[0]
    pts = np.concatenate([z[None, :], z + h * D, z - h * D])
    L = np.asarray(log_density(pts))
    p = np.exp(L[0])
    scores = (L[1:1 + m] - L[1 + m:]) / (2.0 * h)
    iu = np.triu_indices(m)
    cols = (scores[iu[0]] * scores[iu[1]] * p).T
    vals = weighted_sum(rule, cols)
    F = np.empty((m, m))
    F[iu] = vals
    F[(iu[1], iu[0])] = vals
    if check:
        lo = np.linalg.eigvalsh(F).min()
        if lo < -FISHER_NEG_TOL:
            raise FisherError(f"Fisher matrix at {z} has eigenvalue {lo:.3e} < -{FISHER_NEG_TOL:g}")
    return FisherMatrix(point=_real_coords(z), matrix=F, rule_id=rule.domain_id)


def bergman_density(model, z, xi):
    """|K(z, xi)|^2 / K(z, z)."""
    K = model.kernel
    pz = _inside(model.domain, z)
    px = _inside(model.domain, xi)
    kzz = float(K.diag(pz))
    if not kzz > 0.0:
        raise KernelError(f"K(z, z) = {kzz} is not positive at {z}")
    c = complex(K(pz, px))
    return (c.real**2 + c.imag**2) / kzz


def fisher_matrix(model, z, rule=None, stencil=DEFAULT_STENCIL):
    """Pulled-back Fisher metric of the Bergman family at z, in real coordinates."""
    p = _inside(model.domain, z)
    rule = model.default_rule() if rule is None else rule
    nodes = rule.nodes
    return fisher_from_log_density(lambda Z: model.log_density(Z, nodes), p, rule, stencil)


def line_rule(lo, hi, n):
    """Gauss-Legendre rule on [lo, hi], nodes stored on the real axis."""
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (hi - lo)
    nodes = (lo + half * (x + 1.0)).astype(np.complex128)[:, None]
    return QuadratureRule(nodes=nodes, weights=half * w, domain_id=f"line[{lo:g},{hi:g}]", resolution=n)


def gaussian_fisher(mu, sigma, rule=None, stencil=DEFAULT_STENCIL):
    """Numeric Fisher matrix of N(mu, sigma^2) in the coordinates (mu, sigma).

    The parameter is packed as the complex number ``mu + i sigma`` so the
    same stencil machinery as the Bergman family applies. The default rule
    is 400-point Gauss-Legendre on mu +- 12 sigma.
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if rule is None:
        rule = line_rule(mu - 12.0 * sigma, mu + 12.0 * sigma, 400)
    x = rule.nodes[:, 0].real

    def log_density(P):
        m, s = P[:, 0].real[:, None], P[:, 0].imag[:, None]
        return -0.5 * ((x - m) / s) ** 2 - np.log(s) - 0.5 * math.log(2.0 * math.pi)

    mass = float(weighted_sum(rule, np.exp(log_density(np.array([[mu + 1j * sigma]]))[0])))
    if abs(mass - 1.0) > GAUSS_NORMALIZATION_TOL:
        raise ValueError(
            f"quadrature captures mass {mass:.12f} of N({mu}, {sigma}^2); widen the truncation"
        )
    return fisher_from_log_density(log_density, np.array([mu + 1j * sigma]), rule, stencil).matrix


def pushforward_rule(f, rule2=None, resolution=None):
    """Quadrature on the target with the exclusion tube around V masked out."""
    rule2 = default_rule(f.target, resolution) if rule2 is None else rule2
    keep = ~f.excluded(rule2.nodes)
    return rule2 if keep.all() else rule2.masked(keep, tag="V-excluded")


def deficiency(f, model1, z, rule2=None, stencil=DEFAULT_STENCIL, rule1=None, tolerances=None):
    """Compare Fisher matrices before and after pushing forward along f.

    ``rule2`` integrates over the target; nodes in the exclusion tube
    around V are dropped, and if that loses more than 1e-6 of the
    probability mass the pushed density is renormalised on what remains.
    """
    tol = Tolerances() if tolerances is None else tolerances
    if model1.domain.spec != f.source.spec:
        raise KernelError(f"model lives on {model1.domain.label()}, map starts on {f.source.label()}")
    p = _inside(f.source, z)
    before = fisher_matrix(model1, p, rule1, stencil)
    rule = pushforward_rule(f, rule2)
    K = model1.kernel
    W, jinv = f.inverse_branches(rule.nodes)  # (m, N, n), (m, N)
    j2 = jinv.real**2 + jinv.imag**2
    center_q, _ = pushforward_terms(f, K, p, rule.nodes)
    mass = float(weighted_sum(rule, center_q))
    renormalize = abs(1.0 - mass) > RENORMALIZE_ABOVE

    def log_q(Z):
        c = K(Z[:, None, None, :], W[None])
        q = np.sum((c.real**2 + c.imag**2) * j2[None], axis=1) / K.diag(Z)[:, None]
        out = np.log(q)
        if renormalize:
            out -= np.log(weighted_sum(rule, q.T))[:, None]
        return out

    after = fisher_from_log_density(log_q, p, rule, stencil)
    gap = before.matrix - after.matrix
    eig = np.linalg.eigvalsh(gap)
    norm = float(np.abs(eig).max())
    return DeficiencyReport(
        point=before.point,
        fisher_before=before,
        fisher_after=after,
        gap=gap,
        min_gap_eigenvalue=float(eig.min()),
        gap_norm=norm,
        sufficient=norm <= tol.suff,
        monotone=float(eig.min()) >= -tol.mono,
        masked_mass=1.0 - mass,
    )


def score_equality_gap(f, model1, z, zeta, stencil=DEFAULT_STENCIL):
    """max over alpha and sheet pairs of |d_alpha log K(z, w_k) - d_alpha log K(z, w_l)|."""
    p = _inside(f.source, z)
    branches = local_inverses(f, zeta)
    if len(branches) < 2:
        return 0.0
    W = np.array([np.atleast_1d(w) for w, _ in branches])
    d = model1.kernel.dlog(p, W, stencil)  # (m, n)
    gap = np.abs(d[:, None, :] - d[None, :, :])
    return float(gap.max())


def factorization_residual(f, model1, K2, lam, z, xi):
    """How far P1(z, xi) is from exp(-lam D2(f z, f xi)) K1(xi, xi).

    Writing P1(z, xi) = K1(xi, xi) exp(-D1(z, xi)) turns the relative
    residual into |expm1(D1(z, xi) - lam D2(f z, f xi))|, which is exactly
    zero on the diagonal. Where K1(z, xi) = 0 the absolute residual is
    returned instead.
    """
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    K1 = model1.kernel
    pz = _inside(f.source, z)
    px = _inside(f.source, xi)
    d1 = float(diastasis_batch(K1, pz, px))
    d2 = float(diastasis_batch(K2, f.forward(pz), f.forward(px)))
    if math.isinf(d1):
        return float(math.exp(-lam * d2) * K1.diag(px))
    if math.isinf(d2):
        return 1.0
    return abs(math.expm1(d1 - lam * d2))


def ratio_values(f, model1, z_list, xi):
    """r(z, xi) = P1(z, xi) / Q(z, f(xi)) for each z in ``z_list``."""
    K = model1.kernel
    px = _inside(f.source, xi)
    zeta = f.forward(px)
    local_inverses(f, zeta)  # raises inside the exclusion tube
    out = []
    for z in z_list:
        pz = _inside(f.source, z)
        q, base = pushforward_terms(f, K, pz, zeta[None, :])
        c = complex(K(pz, px))
        p1 = (c.real**2 + c.imag**2) / float(K.diag(pz))
        out.append(p1 * float(base[0]) / float(q[0]))
    return out


def ratio_invariance(f, model1, z_list, xi):
    """Relative spread (max - min) / mean of r(z, xi) over ``z_list``."""
    if len(z_list) < 2:
        raise ValueError("ratio_invariance needs at least two parameter points")
    r = ratio_values(f, model1, z_list, xi)
    return (max(r) - min(r)) / (sum(r) / len(r))


def injectivity_verdict(f, model1, sample_z, sample_zeta, tolerances=None, rule1=None, rule2=None,
                        stencil=DEFAULT_STENCIL):
    """Run all three sufficiency tests and classify f.

    ``injective`` needs every test within tolerance; ``non-injective``
    needs at least one test above ten times its tolerance; anything else
    is ``inconclusive``. Target samples inside the exclusion tube are
    dropped.
    """
    tol = Tolerances() if tolerances is None else tolerances
    zs = [_inside(f.source, z) for z in sample_z]
    zetas = []
    for zeta in sample_zeta:
        q = as_point(zeta, f.dimension)
        if f.target.contains_many(q[None, :])[0] and not f.excluded(q[None, :])[0]:
            zetas.append(q)
    if not zs or not zetas:
        raise ValueError("injectivity_verdict: empty sample after masking the exclusion tube")
    if len(zs) < 2:
        raise ValueError("injectivity_verdict needs at least two parameter points")

    evidence = []
    defs = []
    for p in zs:
        rep = deficiency(f, model1, p, rule2=rule2, stencil=stencil, rule1=rule1, tolerances=tol)
        defs.append(rep.gap_norm)
        evidence.append(("deficiency", p, None, rep.gap_norm))
    scores = []
    for p in zs:
        for q in zetas:
            g = score_equality_gap(f, model1, p, q, stencil)
            scores.append(g)
            evidence.append(("score", p, q, g))
    spreads = []
    for q in zetas:
        xi = np.atleast_1d(local_inverses(f, q)[0][0])
        s = ratio_invariance(f, model1, zs, xi)
        spreads.append(s)
        evidence.append(("ratio", None, q, s))

    values = {"deficiency": max(defs), "score": max(scores), "ratio": max(spreads)}
    limits = {"deficiency": tol.suff, "score": tol.score_for(model1.kernel), "ratio": tol.ratio}
    passes = {k: values[k] <= limits[k] for k in values}
    if all(passes.values()):
        verdict = "injective"
    elif any(values[k] > 10.0 * limits[k] for k in values):
        verdict = "non-injective"
    else:
        verdict = "inconclusive"
    return VerdictRecord(
        verdict=verdict,
        map_label=f.label(),
        deficiency=values["deficiency"],
        score_gap=values["score"],
        ratio_spread=values["ratio"],
        tolerances=limits,
        passes=passes,
        evidence=evidence,
    )

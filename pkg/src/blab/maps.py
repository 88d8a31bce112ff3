"""Proper holomorphic maps between model domains.

Every registered map acts coordinatewise, so a map on C^n is a tuple of
one-variable factors (identity, Moebius, power). This keeps the local
inverse system explicit, which the pushforward density needs.

Off the critical image V the map is an m-sheeted covering, and the
pushforward of P(z, xi) dV(xi) has density

    Q_num(z, zeta) = sum_k |K1(z, w_k)|^2 |J f_k^{-1}(zeta)|^2 / K1(z, z)

with respect to dV(zeta), where w_k = f_k^{-1}(zeta). The pushforward of
dV itself has density ``base(zeta) = sum_k |J f_k^{-1}(zeta)|^2``.
"""

import itertools
from dataclasses import dataclass

import numpy as np

from ._grammar import parse_complex, parse_int, parse_real, reject_unknown, split_spec
from .domains import DISK, POLYDISK, Domain, annulus, as_point
from .errors import BranchPointError, ConfigError, MapError, OutsideDomainError

EXCLUSION_FRACTION = 0.02


class _Identity:
    sheets = 1
    critical_value = None

    def label(self):
        return "identity"

    def forward(self, z):
        return z

    def derivative(self, z):
        return np.ones_like(z)

    def inverses(self, zeta):
        return [zeta]


class _Mobius:
    sheets = 1
    critical_value = None

    def __init__(self, a):
        self.a = complex(a)

    def label(self):
        a = self.a
        return f"mobius:a={a.real:g}{a.imag:+g}i"

    def forward(self, z):
        a = self.a
        return (z - a) / (1.0 - np.conj(a) * z)

    def derivative(self, z):
        a = self.a
        return (1.0 - abs(a) ** 2) / (1.0 - np.conj(a) * z) ** 2

    def inverses(self, zeta):
        a = self.a
        return [(zeta + a) / (1.0 + np.conj(a) * zeta)]


class _Power:
    def __init__(self, m, on_annulus):
        self.sheets = int(m)
        # 0 is critical for z**m but lies outside an annulus
        self.critical_value = None if on_annulus else 0.0

    def label(self):
        return f"power(m={self.sheets})"

    def forward(self, z):
        return z**self.sheets

    def derivative(self, z):
        m = self.sheets
        return m * z ** (m - 1)

    def inverses(self, zeta):
        m = self.sheets
        zeta = np.asarray(zeta, dtype=np.complex128)
        principal = np.abs(zeta) ** (1.0 / m) * np.exp(1j * np.angle(zeta) / m)
        return [principal * np.exp(2j * np.pi * k / m) for k in range(m)]


@dataclass(frozen=True, eq=False)
class ProperMap:
    source: Domain
    target: Domain
    kind: str
    factors: tuple
    spec_text: str

    @property
    def dimension(self):
        return self.source.dimension

    @property
    def sheet_count(self):
        m = 1
        for f in self.factors:
            m *= f.sheets
        return m

    @property
    def is_injective(self):
        return self.sheet_count == 1

    @property
    def critical_image(self):
        """Human-readable description of V, the image of the critical set."""
        parts = []
        for i, f in enumerate(self.factors):
            if f.critical_value is not None:
                parts.append(f"zeta{i + 1} = {f.critical_value:g}" if self.dimension > 1 else "{0}")
        return " or ".join(parts) if parts else "empty"

    def label(self):
        return self.spec_text

    # -- batched evaluators; points have shape (..., n) -----------------------

    def forward(self, z):
        z = np.asarray(z, dtype=np.complex128)
        return np.stack([f.forward(z[..., i]) for i, f in enumerate(self.factors)], axis=-1)

    def jacobian_matrix(self, z):
        z = np.asarray(z, dtype=np.complex128)
        d = np.stack([f.derivative(z[..., i]) for i, f in enumerate(self.factors)], axis=-1)
        return d[..., :, None] * np.eye(self.dimension)

    def jacobian(self, z):
        """Complex Jacobian determinant."""
        z = np.asarray(z, dtype=np.complex128)
        out = np.ones(z.shape[:-1], dtype=np.complex128)
        for i, f in enumerate(self.factors):
            out = out * f.derivative(z[..., i])
        return out

    def critical_distance(self, zeta):
        """Distance from zeta to V (inf when V is empty)."""
        zeta = np.asarray(zeta, dtype=np.complex128)
        dist = np.full(zeta.shape[:-1], np.inf)
        for i, f in enumerate(self.factors):
            if f.critical_value is not None:
                dist = np.minimum(dist, np.abs(zeta[..., i] - f.critical_value))
        return dist

    def excluded(self, zeta):
        return self.critical_distance(zeta) < EXCLUSION_FRACTION * self.target.scale

    def inverse_branches(self, zeta):
        """All local inverses and 1/J_f there, shapes (m, ..., n) and (m, ...).

        Branches are ordered lexicographically over the factors; within a
        power factor the principal root comes first.
        """
        zeta = np.asarray(zeta, dtype=np.complex128)
        per = [f.inverses(zeta[..., i]) for i, f in enumerate(self.factors)]
        W = []
        for combo in itertools.product(*per):
            W.append(np.stack(np.broadcast_arrays(*combo), axis=-1))
        W = np.stack(W)
        return W, 1.0 / self.jacobian(W)


def make_map(kind, *, a=None, m=None, r=None, domain=None, factors=None, source=None, target=None):
    """Register a proper holomorphic map.

    Kinds: ``identity`` (on ``domain``, default the disk), ``mobius``
    (``a``, disk automorphism), ``powerdisk`` (``m``), ``powerann``
    (``r``, ``m``: annulus(r) onto annulus(r**m)) and ``product``
    (``factors``: two one-variable disk maps, acting on the polydisk).
    ``source``/``target``, when given, must agree with the map's natural
    pairing.
    """
    if kind == "identity":
        dom = domain if domain is not None else (source if source is not None else DISK)
        pm = ProperMap(dom, dom, "identity", tuple(_Identity() for _ in range(dom.dimension)), "identity")
    elif kind == "mobius":
        if a is None:
            raise MapError("mobius needs the parameter a")
        a = complex(a)
        if not abs(a) < 1.0:
            raise MapError(f"mobius parameter must satisfy |a| < 1, got |a| = {abs(a):g}")
        f = _Mobius(a)
        pm = ProperMap(DISK, DISK, "mobius", (f,), f.label())
    elif kind == "powerdisk":
        m = _check_power(m)
        pm = ProperMap(DISK, DISK, "powerdisk", (_Power(m, False),), f"powerdisk:m={m}")
    elif kind == "powerann":
        m = _check_power(m)
        if r is None or not (0.0 < r < 1.0):
            raise MapError(f"powerann needs 0 < r < 1, got r={r}")
        pm = ProperMap(annulus(r), annulus(r**m), "powerann", (_Power(m, True),), f"powerann:r={r:g},m={m}")
    elif kind == "product":
        if factors is None or len(factors) != 2:
            raise MapError("product maps take exactly two one-variable factors")
        fs = []
        for g in factors:
            if g.dimension != 1 or g.source.kind != "unit_disk" or g.target.kind != "unit_disk":
                raise MapError(f"product factors must be self-maps of the disk, got {g.label()}")
            fs.append(g.factors[0])
        text = "product:" + ";".join(g.label() for g in factors)
        pm = ProperMap(POLYDISK, POLYDISK, "product", tuple(fs), text)
    else:
        raise MapError(f"unknown map kind {kind!r}")
    if source is not None and source.spec != pm.source.spec:
        raise MapError(f"{pm.label()} is defined on {pm.source.label()}, not {source.label()}")
    if target is not None and target.spec != pm.target.spec:
        raise MapError(f"{pm.label()} maps onto {pm.target.label()}, not {target.label()}")
    return pm


def _check_power(m):
    if m is None or int(m) != m or int(m) < 2:
        raise MapError(f"power maps need an integer m >= 2, got {m}")
    return int(m)


def parse_map(text, domain=None):
    """Parse ``identity``, ``mobius:a=0.3+0i``, ``powerdisk:m=2``,
    ``powerann:r=0.5,m=2`` or ``product:<map>;<map>``."""
    stripped = text.strip()
    if stripped.lower().startswith("product:"):
        parts = [p for p in stripped[len("product:"):].split(";")]
        if len(parts) != 2:
            raise ConfigError(f"product maps need two factors separated by ';', got {text!r}")
        try:
            return make_map("product", factors=[parse_map(p, DISK) for p in parts])
        except MapError as exc:
            raise ConfigError(str(exc)) from exc
    name, params = split_spec(stripped)
    try:
        if name == "identity":
            reject_unknown(params, set(), text)
            return make_map("identity", domain=domain)
        if name == "mobius":
            reject_unknown(params, {"a"}, text)
            return make_map("mobius", a=parse_complex(params.get("a", "nan"), "mobius a"))
        if name == "powerdisk":
            reject_unknown(params, {"m"}, text)
            return make_map("powerdisk", m=parse_int(params.get("m", "2"), "powerdisk m"))
        if name == "powerann":
            reject_unknown(params, {"r", "m"}, text)
            if "r" not in params:
                raise ConfigError(f"powerann needs r=..., got {text!r}")
            return make_map(
                "powerann",
                r=parse_real(params["r"], "powerann r"),
                m=parse_int(params.get("m", "2"), "powerann m"),
            )
    except MapError as exc:
        raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown map {name!r}; expected identity, mobius, powerdisk, powerann or product")


# The maps every acceptance sweep runs over.
REGISTERED = {
    "identity": "identity",
    "mobius": "mobius:a=0.3+0i",
    "powerdisk": "powerdisk:m=2",
    "powerann": "powerann:r=0.5,m=2",
    "product-mobius": "product:mobius:a=0.3;mobius:a=-0.2i",
    "product-power": "product:powerdisk:m=2;identity",
}


def registered_maps():
    return {name: parse_map(text) for name, text in REGISTERED.items()}


# ---------------------------------------------------------------------------
# point-wise operations
# ---------------------------------------------------------------------------

def _target_point(f, zeta):
    p = as_point(zeta, f.dimension)
    if not f.target.contains_many(p[None, :])[0]:
        raise OutsideDomainError(f"{zeta} is not inside {f.target.label()}")
    if f.excluded(p[None, :])[0]:
        raise BranchPointError(
            f"{zeta} lies within {EXCLUSION_FRACTION:g} of the critical image V = {f.critical_image}"
        )
    return p


def _unpack(p):
    return complex(p[0]) if p.size == 1 else p


def local_inverses(f, zeta):
    """The m local inverses at zeta with the Jacobian of each inverse branch."""
    p = _target_point(f, zeta)
    W, jinv = f.inverse_branches(p)
    return [(_unpack(W[k]), complex(jinv[k])) for k in range(W.shape[0])]


def pushforward_terms(f, K1, z, Z):
    """Batched pushforward density at target points ``Z`` (shape (N, n)).

    Returns ``(Q_num, base)``, both of shape (N,).
    """
    z = np.asarray(z, dtype=np.complex128).reshape(f.dimension)
    W, jinv = f.inverse_branches(Z)
    j2 = jinv.real**2 + jinv.imag**2
    kv = K1(z, W)
    q = np.sum((kv.real**2 + kv.imag**2) * j2, axis=0) / K1.diag(z)
    return q, np.sum(j2, axis=0)


def pushforward_density(f, K1, z, zeta):
    """``(Q_num(z, zeta), base(zeta))``; the conditional density is their ratio."""
    if K1.domain.spec != f.source.spec:
        raise MapError(f"kernel lives on {K1.domain.label()} but the map starts on {f.source.label()}")
    zp = as_point(z, f.dimension)
    if not f.source.contains_many(zp[None, :])[0]:
        raise OutsideDomainError(f"{z} is not inside {f.source.label()}")
    p = _target_point(f, zeta)
    q, base = pushforward_terms(f, K1, zp, p[None, :])
    return float(q[0]), float(base[0])


def source_point(f, z):
    p = as_point(z, f.dimension)
    if not f.source.contains_many(p[None, :])[0]:
        raise OutsideDomainError(f"{z} is not inside {f.source.label()}")
    return p


__all__ = [
    "ProperMap",
    "REGISTERED",
    "local_inverses",
    "make_map",
    "parse_map",
    "pushforward_density",
    "pushforward_terms",
    "registered_maps",
]

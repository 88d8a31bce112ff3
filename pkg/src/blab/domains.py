"""Model bounded domains in C^n (n = 1, 2).

A domain is a small immutable value: a :class:`DomainSpec` plus the
analytic volume. Points are complex numpy arrays whose last axis has
length ``n``; a bare complex number is accepted for n = 1.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._grammar import parse_real, reject_unknown, split_spec
from .errors import ConfigError, DomainError

KINDS = ("unit_disk", "annulus", "polydisk", "unit_ball", "ellipse")

_ALIASES = {
    "disk": "unit_disk",
    "unit_disk": "unit_disk",
    "annulus": "annulus",
    "polydisk": "polydisk",
    "ball2": "unit_ball",
    "ball": "unit_ball",
    "unit_ball": "unit_ball",
    "ellipse": "ellipse",
}


@dataclass(frozen=True)
class DomainSpec:
    kind: str
    r: float = None
    a: float = None
    b: float = None

    @property
    def dimension(self):
        return 2 if self.kind in ("polydisk", "unit_ball") else 1

    def label(self):
        if self.kind == "unit_disk":
            return "disk"
        if self.kind == "annulus":
            return f"annulus:r={self.r:g}"
        if self.kind == "polydisk":
            return "polydisk"
        if self.kind == "unit_ball":
            return "ball2"
        return f"ellipse:a={self.a:g},b={self.b:g}"


@dataclass(frozen=True)
class Domain:
    spec: DomainSpec
    volume_hint: float = None

    @property
    def dimension(self):
        return self.spec.dimension

    @property
    def kind(self):
        return self.spec.kind

    @property
    def scale(self):
        """Outer radius; sets the size of the branch-point exclusion tube."""
        if self.kind == "ellipse":
            return max(self.spec.a, self.spec.b)
        return 1.0

    def label(self):
        return self.spec.label()

    def contains(self, point):
        return contains(self, point)

    def contains_many(self, points):
        """Vectorised strict membership for an array of shape (..., n)."""
        p = np.asarray(points, dtype=np.complex128)
        if self.dimension == 1 and (p.ndim == 0 or p.shape[-1] != 1):
            p = p[..., None]
        if p.shape[-1] != self.dimension:
            raise DomainError(
                f"points have dimension {p.shape[-1]}, domain {self.label()} has {self.dimension}"
            )
        s = self.spec
        a2 = p.real**2 + p.imag**2
        if s.kind == "unit_disk":
            return a2[..., 0] < 1.0
        if s.kind == "annulus":
            return (a2[..., 0] > s.r * s.r) & (a2[..., 0] < 1.0)
        if s.kind == "polydisk":
            return np.all(a2 < 1.0, axis=-1)
        if s.kind == "unit_ball":
            return np.sum(a2, axis=-1) < 1.0
        x = p[..., 0].real / s.a
        y = p[..., 0].imag / s.b
        return x * x + y * y < 1.0


def make_domain(spec):
    """Validate ``spec`` and attach its analytic volume."""
    if spec.kind not in KINDS:
        raise DomainError(f"unsupported domain kind {spec.kind!r}; choose from {KINDS}")
    if spec.kind == "annulus":
        if spec.r is None or not (0.0 < spec.r < 1.0):
            raise DomainError(f"annulus inner radius r must lie in (0, 1), got r={spec.r}")
        vol = math.pi * (1.0 - spec.r**2)
    elif spec.kind == "ellipse":
        for name, v in (("a", spec.a), ("b", spec.b)):
            if v is None or not (v > 0.0) or not math.isfinite(v):
                raise DomainError(f"ellipse semi-axis {name} must be a positive finite real, got {v}")
        vol = math.pi * spec.a * spec.b
    elif spec.kind == "unit_disk":
        vol = math.pi
    elif spec.kind == "polydisk":
        vol = math.pi**2
    else:
        vol = math.pi**2 / 2.0
    return Domain(spec=spec, volume_hint=vol)


def as_point(point, n):
    """Coerce ``point`` to a complex array of shape (n,)."""
    p = np.atleast_1d(np.asarray(point, dtype=np.complex128))
    if p.shape != (n,):
        raise DomainError(f"expected a point in C^{n}, got shape {p.shape}")
    return p


def contains(domain, point):
    """Strict interior membership (the boundary is excluded)."""
    p = as_point(point, domain.dimension)
    return bool(domain.contains_many(p[None, :])[0])


def parse_domain(text):
    """Parse ``disk``, ``annulus:r=0.5``, ``polydisk``, ``ball2``, ``ellipse:a=1,b=0.5``."""
    name, params = split_spec(text)
    kind = _ALIASES.get(name)
    if kind is None:
        raise ConfigError(f"unknown domain {name!r}; expected one of disk, annulus, polydisk, ball2, ellipse")
    if kind == "annulus":
        reject_unknown(params, {"r"}, text)
        if "r" not in params:
            raise ConfigError(f"annulus needs r=..., got {text!r}")
        spec = DomainSpec(kind, r=parse_real(params["r"], "annulus r"))
    elif kind == "ellipse":
        reject_unknown(params, {"a", "b"}, text)
        try:
            spec = DomainSpec(kind, a=parse_real(params["a"], "ellipse a"), b=parse_real(params["b"], "ellipse b"))
        except KeyError:
            raise ConfigError(f"ellipse needs a=...,b=..., got {text!r}") from None
    else:
        reject_unknown(params, set(), text)
        spec = DomainSpec(kind)
    try:
        return make_domain(spec)
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc


DISK = make_domain(DomainSpec("unit_disk"))
POLYDISK = make_domain(DomainSpec("polydisk"))
BALL = make_domain(DomainSpec("unit_ball"))


def annulus(r):
    return make_domain(DomainSpec("annulus", r=r))


def ellipse(a, b):
    return make_domain(DomainSpec("ellipse", a=a, b=b))

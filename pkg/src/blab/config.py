"""Experiment configuration: a flat ``key = value`` file with ``#`` comments.

Example::

    experiment = verdict
    domain1 = disk
    map = mobius:a=0.3
    sample = 0.1; 0.4i; -0.5+0.2i
    sample2 = polar:rmin=0.2,rmax=0.5,nr=2,nt=4
    tolerances = suff=1e-3, ratio=1e-4
    expected = injective
    output_dir = out

Point lists separate points with ``;`` and the coordinates of a point in
C^2 with ``,``. Two generators are also accepted:

* ``polar:rmin=..,rmax=..,nr=..,nt=..,phase=..`` (one complex variable):
  ``nr`` equally spaced radii times ``nt`` angles ``2 pi (j + phase)/nt``;
  a zero radius contributes the single point 0.
* ``random:n=..,rmin=..,rmax=..,seed=..``: each coordinate uniform in the
  planar annulus ``rmin < |w| < rmax`` (seeded PCG64), redrawn until the
  point lies in the domain.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ._grammar import parse_complex, parse_int, parse_real, reject_unknown, split_spec
from .errors import ConfigError

EXPERIMENTS = (
    "kernel-table",
    "metric-table",
    "fisher-vs-bergman",
    "transformation-check",
    "isometry-check",
    "pushforward-check",
    "deficiency-sweep",
    "score-sweep",
    "factorization-check",
    "ratio-check",
    "verdict",
)

# default thresholds; the names in infogeo.Tolerances are shared
DEFAULT_TOLERANCES = {
    "kernel": 1e-6,
    "fisher": 1e-3,
    "transform": 1e-8,
    "isometry": 1e-6,
    "mass": 1e-6,
    "factor": 1e-7,
    "witness": 1e-2,
    "suff": 1e-3,
    "score_closed": 1e-6,
    "score_stencil": 1e-4,
    "ratio": 1e-4,
    "mono": 1e-4,
}

KEYS = (
    "experiment", "domain1", "domain2", "kernel1", "kernel2", "map", "resolution",
    "degree", "j", "sample", "sample2", "tolerances", "expected", "lambda", "output_dir",
)

EXPECTED = ("holds", "violated", "injective", "non-injective", "inconclusive")


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    domain1: str = "disk"
    domain2: str = None
    kernel1: str = None
    kernel2: str = None
    map: str = None
    resolution: int = None
    degree: int = None
    J: int = None
    sample: str = None
    sample2: str = None
    tolerances: dict = field(default_factory=dict)
    expected: str = None
    lam: float = 1.0
    output_dir: str = "."
    source: str = "<config>"
    lines: dict = field(default_factory=dict, compare=False, repr=False)

    def tolerance(self, name):
        return self.tolerances.get(name, DEFAULT_TOLERANCES[name])

    def echo(self):
        """(key, value) pairs of every field that was set, in a fixed order."""
        rows = [("experiment", self.experiment), ("domain1", self.domain1)]
        for key in ("domain2", "kernel1", "kernel2", "map", "resolution", "degree", "J",
                    "sample", "sample2", "expected"):
            value = getattr(self, key)
            if value is not None:
                rows.append((key, str(value)))
        rows.append(("lambda", repr(self.lam)))
        for name in sorted(DEFAULT_TOLERANCES):
            rows.append((f"tol.{name}", repr(self.tolerance(name))))
        return rows


def _parse_tolerances(text, where):
    out = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        if "=" not in item:
            raise ConfigError(f"{where}: tolerance override {item!r} is not name=value")
        name, value = (s.strip().lower() for s in item.split("=", 1))
        if name not in DEFAULT_TOLERANCES:
            raise ConfigError(f"{where}: unknown tolerance {name!r}; known: {sorted(DEFAULT_TOLERANCES)}")
        v = parse_real(value, f"tolerance {name}")
        if not (v > 0 and math.isfinite(v)):
            raise ConfigError(f"{where}: tolerance {name} must be positive, got {value}")
        out[name] = v
    return out


def parse_config_text(text, source="<config>"):
    raw = {}
    lines = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lower()
        if key not in KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}; known: {', '.join(KEYS)}")
        if key in raw:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r} (first set on line {lines[key]})")
        if not value:
            raise ConfigError(f"{source}:{lineno}: empty value for {key!r}")
        raw[key] = value
        lines[key] = lineno

    def where(key):
        return f"{source}:{lines[key]} ({key})"

    if "experiment" not in raw:
        raise ConfigError(f"{source}: missing required key 'experiment'")
    exp = raw["experiment"].lower()
    if exp not in EXPERIMENTS:
        raise ConfigError(f"{where('experiment')}: unknown experiment {exp!r}; choose from {', '.join(EXPERIMENTS)}")

    kw = {"experiment": exp, "source": source, "lines": lines}
    for key in ("domain1", "domain2", "kernel1", "kernel2", "map", "sample", "sample2", "output_dir"):
        if key in raw:
            kw[key] = raw[key]
    for key, name in (("resolution", "resolution"), ("degree", "degree"), ("j", "J")):
        if key in raw:
            try:
                kw[name] = parse_int(raw[key], key)
            except ConfigError as exc:
                raise ConfigError(f"{where(key)}: {exc}") from None
    if "lambda" in raw:
        try:
            lam = parse_real(raw["lambda"], "lambda")
        except ConfigError as exc:
            raise ConfigError(f"{where('lambda')}: {exc}") from None
        if not lam > 0:
            raise ConfigError(f"{where('lambda')}: lambda must be positive")
        kw["lam"] = lam
    if "tolerances" in raw:
        kw["tolerances"] = _parse_tolerances(raw["tolerances"], where("tolerances"))
    if "expected" in raw:
        e = raw["expected"].lower()
        if e not in EXPECTED:
            raise ConfigError(f"{where('expected')}: expected must be one of {', '.join(EXPECTED)}")
        kw["expected"] = e
    return ExperimentConfig(**kw)


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config_text(text, source=str(path))


# ---------------------------------------------------------------------------
# point samples
# ---------------------------------------------------------------------------

def _polar(params, text):
    reject_unknown(params, {"rmin", "rmax", "nr", "nt", "phase"}, text)
    rmin = parse_real(params.get("rmin", "0"), "polar rmin")
    rmax = parse_real(params.get("rmax", "0.5"), "polar rmax")
    nr = parse_int(params.get("nr", "4"), "polar nr")
    nt = parse_int(params.get("nt", "8"), "polar nt")
    phase = parse_real(params.get("phase", "0"), "polar phase")
    if nr < 1 or nt < 1 or rmax < rmin or rmin < 0:
        raise ConfigError(f"invalid polar grid {text!r}")
    radii = np.linspace(rmin, rmax, nr) if nr > 1 else np.array([rmax])
    ang = np.exp(2j * np.pi * (np.arange(nt) + phase) / nt)
    pts = []
    for r in radii:
        pts.extend([0j] if r == 0 else list(r * ang))
    return [np.array([p]) for p in pts]


def _random(params, text, domain):
    reject_unknown(params, {"n", "rmin", "rmax", "seed"}, text)
    n = parse_int(params.get("n", "10"), "random n")
    rmin = parse_real(params.get("rmin", "0"), "random rmin")
    rmax = parse_real(params.get("rmax", "0.9"), "random rmax")
    seed = parse_int(params.get("seed", "0"), "random seed")
    if n < 1 or not 0 <= rmin < rmax:
        raise ConfigError(f"invalid random sample {text!r}")
    rng = np.random.Generator(np.random.PCG64(seed))
    dim = domain.dimension
    pts = []
    for _ in range(1000 * n):
        r = np.sqrt(rng.uniform(rmin**2, rmax**2, dim))
        p = r * np.exp(2j * np.pi * rng.uniform(size=dim))
        if domain.contains_many(p[None, :])[0]:
            pts.append(p)
            if len(pts) == n:
                return pts
    raise ConfigError(f"random sample {text!r} rarely lands inside {domain.label()}")


def parse_sample(text, domain):
    """Points (each an (n,) complex array) from a point list or generator."""
    head = text.split(":", 1)[0].strip().lower()
    if head in ("polar", "random"):
        _, params = split_spec(text)
        if head == "polar":
            if domain.dimension != 1:
                raise ConfigError("polar grids need a one-variable domain; use an explicit list or random:")
            pts = _polar(params, text)
        else:
            pts = _random(params, text, domain)
    else:
        pts = []
        for item in filter(None, (s.strip() for s in text.split(";"))):
            coords = [parse_complex(c.strip(), "sample coordinate") for c in item.split(",")]
            if len(coords) != domain.dimension:
                raise ConfigError(
                    f"sample point {item!r} has {len(coords)} coordinate(s), {domain.label()} needs {domain.dimension}"
                )
            pts.append(np.array(coords, dtype=np.complex128))
    if not pts:
        raise ConfigError(f"sample {text!r} is empty")
    inside = domain.contains_many(np.array(pts))
    if not inside.all():
        bad = pts[int(np.flatnonzero(~inside)[0])]
        raise ConfigError(f"sample point {bad} is not inside {domain.label()}")
    return pts

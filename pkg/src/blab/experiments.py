"""Config-driven experiments writing a CSV table and a plain-text report.

Every experiment is a generator of CSV rows plus a summary function. The
summary only ever sees the CSV as written to disk (re-read and parsed), so
the report is a pure function of the table and the recorded tolerances.
"""

import csv
import io
import math
import os
import time
from dataclasses import dataclass

import numpy as np

from . import accel
from ._grammar import split_spec
from .config import parse_sample
from .domains import parse_domain
from .errors import BlabError, ConfigError, DomainError, KernelError, MapError
from .geometry import bergman_metric, isometry_defect, realify, transformation_residual
from .infogeo import (
    StatModel,
    Tolerances,
    deficiency,
    factorization_residual,
    fisher_matrix,
    injectivity_verdict,
    ratio_values,
    score_equality_gap,
)
from .kernels import DEFAULT_DEGREE, DEFAULT_J, make_kernel
from .maps import parse_map, pushforward_terms
from .numerics import default_rule, weighted_sum

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

SETUP_ERRORS = (ConfigError, DomainError, MapError, KernelError)


@dataclass
class Outcome:
    status: int
    csv_path: str
    report_path: str
    passed: bool
    report: str


# ---------------------------------------------------------------------------
# setup
# ---------------------------------------------------------------------------

def _kernel(domain, spec, cfg):
    if spec is None:
        spec = {"unit_disk": "closed", "polydisk": "closed", "unit_ball": "closed",
                "annulus": "series"}.get(domain.kind, "ortho")
    name, params = split_spec(spec)
    if name == "closed":
        return make_kernel(domain, "closed_form")
    if name == "series":
        J = int(params.get("j", cfg.J if cfg.J is not None else DEFAULT_J))
        return make_kernel(domain, "annulus_series", J=J)
    if name == "ortho":
        deg = int(params.get("deg", cfg.degree if cfg.degree is not None else DEFAULT_DEGREE))
        res = params.get("res", cfg.resolution)
        return make_kernel(domain, "orthonormalized", degree=deg, resolution=None if res is None else int(res))
    raise ConfigError(f"unknown kernel spec {spec!r}; expected closed, series:J=..., ortho:deg=...,res=...")


class Context:
    """Everything an experiment needs, built from a validated config."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.domain1 = parse_domain(cfg.domain1)
        self.map = None
        if cfg.map is not None:
            self.map = parse_map(cfg.map, self.domain1)
            if self.map.source.spec != self.domain1.spec:
                raise ConfigError(
                    f"map {cfg.map!r} starts on {self.map.source.label()}, but domain1 is {self.domain1.label()}"
                )
            self.domain2 = self.map.target
            if cfg.domain2 is not None and parse_domain(cfg.domain2).spec != self.domain2.spec:
                raise ConfigError(f"domain2 {cfg.domain2!r} does not match the target {self.domain2.label()} of the map")
        else:
            self.domain2 = parse_domain(cfg.domain2) if cfg.domain2 is not None else self.domain1
        self.sample = parse_sample(cfg.sample or "0", self.domain1)
        self.sample2_text = cfg.sample2
        self.K1 = _kernel(self.domain1, cfg.kernel1, cfg)
        self._K2 = None
        self.tol = Tolerances(
            suff=cfg.tolerance("suff"),
            score_closed=cfg.tolerance("score_closed"),
            score_stencil=cfg.tolerance("score_stencil"),
            ratio=cfg.tolerance("ratio"),
            mono=cfg.tolerance("mono"),
        )

    def sample2(self, domain):
        if self.sample2_text is None:
            return None
        return parse_sample(self.sample2_text, domain)

    @property
    def K2(self):
        if self._K2 is None:
            self._K2 = _kernel(self.domain2, self.cfg.kernel2, self.cfg)
        return self._K2

    def rule(self, domain):
        return default_rule(domain, self.cfg.resolution)

    def need_map(self):
        if self.map is None:
            raise ConfigError(f"{self.cfg.source}: experiment {self.cfg.experiment!r} needs a 'map' entry")
        return self.map


def _pairs(a, b):
    if b is None:
        return [(p, q) for p in a for q in a]
    if len(a) != len(b):
        raise ConfigError(f"sample and sample2 must have the same length for pairing ({len(a)} vs {len(b)})")
    return list(zip(a, b))


def _pcols(prefix, n):
    if n == 1:
        return [f"{prefix}_re", f"{prefix}_im"]
    return [f"{prefix}{i + 1}_{part}" for i in range(n) for part in ("re", "im")]


def _pvals(p, n):
    if p is None:
        return [None] * (2 * n)
    p = np.atleast_1d(p)
    return [v for c in p for v in (c.real, c.imag)]


# ---------------------------------------------------------------------------
# experiments: each returns (header, row iterator, summarize)
# ---------------------------------------------------------------------------

def _holds_or_violated(cfg, value, tol, label, factor=1.0, witness=None):
    """Check a max-statistic against the config's expectation."""
    if cfg.expected == "violated":
        limit = witness if witness is not None else factor * tol
        return [(f"{label} > {limit!r}", value > limit)]
    return [(f"{label} <= {tol!r}", value <= tol)]


def exp_kernel_table(ctx):
    cfg, n = ctx.cfg, ctx.domain1.dimension
    K1 = ctx.K1
    ref = _kernel(ctx.domain1, cfg.kernel2 or "closed", cfg)
    xis = ctx.sample2(ctx.domain1) or ctx.sample
    header = _pcols("z", n) + _pcols("xi", n) + ["k_re", "k_im", "ref_re", "ref_im", "abs_err"]

    def rows():
        for z in ctx.sample:
            for xi in xis:
                k = complex(K1(z, xi))
                r = complex(ref(z, xi))
                yield _pvals(z, n) + _pvals(xi, n) + [k.real, k.imag, r.real, r.imag, abs(k - r)]

    def summarize(cols):
        err = float(np.max(cols["abs_err"]))
        return [("max abs_err", err)], _holds_or_violated(cfg, err, cfg.tolerance("kernel"), "max abs_err",
                                                           witness=cfg.tolerance("witness"))

    return header, rows(), summarize


def exp_metric_table(ctx):
    n = ctx.domain1.dimension
    idx = [(a, b) for a in range(n) for b in range(n)]
    header = _pcols("z", n) + [f"g{a + 1}{b + 1}_{p}" for a, b in idx for p in ("re", "im")] + ["min_eig"]

    def rows():
        for z in ctx.sample:
            g = bergman_metric(ctx.K1, z)
            vals = [v for a, b in idx for v in (g.matrix[a, b].real, g.matrix[a, b].imag)]
            yield _pvals(z, n) + vals + [float(g.eigenvalues().min())]

    def summarize(cols):
        lo = float(np.min(cols["min_eig"]))
        return [("min eigenvalue", lo)], [("min eigenvalue > 0", lo > 0.0)]

    return header, rows(), summarize


def exp_fisher_vs_bergman(ctx):
    cfg, n = ctx.cfg, ctx.domain1.dimension
    model = StatModel(ctx.K1)
    rule = ctx.K1.rule if ctx.K1.rule is not None else ctx.rule(ctx.domain1)
    iu = list(zip(*np.triu_indices(2 * n)))
    header = (_pcols("z", n) + [f"fisher{i + 1}{j + 1}" for i, j in iu]
              + [f"bergman2x{i + 1}{j + 1}" for i, j in iu] + ["max_abs_err"])

    def rows():
        for z in ctx.sample:
            F = fisher_matrix(model, z, rule).matrix
            B = 2.0 * realify(bergman_metric(ctx.K1, z).matrix)
            yield (_pvals(z, n) + [F[i, j] for i, j in iu] + [B[i, j] for i, j in iu]
                   + [float(np.abs(F - B).max())])

    def summarize(cols):
        err = float(np.max(cols["max_abs_err"]))
        return [("max entrywise error", err)], [(f"max entrywise error <= {cfg.tolerance('fisher')!r}",
                                                 err <= cfg.tolerance("fisher"))]

    return header, rows(), summarize


def exp_transformation_check(ctx):
    cfg, f = ctx.cfg, ctx.need_map()
    n = f.dimension
    pairs = _pairs(ctx.sample, ctx.sample2(ctx.domain1))
    header = _pcols("z", n) + _pcols("xi", n) + ["absolute", "residual"]

    def rows():
        for z, xi in pairs:
            absolute = complex(ctx.K1(z, xi)) == 0
            res = transformation_residual(ctx.K1, ctx.K2, f, z, xi, absolute=absolute)
            yield _pvals(z, n) + _pvals(xi, n) + [int(absolute), res]

    def summarize(cols):
        worst = float(np.max(cols["residual"]))
        return [("max residual", worst)], _holds_or_violated(cfg, worst, cfg.tolerance("transform"), "max residual",
                                                             witness=cfg.tolerance("witness"))

    return header, rows(), summarize


def exp_isometry_check(ctx):
    cfg, f = ctx.cfg, ctx.need_map()
    n = f.dimension
    header = _pcols("z", n) + ["trace_ratio", "lambda_hat", "deviation"]

    def rows():
        rep = isometry_defect(ctx.K1, ctx.K2, f, ctx.sample)
        for z, r, d in zip(rep.sample, rep.ratios, rep.deviations):
            yield _pvals(z, n) + [r, rep.lambda_hat, d]

    def summarize(cols):
        lam = float(cols["lambda_hat"][0])
        defect = float(np.max(cols["deviation"]))
        return ([("lambda_hat", lam), ("defect", defect)],
                _holds_or_violated(cfg, defect, cfg.tolerance("isometry"), "defect", witness=cfg.tolerance("witness")))

    return header, rows(), summarize


def exp_pushforward_check(ctx):
    cfg, f = ctx.cfg, ctx.need_map()
    n = f.dimension
    rule = ctx.rule(f.target)
    header = _pcols("z", n) + ["mass", "abs_err"]

    def rows():
        for z in ctx.sample:
            q, _ = pushforward_terms(f, ctx.K1, z, rule.nodes)
            mass = float(weighted_sum(rule, q))
            yield _pvals(z, n) + [mass, abs(mass - 1.0)]

    def summarize(cols):
        err = float(np.max(cols["abs_err"]))
        return [("max |mass - 1|", err)], [(f"max |mass - 1| <= {cfg.tolerance('mass')!r}", err <= cfg.tolerance("mass"))]

    return header, rows(), summarize


def exp_deficiency_sweep(ctx):
    cfg, f = ctx.cfg, ctx.need_map()
    n = f.dimension
    model = StatModel(ctx.K1)
    rule2 = ctx.rule(f.target) if cfg.resolution is not None else None
    header = _pcols("z", n) + ["min_gap_eig", "gap_norm", "masked_mass"]

    def rows():
        for z in ctx.sample:
            rep = deficiency(f, model, z, rule2=rule2, tolerances=ctx.tol)
            yield _pvals(z, n) + [rep.min_gap_eigenvalue, rep.gap_norm, rep.masked_mass]

    def summarize(cols):
        lo = float(np.min(cols["min_gap_eig"]))
        hi = float(np.max(cols["gap_norm"]))
        checks = [(f"min gap eigenvalue >= {-ctx.tol.mono!r}", lo >= -ctx.tol.mono)]
        if cfg.expected in ("holds", "violated"):
            checks += _holds_or_violated(cfg, hi, ctx.tol.suff, "max gap norm", factor=10.0)
        return [("min gap eigenvalue", lo), ("max gap norm", hi)], checks

    return header, rows(), summarize


def exp_score_sweep(ctx):
    cfg, f = ctx.cfg, ctx.need_map()
    n = f.dimension
    model = StatModel(ctx.K1)
    zetas = ctx.sample2(f.target)
    if zetas is None:
        raise ConfigError(f"{cfg.source}: score-sweep needs 'sample2' (points of the target)")
    tol = ctx.tol.score_for(ctx.K1)
    header = _pcols("z", n) + _pcols("zeta", n) + ["gap"]

    def rows():
        for z in ctx.sample:
            for zeta in zetas:
                yield _pvals(z, n) + _pvals(zeta, n) + [score_equality_gap(f, model, z, zeta)]

    def summarize(cols):
        g = float(np.max(cols["gap"]))
        return [("max score gap", g)], _holds_or_violated(cfg, g, tol, "max score gap", factor=10.0)

    return header, rows(), summarize


def exp_factorization_check(ctx):
    cfg, f = ctx.cfg, ctx.need_map()
    n = f.dimension
    model = StatModel(ctx.K1)
    pairs = _pairs(ctx.sample, ctx.sample2(ctx.domain1))
    header = ["diagonal"] + _pcols("z", n) + _pcols("xi", n) + ["residual"]

    def rows():
        for z, xi in pairs:
            yield [0] + _pvals(z, n) + _pvals(xi, n) + [factorization_residual(f, model, ctx.K2, cfg.lam, z, xi)]
        for z in ctx.sample:
            yield [1] + _pvals(z, n) + _pvals(z, n) + [factorization_residual(f, model, ctx.K2, cfg.lam, z, z)]

    def summarize(cols):
        diag = cols["diagonal"] == 1
        off = float(np.max(cols["residual"][~diag])) if (~diag).any() else 0.0
        on = float(np.max(cols["residual"][diag])) if diag.any() else 0.0
        checks = [("diagonal residual == 0", on == 0.0)]
        checks += _holds_or_violated(cfg, off, cfg.tolerance("factor"), "max residual",
                                     witness=cfg.tolerance("witness"))
        return [("max residual", off), ("max diagonal residual", on)], checks

    return header, rows(), summarize


def exp_ratio_check(ctx):
    cfg, f = ctx.cfg, ctx.need_map()
    n = f.dimension
    model = StatModel(ctx.K1)
    xis = ctx.sample2(ctx.domain1)
    if xis is None:
        raise ConfigError(f"{cfg.source}: ratio-check needs 'sample2' (the xi points)")
    if len(ctx.sample) < 2:
        raise ConfigError(f"{cfg.source}: ratio-check needs at least two z points in 'sample'")
    header = _pcols("xi", n) + _pcols("z", n) + ["ratio", "spread"]

    def rows():
        for xi in xis:
            r = ratio_values(f, model, ctx.sample, xi)
            spread = (max(r) - min(r)) / (sum(r) / len(r))
            for z, v in zip(ctx.sample, r):
                yield _pvals(xi, n) + _pvals(z, n) + [v, spread]

    def summarize(cols):
        s = float(np.max(cols["spread"]))
        return [("max spread", s)], _holds_or_violated(cfg, s, ctx.tol.ratio, "max spread", factor=10.0)

    return header, rows(), summarize


VERDICT_TESTS = ("deficiency", "score", "ratio")


def classify(values, limits):
    passes = {k: values[k] <= limits[k] for k in values}
    if all(passes.values()):
        return "injective"
    if any(values[k] > 10.0 * limits[k] for k in values):
        return "non-injective"
    return "inconclusive"


def exp_verdict(ctx):
    cfg, f = ctx.cfg, ctx.need_map()
    n = f.dimension
    model = StatModel(ctx.K1)
    zetas = ctx.sample2(f.target)
    if zetas is None:
        raise ConfigError(f"{cfg.source}: verdict needs 'sample2' (points of the target)")
    limits = {"deficiency": ctx.tol.suff, "score": ctx.tol.score_for(ctx.K1), "ratio": ctx.tol.ratio}
    header = ["test"] + _pcols("z", n) + _pcols("zeta", n) + ["value"]

    def rows():
        rule2 = ctx.rule(f.target) if cfg.resolution is not None else None
        rec = injectivity_verdict(f, model, ctx.sample, zetas, tolerances=ctx.tol, rule2=rule2)
        for test, z, zeta, value in rec.evidence:
            yield [test] + _pvals(z, n) + _pvals(zeta, n) + [value]

    def summarize(cols):
        values = {t: float(np.max(cols["value"][cols["test"] == t])) for t in VERDICT_TESTS}
        verdict = classify(values, limits)
        summary = [(f"max {t}", values[t]) for t in VERDICT_TESTS]
        summary += [(f"tolerance {t}", limits[t]) for t in VERDICT_TESTS]
        checks = []
        if cfg.expected is not None:
            checks.append((f"verdict == {cfg.expected}", verdict == cfg.expected))
        return summary, checks, verdict

    return header, rows(), summarize


EXPERIMENT_FUNCS = {
    "kernel-table": exp_kernel_table,
    "metric-table": exp_metric_table,
    "fisher-vs-bergman": exp_fisher_vs_bergman,
    "transformation-check": exp_transformation_check,
    "isometry-check": exp_isometry_check,
    "pushforward-check": exp_pushforward_check,
    "deficiency-sweep": exp_deficiency_sweep,
    "score-sweep": exp_score_sweep,
    "factorization-check": exp_factorization_check,
    "ratio-check": exp_ratio_check,
    "verdict": exp_verdict,
}


# ---------------------------------------------------------------------------
# CSV and report
# ---------------------------------------------------------------------------

def fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def read_csv(path):
    """Columns of a written table: floats where every cell parses, else strings."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = list(reader)
    cols = {}
    for i, name in enumerate(header):
        cells = [row[i] for row in data]
        try:
            cols[name] = np.array([float(c) if c != "" else math.nan for c in cells])
        except ValueError:
            cols[name] = np.array(cells, dtype=object)
    return header, cols, len(data)


def format_report(cfg, nrows, summary, checks, verdict, error, elapsed):
    out = [f"experiment: {cfg.experiment}",
           f"config: {cfg.source}",
           f"timestamp: {time.strftime('%Y-%m-%dT%H:%M:%S%z')}",
           f"backend: {accel.backend_name()}",
           f"elapsed_s: {elapsed:.3f}",
           "",
           "[config]"]
    out += [f"{k} = {v}" for k, v in cfg.echo()]
    out += ["", "[summary]", f"rows: {nrows}"]
    out += [f"{name}: {fmt(float(v))}" for name, v in summary]
    if error is not None:
        out += ["", "[error]", error]
    out += ["", "[checks]"]
    out += [f"{'PASS' if ok else 'FAIL'}  {text}" for text, ok in checks]
    if verdict is not None:
        out += ["", f"verdict: {verdict}"]
    if cfg.experiment in ("fisher-vs-bergman", "deficiency-sweep", "verdict"):
        out.append("convention: Fisher matrix in real coordinates (x1, y1, ...) = 2 * realified Bergman metric")
    passed = error is None and all(ok for _, ok in checks)
    out += ["", f"result: {'PASS' if passed else 'FAIL'}"]
    return "\n".join(out) + "\n", passed


def run_experiment(cfg):
    """Run one configured experiment; returns an :class:`Outcome`.

    Configuration problems raise :class:`ConfigError` (exit status 2).
    Numerical failures end up in the report and give exit status 1.
    """
    t0 = time.perf_counter()
    try:
        ctx = Context(cfg)
        header, rows, summarize = EXPERIMENT_FUNCS[cfg.experiment](ctx)
    except SETUP_ERRORS as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    os.makedirs(cfg.output_dir, exist_ok=True)
    csv_path = os.path.join(cfg.output_dir, f"{cfg.experiment}.csv")
    report_path = os.path.join(cfg.output_dir, f"{cfg.experiment}.report.txt")

    done, error = [], None
    try:
        for row in rows:
            done.append(row)
    except ConfigError:
        raise
    except (BlabError, ArithmeticError, ValueError) as exc:
        error = f"{type(exc).__name__}: {exc}"
    write_csv(csv_path, header, done)

    _, cols, nrows = read_csv(csv_path)
    summary, checks, verdict = [], [], None
    if error is None and nrows:
        res = summarize(cols)
        summary, checks = res[0], res[1]
        verdict = res[2] if len(res) > 2 else None
    elif error is None:
        error = "no rows produced"
    text, passed = format_report(cfg, nrows, summary, checks, verdict, error, time.perf_counter() - t0)
    with open(report_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return Outcome(EXIT_PASS if passed else EXIT_FAIL, csv_path, report_path, passed, text)

"""Acceptance suite: one PASS/FAIL line per criterion, at the stated tolerance.

The lines are printed as they happen (visible with ``-s``) and collected
into the terminal summary by conftest.py.
"""

import json
import math
import pathlib
import subprocess
import sys
import time

import numpy as np
import pytest

from blab import domains
from blab.config import parse_sample
from blab.geometry import bergman_metric, realify, transformation_residual
from blab.infogeo import (
    StatModel,
    Tolerances,
    deficiency,
    factorization_residual,
    fisher_matrix,
    gaussian_fisher,
    ratio_invariance,
    score_equality_gap,
)
from blab.kernels import default_kernel, eval_kernel, make_kernel, reproducing_residual
from blab.maps import parse_map, registered_maps
from blab.numerics import build_quadrature

ROOT = pathlib.Path(__file__).resolve().parents[1]
ORACLE = json.loads((ROOT / "tests" / "fixtures" / "oracle.json").read_text())
LINES = []

ANG4 = np.exp(2j * np.pi * (np.arange(4) + 0.125) / 4)
ANG5 = np.exp(2j * np.pi * (np.arange(5) + 0.1) / 5)


def report(label, ok, detail, elapsed, budget):
    ok = bool(ok) and elapsed <= budget
    line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}  [{elapsed:.1f} s / {budget:g} s]"
    LINES.append(line)
    print(line)
    return ok


def polar_grid(radii, ang):
    return [np.array([r * a]) for r in radii for a in ang]


def test_c1_kernel_correctness():
    t0 = time.perf_counter()
    K = make_kernel(domains.DISK)
    origin = abs(eval_kernel(K, 0, 0) - 1 / math.pi)
    Ko = make_kernel(domains.DISK, "orthonormalized", degree=12, resolution=64)
    # grid |z|, |xi| <= 0.7: radii 0, 0.1, ..., 0.7 times 8 angles
    pts = np.array([0j] + [r * np.exp(2j * np.pi * k / 8) for r in np.linspace(0.1, 0.7, 7)
                           for k in range(8)])[:, None]
    sup = float(np.abs(Ko(pts[:, None], pts[None]) - K(pts[:, None], pts[None])).max())
    ok = report("1 kernel correctness",
                origin <= 1e-12 and sup <= 1e-6,
                f"|K(0,0) - 1/pi| = {origin:.1e} (tol 1e-12); deg-12 ortho sup error = {sup:.3e} (tol 1e-6)",
                time.perf_counter() - t0, 10)
    # same grid at degree 26, for reference only
    K26 = make_kernel(domains.DISK, "orthonormalized", degree=26, resolution=64)
    sup26 = float(np.abs(K26(pts[:, None], pts[None]) - K(pts[:, None], pts[None])).max())
    print(f"info  1 companion: deg-26 ortho sup error = {sup26:.3e}")
    LINES.append(f"info  1 companion: deg-26 ortho sup error = {sup26:.3e}")
    assert ok


def test_c2_reproducing_property():
    t0 = time.perf_counter()
    ell = domains.ellipse(1.0, 0.5)
    cases = [
        ("disk closed", make_kernel(domains.DISK), polar_grid([0.3, 0.7], ANG5)),
        ("annulus series J=40", make_kernel(domains.annulus(0.5), "annulus_series", J=40),
         polar_grid([0.62, 0.75], ANG5)),
        ("ellipse ortho", default_kernel(ell),
         [np.array([0.3 * a]) for a in ANG5] + [np.array([0.6 * a.real + 0.3j * a.imag]) for a in ANG5]),
    ]
    worst = {}
    for name, K, pts in cases:
        # an independent, finer rule than any used to build the kernel
        rule = build_quadrature(K.domain, 96)
        worst[name] = max(reproducing_residual(K, z, rule) for z in pts)
    ok = report("2 reproducing property", max(worst.values()) <= 1e-6,
                "; ".join(f"{k} {v:.1e}" for k, v in worst.items()) + " (tol 1e-6 rel)",
                time.perf_counter() - t0, 30)
    assert ok


def test_c3_gaussian_calibration():
    t0 = time.perf_counter()
    errs = []
    for sigma in (0.5, 1.0, 2.0):
        F = gaussian_fisher(0.0, sigma)
        errs.append(float(np.abs(F - np.diag([1.0, 2.0]) / sigma**2).max()))
    ok = report("3 Gaussian Fisher calibration", max(errs) <= 1e-5,
                f"max entry error over sigma in (0.5, 1, 2) = {max(errs):.1e} (tol 1e-5)",
                time.perf_counter() - t0, 5)
    assert ok


def test_c4_fisher_equals_bergman():
    t0 = time.perf_counter()
    M = StatModel(make_kernel(domains.DISK))
    pts = [np.array([0j])] + polar_grid([0.3, 0.5, 0.7], np.exp(2j * np.pi * (np.arange(3) + 0.1) / 3))
    err = 0.0
    for z in pts:
        F = fisher_matrix(M, z).matrix
        err = max(err, float(np.abs(F - 2 * realify(bergman_metric(M.kernel, z).matrix)).max()))
    origin = float(np.abs(fisher_matrix(M, 0).matrix - np.diag([4.0, 4.0])).max())
    ok = report("4 Fisher = 2 realified Bergman", len(pts) == 10 and max(err, origin) <= 1e-3,
                f"max entry error at 10 points = {err:.1e}; |F(0) - diag(4,4)| = {origin:.1e} (tol 1e-3)",
                time.perf_counter() - t0, 60)
    assert ok


def test_c5_transformation_formula():
    t0 = time.perf_counter()
    K = make_kernel(domains.DISK)
    z = parse_sample("random:n=100,rmax=0.9,seed=11", domains.DISK)
    xi = parse_sample("random:n=100,rmax=0.9,seed=12", domains.DISK)
    worst = max(transformation_residual(K, K, parse_map("mobius:a=0.3"), a, b) for a, b in zip(z, xi))
    worst2 = max(transformation_residual(K, K, parse_map("mobius:a=-0.5+0.2i"), a, b) for a, b in zip(z, xi))
    witness = transformation_residual(K, K, parse_map("powerdisk:m=2"), 0.5, 0.6)
    ok = report("5 transformation formula", max(worst, worst2) <= 1e-8 and witness > 1e-2,
                f"Mobius max residual = {max(worst, worst2):.1e} (tol 1e-8); "
                f"power-2 witness (0.5, 0.6) = {witness:.4f} (> 1e-2)",
                time.perf_counter() - t0, 10)
    assert ok


def _map_sample(f):
    if f.source.kind == "annulus":
        return polar_grid([0.62, 0.75], ANG4)
    if f.dimension == 1:
        return polar_grid([0.25, 0.55], ANG4)
    return parse_sample("random:n=8,rmin=0.1,rmax=0.55,seed=6", f.source)


def test_c6_monotonicity():
    t0 = time.perf_counter()
    worst = {}
    for name, f in registered_maps().items():
        M = StatModel(default_kernel(f.source))
        pts = _map_sample(f)
        assert len(pts) >= 8
        worst[name] = min(deficiency(f, M, z).min_gap_eigenvalue for z in pts)
    ok = report("6 monotonicity", min(worst.values()) >= -1e-4,
                "min eig " + "; ".join(f"{k} {v:.1e}" for k, v in worst.items()) + " (tol -1e-4)",
                time.perf_counter() - t0, 300)
    assert ok


def test_c7_equivalence_chain():
    t0 = time.perf_counter()
    tol = Tolerances()
    disk = StatModel(make_kernel(domains.DISK))
    ann = StatModel(default_kernel(domains.annulus(0.5)))
    zs = [0.1, 0.4j, -0.5 + 0.2j]
    zetas = [0.2, -0.3 + 0.1j]
    good = {}
    for spec in ("identity", "mobius:a=0.3"):
        f = parse_map(spec)
        d = max(deficiency(f, disk, z).gap_norm for z in zs)
        s = max(score_equality_gap(f, disk, z, q) for z in zs for q in zetas)
        r = max(ratio_invariance(f, disk, zs, q) for q in zetas)
        good[spec] = (d <= tol.suff and s <= tol.score_closed and r <= tol.ratio, d, s, r)

    f = parse_map("powerann:r=0.5,m=2")
    za = [0.62, 0.68j, -0.75 + 0.1j]
    d = max(deficiency(f, ann, z).gap_norm for z in za)
    s = score_equality_gap(f, ann, 0.7, 0.49)
    r = ratio_invariance(f, ann, [0.6, 0.8j], 0.7)
    margins = {
        "deficiency": (d, 10 * tol.suff, ORACLE["deficiency_sample"]["threshold"]),
        "score": (s, 10 * tol.score_stencil, ORACLE["score_z07_zeta049"]["threshold"]),
        "ratio": (r, 10 * tol.ratio, ORACLE["ratio_z06_z08i_xi07"]["threshold"]),
    }
    bad_ok = {k: v > ten and v > oracle for k, (v, ten, oracle) in margins.items()}
    ok = report(
        "7 equivalence chain",
        all(g[0] for g in good.values()) and all(bad_ok.values()),
        "sufficient: " + "; ".join(f"{k} d={g[1]:.0e} s={g[2]:.0e} r={g[3]:.0e}" for k, g in good.items())
        + " | annulus z^2 margins: "
        + "; ".join(f"{k} {v:.3g} vs 10x tol {ten:g} ({'ok' if bad_ok[k] else 'short'})"
                    for k, (v, ten, _) in margins.items()),
        time.perf_counter() - t0, 600,
    )
    assert ok


def test_c8_factorization_identity():
    t0 = time.perf_counter()
    worst = {}
    for name, f in registered_maps().items():
        if not f.is_injective:
            continue
        K = default_kernel(f.source)
        z = parse_sample("random:n=20,rmax=0.9,seed=21", f.source)
        xi = parse_sample("random:n=20,rmax=0.9,seed=22", f.source)
        worst[name] = max(factorization_residual(f, StatModel(K), K, 1.0, a, b) for a, b in zip(z, xi))
    diag = []
    for name, f in registered_maps().items():
        M = StatModel(default_kernel(f.source))
        K2 = default_kernel(f.target)
        for p in _map_sample(f)[:4]:
            diag.append(factorization_residual(f, M, K2, 1.0, p, p))
    ok = report("8 factorization identity", max(worst.values()) <= 1e-7 and max(diag) == 0.0,
                "; ".join(f"{k} {v:.1e}" for k, v in worst.items())
                + f" (tol 1e-7); diagonal max = {max(diag)!r} over {len(diag)} points",
                time.perf_counter() - t0, 30)
    assert ok


def test_c9_determinism(tmp_path):
    t0 = time.perf_counter()
    cfgs = sorted((ROOT / "configs").glob("*.cfg"))
    differ = []
    for cfg in cfgs:
        outs = []
        for rep in ("a", "b"):
            d = tmp_path / rep / cfg.stem
            subprocess.run([sys.executable, "-m", "blab.cli", "run", str(cfg), "-o", str(d), "-q"],
                           check=False, capture_output=True)
            outs.append({p.name: p.read_bytes() for p in sorted(d.glob("*.csv"))})
        if not outs[0] or outs[0] != outs[1]:
            differ.append(cfg.stem)
    ok = report("9 determinism", not differ,
                f"{len(cfgs) - len(differ)}/{len(cfgs)} configs byte-identical across two runs"
                + (f"; differing: {', '.join(differ)}" if differ else ""),
                time.perf_counter() - t0, math.inf)
    assert ok

"""Command-line entry point: ``blab run|list-domains|list-maps|calibrate``."""

import argparse
import sys
from dataclasses import replace

import numpy as np

from . import accel
from .config import load_config
from .domains import DISK
from .errors import ConfigError
from .experiments import EXIT_CONFIG, EXIT_FAIL, EXIT_PASS, run_experiment
from .geometry import bergman_metric, realify
from .infogeo import StatModel, fisher_matrix, gaussian_fisher
from .kernels import make_kernel
from .maps import REGISTERED, registered_maps

DOMAIN_HELP = [
    ("disk", "unit disk |z| < 1", "closed, ortho"),
    ("annulus:r=R", "r < |z| < 1, 0 < r < 1", "series, ortho"),
    ("ellipse:a=A,b=B", "(x/a)^2 + (y/b)^2 < 1", "ortho"),
    ("polydisk", "unit bidisk in C^2", "closed, ortho"),
    ("ball2", "unit ball in C^2", "closed, ortho"),
]

CALIBRATION_TOL = 1e-5


def cmd_run(args):
    try:
        cfg = load_config(args.config)
        if args.output_dir is not None:
            cfg = replace(cfg, output_dir=args.output_dir)
        outcome = run_experiment(cfg)
    except ConfigError as exc:
        print(f"blab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not args.quiet:
        sys.stdout.write(outcome.report)
    return outcome.status


def cmd_list_domains(args):
    for spec, desc, kernels in DOMAIN_HELP:
        print(f"{spec:<18} {desc:<28} kernels: {kernels}")
    return EXIT_PASS


def cmd_list_maps(args):
    for name, f in registered_maps().items():
        print(f"{name:<15} {REGISTERED[name]:<38} {f.source.label()} -> {f.target.label()}  "
              f"sheets={f.sheet_count}  V={f.critical_image}")
    return EXIT_PASS


def cmd_calibrate(args):
    ok = True
    for sigma in (0.5, 1.0, 2.0):
        F = gaussian_fisher(0.0, sigma) * sigma**2
        err = float(np.abs(F - np.diag([1.0, 2.0])).max())
        ok &= err <= CALIBRATION_TOL
        print(f"gaussian sigma={sigma:g}: sigma^2 * I = [[{F[0, 0]:.9f}, {F[0, 1]:.2e}], "
              f"[{F[1, 0]:.2e}, {F[1, 1]:.9f}]]  err={err:.2e}")
    K = make_kernel(DISK, "closed_form")
    F = fisher_matrix(StatModel(K), 0.0).matrix
    g = bergman_metric(K, 0.0).matrix
    const = float(F[0, 0] / g[0, 0].real)
    err = float(np.abs(F - 2.0 * realify(g)).max())
    ok &= err <= CALIBRATION_TOL
    print(f"disk z=0: fisher = diag({F[0, 0]:.9f}, {F[1, 1]:.9f}), g = {g[0, 0].real:.9f}")
    print(f"convention constant (fisher / realified bergman): {const:.9f}")
    return EXIT_PASS if ok else EXIT_FAIL


def build_parser():
    p = argparse.ArgumentParser(prog="blab", description="Bergman kernel and Fisher metric laboratory.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment from a key = value config file")
    r.add_argument("config")
    r.add_argument("-o", "--output-dir", help="override output_dir from the config")
    r.add_argument("-q", "--quiet", action="store_true", help="do not echo the report")
    r.set_defaults(func=cmd_run)
    sub.add_parser("list-domains", help="supported domain specs").set_defaults(func=cmd_list_domains)
    sub.add_parser("list-maps", help="registered proper maps").set_defaults(func=cmd_list_maps)
    sub.add_parser("calibrate", help="Gaussian and disk z=0 calibrations").set_defaults(func=cmd_calibrate)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        accel.configure_threads()
    except ValueError as exc:
        print(f"blab: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except BrokenPipeError:  # pragma: no cover
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())

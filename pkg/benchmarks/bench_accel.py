"""Time the numba and numpy backends on the three hot loops and one end-to-end call.

    python3 benchmarks/bench_accel.py [--repeat N]

Both backends are run in the same process via ``accel.use_backend``; the
first numba call (JIT compilation) is excluded by a warm-up pass. Results
are also checked to agree, so a speedup never hides a wrong answer.

The two Gram kernels are not like for like: numpy hands the product to
BLAS, while the numba loop accumulates every entry with Neumaier
compensation, trading speed for accuracy in a call made once per
orthonormalised kernel.
"""

import argparse
import timeit

import numpy as np

from blab import accel, domains
from blab.infogeo import StatModel, deficiency
from blab.kernels import annulus_norms, make_kernel
from blab.maps import parse_map


def cases():
    rng = np.random.default_rng(0)
    vals = rng.standard_normal((16384, 64))
    w = 0.8 * np.exp(2j * np.pi * rng.uniform(size=(256, 256)))
    c = 1.0 / annulus_norms(0.5, 120)
    V = rng.standard_normal((4096, 91)) + 1j * rng.standard_normal((4096, 91))
    wt = rng.uniform(size=4096)
    f = parse_map("powerann:r=0.5,m=2")
    model = StatModel(make_kernel(domains.annulus(0.5), "annulus_series"))
    return {
        "compensated_colsum 16384x64": lambda: accel.compensated_colsum(vals),
        "laurent_sum 256x256, J=120": lambda: accel.laurent_sum(w, c, 120),
        "weighted_gram 4096x91": lambda: accel.weighted_gram(V, wt),
        "fisher after powerann z=0.7": lambda: deficiency(f, model, 0.7).fisher_after.matrix,
    }


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args()
    backends = accel.available_backends()
    print(f"backends: {', '.join(backends)}; numba threads: {accel.configure_threads()}")
    print(f"{'case':<30}" + "".join(f"{b + ' [ms]':>14}" for b in backends) + f"{'speedup':>10}")
    for name, fn in cases().items():
        times, results = {}, {}
        for b in backends:
            with accel.use_backend(b):
                results[b] = fn()  # warm-up (and JIT compile)
                times[b] = min(timeit.repeat(fn, number=1, repeat=args.repeat)) * 1e3
        ref = results["numpy"]
        for b in backends:
            np.testing.assert_allclose(results[b], ref, rtol=0, atol=1e-10 * np.abs(ref).max())
        speed = times["numpy"] / times["numba"] if "numba" in times else 1.0
        print(f"{name:<30}" + "".join(f"{times[b]:>14.2f}" for b in backends) + f"{speed:>9.1f}x")


if __name__ == "__main__":
    main()

"""Hot inner loops, compiled with numba when available.

Every kernel here has two implementations with the same signature: a
``numba.njit`` version and a pure-numpy version. The numba path is used
by default; set ``BLAB_DISABLE_NUMBA=1`` to force the numpy path (handy
for debugging, or on platforms without numba). ``BLAB_THREADS`` caps the
numba worker count.

Reductions are always carried out in node-index order with Neumaier
compensation, so results do not depend on the thread count.
"""

import os
import warnings
from types import SimpleNamespace

import numpy as np

__all__ = [
    "available_backends",
    "backend_name",
    "compensated_colsum",
    "get_backend",
    "laurent_sum",
    "set_backend",
    "use_backend",
    "weighted_gram",
]


def _env_flag(name):
    return os.environ.get(name, "").strip().lower() in ("1", "true", "yes", "on")


try:
    import numba
    from numba import njit, prange

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

if HAVE_NUMBA and "NUMBA_THREADING_LAYER" not in os.environ:
    # numba's default probes TBB first and warns on old TBB builds; OpenMP
    # is thread-safe, which matters when callers evaluate sample points
    # from a thread pool.
    try:
        from numba.np.ufunc import omppool  # noqa: F401

        numba.config.THREADING_LAYER = "omp"
    except ImportError:  # pragma: no cover
        pass


# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------

def _colsum_np(values):
    values = np.ascontiguousarray(values, dtype=np.float64)
    k = values.shape[1]
    s = np.zeros(k)
    c = np.zeros(k)
    for row in values:
        t = s + row
        c += np.where(np.abs(s) >= np.abs(row), (s - t) + row, (row - t) + s)
        s = t
    return s + c


def _laurent_np(w, coeffs, J):
    w = np.asarray(w, dtype=np.complex128)
    pos = np.full(w.shape, complex(coeffs[2 * J]), dtype=np.complex128)
    for j in range(J - 1, -1, -1):
        pos = pos * w + coeffs[J + j]
    if J == 0:
        return pos
    u = 1.0 / w
    neg = np.full(w.shape, complex(coeffs[0]), dtype=np.complex128)
    for j in range(J - 1, 0, -1):
        neg = neg * u + coeffs[J - j]
    neg = neg * u
    return pos + neg


def _gram_np(V, w):
    V = np.asarray(V, dtype=np.complex128)
    G = (V.conj().T * w) @ V
    return 0.5 * (G + G.conj().T)


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True, parallel=True)
    def _colsum_nb(values):
        n, k = values.shape
        out = np.empty(k)
        for j in prange(k):
            s = 0.0
            c = 0.0
            for i in range(n):
                x = values[i, j]
                t = s + x
                if abs(s) >= abs(x):
                    c += (s - t) + x
                else:
                    c += (x - t) + s
                s = t
            out[j] = s + c
        return out

    @njit(cache=True, parallel=True)
    def _laurent_nb(w, coeffs, J):
        n = w.shape[0]
        out = np.empty(n, dtype=np.complex128)
        for i in prange(n):
            wi = w[i]
            pos = complex(coeffs[2 * J])
            for j in range(J - 1, -1, -1):
                pos = pos * wi + coeffs[J + j]
            if J > 0:
                u = 1.0 / wi
                neg = complex(coeffs[0])
                for j in range(J - 1, 0, -1):
                    neg = neg * u + coeffs[J - j]
                neg = neg * u
                pos = pos + neg
            out[i] = pos
        return out

    @njit(cache=True, parallel=True)
    def _gram_nb(V, w):
        n, d = V.shape
        G = np.zeros((d, d), dtype=np.complex128)
        for j in prange(d):
            for k in range(j, d):
                sr = 0.0
                cr = 0.0
                si = 0.0
                ci = 0.0
                for i in range(n):
                    p = w[i] * (V[i, j].conjugate() * V[i, k])
                    t = sr + p.real
                    if abs(sr) >= abs(p.real):
                        cr += (sr - t) + p.real
                    else:
                        cr += (p.real - t) + sr
                    sr = t
                    t = si + p.imag
                    if abs(si) >= abs(p.imag):
                        ci += (si - t) + p.imag
                    else:
                        ci += (p.imag - t) + si
                    si = t
                if j == k:
                    G[j, k] = sr + cr
                else:
                    G[j, k] = complex(sr + cr, si + ci)
                    G[k, j] = complex(sr + cr, -(si + ci))
        return G


_BACKENDS = {
    "numpy": SimpleNamespace(
        name="numpy",
        compensated_colsum=_colsum_np,
        laurent_sum=_laurent_np,
        weighted_gram=_gram_np,
    )
}
if HAVE_NUMBA:
    _BACKENDS["numba"] = SimpleNamespace(
        name="numba",
        compensated_colsum=lambda values: _colsum_nb(
            np.ascontiguousarray(values, dtype=np.float64)
        ),
        laurent_sum=lambda w, coeffs, J: _laurent_nb(
            np.ascontiguousarray(w, dtype=np.complex128).ravel(),
            np.ascontiguousarray(coeffs, dtype=np.float64),
            int(J),
        ).reshape(np.shape(w)),
        weighted_gram=lambda V, w: _gram_nb(
            np.ascontiguousarray(V, dtype=np.complex128),
            np.ascontiguousarray(w, dtype=np.float64),
        ),
    )


def available_backends():
    return sorted(_BACKENDS)


def get_backend(name):
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(
            f"unknown backend {name!r}; available: {available_backends()}"
        ) from None


def _default_backend():
    if _env_flag("BLAB_DISABLE_NUMBA"):
        return "numpy"
    if not HAVE_NUMBA:
        warnings.warn("numba unavailable, falling back to the numpy kernels")
        return "numpy"
    return "numba"


_active = get_backend(_default_backend())


def backend_name():
    return _active.name


def set_backend(name):
    """Switch the process-wide backend; returns the previous name."""
    global _active
    previous = _active.name
    _active = get_backend(name)
    return previous


class use_backend:
    """Context manager that temporarily switches backend."""

    def __init__(self, name):
        self.name = name

    def __enter__(self):
        self._previous = set_backend(self.name)
        return _active

    def __exit__(self, *exc):
        set_backend(self._previous)
        return False


def configure_threads(env=None):
    """Apply ``BLAB_THREADS`` to numba; returns the worker count in effect."""
    env = os.environ if env is None else env
    raw = env.get("BLAB_THREADS", "").strip()
    if not HAVE_NUMBA:
        return 1
    limit = numba.config.NUMBA_NUM_THREADS
    if raw:
        try:
            requested = int(raw)
        except ValueError:
            raise ValueError(f"BLAB_THREADS must be an integer, got {raw!r}") from None
        if requested < 1:
            raise ValueError("BLAB_THREADS must be >= 1")
        numba.set_num_threads(min(requested, limit))
    return numba.get_num_threads()


def compensated_colsum(values):
    """Column sums of a 2-D float array, Neumaier-compensated, row order."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise ValueError("compensated_colsum expects a 2-D array")
    if values.shape[0] == 0:
        return np.zeros(values.shape[1])
    return _active.compensated_colsum(values)


def laurent_sum(w, coeffs, J):
    """Evaluate sum_{j=-J..J} coeffs[j+J] * w**j elementwise (Horner)."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.shape != (2 * J + 1,):
        raise ValueError(f"expected {2 * J + 1} coefficients, got {coeffs.shape}")
    return _active.laurent_sum(w, coeffs, J)


def weighted_gram(V, w):
    """Hermitian Gram matrix G[j, k] = sum_i w_i conj(V[i, j]) V[i, k]."""
    return _active.weighted_gram(V, w)

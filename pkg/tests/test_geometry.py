import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from blab import domains
from blab.errors import DiastasisUndefined, ZeroKernelError
from blab.geometry import (
    bergman_metric,
    diastasis,
    isometry_defect,
    pullback_metric,
    realify,
    transformation_residual,
)
from blab.kernels import make_kernel
from blab.maps import parse_map

from conftest import random_disk_points

DISK_K = make_kernel(domains.DISK)
ANN = domains.annulus(0.5)
ANN_K = make_kernel(ANN, "annulus_series")
MOB = parse_map("mobius:a=0.3")
SQ = parse_map("powerdisk:m=2")

disk_pt = st.builds(
    lambda r, t: r * complex(math.cos(t), math.sin(t)),
    st.floats(0, 0.85), st.floats(0, 2 * math.pi),
)


class TestBergmanMetric:
    def test_disk_values(self):
        assert bergman_metric(DISK_K, 0).matrix[0, 0] == pytest.approx(2.0, rel=1e-15)
        assert bergman_metric(DISK_K, 0.5).matrix[0, 0].real == pytest.approx(2 / 0.75**2, rel=1e-14)

    def test_polydisk_origin(self):
        g = bergman_metric(make_kernel(domains.POLYDISK), (0, 0)).matrix
        np.testing.assert_allclose(g, 2 * np.eye(2), atol=1e-15)

    def test_stencil_agrees_with_closed_form(self):
        K = make_kernel(domains.DISK, "orthonormalized", degree=30, resolution=64)
        for z in (0, 0.3 + 0.2j, -0.5j):
            assert bergman_metric(K, z).matrix[0, 0].real == pytest.approx(2 / (1 - abs(z) ** 2) ** 2, rel=1e-5)

    def test_ball_stencil_agrees(self):
        K = make_kernel(domains.BALL, "orthonormalized", degree=10, resolution=10)
        z = np.array([0.1 + 0.05j, -0.1j])
        np.testing.assert_allclose(bergman_metric(K, z).matrix,
                                   bergman_metric(make_kernel(domains.BALL), z).matrix, atol=1e-4)

    def test_hermitian_positive(self, rng):
        for z in 0.55 + 0.4 * rng.uniform(size=10):
            g = bergman_metric(ANN_K, z * np.exp(1j * z * 7))
            np.testing.assert_allclose(g.matrix, g.matrix.conj().T, atol=1e-10)
            assert g.eigenvalues().min() > 0

    def test_realify_layout(self):
        H = np.array([[2.0, 1 + 1j], [1 - 1j, 3.0]])
        R = realify(H)
        np.testing.assert_allclose(R, R.T)
        v = np.array([0.3 - 0.1j, 0.2 + 0.5j])
        x = np.array([v[0].real, v[0].imag, v[1].real, v[1].imag])
        # the layout pairs with the transpose, matching Fisher = 2 realify(g)
        assert x @ R @ x == pytest.approx((v @ H @ v.conj()).real)


class TestDiastasis:
    def test_diagonal(self):
        assert diastasis(DISK_K, 0.3 + 0.4j, 0.3 + 0.4j) == 0.0

    def test_known_value(self):
        assert diastasis(DISK_K, 0, 0.5) == pytest.approx(math.log(16 / 9), rel=1e-14)

    def test_symmetric(self):
        a = diastasis(DISK_K, 0.2 + 0.1j, -0.4)
        assert a == pytest.approx(diastasis(DISK_K, -0.4, 0.2 + 0.1j), abs=1e-12)

    @given(disk_pt, disk_pt)
    def test_nonnegative(self, w, z):
        d = diastasis(DISK_K, w, z)
        assert d >= 0.0
        if abs(w - z) > 1e-3:
            assert d > 1e-10

    def test_zero_kernel(self):
        # the annulus kernel has zeros; find one on the negative axis
        from scipy.optimize import brentq

        t = brentq(lambda x: ANN_K(np.array([0.6]), np.array([-x])).real, 0.55, 0.65)
        with pytest.raises(DiastasisUndefined):
            diastasis(ANN_K, 0.6, -t)


class TestTransformation:
    def test_identity(self, rng):
        f = parse_map("identity")
        for z, xi in zip(random_disk_points(rng, 5), random_disk_points(rng, 5)):
            assert transformation_residual(DISK_K, DISK_K, f, z, xi) == 0.0

    def test_mobius(self, rng):
        for z, xi in zip(random_disk_points(rng, 10), random_disk_points(rng, 10)):
            assert transformation_residual(DISK_K, DISK_K, MOB, z, xi) <= 1e-10

    def test_power_witness(self):
        assert transformation_residual(DISK_K, DISK_K, SQ, 0.5, 0.6) > 0.01

    def test_zero_kernel_needs_absolute(self):
        from scipy.optimize import brentq

        f = parse_map("identity", ANN)
        t = brentq(lambda x: ANN_K(np.array([0.6]), np.array([-x])).real, 0.55, 0.65)
        with pytest.raises(ZeroKernelError):
            transformation_residual(ANN_K, ANN_K, f, 0.6, -t)
        assert transformation_residual(ANN_K, ANN_K, f, 0.6, -t, absolute=True) == 0.0


class TestIsometry:
    SAMPLE = [r * np.exp(1j * t) for r in (0.3, 0.5, 0.7) for t in (0.0, 2.0, 4.0)]

    def test_mobius(self):
        rep = isometry_defect(DISK_K, DISK_K, MOB, self.SAMPLE)
        assert rep.lambda_hat == pytest.approx(1.0, abs=1e-12)
        assert rep.defect <= 1e-8

    def test_mobius_entrywise(self):
        for z in self.SAMPLE:
            np.testing.assert_allclose(pullback_metric(MOB, DISK_K, z),
                                       bergman_metric(DISK_K, z).matrix, rtol=1e-7)

    def test_identity(self):
        rep = isometry_defect(DISK_K, DISK_K, parse_map("identity"), self.SAMPLE)
        assert rep.lambda_hat == 1.0
        assert rep.defect == 0.0

    def test_power(self):
        rep = isometry_defect(DISK_K, DISK_K, SQ, self.SAMPLE)
        assert rep.defect > 0.1
        for z, r in zip(rep.sample, rep.ratios):
            a2 = abs(z) ** 2
            assert r == pytest.approx(4 * a2 / (1 + a2) ** 2, rel=1e-12)

    def test_product_pullback(self):
        f = parse_map("product:mobius:a=0.3;mobius:a=-0.2i")
        K = make_kernel(domains.POLYDISK)
        z = np.array([0.2 + 0.1j, -0.4])
        np.testing.assert_allclose(pullback_metric(f, K, z), bergman_metric(K, z).matrix, atol=1e-12)

    def test_critical_point_skipped(self):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            rep = isometry_defect(DISK_K, DISK_K, SQ, [0.0, 0.5])
        assert rep.skipped == [0.0]
        assert any("critical" in str(w.message) for w in caught)
        with pytest.warns(UserWarning), pytest.raises(ValueError):
            isometry_defect(DISK_K, DISK_K, SQ, [0.0])

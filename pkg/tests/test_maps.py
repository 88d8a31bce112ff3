import math

import numpy as np
import pytest

from blab import domains
from blab.errors import BranchPointError, ConfigError, MapError, OutsideDomainError
from blab.kernels import make_kernel
from blab.maps import (
    local_inverses,
    make_map,
    parse_map,
    pushforward_density,
    pushforward_terms,
    registered_maps,
)
from blab.numerics import build_quadrature, weighted_sum

DISK_K = make_kernel(domains.DISK)
ANN = domains.annulus(0.5)
ANN_K = make_kernel(ANN, "annulus_series")


def bergman_density(K, z, xi):
    c = K(np.atleast_1d(z), xi)
    return (c.real**2 + c.imag**2) / K.diag(np.atleast_1d(z))


class TestRegistry:
    def test_mobius(self):
        f = parse_map("mobius:a=0.3+0i")
        assert f.sheet_count == 1
        assert f.critical_image == "empty"
        z = np.array([0.2 - 0.1j])
        assert f.jacobian(z) == pytest.approx((1 - 0.09) / (1 - 0.3 * z[0]) ** 2)

    def test_power_disk(self):
        f = parse_map("powerdisk:m=2")
        assert f.sheet_count == 2
        assert f.critical_image == "{0}"

    def test_power_annulus(self):
        f = parse_map("powerann:r=0.5,m=2")
        assert f.sheet_count == 2
        assert f.critical_image == "empty"
        assert f.target.spec == domains.annulus(0.25).spec

    def test_errors(self):
        with pytest.raises(MapError):
            make_map("mobius", a=1.0)
        with pytest.raises(MapError):
            make_map("powerdisk", m=1)
        with pytest.raises(MapError):
            make_map("powerann", r=0.5, m=2, source=domains.DISK)
        with pytest.raises(ConfigError):
            parse_map("mobius:a=2")
        with pytest.raises(ConfigError):
            parse_map("exp")
        with pytest.raises(ConfigError):
            parse_map("product:identity")

    @pytest.mark.parametrize("name", sorted(registered_maps()))
    def test_forward_lands_in_target(self, name, rng):
        f = registered_maps()[name]
        n = f.dimension
        pts = rng.uniform(-1, 1, (500, n)) + 1j * rng.uniform(-1, 1, (500, n))
        pts = pts[f.source.contains_many(pts)]
        assert np.all(f.target.contains_many(f.forward(pts)))

    @pytest.mark.parametrize("name", sorted(registered_maps()))
    def test_inverses_compose_to_identity(self, name, rng):
        f = registered_maps()[name]
        n = f.dimension
        pts = rng.uniform(-1, 1, (300, n)) + 1j * rng.uniform(-1, 1, (300, n))
        pts = pts[f.target.contains_many(pts) & ~f.excluded(pts)]
        W, jinv = f.inverse_branches(pts)
        assert W.shape[0] == f.sheet_count
        for k in range(f.sheet_count):
            np.testing.assert_allclose(f.forward(W[k]), pts, atol=1e-10)
            assert np.all(f.source.contains_many(W[k]))
            np.testing.assert_allclose(jinv[k] * f.jacobian(W[k]), 1.0, atol=1e-10)
        if f.sheet_count > 1:
            assert np.min(np.linalg.norm(W[0] - W[1], axis=-1)) > 1e-6


class TestLocalInverses:
    def test_mobius(self):
        (w, j), = local_inverses(parse_map("mobius:a=0.3"), 0.5)
        assert w == pytest.approx((0.5 + 0.3) / (1 + 0.3 * 0.5))

    def test_power_disk(self):
        branches = local_inverses(parse_map("powerdisk:m=2"), 0.25)
        assert [w for w, _ in branches] == pytest.approx([0.5, -0.5])
        assert [j for _, j in branches] == pytest.approx([1.0, -1.0])

    def test_power_annulus(self):
        branches = local_inverses(parse_map("powerann:r=0.5,m=2"), 0.49)
        assert [w for w, _ in branches] == pytest.approx([0.7, -0.7])

    def test_cube_root_order(self):
        branches = local_inverses(parse_map("powerdisk:m=3"), 0.125j)
        w = [b[0] for b in branches]
        principal = 0.5 * np.exp(1j * math.pi / 6)
        assert w == pytest.approx([principal * np.exp(2j * math.pi * k / 3) for k in range(3)])

    def test_branch_point(self):
        with pytest.raises(BranchPointError):
            local_inverses(parse_map("powerdisk:m=2"), 0.01)
        with pytest.raises(BranchPointError):
            local_inverses(parse_map("product:powerdisk:m=2;identity"), (0.001, 0.5))

    def test_outside(self):
        with pytest.raises(OutsideDomainError):
            local_inverses(parse_map("powerann:r=0.5,m=2"), 0.1)


class TestPushforward:
    def test_identity(self):
        q, base = pushforward_density(parse_map("identity"), DISK_K, 0.3, 0.1 - 0.5j)
        assert base == 1.0
        assert q == pytest.approx(float(bergman_density(DISK_K, 0.3, np.array([0.1 - 0.5j]))), rel=1e-15)

    def test_annulus_hand_expansion(self):
        q, base = pushforward_density(parse_map("powerann:r=0.5,m=2"), ANN_K, 0.7, 0.49)
        j2 = 1 / (4 * 0.49)
        kzz = ANN_K.diag(np.array([0.7]))
        expect = sum(abs(ANN_K(np.array([0.7]), np.array([w]))) ** 2 for w in (0.7, -0.7)) * j2 / kzz
        assert q == pytest.approx(float(expect), rel=1e-14)
        assert base == pytest.approx(2 * j2, rel=1e-14)

    @pytest.mark.parametrize("spec, K, z", [
        ("powerann:r=0.5,m=2", ANN_K, 0.7),
        ("powerdisk:m=2", DISK_K, 0.4 + 0.2j),
        ("mobius:a=0.3", DISK_K, -0.5),
    ])
    def test_mass_conserved(self, spec, K, z):
        f = parse_map(spec)
        rule = build_quadrature(f.target, 64)
        q, _ = pushforward_terms(f, K, np.array([z]), rule.nodes)
        assert abs(weighted_sum(rule, q) - 1.0) <= 1e-5

    @pytest.mark.parametrize("spec, K", [("powerann:r=0.5,m=2", ANN_K), ("powerdisk:m=2", DISK_K)])
    def test_change_of_variables(self, spec, K):
        f = parse_map(spec)
        z = np.array([0.7 if f.source.kind == "annulus" else 0.3])
        r1 = build_quadrature(f.source, 64)
        r2 = build_quadrature(f.target, 64)
        p1 = bergman_density(K, z, r1.nodes)
        q, _ = pushforward_terms(f, K, z, r2.nodes)
        tests = [
            lambda w: np.ones_like(w),
            lambda w: np.abs(w) ** 2,
            lambda w: w.real,
            lambda w: np.cos(3 * w.imag),
            lambda w: 1.0 / (2.0 - w),
        ]
        for h in tests:
            lhs = weighted_sum(r1, h(f.forward(r1.nodes)[:, 0]) * p1)
            rhs = weighted_sum(r2, h(r2.nodes[:, 0]) * q)
            assert abs(lhs - rhs) <= 1e-5

    @pytest.mark.parametrize("spec", ["powerann:r=0.5,m=2", "powerdisk:m=2", "mobius:a=0.3"])
    def test_base_density_integrates_to_source_volume(self, spec):
        f = parse_map(spec)
        rule = build_quadrature(f.target, 64)
        K = make_kernel(f.source, "annulus_series" if f.source.kind == "annulus" else "closed_form")
        _, base = pushforward_terms(f, K, np.array([0.7]), rule.nodes)
        assert weighted_sum(rule, base) == pytest.approx(f.source.volume_hint, rel=1e-5)

    def test_pushforward_excluded(self):
        with pytest.raises(BranchPointError):
            pushforward_density(parse_map("powerdisk:m=2"), DISK_K, 0.2, 0.001)

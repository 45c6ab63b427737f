from __future__ import annotations

import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from crp import ChartExit, ChartManifold, NearCutLocus, ProductManifold, SO3, Sphere
from crp.convergence import estimate_order
from crp.linalg import hat, so3_exp, so3_log


def tangent_basis(manifold, p):
    proj = manifold.tangent_projector(p)
    w, v = np.linalg.eigh(proj)
    return v[:, w > 0.5]


def decay_slope(errs, scales):
    slope, _, exact = estimate_order(errs, scales, discard_coarsest=False)
    return float("inf") if exact else slope


SPHERE = Sphere()
SO3M = SO3()


class TestSphereClosedForms:
    def test_exp_zero_vector(self):
        m = np.array([0.0, 0.0, 1.0])
        assert np.allclose(SPHERE.exp(m, np.zeros(3)), m)

    def test_exp_quarter_turn(self):
        m = np.array([1.0, 0.0, 0.0])
        v = np.array([0.0, np.pi / 2, 0.0])
        assert np.allclose(SPHERE.exp(m, v), [0.0, 1.0, 0.0], atol=1e-14)

    def test_log_identity_pair(self):
        m = SPHERE.random_point(np.random.default_rng(0))
        assert np.allclose(SPHERE.log(m, m), 0.0)

    def test_log_quarter_turn(self):
        m = np.array([1.0, 0.0, 0.0])
        n = np.array([0.0, 0.0, 1.0])
        assert np.allclose(SPHERE.log(m, n), [0.0, 0.0, np.pi / 2], atol=1e-14)

    def test_exp_log_roundtrip(self):
        rng = np.random.default_rng(1)
        for _ in range(25):
            m = SPHERE.random_point(rng)
            n = SPHERE.random_point(rng)
            if SPHERE.distance(m, n) >= SPHERE.gauge_radius - 1e-3:
                continue
            assert np.linalg.norm(SPHERE.exp(m, SPHERE.log(m, n)) - n) < 1e-10

    def test_near_cut_locus_raises(self):
        m = np.array([1.0, 0.0, 0.0])
        with pytest.raises(NearCutLocus):
            SPHERE.log(m, -m)

    def test_exp_matches_geodesic_ode_oracle(self):
        rng = np.random.default_rng(2)
        m = SPHERE.random_point(rng)
        v = SPHERE.random_tangent(rng, m)

        def rhs(t, s):
            p, dp = s[:3], s[3:]
            return np.concatenate([dp, -(dp @ dp) * p])

        sol = solve_ivp(rhs, (0, 1), np.concatenate([m, v]), rtol=1e-12, atol=1e-14, dense_output=True)
        assert np.linalg.norm(SPHERE.exp(m, v) - sol.y[:3, -1]) < 1e-8

    def test_transport_matches_ode_oracle(self):
        rng = np.random.default_rng(3)
        m = SPHERE.random_point(rng)
        n = SPHERE.random_point(rng)
        if SPHERE.distance(m, n) >= SPHERE.gauge_radius - 1e-2:
            n = SPHERE.exp(m, 0.5 * SPHERE.random_tangent(rng, m))
        v = SPHERE.random_tangent(rng, m)
        w = SPHERE.log(m, n)

        def rhs(t, s):
            # geodesic sigma(t) = exp_m(t w); parallel field keeps normal balance
            p = SPHERE.exp(m, t * w)
            dp_norm = w  # constant-speed parametrization has |sigma'| = |w|
            dp = SPHERE.transport(p, m) @ w if False else None
            return -(s @ SPHERE.exp_velocity(m, w, t)) * p if False else None

        # direct ODE: u' = -(u . sigma') sigma along sigma(t)
        def rhs2(t, u):
            th = np.linalg.norm(w)
            if th == 0:
                return np.zeros(3)
            p = np.cos(t * th) * m + np.sin(t * th) * w / th
            dp = -th * np.sin(t * th) * m + np.cos(t * th) * w
            return -(u @ dp) * p

        sol = solve_ivp(rhs2, (0, 1), v, rtol=1e-12, atol=1e-14)
        got = SPHERE.transport(n, m) @ v
        assert np.linalg.norm(got - sol.y[:, -1]) < 1e-8

    def test_transport_equator_fixes_normal(self):
        m = np.array([1.0, 0.0, 0.0])
        n = np.array([0.0, 1.0, 0.0])
        u = SPHERE.transport(n, m) @ np.array([0.0, 0.0, 1.0])
        assert np.allclose(u, [0.0, 0.0, 1.0], atol=1e-14)

    def test_transport_is_isometry(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            m = SPHERE.random_point(rng)
            n = SPHERE.exp(m, 0.8 * SPHERE.random_tangent(rng, m))
            bm = tangent_basis(SPHERE, m)
            u = SPHERE.transport(n, m)
            gram = (u @ bm).T @ (u @ bm)
            assert np.max(np.abs(gram - bm.T @ bm)) < 1e-8

    def test_embedded_lemma_slopes(self):
        rng = np.random.default_rng(5)
        m = SPHERE.random_point(rng)
        v = SPHERE.random_tangent(rng, m)
        v /= np.linalg.norm(v)
        scales = [0.4 / 2**j for j in range(5)]
        e_log, e_trans = [], []
        for s in scales:
            n = SPHERE.exp(m, s * v)
            p = SPHERE.tangent_projector(m)
            e_log.append(np.linalg.norm(p @ (SPHERE.log(m, n) - (n - m))))
            bn = tangent_basis(SPHERE, n)
            diff = (SPHERE.transport(n, m) - SPHERE.tangent_projector(n)) @ p @ bn
            e_trans.append(np.max(np.abs(diff)))
        assert decay_slope(e_log, scales) >= 2.75
        assert decay_slope(e_trans, scales) >= 1.75

    def test_d2log_matches_finite_differences(self):
        rng = np.random.default_rng(6)
        m = SPHERE.random_point(rng)
        n = SPHERE.exp(m, 0.7 * SPHERE.random_tangent(rng, m))
        w = SPHERE.random_tangent(rng, n)
        h = 1e-6
        fd = (SPHERE.log(m, SPHERE.exp(n, h * w)) - SPHERE.log(m, SPHERE.exp(n, -h * w))) / (2 * h)
        assert np.linalg.norm(SPHERE.d2log(m, n) @ w - fd) < 1e-7


class TestSO3ClosedForms:
    def test_rodrigues_against_expm_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            w = rng.standard_normal(3)
            assert np.max(np.abs(so3_exp(w) - expm(hat(w)))) < 1e-12

    def test_log_inverts_exp(self):
        rng = np.random.default_rng(8)
        for _ in range(10):
            w = rng.standard_normal(3)
            w *= min(1.0, 2.9 / np.linalg.norm(w))
            assert np.linalg.norm(so3_log(so3_exp(w)) - w) < 1e-10

    def test_exp_left_invariant(self):
        g = so3_exp(np.array([0.3, -0.2, 0.5]))
        a = np.array([0.0, 0.0, np.pi])
        got = SO3M.exp(g, g @ hat(a))
        assert np.max(np.abs(got - g @ expm(hat(a)))) < 1e-12

    def test_transport_is_left_translation(self):
        rng = np.random.default_rng(9)
        g = SO3M.random_point(rng)
        k = SO3M.random_point(rng)
        xi = k @ hat(rng.standard_normal(3))
        got = (SO3M.transport(g, k) @ xi.reshape(9)).reshape(3, 3)
        assert np.max(np.abs(got - g @ k.T @ xi)) < 1e-12

    def test_d2log_matches_finite_differences(self):
        rng = np.random.default_rng(10)
        k = SO3M.random_point(rng)
        g = SO3M.exp(k, k @ hat(0.4 * rng.standard_normal(3)))
        om = rng.standard_normal(3)
        xi = g @ hat(om)
        h = 1e-6
        fd = (
            SO3M.flatten(SO3M.log(k, g @ so3_exp(h * om))) - SO3M.flatten(SO3M.log(k, g @ so3_exp(-h * om)))
        ) / (2 * h)
        assert np.linalg.norm(SO3M.d2log(k, g) @ xi.reshape(9) - fd) < 1e-7

    def test_atlas_covers_group(self):
        rng = np.random.default_rng(11)
        charts = SO3M.charts()
        for _ in range(50):
            g = SO3M.random_point(rng)
            assert max(c.margin(g) for c in charts) > 0.2 * (np.pi - 0.1)

    def test_chart_roundtrip_and_differentials(self):
        rng = np.random.default_rng(12)
        chart = SO3M.charts()[0]
        for _ in range(5):
            g = so3_exp(0.8 * rng.standard_normal(3))
            x = chart.to_coords(g)
            assert np.max(np.abs(chart.from_coords(x) - g)) < 1e-12
            # dto o dfrom = identity on coordinates
            assert np.max(np.abs(chart.dto(g) @ chart.dfrom(x) - np.eye(3))) < 1e-9
            # dfrom matches finite differences of from_coords
            for j in range(3):
                e = np.zeros(3)
                e[j] = 1e-6
                fd = (chart.from_coords(x + e) - chart.from_coords(x - e)).reshape(9) / 2e-6
                assert np.linalg.norm(chart.dfrom(x)[:, j] - fd) < 1e-6


class TestSphereCharts:
    def test_roundtrip_and_margins(self):
        rng = np.random.default_rng(13)
        north, south = SPHERE.charts()
        for _ in range(20):
            m = SPHERE.random_point(rng)
            chart = north if north.margin(m) > 0 else south
            x = chart.to_coords(m)
            assert np.linalg.norm(chart.from_coords(x) - m) < 1e-10

    def test_differentials_match_fd(self):
        rng = np.random.default_rng(14)
        chart = SPHERE.charts()[0]
        m = np.array([0.1, -0.3, -0.9])
        m /= np.linalg.norm(m)
        x = chart.to_coords(m)
        for j in range(2):
            e = np.zeros(2)
            e[j] = 1e-6
            fd = (chart.from_coords(x + e) - chart.from_coords(x - e)) / 2e-6
            assert np.linalg.norm(chart.dfrom(x)[:, j] - fd) < 1e-6
        bm = tangent_basis(SPHERE, m)
        comp = chart.dfrom(x) @ chart.dto(m) @ bm
        assert np.max(np.abs(comp - bm)) < 1e-9

    def test_projector_properties(self):
        rng = np.random.default_rng(15)
        for mani in (SPHERE, SO3M):
            m = mani.random_point(rng)
            p = mani.tangent_projector(m)
            assert np.max(np.abs(p @ p - p)) < 1e-12
            assert np.max(np.abs(p - p.T)) < 1e-12


def quadratic_connection(c=0.25):
    def gamma(x):
        # smooth, symmetric coefficients in two dimensions
        a = np.zeros((2, 2, 2))
        a[0, 0, 0] = c * np.sin(x[1])
        a[1, 0, 1] = c * x[0]
        a[1, 1, 0] = c * x[0]
        a[0, 1, 1] = -c * np.cos(x[0])
        return a

    return gamma


class TestChartManifold:
    def test_flat_exp_log(self):
        m2 = ChartManifold(2)
        a = np.array([0.1, 0.2])
        b = np.array([-0.4, 0.6])
        assert np.allclose(m2.log(a, b), b - a)
        assert np.allclose(m2.exp(a, b - a), b)

    def test_curved_exp_log_roundtrip(self):
        mani = ChartManifold(2, gamma=quadratic_connection(), h_geo=0.005)
        m = np.array([0.2, -0.1])
        n = np.array([0.9, 0.5])
        v = mani.log(m, n)
        assert np.linalg.norm(mani.exp(m, v) - n) < 1e-10

    def test_geodesic_matches_ivp_oracle(self):
        g = quadratic_connection()
        mani = ChartManifold(2, gamma=g, h_geo=0.002)
        m = np.array([0.3, 0.1])
        v = np.array([0.5, -0.7])

        def rhs(t, s):
            p, dp = s[:2], s[2:]
            acc = -np.einsum("ijl,j,l->i", g(p), dp, dp)
            return np.concatenate([dp, acc])

        sol = solve_ivp(rhs, (0, 1), np.concatenate([m, v]), rtol=1e-12, atol=1e-14)
        assert np.linalg.norm(mani.exp(m, v) - sol.y[:2, -1]) < 1e-8

    def test_connection_expansion_slopes(self):
        # chart-coefficient expansions of the logarithm and the transport
        c = 0.3
        g = quadratic_connection(c)
        mani = ChartManifold(2, gamma=g, h_geo=0.002)
        x = np.array([0.25, -0.15])
        ax = g(x)
        rng = np.random.default_rng(16)
        v = rng.standard_normal(2)
        v /= np.linalg.norm(v)
        scales = [0.4 / 2**j for j in range(5)]
        e_log, e_tr = [], []
        for s in scales:
            y = x + s * v
            lg = mani.log(x, y)
            pred = (y - x) + 0.5 * np.einsum("ijl,j,l->i", ax, y - x, y - x)
            e_log.append(np.linalg.norm(lg - pred))
            u = mani.transport(y, x)
            pred_u = np.eye(2) - np.einsum("ijl,j->il", ax, y - x)
            e_tr.append(np.max(np.abs(u - pred_u)))
        assert decay_slope(e_log, scales) >= 2.75
        assert decay_slope(e_tr, scales) >= 1.75

    def test_exp_leaving_domain_raises(self):
        mani = ChartManifold(2, radius=1.0)
        with pytest.raises(ChartExit):
            # flat manifold: straight line exits the ball -> domain guard
            mani_curved = ChartManifold(2, radius=1.0, gamma=quadratic_connection(0.0), h_geo=0.05)
            mani_curved.exp(np.zeros(2), np.array([5.0, 0.0]))

    def test_torsion_tensor_antisymmetry(self):
        g = quadratic_connection(0.4)
        mani = ChartManifold(2, gamma=g)
        t = mani.torsion_tensor(np.array([0.3, 0.2]))
        assert np.allclose(t, -np.swapaxes(t, 1, 2))


class TestProductManifold:
    def test_componentwise_geometry(self):
        prod = ProductManifold(SPHERE, SO3M)
        rng = np.random.default_rng(17)
        m = prod.random_point(rng)
        n = prod.join(
            SPHERE.exp(prod.split(m)[0], 0.3 * SPHERE.random_tangent(rng, prod.split(m)[0])),
            prod.split(m)[1],
        )
        v = prod.log(m, n)
        assert np.linalg.norm(prod.flatten(prod.exp(m, v)) - prod.flatten(n)) < 1e-10
        u = prod.transport(n, m)
        assert u.shape == (12, 12)


def test_levi_civita_from_metric_matches_sphere_chart_coefficients():
    # round-metric pullback through the stereographic chart
    def metric(x):
        s = 2.0 / (1.0 + float(x @ x))
        return s * s * np.eye(2)

    mani = ChartManifold.from_metric(2, metric, radius=5.0)
    from crp.transport import chart_christoffels

    chart = Sphere().charts()[1]
    for x in (np.array([0.3, -0.2]), np.array([0.0, 0.5])):
        got = mani._gamma(x)
        want = chart_christoffels(Sphere(), chart, x)
        assert np.max(np.abs(got - want)) < 1e-8

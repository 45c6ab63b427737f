"""Named acceptance suites: each criterion measures its fixtures and reports."""

from __future__ import annotations

import time

import numpy as np

from . import fixtures as fx
from .controlled import ControlledPath, driver_as_controlled
from .convergence import estimate_order
from .errors import ConfigError
from .flatrde import DrivingField, rde_solve_flat
from .gauges import Gauge, chart_gauge, compatibility_tensor, connection_gauge, standard_gauge, torsion_check
from .linalg import hat
from .manifolds import ChartManifold
from .mcrp import domain_feasible_delta, ratio_at_pair, verify_chart_crp, verify_gauge_crp
from .mrde import (
    check_rde_integral_form,
    gauge_form_defects,
    rde_solve_manifold,
    scalar_solution_defects,
)
from .oneforms import (
    gauge_defect_by_level,
    gauge_integrate,
    integrate_smooth_oneform,
    oneform_from_smooth,
    push_pull_check,
)
from .roughpath import lift_piecewise_linear, time_lift
from .sewing import defect_by_level, rough_integrate
from .transport import (
    MatrixGroup,
    group_rde,
    maurer_cartan_check,
    parallel_translate_frame,
    roll,
    rolled_integral_check,
    unroll,
)

SPHERE = fx.SPHERE
SO3M = fx.SO3M

# 64-bit seed recorded in every report bundle; all randomized sampling below
# derives from fixed per-check generators so reruns are bit-identical
FIXTURE_SEED = 20260809


def _check(name, value, tol, mode="le"):
    if mode == "le":
        ok = value <= tol
    elif mode == "ge":
        ok = value >= tol
    else:
        raise ConfigError(mode)
    return {"check": name, "value": float(value), "tolerance": float(tol), "mode": mode, "pass": bool(ok)}


def _slope_check(name, errors, hs, target, noise_floor=1e-12):
    slope, _, exact = estimate_order(errors, hs)
    if exact or max(errors) <= noise_floor:
        return {"check": name, "value": float("inf"), "tolerance": target, "mode": "ge", "pass": True, "exact": True}
    return {"check": name, "value": float(slope), "tolerance": float(target), "mode": "ge", "pass": bool(slope >= target)}


def _tangent_frame(m):
    ref = np.array([0.0, 0.0, 1.0]) if abs(m[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    e1 = np.cross(m, ref)
    e1 /= np.linalg.norm(e1)
    return np.stack([e1, np.cross(m, e1)], axis=1)


def _area_form(m):
    return np.array([[-m[1], m[0], 0.0]])


COMMUTATOR_MATS = np.array([[[0.0, 0.0], [1.0, 0.0]], [[0.0, 1.0], [0.0, 0.0]]])


# ---------------------------------------------------------------------------


def criterion_01_algebraic_exactness():
    """Chen residual <= 1e-12 and weak-geometric residual <= 1e-10."""
    checks = []
    paths = {
        "smooth-2d": fx.smooth_2d_driver(512),
        "pure-area": fx.pure_area_fixture(512),
        "equator-lift": fx.equator_crp(512).driver,
    }
    rng = np.random.default_rng(123)
    grid = np.linspace(0.0, 1.0, 513)
    paths["piecewise-linear"] = lift_piecewise_linear(np.cumsum(rng.standard_normal((513, 3)), axis=0) * 0.05, grid)
    for name, rp in paths.items():
        checks.append(_check(f"chen-residual[{name}]", rp.chen_residual(), 1e-12))
        tol = 0.0 if name in ("pure-area", "piecewise-linear") else 1e-10
        checks.append(_check(f"weak-geometric[{name}]", rp.weak_geometric_residual(), max(tol, 0.0)))
    return checks


def criterion_02_sewing_order():
    """Local defects of the flat and gauge compensated sums decay at 3/p - 0.25."""
    checks = []
    # flat, smooth driver (p = 1)
    rp = fx.smooth_2d_driver(256)
    x = driver_as_controlled(rp)
    n1 = rp.times.size
    av = np.empty((n1, 2, 2))
    ad = np.empty((n1, 2, 2, 2))
    for i in range(n1):
        a, b = rp.values[i]
        av[i] = np.array([[np.cos(a), b], [a * b, np.sin(b)]])
        ga = np.array([[-np.sin(a), 0.0], [b, 0.0]])
        gb = np.array([[0.0, 1.0], [a, np.cos(b)]])
        ad[i] = np.stack([ga, gb], axis=-1)
    levels = defect_by_level(ControlledPath(rp.times, av, ad), x, rp, levels=5)
    checks.append(_slope_check("flat-defect-smooth", [e for _, e in levels], [h for h, _ in levels], 3.0 - 0.25))

    # flat, pure-area driver (p = 2)
    rp2 = fx.pure_area_fixture(256)
    sol = rde_solve_flat(DrivingField(matrices=COMMUTATOR_MATS), rp2, np.array([1.0, 1.0]))
    n2 = rp2.times.size
    av2 = np.zeros((n2, 2, 2))
    ad2 = np.zeros((n2, 2, 2, 2))
    av2[:, 0, 0] = sol.values[:, 0]
    av2[:, 1, 1] = sol.values[:, 1]
    ad2[:, 0, 0] = sol.derivative[:, 0]
    ad2[:, 1, 1] = sol.derivative[:, 1]
    levels = defect_by_level(ControlledPath(rp2.times, av2, ad2), sol, rp2, levels=5)
    checks.append(_slope_check("flat-defect-pure-area", [e for _, e in levels], [h for h, _ in levels], 1.5 - 0.25))

    # gauge integrator, smooth sphere path (p = 1)
    y = fx.sphere_spiral_crp(256)
    g = connection_gauge(SPHERE)
    a = oneform_from_smooth(_area_form, y, g.par)
    levels = gauge_defect_by_level(a, y, g, levels=5)
    checks.append(_slope_check("gauge-defect-smooth", [e for _, e in levels], [h for h, _ in levels], 3.0 - 0.25))

    # gauge integrator along a pure-area development (p = 2); the start point
    # sits away from the chart center so the connection genuinely acts
    o = SPHERE.charts()[1].from_coords(np.array([0.8, 0.0]))
    u0 = _tangent_frame(o)
    rp3 = fx.pure_area_fixture(256, a=1.5)
    yroll, _ = roll(driver_as_controlled(rp3), rp3, SPHERE, o, u0)
    a3 = oneform_from_smooth(_area_form, yroll, g.par)
    levels = gauge_defect_by_level(a3, yroll, g, levels=5)
    checks.append(
        _slope_check(
            "gauge-defect-pure-area", [e for _, e in levels], [h for h, _ in levels], 1.5 - 0.25, noise_floor=1e-10
        )
    )
    return checks


def criterion_03_example_67():
    """Chart verifier fails with the closed-form ratio; gauge verifier passes."""
    y = fx.example_67_crp(eps=0.01, p=2.0)
    chart = fx.LINE.charts()[0]
    rep_chart = verify_chart_crp(y, chart)
    idx = int(np.searchsorted(y.times, 1.0)) + 1
    ratio = ratio_at_pair(y, chart, 0.0, y.times[idx])
    rep_gauge = verify_gauge_crp(y, standard_gauge(fx.LINE), delta=0.5)
    return [
        _check("chart-ratio-minus-10", abs(ratio - 10.0), 1e-9),
        _check("chart-constant-minus-10", abs(rep_chart["C_remainder"] - 10.0), 1e-9),
        _check("chart-fails", 0.0 if not rep_chart["pass_remainder"] else 1.0, 0.5),
        _check("gauge-passes-at-half", 1.0 if rep_gauge["pass_remainder"] else 0.0, 0.5, mode="ge"),
        _check("gauge-constant-zero", rep_gauge["C2"], 0.0),
    ]


def criterion_04_gauge_independence():
    """Levi-Civita vs stereographic-chart gauge integrals agree."""
    conn = connection_gauge(SPHERE)
    chartg = chart_gauge(SPHERE, SPHERE.charts()[0])
    errs, hs = [], []
    for n in (128, 256, 512, 1024):
        y = fx.sphere_spiral_crp(n, T=np.pi / 2)
        z1 = integrate_smooth_oneform(_area_form, y, conn)
        z2 = integrate_smooth_oneform(_area_form, y, chartg)
        errs.append(float(np.max(np.abs(z1.values - z2.values))))
        hs.append(float(np.max(np.diff(y.times))))
    return [
        _check("inter-gauge-diff-at-2^10", errs[-1], 1e-5),
        _slope_check("inter-gauge-slope", errs, hs, 2.0 - 0.25),
    ]


def criterion_05_ftc():
    """Endpoint identity for exact forms plus the exact derivative identity."""
    from .oneforms import fundamental_theorem

    checks = []
    y = fx.polar_cap_crp(1024, theta=np.pi / 6, T=1.5 * np.pi)
    rep = fundamental_theorem(
        lambda m: float(m[2]), lambda m: np.array([0.0, 0.0, 1.0]), y, connection_gauge(SPHERE)
    )
    checks.append(_check("polar-cap-endpoint", rep["endpoint_residual"], 1e-7))
    checks.append(_check("polar-cap-derivative-identity", rep["derivative_residual"], 1e-12))

    y2 = fx.equator_crp(1024)
    rep2 = fundamental_theorem(
        lambda m: float(m[0]), lambda m: np.array([1.0, 0.0, 0.0]), y2, connection_gauge(SPHERE)
    )
    checks.append(_check("equator-endpoint", rep2["endpoint_residual"], 1e-7))

    # exact derivative identity on a third sphere fixture (short arc)
    y3 = fx.sphere_spiral_crp(1024, T=np.pi / 8)
    rep3 = fundamental_theorem(
        lambda m: float(np.exp(m[0])), lambda m: np.array([np.exp(m[0]), 0.0, 0.0]), y3, connection_gauge(SPHERE)
    )
    checks.append(_check("spiral-exp-endpoint", rep3["endpoint_residual"], 1e-7))
    checks.append(_check("spiral-derivative-identity", rep3["derivative_residual"], 1e-12))
    return checks


def criterion_06_push_pull_associativity():
    """Pullback-pushforward duality and iterated-integral associativity."""
    from .oneforms import associativity_check, oneform_from_smooth as build_form

    checks = []
    g = connection_gauge(SPHERE)

    # push-me-pull-me on three fixtures
    y = fx.sphere_spiral_crp(256)
    rep = push_pull_check(lambda m: m, lambda m: np.eye(3), _area_form, y, g, g, SPHERE)
    checks.append(_check("pushpull-identity", rep["diff_sup"], 1e-12))

    def f_rad(x):
        return x / np.linalg.norm(x)

    def j_rad(x):
        r = np.linalg.norm(x)
        u = x / r
        return (np.eye(3) - np.outer(u, u)) / r

    errs, hs = [], []
    for n in (128, 256, 512, 1024):
        yf = fx.flat3_crp(n, T=np.pi / 2)
        repn = push_pull_check(
            f_rad, j_rad, lambda m: np.array([[0.0, 0.0, 1.0]]), yf, standard_gauge(fx.FLAT3), g, SPHERE
        )
        errs.append(repn["diff_sup"])
        hs.append(float(np.max(np.diff(yf.times))))
    checks.append(_check("pushpull-radial-at-2^10", errs[-1], 1e-5))
    checks.append(_slope_check("pushpull-radial-slope", errs, hs, 2.0 - 0.25))

    line = ChartManifold(1, radius=10.0)
    ylat = fx.latitude_crp(1024, theta=np.pi / 4, T=np.pi)
    rep3 = push_pull_check(
        lambda m: np.array([m[2]]),
        lambda m: np.array([[0.0, 0.0, 1.0]]),
        lambda x: np.array([[1.0]]),
        ylat,
        g,
        standard_gauge(line),
        line,
    )
    want = float(ylat.points[-1][2] - ylat.points[0][2])
    checks.append(_check("pushpull-observable-lhs-ftc", abs(rep3["lhs"].values[-1, 0] - want), 1e-7))
    checks.append(_check("pushpull-observable-agreement", rep3["diff_sup"], 1e-5))

    # associativity on three fixtures
    y6 = fx.sphere_spiral_crp(1024)
    a6 = build_form(_area_form, y6, g.par)
    n6 = y6.times.size
    ident = ControlledPath(y6.times, np.broadcast_to(np.eye(1), (n6, 1, 1)).copy(), np.zeros((n6, 1, 1, 3)))
    rep_a = associativity_check(ident, a6, y6, g)
    checks.append(_check("associativity-identity", rep_a["diff_sup"], 1e-12))

    fv = np.empty((n6, 1, 1))
    fd = np.empty((n6, 1, 1, 3))
    for i in range(n6):
        fv[i, 0, 0] = y6.points[i][2] + 2.0
        fd[i, 0, 0] = np.array([0.0, 0.0, 1.0]) @ y6.derivative[i]
    rep_b = associativity_check(ControlledPath(y6.times, fv, fd), a6, y6, g)
    checks.append(_check("associativity-scaling-at-2^10", rep_b["diff_sup"], 1e-5))

    yflat = fx.flat3_crp(1024)
    gf = standard_gauge(fx.FLAT3)
    aflat = build_form(lambda x: np.array([[x[1], 0.0, 1.0]]), yflat, gf.par)
    nf = yflat.times.size
    fvals = yflat.driver.values[:, :1, None].copy()
    fder = np.zeros((nf, 1, 1, 3))
    fder[:, 0, 0, 0] = 1.0
    fpath = ControlledPath(yflat.times, fvals, fder)
    rep_c = associativity_check(fpath, aflat, yflat, gf)
    zc = rough_integrate(fpath, gauge_integrate(aflat, yflat, gf), yflat.driver)
    checks.append(_check("associativity-flat-at-2^10", rep_c["diff_sup"], 1e-5))
    checks.append(
        _check("associativity-flat-vs-direct", float(np.max(np.abs(zc.values - rep_c["lhs"].values))), 1e-10)
    )
    return checks


def criterion_07_rde_correctness():
    """Manifold and flat RDE solves against their oracles."""
    checks = []
    # S^2 projection field vs fine RK4 (sup over the grid)
    speed = 1.0
    n = 1024
    rp = fx.linear_drive_driver(n, speed=speed)
    sol = rde_solve_manifold(fx.sphere_projection_field(), rp, np.array([0.0, 1.0, 0.0]))
    oracle = _rk4_projection_values(np.array([0.0, 1.0, 0.0]), speed, rp.times)
    sup = float(np.max(np.linalg.norm(sol.points - oracle, axis=1)))
    checks.append(_check("sphere-projection-sup-vs-rk4", sup, 1e-6))
    drift = float(np.max(np.abs(np.linalg.norm(sol.points, axis=1) - 1.0)))
    checks.append(_check("sphere-unit-drift", drift, 1e-9))

    # SO(3) constant direction
    from scipy.linalg import expm

    a0 = (np.pi / 2) * np.array([0.0, 0.0, 1.0])
    grid = np.linspace(0.0, 1.0, 1025)
    pts = np.outer(grid, a0)
    dx = np.diff(pts, axis=0)
    areas = 0.5 * np.einsum("ia,ib->iab", dx, dx)
    from .controls import Control
    from .roughpath import RoughPath

    rp2 = RoughPath(grid, pts, areas, Control.time_scale(np.pi / 2, 1.0))
    sol2 = rde_solve_manifold(fx.so3_right_invariant_field(), rp2, np.eye(3))
    err2 = float(np.max(np.abs(sol2.points[-1] - expm(-hat(a0)))))
    checks.append(_check("so3-constant-direction", err2, 1e-9))

    # pure-area flat RDE: exponential-scheme realization of the local expansion
    rp3 = fx.pure_area_fixture(1024)
    sol3 = rde_solve_flat(DrivingField(matrices=COMMUTATOR_MATS), rp3, np.array([1.0, 1.0]), scheme="exp")
    err3 = float(np.max(np.abs(sol3.values[-1] - np.array([np.e, 1.0 / np.e]))))
    checks.append(_check("pure-area-commutator-closed-form", err3, 1e-6))
    # the default additive scheme keeps its stated global order on this fixture
    errs, hs = [], []
    for nn in (128, 256, 512, 1024):
        rpn = fx.pure_area_fixture(nn)
        soln = rde_solve_flat(DrivingField(matrices=COMMUTATOR_MATS), rpn, np.array([1.0, 1.0]))
        errs.append(float(np.max(np.abs(soln.values[-1] - np.array([np.e, 1.0 / np.e])))))
        hs.append(1.0 / nn)
    checks.append(_slope_check("pure-area-davie-global-order", errs, hs, 0.75))
    return checks


def _rk4_projection_values(y0, speed, times, h=1e-5):
    e1 = np.array([1.0, 0.0, 0.0])

    def rhs(p):
        return speed * (e1 - p * p[0])

    def step(p, hh):
        k1 = rhs(p)
        k2 = rhs(p + 0.5 * hh * k1)
        k3 = rhs(p + 0.5 * hh * k2)
        k4 = rhs(p + hh * k3)
        return p + (hh / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)

    m = np.asarray(y0, dtype=float).copy()
    out = [m.copy()]
    for a, b in zip(times[:-1], times[1:]):
        span = float(b - a)
        full = int(span / h)
        for _ in range(full):
            m = step(m, h)
        rem = span - full * h
        if rem > 1e-14:
            m = step(m, rem)
        out.append(m.copy())
    return np.stack(out)


def criterion_08_equivalence_theorems():
    """Gauge vs chart verifier verdicts and the RDE characterizations."""
    checks = []
    verdicts = []
    cases = [
        ("equator", fx.equator_crp(128)),
        ("latitude", fx.latitude_crp(128)),
        ("sphere-spiral", fx.sphere_spiral_crp(128)),
        ("so3-curve", fx.so3_curve_crp(64)),
        ("flat3", fx.flat3_crp(128)),
        ("line-quadratic", fx.line_quadratic_crp(128)),
        ("example-6.7", fx.example_67_crp()),
    ]
    for name, y in cases:
        mani = y.manifold
        gauge = standard_gauge(mani) if name == "example-6.7" else connection_gauge(mani)
        delta = domain_feasible_delta(y, gauge)
        grep = verify_gauge_crp(y, gauge, delta=delta)
        crep = verify_chart_crp(y, mani.chart_at(y.points[0]))
        agree = grep["pass_remainder"] == crep["pass_remainder"]
        verdicts.append({"fixture": name, "gauge": grep["pass_remainder"], "chart": crep["pass_remainder"]})
        checks.append(_check(f"verdicts-agree[{name}]", 0.0 if agree else 1.0, 0.5))

    # Thm on RDE characterizations: chart solve defect, scalar defect, integral form
    rp = fx.linear_drive_driver(256)
    sol = rde_solve_manifold(fx.sphere_projection_field(), rp, np.array([0.0, 1.0, 0.0]))
    g = connection_gauge(SPHERE)
    gf = gauge_form_defects(sol, fx.sphere_projection_field(), g)
    sc = scalar_solution_defects(
        sol, fx.sphere_projection_field(), lambda m: float(m[0] + m[2] ** 2), lambda m: np.array([1.0, 0.0, 2.0 * m[2]])
    )
    it = check_rde_integral_form(sol, fx.sphere_projection_field(), _area_form, g)
    h = 1.0 / 256
    checks.append(_check("rde-char-gauge-form", gf["defect"], 10.0 * h**3))
    checks.append(_check("rde-char-scalar-form", sc, 10.0 * h**3))
    checks.append(_check("rde-char-integral-form", it["diff_sup"], 1e-5))
    return checks


def criterion_09_compatibility_algebra():
    """Cocycle/antisymmetry, torsion identities, and the Lie-group formula."""
    checks = []
    g1 = connection_gauge(SPHERE).par
    g2 = chart_gauge(SPHERE, SPHERE.charts()[0]).par
    g3 = chart_gauge(SPHERE, SPHERE.charts()[1]).par
    rng = np.random.default_rng(77)
    worst_co = worst_anti = 0.0
    done = 0
    while done < 3:
        m = SPHERE.random_point(rng)
        if SPHERE.charts()[0].margin(m) < 1.0 or SPHERE.charts()[1].margin(m) < 1.0:
            continue
        done += 1
        v = SPHERE.flatten(SPHERE.random_tangent(rng, m))
        w = SPHERE.flatten(SPHERE.random_tangent(rng, m))
        s31 = compatibility_tensor(g3, g1, SPHERE).apply(m, v, w)
        s32 = compatibility_tensor(g3, g2, SPHERE).apply(m, v, w)
        s21 = compatibility_tensor(g2, g1, SPHERE).apply(m, v, w)
        s12 = compatibility_tensor(g1, g2, SPHERE).apply(m, v, w)
        worst_co = max(worst_co, float(np.linalg.norm(s31 - s32 - s21)))
        worst_anti = max(worst_anti, float(np.linalg.norm(s12 + s21)))
    checks.append(_check("cocycle", worst_co, 1e-8))
    checks.append(_check("antisymmetry", worst_anti, 1e-8))
    checks.append(_check("torsion-sphere", torsion_check(SPHERE)["max_residual"], 1e-6))
    checks.append(_check("torsion-so3", torsion_check(SO3M)["max_residual"], 1e-5))

    s = connection_gauge(SO3M).compatibility()
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(3):
        a = rng.standard_normal(3)
        b = rng.standard_normal(3)
        got = s.apply(np.eye(3), hat(a).reshape(9), hat(b).reshape(9)).reshape(3, 3)
        want = -0.5 * (hat(a) @ hat(b) - hat(b) @ hat(a))
        worst = max(worst, float(np.max(np.abs(got - want))))
    checks.append(_check("lie-group-half-commutator", worst, 1e-6))
    return checks


def criterion_10_transport():
    """Holonomy, development roundtrips, duality, and the rolled integral."""
    checks = []
    theta = np.pi / 3
    y = fx.latitude_crp(4096, theta=theta)
    u0 = _tangent_frame(y.points[0])
    lift = parallel_translate_frame(y, u0)
    angle = abs(lift.holonomy_angle())
    want = 2.0 * np.pi * (1.0 - np.cos(theta))
    want = min(want, 2.0 * np.pi - want)
    checks.append(_check("latitude-holonomy", abs(angle - want), 1e-6))

    # roll(unroll) roundtrip on a smooth path
    errs, hs = [], []
    for n in (128, 256, 512, 1024):
        ys = fx.sphere_spiral_crp(n, T=np.pi)
        u0s = _tangent_frame(ys.points[0])
        z, lf = unroll(ys, u0s)
        y2, _ = roll(z, ys.driver, SPHERE, ys.points[0], u0s)
        errs.append(float(np.max(np.linalg.norm(ys.flat_points() - y2.flat_points(), axis=1))))
        hs.append(float(np.max(np.diff(ys.times))))
    checks.append(_slope_check("roll-unroll-roundtrip-slope", errs, hs, 1.75))  # 3/p - 1 - 0.25 at p = 1

    # unroll(roll) roundtrip on a pure-area driver
    errs2, hs2 = [], []
    o = np.array([0.0, 1.0, 0.0])
    u0o = _tangent_frame(o)
    for n in (64, 128, 256, 512):
        rpn = fx.pure_area_fixture(n)
        zn = driver_as_controlled(rpn)
        yy, ll = roll(zn, rpn, SPHERE, o, u0o)
        back, _ = unroll(yy, u0o, lift=ll)
        errs2.append(float(np.max(np.abs(back.values - zn.values))))
        hs2.append(1.0 / n)
    checks.append(_slope_check("unroll-roll-pure-area-slope", errs2, hs2, 1.5 - 1.0 - 0.25, noise_floor=1e-10))

    # Maurer-Cartan duality
    grid = np.linspace(0.0, 1.0, 513)
    rp = time_lift(grid)
    vals = np.stack([np.array([np.sin(t), 0.3 * t, 0.2 * np.cos(t) - 0.2]) for t in grid])
    dag = np.stack([np.array([[np.cos(t)], [0.3], [-0.2 * np.sin(t)]]) for t in grid])
    z = ControlledPath(grid, vals, dag)
    sol = group_rde(z, rp, np.eye(3), MatrixGroup("so3"))
    mc = maurer_cartan_check(sol, z, MatrixGroup("so3"))
    checks.append(_check("maurer-cartan-duality", mc["diff_sup"], 1e-5))

    # rolled-integral equality
    g = connection_gauge(SPHERE)
    errs3, hs3 = [], []
    for n in (128, 256, 512, 1024):
        ys = fx.sphere_spiral_crp(n, T=np.pi / 2)
        a = oneform_from_smooth(_area_form, ys, g.par)
        rep = rolled_integral_check(a, ys, g, _tangent_frame(ys.points[0]))
        errs3.append(rep["diff_sup"])
        hs3.append(float(np.max(np.diff(ys.times))))
    checks.append(_check("rolled-integral-at-2^10", errs3[-1], 1e-5))
    checks.append(_slope_check("rolled-integral-slope", errs3, hs3, 1.75))
    return checks


def criterion_11_determinism():
    """Identical configs render byte-identical report bundles."""
    from .serialize import canonical_json, render_csv
    from .convergence import CONVERGENCE_CSV_HEADER, ConvergenceReport

    def build_once():
        y = fx.example_67_crp()
        chart = fx.LINE.charts()[0]
        rep = verify_chart_crp(y, chart)
        errs, hs, ns = [], [], []
        for n in (64, 128, 256):
            rpn = fx.pure_area_fixture(n)
            soln = rde_solve_flat(DrivingField(matrices=COMMUTATOR_MATS), rpn, np.array([1.0, 1.0]))
            errs.append(float(np.max(np.abs(soln.values[-1] - np.array([np.e, 1.0 / np.e])))))
            hs.append(1.0 / n)
            ns.append(n)
        conv = ConvergenceReport(
            name="determinism-probe", ns=ns, hs=hs, errors=errs, target=0.75, slope=0.0, runtime=0.0
        )
        doc = {
            "verify": {k: v for k, v in rep.items() if k not in ("levels",)},
            "convergence": conv.to_json(),
        }
        return canonical_json(doc) + render_csv(CONVERGENCE_CSV_HEADER, conv.csv_rows())

    a = build_once()
    b = build_once()
    return [_check("byte-identical-bundles", 0.0 if a == b else 1.0, 0.5)]


CRITERIA = {
    "criterion-01-algebraic-exactness": criterion_01_algebraic_exactness,
    "criterion-02-sewing-order": criterion_02_sewing_order,
    "criterion-03-example-6.7": criterion_03_example_67,
    "criterion-04-gauge-independence": criterion_04_gauge_independence,
    "criterion-05-ftc": criterion_05_ftc,
    "criterion-06-push-pull-associativity": criterion_06_push_pull_associativity,
    "criterion-07-rde-correctness": criterion_07_rde_correctness,
    "criterion-08-equivalence-theorems": criterion_08_equivalence_theorems,
    "criterion-09-compatibility-algebra": criterion_09_compatibility_algebra,
    "criterion-10-transport": criterion_10_transport,
    "criterion-11-determinism": criterion_11_determinism,
}


def run_criterion(name):
    fn = CRITERIA[name]
    t0 = time.perf_counter()
    checks = fn()
    dt = time.perf_counter() - t0
    return {
        "name": name,
        "pass": all(c["pass"] for c in checks),
        "checks": checks,
        "runtime": dt,
    }


def run_suite(names=None, deterministic=False, jobs=1):
    """Run the named criteria (all by default); returns the report bundle."""
    names = list(names) if names else list(CRITERIA)
    for n in names:
        if n not in CRITERIA:
            raise ConfigError(f"unknown criterion {n!r}")
    results = []
    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_criterion, names))
    else:
        results = [run_criterion(n) for n in names]
    results.sort(key=lambda r: r["name"])
    if deterministic:
        for r in results:
            r["runtime"] = 0.0
    return {
        "criteria": results,
        "pass": all(r["pass"] for r in results),
        "failed": [r["name"] for r in results if not r["pass"]],
        "seed": FIXTURE_SEED,
    }

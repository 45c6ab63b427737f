"""Rough differential equations on manifolds via chart-patched stepping."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .controlled import driver_as_controlled
from .errors import AtlasGap, Explosion, NotRelated
from .gauges import Gauge, compatibility_tensor
from .linalg import richardson_diff
from .manifolds import Manifold
from .mcrp import ManifoldControlledPath, crp_pushforward
from .oneforms import integrate_smooth_oneform
from .roughpath import RoughPath
from .sewing import rough_integrate

EXPLOSION_BOUND = 1e8
RECHART_MARGIN = 0.2  # re-chart when margin falls under 20% of the chart radius


@dataclass
class ManifoldDrivingField:
    """Driver-linear field F with F_w(m) in T_mM.

    ``field(m)`` returns the (D, k) ambient matrix whose columns are the values
    on the driver basis.
    """

    manifold: Manifold
    field: Callable
    name: str = "field"

    def value_matrix(self, m):
        return np.asarray(self.field(m), dtype=float)

    def tangency_residual(self, points):
        worst = 0.0
        for m in points:
            fm = self.value_matrix(m)
            p = self.manifold.tangent_projector(m)
            worst = max(worst, float(np.max(np.abs(fm - p @ fm))))
        return worst

    def chart_rep(self, chart):
        """F in chart coordinates: x -> dto(p) field(p), p = from_coords(x)."""

        def rep(x):
            p = chart.from_coords(x)
            return chart.dto(p) @ self.value_matrix(p)

        return rep


def _chart_step(rep, x, dx, area, fd_step=1e-6):
    """Additive second-order step of the chart-coordinate scheme."""
    cols = rep(x)  # (d, k)
    out = cols @ dx
    k = dx.size
    scale = max(1.0, float(np.max(np.abs(x))))
    for a in range(k):
        row = area[a]
        if not np.any(row):
            continue
        v = cols[:, a]
        nv = float(np.linalg.norm(v))
        if nv < 1e-300:
            continue
        h = fd_step * scale / nv if nv > fd_step else fd_step * scale
        dcols = (rep(x + h * v) - rep(x - h * v)) / (2.0 * h)
        out = out + dcols @ row
    return out


def rde_solve_manifold(
    field: ManifoldDrivingField,
    rp: RoughPath,
    y0,
    horizon=None,
    retraction=False,
    atlas=None,
    explosion_bound=EXPLOSION_BOUND,
    collect_meta=True,
) -> ManifoldControlledPath:
    """Chart-patched second-order solve of dy = F_{dX}(y).

    The step runs in the chart with the largest boundary margin and the chart
    is re-selected greedily whenever the margin decays below 20% of the chart
    radius; switch times are recorded in ``meta``.  Explosion is proxied by
    exceeding the ambient norm bound or leaving every atlas chart.
    """
    mani = field.manifold
    if horizon is not None:
        rp = rp.restrict(rp.index_of(horizon[0]), rp.index_of(horizon[1]))
    atlas = list(atlas) if atlas is not None else mani.charts()
    n = rp.n_steps
    points = np.empty((n + 1,) + mani.point_shape)
    deriv = np.empty((n + 1, mani.flat_dim, rp.dim))
    y = np.asarray(y0, dtype=float)
    points[0] = y
    deriv[0] = field.value_matrix(y)
    margins = [c.margin(y) for c in atlas]
    best = int(np.argmax(margins))
    if margins[best] <= 0:
        raise AtlasGap("initial point not covered by the atlas")
    chart = atlas[best]
    switches = []
    rep = field.chart_rep(chart)
    x = chart.to_coords(y)
    dxs = np.diff(rp.values, axis=0)
    for i in range(n):
        x = x + _chart_step(rep, x, dxs[i], rp.step_areas[i])
        y = chart.from_coords(x)
        if retraction:
            y = mani.project(y)
            x = chart.to_coords(y)
        flat = mani.flatten(y)
        if not np.all(np.isfinite(flat)) or float(np.linalg.norm(flat)) > explosion_bound:
            raise Explosion(rp.times[i])
        if chart.coords_margin(x) < RECHART_MARGIN * chart.radius:
            margins = [c.margin(y) for c in atlas]
            best = int(np.argmax(margins))
            if margins[best] <= 0:
                raise Explosion(rp.times[i], "trajectory left every atlas chart")
            if atlas[best] is not chart:
                chart = atlas[best]
                rep = field.chart_rep(chart)
                switches.append(float(rp.times[i + 1]))
            x = chart.to_coords(y)
        points[i + 1] = y
        deriv[i + 1] = field.value_matrix(y)
    out = ManifoldControlledPath(mani, rp.times, points, deriv, rp)
    if collect_meta:
        out.meta = {"chart_switches": switches, "retraction": bool(retraction)}
    return out


# -- characterizations -------------------------------------------------------------


def _directional(mani, m, v, g, h=1e-4):
    """Richardson directional derivative of tangent-valued g along v at m."""
    nv = float(np.linalg.norm(v))
    if nv < 1e-14:
        return np.zeros_like(np.asarray(g(m), dtype=float))
    u = mani.unflatten(v / nv)
    return nv * richardson_diff(lambda e: g(mani.curve(m, u, e)), h)


def gauge_form_defects(y: ManifoldControlledPath, field: ManifoldDrivingField, gauge: Gauge, check_split=False):
    """One-step defects of the logarithm characterization of the solve.

    Returns the max defect of
        psi(y_i, y_{i+1}) - F_{dx_i}(y_i) - sum_ab X[a,b] d_{F_a}[(psi_{y_i})_* F_b](y_i)
    and, when ``check_split`` is set, the max pointwise difference between that
    second-order term and its compatibility-tensor split form.
    """
    mani = y.manifold
    n = y.times.size - 1
    dxs = np.diff(y.driver.values, axis=0)
    worst = 0.0
    split_worst = 0.0
    s_tensor = None
    if check_split:
        s_tensor = compatibility_tensor(gauge.log.induced_parallelism(), gauge.par, mani)
    for i in range(n):
        m = y.points[i]
        cols = field.value_matrix(m)  # (D, k)
        area = y.driver.step_areas[i]
        k = area.shape[0]

        def g_b(mm, b):
            return gauge.d2psi(m, mm) @ field.value_matrix(mm)[:, b]

        term2 = np.zeros(mani.flat_dim)
        for a in range(k):
            if not np.any(area[a]):
                continue
            dd = _directional(mani, m, cols[:, a], lambda mm: np.stack([g_b(mm, b) for b in range(k)], axis=1))
            term2 += dd @ area[a]
        pred = cols @ dxs[i] + term2
        defect = gauge.psi(m, y.points[i + 1]) - pred
        worst = max(worst, float(np.linalg.norm(defect)))
        if check_split:

            def h_b(mm, b):
                return gauge.U(m, mm) @ field.value_matrix(mm)[:, b]

            term2b = np.zeros(mani.flat_dim)
            for a in range(k):
                if not np.any(area[a]):
                    continue
                dd = _directional(mani, m, cols[:, a], lambda mm: np.stack([h_b(mm, b) for b in range(k)], axis=1))
                term2b += dd @ area[a]
                s_term = np.stack([s_tensor.apply(m, cols[:, a], cols[:, b]) for b in range(k)], axis=1)
                term2b -= s_term @ area[a]
            split_worst = max(split_worst, float(np.linalg.norm(term2 - term2b)))
    return {"defect": worst, "split_residual": split_worst}


def check_rde_gauge_form(y: ManifoldControlledPath, field, gauge: Gauge, levels=4, check_split=False):
    """Per-level gauge-form defects (finest first) for slope fitting."""
    out = []
    cur = y
    split = 0.0
    for lev in range(levels):
        rep = gauge_form_defects(cur, field, gauge, check_split=check_split and lev == 0)
        split = max(split, rep["split_residual"])
        out.append((float(np.max(np.diff(cur.times))), rep["defect"]))
        n = cur.times.size - 1
        if n % 2 or n < 4:
            break
        cur = cur.coarsen(2)
    return {"levels": out, "split_residual": split}


def pushed_field_path(y: ManifoldControlledPath, field: ManifoldDrivingField, alpha_fn):
    """Flat controlled path of samples alpha(y) o F(y), the driver-integrand."""
    mani = y.manifold
    n = y.times.size

    def val(m):
        return np.asarray(alpha_fn(m), dtype=float) @ field.value_matrix(m)

    v0 = val(y.points[0])
    vals = np.empty((n,) + v0.shape)
    dag = np.empty((n,) + v0.shape + (y.driver_dim,))
    for i in range(n):
        m = y.points[i]
        vals[i] = val(m)
        for a in range(y.driver_dim):
            dag[i, :, :, a] = _directional(mani, m, y.derivative[i][:, a], val)
    from .controlled import ControlledPath

    return ControlledPath(y.times, vals, dag)


def check_rde_integral_form(y: ManifoldControlledPath, field, alpha_fn, gauge: Gauge):
    """Gauge integral of a form along the solve vs the flat driver integral."""
    lhs = integrate_smooth_oneform(alpha_fn, y, gauge)
    integrand = pushed_field_path(y, field, alpha_fn)
    rhs = rough_integrate(integrand, driver_as_controlled(y.driver), y.driver)
    return {
        "diff_sup": float(np.max(np.abs(lhs.values - rhs.values))),
        "lhs": lhs,
        "rhs": rhs,
    }


def scalar_solution_defects(y: ManifoldControlledPath, field: ManifoldDrivingField, f, df):
    """Max one-step defect of the scalar characterization for observable f."""
    mani = y.manifold
    n = y.times.size - 1
    dxs = np.diff(y.driver.values, axis=0)

    def g(m):
        return np.asarray(df(m), dtype=float) @ field.value_matrix(m)  # (k,)

    worst = 0.0
    for i in range(n):
        m = y.points[i]
        cols = field.value_matrix(m)
        area = y.driver.step_areas[i]
        term1 = float(np.asarray(df(m), dtype=float) @ (cols @ dxs[i]))
        term2 = 0.0
        for a in range(area.shape[0]):
            if not np.any(area[a]):
                continue
            dd = _directional(mani, m, cols[:, a], g)
            term2 += float(dd @ area[a])
        defect = float(f(y.points[i + 1]) - f(m)) - term1 - term2
        worst = max(worst, abs(defect))
    return worst


def f_related_pushforward(
    f,
    jac,
    field_src: ManifoldDrivingField,
    field_dst: ManifoldDrivingField,
    y: ManifoldControlledPath,
    tol=1e-8,
):
    """Push a solution through a map relating the two dynamical systems.

    Verifies the relatedness residual on trajectory samples, then returns the
    pushed path together with a direct solve from the pushed initial condition
    for comparison.
    """
    worst = 0.0
    for m in y.points[:: max(1, y.points.shape[0] // 64)]:
        lhs = np.asarray(jac(m), dtype=float) @ field_src.value_matrix(m)
        rhs = field_dst.value_matrix(f(m))
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    if worst > tol:
        raise NotRelated(worst)
    pushed = crp_pushforward(f, jac, y, field_dst.manifold)
    direct = rde_solve_manifold(field_dst, y.driver, f(y.points[0]))
    diff = float(
        np.max(
            np.linalg.norm(
                field_dst.manifold.flatten(pushed.points) - field_dst.manifold.flatten(direct.points), axis=-1
            )
        )
    )
    return {"pushed": pushed, "direct": direct, "diff_sup": diff, "relatedness_residual": worst}


def manifold_distance_drift(y: ManifoldControlledPath):
    """Max ambient distance of the samples from the manifold."""
    mani = y.manifold
    worst = 0.0
    for m in y.points:
        worst = max(worst, float(np.linalg.norm(mani.flatten(m) - mani.flatten(mani.project(m)))))
    return worst

"""Gauges: logarithm / parallelism pairs and their compatibility tensors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ChartSingular, DomainError
from .linalg import FD_STEP
from .manifolds import Chart, Manifold

TAYLOR_FD_STEP = 1e-3


class Parallelism:
    """Smooth family U(to, from): T_from M -> T_to M, identity on the diagonal."""

    def __init__(self, manifold: Manifold, matrix_fn, name="custom", batch_fn=None):
        self.manifold = manifold
        self._fn = matrix_fn
        self._batch = batch_fn
        self.name = name

    def matrix(self, to_pt, from_pt):
        return np.asarray(self._fn(to_pt, from_pt), dtype=float)

    def matrix_batch(self, to_pts, from_pts):
        if self._batch is not None:
            return np.asarray(self._batch(to_pts, from_pts), dtype=float)
        return np.stack([self.matrix(a, b) for a, b in zip(to_pts, from_pts)])


class Logarithm:
    """Smooth psi(m, n) in T_mM vanishing on the diagonal with unit differential."""

    def __init__(self, manifold: Manifold, value_fn, d2_fn=None, name="custom", batch_fn=None):
        self.manifold = manifold
        self._fn = value_fn
        self._d2 = d2_fn
        self._batch = batch_fn
        self.name = name
        self._induced = None

    def value(self, m, n):
        """Flattened tangent at m."""
        return self.manifold.flatten(self._fn(m, n))

    def value_batch(self, ms, ns):
        if self._batch is not None:
            return np.asarray(self._batch(ms, ns), dtype=float)
        return np.stack([self.value(m, n) for m, n in zip(ms, ns)])

    def d2(self, m, n):
        """Differential of n -> psi(m, n) as a (D, D) matrix on T_nM."""
        if self._d2 is not None:
            return np.asarray(self._d2(m, n), dtype=float)
        # finite-difference fallback along canonical curves at n
        mani = self.manifold
        dim = mani.flat_dim
        p = mani.tangent_projector(n)
        cols = np.zeros((dim, dim))
        h = FD_STEP * max(1.0, float(np.linalg.norm(mani.flatten(n))))
        for j in range(dim):
            v = p[:, j]
            nv = float(np.linalg.norm(v))
            if nv < 1e-13:
                continue
            u = mani.unflatten(v / nv)
            d1 = (self.value(m, mani.curve(n, u, h)) - self.value(m, mani.curve(n, u, -h))) / (2 * h)
            d2 = (self.value(m, mani.curve(n, u, h / 2)) - self.value(m, mani.curve(n, u, -h / 2))) / h
            cols[:, j] = (4.0 * d2 - d1) / 3.0 * nv
        return cols

    def induced_parallelism(self):
        """U(to, from) = d/d(from) psi(to, .), the parallelism the logarithm carries."""
        if self._induced is None:
            self._induced = Parallelism(
                self.manifold, lambda a, b: self.d2(a, b), name=f"induced({self.name})"
            )
        return self._induced


@dataclass
class Gauge:
    """Pair (logarithm, parallelism) with a common diagonal domain."""

    manifold: Manifold
    log: Logarithm
    par: Parallelism
    provenance: str = "custom"
    chart: Chart | None = None

    def psi(self, m, n):
        return self.log.value(m, n)

    def psi_batch(self, ms, ns):
        return self.log.value_batch(ms, ns)

    def U(self, to_pt, from_pt):
        return self.par.matrix(to_pt, from_pt)

    def U_batch(self, to_pts, from_pts):
        return self.par.matrix_batch(to_pts, from_pts)

    def d2psi(self, m, n):
        return self.log.d2(m, n)

    def in_domain(self, m, n):
        if self.chart is not None:
            return self.chart.contains(m) and self.chart.contains(n)
        return self.manifold.in_gauge_domain(m, n)

    def require_domain(self, m, n, label=""):
        if not self.in_domain(m, n):
            raise DomainError(f"pair {label} outside the gauge domain")

    def compatibility(self):
        """S between the logarithm's induced parallelism and the gauge parallelism."""
        return compatibility_tensor(self.log.induced_parallelism(), self.par, self.manifold)

    def spec_json(self):
        doc = {"provenance": self.provenance}
        if self.chart is not None:
            doc["chart"] = self.chart.name
        if self.provenance == "connection":
            doc["connection"] = self.manifold.name
        return doc


# -- constructors ---------------------------------------------------------------


def connection_gauge(manifold: Manifold) -> Gauge:
    """Gauge from the manifold's connection: geodesic logarithm + parallel transport."""
    log = Logarithm(
        manifold,
        lambda m, n: manifold.log(m, n),
        d2_fn=lambda m, n: manifold.d2log(m, n),
        name=f"log({manifold.name})",
        batch_fn=lambda ms, ns: manifold.log_batch(ms, ns),
    )
    par = Parallelism(
        manifold,
        lambda a, b: manifold.transport(a, b),
        name=f"transport({manifold.name})",
        batch_fn=lambda a, b: manifold.transport_batch(a, b),
    )
    return Gauge(manifold, log, par, provenance="connection")


def chart_gauge(manifold: Manifold, chart: Chart) -> Gauge:
    """Pullback of the standard flat gauge through a chart."""

    def guard(p):
        if chart.margin(p) <= 0:
            raise ChartSingular(f"point outside chart {chart.name}")
        return p

    def psi(m, n):
        guard(m), guard(n)
        return manifold.unflatten(chart.dfrom(chart.to_coords(m)) @ (chart.to_coords(n) - chart.to_coords(m)))

    def umat(a, b):
        guard(a), guard(b)
        return chart.dfrom(chart.to_coords(a)) @ chart.dto(b)

    par = Parallelism(manifold, umat, name=f"chart({chart.name})")
    log = Logarithm(manifold, psi, d2_fn=umat, name=f"chart({chart.name})")
    log._induced = par  # the chart gauge is its own induced gauge (exact zero S)
    return Gauge(manifold, log, par, provenance="chart", chart=chart)


def standard_gauge(manifold: Manifold) -> Gauge:
    """Flat difference gauge on a chart manifold (psi = n - m, U = I)."""

    def psi(m, n):
        return np.asarray(n, dtype=float) - np.asarray(m, dtype=float)

    dim = manifold.flat_dim
    par = Parallelism(
        manifold,
        lambda a, b: np.eye(dim),
        name="identity",
        batch_fn=lambda a, b: np.broadcast_to(np.eye(dim), (len(a), dim, dim)).copy(),
    )
    log = Logarithm(
        manifold,
        psi,
        d2_fn=lambda m, n: np.eye(dim),
        name="difference",
        batch_fn=lambda ms, ns: np.asarray(ns, float) - np.asarray(ms, float),
    )
    log._induced = par
    return Gauge(manifold, log, par, provenance="custom")


def logarithm_gauge(manifold: Manifold, psi_fn, d2_fn=None, name="psi") -> Gauge:
    """Gauge generated by a bare logarithm, with its induced parallelism."""
    log = Logarithm(manifold, psi_fn, d2_fn=d2_fn, name=name)
    return Gauge(manifold, log, log.induced_parallelism(), provenance="custom")


# -- compatibility tensors ---------------------------------------------------------


class CompatibilityTensor:
    """First-order discrepancy S of two parallelisms, S(v (x) w) in T_mM.

    Evaluated in a chart by Richardson central differences of the chart
    representatives; per-point results are cached by the point's bytes.
    ``S[u_tilde, u] = D2(chart rep of u) - D2(chart rep of u_tilde)`` on the
    diagonal, mapped back to ambient coordinates.
    """

    def __init__(self, u_tilde: Parallelism, u: Parallelism, manifold: Manifold, chart=None):
        self.u_tilde = u_tilde
        self.u = u
        self.manifold = manifold
        self.chart = chart
        self.exact_zero = u_tilde is u
        self._cache = {}

    def _chart_for(self, m):
        return self.chart if self.chart is not None else self.manifold.chart_at(m)

    def _chart_rep_d2(self, par: Parallelism, chart, x, p_m, dto_m):
        d = chart.dim
        out = np.zeros((d, d, d))  # [c, b, j]: d/dy_j of Ubar(x, y)[c, b]
        h = FD_STEP * max(1.0, float(np.linalg.norm(x)))

        def ubar(y):
            p_y = chart.from_coords(y)
            return dto_m @ par.matrix(p_m, p_y) @ chart.dfrom(y)

        for j in range(d):
            e = np.zeros(d)
            e[j] = 1.0
            d1 = (ubar(x + h * e) - ubar(x - h * e)) / (2 * h)
            d2 = (ubar(x + 0.5 * h * e) - ubar(x - 0.5 * h * e)) / h
            out[:, :, j] = (4.0 * d2 - d1) / 3.0
        return out

    def at(self, m):
        """(D, D, D) array S[c, a, b] with S(v (x) w)_c = S[c, a, b] v_a w_b."""
        dim = self.manifold.flat_dim
        if self.exact_zero:
            return np.zeros((dim, dim, dim))
        key = np.asarray(m, dtype=float).tobytes()
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        chart = self._chart_for(m)
        x = chart.to_coords(m)
        dto_m = chart.dto(m)
        dfrom_m = chart.dfrom(x)
        du = self._chart_rep_d2(self.u, chart, x, m, dto_m)
        dut = self._chart_rep_d2(self.u_tilde, chart, x, m, dto_m)
        sbar = np.transpose(du - dut, (0, 2, 1))  # [c, j(=v slot), b(=w slot)]
        out = np.einsum("Cc,cjb,jA,bB->CAB", dfrom_m, sbar, dto_m, dto_m)
        self._cache[key] = out
        return out

    def apply(self, m, v, w):
        return np.einsum(
            "cab,a,b->c", self.at(m), self.manifold.flatten(v), self.manifold.flatten(w)
        )

    def apply_tensor(self, m, tensor):
        """Contract S_m against a (D, D) tensor in the (v, w) slots."""
        return np.einsum("cab,ab->c", self.at(m), tensor)


def compatibility_tensor(u_tilde: Parallelism, u: Parallelism, manifold: Manifold, chart=None):
    return CompatibilityTensor(u_tilde, u, manifold, chart=chart)


def torsion_check(manifold: Manifold, rng=None, n_points=5):
    """Max mismatch between the connection gauge's S and half the torsion."""
    rng = rng or np.random.default_rng(3)
    g = connection_gauge(manifold)
    s = g.compatibility()
    worst = 0.0
    for _ in range(n_points):
        m = manifold.random_point(rng)
        t_half = 0.5 * manifold.torsion_tensor(m)
        v = manifold.flatten(manifold.random_tangent(rng, m))
        w = manifold.flatten(manifold.random_tangent(rng, m))
        lhs = s.apply(m, v, w)
        rhs = np.einsum("cab,a,b->c", t_half, v, w)
        worst = max(worst, float(np.linalg.norm(lhs - rhs)))
    return {"max_residual": worst, "pass": worst <= 1e-5}


def manifold_taylor_check(manifold: Manifold, f, df, hess=None, rng=None, scales=None, n_dirs=3):
    """Second-order intrinsic Taylor remainder decay along random geodesics.

    ``df(m)`` is the flattened differential; ``hess(m, v)`` evaluates the
    covariant second derivative on v (x) v (finite differences along geodesics
    when omitted).  Returns per-scale worst remainders and the fitted slope.
    """
    from .convergence import estimate_order

    rng = rng or np.random.default_rng(11)
    scales = scales if scales is not None else [0.2 / 2**j for j in range(5)]
    if hess is None:

        def hess(m, v, _f=f):
            h = TAYLOR_FD_STEP
            vv = manifold.unflatten(v)
            d1 = (_f(manifold.exp(m, h * vv)) - 2.0 * _f(m) + _f(manifold.exp(m, -h * vv))) / h**2
            d2 = (_f(manifold.exp(m, 0.5 * h * vv)) - 2.0 * _f(m) + _f(manifold.exp(m, -0.5 * h * vv))) / (
                0.25 * h**2
            )
            return (4.0 * d2 - d1) / 3.0

    dirs = []
    for _ in range(n_dirs):
        m = manifold.random_point(rng)
        v = manifold.flatten(manifold.random_tangent(rng, m))
        nv = np.linalg.norm(v)
        if nv > 1e-12:
            dirs.append((m, v / nv))
    errs = []
    for s in scales:
        worst = 0.0
        for m, v in dirs:
            n = manifold.exp(m, s * manifold.unflatten(v))
            rem = f(n) - f(m) - s * float(df(m) @ v) - 0.5 * s**2 * float(hess(m, v))
            worst = max(worst, abs(rem))
        errs.append(worst)
    slope, const, exact = estimate_order(errs, scales, discard_coarsest=False)
    return {
        "scales": scales,
        "remainders": errs,
        "slope": slope if not exact else float("inf"),
        "exact": exact,
        "pass": exact or slope >= 2.75,
    }

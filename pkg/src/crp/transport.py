"""Principal-bundle machinery: connection forms, group RDEs, frame transport,
and the development/anti-development correspondence."""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

from .controlled import ControlledPath, associated_roughpath, check_same_grid
from .errors import DomainError, Explosion, ShapeError
from .gauges import Gauge, connection_gauge
from .linalg import hat, vee
from .manifolds import Chart, Manifold, ProductManifold, SO3
from .mcrp import ManifoldControlledPath
from .mrde import ManifoldDrivingField, rde_solve_manifold
from .oneforms import ControlledOneForm, gauge_integrate, integrate_smooth_oneform
from .roughpath import RoughPath
from .sewing import rough_integrate


# ---------------------------------------------------------------------------
# matrix groups
# ---------------------------------------------------------------------------


class MatrixGroup:
    """Thin interface over a matrix Lie group used by the group equation."""

    def __init__(self, kind, size=None):
        if kind == "so3":
            self.kind = "so3"
            self.size = 3
            self.alg_dim = 3
            self.manifold = SO3()
        elif kind == "gl":
            self.kind = "gl"
            self.size = int(size)
            self.alg_dim = self.size**2
            self.manifold = GLMatrices(self.size)
        else:
            raise ShapeError(f"unknown group {kind!r}")

    def alg_to_matrix(self, a):
        if self.kind == "so3":
            return hat(a)
        return np.asarray(a, dtype=float).reshape(self.size, self.size)

    def matrix_to_alg(self, m):
        if self.kind == "so3":
            return vee(m)
        return np.asarray(m, dtype=float).reshape(-1)

    def identity(self):
        return np.eye(self.size)


class GLMatrices(Manifold):
    """Invertible matrices as an open subset of R^{d x d} (flat connection)."""

    def __init__(self, size, radius=1e6):
        self.size = int(size)
        self.name = f"gl{size}"
        self.dim = self.size**2
        self.point_shape = (self.size, self.size)
        self.radius = float(radius)
        self.gauge_radius = radius

    def project(self, p):
        return np.asarray(p, dtype=float)

    def tangent_projector(self, p):
        return np.eye(self.dim)

    def exp(self, m, v):
        return np.asarray(m, dtype=float) + np.asarray(v, dtype=float)

    def log(self, m, n):
        return np.asarray(n, dtype=float) - np.asarray(m, dtype=float)

    def transport(self, to_pt, from_pt):
        return np.eye(self.dim)

    def d2log(self, m, n):
        return np.eye(self.dim)

    def distance(self, m, n):
        return float(np.linalg.norm(np.asarray(n) - np.asarray(m)))

    def curve(self, m, v, eps):
        return np.asarray(m, dtype=float) + eps * np.asarray(v, dtype=float)

    def charts(self):
        d = self.size

        def flat(p):
            return np.asarray(p, dtype=float).reshape(-1)

        return [
            Chart(
                name="entries",
                dim=self.dim,
                to_coords=flat,
                from_coords=lambda x: np.asarray(x, dtype=float).reshape(d, d),
                dto=lambda p: np.eye(self.dim),
                dfrom=lambda x: np.eye(self.dim),
                radius=self.radius,
            )
        ]

    def random_point(self, rng):
        return np.eye(self.size) + 0.1 * rng.standard_normal((self.size, self.size))


# ---------------------------------------------------------------------------
# connection one-forms on trivial bundles
# ---------------------------------------------------------------------------


@dataclass
class ConnectionForm:
    """Connection on the trivial bundle M x G, reconstructed from a base form.

    ``gamma(m)`` returns the (alg_dim, D) matrix of the algebra-valued base
    one-form in vee coordinates; the full form on the product is
    omega(v, xi) = theta(xi) + Ad_{g^-1} gamma(v).
    """

    manifold: Manifold
    group: MatrixGroup
    gamma: Callable

    def gamma_matrix(self, m):
        return np.asarray(self.gamma(m), dtype=float)

    def omega(self, m, g, v_flat, xi_mat):
        """Algebra value (vee coords) of the form on a product tangent."""
        ginv = np.linalg.inv(g)
        theta = ginv @ xi_mat
        ad = ginv @ self.group.alg_to_matrix(self.gamma_matrix(m) @ v_flat) @ g
        return self.group.matrix_to_alg(theta + ad)

    def axiom_residuals(self, rng=None, n_samples=8):
        """Def axioms: vertical reproduction and Ad-equivariance at samples."""
        rng = rng or np.random.default_rng(5)
        worst_vert = 0.0
        worst_ad = 0.0
        for _ in range(n_samples):
            m = self.manifold.random_point(rng)
            g = self.group.manifold.random_point(rng)
            a = rng.standard_normal(self.group.alg_dim)
            xi = g @ self.group.alg_to_matrix(a)
            got = self.omega(m, g, np.zeros(self.manifold.flat_dim), xi)
            worst_vert = max(worst_vert, float(np.max(np.abs(got - a))))
            v = self.manifold.flatten(self.manifold.random_tangent(rng, m))
            h = self.group.manifold.random_point(rng)
            lhs = self.omega(m, g @ h, v, xi @ h)
            hinv = np.linalg.inv(h)
            rhs = self.group.matrix_to_alg(hinv @ self.group.alg_to_matrix(self.omega(m, g, v, xi)) @ h)
            worst_ad = max(worst_ad, float(np.max(np.abs(lhs - rhs))))
        return {"vertical": worst_vert, "equivariance": worst_ad}


def right_invariant_field(group: MatrixGroup) -> ManifoldDrivingField:
    """F_a(g) = -hat(a) g on the group manifold (driver = algebra coords)."""

    def fn(g):
        g = np.asarray(g, dtype=float)
        cols = [(-(group.alg_to_matrix(e) @ g)).reshape(-1) for e in np.eye(group.alg_dim)]
        return np.stack(cols, axis=1)

    return ManifoldDrivingField(group.manifold, fn, name=f"right-invariant({group.kind})")


def group_rde(z: ControlledPath, rp: RoughPath, g0, group: MatrixGroup, retraction=None) -> ManifoldControlledPath:
    """Solve dg = -(dz) g from g0 along the rough path associated to z.

    The solve runs from the identity and is right-translated by g0, which is
    the same solution by right invariance and makes equivariance exact.  The
    returned path is controlled by the original driver (chain rule through z').
    """
    check_same_grid(z.times, rp.times)
    zrp = associated_roughpath(z, rp)
    if retraction is None:
        retraction = group.kind == "so3"
    sol = rde_solve_manifold(right_invariant_field(group), zrp, group.identity(), retraction=retraction)
    g0 = np.asarray(g0, dtype=float)
    n = rp.times.size
    pts = np.einsum("pij,jk->pik", sol.points, g0)
    deriv = np.empty((n, group.manifold.flat_dim, rp.dim))
    for i in range(n):
        gi = pts[i]
        for a in range(rp.dim):
            deriv[i][:, a] = (-(group.alg_to_matrix(z.derivative[i][:, a]) @ gi)).reshape(-1)
    out = ManifoldControlledPath(group.manifold, rp.times, pts, deriv, rp)
    out.meta = getattr(sol, "meta", {})
    return out


def right_maurer_cartan_form(group: MatrixGroup):
    """theta_r as a smooth algebra-valued one-form on the group manifold."""

    def alpha(g):
        g = np.asarray(g, dtype=float)
        ginv = np.linalg.inv(g)
        rows = []
        for i in range(group.manifold.flat_dim):
            xi = np.zeros(group.manifold.flat_dim)
            xi[i] = 1.0
            rows.append(group.matrix_to_alg(xi.reshape(g.shape) @ ginv))
        return np.stack(rows, axis=1)

    return alpha


def maurer_cartan_check(gpath: ManifoldControlledPath, z: ControlledPath, group: MatrixGroup, gauge=None):
    """Residual of the inverse relation: integral of theta_r along g vs -z."""
    gauge = gauge or connection_gauge(group.manifold)
    integ = integrate_smooth_oneform(right_maurer_cartan_form(group), gpath, gauge)
    zc = z.values - z.values[0]
    return {
        "diff_sup": float(np.max(np.abs(integ.values + zc))),
        "integral": integ,
    }


# ---------------------------------------------------------------------------
# horizontal lifts on trivial bundles
# ---------------------------------------------------------------------------


@dataclass
class HorizontalLift:
    """Lift (y, g) of a base path, with the integrated connection values."""

    base: ManifoldControlledPath
    group_path: ManifoldControlledPath
    connection: ConnectionForm
    z: ControlledPath  # integral of the base connection form along y

    def product_path(self) -> ManifoldControlledPath:
        prod = ProductManifold(self.base.manifold, self.connection.group.manifold)
        pts = np.stack(
            [prod.join(self.base.points[i], self.group_path.points[i]) for i in range(self.base.times.size)]
        )
        deriv = np.concatenate([self.base.derivative, self.group_path.derivative], axis=1)
        return ManifoldControlledPath(prod, self.base.times, pts, deriv, self.base.driver)

    def omega_form(self):
        conn = self.connection
        prod = ProductManifold(self.base.manifold, conn.group.manifold)
        d1 = self.base.manifold.flat_dim

        def alpha(p):
            m, g = prod.split(p)
            ginv = np.linalg.inv(g)
            gam = conn.gamma_matrix(m)
            rows = np.empty((conn.group.alg_dim, prod.flat_dim))
            for c in range(prod.flat_dim):
                e = np.zeros(prod.flat_dim)
                e[c] = 1.0
                if c < d1:
                    val = ginv @ conn.group.alg_to_matrix(gam @ e[:d1]) @ g
                else:
                    val = ginv @ e[d1:].reshape(g.shape)
                rows[:, c] = conn.group.matrix_to_alg(val)
            return rows

        return alpha, prod

    def horizontality_residual(self):
        """Sup of the partial sums of the connection form along the lift."""
        alpha, prod = self.omega_form()
        integ = integrate_smooth_oneform(alpha, self.product_path(), connection_gauge(prod))
        return float(np.max(np.abs(integ.values)))


def horizontal_lift(y: ManifoldControlledPath, conn: ConnectionForm, u0_group, base_gauge=None) -> HorizontalLift:
    """Unique horizontal lift through (y_0, u0_group).

    Integrates the base connection form along y and solves the group equation
    driven by the result; right translation by the fiber initial condition is
    exact by construction.
    """
    base_gauge = base_gauge or connection_gauge(y.manifold)
    z = integrate_smooth_oneform(conn.gamma_matrix, y, base_gauge)
    g = group_rde(z, y.driver, u0_group, conn.group)
    return HorizontalLift(base=y, group_path=g, connection=conn, z=z)


# ---------------------------------------------------------------------------
# frame transport on chart trivializations
# ---------------------------------------------------------------------------


def chart_christoffels(manifold: Manifold, chart: Chart, x):
    """Connection coefficients of the manifold connection in chart coordinates.

    Returns the (d, d, d) array A with (A<v>w)_i = A[i, j, l] v_j w_l, computed
    from the closed form when the manifold provides one and otherwise by
    Richardson differences of the chart representative of parallel transport.
    """
    closed = getattr(manifold, "chart_christoffels", None)
    if closed is not None:
        got = closed(chart, x)
        if got is not None:
            return np.asarray(got, dtype=float)
    d = chart.dim
    m = chart.from_coords(x)
    dto_m = chart.dto(m)
    h = 1e-5 * max(1.0, float(np.linalg.norm(x)))
    out = np.empty((d, d, d))

    def ubar(yc):
        p = chart.from_coords(yc)
        return dto_m @ manifold.transport(m, p) @ chart.dfrom(yc)

    for j in range(d):
        e = np.zeros(d)
        e[j] = 1.0
        d1 = (ubar(x + h * e) - ubar(x - h * e)) / (2 * h)
        d2 = (ubar(x + 0.5 * h * e) - ubar(x - 0.5 * h * e)) / h
        # A_x<e_j> = D2 Ubar(x, x)<e_j> (source-point derivative of transport)
        out[:, j, :] = (4.0 * d2 - d1) / 3.0
    return out


def _chart_segments(y: ManifoldControlledPath, atlas=None, margin_frac=0.2):
    """Greedy split of the trajectory into maximal single-chart index ranges."""
    mani = y.manifold
    atlas = list(atlas) if atlas is not None else mani.charts()
    segs = []
    i0 = 0
    margins = [c.margin(y.points[0]) for c in atlas]
    cur = int(np.argmax(margins))
    if margins[cur] <= 0:
        raise DomainError("initial point not covered by the atlas")
    n = y.times.size - 1
    for i in range(1, n + 1):
        mgn = atlas[cur].margin(y.points[i])
        if mgn < margin_frac * atlas[cur].radius:
            margins = [c.margin(y.points[i]) for c in atlas]
            best = int(np.argmax(margins))
            if margins[best] <= 0:
                raise Explosion(y.times[i], "trajectory left every atlas chart")
            if best != cur:
                segs.append((i0, i, atlas[cur]))
                i0 = i
                cur = best
    segs.append((i0, n, atlas[cur]))
    return segs


@dataclass
class FrameLift:
    """Parallel frames along a base path (trivialized chart by chart)."""

    base: ManifoldControlledPath
    frames: np.ndarray  # (N+1, D, d) ambient frames
    segments: list = dc_field(default_factory=list)  # [(i0, i1, chart)]
    z_pieces: list = dc_field(default_factory=list)  # per-segment connection integrals

    def endpoint_map(self):
        """Transport T_{y_0}M -> T_{y_T}M implied by the frames: u_T o u_0^-1."""
        u0 = self.frames[0]
        ut = self.frames[-1]
        return ut @ np.linalg.pinv(u0)

    def holonomy_angle(self):
        """Rotation angle of the loop holonomy in the initial frame (2d fibers)."""
        u0 = self.frames[0]
        hol = np.linalg.pinv(u0) @ self.frames[-1]
        return float(np.arctan2(hol[1, 0] - hol[0, 1], hol[0, 0] + hol[1, 1]))


def parallel_translate_frame(y: ManifoldControlledPath, u0, atlas=None, base_gauge=None) -> FrameLift:
    """Parallel translation of a frame along y via the frame-bundle lift.

    Runs the group equation on GL(d) against the chart connection coefficients,
    segment by segment, converting frame coordinates at chart switches.
    """
    mani = y.manifold
    d = mani.dim
    base_gauge = base_gauge or connection_gauge(mani)
    group = MatrixGroup("gl", d)
    segs = _chart_segments(y, atlas=atlas)
    n = y.times.size
    frames = np.empty((n, mani.flat_dim, d))
    u_cur = np.asarray(u0, dtype=float)
    frames[0] = u_cur
    z_pieces = []
    for (i0, i1, chart) in segs:
        xs = np.stack([chart.to_coords(y.points[i]) for i in range(i0, i1 + 1)])
        ubar0 = chart.dto(y.points[i0]) @ u_cur

        def gamma_fn(m, _chart=chart):
            x = _chart.to_coords(m)
            A = chart_christoffels(mani, _chart, x)
            # algebra (gl(d), row-major) valued in ambient directions
            dto_m = _chart.dto(m)
            gam = np.einsum("ijl,jD->ilD", A, dto_m)  # value on ambient e_D: matrix A< dto e_D >
            return gam.reshape(d * d, mani.flat_dim)

        sub = ManifoldControlledPath(
            mani,
            y.times[i0 : i1 + 1],
            y.points[i0 : i1 + 1],
            y.derivative[i0 : i1 + 1],
            y.driver.restrict(i0, i1),
        )
        z = integrate_smooth_oneform(gamma_fn, sub, base_gauge)
        z_pieces.append(z)
        g = group_rde(z, sub.driver, ubar0, group, retraction=False)
        for off in range(i1 - i0 + 1):
            frames[i0 + off] = chart.dfrom(xs[off]) @ g.points[i0 + off - i0]
        u_cur = frames[i1]
    return FrameLift(base=y, frames=frames, segments=segs, z_pieces=z_pieces)


def frame_transport_defect(lift: FrameLift, step=1):
    """Max |u_t - U(y_t, y_s) u_s| over pairs ``step`` indices apart."""
    y = lift.base
    mani = y.manifold
    worst = 0.0
    for i in range(0, y.times.size - step, step):
        u = mani.transport(y.points[i + step], y.points[i])
        worst = max(worst, float(np.max(np.abs(lift.frames[i + step] - u @ lift.frames[i]))))
    return worst


# ---------------------------------------------------------------------------
# development: unrolling and rolling
# ---------------------------------------------------------------------------


def unroll(y: ManifoldControlledPath, u0, atlas=None, lift: FrameLift | None = None):
    """Anti-development: flat path read off through the parallel frames.

    Returns (flat controlled path, frame lift).  The increments integrate the
    canonical form along the lifted path, segment by segment.
    """
    mani = y.manifold
    d = mani.dim
    lift = lift or parallel_translate_frame(y, u0, atlas=atlas)
    n = y.times.size
    values = np.zeros((n, d))
    deriv = np.empty((n, d, y.driver_dim))
    for i in range(n):
        deriv[i] = np.linalg.pinv(lift.frames[i]) @ y.derivative[i]
    for (i0, i1, chart) in lift.segments:
        xs = np.stack([chart.to_coords(y.points[i]) for i in range(i0, i1 + 1)])
        xdag = np.stack([chart.dto(y.points[i]) @ y.derivative[i] for i in range(i0, i1 + 1)])
        ubars = np.stack([chart.dto(y.points[i]) @ lift.frames[i] for i in range(i0, i1 + 1)])
        for off in range(i1 - i0):
            i = i0 + off
            ub = ubars[off]
            ub_inv = np.linalg.inv(ub)
            first = ub_inv @ (xs[off + 1] - xs[off])
            x_at = chart_christoffels(mani, chart, xs[off])
            # d/d ubar of ubar^{-1} v is -ubar^{-1} (d ubar) ubar^{-1} v and the
            # lift moves with d ubar = -A<v_a> ubar, so the area correction is
            # ubar^{-1} A<v_a> v_b contracted against the step tensor.
            area = y.driver.step_areas[i]
            xd = xdag[off]  # (d, k) chart coords of y'
            second = ub_inv @ np.einsum("ijl,ja,lb,ab->i", x_at, xd, xd, area)
            values[i + 1] = values[i] + first + second
    return ControlledPath(y.times, values, deriv), lift


def roll(z: ControlledPath, rp: RoughPath, manifold: Manifold, o, u0, atlas=None):
    """Development: solve the frame-bundle horizontal equation driven by z.

    State is (chart coords, frame matrix); the horizontal field moves the base
    with the frame image of dz and rotates the frame by the connection.
    Returns (manifold controlled path, frame lift).
    """
    check_same_grid(z.times, rp.times)
    zrp = associated_roughpath(z, rp)
    d = manifold.dim
    atlas = list(atlas) if atlas is not None else manifold.charts()
    n = zrp.n_steps
    pts = np.empty((n + 1,) + manifold.point_shape)
    frames = np.empty((n + 1, manifold.flat_dim, d))
    pts[0] = np.asarray(o, dtype=float)
    frames[0] = np.asarray(u0, dtype=float)
    margins = [c.margin(pts[0]) for c in atlas]
    cur = int(np.argmax(margins))
    if margins[cur] <= 0:
        raise DomainError("starting point not covered by the atlas")
    chart = atlas[cur]
    segments = []
    seg_start = 0
    x = chart.to_coords(pts[0])
    ub = chart.dto(pts[0]) @ frames[0]
    dz = np.diff(zrp.values, axis=0)

    def step_field(state):
        xx, uu = state[:d], state[d:].reshape(d, d)
        A = chart_christoffels(manifold, chart, xx)
        cols = np.empty((d + d * d, d))
        for a in range(d):
            v = uu[:, a]
            du = -np.einsum("ijl,j,lc->ic", A, v, uu)
            cols[:, a] = np.concatenate([v, du.reshape(-1)])
        return cols

    for i in range(n):
        state = np.concatenate([x, ub.reshape(-1)])
        cols = step_field(state)
        out = cols @ dz[i]
        area = zrp.step_areas[i]
        scale = max(1.0, float(np.max(np.abs(state))))
        for a in range(d):
            row = area[a]
            if not np.any(row):
                continue
            v = cols[:, a]
            nv = float(np.linalg.norm(v))
            if nv < 1e-300:
                continue
            h = 1e-6 * scale / nv
            dcols = (step_field(state + h * v) - step_field(state - h * v)) / (2.0 * h)
            out = out + dcols @ row
        state = state + out
        x, ub = state[:d], state[d:].reshape(d, d)
        p = chart.from_coords(x)
        if chart.coords_margin(x) < 0.2 * chart.radius:
            margins = [c.margin(p) for c in atlas]
            best = int(np.argmax(margins))
            if margins[best] <= 0:
                raise Explosion(zrp.times[i], "development left every atlas chart")
            if atlas[best] is not chart:
                segments.append((seg_start, i + 1, chart))
                seg_start = i + 1
                new = atlas[best]
                amb = chart.dfrom(x) @ ub
                chart = new
                x = chart.to_coords(p)
                ub = chart.dto(p) @ amb
        pts[i + 1] = p
        frames[i + 1] = chart.dfrom(x) @ ub
    segments.append((seg_start, n, chart))
    deriv = np.einsum("pDc,pck->pDk", frames, z.derivative)
    y = ManifoldControlledPath(manifold, rp.times, pts, deriv, rp)
    return y, FrameLift(base=y, frames=frames, segments=segments)


def rolled_oneform(a: ControlledOneForm, lift: FrameLift) -> ControlledPath:
    """Transport a controlled one-form to flat data through the frames."""
    n = a.times.size
    d = lift.frames.shape[2]
    vals = np.einsum("pnD,pDc->pnc", a.alpha, lift.frames)
    dag = np.einsum("pnaD,pDc->pnca", a.alpha_dag, lift.frames)
    return ControlledPath(a.times, vals, dag)


def rolled_integral_check(a: ControlledOneForm, y: ManifoldControlledPath, gauge: Gauge, u0, atlas=None):
    """Gauge integral along y vs flat integral of the rolled data."""
    lhs = gauge_integrate(a, y, gauge)
    ytil, lift = unroll(y, u0, atlas=atlas)
    atil = rolled_oneform(a, lift)
    rhs = rough_integrate(atil, ytil, y.driver)
    return {
        "diff_sup": float(np.max(np.abs(lhs.values - rhs.values))),
        "lhs": lhs,
        "rhs": rhs,
        "unrolled": ytil,
    }


def vertical_horizontal_split(conn: ConnectionForm, m, g, rng=None, n_samples=6):
    """Split residual: tangents decompose into vertical plus horizontal parts.

    The horizontal lift of a base direction v is (v, -Gamma(v)^ g); the
    vertical remainder projects to zero on the base by construction.  Returns
    the worst of: the form on horizontal lifts, and the reconstruction of the
    form value from the vertical part alone.
    """
    rng = rng or np.random.default_rng(9)
    mani = conn.manifold
    worst = 0.0
    for _ in range(n_samples):
        v = mani.flatten(mani.random_tangent(rng, m))
        xi = g @ conn.group.alg_to_matrix(rng.standard_normal(conn.group.alg_dim))
        xi_h = -conn.group.alg_to_matrix(conn.gamma_matrix(m) @ v) @ g
        worst = max(worst, float(np.max(np.abs(conn.omega(m, g, v, xi_h)))))
        vert = xi - xi_h
        res = conn.omega(m, g, np.zeros_like(v), vert) - conn.omega(m, g, v, xi)
        worst = max(worst, float(np.max(np.abs(res))))
    return worst

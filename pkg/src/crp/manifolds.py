"""Manifolds with closed-form geometry (S^2, SO(3)) and chart-atlas manifolds.

Points keep their natural array shape ((3,) for the sphere, (3, 3) for
rotations, (d,) for chart manifolds); every linear object (tangent projectors,
parallel transports, differentials) acts on the flattened ambient space R^D.
Tangent vectors are ambient vectors satisfying the tangency constraint at their
base point; mixing chart-coordinate and ambient representations is a bug, so
charts expose explicit ``to/from`` differentials instead of implicit casts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError, LogFailure, NearCutLocus
from .linalg import (
    hat,
    so3_exp,
    so3_left_jacobian,
    so3_left_jacobian_inv,
    so3_log,
    vee,
)

GAUGE_RADIUS_MARGIN = 0.1  # geodesic-ball radius pi - 0.1 on S^2 and SO(3)


@dataclass
class Chart:
    """Coordinate chart with closed-form differentials.

    ``to_coords``/``from_coords`` map points to R^dim and back; ``dto(p)`` is
    the (dim, D) differential on flattened ambient tangents and ``dfrom(x)``
    its (D, dim) right inverse.  ``radius`` bounds |coords| on the domain.
    """

    name: str
    dim: int
    to_coords: Callable
    from_coords: Callable
    dto: Callable
    dfrom: Callable
    radius: float
    center_coords: np.ndarray | None = None

    def coords_margin(self, x):
        x = np.asarray(x, dtype=float)
        c = 0.0 if self.center_coords is None else self.center_coords
        return self.radius - float(np.linalg.norm(x - c))

    def margin(self, p):
        from .errors import CrpError

        try:
            return self.coords_margin(self.to_coords(p))
        except (CrpError, FloatingPointError, ValueError, ZeroDivisionError):
            return -np.inf

    def contains(self, p):
        return self.margin(p) > 0.0


class Manifold:
    """Base class; subclasses provide closed-form connection geometry."""

    name = "manifold"
    dim = 0
    point_shape = ()

    # -- representation helpers ------------------------------------------------

    @property
    def flat_dim(self):
        return int(np.prod(self.point_shape))

    def flatten(self, v):
        return np.asarray(v, dtype=float).reshape(
            np.asarray(v).shape[: -len(self.point_shape)] + (self.flat_dim,)
        )

    def unflatten(self, v):
        return np.asarray(v, dtype=float).reshape(np.asarray(v).shape[:-1] + self.point_shape)

    # -- required geometry -------------------------------------------------------

    def project(self, p):
        raise NotImplementedError

    def tangent_projector(self, p):
        """(D, D) orthogonal projection onto T_pM in flattened coordinates."""
        raise NotImplementedError

    def exp(self, m, v):
        raise NotImplementedError

    def log(self, m, n):
        raise NotImplementedError

    def transport(self, to_pt, from_pt):
        """Parallel transport T_{from}M -> T_{to}M as a (D, D) matrix."""
        raise NotImplementedError

    def d2log(self, m, n):
        """Differential of n -> log_m(n) as a (D, D) matrix on T_nM."""
        raise NotImplementedError

    def distance(self, m, n):
        return float(np.linalg.norm(self.flatten(self.log(m, n))))

    def torsion_tensor(self, m):
        """(D, D, D) tensor T[c, a, b] of the manifold's default connection."""
        return np.zeros((self.flat_dim,) * 3)

    gauge_radius = np.inf

    def in_gauge_domain(self, m, n):
        try:
            return self.domain_distance(m, n) < self.gauge_radius
        except (LogFailure, NearCutLocus):
            return False

    def domain_distance(self, m, n):
        """Distance surrogate used for gauge-domain predicates."""
        return self.distance(m, n)

    def domain_distance_batch(self, ms, ns):
        return np.array([self.domain_distance(m, n) for m, n in zip(ms, ns)])

    # -- atlas -------------------------------------------------------------------

    def charts(self):
        raise NotImplementedError

    def chart_at(self, p, atlas=None):
        atlas = self.charts() if atlas is None else atlas
        margins = [c.margin(p) for c in atlas]
        best = int(np.argmax(margins))
        if margins[best] <= 0:
            raise DomainError(f"no chart of {self.name} contains the point")
        return atlas[best]

    # -- misc ---------------------------------------------------------------------

    def curve(self, m, v, eps):
        """A canonical curve through m with velocity v, used for directional FD."""
        return self.exp(m, eps * np.asarray(v, dtype=float))

    def on_manifold(self, p, tol=1e-10):
        return float(np.linalg.norm(self.flatten(p) - self.flatten(self.project(p)))) <= tol

    def random_point(self, rng):
        raise NotImplementedError

    def random_tangent(self, rng, m):
        v = rng.standard_normal(self.flat_dim)
        return self.unflatten(self.tangent_projector(m) @ v)

    # batch hooks (fallbacks loop)
    def log_batch(self, ms, ns):
        return np.stack([self.flatten(self.log(m, n)) for m, n in zip(ms, ns)])

    def transport_batch(self, to_pts, from_pts):
        return np.stack([self.transport(a, b) for a, b in zip(to_pts, from_pts)])

    def spec_json(self):
        return {"type": self.name, "dim": self.dim}


# ---------------------------------------------------------------------------
# Unit sphere S^2 in R^3
# ---------------------------------------------------------------------------


class Sphere(Manifold):
    """Unit sphere with the Levi-Civita connection of the round metric."""

    name = "sphere"
    dim = 2
    point_shape = (3,)
    gauge_radius = np.pi - GAUGE_RADIUS_MARGIN

    def project(self, p):
        p = np.asarray(p, dtype=float)
        return p / np.linalg.norm(p)

    def tangent_projector(self, p):
        p = np.asarray(p, dtype=float)
        return np.eye(3) - np.outer(p, p)

    def exp(self, m, v):
        m = np.asarray(m, dtype=float)
        v = np.asarray(v, dtype=float)
        th = np.linalg.norm(v)
        if th < 1e-300:
            return m.copy()
        return np.cos(th) * m + np.sin(th) * v / th

    def log(self, m, n):
        m = np.asarray(m, dtype=float)
        n = np.asarray(n, dtype=float)
        c = float(np.clip(np.dot(m, n), -1.0, 1.0))
        th = np.arccos(c)
        if th >= self.gauge_radius - 1e-6:
            raise NearCutLocus(f"points at distance {th:.6f} reach the gauge ball")
        u = n - c * m
        un = np.linalg.norm(u)
        if un < 1e-14:
            return np.zeros(3)
        return th * u / un

    def transport(self, to_pt, from_pt):
        m = np.asarray(from_pt, dtype=float)
        n = np.asarray(to_pt, dtype=float)
        c = float(np.dot(m, n))
        if c <= -1.0 + 1e-12:
            raise NearCutLocus("transport through antipode")
        mn = m + n
        return np.eye(3) - np.outer(mn, mn) / (1.0 + c) + 2.0 * np.outer(n, m)

    def d2log(self, m, n):
        """Closed-form differential of n -> log_m(n), as a matrix on T_nM."""
        m = np.asarray(m, dtype=float)
        n = np.asarray(n, dtype=float)
        c = float(np.clip(np.dot(m, n), -1.0, 1.0))
        th = np.arccos(c)
        u = n - c * m
        if th < 1e-6:
            a = 1.0 + th**2 / 6.0
            b = 1.0 / 3.0
        else:
            s = np.sin(th)
            a = th / s
            b = (s - th * c) / s**3
        # dpsi(w) = a (w - (m.w) m) - b (m.w) u   for w in T_nM
        return a * (np.eye(3) - np.outer(m, m)) - b * np.outer(u, m)

    def charts(self):
        return [_stereographic_chart(pole=+1), _stereographic_chart(pole=-1)]

    def chart_christoffels(self, chart, x):
        """Levi-Civita coefficients of the round metric in stereographic charts."""
        if not chart.name.startswith("stereo"):
            return None
        x = np.asarray(x, dtype=float)
        dl = -2.0 * x / (1.0 + float(x @ x))  # gradient of the conformal factor
        eye = np.eye(2)
        return (
            np.einsum("ij,l->ijl", eye, dl)
            + np.einsum("il,j->ijl", eye, dl)
            - np.einsum("jl,i->ijl", eye, dl)
        )

    def random_point(self, rng):
        v = rng.standard_normal(3)
        return v / np.linalg.norm(v)

    def domain_distance_batch(self, ms, ns):
        c = np.clip(np.einsum("pi,pi->p", np.asarray(ms, float), np.asarray(ns, float)), -1.0, 1.0)
        return np.arccos(c)

    # vectorized closed forms used by the pair verifiers
    def log_batch(self, ms, ns):
        ms = np.asarray(ms, dtype=float)
        ns = np.asarray(ns, dtype=float)
        c = np.clip(np.einsum("pi,pi->p", ms, ns), -1.0, 1.0)
        th = np.arccos(c)
        if np.any(th >= self.gauge_radius - 1e-6):
            raise NearCutLocus("a probed pair reaches the gauge ball")
        u = ns - c[:, None] * ms
        un = np.linalg.norm(u, axis=1)
        scale = np.where(un > 1e-14, th / np.maximum(un, 1e-300), 0.0)
        return scale[:, None] * u

    def transport_batch(self, to_pts, from_pts):
        m = np.asarray(from_pts, dtype=float)
        n = np.asarray(to_pts, dtype=float)
        c = np.einsum("pi,pi->p", m, n)
        mn = m + n
        eye = np.broadcast_to(np.eye(3), (m.shape[0], 3, 3))
        return (
            eye
            - np.einsum("pi,pj->pij", mn, mn) / (1.0 + c)[:, None, None]
            + 2.0 * np.einsum("pi,pj->pij", n, m)
        )


def _stereographic_chart(pole=+1):
    """Stereographic projection from (0, 0, pole); covers m3*pole < 0.9."""
    sign = float(pole)
    # coordinate radius matching |m3| <= 0.9 toward the projection pole
    radius = float(np.sqrt((1 + 0.9) / (1 - 0.9)))

    def to_coords(p):
        p = np.asarray(p, dtype=float)
        den = 1.0 - sign * p[2]
        if den <= 1e-12:
            raise DomainError("point at the projection pole")
        return p[:2] / den

    def from_coords(x):
        x = np.asarray(x, dtype=float)
        r2 = float(x @ x)
        s = 1.0 / (1.0 + r2)
        return np.array([2.0 * x[0] * s, 2.0 * x[1] * s, sign * (r2 - 1.0) * s])

    def dto(p):
        p = np.asarray(p, dtype=float)
        den = 1.0 - sign * p[2]
        out = np.zeros((2, 3))
        out[0, 0] = 1.0 / den
        out[1, 1] = 1.0 / den
        out[0, 2] = sign * p[0] / den**2
        out[1, 2] = sign * p[1] / den**2
        return out

    def dfrom(x):
        x = np.asarray(x, dtype=float)
        r2 = float(x @ x)
        s = 1.0 / (1.0 + r2)
        out = np.zeros((3, 2))
        for j in range(2):
            ds = -2.0 * x[j] * s * s
            out[0, j] = 2.0 * ((1.0 if j == 0 else 0.0) * s + x[0] * ds)
            out[1, j] = 2.0 * ((1.0 if j == 1 else 0.0) * s + x[1] * ds)
            out[2, j] = sign * (2.0 * x[j] * s + (r2 - 1.0) * ds)
        return out

    return Chart(
        name=f"stereo-{'north' if pole > 0 else 'south'}",
        dim=2,
        to_coords=to_coords,
        from_coords=from_coords,
        dto=dto,
        dfrom=dfrom,
        radius=radius,
    )


# ---------------------------------------------------------------------------
# Rotation group SO(3) in R^{3x3}
# ---------------------------------------------------------------------------


class SO3(Manifold):
    """Rotations with the connection making left-invariant fields parallel."""

    name = "so3"
    dim = 3
    point_shape = (3, 3)
    gauge_radius = np.pi - GAUGE_RADIUS_MARGIN

    def project(self, p):
        from .linalg import polar_retract

        return polar_retract(np.asarray(p, dtype=float))

    def tangent_projector(self, g):
        g = np.asarray(g, dtype=float)
        basis = np.stack([(g @ hat(e)).reshape(9) for e in np.eye(3)])  # orthonormal * sqrt(2)
        basis /= np.sqrt(2.0)
        return basis.T @ basis

    def exp(self, g, v):
        g = np.asarray(g, dtype=float)
        a = vee(g.T @ np.asarray(v, dtype=float))
        return g @ so3_exp(a)

    def log(self, k, g):
        k = np.asarray(k, dtype=float)
        a = so3_log(k.T @ np.asarray(g, dtype=float))
        th = np.linalg.norm(a)
        if th >= self.gauge_radius - 1e-6:
            raise NearCutLocus(f"rotations at distance {th:.6f} reach the gauge ball")
        return k @ hat(a)

    def transport(self, to_pt, from_pt):
        # left translation by to * from^{-1}: xi -> (to from^T) xi
        q = np.asarray(to_pt, dtype=float) @ np.asarray(from_pt, dtype=float).T
        return np.kron(q, np.eye(3))

    def d2log(self, k, g):
        k = np.asarray(k, dtype=float)
        g = np.asarray(g, dtype=float)
        ell = so3_log(k.T @ g)
        jr_inv = so3_left_jacobian_inv(-ell)  # right Jacobian inverse
        rows = []
        for e in np.eye(3):
            # tangent xi = g hat(e) maps to k hat(Jr^{-1} e)
            rows.append((k @ hat(jr_inv @ e)).reshape(9))
        basis_out = np.stack(rows, axis=1)  # (9, 3)

        def coeff(xi_flat):
            xi = xi_flat.reshape(3, 3)
            return vee(g.T @ xi)

        m = np.stack([coeff(np.eye(9)[i]) for i in range(9)], axis=1)  # (3, 9)
        return basis_out @ m

    def distance(self, g, h):
        return float(np.linalg.norm(so3_log(np.asarray(g).T @ np.asarray(h))))

    def torsion_tensor(self, g):
        g = np.asarray(g, dtype=float)
        out = np.zeros((9, 9, 9))
        basis = [g @ hat(e) for e in np.eye(3)]
        vecs = [b.reshape(9) for b in basis]
        gram = np.linalg.pinv(np.stack(vecs, axis=1))  # (3, 9) coefficients map
        for a in range(3):
            for b in range(3):
                A, B = hat(np.eye(3)[a]), hat(np.eye(3)[b])
                t = -(g @ (A @ B - B @ A))
                out += np.einsum("c,a,b->cab", t.reshape(9), gram[a], gram[b])
        return out

    def charts(self):
        centers = [np.eye(3)] + [so3_exp(np.pi * e) for e in np.eye(3)]
        return [_so3_log_chart(c, i) for i, c in enumerate(centers)]

    def random_point(self, rng):
        return so3_exp(rng.standard_normal(3))

    def domain_distance_batch(self, ks, gs):
        tr = np.einsum("pij,pij->p", np.asarray(ks, float), np.asarray(gs, float))
        return np.arccos(np.clip(0.5 * (tr - 1.0), -1.0, 1.0))

    def log_batch(self, ks, gs):
        return np.stack([self.flatten(self.log(k, g)) for k, g in zip(ks, gs)])

    def transport_batch(self, to_pts, from_pts):
        q = np.einsum("pij,pkj->pik", np.asarray(to_pts, float), np.asarray(from_pts, float))
        out = np.zeros((q.shape[0], 9, 9))
        for i in range(3):
            for j in range(3):
                out[:, i * 3 : i * 3 + 3, j * 3 : j * 3 + 3] = q[:, i, j, None, None] * np.eye(3)
        return out


def _so3_log_chart(center, idx):
    """Rotation-vector chart g -> log(g center^T); right version for stability
    of right-invariant dynamics."""
    c = np.asarray(center, dtype=float)

    def to_coords(g):
        return so3_log(np.asarray(g, dtype=float) @ c.T)

    def from_coords(x):
        return so3_exp(x) @ c

    def dto(g):
        g = np.asarray(g, dtype=float)
        zeta = so3_log(g @ c.T)
        jli = so3_left_jacobian_inv(zeta)
        rows = []
        for i in range(9):
            xi = np.zeros(9)
            xi[i] = 1.0
            xim = xi.reshape(3, 3)
            om = vee(xim @ g.T)
            rows.append(jli @ om)
        return np.stack(rows, axis=1)

    def dfrom(x):
        x = np.asarray(x, dtype=float)
        jl = so3_left_jacobian(x)
        g = so3_exp(x) @ c
        cols = []
        for e in np.eye(3):
            cols.append((hat(jl @ e) @ g).reshape(9))
        return np.stack(cols, axis=1)

    return Chart(
        name=f"so3-log-{idx}",
        dim=3,
        to_coords=to_coords,
        from_coords=from_coords,
        dto=dto,
        dfrom=dfrom,
        radius=np.pi - GAUGE_RADIUS_MARGIN,
    )


# ---------------------------------------------------------------------------
# Chart manifolds: open subsets of R^d with a prescribed connection
# ---------------------------------------------------------------------------


class ChartManifold(Manifold):
    """Open ball in R^d with an optional connection ``gamma``.

    ``gamma(x)`` returns the (d, d, d) coefficient array A with
    (A<v>w)_i = A[i, j, l] v_j w_l; the default connection is flat.  Geodesics
    run through a fixed-step RK4 integrator and logarithms through Newton
    shooting, matching the generic-manifold contract.
    """

    name = "chart"

    def __init__(self, dim, radius=10.0, center=None, gamma=None, h_geo=0.01, extra_charts=None):
        self.dim = int(dim)
        self.point_shape = (self.dim,)
        self.radius = float(radius)
        self.center = np.zeros(self.dim) if center is None else np.asarray(center, dtype=float)
        self.gamma = gamma
        self.h_geo = float(h_geo)
        self.extra_charts = list(extra_charts or [])
        # 5% chart-domain margin
        self.gauge_radius = 2.0 * self.radius * 0.95

    def _gamma(self, x):
        if self.gamma is None:
            return np.zeros((self.dim,) * 3)
        return np.asarray(self.gamma(np.asarray(x, dtype=float)), dtype=float)

    def project(self, p):
        return np.asarray(p, dtype=float)

    def tangent_projector(self, p):
        return np.eye(self.dim)

    def _geodesic(self, m, v, tmax=1.0, want_transport=False, u0=None):
        """RK4 on the geodesic equation, optionally carrying transport frames."""
        m = np.asarray(m, dtype=float)
        v = np.asarray(v, dtype=float)
        n_steps = max(1, int(np.ceil(tmax / self.h_geo)))
        h = tmax / n_steps
        if self.gamma is None:
            p = m + tmax * v
            u = u0 if want_transport else None
            return (p, v, u) if want_transport else (p, v)
        state_p, state_v = m.copy(), v.copy()
        u = None if u0 is None else np.asarray(u0, dtype=float).copy()

        def acc(p, vv):
            A = self._gamma(p)
            return -np.einsum("ijl,j,l->i", A, vv, vv)

        def du(p, vv, uu):
            A = self._gamma(p)
            return -np.einsum("ijl,j,lc->ic", A, vv, uu)

        for _ in range(n_steps):
            if want_transport and u is not None:
                k1p, k1v, k1u = state_v, acc(state_p, state_v), du(state_p, state_v, u)
                k2p = state_v + 0.5 * h * k1v
                k2v = acc(state_p + 0.5 * h * k1p, k2p)
                k2u = du(state_p + 0.5 * h * k1p, k2p, u + 0.5 * h * k1u)
                k3p = state_v + 0.5 * h * k2v
                k3v = acc(state_p + 0.5 * h * k2p, k3p)
                k3u = du(state_p + 0.5 * h * k2p, k3p, u + 0.5 * h * k2u)
                k4p = state_v + h * k3v
                k4v = acc(state_p + h * k3p, k4p)
                k4u = du(state_p + h * k3p, k4p, u + h * k3u)
                u = u + (h / 6.0) * (k1u + 2 * k2u + 2 * k3u + k4u)
            else:
                k1p, k1v = state_v, acc(state_p, state_v)
                k2p = state_v + 0.5 * h * k1v
                k2v = acc(state_p + 0.5 * h * k1p, k2p)
                k3p = state_v + 0.5 * h * k2v
                k3v = acc(state_p + 0.5 * h * k2p, k3p)
                k4p = state_v + h * k3v
                k4v = acc(state_p + h * k3p, k4p)
            state_p = state_p + (h / 6.0) * (k1p + 2 * k2p + 2 * k3p + k4p)
            state_v = state_v + (h / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
            if np.linalg.norm(state_p - self.center) > self.radius:
                from .errors import ChartExit

                raise ChartExit(message="geodesic left the coordinate domain")
        if want_transport:
            return state_p, state_v, u
        return state_p, state_v

    def exp(self, m, v):
        return self._geodesic(m, v)[0]

    def log(self, m, n, tol=1e-12, max_iter=50):
        m = np.asarray(m, dtype=float)
        n = np.asarray(n, dtype=float)
        if self.gamma is None:
            return n - m
        v = n - m
        for _ in range(max_iter):
            endp = self.exp(m, v)
            res = endp - n
            if np.linalg.norm(res) <= tol:
                return v
            jac = np.empty((self.dim, self.dim))
            hstep = 1e-6 * max(1.0, float(np.linalg.norm(v)))
            for j in range(self.dim):
                dv = np.zeros(self.dim)
                dv[j] = hstep
                jac[:, j] = (self.exp(m, v + dv) - self.exp(m, v - dv)) / (2.0 * hstep)
            try:
                v = v - np.linalg.solve(jac, res)
            except np.linalg.LinAlgError as exc:
                raise LogFailure(str(exc)) from exc
        raise LogFailure(f"Newton shooting stalled at residual {np.linalg.norm(res):.3e}")

    def transport(self, to_pt, from_pt):
        if self.gamma is None:
            return np.eye(self.dim)
        v = self.log(from_pt, to_pt)
        _, _, u = self._geodesic(from_pt, v, want_transport=True, u0=np.eye(self.dim))
        return u

    def d2log(self, m, n):
        if self.gamma is None:
            return np.eye(self.dim)
        h = 1e-5 * max(1.0, float(np.linalg.norm(n)))
        cols = []
        for j in range(self.dim):
            dv = np.zeros(self.dim)
            dv[j] = 1.0
            d1 = (self.log(m, n + h * dv) - self.log(m, n - h * dv)) / (2.0 * h)
            d2 = (self.log(m, n + 0.5 * h * dv) - self.log(m, n - 0.5 * h * dv)) / h
            cols.append((4.0 * d2 - d1) / 3.0)
        return np.stack(cols, axis=1)

    def distance(self, m, n):
        if self.gamma is None:
            return float(np.linalg.norm(np.asarray(n) - np.asarray(m)))
        return float(np.linalg.norm(self.log(m, n)))

    def domain_distance(self, m, n):
        # coordinate distance; the conservative 5% margin absorbs the mismatch
        return float(np.linalg.norm(np.asarray(n, float) - np.asarray(m, float)))

    def domain_distance_batch(self, ms, ns):
        return np.linalg.norm(np.asarray(ns, float) - np.asarray(ms, float), axis=-1)

    def torsion_tensor(self, m):
        A = self._gamma(m)
        return A - np.swapaxes(A, 1, 2)

    def curve(self, m, v, eps):
        # any curve with the right velocity does for directional derivatives
        return np.asarray(m, dtype=float) + eps * np.asarray(v, dtype=float)

    @staticmethod
    def from_metric(dim, metric, dmetric=None, radius=10.0, center=None, h_geo=0.01):
        """Chart manifold with the Levi-Civita connection of a coordinate metric.

        ``metric(x)`` returns the (d, d) Gram matrix; ``dmetric(x)`` its
        derivative array dg[i, j, l] = d g_{ij} / d x_l (Richardson central
        differences when omitted).
        """

        def gamma(x):
            g = np.asarray(metric(x), dtype=float)
            if dmetric is not None:
                dg = np.asarray(dmetric(x), dtype=float)
            else:
                h = 1e-5 * max(1.0, float(np.linalg.norm(x)))
                dg = np.empty((dim, dim, dim))
                for l in range(dim):
                    e = np.zeros(dim)
                    e[l] = 1.0
                    d1 = (np.asarray(metric(x + h * e), float) - np.asarray(metric(x - h * e), float)) / (2 * h)
                    d2 = (
                        np.asarray(metric(x + 0.5 * h * e), float) - np.asarray(metric(x - 0.5 * h * e), float)
                    ) / h
                    dg[:, :, l] = (4.0 * d2 - d1) / 3.0
            ginv = np.linalg.inv(g)
            # Gamma^i_{jl} = g^{im}(dg[m,l,j] + dg[m,j,l] - dg[j,l,m]) / 2
            return 0.5 * np.einsum(
                "im,mjl->ijl", ginv, np.transpose(dg, (0, 2, 1)) + dg - np.transpose(dg, (2, 1, 0))
            )

        return ChartManifold(dim, radius=radius, center=center, gamma=gamma, h_geo=h_geo)

    def charts(self):
        ident = Chart(
            name="identity",
            dim=self.dim,
            to_coords=lambda p: np.asarray(p, dtype=float).copy(),
            from_coords=lambda x: np.asarray(x, dtype=float).copy(),
            dto=lambda p: np.eye(self.dim),
            dfrom=lambda x: np.eye(self.dim),
            radius=self.radius,
            center_coords=self.center,
        )
        return [ident] + list(self.extra_charts)

    def random_point(self, rng):
        return self.center + 0.3 * self.radius * rng.standard_normal(self.dim)

    def spec_json(self):
        return {
            "type": "chart",
            "dim": self.dim,
            "charts": [{"name": c.name, "center": list(np.zeros(self.dim)), "radius": c.radius} for c in self.charts()],
            "connection": {"kind": "custom" if self.gamma is not None else "levi-civita"},
        }


# ---------------------------------------------------------------------------
# Products (used for bundle lifts)
# ---------------------------------------------------------------------------


class ProductManifold(Manifold):
    """Product with componentwise connection; points are concatenated flats."""

    def __init__(self, first: Manifold, second: Manifold):
        self.first = first
        self.second = second
        self.name = f"{first.name}*{second.name}"
        self.dim = first.dim + second.dim
        self.point_shape = (first.flat_dim + second.flat_dim,)

    def split(self, p):
        p = np.asarray(p, dtype=float)
        d1 = self.first.flat_dim
        return self.first.unflatten(p[..., :d1]), self.second.unflatten(p[..., d1:])

    def join(self, a, b):
        return np.concatenate([self.first.flatten(a), self.second.flatten(b)], axis=-1)

    def project(self, p):
        a, b = self.split(p)
        return self.join(self.first.project(a), self.second.project(b))

    def tangent_projector(self, p):
        a, b = self.split(p)
        d1 = self.first.flat_dim
        out = np.zeros((self.flat_dim, self.flat_dim))
        out[:d1, :d1] = self.first.tangent_projector(a)
        out[d1:, d1:] = self.second.tangent_projector(b)
        return out

    def exp(self, m, v):
        a, b = self.split(m)
        va, vb = self.split(v)
        return self.join(self.first.exp(a, va), self.second.exp(b, vb))

    def log(self, m, n):
        a, b = self.split(m)
        na, nb = self.split(n)
        return self.join(self.first.log(a, na), self.second.log(b, nb))

    def transport(self, to_pt, from_pt):
        a1, b1 = self.split(to_pt)
        a0, b0 = self.split(from_pt)
        d1 = self.first.flat_dim
        out = np.zeros((self.flat_dim, self.flat_dim))
        out[:d1, :d1] = self.first.transport(a1, a0)
        out[d1:, d1:] = self.second.transport(b1, b0)
        return out

    def d2log(self, m, n):
        a, b = self.split(m)
        na, nb = self.split(n)
        d1 = self.first.flat_dim
        out = np.zeros((self.flat_dim, self.flat_dim))
        out[:d1, :d1] = self.first.d2log(a, na)
        out[d1:, d1:] = self.second.d2log(b, nb)
        return out

    @property
    def gauge_radius(self):
        return min(self.first.gauge_radius, self.second.gauge_radius)

    def distance(self, m, n):
        a, b = self.split(m)
        na, nb = self.split(n)
        return float(np.hypot(self.first.distance(a, na), self.second.distance(b, nb)))

    def charts(self):
        out = []
        for c1 in self.first.charts():
            for c2 in self.second.charts():
                out.append(self._product_chart(c1, c2))
        return out

    def _product_chart(self, c1: Chart, c2: Chart):
        d1f = self.first.flat_dim

        def to_coords(p):
            a, b = self.split(p)
            return np.concatenate([c1.to_coords(a), c2.to_coords(b)])

        def from_coords(x):
            return self.join(c1.from_coords(x[: c1.dim]), c2.from_coords(x[c1.dim :]))

        def dto(p):
            a, b = self.split(p)
            out = np.zeros((c1.dim + c2.dim, self.flat_dim))
            out[: c1.dim, :d1f] = c1.dto(a)
            out[c1.dim :, d1f:] = c2.dto(b)
            return out

        def dfrom(x):
            out = np.zeros((self.flat_dim, c1.dim + c2.dim))
            out[:d1f, : c1.dim] = c1.dfrom(x[: c1.dim])
            out[d1f:, c1.dim :] = c2.dfrom(x[c1.dim :])
            return out

        return Chart(
            name=f"{c1.name}*{c2.name}",
            dim=c1.dim + c2.dim,
            to_coords=to_coords,
            from_coords=from_coords,
            dto=dto,
            dfrom=dfrom,
            radius=min(c1.radius, c2.radius),
        )

    def random_point(self, rng):
        return self.join(self.first.random_point(rng), self.second.random_point(rng))


def manifold_from_spec(doc):
    """Manifold factory for the JSON manifold-spec schema."""
    kind = doc["type"]
    if kind == "sphere":
        return Sphere()
    if kind == "so3":
        return SO3()
    if kind == "chart":
        return ChartManifold(dim=doc["dim"], radius=doc.get("radius", 10.0))
    raise DomainError(f"unknown manifold type {kind!r}")

"""Flat controlled paths and the discrete remainder verifier."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .controls import Control
from .errors import GridMismatch, InvalidGrid, ShapeError
from .roughpath import RoughPath

ZERO_NUM_TOL = 1e-13


@dataclass
class ControlledPath:
    """Samples (y, y') of a path controlled by a rough path's first level.

    ``values`` has shape (N+1, *S) for an arbitrary trailing value shape S and
    ``derivative`` has shape (N+1, *S, k): the trailing axis is the driver
    direction, so ``derivative[i, ..., a]`` is the Gubinelli derivative of
    ``values[i, ...]`` against driver coordinate a.
    """

    times: np.ndarray
    values: np.ndarray
    derivative: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.derivative = np.asarray(self.derivative, dtype=float)
        if self.values.shape[0] != self.times.size or self.derivative.shape[0] != self.times.size:
            raise InvalidGrid("values/derivative do not match the grid")
        if self.derivative.shape[1:-1] != self.values.shape[1:]:
            raise ShapeError("derivative must have shape values.shape + (k,)")

    @property
    def value_shape(self):
        return self.values.shape[1:]

    @property
    def driver_dim(self):
        return self.derivative.shape[-1]

    def coarsen(self, factor=2):
        n = self.times.size - 1
        if n % factor:
            raise InvalidGrid(f"cannot coarsen {n} steps by {factor}")
        idx = np.arange(0, n + 1, factor)
        return ControlledPath(self.times[idx], self.values[idx], self.derivative[idx])

    def restrict(self, i, j):
        return ControlledPath(self.times[i : j + 1], self.values[i : j + 1], self.derivative[i : j + 1])

    def to_json(self, control: Control | None = None):
        doc = {
            "times": self.times.tolist(),
            "values": self.values.tolist(),
            "gubinelli": self.derivative.tolist(),
        }
        if control is not None:
            doc["control"] = control.to_json()
        return doc

    @staticmethod
    def from_json(doc):
        return ControlledPath(
            times=np.asarray(doc["times"], dtype=float),
            values=np.asarray(doc["values"], dtype=float),
            derivative=np.asarray(doc["gubinelli"], dtype=float),
        )


def driver_as_controlled(rp: RoughPath) -> ControlledPath:
    """The tautological controlled path (x, identity)."""
    n, k = rp.values.shape
    deriv = np.broadcast_to(np.eye(k), (n, k, k)).copy()
    return ControlledPath(rp.times, rp.values.copy(), deriv)


def check_same_grid(a_times, b_times):
    if a_times.size != b_times.size or not np.array_equal(a_times, b_times):
        raise GridMismatch("operands live on different grids")


def associated_roughpath(z: ControlledPath, rp: RoughPath) -> RoughPath:
    """Rough path over z built from the controlled data.

    First level is z itself; per-step areas push the driver areas through the
    Gubinelli derivative.  Coarse-pair areas then come from Chen composition as
    for every rough path in this library.
    """
    check_same_grid(z.times, rp.times)
    if z.values.ndim != 2:
        raise ShapeError("associated rough path needs vector-valued z")
    zdag = z.derivative  # (N+1, m, k)
    areas = np.einsum("iua,ivb,iab->iuv", zdag[:-1], zdag[:-1], rp.step_areas)
    p = rp.control.p
    # calibrate a fresh time-scale control for the new first/second levels
    tmp = RoughPath(rp.times, z.values, areas, Control.time_scale(1.0, p))
    c = 0.0
    n = tmp.n_steps
    for i in range(n):
        j = np.arange(i + 1, n + 1)
        dt = rp.times[j] - rp.times[i]
        xin = np.linalg.norm(z.values[j] - z.values[i], axis=-1)
        ain = np.linalg.norm(tmp.area_pairs(np.full(j.shape, i), j).reshape(j.size, -1), axis=-1)
        c = max(c, float(np.max(xin**p / dt)), float(np.max(ain ** (p / 2.0) / dt)))
    return RoughPath(rp.times, z.values.copy(), areas, Control.time_scale(max(c, 1e-300), p))


# -- verification ----------------------------------------------------------------


def _pair_constants(times, values, derivative, rp: RoughPath, p, delta=None):
    """Smallest constants for the two controlled-path inequalities on this grid."""
    n = times.size - 1
    c_rem = 0.0
    c_der = 0.0
    worst_rem = (0, 0)
    flat_vals = values.reshape(n + 1, -1)
    flat_dag = derivative.reshape(n + 1, -1, derivative.shape[-1])
    for i in range(n):
        j = np.arange(i + 1, n + 1)
        if delta is not None:
            j = j[times[j] - times[i] <= delta + 1e-12]
            if j.size == 0:
                continue
        om = rp.control.omega(times[i], times[j])
        dx = rp.values[j] - rp.values[i]
        rem = flat_vals[j] - flat_vals[i] - np.einsum("va,na->nv", flat_dag[i], dx)
        rn = np.linalg.norm(rem, axis=-1)
        dn = np.linalg.norm((flat_dag[j] - flat_dag[i]).reshape(j.size, -1), axis=-1)
        om2 = om ** (2.0 / p)
        om1 = om ** (1.0 / p)
        with np.errstate(divide="ignore", invalid="ignore"):
            r1 = np.where(om2 > 0, rn / np.where(om2 > 0, om2, 1.0), np.where(rn <= ZERO_NUM_TOL, 0.0, np.inf))
            r2 = np.where(om1 > 0, dn / np.where(om1 > 0, om1, 1.0), np.where(dn <= ZERO_NUM_TOL, 0.0, np.inf))
        m = float(np.max(r1, initial=0.0))
        if m > c_rem:
            c_rem = m
            worst_rem = (i, int(j[int(np.argmax(r1))]))
        c_der = max(c_der, float(np.max(r2, initial=0.0)))
    return c_rem, c_der, worst_rem


def stability_slope(constants, hs):
    """Fitted growth of a verifier constant against mesh size (log-log).

    Negative slopes mean the constant diverges under refinement.  Matches the
    order-estimation protocol: the coarsest level is discarded when more than
    three remain (coarse grids probe too few pairs and sit below the sup).
    Levels with (numerically) zero constants are dropped; all-zero means exact.
    """
    cs = np.asarray(constants, dtype=float)
    hs = np.asarray(hs, dtype=float)
    keep = cs > ZERO_NUM_TOL
    if not np.any(keep):
        return 0.0, True
    cs, hs = cs[keep], hs[keep]
    if cs.size > 3:
        order = np.argsort(hs)
        cs, hs = cs[order][:-1], hs[order][:-1]
    if cs.size == 1:
        return 0.0, False
    sl = np.polyfit(np.log(hs), np.log(cs), 1)[0]
    return float(sl), False


STABILITY_SLOPE_TOL = -0.25


def verify_crp(y: ControlledPath, rp: RoughPath, delta=None, levels=4):
    """Report the smallest controlled-path constants and their mesh stability.

    The constants are measured on the full grid and on up to three dyadic
    coarsenings; ``pass`` requires finite constants whose fitted growth slope
    against the mesh stays above -0.25 (stable under refinement).  When
    ``delta`` is given only pairs with t - s <= delta are probed; the report
    also carries constants restricted to dyadic deltas together with the
    largest delta at which they stay within a factor two of the local one.
    """
    check_same_grid(y.times, rp.times)
    p = rp.control.p
    cur_y, cur_rp = y, rp
    cs_rem, cs_der, hs = [], [], []
    worst = (0, 0)
    for lev in range(levels):
        c2, c1, w = _pair_constants(cur_y.times, cur_y.values, cur_y.derivative, cur_rp, p, delta)
        if lev == 0:
            worst = w
        cs_rem.append(c2)
        cs_der.append(c1)
        hs.append(float(np.max(np.diff(cur_y.times))))
        n = cur_y.times.size - 1
        if n % 2 or n < 8:
            break
        cur_y = cur_y.coarsen(2)
        cur_rp = cur_rp.coarsen(2)
    slope2, exact2 = stability_slope(cs_rem, hs)
    slope1, exact1 = stability_slope(cs_der, hs)
    pass2 = np.isfinite(cs_rem[0]) and (exact2 or slope2 > STABILITY_SLOPE_TOL)
    pass1 = np.isfinite(cs_der[0]) and (exact1 or slope1 > STABILITY_SLOPE_TOL)

    # delta-restricted diagnostics (reported, not gating)
    horizon = float(y.times[-1] - y.times[0])
    by_delta = {}
    d = horizon
    while d >= 4 * float(np.min(np.diff(y.times))):
        c2d, _, _ = _pair_constants(y.times, y.values, y.derivative, rp, p, d)
        by_delta[d] = c2d
        d /= 2.0
    stable_delta = None
    if by_delta:
        smallest = min(by_delta)
        base = by_delta[smallest]
        for dd in sorted(by_delta, reverse=True):
            if base == 0.0:
                ok = by_delta[dd] == 0.0
            else:
                ok = np.isfinite(by_delta[dd]) and by_delta[dd] <= 2.0 * base
            if ok:
                stable_delta = dd
                break

    return {
        "C_remainder": cs_rem[0],
        "C_derivative": cs_der[0],
        "levels": {"h": hs, "C_remainder": cs_rem, "C_derivative": cs_der},
        "slope_remainder": slope2,
        "slope_derivative": slope1,
        "worst_pair": worst,
        "pass_remainder": bool(pass2),
        "pass_derivative": bool(pass1),
        "pass": bool(pass2 and pass1),
        "delta": delta,
        "delta_constants": {f"{k:.6g}": v for k, v in by_delta.items()},
        "largest_stable_delta": stable_delta,
    }

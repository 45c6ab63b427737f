"""Deterministic named fixtures: drivers, manifold paths, fields, one-forms.

Every fixture is a pure function of its parameters (sizes, speeds, seeds), so
repeated builds are bit-identical.  Builders take the grid size N and return
library objects ready for the verification suites.
"""

from __future__ import annotations

import numpy as np

from .controls import Control
from .controlled import ControlledPath
from .errors import ConfigError
from .gauges import logarithm_gauge
from .linalg import hat, so3_exp
from .manifolds import ChartManifold, SO3, Sphere
from .mcrp import ManifoldControlledPath, crp_from_projection, crp_from_smooth_curve
from .mrde import ManifoldDrivingField
from .roughpath import RoughPath, lift_smooth, pure_area_driver, time_lift

SPHERE = Sphere()
SO3M = SO3()
LINE = ChartManifold(1, radius=20.0)
FLAT3 = ChartManifold(3, radius=20.0)


# -- drivers -----------------------------------------------------------------------


def smooth_2d_driver(n, T=1.0):
    grid = np.linspace(0.0, T, n + 1)
    return lift_smooth(
        lambda t: np.array([np.sin(t), np.cos(2.0 * t) / 2.0]),
        grid,
        dpath=lambda t: np.array([np.cos(t), -np.sin(2.0 * t)]),
    )


def pure_area_fixture(n, a=1.0, T=1.0):
    return pure_area_driver(a, np.linspace(0.0, T, n + 1))


def linear_drive_driver(n, speed=1.0, T=1.0):
    """Ambient R^3 driver moving along the first axis at constant speed."""
    grid = np.linspace(0.0, T, n + 1)
    pts = np.zeros((n + 1, 3))
    pts[:, 0] = speed * grid
    dx = np.diff(pts, axis=0)
    areas = 0.5 * np.einsum("ia,ib->iab", dx, dx)
    c = max(speed, speed**2)
    return RoughPath(grid, pts, areas, Control.time_scale(max(c, 1e-12), 1.0))


# -- sphere paths --------------------------------------------------------------------


def equator_crp(n, T=2.0 * np.pi):
    grid = np.linspace(0.0, T, n + 1)
    rp = lift_smooth(
        lambda t: np.array([np.cos(t), np.sin(t), 0.0]),
        grid,
        dpath=lambda t: np.array([-np.sin(t), np.cos(t), 0.0]),
    )
    return crp_from_projection(SPHERE, rp)


def latitude_crp(n, theta=np.pi / 6, T=2.0 * np.pi):
    r, z = np.sin(theta), np.cos(theta)
    grid = np.linspace(0.0, T, n + 1)
    rp = lift_smooth(
        lambda t: np.array([r * np.cos(t), r * np.sin(t), z]),
        grid,
        dpath=lambda t: np.array([-r * np.sin(t), r * np.cos(t), 0.0]),
    )
    return crp_from_projection(SPHERE, rp)


def sphere_spiral_crp(n, T=2.0 * np.pi):
    """Nonsymmetric smooth sphere path (wobbling latitude)."""

    def curve(t):
        th = np.pi / 3 + 0.3 * np.sin(t)
        return np.array([np.sin(th) * np.cos(t), np.sin(th) * np.sin(t), np.cos(th)])

    def dcurve(t):
        th = np.pi / 3 + 0.3 * np.sin(t)
        dth = 0.3 * np.cos(t)
        return np.array(
            [
                np.cos(th) * dth * np.cos(t) - np.sin(th) * np.sin(t),
                np.cos(th) * dth * np.sin(t) + np.sin(th) * np.cos(t),
                -np.sin(th) * dth,
            ]
        )

    grid = np.linspace(0.0, T, n + 1)
    rp = lift_smooth(curve, grid, dpath=dcurve)
    return crp_from_projection(SPHERE, rp)


def polar_cap_crp(n, theta=np.pi / 6, T=2.0 * np.pi):
    """Latitude loop bounding a polar cap (alias used by the FTC fixtures)."""
    return latitude_crp(n, theta=theta, T=T)


# -- SO(3) paths ------------------------------------------------------------------------


def so3_curve_crp(n, T=1.5):
    c1 = hat(np.array([0.0, 0.0, 1.0]))
    c2 = hat(np.array([1.0, 0.0, 0.0]))

    def curve(t):
        return so3_exp(np.array([0.0, 0.0, t])) @ so3_exp(np.array([0.5 * np.sin(t), 0.0, 0.0]))

    def dcurve(t):
        a = so3_exp(np.array([0.0, 0.0, t]))
        b = so3_exp(np.array([0.5 * np.sin(t), 0.0, 0.0]))
        return c1 @ a @ b + 0.5 * np.cos(t) * (a @ c2 @ b)

    return crp_from_smooth_curve(SO3M, curve, dcurve, time_lift(np.linspace(0.0, T, n + 1)))


# -- flat / chart-manifold paths --------------------------------------------------------


def flat3_crp(n, T=2.0 * np.pi):
    """Ambient R^3 controlled path staying away from the origin."""
    grid = np.linspace(0.0, T, n + 1)
    rp = lift_smooth(
        lambda t: np.array([np.cos(t), np.sin(t), 0.5 + 0.2 * np.sin(2.0 * t)]),
        grid,
        dpath=lambda t: np.array([-np.sin(t), np.cos(t), 0.4 * np.cos(2.0 * t)]),
    )
    deriv = np.broadcast_to(np.eye(3), (n + 1, 3, 3)).copy()
    return ManifoldControlledPath(FLAT3, grid, rp.values.copy(), deriv, rp)


def line_quadratic_crp(n, T=1.0):
    """Scalar path on the line, used by the quadratic-gauge fixtures."""
    grid = np.linspace(0.0, T, n + 1)
    rp = lift_smooth(lambda t: np.array([np.sin(t)]), grid, dpath=lambda t: np.array([np.cos(t)]))
    pts = rp.values.copy()
    deriv = np.ones((n + 1, 1, 1))
    return ManifoldControlledPath(LINE, grid, pts, deriv, rp)


def example_67_crp(eps=0.01, p=2.0):
    """Degenerate-control fixture on the line (closed-form path and control)."""
    n = int(round(2.0 / eps))
    grid = np.linspace(0.0, 2.0, n + 1)
    x = np.maximum(grid - 1.0, 0.0) ** (1.0 / p)
    ydag = np.where(grid <= 0.5, 2.0 - 2.0 * grid, 1.0)
    control = Control.from_callable(
        lambda s, t: np.where(t <= 1.0, 0.0, t - np.maximum(s, 1.0)), grid, p=p
    )
    dx = np.diff(x)
    areas = (0.5 * dx * dx)[:, None, None]
    rp = RoughPath(grid, x[:, None], areas, control)
    return ManifoldControlledPath(LINE, grid, x[:, None].copy(), ydag[:, None, None], rp)


# -- fields ------------------------------------------------------------------------------


def sphere_projection_field():
    return ManifoldDrivingField(SPHERE, lambda m: SPHERE.tangent_projector(m), name="projection")


def so3_right_invariant_field():
    def fn(g):
        return np.stack([(-(hat(e) @ g)).reshape(9) for e in np.eye(3)], axis=1)

    return ManifoldDrivingField(SO3M, fn, name="right-invariant")


# -- gauges -------------------------------------------------------------------------------


def line_quadratic_gauge(c=0.3):
    def psi(m, n):
        d = float(n[0] - m[0])
        return np.array([d + c * d * d])

    return logarithm_gauge(
        LINE, psi, d2_fn=lambda m, n: np.array([[1.0 + 2.0 * c * float(n[0] - m[0])]]), name="quadratic"
    )


# -- scalar observables ----------------------------------------------------------------------


def sphere_observables():
    return [
        (lambda m: m[0], lambda m: np.array([1.0, 0.0, 0.0])),
        (lambda m: m[1], lambda m: np.array([0.0, 1.0, 0.0])),
        (lambda m: m[2], lambda m: np.array([0.0, 0.0, 1.0])),
        (lambda m: float(np.exp(m[0])), lambda m: np.array([np.exp(m[0]), 0.0, 0.0])),
    ]


def height_hessian(m, v):
    """Closed-form covariant Hessian of the sphere height function on v (x) v."""
    return -m[2] * float(np.dot(v, v))


# -- registry ----------------------------------------------------------------------------------


FIXTURES = {
    "smooth-2d": {"kind": "driver", "p": 1.0, "build": smooth_2d_driver},
    "pure-area": {"kind": "driver", "p": 2.0, "build": pure_area_fixture},
    "linear-drive": {"kind": "driver", "p": 1.0, "build": linear_drive_driver},
    "equator": {"kind": "mcrp", "p": 1.0, "build": equator_crp},
    "latitude": {"kind": "mcrp", "p": 1.0, "build": latitude_crp},
    "sphere-spiral": {"kind": "mcrp", "p": 1.0, "build": sphere_spiral_crp},
    "polar-cap": {"kind": "mcrp", "p": 1.0, "build": polar_cap_crp},
    "so3-curve": {"kind": "mcrp", "p": 1.0, "build": so3_curve_crp},
    "flat3": {"kind": "mcrp", "p": 1.0, "build": flat3_crp},
    "line-quadratic": {"kind": "mcrp", "p": 1.0, "build": line_quadratic_crp},
    "example-6.7": {"kind": "mcrp", "p": 2.0, "build": lambda eps=0.01, p=2.0: example_67_crp(eps, p)},
}


def build_fixture(name, **kwargs):
    if name not in FIXTURES:
        raise ConfigError(f"unknown fixture {name!r}; known: {sorted(FIXTURES)}")
    return FIXTURES[name]["build"](**kwargs)

"""Command-line surface: lift, integrate, rde, transport, verify, convergence, suite."""

from __future__ import annotations

import json
import os
import sys

import click
import numpy as np

from . import fixtures as fx
from .convergence import (
    COMPARISON_CSV_HEADER,
    CONVERGENCE_CSV_HEADER,
    ConvergenceReport,
    dyadic_levels,
)
from .errors import ConfigError, CrpError
from .gauges import connection_gauge, standard_gauge
from .mcrp import ratio_at_pair, verify_chart_crp, verify_gauge_crp
from .mrde import rde_solve_manifold
from .oneforms import integrate_smooth_oneform
from .serialize import path_csv_header, path_csv_rows, write_csv, write_json
from .transport import parallel_translate_frame, unroll


def _out_dir(out):
    env = os.environ.get("CRP_OUT")
    path = env or out or "crp-out"
    os.makedirs(path, exist_ok=True)
    return path


def _load_config(path):
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config parse error: {exc}") from exc


def _tangent_frame(m):
    ref = np.array([0.0, 0.0, 1.0]) if abs(m[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    e1 = np.cross(m, ref)
    e1 /= np.linalg.norm(e1)
    return np.stack([e1, np.cross(m, e1)], axis=1)


@click.group()
def main():
    """Controlled rough paths on manifolds: drivers, integrals, RDEs, transport."""


common = [
    click.option("--config", "config_path", type=click.Path(exists=True), default=None, help="JSON config"),
    click.option("--out", default=None, help="output directory (CRP_OUT overrides)"),
    click.option("--deterministic", is_flag=True, default=False, help="byte-stable reports"),
]


def add_common(fn):
    for opt in reversed(common):
        fn = opt(fn)
    return fn


@main.command()
@add_common
@click.option("--fixture", default="smooth-2d", help="driver fixture name")
@click.option("--n", default=256, type=int, help="grid size")
def lift(config_path, out, deterministic, fixture, n):
    """Build a rough-path lift and report its algebraic residuals."""
    cfg = _load_config(config_path)
    fixture = cfg.get("fixture", fixture)
    n = int(cfg.get("n", n))
    built = fx.build_fixture(fixture, n=n)
    rp = built if fx.FIXTURES[fixture]["kind"] == "driver" else built.driver
    doc = {
        "fixture": fixture,
        "n": n,
        "chen_residual": rp.chen_residual(),
        "weak_geometric_residual": rp.weak_geometric_residual(),
        "bound_constant": rp.bound_constant(),
        "control": rp.control.to_json(),
    }
    odir = _out_dir(out)
    write_json(os.path.join(odir, f"lift-{fixture}.json"), {**doc, "path": rp.to_json()})
    write_csv(
        os.path.join(odir, f"lift-{fixture}.csv"), path_csv_header(rp.values), path_csv_rows(rp.times, rp.values)
    )
    click.echo(json.dumps(doc, sort_keys=True))


@main.command()
@add_common
@click.option("--fixture", default="sphere-spiral", help="manifold path fixture")
@click.option("--n", default=512, type=int)
@click.option("--gauge", "gauge_name", default="connection", type=click.Choice(["connection", "chart"]))
def integrate(config_path, out, deterministic, fixture, n, gauge_name):
    """Integrate the area-type one-form along a fixture path."""
    cfg = _load_config(config_path)
    fixture = cfg.get("fixture", fixture)
    n = int(cfg.get("n", n))
    y = fx.build_fixture(fixture, n=n)
    mani = y.manifold
    if gauge_name == "connection":
        gauge = connection_gauge(mani)
    else:
        from .gauges import chart_gauge

        gauge = chart_gauge(mani, mani.chart_at(y.points[0]))

    if mani is fx.SPHERE:
        form = lambda m: np.array([[-m[1], m[0], 0.0]])  # noqa: E731
    else:
        form = lambda m: np.ones((1, mani.flat_dim))  # noqa: E731
    z = integrate_smooth_oneform(form, y, gauge)
    odir = _out_dir(out)
    write_json(os.path.join(odir, f"integral-{fixture}.json"), z.to_json(y.driver.control))
    write_csv(
        os.path.join(odir, f"integral-{fixture}.csv"), path_csv_header(z.values), path_csv_rows(z.times, z.values)
    )
    click.echo(json.dumps({"fixture": fixture, "endpoint": z.values[-1].tolist()}, sort_keys=True))


def _build_rde_from_config(cfg, fixture, n, retraction):
    """Config schema: {manifold, field:{kind}, driver, y0, horizon, scheme}."""
    fixture = cfg.get("fixture", fixture)
    n = int(cfg.get("n", cfg.get("driver", {}).get("n", n)))
    retraction = bool(cfg.get("scheme", {}).get("retraction", retraction))
    horizon = cfg.get("horizon")
    if "field" in cfg or "manifold" in cfg:
        kind = cfg.get("field", {}).get("kind", "projection")
        if kind == "projection":
            rp = fx.linear_drive_driver(n, speed=float(cfg.get("field", {}).get("params", {}).get("speed", 1.0)))
            field = fx.sphere_projection_field()
            y0 = np.asarray(cfg.get("y0", [0.0, 1.0, 0.0]), dtype=float)
        elif kind in ("left-invariant", "right-invariant"):
            a0 = np.asarray(cfg.get("field", {}).get("params", {}).get("direction", [0.0, 0.0, np.pi / 2]), float)
            grid = np.linspace(0.0, 1.0, n + 1)
            pts = np.outer(grid, a0)
            dx = np.diff(pts, axis=0)
            from .controls import Control
            from .roughpath import RoughPath

            c = max(float(np.linalg.norm(a0)), 1e-12)
            rp = RoughPath(grid, pts, 0.5 * np.einsum("ia,ib->iab", dx, dx), Control.time_scale(c, 1.0))
            field = fx.so3_right_invariant_field()
            y0 = np.asarray(cfg.get("y0", np.eye(3).tolist()), dtype=float)
        else:
            raise ConfigError(f"unsupported field kind {kind!r}")
        if horizon is not None:
            horizon = (float(horizon[0]), float(horizon[1]))
        return fixture, rde_solve_manifold(field, rp, y0, horizon=horizon, retraction=retraction)
    if fixture == "sphere-projection-rde":
        rp = fx.linear_drive_driver(n)
        return fixture, rde_solve_manifold(
            fx.sphere_projection_field(), rp, np.array([0.0, 1.0, 0.0]), retraction=retraction
        )
    if fixture == "so3-constant-rde":
        a0 = (np.pi / 2) * np.array([0.0, 0.0, 1.0])
        grid = np.linspace(0.0, 1.0, n + 1)
        pts = np.outer(grid, a0)
        dx = np.diff(pts, axis=0)
        from .controls import Control
        from .roughpath import RoughPath

        rp = RoughPath(grid, pts, 0.5 * np.einsum("ia,ib->iab", dx, dx), Control.time_scale(np.pi / 2, 1.0))
        return fixture, rde_solve_manifold(fx.so3_right_invariant_field(), rp, np.eye(3), retraction=retraction)
    raise ConfigError(f"unknown rde fixture {fixture!r}")


@main.command()
@add_common
@click.option("--fixture", default="sphere-projection-rde", help="rde fixture name")
@click.option("--n", default=1024, type=int)
@click.option("--retraction", is_flag=True, default=False)
def rde(config_path, out, deterministic, fixture, n, retraction):
    """Solve a manifold RDE (named fixture or full JSON config)."""
    cfg = _load_config(config_path)
    fixture, sol = _build_rde_from_config(cfg, fixture, n, retraction)
    doc = sol.to_json()
    doc["metadata"] = getattr(sol, "meta", {})
    odir = _out_dir(out)
    write_json(os.path.join(odir, f"rde-{fixture}.json"), doc)
    click.echo(
        json.dumps(
            {"fixture": fixture, "chart_switches": doc["metadata"].get("chart_switches", [])}, sort_keys=True
        )
    )


@main.command()
@add_common
@click.option("--fixture", default="latitude", help="base path fixture")
@click.option("--n", default=1024, type=int)
def transport(config_path, out, deterministic, fixture, n):
    """Parallel-translate a frame along a fixture path and unroll it."""
    cfg = _load_config(config_path)
    fixture = cfg.get("fixture", fixture)
    n = int(cfg.get("n", n))
    y = fx.build_fixture(fixture, n=n)
    u0 = _tangent_frame(y.points[0])
    lift_frames = parallel_translate_frame(y, u0)
    z, _ = unroll(y, u0, lift=lift_frames)
    doc = {
        "fixture": fixture,
        "holonomy_angle": lift_frames.holonomy_angle(),
        "anti_development_endpoint": z.values[-1].tolist(),
        "u0": u0.tolist(),
    }
    odir = _out_dir(out)
    write_json(os.path.join(odir, f"transport-{fixture}.json"), doc)
    write_csv(
        os.path.join(odir, f"antidevelopment-{fixture}.csv"),
        path_csv_header(z.values),
        path_csv_rows(z.times, z.values),
    )
    click.echo(json.dumps({"fixture": fixture, "holonomy_angle": doc["holonomy_angle"]}, sort_keys=True))


@main.command()
@add_common
@click.option("--fixture", default="example-6.7")
@click.option("--p", default=2.0, type=float)
@click.option("--delta", default=0.5, type=float)
def verify(config_path, out, deterministic, fixture, p, delta):
    """Run the gauge and chart verifiers on a fixture."""
    cfg = _load_config(config_path)
    fixture = cfg.get("fixture", fixture)
    p = float(cfg.get("p", p))
    if fixture == "example-6.7":
        y = fx.example_67_crp(p=p)
        gauge = standard_gauge(fx.LINE)
    else:
        y = fx.build_fixture(fixture, n=int(cfg.get("n", 256)))
        gauge = connection_gauge(y.manifold)
        delta = None
    grep = verify_gauge_crp(y, gauge, delta=delta)
    chart = y.manifold.chart_at(y.points[0])
    crep = verify_chart_crp(y, chart)
    doc = {
        "fixture": fixture,
        "gauge": {k: grep[k] for k in ("C2", "C1", "delta", "pairs_probed", "pass", "pass_remainder")},
        "chart": {k: crep[k] for k in ("C2", "C1", "pass", "pass_remainder")},
    }
    if fixture == "example-6.7":
        idx = int(np.searchsorted(y.times, 1.0)) + 1
        doc["chart"]["ratio_at_eps"] = ratio_at_pair(y, chart, 0.0, y.times[idx])
    odir = _out_dir(out)
    write_json(os.path.join(odir, f"verify-{fixture}.json"), doc)
    click.echo(json.dumps(doc, sort_keys=True))


@main.command()
@add_common
@click.option("--fixture", default="sphere-projection-rde")
@click.option("--levels", default=5, type=int)
@click.option("--p", default=1.0, type=float)
def convergence(config_path, out, deterministic, fixture, levels, p):
    """Mesh-refinement study of a fixture against its oracle."""
    cfg = _load_config(config_path)
    fixture = cfg.get("fixture", fixture)
    levels = int(cfg.get("levels", levels))
    if fixture == "sphere-projection-rde":
        ns = dyadic_levels(1 << (5 + levels), levels)
        errs, hs = [], []
        from .suite import _rk4_projection_values

        for n in ns:
            rp = fx.linear_drive_driver(n)
            sol = rde_solve_manifold(fx.sphere_projection_field(), rp, np.array([0.0, 1.0, 0.0]))
            oracle = _rk4_projection_values(np.array([0.0, 1.0, 0.0]), 1.0, rp.times, h=1e-4)
            errs.append(float(np.max(np.linalg.norm(sol.points - oracle, axis=1))))
            hs.append(1.0 / n)
        report = ConvergenceReport.from_levels(fixture, ns, hs, errs, target=2.0)
    elif fixture == "pure-area-commutator":
        from .flatrde import DrivingField, rde_solve_flat

        ns = dyadic_levels(1 << (5 + levels), levels)
        mats = np.array([[[0.0, 0.0], [1.0, 0.0]], [[0.0, 1.0], [0.0, 0.0]]])
        errs, hs = [], []
        for n in ns:
            rp = fx.pure_area_fixture(n)
            sol = rde_solve_flat(DrivingField(matrices=mats), rp, np.array([1.0, 1.0]))
            errs.append(float(np.max(np.abs(sol.values[-1] - np.array([np.e, 1.0 / np.e])))))
            hs.append(1.0 / n)
        report = ConvergenceReport.from_levels(fixture, ns, hs, errs, target=1.0)
    else:
        raise ConfigError(f"unknown convergence fixture {fixture!r}")
    if deterministic:
        report.runtime = 0.0
    odir = _out_dir(out)
    write_json(os.path.join(odir, f"convergence-{fixture}.json"), report.to_json())
    write_csv(os.path.join(odir, f"convergence-{fixture}.csv"), CONVERGENCE_CSV_HEADER, report.csv_rows())
    click.echo(json.dumps({"fixture": fixture, "slope": report.slope, "pass": report.passed}, sort_keys=True))
    sys.exit(0 if report.passed else 1)


@main.command()
@add_common
@click.option("--jobs", default=1, type=int)
@click.option("--criteria", "names", multiple=True, help="criterion names (default all)")
def suite(config_path, out, deterministic, jobs, names):
    """Run the acceptance suites; exit 0 iff every criterion passes."""
    from .suite import run_suite

    try:
        cfg = _load_config(config_path)
    except ConfigError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    names = list(names) or cfg.get("criteria")
    if names == []:
        names = None
    if cfg.get("fixtures") == []:
        odir = _out_dir(out)
        write_json(os.path.join(odir, "suite-report.json"), {"criteria": [], "pass": True, "failed": []})
        click.echo("empty fixture list: nothing to run")
        sys.exit(0)
    try:
        bundle = run_suite(names=names, deterministic=deterministic, jobs=jobs)
    except ConfigError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    except CrpError as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        sys.exit(1)
    odir = _out_dir(out)
    write_json(os.path.join(odir, "suite-report.json"), bundle)
    rows = []
    for crit in bundle["criteria"]:
        for c in crit["checks"]:
            rows.append(
                [crit["name"] + ":" + c["check"], repr(c["value"]), repr(c["tolerance"]), c["mode"], "", str(c["pass"])]
            )
    write_csv(os.path.join(odir, "suite-checks.csv"), COMPARISON_CSV_HEADER, rows)
    for crit in bundle["criteria"]:
        click.echo(("PASS " if crit["pass"] else "FAIL ") + crit["name"])
    if not bundle["pass"]:
        click.echo("failed: " + ", ".join(bundle["failed"]), err=True)
        sys.exit(1)
    sys.exit(0)


if __name__ == "__main__":
    main()

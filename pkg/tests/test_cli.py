from __future__ import annotations

import json
import os

import pytest
from click.testing import CliRunner

from crp.cli import main


@pytest.fixture()
def runner():
    return CliRunner()


def test_verify_example_67(runner, tmp_path):
    res = runner.invoke(main, ["verify", "--fixture", "example-6.7", "--p", "2", "--out", str(tmp_path)])
    assert res.exit_code == 0, res.output
    doc = json.loads((tmp_path / "verify-example-6.7.json").read_text())
    assert doc["gauge"]["pass_remainder"] is True
    assert doc["chart"]["pass_remainder"] is False
    assert abs(doc["chart"]["ratio_at_eps"] - 10.0) < 1e-9


def test_convergence_sphere_rde(runner, tmp_path):
    res = runner.invoke(
        main, ["convergence", "--fixture", "sphere-projection-rde", "--levels", "4", "--out", str(tmp_path)]
    )
    assert res.exit_code == 0, res.output
    doc = json.loads((tmp_path / "convergence-sphere-projection-rde.json").read_text())
    assert doc["pass"] and abs(doc["slope"] - 2.0) < 0.5
    csv_text = (tmp_path / "convergence-sphere-projection-rde.csv").read_text()
    assert csv_text.splitlines()[0] == "level,N,h,error,slope_partial"


def test_empty_fixture_list_exits_zero(runner, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"fixtures": []}))
    res = runner.invoke(main, ["suite", "--config", str(cfg), "--out", str(tmp_path)])
    assert res.exit_code == 0, res.output
    doc = json.loads((tmp_path / "suite-report.json").read_text())
    assert doc["criteria"] == [] and doc["pass"] is True


def test_config_parse_error_exits_two(runner, tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text("{not json")
    res = runner.invoke(main, ["suite", "--config", str(cfg), "--out", str(tmp_path)])
    assert res.exit_code == 2


def test_unknown_criterion_exits_two(runner, tmp_path):
    res = runner.invoke(main, ["suite", "--criteria", "criterion-99-nope", "--out", str(tmp_path)])
    assert res.exit_code == 2


def test_deterministic_suite_is_byte_identical(runner, tmp_path):
    outs = []
    for sub in ("a", "b"):
        odir = tmp_path / sub
        res = runner.invoke(
            main,
            [
                "suite",
                "--criteria",
                "criterion-03-example-6.7",
                "--criteria",
                "criterion-11-determinism",
                "--deterministic",
                "--out",
                str(odir),
            ],
        )
        assert res.exit_code == 0, res.output
        outs.append(
            (odir / "suite-report.json").read_bytes() + (odir / "suite-checks.csv").read_bytes()
        )
    assert outs[0] == outs[1]


def test_out_env_override(runner, tmp_path, monkeypatch):
    target = tmp_path / "envout"
    monkeypatch.setenv("CRP_OUT", str(target))
    res = runner.invoke(main, ["lift", "--fixture", "pure-area", "--n", "16"])
    assert res.exit_code == 0, res.output
    assert (target / "lift-pure-area.json").exists()


def test_rde_and_transport_commands(runner, tmp_path):
    res = runner.invoke(main, ["rde", "--fixture", "so3-constant-rde", "--n", "64", "--out", str(tmp_path)])
    assert res.exit_code == 0, res.output
    assert (tmp_path / "rde-so3-constant-rde.json").exists()
    res2 = runner.invoke(main, ["transport", "--fixture", "latitude", "--n", "128", "--out", str(tmp_path)])
    assert res2.exit_code == 0, res2.output
    doc = json.loads((tmp_path / "transport-latitude.json").read_text())
    assert "holonomy_angle" in doc


def test_integrate_command(runner, tmp_path):
    res = runner.invoke(main, ["integrate", "--fixture", "equator", "--n", "128", "--out", str(tmp_path)])
    assert res.exit_code == 0, res.output
    doc = json.loads((tmp_path / "integral-equator.json").read_text())
    assert set(doc) >= {"times", "values", "gubinelli"}


def test_rde_full_config_schema(runner, tmp_path):
    import json as _json

    cfg = tmp_path / "rde.json"
    cfg.write_text(
        _json.dumps(
            {
                "fixture": "config-sphere",
                "manifold": {"type": "sphere"},
                "field": {"kind": "projection", "params": {"speed": 0.5}},
                "driver": {"n": 64},
                "y0": [0.0, 1.0, 0.0],
                "scheme": {"retraction": True},
            }
        )
    )
    res = runner.invoke(main, ["rde", "--config", str(cfg), "--out", str(tmp_path)])
    assert res.exit_code == 0, res.output
    doc = json.loads((tmp_path / "rde-config-sphere.json").read_text())
    assert doc["metadata"]["retraction"] is True
    assert len(doc["times"]) == 65

import dataclasses
import json

import numpy as np
import pytest

from nlch_control import GridSpec, ScalarField, load_config, write_config
from nlch_control.cli import (EXIT_CHECK, EXIT_OK, EXIT_SOLVER, EXIT_VALIDATION,
                              cmd_gradcheck, main)
from nlch_control.config import config_from_dict, config_to_dict
from nlch_control.errors import ConfigError, FieldShapeError
from nlch_control.snapshots import (MANIFEST_NAME, read_snapshot, write_snapshot)


BASE_CONFIG = {
    "grid": {"cells": [24], "extent": [1.0]},
    "kernel": {"family": "gaussian", "amplitude": 4.0, "width": 0.2},
    "model": {"A": 0.5, "B": 1.0, "chi": 0.0, "lambda_s": 2.0},
    "time": {"T": 0.2, "steps": 16},
    "initial": {
        "phi": {"kind": "bumps", "background": -0.4, "centers": [[0.5]],
                "amplitudes": [0.9], "widths": [0.12]},
        "sigma": {"kind": "constant", "value": 0.3},
    },
    "cost": {"alpha_omega": 1.0, "alpha_u": 0.01, "beta_v": 0.01,
             "targets": {"kind": "zero"}},
    "output": {"directory": "out", "snapshot_stride": 8},
    "seed": 5,
}


def write_cfg(tmp_path, overrides=None, name="config.json"):
    raw = json.loads(json.dumps(BASE_CONFIG))
    for key, value in (overrides or {}).items():
        if isinstance(value, dict) and key in raw and isinstance(raw[key], dict):
            raw[key].update(value)
        else:
            raw[key] = value
    path = tmp_path / name
    path.write_text(json.dumps(raw, indent=1))
    return path


# ---- configuration ------------------------------------------------------


def test_minimal_config_gets_documented_defaults(tmp_path):
    path = tmp_path / "minimal.json"
    path.write_text("{}\n")
    cfg = load_config(path)
    assert cfg.grid_cells == (64,)
    assert cfg.kernel_family == "gaussian"
    assert cfg.solver_method == "direct"
    assert cfg.opt_max_iter == 200
    assert cfg.seed == 0
    assert cfg.snapshot_stride == 0


def test_config_rejects_zero_b_with_ellipticity_message(tmp_path):
    path = write_cfg(tmp_path, {"model": {"B": 0.0}})
    with pytest.raises(ConfigError) as exc_info:
        load_config(path)
    messages = "\n".join(exc_info.value.failures)
    assert "c0" in messages and "chi^2" in messages


def test_config_collects_multiple_failures(tmp_path):
    path = write_cfg(tmp_path, {
        "model": {"B": 0.0},
        "time": {"T": -1.0, "steps": 0},
        "box": {"u_min": 2.0, "u_max": -2.0},
        "optimizer": {"tol": 0.0},
    })
    with pytest.raises(ConfigError) as exc_info:
        load_config(path)
    failures = exc_info.value.failures
    assert len(failures) >= 4


def test_config_parse_error_carries_line(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "grid": {,}\n}\n')
    with pytest.raises(ConfigError) as exc_info:
        load_config(path)
    assert "line 2" in exc_info.value.failures[0]


def test_config_rejects_unknown_keys(tmp_path):
    path = write_cfg(tmp_path, {"grd": {"cells": [8]}})
    with pytest.raises(ConfigError) as exc_info:
        load_config(path)
    assert any("unknown top-level" in f for f in exc_info.value.failures)


def test_config_roundtrip(tmp_path):
    path = write_cfg(tmp_path, {
        "cost": {"targets": {"kind": "manufactured",
                             "u": {"kind": "bumps", "background": 0.0,
                                   "centers": [[0.3]], "amplitudes": [0.2],
                                   "widths": [0.1]},
                             "v": {"kind": "constant", "value": -0.1}}},
    })
    cfg = load_config(path)
    out = tmp_path / "rewritten.json"
    write_config(cfg, out)
    cfg2 = load_config(out)
    assert cfg2 == dataclasses.replace(cfg, base_dir=cfg2.base_dir)


def test_config_missing_referenced_file(tmp_path):
    path = write_cfg(tmp_path, {
        "initial": {"phi": {"kind": "file", "path": "missing.snap"},
                    "sigma": {"kind": "constant", "value": 0.0}},
    })
    with pytest.raises(ConfigError) as exc_info:
        load_config(path)
    assert any("missing.snap" in f for f in exc_info.value.failures)


def test_chi_positive_forward_only_config_valid(tmp_path):
    # chi > 0 passes validation when the margin clears chi^2
    path = write_cfg(tmp_path, {"kernel": {"amplitude": 8.0}, "model": {"chi": 0.4}})
    cfg = load_config(path)
    assert cfg.chi == 0.4


# ---- snapshots -----------------------------------------------------------


@pytest.mark.parametrize("cells,extent", [((9,), (1.0,)), ((6, 4), (1.5, 1.0))])
def test_snapshot_roundtrip_bitwise(tmp_path, rng, cells, extent):
    grid = GridSpec(cells, extent)
    field = ScalarField(grid, rng.standard_normal(grid.num_cells))
    p1 = tmp_path / "field.snap"
    write_snapshot(p1, field, "phi", 0.125)
    loaded, name, time = read_snapshot(p1)
    assert name == "phi" and time == 0.125
    assert loaded.grid == grid
    assert np.array_equal(loaded.values, field.values)
    p2 = tmp_path / "field2.snap"
    write_snapshot(p2, loaded, name, time)
    assert p1.read_bytes() == p2.read_bytes()


def test_snapshot_rejects_truncated_payload(tmp_path, rng):
    grid = GridSpec((9,), (1.0,))
    field = ScalarField(grid, rng.standard_normal(9))
    path = tmp_path / "field.snap"
    write_snapshot(path, field, "phi", 0.0)
    blob = path.read_bytes()
    path.write_bytes(blob[:-8])
    with pytest.raises(FieldShapeError):
        read_snapshot(path)


# ---- commands ------------------------------------------------------------


def test_cmd_simulate_outputs_and_locking(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    path = write_cfg(tmp_path)
    assert main(["simulate", "--config", str(path), "--quiet"]) == EXIT_OK
    out = tmp_path / "out"
    assert (out / "monitors.csv").exists()
    assert (out / MANIFEST_NAME).exists()
    assert (out / "phi_000000.snap").exists()
    assert (out / "phi_000016.snap").exists()
    header = (out / "monitors.csv").read_text().splitlines()[0]
    assert header == "step,time,energy,mass_phi,mass_sigma,sup_phi,sup_sigma"
    # locking: a second run into the same directory must refuse
    assert main(["simulate", "--config", str(path), "--quiet"]) == EXIT_VALIDATION


def test_cmd_simulate_constant_energy_without_reactions(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    path = write_cfg(tmp_path, {
        "model": {"proliferation": "constant_zero"},
        "initial": {"phi": {"kind": "constant", "value": 0.2},
                    "sigma": {"kind": "constant", "value": 0.1}},
        "output": {"directory": "flat", "snapshot_stride": 0},
    })
    assert main(["simulate", "--config", str(path), "--quiet"]) == EXIT_OK
    rows = (tmp_path / "flat" / "monitors.csv").read_text().splitlines()[1:]
    energies = np.array([float(r.split(",")[2]) for r in rows])
    assert np.max(np.abs(energies - energies[0])) <= 1e-12 * max(1.0, abs(energies[0]))


def test_cmd_simulate_energy_nonincreasing_gradient_flow(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    path = write_cfg(tmp_path, {
        "model": {"proliferation": "constant_zero"},
        "output": {"directory": "gflow", "snapshot_stride": 0},
    })
    assert main(["simulate", "--config", str(path), "--quiet"]) == EXIT_OK
    rows = (tmp_path / "gflow" / "monitors.csv").read_text().splitlines()[1:]
    energies = np.array([float(r.split(",")[2]) for r in rows])
    assert np.all(np.diff(energies) <= 1e-12 * max(1.0, abs(energies[0])))


def test_cmd_simulate_bitwise_deterministic(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    path = write_cfg(tmp_path)
    assert main(["simulate", "--config", str(path), "--out", "r1", "--quiet"]) == EXIT_OK
    assert main(["simulate", "--config", str(path), "--out", "r2", "--quiet"]) == EXIT_OK
    r1, r2 = tmp_path / "r1", tmp_path / "r2"
    names = sorted(p.name for p in r1.iterdir())
    assert names == sorted(p.name for p in r2.iterdir())
    for name in names:
        if name == MANIFEST_NAME:
            continue  # differs only if payloads differ; compared below anyway
        assert (r1 / name).read_bytes() == (r2 / name).read_bytes(), name
    m1 = json.loads((r1 / MANIFEST_NAME).read_text())
    m2 = json.loads((r2 / MANIFEST_NAME).read_text())
    assert m1["outputs"] == m2["outputs"]
    assert m1["config_sha256"] != ""


def test_cmd_gradcheck_passes_and_corruption_detected(tmp_path):
    path = write_cfg(tmp_path, {"time": {"T": 0.15, "steps": 10},
                                "grid": {"cells": [16]}})
    cfg = load_config(path)
    assert cmd_gradcheck(cfg, quiet=True) == EXIT_OK
    assert cmd_gradcheck(cfg, quiet=True, _corrupt_adjoint=True) == EXIT_CHECK


def test_cmd_gradcheck_zero_weights(tmp_path):
    path = write_cfg(tmp_path, {
        "grid": {"cells": [16]},
        "time": {"T": 0.15, "steps": 10},
        "cost": {"alpha_omega": 0.0, "alpha_u": 0.0, "beta_v": 0.0,
                 "targets": {"kind": "zero"}},
    })
    cfg = load_config(path)
    assert cmd_gradcheck(cfg, quiet=True) == EXIT_OK


def test_cmd_gradcheck_rejects_chemotaxis(tmp_path):
    path = write_cfg(tmp_path, {"kernel": {"amplitude": 8.0}, "model": {"chi": 0.4}})
    cfg = load_config(path)
    with pytest.raises(Exception):
        cmd_gradcheck(cfg, quiet=True)
    assert main(["gradcheck", "--config", str(path), "--quiet"]) == EXIT_VALIDATION


def test_cmd_optimize_manufactured(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    path = write_cfg(tmp_path, {
        "time": {"T": 0.3, "steps": 20},
        "cost": {"alpha_omega": 1.0, "alpha_q": 1.0, "beta_omega": 1.0, "beta_q": 1.0,
                 "alpha_u": 1e-6, "beta_v": 1e-6,
                 "targets": {"kind": "manufactured",
                             "u": {"kind": "bumps", "background": 0.0,
                                   "centers": [[0.3]], "amplitudes": [0.3],
                                   "widths": [0.1]},
                             "v": {"kind": "constant", "value": -0.1}}},
        "optimizer": {"tol": 1e-9, "max_iter": 12, "tau0": 1.0},
        "output": {"directory": "opt", "snapshot_stride": 10},
    })
    assert main(["optimize", "--config", str(path), "--quiet"]) == EXIT_OK
    out = tmp_path / "opt"
    rows = (out / "iterations.csv").read_text().splitlines()
    assert rows[0] == "iter,cost,residual,step_size,linesearch_count"
    costs = [float(r.split(",")[1]) for r in rows[1:]]
    assert costs[-1] <= 0.01 * costs[0]
    assert (out / "phi_final.snap").exists()
    assert (out / "u_000000.snap").exists()
    report = json.loads((out / "projection_report.json").read_text())
    assert report["termination"] in ("converged", "max_iterations")


def test_cmd_optimize_zero_iterations_when_stationary(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    path = write_cfg(tmp_path, {
        "cost": {"alpha_omega": 0.0, "alpha_u": 1.0, "beta_v": 1.0,
                 "targets": {"kind": "zero"}},
        "output": {"directory": "stat", "snapshot_stride": 0},
    })
    assert main(["optimize", "--config", str(path), "--quiet"]) == EXIT_OK
    rows = (tmp_path / "stat" / "iterations.csv").read_text().splitlines()
    assert len(rows) == 2  # header + starting iterate only


def test_cmd_optimize_infeasible_box(tmp_path):
    path = write_cfg(tmp_path, {"box": {"u_min": 1.0, "u_max": -1.0}})
    with pytest.raises(ConfigError):
        load_config(path)
    assert main(["optimize", "--config", str(path), "--quiet"]) == EXIT_VALIDATION


def test_cmd_validate(tmp_path):
    path = write_cfg(tmp_path)
    assert main(["validate", "--config", str(path), "--quiet"]) == EXIT_OK
    bad = write_cfg(tmp_path, {"model": {"A": 5.0}}, name="bad.json")
    assert main(["validate", "--config", str(bad), "--quiet"]) == EXIT_VALIDATION


def test_main_missing_config_file(tmp_path):
    assert main(["validate", "--config", str(tmp_path / "nope.json")]) == EXIT_VALIDATION


def test_seed_override_changes_manifest(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    path = write_cfg(tmp_path)
    assert main(["simulate", "--config", str(path), "--out", "s1", "--quiet"]) == EXIT_OK
    assert main(["simulate", "--config", str(path), "--out", "s2", "--seed", "99",
                 "--quiet"]) == EXIT_OK
    m1 = json.loads((tmp_path / "s1" / MANIFEST_NAME).read_text())
    m2 = json.loads((tmp_path / "s2" / MANIFEST_NAME).read_text())
    assert m1["seed"] == 5 and m2["seed"] == 99
    assert m1["config_sha256"] != m2["config_sha256"]


def test_solver_failure_exit_code(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    path = write_cfg(tmp_path, {
        "solver": {"method": "cg", "cg_tol": 1e-10, "cg_max_iter": 1,
                   "blowup_guard": 10.0},
        "output": {"directory": "fail", "snapshot_stride": 0},
    })
    assert main(["simulate", "--config", str(path), "--quiet"]) == EXIT_SOLVER


def test_config_to_dict_is_stable(tmp_path):
    path = write_cfg(tmp_path)
    cfg = load_config(path)
    d1 = config_to_dict(cfg)
    cfg2 = config_from_dict(json.loads(json.dumps(d1)), base_dir=cfg.base_dir)
    assert cfg2 == cfg

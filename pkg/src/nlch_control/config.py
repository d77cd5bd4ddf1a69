"""Run configuration: a documented JSON format, validated in one pass that
collects every failure instead of stopping at the first.

Top-level keys (all optional, defaults below):

  grid       {"cells": [64], "extent": [1.0]}
  kernel     {"family": "gaussian", "amplitude": 4.0, "width": 0.2}
  model      {"A": 0.5, "B": 1.0, "chi": 0.0, "lambda_s": 2.0,
              "potential": "quartic_double_well",
              "proliferation": "smoothed_ramp", "distribution": "same_as_p"}
  time       {"T": 0.25, "steps": 25}
  initial    {"phi": FIELD, "sigma": FIELD}
  controls   {"u": FIELD, "v": FIELD}              initial guess / manufactured
  solver     {"method": "direct", "cg_tol": 1e-10, "cg_max_iter": 10000,
              "blowup_guard": 10.0}
  cost       {"alpha_omega": 1.0, "alpha_q": 0.0, "beta_omega": 0.0,
              "beta_q": 0.0, "alpha_u": 0.01, "beta_v": 0.01,
              "targets": {"kind": "zero"}}
  box        {"u_min": -1.0, "u_max": 1.0, "v_min": -1.0, "v_max": 1.0}
             (each bound a number, or {"file": "bound.snap"})
  optimizer  {"tol": 1e-4, "max_iter": 200, "tau0": 1.0}
  output     {"directory": "out", "snapshot_stride": 0}
  seed       0

FIELD specs:
  {"kind": "constant", "value": 0.1}
  {"kind": "bumps", "background": -0.4, "centers": [[0.5]],
   "amplitudes": [0.8], "widths": [0.1]}       (Gaussian bumps)
  {"kind": "file", "path": "phi0.snap"}        (snapshot file)

cost.targets kinds:
  {"kind": "zero"}                              all targets identically zero
  {"kind": "constant", "phi_omega": v, "sigma_omega": v,
   "phi_q": v, "sigma_q": v}
  {"kind": "files", "phi_omega": path, "sigma_omega": path}
                                                (running targets zero)
  {"kind": "manufactured", "u": FIELD, "v": FIELD}
      simulate with these constant-in-time controls and track that
      trajectory: phi_q/sigma_q are its left-endpoint slices, the Omega
      targets its final state.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .control import BoxConstraints, CostSpec, PgdOptions
from .errors import ConfigError, NLCHError
from .forward import ControlPair, TimeGrid, simulate
from .geometry import GridSpec, ScalarField
from .kernels import KernelData, KernelSpec, build_kernel
from .physics import (DistributionSpec, ModelParams, PotentialSpec,
                      ProliferationSpec)
from .solvers import SolverOptions


@dataclass(frozen=True)
class FieldSpec:
    kind: str
    value: float = 0.0
    background: float = 0.0
    centers: tuple = ()
    amplitudes: tuple = ()
    widths: tuple = ()
    path: str = ""


@dataclass(frozen=True)
class TargetsConfig:
    kind: str
    phi_omega: float = 0.0
    sigma_omega: float = 0.0
    phi_q: float = 0.0
    sigma_q: float = 0.0
    phi_omega_path: str = ""
    sigma_omega_path: str = ""
    u: FieldSpec | None = None
    v: FieldSpec | None = None


@dataclass(frozen=True)
class CostConfig:
    alpha_omega: float = 1.0
    alpha_q: float = 0.0
    beta_omega: float = 0.0
    beta_q: float = 0.0
    alpha_u: float = 0.01
    beta_v: float = 0.01
    targets: TargetsConfig = field(default_factory=lambda: TargetsConfig(kind="zero"))


@dataclass(frozen=True)
class BoxBound:
    value: float = 0.0
    path: str = ""

    @property
    def from_file(self) -> bool:
        return bool(self.path)


@dataclass(frozen=True)
class RunConfig:
    """Fully validated run description; builders realise the heavy objects."""

    grid_cells: tuple[int, ...]
    grid_extent: tuple[float, ...]
    kernel_family: str
    kernel_amplitude: float
    kernel_width: float
    A: float
    B: float
    chi: float
    lambda_s: float
    potential_family: str
    proliferation_family: str
    distribution_family: str
    T: float
    steps: int
    initial_phi: FieldSpec
    initial_sigma: FieldSpec
    control_u: FieldSpec
    control_v: FieldSpec
    solver_method: str
    cg_tol: float
    cg_max_iter: int
    blowup_guard: float
    cost: CostConfig
    u_min: BoxBound
    u_max: BoxBound
    v_min: BoxBound
    v_max: BoxBound
    opt_tol: float
    opt_max_iter: int
    opt_tau0: float
    output_directory: str
    snapshot_stride: int
    seed: int
    base_dir: str = field(default=".", compare=False)

    # ---- builders -------------------------------------------------------

    def build_grid(self) -> GridSpec:
        return GridSpec(self.grid_cells, self.grid_extent)

    def build_kernel(self, grid: GridSpec | None = None) -> KernelData:
        grid = grid or self.build_grid()
        return build_kernel(
            KernelSpec(self.kernel_family, self.kernel_amplitude, self.kernel_width), grid
        )

    def build_params(self) -> ModelParams:
        return ModelParams(
            A=self.A, B=self.B, chi=self.chi,
            potential=PotentialSpec(self.potential_family),
            proliferation=ProliferationSpec(self.proliferation_family),
            distribution=DistributionSpec(self.distribution_family),
            lambda_s=self.lambda_s,
        )

    def build_tgrid(self) -> TimeGrid:
        return TimeGrid(self.T, self.steps)

    def solver_options(self) -> SolverOptions:
        return SolverOptions(method=self.solver_method, cg_tol=self.cg_tol,
                             cg_max_iter=self.cg_max_iter)

    def pgd_options(self) -> PgdOptions:
        return PgdOptions(tol=self.opt_tol, max_iter=self.opt_max_iter, tau0=self.opt_tau0)

    def realize_field(self, spec: FieldSpec, grid: GridSpec) -> ScalarField:
        if spec.kind == "constant":
            return ScalarField.constant(grid, spec.value)
        if spec.kind == "bumps":
            coords = grid.mesh()
            vals = np.full(grid.cells_per_axis, float(spec.background))
            for center, amp, width in zip(spec.centers, spec.amplitudes, spec.widths):
                r2 = np.zeros(grid.cells_per_axis)
                for axis, x in enumerate(coords):
                    r2 = r2 + (x - center[axis]) ** 2
                vals = vals + amp * np.exp(-r2 / (2.0 * width * width))
            return ScalarField(grid, vals.reshape(-1))
        if spec.kind == "file":
            from .snapshots import read_snapshot

            fld, _, _ = read_snapshot(self.resolve_path(spec.path))
            if fld.grid != grid:
                raise ConfigError([f"field file {spec.path} was written on a different grid"])
            return fld
        raise ConfigError([f"unknown field kind {spec.kind!r}"])

    def resolve_path(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def build_initial_state(self, grid: GridSpec) -> tuple[ScalarField, ScalarField]:
        return (self.realize_field(self.initial_phi, grid),
                self.realize_field(self.initial_sigma, grid))

    def build_initial_controls(self, grid: GridSpec) -> ControlPair:
        u_field = self.realize_field(self.control_u, grid)
        v_field = self.realize_field(self.control_v, grid)
        u = np.tile(u_field.values, (self.steps, 1))
        v = np.tile(v_field.values, (self.steps, 1))
        return ControlPair(grid, u, v)

    def _bound_array(self, bound: BoxBound, grid: GridSpec) -> np.ndarray:
        if bound.from_file:
            from .snapshots import read_snapshot

            fld, _, _ = read_snapshot(self.resolve_path(bound.path))
            if fld.grid != grid:
                raise ConfigError([f"box bound file {bound.path} on a different grid"])
            return np.tile(fld.values, (self.steps, 1))
        return np.full((self.steps, grid.num_cells), bound.value)

    def build_box(self, grid: GridSpec) -> BoxConstraints:
        return BoxConstraints(
            grid,
            self._bound_array(self.u_min, grid),
            self._bound_array(self.u_max, grid),
            self._bound_array(self.v_min, grid),
            self._bound_array(self.v_max, grid),
        )

    def build_cost(self, grid: GridSpec, kernel: KernelData, params: ModelParams,
                   tgrid: TimeGrid) -> CostSpec:
        t = self.cost.targets
        weights = dict(
            alpha_omega=self.cost.alpha_omega, alpha_q=self.cost.alpha_q,
            beta_omega=self.cost.beta_omega, beta_q=self.cost.beta_q,
            alpha_u=self.cost.alpha_u, beta_v=self.cost.beta_v,
        )
        if t.kind == "zero":
            return CostSpec.tracking(grid, tgrid.steps, **weights)
        if t.kind == "constant":
            n = grid.num_cells
            return CostSpec.tracking(
                grid, tgrid.steps, **weights,
                phi_omega=ScalarField.constant(grid, t.phi_omega),
                sigma_omega=ScalarField.constant(grid, t.sigma_omega),
                phi_q=np.full((tgrid.steps, n), t.phi_q),
                sigma_q=np.full((tgrid.steps, n), t.sigma_q),
            )
        if t.kind == "files":
            from .snapshots import read_snapshot

            phi_om, _, _ = read_snapshot(self.resolve_path(t.phi_omega_path))
            sigma_om, _, _ = read_snapshot(self.resolve_path(t.sigma_omega_path))
            return CostSpec.tracking(grid, tgrid.steps, **weights,
                                     phi_omega=phi_om, sigma_omega=sigma_om)
        if t.kind == "manufactured":
            phi0, sigma0 = self.build_initial_state(grid)
            u_field = self.realize_field(t.u, grid)
            v_field = self.realize_field(t.v, grid)
            target_controls = ControlPair(
                grid, np.tile(u_field.values, (tgrid.steps, 1)),
                np.tile(v_field.values, (tgrid.steps, 1)),
            )
            traj = simulate(phi0, sigma0, target_controls, params, kernel, tgrid,
                            solver_options=self.solver_options(),
                            blowup_guard=self.blowup_guard)
            return CostSpec.tracking(
                grid, tgrid.steps, **weights,
                phi_omega=ScalarField(grid, traj.phi[tgrid.steps]),
                sigma_omega=ScalarField(grid, traj.sigma[tgrid.steps]),
                phi_q=traj.phi[:tgrid.steps].copy(),
                sigma_q=traj.sigma[:tgrid.steps].copy(),
            )
        raise ConfigError([f"unknown targets kind {t.kind!r}"])


# ---- parsing ------------------------------------------------------------


_DEFAULTS = {
    "grid": {"cells": [64], "extent": [1.0]},
    "kernel": {"family": "gaussian", "amplitude": 4.0, "width": 0.2},
    "model": {"A": 0.5, "B": 1.0, "chi": 0.0, "lambda_s": 2.0,
              "potential": "quartic_double_well",
              "proliferation": "smoothed_ramp",
              "distribution": "same_as_p"},
    "time": {"T": 0.25, "steps": 25},
    "initial": {"phi": {"kind": "constant", "value": 0.0},
                "sigma": {"kind": "constant", "value": 0.0}},
    "controls": {"u": {"kind": "constant", "value": 0.0},
                 "v": {"kind": "constant", "value": 0.0}},
    "solver": {"method": "direct", "cg_tol": 1e-10, "cg_max_iter": 10000,
               "blowup_guard": 10.0},
    "cost": {"alpha_omega": 1.0, "alpha_q": 0.0, "beta_omega": 0.0,
             "beta_q": 0.0, "alpha_u": 0.01, "beta_v": 0.01,
             "targets": {"kind": "zero"}},
    "box": {"u_min": -1.0, "u_max": 1.0, "v_min": -1.0, "v_max": 1.0},
    "optimizer": {"tol": 1e-4, "max_iter": 200, "tau0": 1.0},
    "output": {"directory": "out", "snapshot_stride": 0},
    "seed": 0,
}


def _merge_defaults(raw: dict, failures: list[str]) -> dict:
    merged = {}
    for key, default in _DEFAULTS.items():
        value = raw.get(key, default)
        if isinstance(default, dict):
            if not isinstance(value, dict):
                failures.append(f"{key}: expected an object")
                value = default
            else:
                unknown = set(value) - set(default)
                if unknown:
                    failures.append(f"{key}: unknown keys {sorted(unknown)}")
                value = {**default, **{k: v for k, v in value.items() if k in default}}
        merged[key] = value
    unknown_top = set(raw) - set(_DEFAULTS)
    if unknown_top:
        failures.append(f"unknown top-level keys {sorted(unknown_top)}")
    return merged


def _field_spec(raw, label: str, failures: list[str]) -> FieldSpec:
    if not isinstance(raw, dict) or "kind" not in raw:
        failures.append(f"{label}: field spec must be an object with a 'kind'")
        return FieldSpec(kind="constant", value=0.0)
    kind = raw["kind"]
    if kind == "constant":
        return FieldSpec(kind="constant", value=float(raw.get("value", 0.0)))
    if kind == "bumps":
        centers = raw.get("centers", [])
        amplitudes = raw.get("amplitudes", [])
        widths = raw.get("widths", [])
        if not (len(centers) == len(amplitudes) == len(widths)):
            failures.append(f"{label}: bumps need matching centers/amplitudes/widths")
        if any(w <= 0 for w in widths):
            failures.append(f"{label}: bump widths must be positive")
        return FieldSpec(
            kind="bumps", background=float(raw.get("background", 0.0)),
            centers=tuple(tuple(float(x) for x in c) for c in centers),
            amplitudes=tuple(float(a) for a in amplitudes),
            widths=tuple(float(w) for w in widths),
        )
    if kind == "file":
        path = raw.get("path", "")
        if not path:
            failures.append(f"{label}: file field spec needs a 'path'")
        return FieldSpec(kind="file", path=str(path))
    failures.append(f"{label}: unknown field kind {kind!r}")
    return FieldSpec(kind="constant", value=0.0)


def _targets(raw, failures: list[str]) -> TargetsConfig:
    if not isinstance(raw, dict) or "kind" not in raw:
        failures.append("cost.targets: must be an object with a 'kind'")
        return TargetsConfig(kind="zero")
    kind = raw["kind"]
    if kind == "zero":
        return TargetsConfig(kind="zero")
    if kind == "constant":
        return TargetsConfig(
            kind="constant",
            phi_omega=float(raw.get("phi_omega", 0.0)),
            sigma_omega=float(raw.get("sigma_omega", 0.0)),
            phi_q=float(raw.get("phi_q", 0.0)),
            sigma_q=float(raw.get("sigma_q", 0.0)),
        )
    if kind == "files":
        phi_path = raw.get("phi_omega", "")
        sigma_path = raw.get("sigma_omega", "")
        if not phi_path or not sigma_path:
            failures.append("cost.targets: files kind needs phi_omega and sigma_omega paths")
        return TargetsConfig(kind="files", phi_omega_path=str(phi_path),
                             sigma_omega_path=str(sigma_path))
    if kind == "manufactured":
        u = _field_spec(raw.get("u", {"kind": "constant", "value": 0.0}),
                        "cost.targets.u", failures)
        v = _field_spec(raw.get("v", {"kind": "constant", "value": 0.0}),
                        "cost.targets.v", failures)
        return TargetsConfig(kind="manufactured", u=u, v=v)
    failures.append(f"cost.targets: unknown kind {kind!r}")
    return TargetsConfig(kind="zero")


def _bound(raw, label: str, failures: list[str]) -> BoxBound:
    if isinstance(raw, dict):
        path = raw.get("file", "")
        if not path:
            failures.append(f"box.{label}: object bound needs a 'file' key")
        return BoxBound(path=str(path))
    try:
        return BoxBound(value=float(raw))
    except (TypeError, ValueError):
        failures.append(f"box.{label}: must be a number or {{'file': path}}")
        return BoxBound(value=0.0)


def config_from_dict(raw: dict, base_dir: str = ".") -> RunConfig:
    """Build and validate a RunConfig; raises ConfigError with every failure."""
    failures: list[str] = []
    merged = _merge_defaults(raw, failures)

    g = merged["grid"]
    k = merged["kernel"]
    m = merged["model"]
    t = merged["time"]
    sol = merged["solver"]
    c = merged["cost"]
    box = merged["box"]
    opt = merged["optimizer"]
    out = merged["output"]

    cfg = RunConfig(
        grid_cells=tuple(int(n) for n in g["cells"]),
        grid_extent=tuple(float(e) for e in g["extent"]),
        kernel_family=str(k["family"]),
        kernel_amplitude=float(k["amplitude"]),
        kernel_width=float(k["width"]),
        A=float(m["A"]), B=float(m["B"]), chi=float(m["chi"]),
        lambda_s=float(m["lambda_s"]),
        potential_family=str(m["potential"]),
        proliferation_family=str(m["proliferation"]),
        distribution_family=str(m["distribution"]),
        T=float(t["T"]), steps=int(t["steps"]),
        initial_phi=_field_spec(merged["initial"]["phi"], "initial.phi", failures),
        initial_sigma=_field_spec(merged["initial"]["sigma"], "initial.sigma", failures),
        control_u=_field_spec(merged["controls"]["u"], "controls.u", failures),
        control_v=_field_spec(merged["controls"]["v"], "controls.v", failures),
        solver_method=str(sol["method"]),
        cg_tol=float(sol["cg_tol"]),
        cg_max_iter=int(sol["cg_max_iter"]),
        blowup_guard=float(sol["blowup_guard"]),
        cost=CostConfig(
            alpha_omega=float(c["alpha_omega"]), alpha_q=float(c["alpha_q"]),
            beta_omega=float(c["beta_omega"]), beta_q=float(c["beta_q"]),
            alpha_u=float(c["alpha_u"]), beta_v=float(c["beta_v"]),
            targets=_targets(c["targets"], failures),
        ),
        u_min=_bound(box["u_min"], "u_min", failures),
        u_max=_bound(box["u_max"], "u_max", failures),
        v_min=_bound(box["v_min"], "v_min", failures),
        v_max=_bound(box["v_max"], "v_max", failures),
        opt_tol=float(opt["tol"]),
        opt_max_iter=int(opt["max_iter"]),
        opt_tau0=float(opt["tau0"]),
        output_directory=str(out["directory"]),
        snapshot_stride=int(out["snapshot_stride"]),
        seed=int(merged["seed"]),
        base_dir=base_dir,
    )

    _validate(cfg, failures)
    if failures:
        raise ConfigError(failures)
    return cfg


def _validate(cfg: RunConfig, failures: list[str]):
    grid = None
    try:
        grid = cfg.build_grid()
    except NLCHError as exc:
        failures.append(f"grid: {exc}")
    try:
        params = cfg.build_params()
    except NLCHError as exc:
        failures.append(f"model: {exc}")
        params = None
    kernel = None
    if grid is not None:
        try:
            kernel = cfg.build_kernel(grid)
        except NLCHError as exc:
            failures.append(f"kernel: {exc}")
    if grid is not None and kernel is not None:
        # computed from raw values so the message appears even when the
        # A, B > 0 invariant already failed (e.g. B = 0)
        try:
            f2_min = PotentialSpec(cfg.potential_family).second_derivative_min
            margin = cfg.A * f2_min + cfg.B * float(np.min(kernel.a_field.values))
            if not (margin > cfg.chi ** 2):
                failures.append(
                    f"hypothesis violation: c0 = {margin:.6g} <= chi^2 = {cfg.chi ** 2:.6g} "
                    "(need A*min F'' + B*min a > chi^2)"
                )
        except NLCHError as exc:
            failures.append(f"model.potential: {exc}")
    if cfg.T <= 0.0:
        failures.append(f"time.T must be positive, got {cfg.T}")
    if cfg.steps <= 0:
        failures.append(f"time.steps must be positive, got {cfg.steps}")
    if cfg.solver_method not in ("direct", "cg"):
        failures.append(f"solver.method must be 'direct' or 'cg', got {cfg.solver_method!r}")
    if cfg.cg_tol <= 0.0:
        failures.append("solver.cg_tol must be positive")
    if cfg.blowup_guard <= 0.0:
        failures.append("solver.blowup_guard must be positive")
    weights = (cfg.cost.alpha_omega, cfg.cost.alpha_q, cfg.cost.beta_omega,
               cfg.cost.beta_q, cfg.cost.alpha_u, cfg.cost.beta_v)
    if any(w < 0 for w in weights):
        failures.append("cost weights must be nonnegative")
    # the all-weights-zero gate applies only when optimizing; gradcheck may
    # legitimately run a zero-cost configuration (all gradients zero)
    if not (cfg.u_min.from_file or cfg.u_max.from_file) and cfg.u_min.value > cfg.u_max.value:
        failures.append("box: u_min > u_max")
    if not (cfg.v_min.from_file or cfg.v_max.from_file) and cfg.v_min.value > cfg.v_max.value:
        failures.append("box: v_min > v_max")
    if cfg.opt_tol <= 0.0:
        failures.append("optimizer.tol must be positive")
    if cfg.opt_max_iter < 0:
        failures.append("optimizer.max_iter must be nonnegative")
    if cfg.opt_tau0 <= 0.0:
        failures.append("optimizer.tau0 must be positive")
    if cfg.snapshot_stride < 0:
        failures.append("output.snapshot_stride must be nonnegative")
    for spec, label in ((cfg.initial_phi, "initial.phi"), (cfg.initial_sigma, "initial.sigma"),
                        (cfg.control_u, "controls.u"), (cfg.control_v, "controls.v")):
        if spec.kind == "file" and not cfg.resolve_path(spec.path).exists():
            failures.append(f"{label}: referenced file {spec.path!r} does not exist")
    targets = cfg.cost.targets
    if targets.kind == "files":
        for path, label in ((targets.phi_omega_path, "phi_omega"),
                            (targets.sigma_omega_path, "sigma_omega")):
            if path and not cfg.resolve_path(path).exists():
                failures.append(f"cost.targets.{label}: file {path!r} does not exist")
    for bound, label in ((cfg.u_min, "u_min"), (cfg.u_max, "u_max"),
                         (cfg.v_min, "v_min"), (cfg.v_max, "v_max")):
        if bound.from_file and not cfg.resolve_path(bound.path).exists():
            failures.append(f"box.{label}: file {bound.path!r} does not exist")


def load_config(path) -> RunConfig:
    """Parse and validate a configuration file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc}"]) from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            [f"parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"]
        ) from exc
    if not isinstance(raw, dict):
        raise ConfigError(["configuration root must be a JSON object"])
    return config_from_dict(raw, base_dir=str(path.parent))


def config_to_dict(cfg: RunConfig) -> dict:
    """Normalised dictionary form; loading it back yields an equal RunConfig."""

    def field_dict(spec: FieldSpec) -> dict:
        if spec.kind == "constant":
            return {"kind": "constant", "value": spec.value}
        if spec.kind == "bumps":
            return {"kind": "bumps", "background": spec.background,
                    "centers": [list(c) for c in spec.centers],
                    "amplitudes": list(spec.amplitudes),
                    "widths": list(spec.widths)}
        return {"kind": "file", "path": spec.path}

    def bound_value(bound: BoxBound):
        return {"file": bound.path} if bound.from_file else bound.value

    targets = cfg.cost.targets
    if targets.kind == "zero":
        targets_dict = {"kind": "zero"}
    elif targets.kind == "constant":
        targets_dict = {"kind": "constant", "phi_omega": targets.phi_omega,
                        "sigma_omega": targets.sigma_omega,
                        "phi_q": targets.phi_q, "sigma_q": targets.sigma_q}
    elif targets.kind == "files":
        targets_dict = {"kind": "files", "phi_omega": targets.phi_omega_path,
                        "sigma_omega": targets.sigma_omega_path}
    else:
        targets_dict = {"kind": "manufactured", "u": field_dict(targets.u),
                        "v": field_dict(targets.v)}

    return {
        "grid": {"cells": list(cfg.grid_cells), "extent": list(cfg.grid_extent)},
        "kernel": {"family": cfg.kernel_family, "amplitude": cfg.kernel_amplitude,
                   "width": cfg.kernel_width},
        "model": {"A": cfg.A, "B": cfg.B, "chi": cfg.chi, "lambda_s": cfg.lambda_s,
                  "potential": cfg.potential_family,
                  "proliferation": cfg.proliferation_family,
                  "distribution": cfg.distribution_family},
        "time": {"T": cfg.T, "steps": cfg.steps},
        "initial": {"phi": field_dict(cfg.initial_phi),
                    "sigma": field_dict(cfg.initial_sigma)},
        "controls": {"u": field_dict(cfg.control_u), "v": field_dict(cfg.control_v)},
        "solver": {"method": cfg.solver_method, "cg_tol": cfg.cg_tol,
                   "cg_max_iter": cfg.cg_max_iter, "blowup_guard": cfg.blowup_guard},
        "cost": {"alpha_omega": cfg.cost.alpha_omega, "alpha_q": cfg.cost.alpha_q,
                 "beta_omega": cfg.cost.beta_omega, "beta_q": cfg.cost.beta_q,
                 "alpha_u": cfg.cost.alpha_u, "beta_v": cfg.cost.beta_v,
                 "targets": targets_dict},
        "box": {"u_min": bound_value(cfg.u_min), "u_max": bound_value(cfg.u_max),
                "v_min": bound_value(cfg.v_min), "v_max": bound_value(cfg.v_max)},
        "optimizer": {"tol": cfg.opt_tol, "max_iter": cfg.opt_max_iter,
                      "tau0": cfg.opt_tau0},
        "output": {"directory": cfg.output_directory,
                   "snapshot_stride": cfg.snapshot_stride},
        "seed": cfg.seed,
    }


def config_json(cfg: RunConfig) -> str:
    """Canonical serialisation (used for hashing and write_config)."""
    return json.dumps(config_to_dict(cfg), indent=2, sort_keys=True) + "\n"


def write_config(cfg: RunConfig, path):
    Path(path).write_text(config_json(cfg))

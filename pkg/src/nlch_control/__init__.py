"""Nonlocal Cahn-Hilliard tumour-growth simulation and adjoint-based optimal
control of radiotherapy/chemotherapy sources."""

from .geometry import (GridSpec, ScalarField, inner_product, laplacian_neumann,
                       mass, norm_l2)
from .kernels import (KernelData, KernelSpec, build_kernel, convolution_adjoint_check,
                      convolve)
from .physics import (DistributionSpec, ModelParams, PotentialSpec,
                      ProliferationSpec, ellipticity_margin, require_ellipticity)
from .forward import (ControlPair, State, StateTrajectory, TimeGrid,
                      chemical_potential, free_energy, mass_balance_residual,
                      simulate, step)
from .sensitivity import (AdjointTrajectory, TangentState, TangentTrajectory,
                          adjoint_sweep, duality_gap, tangent_step, tangent_sweep)
from .control import (BoxConstraints, CostSpec, OptimizeReport, PgdOptions,
                      cost, pgd_optimize, project_box, projection_formula_defect,
                      reduced_gradient, stationarity_residual)
from .solvers import SolverOptions
from .config import RunConfig, config_from_dict, load_config, write_config

__all__ = [
    "GridSpec", "ScalarField", "inner_product", "laplacian_neumann", "mass", "norm_l2",
    "KernelData", "KernelSpec", "build_kernel", "convolution_adjoint_check", "convolve",
    "DistributionSpec", "ModelParams", "PotentialSpec", "ProliferationSpec",
    "ellipticity_margin", "require_ellipticity",
    "ControlPair", "State", "StateTrajectory", "TimeGrid", "chemical_potential",
    "free_energy", "mass_balance_residual", "simulate", "step",
    "AdjointTrajectory", "TangentState", "TangentTrajectory", "adjoint_sweep",
    "duality_gap", "tangent_step", "tangent_sweep",
    "BoxConstraints", "CostSpec", "OptimizeReport", "PgdOptions", "cost",
    "pgd_optimize", "project_box", "projection_formula_defect", "reduced_gradient",
    "stationarity_residual",
    "SolverOptions",
    "RunConfig", "config_from_dict", "load_config", "write_config",
]

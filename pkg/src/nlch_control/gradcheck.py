"""Verification sweeps for the sensitivity machinery: transpose duality
probes, finite-difference checks of the reduced gradient, and the Taylor
remainder order of the tangent. Shared by the gradcheck CLI command and the
acceptance suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .control import CostSpec, control_inner_qt, cost, reduced_gradient
from .forward import ControlPair, TimeGrid, simulate
from .geometry import ScalarField
from .kernels import KernelData
from .physics import ModelParams
from .sensitivity import adjoint_sweep, duality_gap, tangent_sweep
from .solvers import SolverOptions

DUALITY_TOL = 1e-10
FD_PLATEAU_TOL = 1e-5
TAYLOR_ORDER_MIN = 1.9

FD_EPSILONS = (1e-3, 1e-4, 1e-5, 1e-6, 1e-7)
TAYLOR_EPSILONS = (1e-1, 1e-2, 1e-3, 1e-4)


@dataclass(frozen=True)
class GradcheckResult:
    duality_gaps: tuple[float, ...]
    fd_table: tuple[tuple[float, tuple[float, ...]], ...]  # (eps, per-direction rel err)
    fd_plateau: tuple[float, ...]                          # per-direction min over eps
    taylor_orders: tuple[float, ...]
    taylor_remainders: tuple[tuple[float, ...], ...] = field(repr=False, default=())

    @property
    def max_duality_gap(self) -> float:
        return max(self.duality_gaps) if self.duality_gaps else 0.0

    @property
    def passed(self) -> bool:
        if self.max_duality_gap > DUALITY_TOL:
            return False
        if any(p > FD_PLATEAU_TOL for p in self.fd_plateau):
            return False
        if any(o < TAYLOR_ORDER_MIN for o in self.taylor_orders):
            return False
        return True


def _random_controls(rng, grid, steps, scale=1.0) -> ControlPair:
    return ControlPair(
        grid,
        scale * rng.standard_normal((steps, grid.num_cells)),
        scale * rng.standard_normal((steps, grid.num_cells)),
    )


def trajectory_qt_norm(xi: np.ndarray, rho: np.ndarray, grid, dt: float) -> float:
    """Space-time L2 norm over the produced slices (rows 1..N)."""
    vol = grid.cell_volume
    return float(np.sqrt((np.sum(xi[1:] ** 2) + np.sum(rho[1:] ** 2)) * vol * dt))


def taylor_remainder_order(phi0: ScalarField, sigma0: ScalarField, controls: ControlPair,
                           direction: ControlPair, params: ModelParams, kernel: KernelData,
                           tgrid: TimeGrid, solver_options: SolverOptions | None = None,
                           epsilons=TAYLOR_EPSILONS) -> tuple[float, tuple[float, ...]]:
    """Observed order of || S(c + eps d) - S(c) - eps T(d) || in eps.

    An exact tangent makes the remainder quadratic; the fitted log-log slope
    is returned together with the raw remainders.
    """
    base = simulate(phi0, sigma0, controls, params, kernel, tgrid,
                    solver_options=solver_options, record_monitors=False)
    tangent = tangent_sweep(base, direction, params, kernel)
    grid = controls.grid
    dt = tgrid.dt
    remainders = []
    for eps in epsilons:
        perturbed = ControlPair(grid, controls.u + eps * direction.u,
                                controls.v + eps * direction.v)
        traj = simulate(phi0, sigma0, perturbed, params, kernel, tgrid,
                        solver_options=solver_options, record_monitors=False)
        rem_phi = traj.phi - base.phi - eps * tangent.xi
        rem_sigma = traj.sigma - base.sigma - eps * tangent.rho
        remainders.append(trajectory_qt_norm(rem_phi, rem_sigma, grid, dt))
    log_eps = np.log(np.asarray(epsilons))
    log_rem = np.log(np.maximum(np.asarray(remainders), 1e-300))
    slope = float(np.polyfit(log_eps, log_rem, 1)[0])
    return slope, tuple(remainders)


def fd_gradient_errors(phi0: ScalarField, sigma0: ScalarField, controls: ControlPair,
                       direction: ControlPair, spec: CostSpec, params: ModelParams,
                       kernel: KernelData, tgrid: TimeGrid,
                       solver_options: SolverOptions | None = None,
                       epsilons=FD_EPSILONS, corrupt_adjoint: bool = False) -> tuple[float, ...]:
    """Relative error of the adjoint directional derivative against central
    finite differences of cost(simulate(c)), one entry per epsilon.

    corrupt_adjoint biases the gradient by 0.1% plus an offset before the
    comparison; a working check must then report errors above threshold.
    """
    grid = controls.grid
    dt = tgrid.dt

    def reduced_cost(ctrl: ControlPair) -> float:
        traj = simulate(phi0, sigma0, ctrl, params, kernel, tgrid,
                        solver_options=solver_options, record_monitors=False)
        return cost(traj, ctrl, spec)

    base = simulate(phi0, sigma0, controls, params, kernel, tgrid,
                    solver_options=solver_options, record_monitors=False)
    adj = adjoint_sweep(base, spec, params, kernel)
    grad = reduced_gradient(controls, base, adj, spec, params)
    if corrupt_adjoint:
        grad = ControlPair(grid, grad.u * 1.001 + 1e-6, grad.v * 1.001 + 1e-6)
    directional = control_inner_qt(grad, direction, dt)

    errors = []
    for eps in epsilons:
        plus = ControlPair(grid, controls.u + eps * direction.u,
                           controls.v + eps * direction.v)
        minus = ControlPair(grid, controls.u - eps * direction.u,
                            controls.v - eps * direction.v)
        fd = (reduced_cost(plus) - reduced_cost(minus)) / (2.0 * eps)
        scale = max(abs(directional), abs(fd))
        if scale < 1e-14:
            errors.append(0.0)
        else:
            errors.append(abs(fd - directional) / scale)
    return tuple(errors)


def run_gradcheck(phi0: ScalarField, sigma0: ScalarField, controls: ControlPair,
                  spec: CostSpec, params: ModelParams, kernel: KernelData,
                  tgrid: TimeGrid, rng: np.random.Generator,
                  solver_options: SolverOptions | None = None,
                  n_duality: int = 20, n_fd: int = 3, n_taylor: int = 3,
                  corrupt_adjoint: bool = False) -> GradcheckResult:
    """Full verification sweep from one seeded generator.

    corrupt_adjoint is a negative-control hook: it biases the adjoint
    gradient before the FD comparison, which a healthy check must flag.
    """
    grid = controls.grid
    steps = tgrid.steps
    base = simulate(phi0, sigma0, controls, params, kernel, tgrid,
                    solver_options=solver_options, record_monitors=False)

    gaps = []
    for _ in range(n_duality):
        d = _random_controls(rng, grid, steps)
        seed_phi = rng.standard_normal((steps + 1, grid.num_cells))
        seed_sigma = rng.standard_normal((steps + 1, grid.num_cells))
        gaps.append(duality_gap(base, params, kernel, d.u, d.v, seed_phi, seed_sigma))

    fd_dirs = [_random_controls(rng, grid, steps) for _ in range(n_fd)]
    per_dir_errors = []
    for d in fd_dirs:
        errs = fd_gradient_errors(phi0, sigma0, controls, d, spec, params, kernel,
                                  tgrid, solver_options, corrupt_adjoint=corrupt_adjoint)
        per_dir_errors.append(errs)
    fd_table = tuple(
        (eps, tuple(per_dir_errors[j][i] for j in range(n_fd)))
        for i, eps in enumerate(FD_EPSILONS)
    )
    fd_plateau = tuple(min(errs) for errs in per_dir_errors)

    orders = []
    remainders = []
    for _ in range(n_taylor):
        d = _random_controls(rng, grid, steps)
        slope, rems = taylor_remainder_order(phi0, sigma0, controls, d, params,
                                             kernel, tgrid, solver_options)
        orders.append(slope)
        remainders.append(rems)

    return GradcheckResult(
        duality_gaps=tuple(gaps),
        fd_table=fd_table,
        fd_plateau=fd_plateau,
        taylor_orders=tuple(orders),
        taylor_remainders=tuple(remainders),
    )

"""Proximal-gradient solver for the (mollified) sparse control problem and
the continuation path that drives the mollification parameter to zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .grid import inner, norm
from .objective import ControlProblem, eval_j, grad_F, lambda_from_p, prox_box_l1

STAGE_TOL = 1e-8
FINAL_TOL = 1e-9
MAX_ITER = 5000
MIN_STEP = 1e-14
NOISE_LEVEL = 1e-11


def default_schedule(start: float = 1e-1, floor: float = 1e-6, factor: float = 2.0) -> list[float]:
    """Geometric schedule ``start, start/factor, ...`` down to ``floor``, then 0."""
    if not (start > 0 and floor > 0 and factor > 1):
        raise ValueError("schedule needs start > 0, floor > 0 and factor > 1")
    eps, out = start, []
    while eps >= floor * (1 - 1e-12):
        out.append(eps)
        eps /= factor
    return out + [0.0]


@dataclass
class IterationRecord:
    stage: int
    iteration: int
    objective: float
    residual: float
    step: float


@dataclass
class OptimizeReport:
    """Result of a proximal-gradient run or a continuation path.

    Attributes
    ----------
    control : ndarray
        Final control.
    eps_values : list of float
        Mollification parameter per stage.
    iterations : list of int
        Accepted steps per stage.
    residual : float
        Projection-formula stationarity residual of ``control`` for the
        exact problem.
    history : list of IterationRecord
    stage_controls : list of ndarray
        Final control of every stage.
    status : list of str
        Per stage ``converged``, ``max-iterations`` or ``step-underflow``;
        the last occurs when the smooth part has a gradient jump at the
        iterate (a state node sitting on a breakpoint).
    """

    control: np.ndarray
    eps_values: list[float]
    iterations: list[int]
    residual: float
    history: list[IterationRecord] = field(default_factory=list)
    stage_controls: list[np.ndarray] = field(default_factory=list)
    status: list[str] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return all(s == "converged" for s in self.status)

    @property
    def objective_history(self) -> list[float]:
        return [rec.objective for rec in self.history]

    def drift(self, grid) -> list[float]:
        """``||u_eps_k - u_eps_{k+1}||_L2`` between consecutive stages."""
        return [norm(grid, a - b) for a, b in zip(self.stage_controls[:-1], self.stage_controls[1:])]

    def distance_to_final(self, grid) -> list[float]:
        return [norm(grid, c - self.control) for c in self.stage_controls]

    def history_csv(self) -> str:
        rows = ["stage,iteration,objective,residual,step"]
        rows += [f"{r.stage},{r.iteration},{r.objective:.17g},{r.residual:.17g},{r.step:.17g}"
                 for r in self.history]
        return "\n".join(rows) + "\n"


def _run_stage(problem: ControlProblem, eps: float, u_start: np.ndarray,
               anchor: np.ndarray | None, tol: float, max_iter: int, stage: int,
               history: list[IterationRecord]):
    grid = problem.grid
    nu, kappa, alpha, beta = problem.nu, problem.kappa, problem.alpha, problem.beta

    def evaluate(u, y0):
        res = grad_F(problem, u, eps, y0=y0)
        value, g = res.value, res.grad
        if anchor is not None:
            value += 0.5 * inner(grid, u - anchor, u - anchor)
            g = g + (u - anchor)
        return value, g, res.state

    u = problem.project(grid.check(u_start, "initial control"))
    value, g, y = evaluate(u, None)
    gamma_max = 1.0 / nu
    gamma = gamma_max
    history.append(IterationRecord(stage, 0, value + kappa * eval_j(problem, u), np.nan, 0.0))
    for it in range(1, max_iter + 1):
        while True:
            u_new = prox_box_l1(u - gamma * g, gamma, kappa, alpha, beta)
            d = u_new - u
            value_new, g_new, y_new = evaluate(u_new, y)
            quad = inner(grid, d, d) / (2.0 * gamma)
            noise = NOISE_LEVEL * max(1.0, abs(value))
            if quad > noise and abs(value_new - value) > noise:
                excess = value_new - value - inner(grid, g, d)
            else:
                # the bound is below the accuracy of F (state solves stop at a
                # residual floor): test the curvature along d with gradients
                excess = 0.5 * inner(grid, g_new - g, d)
            if excess <= quad:
                break
            gamma *= 0.5
            if gamma < MIN_STEP:
                return u, it - 1, "step-underflow"
        residual = float(np.max(np.abs(d))) / gamma
        u, y, value, g = u_new, y_new, value_new, g_new
        history.append(IterationRecord(stage, it, value + kappa * eval_j(problem, u), residual, gamma))
        if residual <= tol:
            return u, it, "converged"
    return u, max_iter, "max-iterations"


def solve_regularized(problem: ControlProblem, eps: float, u_start: np.ndarray,
                      anchor: np.ndarray | None = None, tol: float | None = None,
                      max_iter: int = MAX_ITER) -> OptimizeReport:
    """Proximal gradient on ``F_eps + kappa j`` over the box, optionally with
    the proximal term ``||u - anchor||^2 / 2``.

    The step starts at ``1/nu``, never increases within a stage, and is
    halved until the quadratic upper
    bound of the smooth part holds at the trial point.  When that bound or
    the change of the smooth part falls below the accuracy of ``F`` it is
    checked through the gradient change along the step instead.
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    tol = (FINAL_TOL if eps == 0 else STAGE_TOL) if tol is None else tol
    history: list[IterationRecord] = []
    u, its, status = _run_stage(problem, eps, u_start, anchor, tol, max_iter, 0, history)
    return OptimizeReport(u, [eps], [its], stationarity_residual(problem, u), history,
                          [u.copy()], [status])


def solve_continuation(problem: ControlProblem, schedule: Sequence[float] | None,
                       u_start: np.ndarray | None = None, max_iter: int = MAX_ITER,
                       stage_tol: float = STAGE_TOL, final_tol: float = FINAL_TOL) -> OptimizeReport:
    """Warm-started proximal gradient along a decreasing ``eps`` schedule.

    Stages with ``eps > 0`` use the mollified state equation; a stage with
    ``eps = 0`` solves the nonsmooth problem.
    """
    schedule = default_schedule() if schedule is None else [float(e) for e in schedule]
    if any(e < 0 for e in schedule) or any(b >= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("schedule must be nonnegative and strictly decreasing")
    u = np.zeros(problem.grid.size) if u_start is None else problem.grid.check(u_start).copy()
    history: list[IterationRecord] = []
    its, controls, flags = [], [], []
    for stage, eps in enumerate(schedule):
        tol = final_tol if eps == 0 else stage_tol
        u, n_it, status = _run_stage(problem, eps, u, None, tol, max_iter, stage, history)
        its.append(n_it)
        controls.append(u.copy())
        flags.append(status)
    return OptimizeReport(u, list(schedule), its, stationarity_residual(problem, u), history,
                          controls, flags)


def projection_residual(problem: ControlProblem, u: np.ndarray, p: np.ndarray) -> float:
    lam = lambda_from_p(problem, p)
    target = problem.project(-(p + problem.kappa * lam) / problem.nu)
    return float(np.max(np.abs(u - target)))


def stationarity_residual(problem: ControlProblem, u: np.ndarray) -> float:
    """``||u - proj_[alpha,beta](-(p + kappa lambda)/nu)||_inf`` for the exact problem."""
    return projection_residual(problem, u, grad_F(problem, u).adjoint)

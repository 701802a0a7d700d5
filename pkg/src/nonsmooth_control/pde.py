"""Solvers for the semilinear state equation ``A y + f(y) = u`` and its
linearizations.

Every function takes a ``problem`` exposing ``operator`` (an
:class:`~nonsmooth_control.grid.EllipticOperator`), ``f`` (a
:class:`~nonsmooth_control.nonsmooth.PiecewiseSmoothFunction`) and
``integrand`` (with ``dy(y)``); see :class:`~nonsmooth_control.objective.ControlProblem`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu, spsolve

from .nonsmooth import SNAP_TOL, MollifiedFunction, PiecewiseSmoothFunction

NEWTON_TOL = 1e-10
MAX_NEWTON = 50
MAX_PICARD = 500
MAX_ACTIVE_SET = 50


class SolverError(RuntimeError):
    """Nonlinear solve failed; carries the residual history."""

    def __init__(self, message: str, history: list[float]):
        super().__init__(message)
        self.history = list(history)


@dataclass
class StateSolveReport:
    """Outcome of a nonlinear state solve.

    Attributes
    ----------
    y : ndarray
        Nodal state.
    iterations : int
        Total Newton plus Picard iterations.
    residual : float
        Final ``||A y + f(y) - u||_inf``.
    method : str
        ``"semismooth-newton"`` or ``"damped-picard"``.
    tolerance : float
        Residual threshold that was applied.
    history : list of float
        Residual after every iteration, starting with the initial guess.
    """

    y: np.ndarray
    iterations: int
    residual: float
    method: str
    tolerance: float
    history: list[float] = field(default_factory=list)

    def history_csv(self) -> str:
        rows = ["iteration,residual"] + [f"{k},{r:.17g}" for k, r in enumerate(self.history)]
        return "\n".join(rows) + "\n"


def operator_norm_inf(matrix: sp.spmatrix) -> float:
    return float(abs(matrix).sum(axis=1).max())


def residual_tolerance(matrix: sp.spmatrix, y: np.ndarray, u: np.ndarray,
                       tol: float = NEWTON_TOL) -> float:
    """Residual threshold: ``tol`` unless round-off in ``A y`` already exceeds it.

    On fine grids the entries of ``A`` grow like ``h^-2`` and forming
    ``A y - u`` loses about ``eps * ||A||_inf ||y||_inf`` absolutely, which
    exceeds ``1e-10`` well before ``n = 1e4``.
    """
    eps = np.finfo(float).eps
    floor = 16.0 * eps * (operator_norm_inf(matrix) * np.max(np.abs(y), initial=0.0)
                          + np.max(np.abs(u), initial=0.0))
    return max(tol, floor)


def _value_and_slope(fun, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``f(y)`` and the generalized-derivative element used in Newton (right
    slope at breakpoints)."""
    if isinstance(fun, MollifiedFunction):
        return fun.value_and_derivative(y)
    return fun.value(y), fun.one_sided_slopes(y, tol=SNAP_TOL)[1]


def sparse_solve(matrix: sp.spmatrix, rhs: np.ndarray) -> np.ndarray:
    """Direct solve with a fill-reducing ordering for structurally symmetric matrices."""
    return spsolve(matrix.tocsc(), rhs, permc_spec="MMD_AT_PLUS_A")


def _solve_nonlinear(operator, fun, u: np.ndarray, y0: np.ndarray | None,
                     tol: float, max_newton: int, max_picard: int) -> StateSolveReport:
    A = operator.matrix
    grid = operator.grid
    u = grid.check(u, "control")
    y = np.zeros_like(u) if y0 is None else grid.check(y0, "initial guess").copy()

    def residual(v):
        return A @ v + fun.value(v) - u

    def residual_and_slope(v):
        value, slope = _value_and_slope(fun, v)
        return A @ v + value - u, slope

    r, slope = residual_and_slope(y)
    res = float(np.max(np.abs(r)))
    history = [res]
    iterations = 0
    # a warm start always gets one Newton step: its residual can sit below the
    # round-off floor while the state is still off by far more than round-off
    warm = y0 is not None
    for _ in range(max_newton):
        thr = residual_tolerance(A, y, u, tol)
        if res == 0.0 or (res <= thr and not (warm and iterations == 0)):
            return StateSolveReport(y, iterations, res, "semismooth-newton", thr, history)
        dy = sparse_solve(A + sp.diags(slope), -r)
        step = 1.0
        for _ in range(30):
            y_new = y + step * dy
            r_new, slope_new = residual_and_slope(y_new)
            res_new = float(np.max(np.abs(r_new)))
            if res_new < res or res_new <= residual_tolerance(A, y_new, u, tol):
                break
            step *= 0.5
        else:
            break
        y, r, res, slope = y_new, r_new, res_new, slope_new
        iterations += 1
        history.append(res)
    thr = residual_tolerance(A, y, u, tol)
    if res <= thr:
        return StateSolveReport(y, iterations, res, "semismooth-newton", thr, history)

    # damped Picard: (A + cI) y_new = u - f(y) + c y, contractive for 0 <= f' <= c
    lo, hi = float(np.min(y, initial=0.0)), float(np.max(y, initial=0.0))
    spread = max(1.0, hi - lo)
    c = max(fun.slope_bound(lo - spread, hi + spread), 1e-12)
    lu = splu((A + c * sp.identity(A.shape[0])).tocsc(), permc_spec="MMD_AT_PLUS_A")
    for _ in range(max_picard):
        y = lu.solve(u - fun.value(y) + c * y)
        res = float(np.max(np.abs(residual(y))))
        iterations += 1
        history.append(res)
        thr = residual_tolerance(A, y, u, tol)
        if res <= thr:
            return StateSolveReport(y, iterations, res, "damped-picard", thr, history)
    raise SolverError(f"state solve did not converge, residual {res:.3e}", history)


def solve_state(problem, u: np.ndarray, y0: np.ndarray | None = None,
                tol: float = NEWTON_TOL, max_newton: int = MAX_NEWTON,
                max_picard: int = MAX_PICARD) -> StateSolveReport:
    """Solve ``A y + f(y) = u`` by semismooth Newton with a damped Picard fallback."""
    return _solve_nonlinear(problem.operator, problem.f, u, y0, tol, max_newton, max_picard)


def solve_state_mollified(problem, u: np.ndarray, eps: float,
                          y0: np.ndarray | None = None, tol: float = NEWTON_TOL,
                          max_newton: int = MAX_NEWTON,
                          max_picard: int = MAX_PICARD) -> StateSolveReport:
    """Solve ``A y + f_eps(y) = u``; ``eps = 0`` falls back to :func:`solve_state`."""
    fun = problem.f if eps == 0 else problem.f.mollify(eps)
    return _solve_nonlinear(problem.operator, fun, u, y0, tol, max_newton, max_picard)


def _check_chi(grid, chi) -> np.ndarray:
    chi = np.broadcast_to(np.asarray(chi, dtype=float), (grid.size,))
    if np.any(chi < 0):
        raise ValueError("linearization coefficient chi must be nonnegative")
    return chi


def solve_linearized(problem, chi, rhs: np.ndarray) -> np.ndarray:
    """``z = (A + diag(chi))^{-1} rhs`` by sparse direct solve."""
    op = problem.operator
    chi = _check_chi(op.grid, chi)
    return sparse_solve(op.with_diagonal(chi), op.grid.check(rhs, "rhs"))


def solve_adjoint(problem, chi, y: np.ndarray) -> np.ndarray:
    """``p = (A^T + diag(chi))^{-1} dL/dy(., y)``."""
    op = problem.operator
    chi = _check_chi(op.grid, chi)
    rhs = problem.integrand.dy(op.grid.check(y, "state"))
    return sparse_solve(op.matrix.T + sp.diags(chi), rhs)


def linearization_coefficient(f: PiecewiseSmoothFunction, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``chi = 1_{y not on E_f} f'(y)`` and the snapped-node mask."""
    snapped = f.on_breakpoint(y, SNAP_TOL)
    chi = f.derivative(y, strict=False)
    chi[snapped] = 0.0
    return chi, snapped


def solve_dir_deriv(problem, u: np.ndarray, h: np.ndarray,
                    y: np.ndarray | None = None) -> np.ndarray:
    """Solve ``A delta + f'(y; delta) = h`` with ``y = S(u)``.

    Off the breakpoints this is a linear solve with ``chi = f'(y)``.  On
    snapped nodes the reaction slope depends on the sign of ``delta`` and is
    resolved by an active-set iteration.
    """
    grid = problem.operator.grid
    h = grid.check(h, "direction")
    if y is None:
        y = solve_state(problem, u).y
    f = problem.f
    snapped = f.on_breakpoint(y, SNAP_TOL)
    slope = f.derivative(y, strict=False)
    if not np.any(snapped):
        return solve_linearized(problem, slope, h)

    left, right = f.one_sided_slopes(y, tol=SNAP_TOL)
    positive = np.ones(grid.size, dtype=bool)
    history = []
    for _ in range(MAX_ACTIVE_SET):
        chi = slope.copy()
        chi[snapped] = np.where(positive, right, left)[snapped]
        delta = solve_linearized(problem, chi, h)
        new_positive = positive.copy()
        new_positive[snapped] = np.where(delta[snapped] > 0, True,
                                         np.where(delta[snapped] < 0, False, positive[snapped]))
        res = problem.operator @ delta + f.dir_deriv(y, delta) - h
        history.append(float(np.max(np.abs(res))))
        if np.array_equal(new_positive, positive):
            return delta
        positive = new_positive
    raise SolverError("directional-derivative active set did not settle", history)

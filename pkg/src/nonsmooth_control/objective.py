"""Objective ``J = F + kappa j`` of the sparse control problem and its
first-order calculus.

``F(u) = int L(y_u) + nu/2 ||u||^2`` is handled through the adjoint; the
nonsmooth part ``j(u) = int |u|`` through its directional derivative,
subdifferential and proximal map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import EllipticOperator, Grid, integrate, inner
from .nonsmooth import PiecewiseSmoothFunction
from .pde import linearization_coefficient, solve_adjoint, solve_state_mollified

ZERO_BAND = 1e-10


@dataclass(frozen=True)
class TrackingIntegrand:
    """``L(x, y) = (y - y_d(x))^2 / 2``."""

    target: np.ndarray

    def value(self, y: np.ndarray) -> np.ndarray:
        return 0.5 * (y - self.target) ** 2

    def dy(self, y: np.ndarray) -> np.ndarray:
        return y - self.target

    def dyy(self, y: np.ndarray) -> np.ndarray:
        return np.ones_like(y)


@dataclass(frozen=True)
class ControlProblem:
    """Discrete sparse optimal control problem with a nonsmooth state equation.

    Parameters
    ----------
    operator : EllipticOperator
    f : PiecewiseSmoothFunction
    integrand : object
        Provides nodewise ``value``, ``dy`` and ``dyy``; usually a
        :class:`TrackingIntegrand`.
    nu, kappa : float
        Tikhonov and sparsity weights, both positive.
    alpha, beta : float
        Box bounds with ``alpha < 0 < beta``.
    """

    operator: EllipticOperator
    f: PiecewiseSmoothFunction
    integrand: object
    nu: float
    kappa: float
    alpha: float
    beta: float

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError("nu must be positive")
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if not self.alpha < 0 < self.beta:
            raise ValueError("bounds must satisfy alpha < 0 < beta")

    @property
    def grid(self) -> Grid:
        return self.operator.grid

    def replace(self, **changes) -> "ControlProblem":
        fields = dict(operator=self.operator, f=self.f, integrand=self.integrand, nu=self.nu,
                      kappa=self.kappa, alpha=self.alpha, beta=self.beta)
        fields.update(changes)
        return ControlProblem(**fields)

    def project(self, u: np.ndarray) -> np.ndarray:
        return np.clip(u, self.alpha, self.beta)


def tracking_problem(operator: EllipticOperator, f: PiecewiseSmoothFunction,
                     target: np.ndarray, nu: float, kappa: float,
                     alpha: float, beta: float) -> ControlProblem:
    target = operator.grid.check(target, "target")
    return ControlProblem(operator, f, TrackingIntegrand(target), nu, kappa, alpha, beta)


# --- objective values ---------------------------------------------------------

def smooth_part(problem: ControlProblem, u: np.ndarray, y: np.ndarray) -> float:
    """``F`` given the state ``y`` belonging to ``u``."""
    grid = problem.grid
    return integrate(grid, problem.integrand.value(y)) + 0.5 * problem.nu * inner(grid, u, u)


def eval_F(problem: ControlProblem, u: np.ndarray, eps: float = 0.0,
           y0: np.ndarray | None = None) -> float:
    y = solve_state_mollified(problem, u, eps, y0=y0).y
    return smooth_part(problem, u, y)


def eval_j(problem: ControlProblem, u: np.ndarray) -> float:
    return integrate(problem.grid, np.abs(u))


def eval_J(problem: ControlProblem, u: np.ndarray, eps: float = 0.0) -> float:
    return eval_F(problem, u, eps) + problem.kappa * eval_j(problem, u)


@dataclass
class GradientResult:
    """``F'(u) = p + nu u`` with the intermediate fields."""

    grad: np.ndarray
    adjoint: np.ndarray
    state: np.ndarray
    chi: np.ndarray
    breakpoint_nodes: int
    value: float

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.grad, dtype=dtype)


def grad_F(problem: ControlProblem, u: np.ndarray, eps: float = 0.0,
           y0: np.ndarray | None = None) -> GradientResult:
    """Gradient of ``F`` (or of its mollified version for ``eps > 0``).

    ``breakpoint_nodes`` counts state nodes snapped to a breakpoint; a
    nonzero count means differentiability is not guaranteed at ``u``.
    """
    u = problem.grid.check(u, "control")
    y = solve_state_mollified(problem, u, eps, y0=y0).y
    if eps > 0:
        chi = problem.f.mollify(eps).derivative(y)
        count = 0
    else:
        chi, snapped = linearization_coefficient(problem.f, y)
        count = int(np.count_nonzero(snapped))
    p = solve_adjoint(problem, chi, y)
    return GradientResult(p + problem.nu * u, p, y, chi, count, smooth_part(problem, u, y))


# --- calculus of j ---------------------------------------------------------------

def zero_mask(u: np.ndarray, band: float = ZERO_BAND) -> np.ndarray:
    """Nodes counted as ``u = 0``: ``|u| <= band * max(1, ||u||_inf)``."""
    scale = max(1.0, float(np.max(np.abs(u), initial=0.0)))
    return np.abs(u) <= band * scale


def j_dir_deriv(grid: Grid, u: np.ndarray, v: np.ndarray) -> float:
    """``j'(u; v) = int_{u>0} v - int_{u<0} v + int_{u=0} |v|``."""
    u, v = grid.check(u), grid.check(v)
    zero = zero_mask(u)
    field = np.where(zero, np.abs(v), np.sign(u) * v)
    return integrate(grid, field)


def lambda_from_p(problem: ControlProblem, p: np.ndarray) -> np.ndarray:
    return np.clip(-p / problem.kappa, -1.0, 1.0)


@dataclass
class MembershipReport:
    member: bool
    worst: float
    violation: np.ndarray


def subgradient_membership(u: np.ndarray, lam: np.ndarray, tol: float = 1e-8) -> MembershipReport:
    """Check ``lam in d|.|(u)`` nodewise.

    The violation is ``|lam - sign(u)|`` where ``u`` is nonzero and the
    distance of ``lam`` to ``[-1, 1]`` where ``u`` is in the zero band.
    """
    u, lam = np.asarray(u, dtype=float), np.asarray(lam, dtype=float)
    zero = zero_mask(u)
    outside = np.maximum(np.abs(lam) - 1.0, 0.0)
    violation = np.where(zero, outside, np.abs(lam - np.sign(u)))
    worst = float(np.max(violation, initial=0.0))
    return MembershipReport(worst <= tol, worst, violation)


def prox_box_l1(v: np.ndarray, step: float, kappa: float, alpha: float, beta: float) -> np.ndarray:
    """Minimizer of ``(w - v)^2 / 2 + step * kappa * |w|`` over ``[alpha, beta]``."""
    if not step > 0:
        raise ValueError("step must be positive")
    v = np.asarray(v, dtype=float)
    shrunk = np.sign(v) * np.maximum(np.abs(v) - step * kappa, 0.0)
    return np.clip(shrunk, alpha, beta)

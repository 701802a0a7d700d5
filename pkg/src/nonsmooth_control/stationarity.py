"""First-order optimality system at a candidate control, structural
diagnostics of the optimal state, and sparsity sweeps in ``kappa``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .grid import Grid, integrate
from .levelset import GRADIENT_FLOOR, extract_level_set, gradient_floor
from .nonsmooth import SNAP_TOL, PiecewiseSmoothFunction
from .objective import ZERO_BAND, ControlProblem, lambda_from_p, subgradient_membership, zero_mask
from .optimizer import default_schedule, solve_continuation
from .pde import SolverError, solve_adjoint, solve_state

SPARSITY_BAND = 1e-6
SIGN_TOL = 1e-8


@dataclass
class StationarityReport:
    """C-stationarity system at ``control``.

    ``chi_snapped`` marks nodes where the state sits on a breakpoint; there
    ``chi`` is the midpoint of the Clarke interval.
    """

    control: np.ndarray
    state: np.ndarray
    adjoint: np.ndarray
    multiplier: np.ndarray
    d: np.ndarray
    chi: np.ndarray
    chi_snapped: np.ndarray
    chi_in_clarke: np.ndarray
    residual_projection_u: float
    residual_projection_lambda: float
    residual_sparsity: float
    sparsity_violations: int
    residual_vi: float
    residual_adjoint: float
    sign_violation: float
    membership_violation: float
    breakpoint_node_count: int
    kappa: float
    nu: float
    alpha: float
    beta: float

    def summary(self) -> dict[str, float | int]:
        return {
            "residual_projection_u": self.residual_projection_u,
            "residual_projection_lambda": self.residual_projection_lambda,
            "residual_sparsity": self.residual_sparsity,
            "sparsity_violations": self.sparsity_violations,
            "residual_vi": self.residual_vi,
            "residual_adjoint": self.residual_adjoint,
            "sign_violation": self.sign_violation,
            "membership_violation": self.membership_violation,
            "breakpoint_node_count": self.breakpoint_node_count,
            "chi_outside_clarke": int(np.count_nonzero(~self.chi_in_clarke)),
            "adjoint_sup": float(np.max(np.abs(self.adjoint), initial=0.0)),
            "control_sup": float(np.max(np.abs(self.control), initial=0.0)),
        }

    def to_text(self) -> str:
        return "".join(f"{k}: {_fmt(v)}\n" for k, v in self.summary().items())


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def _vi_residual(grid: Grid, d: np.ndarray, u: np.ndarray, alpha: float, beta: float) -> float:
    """Worst normalized violation of ``int d (v - u) >= 0`` over extreme feasible ``v``."""
    bang = np.where(d > 0, alpha, np.where(d < 0, beta, u))
    patterns = [np.full_like(u, alpha), np.full_like(u, beta), bang]
    scale = max(1.0, integrate(grid, np.abs(d)) * (beta - alpha))
    return max(0.0, max(-integrate(grid, d * (v - u)) for v in patterns) / scale)


def build_stationarity(problem: ControlProblem, control: np.ndarray,
                       state: np.ndarray | None = None) -> StationarityReport:
    """Assemble adjoint, multiplier and residuals of the first-order system."""
    grid, f = problem.grid, problem.f
    u = grid.check(control, "control")
    y = solve_state(problem, u).y if state is None else grid.check(state, "state")
    snapped = f.on_breakpoint(y, SNAP_TOL)
    lo, hi = f.clarke(y, SNAP_TOL)
    chi = f.derivative(y, strict=False)
    chi[snapped] = 0.5 * (lo + hi)[snapped]
    in_clarke = (chi >= lo - 1e-14) & (chi <= hi + 1e-14)

    p = solve_adjoint(problem, chi, y)
    lam = lambda_from_p(problem, p)
    nu, kappa, alpha, beta = problem.nu, problem.kappa, problem.alpha, problem.beta
    d = p + nu * u + kappa * lam

    proj_u = float(np.max(np.abs(u - np.clip(-(p + kappa * lam) / nu, alpha, beta))))
    proj_lam = float(np.max(np.abs(lam - np.clip(-p / kappa, -1.0, 1.0))))

    band = SPARSITY_BAND * max(1.0, kappa)
    zero = zero_mask(u, ZERO_BAND)
    gap = np.abs(p) - kappa
    checked = np.abs(gap) > band
    bad_zero = zero & (gap > 0) & checked      # u = 0 but |p| > kappa
    bad_support = ~zero & (gap < 0) & checked  # u != 0 but |p| < kappa
    sparsity_violation = np.where(bad_zero | bad_support, np.abs(gap), 0.0)

    adj_res = problem.operator.matrix.T @ p + chi * p - problem.integrand.dy(y)

    tol = ZERO_BAND * max(1.0, abs(alpha), abs(beta))
    at_alpha = u <= alpha + tol
    at_beta = u >= beta - tol
    free = ~at_alpha & ~at_beta
    sign = np.concatenate([np.maximum(-d[at_alpha], 0.0), np.maximum(d[at_beta], 0.0),
                           np.abs(d[free])])

    return StationarityReport(
        control=u, state=y, adjoint=p, multiplier=lam, d=d, chi=chi, chi_snapped=snapped,
        chi_in_clarke=in_clarke, residual_projection_u=proj_u,
        residual_projection_lambda=proj_lam,
        residual_sparsity=float(np.max(sparsity_violation, initial=0.0)),
        sparsity_violations=int(np.count_nonzero(sparsity_violation)),
        residual_vi=_vi_residual(grid, d, u, alpha, beta),
        residual_adjoint=float(np.max(np.abs(adj_res))),
        sign_violation=float(np.max(sign, initial=0.0)),
        membership_violation=subgradient_membership(u, lam).worst,
        breakpoint_node_count=int(np.count_nonzero(snapped)),
        kappa=kappa, nu=nu, alpha=alpha, beta=beta)


# --- structural diagnostics -------------------------------------------------------

@dataclass
class StructureReport:
    """Growth of ``{|y - tau_i| < eps}`` and gradient size on the level sets.

    Attributes
    ----------
    eps : ndarray
    measure : ndarray, shape (len(eps), K)
        Per-breakpoint measure profile.
    slope : float
        Least-squares log-log slope of the summed profile (``nan`` if empty).
    c_s : float
        ``max_eps measure / eps``.
    min_gradient : float
        Smallest ``|grad y|`` over all level-set points (``inf`` if none).
    gradient_floor : float
    boundary_distance : float
        Distance of ``{y = 0}`` minus the boundary to the boundary, when 0 is
        a breakpoint (``nan`` otherwise).
    """

    eps: np.ndarray
    measure: np.ndarray
    slope: float
    c_s: float
    min_gradient: float
    gradient_floor: float
    boundary_distance: float
    slope_tol: float = 0.1
    level_set_sizes: list[int] = field(default_factory=list)

    @property
    def total(self) -> np.ndarray:
        return self.measure.sum(axis=1)

    @property
    def sa_pass(self) -> bool:
        if not np.any(self.total > 0):
            return True
        return bool(abs(self.slope - 1.0) <= self.slope_tol)

    @property
    def gradient_pass(self) -> bool:
        return bool(self.min_gradient > self.gradient_floor)

    def profile_csv(self) -> str:
        k = self.measure.shape[1]
        head = ["eps"] + [f"measure_{i + 1}" for i in range(k)] + ["total"]
        rows = [",".join(head)]
        for e, row in zip(self.eps, self.measure):
            rows.append(",".join(f"{v:.17g}" for v in [e, *row, row.sum()]))
        return "\n".join(rows) + "\n"

    def to_text(self) -> str:
        items = {"slope": self.slope, "c_s": self.c_s, "sa_pass": self.sa_pass,
                 "min_gradient": self.min_gradient, "gradient_floor": self.gradient_floor,
                 "gradient_pass": self.gradient_pass, "boundary_distance": self.boundary_distance}
        return "".join(f"{k}: {_fmt(v)}\n" for k, v in items.items())


def band_measure(grid: Grid, values: np.ndarray, tau: float, eps: float) -> float:
    """Measure of ``{|y - tau| < eps}``.

    In 1D it is exact for the piecewise-linear interpolant including the
    boundary cells; in 2D it is the nodal count times the cell area.
    """
    if grid.dim != 1:
        return grid.weight * np.count_nonzero(np.abs(values - tau) < eps)
    y = grid.padded(values)
    lo, hi = np.minimum(y[:-1], y[1:]), np.maximum(y[:-1], y[1:])
    overlap = np.clip(np.minimum(hi, tau + eps) - np.maximum(lo, tau - eps), 0.0, None)
    flat = hi - lo <= 1e-300
    frac = np.where(flat, (np.abs(lo - tau) < eps).astype(float),
                    overlap / np.where(flat, 1.0, hi - lo))
    return float(grid.h[0] * np.sum(frac))


def check_structure(grid: Grid, state: np.ndarray, f: PiecewiseSmoothFunction,
                    eps: Sequence[float] | None = None,
                    relative_floor: float = GRADIENT_FLOOR) -> StructureReport:
    """Measure ``{|y - tau_i| < eps}`` over a log grid and the level-set gradients."""
    y = grid.check(state, "state")
    eps = np.logspace(-3, -1, 9) if eps is None else np.asarray(eps, dtype=float)
    if np.any(eps <= 0) or np.any(eps >= 1):
        raise ValueError("eps values must lie in (0, 1)")
    eps = np.sort(eps)
    measure = np.array([[band_measure(grid, y, tau, e) for tau in f.breakpoints]
                        for e in eps]).reshape(eps.size, f.K)
    total = measure.sum(axis=1)
    positive = total > 0
    if np.count_nonzero(positive) >= 2:
        slope = float(np.polyfit(np.log(eps[positive]), np.log(total[positive]), 1)[0])
    else:
        slope = np.nan
    c_s = float(np.max(total / eps))

    floor = gradient_floor(grid, y, relative_floor)
    min_grad, dist, sizes = np.inf, np.nan, []
    for i, tau in enumerate(f.breakpoints, start=1):
        ls = extract_level_set(grid, y, tau, index=i, check_gradient=False)
        sizes.append(ls.size)
        if ls.size:
            min_grad = min(min_grad, float(np.min(ls.gradients)))
        if tau == 0.0:
            dist = ls.boundary_distance()
    return StructureReport(eps, measure, slope, c_s, min_grad, floor, dist,
                           level_set_sizes=sizes)


# --- kappa sweep ---------------------------------------------------------------------

@dataclass
class SweepRow:
    kappa: float
    support: float
    l1: float
    adjoint_sup: float
    residual: float
    status: str


def support_measure(grid: Grid, u: np.ndarray) -> float:
    return grid.weight * float(np.count_nonzero(~zero_mask(u, ZERO_BAND)))


def sparsity_sweep(problem: ControlProblem, kappas: Sequence[float],
                   schedule: Sequence[float] | None = None) -> list[SweepRow]:
    """Continuation solve per ``kappa``, warm-started from the previous one.

    Failures are recorded in the ``status`` column and the sweep continues
    from the last successful control.
    """
    kappas = [float(k) for k in kappas]
    if any(k <= 0 for k in kappas) or any(b <= a for a, b in zip(kappas, kappas[1:])):
        raise ValueError("kappa values must be positive and increasing")
    schedule = default_schedule() if schedule is None else list(schedule)
    grid = problem.grid
    u = np.zeros(grid.size)
    rows = []
    for kappa in kappas:
        sub = problem.replace(kappa=kappa)
        try:
            rep = solve_continuation(sub, schedule, u)
        except SolverError as exc:
            rows.append(SweepRow(kappa, np.nan, np.nan, np.nan, np.nan, f"failed: {exc}"))
            continue
        u = rep.control
        p = build_stationarity(sub, u).adjoint
        status = "ok" if rep.converged else ";".join(sorted(set(rep.status) - {"converged"}))
        rows.append(SweepRow(kappa, support_measure(grid, u), integrate(grid, np.abs(u)),
                             float(np.max(np.abs(p))), rep.residual, status))
    return rows


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    out = ["kappa,support,l1_norm,adjoint_sup,residual,status"]
    out += [f"{r.kappa:.17g},{r.support:.17g},{r.l1:.17g},{r.adjoint_sup:.17g},"
            f"{r.residual:.17g},{r.status}" for r in rows]
    return "\n".join(out) + "\n"

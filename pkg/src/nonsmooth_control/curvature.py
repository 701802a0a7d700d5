"""Second-order analysis at a stationary control.

The curvature of the smooth part ``F`` splits into a tracking term, a term
with ``f''`` on the smooth pieces, and a surface term over the breakpoint
level sets of the optimal state.  The surface term is computed both
explicitly (crossings weighted by ``1/|grad y|``) and as the limit of
window difference quotients ``(1/t^2) int p zeta(t)``.

In 1D the window integrals are evaluated exactly for the piecewise-linear
interpolants of the nodal fields: every cell is split where the
interpolants cross a breakpoint or a window edge.  Nodal quadrature would
sample the windows, whose width is ``O(t)``, with an ``O(h)`` error that is
not small next to the window once ``t |z| / |grad y|`` approaches ``h``.
In 2D nodal quadrature is used.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .grid import Grid, integrate, norm
from .levelset import LevelSet, extract_level_set
from .nonsmooth import SNAP_TOL, PiecewiseSmoothFunction, piecewise_linear
from .objective import ControlProblem, eval_F, eval_J, zero_mask
from .pde import solve_dir_deriv, solve_state
from .stationarity import StationarityReport

CELL_GAUSS = 4
DEFAULT_T_MIN = 1e-3


def default_t_sequence(t_min: float = DEFAULT_T_MIN, count: int = 8) -> np.ndarray:
    """Geometric sequence with factor 1/2 ending at ``t_min``."""
    return t_min * 2.0 ** np.arange(count - 1, -1, -1)


# --- window terms --------------------------------------------------------------

def window_terms(f: PiecewiseSmoothFunction, ybar: np.ndarray, yt: np.ndarray) -> np.ndarray:
    """Per-breakpoint window terms ``T_i``, shape ``(K,) + ybar.shape``.

    ``T_i = (yt - tau_i)`` where ``ybar`` lies just above ``tau_i`` (below
    the next breakpoint) and ``yt`` within ``eps0`` below it, minus the
    mirrored term, zero elsewhere.
    """
    tau = f.breakpoints
    eps0 = f.epsilon0()
    ext = np.concatenate([[-np.inf], tau, [np.inf]])
    out = np.zeros((f.K,) + np.shape(ybar))
    for i in range(f.K):
        lo, t_i, hi = ext[i], ext[i + 1], ext[i + 2]
        down = (ybar > t_i) & (ybar < hi) & (yt > t_i - eps0) & (yt < t_i)
        up = (ybar > lo) & (ybar < t_i) & (yt > t_i) & (yt < t_i + eps0)
        out[i] = (yt - t_i) * (down.astype(float) - up.astype(float))
    return out


def zeta_pointwise(f: PiecewiseSmoothFunction, ybar: np.ndarray, yt: np.ndarray) -> np.ndarray:
    """``zeta = -sum_i sigma_i T_i``."""
    return -np.tensordot(f.sigmas, window_terms(f, ybar, yt), axes=1)


def _remainder_pointwise(f: PiecewiseSmoothFunction, ybar: np.ndarray, y: np.ndarray) -> np.ndarray:
    chi = f.derivative(ybar, strict=False)
    chi = np.where(f.on_breakpoint(ybar, SNAP_TOL), 0.0, chi)
    return chi * (y - ybar) - f.value(y) + f.value(ybar)


def _cellwise_integral(grid: Grid, fields: Sequence[np.ndarray], cuts, integrand) -> np.ndarray:
    """Integrate ``integrand(*interpolants)`` over (0, 1)-cells of a 1D grid.

    ``cuts`` lists ``(field_index, level)`` pairs; each cell is split where
    the linear interpolant of that field reaches the level.  Returns the
    integral as an array (leading shape of ``integrand``'s output).
    """
    (h,) = grid.h
    pads = [grid.padded(v) for v in fields]
    a = [p[:-1] for p in pads]
    b = [p[1:] for p in pads]
    ncell = a[0].size
    pos = [np.zeros(ncell), np.ones(ncell)]
    for k, level in cuts:
        da = b[k] - a[k]
        with np.errstate(divide="ignore", invalid="ignore"):
            s = (level - a[k]) / da
        s = np.where(np.isfinite(s) & (s > 0) & (s < 1), s, 0.0)
        pos.append(s)
    pos = np.sort(np.column_stack(pos), axis=1)
    xi, w = np.polynomial.legendre.leggauss(CELL_GAUSS)
    lo, hi = pos[:, :-1, None], pos[:, 1:, None]
    s = 0.5 * (lo + hi) + 0.5 * (hi - lo) * xi
    ws = 0.5 * (hi - lo) * w * h
    vals = integrand(*[ak[:, None, None] + (bk - ak)[:, None, None] * s for ak, bk in zip(a, b)])
    return np.sum(vals * ws, axis=(-3, -2, -1))


def _window_cuts(f: PiecewiseSmoothFunction) -> list[tuple[int, float]]:
    eps0 = f.epsilon0()
    cuts = [(1, float(t)) for t in f.breakpoints]
    for t in f.breakpoints:
        cuts += [(2, float(t)), (2, float(t - eps0)), (2, float(t + eps0))]
    return cuts


def window_integrals(grid: Grid, f: PiecewiseSmoothFunction, weight: np.ndarray,
                     ybar: np.ndarray, yt: np.ndarray) -> np.ndarray:
    """``int weight * T_i`` for every breakpoint, shape ``(K,)``."""
    if grid.dim == 1:
        return _cellwise_integral(
            grid, [weight, ybar, yt], _window_cuts(f),
            lambda p, yb, ys: p[None] * window_terms(f, yb, ys))
    return np.array([integrate(grid, weight * T) for T in window_terms(f, ybar, yt)])


def zeta_integral(problem: ControlProblem, p: np.ndarray, ybar: np.ndarray, yt: np.ndarray) -> float:
    """``int p zeta`` with ``zeta`` built from ``ybar`` and ``yt``."""
    f = problem.f
    return float(-np.dot(f.sigmas, window_integrals(problem.grid, f, p, ybar, yt)))


def zeta_field(problem: ControlProblem, u: np.ndarray, t: float, h: np.ndarray,
               ybar: np.ndarray | None = None) -> np.ndarray:
    """Nodal ``zeta(u; t, h)`` from ``S(u)`` and ``S(u + t h)``."""
    if not t > 0:
        raise ValueError("t must be positive")
    ybar = solve_state(problem, u).y if ybar is None else ybar
    yt = solve_state(problem, u + t * h, y0=ybar).y
    return zeta_pointwise(problem.f, ybar, yt)


def taylor_remainder(problem: ControlProblem, ubar: np.ndarray, pbar: np.ndarray,
                     y: np.ndarray, ybar: np.ndarray | None = None) -> float:
    """``r(y) = int p [chi (y - ybar) - f(y) + f(ybar)]`` with ``chi = f'(ybar)`` off breakpoints."""
    f, grid = problem.f, problem.grid
    ybar = solve_state(problem, ubar).y if ybar is None else ybar
    if grid.dim == 1:
        cuts = [(1, float(t)) for t in f.breakpoints] + [(2, float(t)) for t in f.breakpoints]
        return float(_cellwise_integral(
            grid, [pbar, ybar, y], cuts,
            lambda p, yb, ys: p * _remainder_pointwise(f, yb, ys)))
    return integrate(grid, pbar * _remainder_pointwise(f, ybar, y))


# --- limit estimator -------------------------------------------------------------

@dataclass
class LimitEstimate:
    """Difference-quotient sequence ``q(t) = (1/t^2) int p zeta(t)``.

    ``estimate`` is the minimum over the last ``tail`` entries (smallest
    ``t``); ``spread`` is the range of that tail, a stabilization diagnostic.
    """

    t: np.ndarray
    values: np.ndarray
    estimate: float
    spread: float
    tail: int

    def to_csv(self) -> str:
        rows = ["t,value,estimate"]
        rows += [f"{t:.17g},{v:.17g},{self.estimate:.17g}" for t, v in zip(self.t, self.values)]
        return "\n".join(rows) + "\n"


def Q_tilde_limit(problem: ControlProblem, ubar: np.ndarray, pbar: np.ndarray, h: np.ndarray,
                  t_sequence: Sequence[float] | None = None, ybar: np.ndarray | None = None,
                  tail: int = 3) -> LimitEstimate:
    """Estimate the window-curvature limit along a decreasing ``t`` sequence."""
    ts = default_t_sequence() if t_sequence is None else np.asarray(t_sequence, dtype=float)
    if ts.size < 4 or np.any(np.diff(ts) >= 0) or np.any(ts <= 0):
        raise ValueError("t sequence must be positive, strictly decreasing, with >= 4 entries")
    ybar = solve_state(problem, ubar).y if ybar is None else ybar
    values = np.empty(ts.size)
    for k, t in enumerate(ts):
        yt = solve_state(problem, ubar + t * h, y0=ybar).y
        values[k] = zeta_integral(problem, pbar, ybar, yt) / t**2
    last = values[-tail:]
    return LimitEstimate(ts, values, float(np.min(last)), float(np.ptp(last)), tail)


def key_limit_defect(problem: ControlProblem, ubar: np.ndarray, pbar: np.ndarray,
                     h: np.ndarray, t: float, ybar: np.ndarray | None = None,
                     z: np.ndarray | None = None) -> float:
    """``r(S(u + t h))/t^2 + (1/2) int p f''(ybar) z^2 - (1/t^2) int p zeta``; tends to 0."""
    f, grid = problem.f, problem.grid
    ybar = solve_state(problem, ubar).y if ybar is None else ybar
    z = solve_dir_deriv(problem, ubar, h, y=ybar) if z is None else z
    yt = solve_state(problem, ubar + t * h, y0=ybar).y
    r = taylor_remainder(problem, ubar, pbar, yt, ybar)
    smooth = f.second_derivative(ybar, strict=False) * ~f.on_breakpoint(ybar, SNAP_TOL)
    second = 0.5 * integrate(grid, pbar * smooth * z**2)
    return r / t**2 + second - zeta_integral(problem, pbar, ybar, yt) / t**2


# --- explicit curvature -------------------------------------------------------------

@dataclass
class CurvatureBreakdown:
    """Terms of the explicit curvature ``Q(h)``."""

    term_tracking: float
    term_fsecond: float
    term_surface: float
    z: np.ndarray = field(repr=False)
    level_sets: list[LevelSet] = field(default_factory=list, repr=False)
    limit: LimitEstimate | None = None

    @property
    def Q_explicit(self) -> float:
        return self.term_tracking + self.term_fsecond + self.term_surface

    @property
    def Q_tilde_explicit(self) -> float:
        return 0.5 * self.term_surface

    def to_text(self) -> str:
        items = {"term_tracking": self.term_tracking, "term_fsecond": self.term_fsecond,
                 "term_surface": self.term_surface, "Q_explicit": self.Q_explicit,
                 "Q_tilde_explicit": self.Q_tilde_explicit}
        if self.limit is not None:
            items["Q_tilde_limit"] = self.limit.estimate
            items["Q_tilde_limit_spread"] = self.limit.spread
        return "".join(f"{k}: {v:.17g}\n" for k, v in items.items())


def breakpoint_level_sets(problem: ControlProblem, ybar: np.ndarray,
                          check_gradient: bool = True) -> list[LevelSet]:
    return [extract_level_set(problem.grid, ybar, tau, index=i, check_gradient=check_gradient)
            for i, tau in enumerate(problem.f.breakpoints, start=1)]


def Q_explicit(problem: ControlProblem, ubar: np.ndarray, pbar: np.ndarray, h: np.ndarray,
               ybar: np.ndarray | None = None,
               level_sets: list[LevelSet] | None = None) -> CurvatureBreakdown:
    """Explicit curvature: volume terms by quadrature, surface term over level sets.

    Raises :class:`~nonsmooth_control.levelset.GradientFloorError` when the
    state is too flat on a breakpoint level set.
    """
    grid, f = problem.grid, problem.f
    h = grid.check(h, "direction")
    ybar = solve_state(problem, ubar).y if ybar is None else ybar
    if level_sets is None:
        level_sets = breakpoint_level_sets(problem, ybar)
    z = solve_dir_deriv(problem, ubar, h, y=ybar)
    tracking = integrate(grid, problem.integrand.dyy(ybar) * z**2 + problem.nu * h**2)
    smooth = f.second_derivative(ybar, strict=False) * ~f.on_breakpoint(ybar, SNAP_TOL)
    fsecond = 0.0 - integrate(grid, pbar * smooth * z**2)
    surface = 0.0
    for ls in level_sets:
        if ls.size:
            pz = ls.interpolate(pbar) * ls.interpolate(z) ** 2
            surface += f.sigma(ls.index) * float(np.sum(ls.weights * pz / ls.gradients))
    return CurvatureBreakdown(tracking, fsecond, surface, z, level_sets)


# --- critical cone ------------------------------------------------------------------

@dataclass
class ConeMembership:
    member: bool
    sign_violation: float
    pairing: float
    max_dv: float
    max_zero_set_gap: float


def _active_sets(report: StationarityReport):
    u = report.control
    tol = 1e-10 * max(1.0, abs(report.alpha), abs(report.beta))
    at_alpha = u <= report.alpha + tol
    at_beta = u >= report.beta - tol
    return at_alpha, at_beta, zero_mask(u)


def critical_cone_membership(problem: ControlProblem, report: StationarityReport,
                             v: np.ndarray, tol: float = 1e-8) -> ConeMembership:
    """Check the sign conditions and the vanishing first-order expansion."""
    grid = problem.grid
    v = grid.check(v, "direction")
    at_alpha, at_beta, zero = _active_sets(report)
    sign = max(float(np.max(-v[at_alpha], initial=0.0)), float(np.max(v[at_beta], initial=0.0)), 0.0)
    u, p = report.control, report.adjoint
    jprime = integrate(grid, np.where(zero, np.abs(v), np.sign(u) * v))
    pairing = integrate(grid, (p + problem.nu * u) * v) + problem.kappa * jprime
    max_dv = float(np.max(np.abs(report.d * v), initial=0.0))
    gap = float(np.max(np.abs(report.multiplier * v - np.abs(v))[zero], initial=0.0))
    member = sign <= tol and abs(pairing) <= tol
    return ConeMembership(member, sign, float(pairing), max_dv, gap)


def project_to_critical_cone(problem: ControlProblem, report: StationarityReport,
                             v: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Nodewise projection onto directions with ``d v = 0``, the box sign
    conditions and ``lambda v = |v|`` on ``{u = 0}``."""
    v = problem.grid.check(v, "direction").copy()
    at_alpha, at_beta, zero = _active_sets(report)
    d, lam = report.d, report.multiplier
    dscale = tol * max(1.0, float(np.max(np.abs(d), initial=0.0)))
    v[np.abs(d) > dscale] = 0.0
    v[at_alpha] = np.maximum(v[at_alpha], 0.0)
    v[at_beta] = np.minimum(v[at_beta], 0.0)
    pos = zero & (lam >= 1.0 - tol)
    neg = zero & (lam <= -1.0 + tol)
    v[pos] = np.maximum(v[pos], 0.0)
    v[neg] = np.minimum(v[neg], 0.0)
    v[zero & ~pos & ~neg] = 0.0
    return v


def densify_critical_direction(problem: ControlProblem, report: StationarityReport,
                               v: np.ndarray, eps: float) -> np.ndarray:
    """Bounded critical direction along which ``u + t v_eps`` stays feasible
    for ``t < eps`` and ``j`` is linear for ``t < eps^3``."""
    alpha, beta = problem.alpha, problem.beta
    if not 0 < eps < 1.0 / (beta - alpha):
        raise ValueError(f"eps must lie in (0, {1.0 / (beta - alpha):g})")
    u = report.control
    v = problem.grid.check(v, "direction")
    trial = u + eps * v
    keep = (trial >= alpha) & (trial <= beta) & (zero_mask(u) | (np.abs(u) >= eps))
    return np.where(keep, np.clip(v, -1.0 / eps**2, 1.0 / eps**2), 0.0)


# --- probe directions and reports -----------------------------------------------------

def random_smooth_field(grid: Grid, rng: np.random.Generator, modes: int = 8) -> np.ndarray:
    """Random sine series with ``1/k`` decaying amplitudes."""
    coords = grid.coordinates()
    scaled = [(c - a) / (b - a) for c, a, b in zip(coords, grid.low, grid.high)]
    out = np.zeros(grid.size)
    if grid.dim == 1:
        for k in range(1, modes + 1):
            out += rng.standard_normal() / k * np.sin(k * np.pi * scaled[0])
    else:
        for k in range(1, modes + 1):
            for m in range(1, modes + 1):
                out += rng.standard_normal() / (k * m) * np.sin(k * np.pi * scaled[0]) \
                    * np.sin(m * np.pi * scaled[1])
    return out


def _bump(grid: Grid, centre: np.ndarray, width: float) -> np.ndarray:
    coords = grid.coordinates()
    r2 = sum((c - x0) ** 2 for c, x0 in zip(coords, centre)) / width**2
    return np.where(r2 < 1.0, (1.0 - r2) ** 2, 0.0)


def probe_directions(problem: ControlProblem, report: StationarityReport, count: int,
                     rng: np.random.Generator, eps: float | None = None) -> list[np.ndarray]:
    """Critical directions normalized in L2.

    Half are densified projections of random smooth fields, the rest are
    projected bumps centred on nodes where the cone is not pinned to zero,
    and one is the projected negative gradient.  Directions that vanish
    after projection are dropped.
    """
    grid = problem.grid
    eps = 0.5 / (problem.beta - problem.alpha) if eps is None else eps
    n_random = max(1, count // 2)
    candidates = []
    for _ in range(n_random):
        v = project_to_critical_cone(problem, report, random_smooth_field(grid, rng))
        candidates.append(densify_critical_direction(problem, report, v, eps))
    ones = project_to_critical_cone(problem, report, np.ones(grid.size)) != 0
    ones |= project_to_critical_cone(problem, report, -np.ones(grid.size)) != 0
    free = np.flatnonzero(ones)
    coords = np.column_stack(grid.coordinates())
    width = 0.05 * min(b - a for a, b in zip(grid.low, grid.high))
    for _ in range(count - n_random - 1):
        if free.size == 0:
            break
        centre = coords[rng.choice(free)]
        sign = rng.choice([-1.0, 1.0])
        candidates.append(project_to_critical_cone(problem, report, sign * _bump(grid, centre, width)))
    candidates.append(project_to_critical_cone(problem, report,
                                               -(report.adjoint + problem.nu * report.control)))
    out = []
    for v in candidates:
        size = norm(grid, v)
        if size > 0 and critical_cone_membership(problem, report, v / size).member:
            out.append(v / size)
    return out


@dataclass
class DirectionRow:
    Q: float
    term_tracking: float
    term_fsecond: float
    term_surface: float
    Q_tilde_explicit: float
    Q_tilde_limit: float
    pairing: float


@dataclass
class SecondOrderReport:
    rows: list[DirectionRow]
    verdict: str
    min_Q: float
    growth_min: float
    dropped: int
    message: str

    def to_csv(self) -> str:
        out = ["direction,Q,term_tracking,term_fsecond,term_surface,Q_tilde_explicit,"
               "Q_tilde_limit,pairing"]
        for k, r in enumerate(self.rows):
            vals = [r.Q, r.term_tracking, r.term_fsecond, r.term_surface, r.Q_tilde_explicit,
                    r.Q_tilde_limit, r.pairing]
            out.append(f"{k}," + ",".join(f"{v:.17g}" for v in vals))
        return "\n".join(out) + "\n"

    def to_text(self) -> str:
        return (f"verdict: {self.verdict}\nmin_Q: {self.min_Q:.17g}\n"
                f"growth_min: {self.growth_min:.17g}\ndirections: {len(self.rows)}\n"
                f"dropped: {self.dropped}\nmessage: {self.message}\n")


def growth_probe(problem: ControlProblem, report: StationarityReport, samples: int,
                 rng: np.random.Generator, radius: tuple[float, float] = (1e-2, 1e-1)) -> np.ndarray:
    """``(J(u) - J(ubar)) / ||u - ubar||^2`` for random feasible ``u`` near ``ubar``."""
    grid = problem.grid
    ubar = report.control
    J0 = eval_J(problem, ubar)
    ratios = []
    for _ in range(samples):
        w = random_smooth_field(grid, rng)
        w /= max(float(np.max(np.abs(w))), 1e-300)
        u = problem.project(ubar + rng.uniform(*radius) * w)
        dist2 = norm(grid, u - ubar) ** 2
        if dist2 > 0:
            ratios.append((eval_J(problem, u) - J0) / dist2)
    return np.array(ratios)


def second_order_report(problem: ControlProblem, report: StationarityReport,
                        directions: Sequence[np.ndarray], tol: float = 1e-8,
                        margin: float | None = None, growth_samples: int = 100,
                        rng: np.random.Generator | None = None,
                        t_sequence: Sequence[float] | None = None) -> SecondOrderReport:
    """Evaluate ``Q`` on critical directions and probe quadratic growth.

    Non-members are projected onto the cone; those still failing the test
    are dropped.  Pass ``t_sequence`` to add the limit cross-check.
    """
    grid = problem.grid
    rng = np.random.default_rng(0) if rng is None else rng
    margin = 0.5 * problem.nu if margin is None else margin
    ybar, pbar, ubar = report.state, report.adjoint, report.control
    level_sets = breakpoint_level_sets(problem, ybar)
    rows, dropped = [], 0
    for v in directions:
        mem = critical_cone_membership(problem, report, v, tol)
        if not mem.member:
            v = project_to_critical_cone(problem, report, v)
            size = norm(grid, v)
            mem = critical_cone_membership(problem, report, v / size if size else v, tol)
            if size == 0 or not mem.member:
                dropped += 1
                continue
            v = v / size
        br = Q_explicit(problem, ubar, pbar, v, ybar, level_sets)
        lim = np.nan
        if t_sequence is not None:
            lim = Q_tilde_limit(problem, ubar, pbar, v, t_sequence, ybar).estimate
        rows.append(DirectionRow(br.Q_explicit, br.term_tracking, br.term_fsecond,
                                 br.term_surface, br.Q_tilde_explicit, lim, mem.pairing))
    growth = growth_probe(problem, report, growth_samples, rng) if growth_samples else np.array([])
    growth_min = float(np.min(growth)) if growth.size else np.nan
    if not rows:
        return SecondOrderReport(rows, "VACUOUS", np.nan, growth_min, dropped,
                                 "no critical direction survived projection")
    min_q = min(r.Q for r in rows)
    if min_q < -tol:
        verdict, msg = "NECESSARY-VIOLATED", "a critical direction has negative curvature"
    elif min_q >= margin and (not growth.size or growth_min > 0):
        verdict, msg = "SUFFICIENT-INDICATED", f"min Q >= {margin:g} and positive growth ratios"
    else:
        verdict, msg = "NECESSARY-CONSISTENT", "no negative curvature found on the probe set"
    return SecondOrderReport(rows, verdict, min_q, growth_min, dropped, msg)


@dataclass
class SubderivativeTable:
    t: np.ndarray
    D: np.ndarray
    Q: float

    @property
    def gap(self) -> float:
        return abs(self.D[-1] - self.Q)

    def to_csv(self) -> str:
        rows = ["t,D,Q_explicit"] + [f"{t:.17g},{d:.17g},{self.Q:.17g}" for t, d in zip(self.t, self.D)]
        return "\n".join(rows) + "\n"


def second_subderivative_check(problem: ControlProblem, ubar: np.ndarray, h: np.ndarray,
                               t_sequence: Sequence[float] | None = None,
                               report: StationarityReport | None = None) -> SubderivativeTable:
    """``D(t) = [F(u + t h) - F(u) - t int (p + nu u) h] / (t^2 / 2)`` against ``Q(h)``."""
    from .stationarity import build_stationarity

    grid = problem.grid
    ts = default_t_sequence() if t_sequence is None else np.asarray(t_sequence, dtype=float)
    report = build_stationarity(problem, ubar) if report is None else report
    ybar, pbar = report.state, report.adjoint
    F0 = eval_F(problem, ubar, y0=ybar)
    slope = integrate(grid, (pbar + problem.nu * ubar) * h)
    D = np.array([(eval_F(problem, ubar + t * h, y0=ybar) - F0 - t * slope) / (0.5 * t**2)
                  for t in ts])
    Q = Q_explicit(problem, ubar, pbar, h, ybar).Q_explicit
    return SubderivativeTable(ts, D, Q)


# --- one-dimensional window limit ------------------------------------------------------

@dataclass
class WindowLimitStudy:
    n: int
    tau: float
    t: np.ndarray
    values: np.ndarray
    exact: float

    @property
    def relative_error(self) -> np.ndarray:
        return np.abs(self.values - self.exact) / abs(self.exact)

    def to_csv(self) -> str:
        rows = ["t,value,exact,relative_error"]
        rows += [f"{t:.17g},{v:.17g},{self.exact:.17g},{e:.17g}"
                 for t, v, e in zip(self.t, self.values, self.relative_error)]
        return "\n".join(rows) + "\n"


def onedim_lemma_study(n: int = 10_000, t_sequence: Sequence[float] | None = None,
                       tau: float = 0.5) -> WindowLimitStudy:
    """``(1/t^2) int p T`` for ``ybar = sin(pi x)``, ``yt = ybar + t``, ``p = 1``.

    The limit is ``-(1/2) sum_{crossings} 1/|ybar'|``, i.e. ``-1/(pi sqrt(1 - tau^2))``
    for ``0 < tau < 1``.
    """
    from .grid import build_grid

    if not 0 < tau < 1:
        raise ValueError("tau must lie in (0, 1)")
    grid = build_grid((0.0, 1.0), n)
    f = piecewise_linear([tau], [0.0, 1.0])
    ybar = grid.sample(lambda x: np.sin(np.pi * x))
    p = np.ones(grid.size)
    ts = default_t_sequence() if t_sequence is None else np.asarray(t_sequence, dtype=float)
    values = np.array([window_integrals(grid, f, p, ybar, ybar + t)[0] / t**2 for t in ts])
    exact = -1.0 / (np.pi * np.sqrt(1.0 - tau**2))
    return WindowLimitStudy(n, tau, ts, values, exact)

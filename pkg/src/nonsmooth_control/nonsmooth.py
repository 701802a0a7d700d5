"""Continuous, piecewise-C2, monotone nonlinearities and their mollification.

A :class:`PiecewiseSmoothFunction` is given by breakpoints ``tau_1 < ... <
tau_K`` and ``K + 1`` smooth pieces; piece ``i`` is used on the half-open
interval ``(tau_i, tau_{i+1}]`` with ``tau_0 = -inf`` and ``tau_{K+1} = +inf``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import polynomial as P

ArrayFunc = Callable[[np.ndarray], np.ndarray]

CONTINUITY_TOL = 1e-12
SIGMA_TOL = 1e-12
SNAP_TOL = 1e-12
KERNEL_NODES = 64


class BreakpointError(ValueError):
    """A classical derivative was requested exactly at a breakpoint."""


@dataclass(frozen=True)
class Piece:
    """One smooth branch: value, first and second derivative on all of R.

    ``coefficients`` (increasing powers) is set for polynomial pieces and
    enables closed-form mollification.
    """

    value: ArrayFunc
    d1: ArrayFunc
    d2: ArrayFunc
    coefficients: tuple[float, ...] | None = None

    @classmethod
    def polynomial(cls, coefficients: Sequence[float]) -> "Piece":
        """Polynomial piece, coefficients in increasing powers of ``t``."""
        c = np.asarray(coefficients, dtype=float)
        dc, ddc = P.polyder(c, 1), P.polyder(c, 2)
        return cls(lambda t: P.polyval(t, c) + 0.0 * t, lambda t: P.polyval(t, dc) + 0.0 * t,
                   lambda t: P.polyval(t, ddc) + 0.0 * t, tuple(c.tolist()))


def _apply_pieces(funcs, index, t):
    out = np.empty_like(t)
    for i, func in enumerate(funcs):
        mask = index == i
        if np.any(mask):
            out[mask] = np.broadcast_to(func(t[mask]), out[mask].shape)
    return out


class PiecewiseSmoothFunction:
    """Finitely PC2 monotone nonlinearity.

    Parameters
    ----------
    breakpoints : sequence of float
        Strictly increasing breakpoints (may be empty for a smooth ``f``).
    pieces : sequence of Piece
        ``len(breakpoints) + 1`` branches.
    name : str
        Label used in reports.
    """

    def __init__(self, breakpoints: Sequence[float], pieces: Sequence[Piece], name: str = "f"):
        self.breakpoints = np.asarray(breakpoints, dtype=float).ravel()
        self.pieces = tuple(pieces)
        self.name = name
        K = self.breakpoints.size
        if len(self.pieces) != K + 1:
            raise ValueError(f"need {K + 1} pieces for {K} breakpoints")
        if K > 1 and np.any(np.diff(self.breakpoints) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        sig = []
        for i, tau in enumerate(self.breakpoints, start=1):
            left, right = self.pieces[i - 1], self.pieces[i]
            fl, fr = float(left.value(np.array([tau]))[0]), float(right.value(np.array([tau]))[0])
            if abs(fl - fr) > CONTINUITY_TOL * (1.0 + abs(fr)):
                raise ValueError(f"pieces {i - 1} and {i} do not match at tau_{i} = {tau}")
            s = float(left.d1(np.array([tau]))[0] - right.d1(np.array([tau]))[0])
            if abs(s) <= SIGMA_TOL:
                raise ValueError(f"derivative jump at tau_{i} = {tau} vanishes; "
                                 "merge the pieces instead")
            sig.append(s)
        self._sigma = np.array(sig)
        self._check_monotone()

    # -- structure ---------------------------------------------------------

    @property
    def K(self) -> int:
        return self.breakpoints.size

    @property
    def sigmas(self) -> np.ndarray:
        return self._sigma.copy()

    def sigma(self, i: int) -> float:
        """Derivative jump ``f'_{i-1}(tau_i) - f'_i(tau_i)``, ``1 <= i <= K``."""
        if not 1 <= i <= self.K:
            raise IndexError(f"breakpoint index {i} outside 1..{self.K}")
        return float(self._sigma[i - 1])

    def epsilon0(self) -> float:
        """Half-gap margin used for the difference windows: min gap / 4, capped at 1."""
        if self.K <= 1:
            return 1.0
        return float(min(1.0, np.min(np.diff(self.breakpoints)) / 4.0))

    def piece_index(self, t: np.ndarray) -> np.ndarray:
        return np.searchsorted(self.breakpoints, t, side="left")

    def _probe_ranges(self):
        tau = self.breakpoints
        span = max(1.0, float(tau[-1] - tau[0])) if self.K else 1.0
        edges = np.concatenate([[tau[0] - span if self.K else -span], tau,
                                [tau[-1] + span if self.K else span]])
        return list(zip(edges[:-1], edges[1:]))

    def _check_monotone(self):
        for piece, (a, b) in zip(self.pieces, self._probe_ranges()):
            t = np.linspace(a, b, 101)
            if np.any(piece.d1(t) < -1e-12):
                raise ValueError("pieces must be monotonically increasing")

    def slope_bound(self, lo: float, hi: float) -> float:
        """Largest sampled ``f'`` on ``[lo, hi]`` (used as Picard shift)."""
        t = np.linspace(lo, hi, 257)
        return float(np.max(self.derivative(t, strict=False))) if hi >= lo else 0.0

    # -- evaluation --------------------------------------------------------

    def __call__(self, t):
        return self.value(t)

    def value(self, t):
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        out = _apply_pieces([p.value for p in self.pieces], self.piece_index(t_arr), t_arr)
        return out if np.ndim(t) else float(out[0])

    def on_breakpoint(self, t, tol: float = SNAP_TOL) -> np.ndarray:
        """Mask of entries within the snap tolerance of some breakpoint."""
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        if self.K == 0:
            return np.zeros(t_arr.shape, dtype=bool)
        dist = np.abs(t_arr[..., None] - self.breakpoints)
        return np.any(dist <= tol * (1.0 + np.abs(self.breakpoints)), axis=-1)

    def derivative(self, t, strict: bool = True):
        """Classical ``f'`` off the breakpoints.

        With ``strict`` (the default) exact breakpoint hits raise
        :class:`BreakpointError`; otherwise the left piece is used there.
        """
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        if strict and self.K and np.any(np.isin(t_arr, self.breakpoints)):
            raise BreakpointError("f' is undefined at a breakpoint; use dir_deriv or clarke")
        out = _apply_pieces([p.d1 for p in self.pieces], self.piece_index(t_arr), t_arr)
        return out if np.ndim(t) else float(out[0])

    def second_derivative(self, t, strict: bool = True):
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        if strict and self.K and np.any(np.isin(t_arr, self.breakpoints)):
            raise BreakpointError("f'' is undefined at a breakpoint")
        out = _apply_pieces([p.d2 for p in self.pieces], self.piece_index(t_arr), t_arr)
        return out if np.ndim(t) else float(out[0])

    def one_sided_slopes(self, t, tol: float = 0.0):
        """Left and right slopes at ``t``; they differ only at breakpoints.

        Entries within ``tol`` (relative, as in :meth:`on_breakpoint`) of a
        breakpoint are treated as sitting on it.
        """
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        snapped = t_arr.copy()
        if self.K:
            dist = np.abs(t_arr[..., None] - self.breakpoints)
            near = dist <= tol * (1.0 + np.abs(self.breakpoints))
            hit = np.any(near, axis=-1)
            snapped[hit] = self.breakpoints[np.argmax(near[hit], axis=-1)]
        idx = self.piece_index(snapped)
        d1 = [p.d1 for p in self.pieces]
        left = _apply_pieces(d1, idx, snapped)
        at = np.isin(snapped, self.breakpoints)
        right_idx = np.where(at, idx + 1, idx)
        right = _apply_pieces(d1, right_idx, snapped)
        return left, right

    def dir_deriv(self, t, h):
        """Directional derivative ``f'(t; h)``."""
        t_arr, h_arr = np.broadcast_arrays(np.atleast_1d(np.asarray(t, dtype=float)),
                                           np.atleast_1d(np.asarray(h, dtype=float)))
        left, right = self.one_sided_slopes(t_arr)
        out = np.where(h_arr > 0, right * h_arr, np.where(h_arr < 0, left * h_arr, 0.0)) + 0.0
        return out if (np.ndim(t) or np.ndim(h)) else float(out[0])

    def clarke(self, t, tol: float = 0.0):
        """Clarke subdifferential as ``(lower, upper)`` interval endpoints."""
        left, right = self.one_sided_slopes(t, tol)
        lo, hi = np.minimum(left, right), np.maximum(left, right)
        if np.ndim(t):
            return lo, hi
        return float(lo[0]), float(hi[0])

    def mollify(self, eps: float) -> "MollifiedFunction":
        return MollifiedFunction(self, eps)

    def __repr__(self):
        return f"PiecewiseSmoothFunction({self.name!r}, breakpoints={self.breakpoints.tolist()})"


# --- mollifier ------------------------------------------------------------

def bump(s: np.ndarray) -> np.ndarray:
    """Unnormalized kernel ``exp(-1/(1-s^2))`` on (-1, 1), zero elsewhere."""
    s = np.asarray(s, dtype=float)
    inside = np.abs(s) < 1.0
    out = np.zeros_like(s)
    out[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    return out


@lru_cache(maxsize=None)
def kernel_rule(nodes: int = KERNEL_NODES) -> tuple[np.ndarray, np.ndarray, float]:
    """Gauss-Legendre nodes/weights on [-1, 1] and the kernel normalization."""
    xi, w = np.polynomial.legendre.leggauss(nodes)
    mass = float(np.sum(w * bump(xi)))
    return xi, w, mass


def kernel(s: np.ndarray) -> np.ndarray:
    """Normalized symmetric mollifier with support [-1, 1] and unit mass."""
    return bump(s) / kernel_rule()[2]


MOMENT_CELLS = 16384


@lru_cache(maxsize=None)
def _moment_table(degree: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Nodes ``c_j`` on [-1, 1] with ``Phi_k(c_j) = int_{-1}^{c_j} s^k psi(s) ds``
    and ``Phi_k'(c_j) = c_j^k psi(c_j)`` for ``k = 0..degree``."""
    c = np.linspace(-1.0, 1.0, MOMENT_CELLS + 1)
    xi, w = np.polynomial.legendre.leggauss(8)
    half = 0.5 * (c[1] - c[0])
    s = 0.5 * (c[:-1] + c[1:])[:, None] + half * xi[None, :]
    powers = np.arange(degree + 1)
    cell = np.einsum("jq,q,jqk->jk", bump(s), half * w, s[..., None] ** powers)
    phi = np.vstack([np.zeros(degree + 1), np.cumsum(cell, axis=0)])
    # normalize by the table's own mass so Phi_0(1) = 1 to round-off
    mass = phi[-1, 0]
    dphi = bump(c)[:, None] * c[:, None] ** powers
    return c, phi / mass, dphi / mass


def kernel_moments(c: np.ndarray, degree: int) -> np.ndarray:
    """``Phi_k(c) = int_{-1}^c s^k psi(s) ds`` for ``k = 0..degree``, shape ``c.shape + (degree+1,)``.

    Cubic Hermite interpolation of a fine table; the interpolation error is
    below 1e-16.
    """
    nodes, phi, dphi = _moment_table(degree)
    c = np.clip(np.asarray(c, dtype=float), -1.0, 1.0)
    step = nodes[1] - nodes[0]
    j = np.clip(((c + 1.0) / step).astype(int), 0, MOMENT_CELLS - 1)
    th = ((c - nodes[j]) / step)[..., None]
    h00 = (1 + 2 * th) * (1 - th) ** 2
    h10 = th * (1 - th) ** 2
    h01 = th**2 * (3 - 2 * th)
    h11 = th**2 * (th - 1)
    return h00 * phi[j] + h10 * step * dphi[j] + h01 * phi[j + 1] + h11 * step * dphi[j + 1]


class MollifiedFunction:
    """``f_eps(t) = int f(t - eps s) psi(s) ds``.

    Polynomial pieces are convolved in closed form through tabulated kernel
    moments (see :func:`kernel_moments`).  Other pieces, or an explicit
    ``nodes``, use split Gauss-Legendre quadrature: the integration interval
    is cut where ``t - eps s`` crosses a breakpoint, so every sub-rule
    integrates a smooth integrand.  Either way ``f_eps'`` is the convolution
    of the one-sided slopes.
    """

    def __init__(self, base: PiecewiseSmoothFunction, eps: float, nodes: int | None = None):
        if not eps > 0:
            raise ValueError("mollification parameter must be positive")
        self.base = base
        self.eps = float(eps)
        # closed form for polynomial pieces unless a quadrature order is requested
        self.closed_form = nodes is None and all(p.coefficients is not None for p in base.pieces)
        self.nodes = KERNEL_NODES if nodes is None else nodes

    def _split_rule(self, t: np.ndarray):
        xi, w, mass = kernel_rule(self.nodes)
        cuts = np.clip((t[:, None] - self.base.breakpoints[None, :]) / self.eps, -1.0, 1.0)
        cuts = np.sort(cuts, axis=1)
        ends = np.concatenate([-np.ones((t.size, 1)), cuts, np.ones((t.size, 1))], axis=1)
        a, b = ends[:, :-1, None], ends[:, 1:, None]
        s = 0.5 * (a + b) + 0.5 * (b - a) * xi
        weights = 0.5 * (b - a) * w * bump(s) / mass
        args = t[:, None, None] - self.eps * s
        # each sub-interval maps into a single piece; identify it by its midpoint
        piece = self.base.piece_index(t[:, None] - 0.5 * self.eps * (ends[:, :-1] + ends[:, 1:]))
        return args, weights, piece

    def _eval_polynomial(self, t_arr: np.ndarray, attrs) -> list[np.ndarray]:
        """Closed form for polynomial pieces.

        Piece ``i`` is active for ``s`` in ``[a_i, b_i]`` with
        ``a_i = (t - tau_{i+1}) / eps`` and ``b_i = (t - tau_i) / eps`` clipped
        to [-1, 1]; expanding ``P_i(t - eps s)`` in powers of ``s`` turns the
        convolution into kernel moments over ``[a_i, b_i]``.
        """
        tau = self.base.breakpoints
        ext = np.concatenate([[-np.inf], tau, [np.inf]])
        coeffs = [np.asarray(p.coefficients, dtype=float) for p in self.base.pieces]
        degree = max(c.size for c in coeffs) - 1
        with np.errstate(invalid="ignore"):
            ends = np.clip((t_arr[:, None] - ext[None, ::-1]) / self.eps, -1.0, 1.0)
        # column m holds (t - tau_{K+1-m}) / eps with tau_0 = -inf, tau_{K+1} = inf
        moments = kernel_moments(ends, degree)
        K = tau.size
        outs = []
        for attr in attrs:
            out = np.zeros_like(t_arr)
            for i, c in enumerate(coeffs):
                c = P.polyder(c, 1) if attr == "d1" else c
                lo, hi = K - i, K + 1 - i
                window = moments[:, hi, :] - moments[:, lo, :]
                deriv = c
                factor = 1.0
                for k in range(c.size):
                    if k:
                        deriv = P.polyder(deriv)
                        factor *= -self.eps / k
                    if not np.any(deriv):
                        break
                    out += factor * P.polyval(t_arr, deriv) * window[:, k]
            if attr == "d1":
                # f is monotone, so f_eps' >= 0; drop round-off below zero
                out = np.maximum(out, 0.0)
            outs.append(out)
        return outs

    def _eval(self, t, attrs):
        """Convolutions of the piece attributes ``attrs`` sharing one quadrature."""
        t_arr = np.atleast_1d(np.asarray(t, dtype=float)).ravel()
        if self.closed_form:
            outs = self._eval_polynomial(t_arr, attrs)
            if np.ndim(t):
                return [out.reshape(np.shape(t)) for out in outs]
            return [float(out[0]) for out in outs]
        outs = [np.empty_like(t_arr) for _ in attrs]
        tau = self.base.breakpoints
        if tau.size:
            near = np.min(np.abs(t_arr[:, None] - tau[None, :]), axis=1) < self.eps
        else:
            near = np.zeros(t_arr.shape, dtype=bool)
        far = np.flatnonzero(~near)
        if far.size:
            # kernel support free of breakpoints: one smooth rule, one piece per node
            xi, w, mass = kernel_rule(self.nodes)
            weights = w * bump(xi) / mass
            tf = t_arr[far]
            piece = self.base.piece_index(tf)
            for i, p in enumerate(self.base.pieces):
                sel = piece == i
                if np.any(sel):
                    args = tf[sel, None] - self.eps * xi[None, :]
                    for out, attr in zip(outs, attrs):
                        out[far[sel]] = np.asarray(getattr(p, attr)(args)).reshape(args.shape) @ weights
        if np.any(near):
            args, weights, piece = self._split_rule(t_arr[near])
            vals = [np.zeros_like(args) for _ in attrs]
            for i, p in enumerate(self.base.pieces):
                sel = piece == i
                if np.any(sel):
                    sub = args[sel]
                    for v, attr in zip(vals, attrs):
                        v[sel] = np.asarray(getattr(p, attr)(sub)).reshape(sub.shape)
            for out, v in zip(outs, vals):
                out[near] = np.sum(weights * v, axis=(1, 2))
        if np.ndim(t):
            return [out.reshape(np.shape(t)) for out in outs]
        return [float(out[0]) for out in outs]

    def __call__(self, t):
        return self.value(t)

    def value(self, t):
        return self._eval(t, ("value",))[0]

    def derivative(self, t):
        return self._eval(t, ("d1",))[0]

    def value_and_derivative(self, t):
        """``(f_eps(t), f_eps'(t))`` from a single quadrature pass."""
        value, slope = self._eval(t, ("value", "d1"))
        return value, slope

    def slope_bound(self, lo: float, hi: float) -> float:
        return self.base.slope_bound(lo - self.eps, hi + self.eps)

    def __repr__(self):
        return f"MollifiedFunction({self.base.name!r}, eps={self.eps:g})"


# --- factories --------------------------------------------------------------

def max_function() -> PiecewiseSmoothFunction:
    """``f(t) = max(t, 0)``: one breakpoint at 0, slopes 0 and 1."""
    return PiecewiseSmoothFunction([0.0], [Piece.polynomial([0.0]), Piece.polynomial([0.0, 1.0])],
                                   name="max")


def piecewise_linear(breakpoints: Sequence[float], slopes: Sequence[float],
                     value_at_first: float = 0.0) -> PiecewiseSmoothFunction:
    """Continuous piecewise-linear ``f`` with ``f(tau_1) = value_at_first``."""
    tau = np.asarray(breakpoints, dtype=float)
    slopes = np.asarray(slopes, dtype=float)
    if slopes.size != tau.size + 1:
        raise ValueError("need one slope per piece")
    if tau.size == 0:
        return PiecewiseSmoothFunction([], [Piece.polynomial([value_at_first, slopes[0]])],
                                       name="piecewise-linear")
    vals = [value_at_first]
    for i in range(1, tau.size):
        vals.append(vals[-1] + slopes[i] * (tau[i] - tau[i - 1]))
    pieces = [Piece.polynomial([vals[0] - slopes[0] * tau[0], slopes[0]])]
    for i in range(1, tau.size + 1):
        pieces.append(Piece.polynomial([vals[i - 1] - slopes[i] * tau[i - 1], slopes[i]]))
    return PiecewiseSmoothFunction(tau, pieces, name="piecewise-linear")


def piecewise_polynomial(breakpoints: Sequence[float],
                         coefficients: Sequence[Sequence[float]],
                         name: str = "piecewise-cubic") -> PiecewiseSmoothFunction:
    """Pieces given as polynomial coefficients in increasing powers of ``t``."""
    return PiecewiseSmoothFunction(breakpoints, [Piece.polynomial(c) for c in coefficients],
                                   name=name)


# --- functional interface ---------------------------------------------------

def eval_f(f: PiecewiseSmoothFunction, t):
    return f.value(t)


def eval_fprime_offbreak(f: PiecewiseSmoothFunction, t):
    return f.derivative(t, strict=True)


def eval_fsecond_offbreak(f: PiecewiseSmoothFunction, t):
    return f.second_derivative(t, strict=True)


def dir_deriv(f: PiecewiseSmoothFunction, t, h):
    return f.dir_deriv(t, h)


def sigma(f: PiecewiseSmoothFunction, i: int) -> float:
    return f.sigma(i)


def clarke(f: PiecewiseSmoothFunction, t):
    return f.clarke(t)


def epsilon0(f: PiecewiseSmoothFunction) -> float:
    return f.epsilon0()


def mollify(f: PiecewiseSmoothFunction, eps: float) -> MollifiedFunction:
    return f.mollify(eps)

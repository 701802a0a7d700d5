"""Level sets ``{y = tau}`` of nodal fields with gradient weights.

In 1D a level set is a list of crossing points found from sign changes
between adjacent nodes and located by a quadratic through three nodes.  In
2D it is the polyline produced by marching squares on the node lattice,
with saddle cells resolved by the value of the bilinear interpolant at its
saddle point (asymptotic decider).  Boundary nodes carry the Dirichlet
value 0, so for ``tau = 0`` pieces lying on the boundary itself are dropped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid, gradient_magnitude

GRADIENT_FLOOR = 1e-3


class GradientFloorError(ValueError):
    """A level-set point has a gradient below the admissible floor."""


@dataclass
class LevelSet:
    """Discrete level set with interpolation stencils.

    Attributes
    ----------
    tau : float
    index : int or None
        1-based breakpoint index the level belongs to, if any.
    points : ndarray, shape (m, dim)
        Crossing points (1D) or segment midpoints (2D).
    gradients : ndarray, shape (m,)
        ``|grad y|`` at the points.
    weights : ndarray, shape (m,)
        Hausdorff measure carried by each point: 1 in 1D, segment length in 2D.
    segments : ndarray, shape (m, 2, 2) or None
        Segment endpoints in 2D.
    """

    tau: float
    index: int | None
    points: np.ndarray
    gradients: np.ndarray
    weights: np.ndarray
    segments: np.ndarray | None
    stencil_nodes: np.ndarray
    stencil_coeffs: np.ndarray
    grid: Grid

    @property
    def measure(self) -> float:
        return float(np.sum(self.weights))

    @property
    def size(self) -> int:
        return int(self.weights.size)

    def interpolate(self, values: np.ndarray) -> np.ndarray:
        """Values of a nodal field at the level-set points (boundary value 0)."""
        padded = self.grid.padded(values).ravel()
        if self.size == 0:
            return np.zeros(0)
        return np.sum(padded[self.stencil_nodes] * self.stencil_coeffs, axis=1)

    def surface_integral(self, integrand: np.ndarray) -> float:
        """``int_{y = tau} g / |grad y| dH`` for nodal ``g``."""
        if self.size == 0:
            return 0.0
        return float(np.sum(self.weights * self.interpolate(integrand) / self.gradients))

    def boundary_distance(self) -> float:
        """Smallest distance from a level-set point to the domain boundary."""
        if self.size == 0:
            return np.inf
        pts = self.points if self.segments is None else self.segments.reshape(-1, self.grid.dim)
        low, high = np.asarray(self.grid.low), np.asarray(self.grid.high)
        return float(np.min(np.minimum(pts - low, high - pts)))


def _lagrange(x: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    """Quadratic Lagrange basis at ``x`` for rows of three ``nodes``."""
    x0, x1, x2 = nodes[:, 0], nodes[:, 1], nodes[:, 2]
    l0 = (x - x1) * (x - x2) / ((x0 - x1) * (x0 - x2))
    l1 = (x - x0) * (x - x2) / ((x1 - x0) * (x1 - x2))
    l2 = (x - x0) * (x - x1) / ((x2 - x0) * (x2 - x1))
    return np.stack([l0, l1, l2], axis=1)


def _extract_1d(grid: Grid, values: np.ndarray, tau: float):
    x = grid.padded_axes()[0]
    s = grid.padded(values) - tau
    k = np.flatnonzero((s[:-1] < 0) != (s[1:] < 0))
    if k.size == 0:
        empty = np.zeros(0)
        return empty.reshape(0, 1), empty, np.zeros((0, 3), dtype=int), np.zeros((0, 3))
    lin = x[k] + s[k] / (s[k] - s[k + 1]) * (x[k + 1] - x[k])
    # third node on the side of the linear root estimate, kept inside the padded range
    mid = 0.5 * (x[k] + x[k + 1])
    start = np.where(lin < mid, k - 1, k)
    start = np.clip(start, 0, x.size - 3)
    idx = start[:, None] + np.arange(3)[None, :]
    xs, ss = x[idx], s[idx]
    # quadratic through the three nodes, root inside [x_k, x_k+1]
    c = np.array([np.polyfit(xs[j] - xs[j, 1], ss[j], 2) for j in range(k.size)])
    roots = lin.copy()
    for j in range(k.size):
        a, b, c0 = c[j]
        lo, hi = x[k[j]] - xs[j, 1], x[k[j] + 1] - xs[j, 1]
        cand = np.roots([a, b, c0]) if abs(a) > 1e-14 * (abs(b) + abs(c0)) else np.array([-c0 / b])
        cand = np.real(cand[np.abs(np.imag(cand)) < 1e-14])
        cand = cand[(cand >= lo - 1e-14) & (cand <= hi + 1e-14)]
        if cand.size:
            roots[j] = xs[j, 1] + cand[np.argmin(np.abs(cand - (lin[j] - xs[j, 1])))]
    slope = np.abs(2 * c[:, 0] * (roots - xs[:, 1]) + c[:, 1])
    # roots on the boundary itself (the Dirichlet value hits tau) are not part of the level set
    edge = 1e-9 * (x[1] - x[0])
    keep = (roots > x[0] + edge) & (roots < x[-1] - edge)
    coeffs = _lagrange(roots, xs)
    return roots[keep, None], slope[keep], idx[keep], coeffs[keep]


# edge k joins corner k and corner k+1 in the cycle (0,0) (1,0) (1,1) (0,1)
_CORNERS = np.array([[0, 0], [1, 0], [1, 1], [0, 1]])


def _extract_2d(grid: Grid, values: np.ndarray, tau: float):
    (x1, x2) = grid.padded_axes()
    h1, h2 = grid.h
    s = grid.padded(values) - tau
    m1, m2 = s.shape
    c = np.stack([s[:-1, :-1], s[1:, :-1], s[1:, 1:], s[:-1, 1:]], axis=-1)  # (m1-1, m2-1, 4)
    pos = c > 0
    crossed = pos != np.roll(pos, -1, axis=-1)
    count = crossed.sum(axis=-1)

    def edge_point(i, j, e):
        a, b = c[i, j, e], c[i, j, (e + 1) % 4]
        frac = a / (a - b)
        ca, cb = _CORNERS[e], _CORNERS[(e + 1) % 4]
        return ca + frac[..., None] * (cb - ca)

    pairs = []  # (i, j, edge_a, edge_b)
    i2, j2 = np.nonzero(count == 2)
    if i2.size:
        edges = np.argsort(~crossed[i2, j2], axis=-1, kind="stable")[:, :2]
        pairs.append(np.column_stack([i2, j2, edges]))
    i4, j4 = np.nonzero(count == 4)
    for i, j in zip(i4, j4):
        a00, a10, a11, a01 = c[i, j]
        denom = a00 + a11 - a10 - a01
        centre = (a00 * a11 - a10 * a01) / denom if denom != 0 else 0.25 * np.sum(c[i, j])
        # isolate the corners whose sign differs from the saddle value
        lonely = [k for k in range(4) if (c[i, j, k] > 0) != (centre > 0)]
        for k in lonely:
            pairs.append(np.array([[i, j, (k - 1) % 4, k]]))
    if not pairs:
        return (np.zeros((0, 2)), np.zeros(0), np.zeros(0), np.zeros((0, 2, 2)),
                np.zeros((0, 4), dtype=int), np.zeros((0, 4)))
    pairs = np.concatenate(pairs).astype(int)
    ii, jj, ea, eb = pairs.T
    pa = edge_point(ii, jj, ea)
    pb = edge_point(ii, jj, eb)
    origin = np.column_stack([x1[ii], x2[jj]])
    scale = np.array([h1, h2])
    A = origin + pa * scale
    B = origin + pb * scale
    on_boundary = lambda P: ((np.isclose(P[:, 0], x1[0]) | np.isclose(P[:, 0], x1[-1]))
                             | (np.isclose(P[:, 1], x2[0]) | np.isclose(P[:, 1], x2[-1])))
    length = np.linalg.norm(B - A, axis=1)
    keep = ~(on_boundary(A) & on_boundary(B)) & (length > 0)
    mid_local = 0.5 * (pa + pb)
    xi, eta = mid_local[:, 0], mid_local[:, 1]
    cc = c[ii, jj]
    gx = ((1 - eta) * (cc[:, 1] - cc[:, 0]) + eta * (cc[:, 2] - cc[:, 3])) / h1
    gy = ((1 - xi) * (cc[:, 3] - cc[:, 0]) + xi * (cc[:, 2] - cc[:, 1])) / h2
    grad = np.hypot(gx, gy)
    nodes = np.column_stack([ii * m2 + jj, (ii + 1) * m2 + jj, (ii + 1) * m2 + jj + 1, ii * m2 + jj + 1])
    coeffs = np.column_stack([(1 - xi) * (1 - eta), xi * (1 - eta), xi * eta, (1 - xi) * eta])
    segs = np.stack([A, B], axis=1)
    return (0.5 * (A + B))[keep], grad[keep], length[keep], segs[keep], nodes[keep], coeffs[keep]


def gradient_floor(grid: Grid, values: np.ndarray, relative: float = GRADIENT_FLOOR) -> float:
    """Admissible lower bound for ``|grad y|`` on level sets."""
    return relative * float(np.max(gradient_magnitude(grid, values), initial=0.0))


def extract_level_set(grid: Grid, values: np.ndarray, tau: float, index: int | None = None,
                      check_gradient: bool = True,
                      floor: float | None = None) -> LevelSet:
    """Extract ``{values = tau}``.

    Raises
    ------
    GradientFloorError
        If ``check_gradient`` and some point has ``|grad y|`` at or below the
        floor (default ``1e-3 * max |grad y|``).
    """
    values = grid.check(values)
    if grid.dim == 1:
        pts, grad, nodes, coeffs = _extract_1d(grid, values, float(tau))
        weights, segs = np.ones(grad.size), None
    else:
        pts, grad, weights, segs, nodes, coeffs = _extract_2d(grid, values, float(tau))
    ls = LevelSet(float(tau), index, pts, grad, weights, segs, nodes, coeffs, grid)
    if check_gradient and ls.size:
        floor = gradient_floor(grid, values) if floor is None else floor
        if np.min(grad) <= floor:
            raise GradientFloorError(
                f"|grad y| = {np.min(grad):.3e} on the level set y = {tau:g} "
                f"is below the floor {floor:.3e}")
    return ls

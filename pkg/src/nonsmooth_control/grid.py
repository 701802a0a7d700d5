"""Structured grids on intervals and rectangles, finite-difference elliptic
operators with homogeneous Dirichlet data, nodal quadrature and norms.

Fields are plain 1-D numpy arrays holding one value per interior node, in
row-major (C) order of the interior index tuple.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp


class GridMismatchError(ValueError):
    """Raised when a field does not live on the grid it is used with."""


@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid of an interval (dim 1) or a rectangle (dim 2).

    Only interior nodes carry unknowns; boundary nodes are implicit zeros.
    """

    low: tuple[float, ...]
    high: tuple[float, ...]
    n: tuple[int, ...]

    @property
    def dim(self) -> int:
        return len(self.n)

    @property
    def h(self) -> tuple[float, ...]:
        return tuple((b - a) / (m + 1) for a, b, m in zip(self.low, self.high, self.n))

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.n)

    @property
    def size(self) -> int:
        return int(np.prod(self.n))

    @property
    def weight(self) -> float:
        """Quadrature weight carried by every interior node."""
        return float(np.prod(self.h))

    def axes(self) -> list[np.ndarray]:
        """Interior node coordinates per axis."""
        return [a + (b - a) * np.arange(1, m + 1) / (m + 1)
                for a, b, m in zip(self.low, self.high, self.n)]

    def padded_axes(self) -> list[np.ndarray]:
        """Node coordinates per axis including the two boundary nodes."""
        return [a + (b - a) * np.arange(0, m + 2) / (m + 1)
                for a, b, m in zip(self.low, self.high, self.n)]

    def coordinates(self) -> tuple[np.ndarray, ...]:
        """Flattened coordinate arrays, one per axis, in interior order."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return tuple(m.ravel() for m in mesh)

    def check(self, values: np.ndarray, name: str = "field") -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if values.shape != (self.size,):
            raise GridMismatchError(
                f"{name} has shape {values.shape}, grid expects ({self.size},)")
        return values

    def reshape(self, values: np.ndarray) -> np.ndarray:
        return self.check(values).reshape(self.shape)

    def padded(self, values: np.ndarray, boundary: float = 0.0) -> np.ndarray:
        """Nodal array of shape ``n + 2`` per axis with the boundary filled in."""
        return np.pad(self.reshape(values), 1, constant_values=boundary)

    def sample(self, func: Callable[..., np.ndarray]) -> np.ndarray:
        """Evaluate ``func(x1[, x2])`` at the interior nodes."""
        values = func(*self.coordinates())
        return np.broadcast_to(np.asarray(values, dtype=float), (self.size,)).copy()


def build_grid(bounds: Sequence[tuple[float, float]] | tuple[float, float],
               n: int | Sequence[int]) -> Grid:
    """Build a uniform grid.

    ``bounds`` is either one ``(low, high)`` pair (an interval) or a sequence
    of pairs, one per axis; ``n`` is the interior node count per axis.
    """
    if np.ndim(bounds) == 1:
        bounds = [tuple(bounds)]
    bounds = [tuple(float(v) for v in b) for b in bounds]
    n = (int(n),) * len(bounds) if np.ndim(n) == 0 else tuple(int(m) for m in n)
    if len(bounds) not in (1, 2):
        raise ValueError("only dimensions 1 and 2 are supported")
    if len(n) != len(bounds):
        raise ValueError("need one node count per axis")
    for (a, b), m in zip(bounds, n):
        if not (np.isfinite(a) and np.isfinite(b) and a < b):
            raise ValueError(f"degenerate axis bounds ({a}, {b})")
        if m < 2:
            raise ValueError(f"need at least 2 interior nodes per axis, got {m}")
    return Grid(tuple(b[0] for b in bounds), tuple(b[1] for b in bounds), n)


@dataclass(frozen=True)
class EllipticOperator:
    """Assembled ``A = -div(a grad .) + a0`` on the interior nodes."""

    grid: Grid
    matrix: sp.csr_matrix
    diffusion: object
    reaction: np.ndarray
    ellipticity: float
    laplacian: sp.csr_matrix = field(repr=False)

    def __matmul__(self, values: np.ndarray) -> np.ndarray:
        return self.matrix @ values

    def with_diagonal(self, chi: np.ndarray) -> sp.csc_matrix:
        return (self.matrix + sp.diags(chi)).tocsc()


def _second_difference(m: int, h: float) -> sp.csr_matrix:
    return sp.diags([-np.ones(m - 1), 2.0 * np.ones(m), -np.ones(m - 1)],
                    [-1, 0, 1], format="csr") / h**2


def _variable_1d(grid: Grid, diffusion: Callable[[np.ndarray], np.ndarray]
                 ) -> tuple[sp.csr_matrix, float]:
    (h,) = grid.h
    x = grid.padded_axes()[0]
    mid = 0.5 * (x[:-1] + x[1:])
    a = np.broadcast_to(np.asarray(diffusion(mid), dtype=float), mid.shape)
    if np.any(a <= 0):
        raise ValueError("diffusion coefficient must be positive")
    main = (a[:-1] + a[1:]) / h**2
    off = -a[1:-1] / h**2
    return sp.diags([off, main, off], [-1, 0, 1], format="csr"), float(a.min())


def assemble_operator(grid: Grid, diffusion=1.0, reaction=0.0) -> EllipticOperator:
    """Assemble the centered finite-difference matrix of the elliptic operator.

    Parameters
    ----------
    grid : Grid
    diffusion : float, callable or (2, 2) array
        Scalar multiple of the identity, a positive function of ``x`` (1D
        only, evaluated at cell midpoints), or a constant symmetric positive
        definite matrix (2D).
    reaction : float or array
        Nonnegative zero-order coefficient, nodewise; enters diagonally.
    """
    a0 = np.broadcast_to(np.asarray(reaction, dtype=float), (grid.size,)).copy()
    if np.any(a0 < 0):
        raise ValueError("reaction coefficient a0 must be nonnegative")

    lap_axes = [_second_difference(m, h) for m, h in zip(grid.n, grid.h)]
    if grid.dim == 1:
        laplacian = lap_axes[0]
    else:
        i1, i2 = sp.identity(grid.n[0]), sp.identity(grid.n[1])
        laplacian = (sp.kron(lap_axes[0], i2) + sp.kron(i1, lap_axes[1])).tocsr()

    if callable(diffusion):
        if grid.dim != 1:
            raise ValueError("variable diffusion is supported in 1D only")
        stiff, ellipticity = _variable_1d(grid, diffusion)
    elif np.ndim(diffusion) == 0:
        if diffusion <= 0:
            raise ValueError("diffusion coefficient must be positive")
        stiff, ellipticity = float(diffusion) * laplacian, float(diffusion)
    else:
        a = np.asarray(diffusion, dtype=float)
        if grid.dim != 2 or a.shape != (2, 2):
            raise ValueError("matrix diffusion must be 2x2 on a 2D grid")
        if not np.allclose(a, a.T):
            raise ValueError("diffusion matrix must be symmetric")
        eig = np.linalg.eigvalsh(a)
        if eig[0] <= 0:
            raise ValueError("diffusion matrix must be positive definite")
        ellipticity = float(eig[0])
        h1, h2 = grid.h
        i1, i2 = sp.identity(grid.n[0]), sp.identity(grid.n[1])
        stiff = a[0, 0] * sp.kron(lap_axes[0], i2) + a[1, 1] * sp.kron(i1, lap_axes[1])
        if a[0, 1] != 0.0:
            c1 = sp.diags([-np.ones(grid.n[0] - 1), np.ones(grid.n[0] - 1)], [-1, 1]) / (2 * h1)
            c2 = sp.diags([-np.ones(grid.n[1] - 1), np.ones(grid.n[1] - 1)], [-1, 1]) / (2 * h2)
            # -2 a12 d1 d2 with centered first differences; symmetric since c1, c2 are skew
            stiff = stiff - 2.0 * a[0, 1] * sp.kron(c1, c2)
        stiff = stiff.tocsr()

    matrix = (stiff + sp.diags(a0)).tocsr()
    matrix.sort_indices()
    return EllipticOperator(grid, matrix, diffusion, a0, ellipticity, laplacian.tocsr())


def integrate(grid: Grid, values: np.ndarray) -> float:
    """Nodal (mass-lumped) quadrature; boundary nodes carry zero values."""
    return grid.weight * float(np.sum(grid.check(values)))


def inner(grid: Grid, u: np.ndarray, v: np.ndarray) -> float:
    return grid.weight * float(np.dot(grid.check(u), grid.check(v)))


def norm(grid: Grid, values: np.ndarray, which: str = "L2") -> float:
    """``L2``, ``Linf`` or ``H10`` norm of a nodal field."""
    values = grid.check(values)
    if which == "L2":
        return float(np.sqrt(grid.weight * np.dot(values, values)))
    if which == "Linf":
        return float(np.max(np.abs(values))) if values.size else 0.0
    if which == "H10":
        _, lap = _laplacian_cache(grid)
        return float(np.sqrt(grid.weight * np.dot(values, lap @ values)))
    raise ValueError(f"unknown norm {which!r}")


_LAPLACIANS: dict[Grid, tuple[Grid, sp.csr_matrix]] = {}


def _laplacian_cache(grid: Grid):
    if grid not in _LAPLACIANS:
        _LAPLACIANS[grid] = (grid, assemble_operator(grid).laplacian)
    return _LAPLACIANS[grid]


def gradient_magnitude(grid: Grid, values: np.ndarray) -> np.ndarray:
    """|grad y| at interior nodes by centered differences (boundary = 0)."""
    padded = grid.padded(values)
    parts = np.gradient(padded, *grid.h, edge_order=2)
    if grid.dim == 1:
        parts = [parts]
    inner_slice = (slice(1, -1),) * grid.dim
    return np.sqrt(sum(p[inner_slice] ** 2 for p in parts)).ravel()


# --- text serialization -------------------------------------------------

def format_grid_function(grid: Grid, values: np.ndarray) -> str:
    values = grid.check(values)
    header = " ".join(["grid", str(grid.dim)]
                      + [repr(float(v)) for v in grid.low]
                      + [repr(float(v)) for v in grid.high]
                      + [str(m) for m in grid.n])
    body = "\n".join(f"{v:.17g}" for v in values)
    return header + "\n" + body + "\n"


def write_grid_function(path: str | Path, grid: Grid, values: np.ndarray) -> None:
    Path(path).write_text(format_grid_function(grid, values))


def parse_grid_function(text: str) -> tuple[Grid, np.ndarray]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty grid function file")
    head = lines[0].split()
    if head[0] != "grid":
        raise ValueError("grid function file must start with a 'grid' header")
    dim = int(head[1])
    if len(head) != 2 + 3 * dim:
        raise ValueError("malformed grid header")
    low = [float(v) for v in head[2:2 + dim]]
    high = [float(v) for v in head[2 + dim:2 + 2 * dim]]
    n = [int(v) for v in head[2 + 2 * dim:]]
    grid = build_grid(list(zip(low, high)), n)
    values = np.array([float(v) for v in lines[1:]])
    return grid, grid.check(values, "file values")


def read_grid_function(path: str | Path) -> tuple[Grid, np.ndarray]:
    return parse_grid_function(Path(path).read_text())

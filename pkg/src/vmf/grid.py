"""Cartesian grids, discrete Laplacians and Poisson solves.

Three domains are supported: an axis-aligned rectangle and the unit disk,
both with homogeneous Dirichlet data, and a flat torus. The disk uses
Shortley-Weller cut-cell stencils on a square lattice; the torus is solved
spectrally, which is exact for the periodic 5-point operator.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Literal, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from numpy.typing import NDArray

FloatArray = NDArray[np.float64]

MIN_N = 4
# Cut-cell arms shorter than this fraction of h are absorbed into the boundary.
DEGENERATE_ARM = 1e-3


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class Rectangle:
    width: float = 1.0
    height: float = 1.0

    def __post_init__(self) -> None:
        if not (self.width > 0 and self.height > 0):
            raise GridError("rectangle sides must be positive")

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def diameter(self) -> float:
        return float(np.hypot(self.width, self.height))

    def boundary_distance(self, p: FloatArray) -> FloatArray:
        p = np.atleast_2d(p)
        return np.minimum.reduce([p[:, 0], self.width - p[:, 0], p[:, 1], self.height - p[:, 1]])


@dataclass(frozen=True)
class UnitDisk:
    @property
    def area(self) -> float:
        return np.pi

    @property
    def diameter(self) -> float:
        return 2.0

    def boundary_distance(self, p: FloatArray) -> FloatArray:
        p = np.atleast_2d(p)
        return 1.0 - np.hypot(p[:, 0], p[:, 1])


@dataclass(frozen=True)
class FlatTorus:
    period_x: float = 1.0
    period_y: float = 1.0

    def __post_init__(self) -> None:
        if not (self.period_x > 0 and self.period_y > 0):
            raise GridError("torus periods must be positive")

    @property
    def area(self) -> float:
        return self.period_x * self.period_y

    def boundary_distance(self, p: FloatArray) -> FloatArray:
        return np.full(np.atleast_2d(p).shape[0], np.inf)


Domain = Union[Rectangle, UnitDisk, FlatTorus]


def is_dirichlet(domain: Domain) -> bool:
    return not isinstance(domain, FlatTorus)


# ---------------------------------------------------------------------------
# exact area of (axis-aligned box) ∩ (disk)


def _chord_primitive(x: FloatArray) -> FloatArray:
    # integral of sqrt(1 - s^2) ds from -1 to x, x in [-1, 1]
    x = np.clip(x, -1.0, 1.0)
    return 0.5 * (x * np.sqrt(1.0 - x * x) + np.arcsin(x)) + 0.25 * np.pi


def _corner_area(a: FloatArray, b: FloatArray) -> FloatArray:
    """Area of {x^2 + y^2 < 1, x < a, y < b}, vectorized."""
    a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
    a = np.clip(a, -1.0, 1.0)
    bc = np.clip(b, -1.0, 1.0)
    c = np.sqrt(1.0 - bc * bc)
    S = _chord_primitive

    def seg(lo, hi, f):
        hi = np.maximum(hi, lo)
        return f(lo, hi)

    # integrand: 2 s(x) where s <= b, b + s(x) where s > |b| region, 0 elsewhere
    two_s = lambda lo, hi: 2.0 * (S(hi) - S(lo))
    b_plus_s = lambda lo, hi: bc * (hi - lo) + (S(hi) - S(lo))
    pos = (
        seg(-1.0, np.minimum(a, -c), two_s)
        + seg(-c, np.minimum(a, c), b_plus_s)
        + seg(c, np.minimum(a, 1.0), two_s)
    )
    neg = seg(-c, np.minimum(a, c), b_plus_s)
    out = np.where(bc >= 0.0, pos, neg)
    out = np.where(b >= 1.0, 2.0 * (S(a) - S(-1.0)), out)
    return np.where(b <= -1.0, 0.0, out)


def box_disk_area(x0, x1, y0, y1, center=(0.0, 0.0), radius: float = 1.0) -> FloatArray:
    """Exact area of [x0, x1] x [y0, y1] intersected with a disk."""
    cx, cy = center
    r = float(radius)
    X0, X1 = (np.asarray(x0) - cx) / r, (np.asarray(x1) - cx) / r
    Y0, Y1 = (np.asarray(y0) - cy) / r, (np.asarray(y1) - cy) / r
    A = _corner_area(X1, Y1) - _corner_area(X0, Y1) - _corner_area(X1, Y0) + _corner_area(X0, Y0)
    return np.maximum(A, 0.0) * r * r


# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Grid:
    """Lattice discretization of a domain.

    ``nodes`` holds the unknowns' coordinates, ``ij`` their integer lattice
    indices (coordinates are ``ij * h`` plus the domain offset), ``weights``
    the quadrature weights used by :func:`integrate`. On the disk ``arms``
    holds the (east, west, north, south) stencil arm lengths.
    """

    domain: Domain
    n: int
    h: float
    nodes: FloatArray
    ij: NDArray[np.int64]
    weights: FloatArray
    arms: FloatArray
    shape: tuple[int, int]
    index: NDArray[np.int64] = field(repr=False)
    stencil: Literal["shortley-weller", "symmetric"] = "shortley-weller"

    @property
    def node_count(self) -> int:
        return self.nodes.shape[0]

    @property
    def x(self) -> FloatArray:
        return self.nodes[:, 0]

    @property
    def y(self) -> FloatArray:
        return self.nodes[:, 1]

    @property
    def is_torus(self) -> bool:
        return isinstance(self.domain, FlatTorus)

    @property
    def origin(self) -> tuple[float, float]:
        if isinstance(self.domain, UnitDisk):
            return (-(self.shape[0] // 2) * self.h, -(self.shape[1] // 2) * self.h)
        return (0.0, 0.0)

    def check(self, u) -> FloatArray:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.node_count,):
            raise GridError(f"field of shape {u.shape} does not live on a grid with {self.node_count} nodes")
        return u

    def node_at(self, i: int, j: int) -> int:
        """Node index for lattice position (i, j), or -1 if not an unknown."""
        if self.is_torus:
            i %= self.shape[0]
            j %= self.shape[1]
        elif not (0 <= i < self.shape[0] and 0 <= j < self.shape[1]):
            return -1
        return int(self.index[i, j])

    def nearest_node(self, p) -> int:
        p = np.asarray(p, float)
        d = self.nodes - p
        if self.is_torus:
            L = np.array([self.domain.period_x, self.domain.period_y])
            d -= L * np.round(d / L)
        return int(np.argmin(np.einsum("ij,ij->i", d, d)))

    def to_array(self, u, fill: float = 0.0) -> FloatArray:
        """Scatter a field into a 2-D lattice array (index [i, j] ~ (x, y))."""
        out = np.full(self.shape, fill)
        out[self.ij[:, 0], self.ij[:, 1]] = self.check(u)
        return out

    @cached_property
    def laplacian(self) -> sp.csr_matrix:
        """Sparse Δ_h (negative semi-definite convention)."""
        return _assemble_laplacian(self)

    @cached_property
    def _dirichlet_lu(self):
        return spla.splu((-self.laplacian).tocsc())

    @cached_property
    def _torus_symbol(self) -> FloatArray:
        nx, ny = self.shape
        kx = np.sin(np.pi * np.arange(nx) / nx) ** 2
        ky = np.sin(np.pi * np.arange(ny) / ny) ** 2
        sym = 4.0 / self.h**2 * (kx[:, None] + ky[None, :])
        sym[0, 0] = 1.0
        return sym


def build_grid(domain: Domain, n: int, stencil: str = "shortley-weller") -> Grid:
    """Discretize ``domain`` with ``n`` cells along its largest extent.

    On the unit disk the spacing is ``h = 1 / n`` (``n`` cells per radius).
    """
    if int(n) != n or n < MIN_N:
        raise GridError(f"grid resolution n must be an integer >= {MIN_N}, got {n}")
    if stencil not in ("shortley-weller", "symmetric"):
        raise GridError(f"unknown stencil {stencil!r}")
    n = int(n)
    if isinstance(domain, UnitDisk):
        return _build_disk(domain, n, stencil)
    if isinstance(domain, Rectangle):
        h = max(domain.width, domain.height) / n
        nx, ny = _cells(domain.width, h), _cells(domain.height, h)
        ii, jj = np.meshgrid(np.arange(1, nx), np.arange(1, ny), indexing="ij")
        shape = (nx + 1, ny + 1)
    elif isinstance(domain, FlatTorus):
        h = max(domain.period_x, domain.period_y) / n
        nx, ny = _cells(domain.period_x, h), _cells(domain.period_y, h)
        ii, jj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
        shape = (nx, ny)
    else:
        raise GridError(f"unsupported domain {domain!r}")
    ij = np.column_stack([ii.ravel(), jj.ravel()]).astype(np.int64)
    index = np.full(shape, -1, dtype=np.int64)
    index[ij[:, 0], ij[:, 1]] = np.arange(ij.shape[0])
    nodes = ij * h
    weights = np.full(ij.shape[0], h * h)
    arms = np.full((ij.shape[0], 4), h)
    return Grid(domain, n, h, nodes, ij, weights, arms, shape, index, stencil)


def _cells(length: float, h: float) -> int:
    m = int(round(length / h))
    if abs(m * h - length) > 1e-9 * length:
        raise GridError(f"extent {length} is not a multiple of the spacing {h}")
    return m


def _build_disk(domain: UnitDisk, n: int, stencil: str) -> Grid:
    h = 1.0 / n
    m = 2 * n + 1
    ii, jj = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
    X = (ii - n) * h
    Y = (jj - n) * h
    inside = X * X + Y * Y < 1.0

    def arm_lengths(mask):
        # (east, west, north, south) distance to the next unknown or to the circle
        arms = np.full((m, m, 4), h)
        s = np.sqrt(np.clip(1.0 - Y * Y, 0.0, None))
        t = np.sqrt(np.clip(1.0 - X * X, 0.0, None))
        shifts = [(1, 0), (-1, 0), (0, 1), (0, -1)]
        cut = [s - X, X + s, t - Y, Y + t]
        for k, (di, dj) in enumerate(shifts):
            nb_inside = np.zeros((m, m), bool)
            src_i = slice(max(di, 0), m + min(di, 0))
            src_j = slice(max(dj, 0), m + min(dj, 0))
            dst_i = slice(max(-di, 0), m + min(-di, 0))
            dst_j = slice(max(-dj, 0), m + min(-dj, 0))
            nb_inside[dst_i, dst_j] = inside[src_i, src_j]
            leaving = mask & ~nb_inside
            arms[..., k] = np.where(leaving, np.minimum(cut[k], h), h)
        return arms

    arms = arm_lengths(inside)
    degenerate = inside & (arms.min(axis=-1) < DEGENERATE_ARM * h)
    mask = inside & ~degenerate
    arms = arm_lengths(inside)  # dropped nodes still sit inside: arms toward them stay h
    ij = np.column_stack([ii[mask], jj[mask]]).astype(np.int64)
    index = np.full((m, m), -1, dtype=np.int64)
    index[ij[:, 0], ij[:, 1]] = np.arange(ij.shape[0])
    nodes = (ij - n) * h
    cell = box_disk_area(X - h / 2, X + h / 2, Y - h / 2, Y + h / 2)
    # rim cells whose centre is not an unknown hand their area to the closest unknown neighbour
    orphan_i, orphan_j = np.nonzero(~mask & (cell > 0.0))
    for oi, oj in zip(orphan_i, orphan_j):
        best, best_d = None, np.inf
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                pi, pj = oi + di, oj + dj
                if (di or dj) and 0 <= pi < m and 0 <= pj < m and mask[pi, pj]:
                    d = di * di + dj * dj
                    if d < best_d:
                        best, best_d = (pi, pj), d
        if best is not None:
            cell[best] += cell[oi, oj]
    weights = cell[mask]
    return Grid(domain, n, h, nodes, ij, weights, arms[mask], (m, m), index, stencil)


def _assemble_laplacian(g: Grid) -> sp.csr_matrix:
    N = g.node_count
    h = g.h
    rows, cols, vals = [], [], []
    diag = np.zeros(N)
    shifts = [(1, 0), (-1, 0), (0, 1), (0, -1)]
    for k, (di, dj) in enumerate(shifts):
        ni = g.ij[:, 0] + di
        nj = g.ij[:, 1] + dj
        if g.is_torus:
            nb = g.index[ni % g.shape[0], nj % g.shape[1]]
        else:
            ok = (ni >= 0) & (ni < g.shape[0]) & (nj >= 0) & (nj < g.shape[1])
            nb = np.full(N, -1)
            nb[ok] = g.index[ni[ok], nj[ok]]
        a = g.arms[:, k]
        opp = g.arms[:, k ^ 1]
        if g.stencil == "symmetric":
            c = 1.0 / (h * a)
        else:
            c = 2.0 / (a * (a + opp))
        diag -= c
        has = nb >= 0
        rows.append(np.nonzero(has)[0])
        cols.append(nb[has])
        vals.append(c[has])
    rows.append(np.arange(N))
    cols.append(np.arange(N))
    vals.append(diag)
    L = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N, N))
    return L.tocsr()


def laplacian_apply(grid: Grid, u) -> FloatArray:
    """Δ_h u with homogeneous Dirichlet data (or periodic wrap on the torus)."""
    return grid.laplacian @ grid.check(u)


def integrate(grid: Grid, u) -> float:
    return float(grid.weights @ grid.check(u))


def poisson_solve(grid: Grid, f, zero_mean: bool = False) -> FloatArray:
    """Solve -Δ_h u = f.

    Dirichlet grids use a cached sparse LU factorization. On the torus the
    right-hand side must have zero mean; it is projected onto the zero-mean
    subspace and the solution is returned with zero mean.
    """
    f = grid.check(f)
    if not grid.is_torus:
        u = grid._dirichlet_lu.solve(f)
        if not np.all(np.isfinite(u)):
            raise np.linalg.LinAlgError("sparse LU solve produced non-finite values")
        return u
    if not zero_mean:
        raise GridError("torus Poisson problems require zero_mean=True")
    total = integrate(grid, f)
    if abs(total) > 1e-10 * (1.0 + integrate(grid, np.abs(f))):
        raise GridError(f"torus right-hand side has non-zero mean (integral {total:.3e})")
    F = np.fft.fft2(grid.to_array(f - f.mean()))
    U = F / grid._torus_symbol
    U[0, 0] = 0.0
    u = np.real(np.fft.ifft2(U))[grid.ij[:, 0], grid.ij[:, 1]]
    return u - u.mean()


def discrete_delta(grid: Grid, node: int) -> FloatArray:
    f = np.zeros(grid.node_count)
    f[node] = 1.0 / grid.h**2
    return f


def ball_weights(grid: Grid, center, r: float) -> FloatArray:
    """Quadrature weights for integrals over B_r(center): exact cell ∩ ball areas."""
    c = np.asarray(center, float)
    d = grid.nodes - c
    if grid.is_torus:
        L = np.array([grid.domain.period_x, grid.domain.period_y])
        d -= L * np.round(d / L)
    h = grid.h
    w = box_disk_area(d[:, 0] - h / 2, d[:, 0] + h / 2, d[:, 1] - h / 2, d[:, 1] + h / 2, radius=r)
    # keep the domain's own cut-cell weights where they are smaller (disk rim)
    return np.minimum(w, grid.weights)


def write_field_csv(path, grid: Grid, u) -> None:
    u = grid.check(u)
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "value"])
        for (x, y), val in zip(grid.nodes, u):
            w.writerow([f"{x:.17g}", f"{y:.17g}", f"{val:.17g}"])


def read_field_csv(path, grid: Grid | None = None) -> tuple[FloatArray, FloatArray]:
    """Read a field snapshot; with ``grid`` given, check the coordinates match it."""
    data = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
    pts, vals = data[:, :2], data[:, 2]
    if grid is not None:
        if pts.shape[0] != grid.node_count or not np.allclose(pts, grid.nodes, rtol=0, atol=1e-12):
            raise GridError(f"snapshot {path} does not match the grid (n={grid.n}, {grid.node_count} nodes)")
    return pts, vals

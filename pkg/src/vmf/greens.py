"""Green's functions, regular parts and related kernels.

Points are passed as arrays of shape (..., 2); complex notation z = x1 + i x2
is used internally. Gradients are taken with respect to the first argument.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from numpy.typing import NDArray

from .grid import Domain, FlatTorus, Grid, GridError, Rectangle, UnitDisk, discrete_delta, poisson_solve

FloatArray = NDArray[np.float64]

TWO_PI = 2.0 * np.pi
DEFAULT_TORUS_MODES = 128


class GreensError(ValueError):
    pass


def _as_complex(p) -> NDArray[np.complex128]:
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != 2:
        raise GreensError(f"points must have a trailing dimension of 2, got shape {p.shape}")
    return p[..., 0] + 1j * p[..., 1]


def _as_vector(c: NDArray[np.complex128]) -> FloatArray:
    return np.stack([c.real, c.imag], axis=-1)


def free_space(x, y) -> FloatArray:
    """(1/2π) log(1/|x - y|)."""
    return -np.log(np.abs(_as_complex(x) - _as_complex(y))) / TWO_PI


# ---------------------------------------------------------------------------
# unit disk


def green_disk(x, y) -> FloatArray:
    z, w = _as_complex(x), _as_complex(y)
    if np.any(z == w):
        raise GreensError("Green's function evaluated at coincident points")
    return np.log(np.abs(1.0 - z * np.conj(w)) / np.abs(z - w)) / TWO_PI


def robin_disk(x, y) -> FloatArray:
    """Regular part H(x, y) = (1/2π) log|1 - z w̄|; at x = y this is the Robin function."""
    z, w = _as_complex(x), _as_complex(y)
    return np.log(np.abs(1.0 - z * np.conj(w))) / TWO_PI


def grad_green_disk(x, y) -> FloatArray:
    z, w = _as_complex(x), _as_complex(y)
    if np.any(z == w):
        raise GreensError("Green's function gradient evaluated at coincident points")
    # ∇ log|f| = conj(f'/f) for holomorphic f
    d = np.conj(-np.conj(w) / (1.0 - z * np.conj(w))) - np.conj(1.0 / (z - w))
    return _as_vector(d) / TWO_PI


def grad_robin_disk(x, y) -> FloatArray:
    z, w = _as_complex(x), _as_complex(y)
    return _as_vector(np.conj(-np.conj(w) / (1.0 - z * np.conj(w)))) / TWO_PI


def grad_robin_diagonal_disk(x) -> FloatArray:
    """Gradient of x ↦ H(x, x) = (1/2π) log(1 - |x|^2)."""
    x = np.asarray(x, float)
    r2 = np.sum(x * x, axis=-1, keepdims=True)
    return -x / (np.pi * (1.0 - r2))


# ---------------------------------------------------------------------------
# upper half-disk B1+


def _halfdisk_ratio(z, w):
    return (z - w) * (1.0 - z * w) / ((z - np.conj(w)) * (1.0 - z * np.conj(w)))


def green_half_disk(x, y, check: bool = True) -> FloatArray:
    z, w = _as_complex(x), _as_complex(y)
    if check:
        for name, c in (("x", z), ("y", w)):
            if np.any(np.abs(c) >= 1.0) or np.any(c.imag <= 0.0):
                raise GreensError(f"{name} must lie in the open upper half-disk")
        if np.any(z == w):
            raise GreensError("Green's function evaluated at coincident points")
    return -np.log(np.abs(_halfdisk_ratio(z, w))) / TWO_PI


def grad_green_half_disk(x, y) -> FloatArray:
    """Analytic gradient in x; its modulus is |d/dz of the complex potential|."""
    z, w = _as_complex(x), _as_complex(y)
    wb = np.conj(w)
    # derivative of the complex log of the ratio
    dlog = 1.0 / (z - w) - w / (1.0 - z * w) - 1.0 / (z - wb) + wb / (1.0 - z * wb)
    return _as_vector(np.conj(-dlog / TWO_PI))


def green_halfdisk_derivative_closed_form(x, y) -> NDArray[np.complex128]:
    """Closed-form d/dz of -(1/2π) log of the half-disk ratio, as a complex number."""
    z, w = _as_complex(x), _as_complex(y)
    wb = np.conj(w)
    num = (w - wb) * (1.0 - z * z) * (1.0 - w * wb)
    den = (z - w) * (z - wb) * (1.0 - z * w) * (1.0 - z * wb)
    return -num / den / TWO_PI


@dataclass
class EstimateReport:
    delta: float
    n_samples: int
    value_bound: float
    gradient_bound: float
    max_value_ratio: float
    max_gradient_ratio: float
    max_gradient_ratio_analytic: float
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def _sample_half_annulus(rng, n, r_in, r_out, collar=0.0):
    out = np.empty(0, complex)
    while out.size < n:
        m = 2 * (n - out.size) + 16
        # uniform in area: r = sqrt(U) on [r_in, r_out]
        r = np.sqrt(rng.uniform(r_in**2, r_out**2, m))
        t = rng.uniform(0.0, np.pi, m)
        z = r * np.exp(1j * t)
        keep = (z.imag > 0.0) & (r < 1.0) & (r > r_in)
        if collar > 0.0:
            keep &= (np.abs(z - 1.0) > collar) & (np.abs(z + 1.0) > collar)
        out = np.concatenate([out, z[keep]])
    return out[:n]


def green_estimate_check(delta: float, n_samples: int = 10_000, seed: int = 42, fd_step: float = 1e-6) -> EstimateReport:
    """Sample the half-disk Green function against the two near-source bounds.

    Value bound: |G(x, y)| <= (1/2π) log(2(1+δ)/(1-δ)) for |x| >= 3δ, |y| < δ.
    Gradient bound: |∇_x G(x, y)| <= 2/(π(1-δ)^2) for |x| >= √δ + δ, |y| < δ,
    with gradients from central differences. Points within 1e-3 of the
    corners ±1 are not sampled.
    """
    if not 0.0 < delta <= 0.2:
        raise GreensError("delta must lie in (0, 0.2]")
    rng = np.random.default_rng(seed)
    vb = np.log(2.0 * (1.0 + delta) / (1.0 - delta)) / TWO_PI
    gb = 2.0 / (np.pi * (1.0 - delta) ** 2)
    corner = 1e-3

    w = _sample_half_annulus(rng, n_samples, 0.0, delta)
    z = _sample_half_annulus(rng, n_samples, 3.0 * delta, 1.0, corner)
    X, Y = _as_vector(z), _as_vector(w)
    vals = np.abs(green_half_disk(X, Y, check=False))
    vratio = vals / vb

    w2 = _sample_half_annulus(rng, n_samples, 0.0, delta)
    z2 = _sample_half_annulus(rng, n_samples, np.sqrt(delta) + delta, 1.0, corner)
    X2, Y2 = _as_vector(z2), _as_vector(w2)
    e1, e2 = np.array([fd_step, 0.0]), np.array([0.0, fd_step])
    gx = (green_half_disk(X2 + e1, Y2, check=False) - green_half_disk(X2 - e1, Y2, check=False)) / (2 * fd_step)
    gy = (green_half_disk(X2 + e2, Y2, check=False) - green_half_disk(X2 - e2, Y2, check=False)) / (2 * fd_step)
    gratio = np.hypot(gx, gy) / gb
    ganalytic = np.abs(green_halfdisk_derivative_closed_form(X2, Y2)) / gb

    violations = []
    for k in np.nonzero(vratio > 1.0)[0]:
        violations.append(("value", tuple(X[k]), tuple(Y[k]), float(vratio[k])))
    for k in np.nonzero(gratio > 1.0)[0]:
        violations.append(("gradient", tuple(X2[k]), tuple(Y2[k]), float(gratio[k])))
    return EstimateReport(
        delta, n_samples, float(vb), float(gb),
        float(vratio.max()), float(gratio.max()), float(ganalytic.max()), violations,
    )


# ---------------------------------------------------------------------------
# Möbius pieces of the boundary-straightening map


def mobius_disk_to_halfplane(z):
    """w2(z) = -i (z + 1)/(z - 1): unit disk onto the upper half-plane, -1 ↦ 0."""
    z = np.asarray(z, dtype=complex)
    if np.any(z == 1.0):
        raise GreensError("w2 has a pole at z = 1")
    return -1j * (z + 1.0) / (z - 1.0)


def mobius_chain(z, shift: complex, scale: float):
    """scale * (w2(z) - shift)."""
    return scale * (mobius_disk_to_halfplane(z) - shift)


# ---------------------------------------------------------------------------
# flat torus


def green_torus(x, y, K: int = DEFAULT_TORUS_MODES, periods=(1.0, 1.0)) -> FloatArray:
    """Truncated lattice Fourier series of the zero-mean torus Green function.

    Sums cos(k·(x - y)) / (|Ω| |k|^2) over dual-lattice vectors
    k = 2π (m / Lx, n / Ly) with 0 < max(|m|, |n|) <= K.
    """
    if K < 32:
        raise GreensError("torus Green function needs at least 32 modes per axis")
    Lx, Ly = periods
    d = np.asarray(x, float) - np.asarray(y, float)
    shape = d.shape[:-1]
    d = d.reshape(-1, 2)
    m = np.arange(K + 1)
    kx = TWO_PI * m / Lx
    ky = TWO_PI * np.arange(-K, K + 1) / Ly
    k2 = kx[:, None] ** 2 + ky[None, :] ** 2
    k2[0, K] = np.inf
    M = 1.0 / k2
    M[1:] *= 2.0  # m and -m
    out = np.empty(d.shape[0])
    for s in range(0, d.shape[0], 2048):
        dd = d[s:s + 2048]
        CX = np.cos(np.outer(dd[:, 0], kx))
        CY = np.cos(np.outer(dd[:, 1], ky))
        # sin(kx dx) sin(ky dy) terms cancel between m and -m
        out[s:s + 2048] = np.sum((CX @ M) * CY, axis=1)
    return (out / (Lx * Ly)).reshape(shape)


def torus_min_image(d, periods) -> FloatArray:
    L = np.asarray(periods, float)
    d = np.asarray(d, float)
    return d - L * np.round(d / L)


# ---------------------------------------------------------------------------
# numeric Green's function on a Dirichlet grid


def green_numeric(grid: Grid, node: int) -> FloatArray:
    """Discrete Green's function with a unit point source at grid node ``node``."""
    if grid.is_torus:
        raise GridError("numeric Green's functions are built on Dirichlet grids only")
    if not 0 <= node < grid.node_count:
        raise GridError(f"source node {node} is not an interior node")
    return poisson_solve(grid, discrete_delta(grid, node))


def robin_numeric(grid: Grid, node: int, column: FloatArray | None = None, kmin: int = 4, kmax: int = 16) -> float:
    """Regular part H(y, y) at a grid node from the discrete Green's function.

    Averages G_h - (1/2π) log(1/d) over the four lattice directions at
    distances d = k h (k = kmin..kmax) and extrapolates to d = 0 with the
    model a + b d^2 + c/k^2 + e/k^4; the 1/k terms are the lattice
    anisotropy of the discrete kernel.
    """
    if column is None:
        column = green_numeric(grid, node)
    i0, j0 = grid.ij[node]
    ks, vals = [], []
    for k in range(1, kmax + 1):
        nb = [grid.node_at(i0 + k, j0), grid.node_at(i0 - k, j0), grid.node_at(i0, j0 + k), grid.node_at(i0, j0 - k)]
        if min(nb) < 0:
            break
        ks.append(k)
        vals.append(np.mean(column[nb]) + np.log(k * grid.h) / TWO_PI)
    ks, vals = np.array(ks, float), np.array(vals)
    if ks.size < 4:
        raise GridError("source node too close to the boundary for regular-part extrapolation")
    use = ks >= kmin if np.count_nonzero(ks >= kmin) >= 5 else ks >= 1
    k, d = ks[use], ks[use] * grid.h
    A = np.column_stack([np.ones_like(d), d**2, k**-2.0, k**-4.0][: min(4, k.size - 1)])
    coef, *_ = np.linalg.lstsq(A, vals[use], rcond=None)
    return float(coef[0])


def interpolate(grid: Grid, u, points) -> FloatArray:
    """Bilinear interpolation of a grid field; lattice points without an unknown read 0
    (Dirichlet) or wrap (torus)."""
    u = grid.check(u)
    p = np.atleast_2d(np.asarray(points, float))
    ox, oy = grid.origin
    s = (p[:, 0] - ox) / grid.h
    t = (p[:, 1] - oy) / grid.h
    i0 = np.floor(s).astype(int)
    j0 = np.floor(t).astype(int)
    fs, ft = s - i0, t - j0
    arr = grid.to_array(u)
    nx, ny = grid.shape

    def read(i, j):
        if grid.is_torus:
            return arr[i % nx, j % ny]
        ok = (i >= 0) & (i < nx) & (j >= 0) & (j < ny)
        out = np.zeros(i.shape)
        out[ok] = arr[i[ok], j[ok]]
        return out

    return (
        (1 - fs) * (1 - ft) * read(i0, j0)
        + fs * (1 - ft) * read(i0 + 1, j0)
        + (1 - fs) * ft * read(i0, j0 + 1)
        + fs * ft * read(i0 + 1, j0 + 1)
    )


# ---------------------------------------------------------------------------


Method = Literal["analytic-disk", "analytic-halfdisk", "fourier-torus", "numeric-grid"]


class GreensEvaluator:
    """Uniform access to G, its regular part H and their x-gradients.

    ``numeric-grid`` evaluators solve one discrete Green's function per
    source in ``sources`` at construction; later queries must use one of
    those sources (matched to the nearest grid node).
    """

    def __init__(
        self,
        domain: Domain,
        method: Method | None = None,
        *,
        grid: Grid | None = None,
        sources=(),
        K: int = DEFAULT_TORUS_MODES,
        fd_step: float = 1e-6,
    ) -> None:
        if method is None:
            method = {UnitDisk: "analytic-disk", FlatTorus: "fourier-torus", Rectangle: "numeric-grid"}[type(domain)]
        self.domain = domain
        self.method = method
        self.grid = grid
        self.K = K
        self.fd_step = fd_step
        self._columns: dict[int, FloatArray] = {}
        self._robin: dict[int, float] = {}
        if method == "fourier-torus":
            if not isinstance(domain, FlatTorus):
                raise GreensError("fourier-torus needs a FlatTorus domain")
            if K < 32:
                raise GreensError("fourier-torus needs K >= 32")
            self.periods = (domain.period_x, domain.period_y)
        elif method == "numeric-grid":
            if grid is None:
                raise GreensError("numeric-grid evaluator needs a grid")
            for s in np.atleast_2d(np.asarray(sources, float)) if len(sources) else []:
                node = grid.nearest_node(s)
                col = green_numeric(grid, node)
                self._columns[node] = col
                self._robin[node] = robin_numeric(grid, node, col)

    # -- kernels ----------------------------------------------------------

    def _source_node(self, y) -> int:
        node = self.grid.nearest_node(y)
        if node not in self._columns:
            raise GreensError(f"source {tuple(np.asarray(y))} was not cached at construction")
        return node

    def _delta(self, x, y):
        d = np.asarray(x, float) - np.asarray(y, float)
        if self.method == "fourier-torus":
            d = torus_min_image(d, self.periods)
        return d

    def G(self, x, y) -> FloatArray:
        if self.method == "analytic-disk":
            return green_disk(x, y)
        if self.method == "analytic-halfdisk":
            return green_half_disk(x, y)
        if self.method == "fourier-torus":
            return green_torus(x, y, self.K, self.periods)
        node = self._source_node(y)
        return interpolate(self.grid, self._columns[node], x).reshape(np.shape(x)[:-1])

    def H(self, x, y) -> FloatArray:
        """Regular part; for the torus relative to the identity chart."""
        if self.method == "analytic-disk":
            return robin_disk(x, y)
        d = self._delta(x, y)
        r = np.hypot(d[..., 0], d[..., 1])
        if np.any(r == 0.0):
            return self.robin(y) if np.ndim(r) == 0 else np.where(r == 0.0, self.robin(y), np.nan)
        return self.G(x, y) + np.log(r) / TWO_PI

    def robin(self, y) -> float:
        """H(y, y)."""
        if self.method == "analytic-disk":
            return float(robin_disk(y, y))
        if self.method == "numeric-grid":
            return self._robin[self._source_node(y)]
        # Richardson-type extrapolation along symmetric offsets
        y = np.asarray(y, float)
        h = self._richardson_base()
        ds = h * np.arange(2, 9)
        vals = []
        for d in ds:
            offs = np.array([[d, 0.0], [-d, 0.0], [0.0, d], [0.0, -d]])
            vals.append(np.mean(self.G(y + offs, np.broadcast_to(y, offs.shape))) + np.log(d) / TWO_PI)
        A = np.column_stack([np.ones_like(ds), ds**2])
        coef, *_ = np.linalg.lstsq(A, np.array(vals), rcond=None)
        return float(coef[0])

    def _richardson_base(self) -> float:
        if self.method == "fourier-torus":
            # stay well outside the truncation's resolution length
            return 8.0 * max(self.periods) / self.K
        if self.method == "analytic-halfdisk":
            return 1e-3
        return self.grid.h

    def _fd_grad(self, f, x) -> FloatArray:
        x = np.asarray(x, float)
        e = self.fd_step
        ex, ey = np.array([e, 0.0]), np.array([0.0, e])
        gx = (f(x + ex) - f(x - ex)) / (2 * e)
        gy = (f(x + ey) - f(x - ey)) / (2 * e)
        return np.stack([gx, gy], axis=-1)

    def grad_G(self, x, y) -> FloatArray:
        if self.method == "analytic-disk":
            return grad_green_disk(x, y)
        if self.method == "analytic-halfdisk":
            return grad_green_half_disk(x, y)
        if self.method == "numeric-grid":
            return self._grid_fd(lambda p: self.G(p, y), x)
        if self.method == "fourier-torus":
            return self._torus_fd(x, y, regular=False)
        return self._fd_grad(lambda p: self.G(p, y), x)

    def grad_H(self, x, y) -> FloatArray:
        """∇_x H(x, y), finite at x = y."""
        if self.method == "analytic-disk":
            return grad_robin_disk(x, y)
        if self.method == "numeric-grid":
            return self._grid_fd(lambda p: self.H(p, y), x)
        if self.method == "fourier-torus":
            return self._torus_fd(x, y, regular=True)
        return self._fd_grad(lambda p: self.H(p, y), x)

    def _torus_fd(self, x, y, regular: bool) -> FloatArray:
        # difference in the displacement x - y itself: offsetting x first
        # leaves a rounding asymmetry that the 1/r kernel amplifies
        d = self._delta(x, y)
        origin = np.zeros(2)

        def f(dd):
            val = green_torus(dd, origin, self.K, self.periods)
            if regular:
                val = val + np.log(np.hypot(dd[..., 0], dd[..., 1])) / TWO_PI
            return val

        return self._fd_grad(f, d)

    def _grid_fd(self, f, x) -> FloatArray:
        # central differences over whole lattice steps: the h^2/d^2 lattice
        # anisotropy of the discrete kernel is even and cancels
        x = np.asarray(x, float)
        d = 4.0 * self.grid.h
        ex, ey = np.array([d, 0.0]), np.array([0.0, d])
        gx = (f(x + ex) - f(x - ex)) / (2 * d)
        gy = (f(x + ey) - f(x - ey)) / (2 * d)
        return np.stack([np.asarray(gx, float), np.asarray(gy, float)], axis=-1)

    def grad_robin_diagonal(self, x) -> FloatArray:
        """Gradient of x ↦ H(x, x)."""
        if self.method == "analytic-disk":
            return grad_robin_diagonal_disk(x)
        if self.method == "fourier-torus":
            # translation invariance: H(x, x) is constant on the flat torus
            return np.zeros(np.shape(x))
        raise GreensError(f"diagonal Robin gradient is not available for {self.method}")

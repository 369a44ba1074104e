"""Kirchhoff's point-vortex Hamiltonian and the blow-up location condition."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .grid import FlatTorus
from .greens import GreensEvaluator

FloatArray = NDArray[np.float64]

MIN_SEPARATION = 1e-8


class KirchhoffError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class VortexConfig:
    points: FloatArray
    intensities: FloatArray

    def __post_init__(self) -> None:
        p = np.atleast_2d(np.asarray(self.points, dtype=float))
        r = np.atleast_1d(np.asarray(self.intensities, dtype=float))
        if p.ndim != 2 or p.shape[1] != 2:
            raise KirchhoffError("points must have shape (N, 2)")
        if r.shape != (p.shape[0],):
            raise KirchhoffError("need exactly one intensity per point")
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(r))):
            raise KirchhoffError("points and intensities must be finite")
        object.__setattr__(self, "points", p)
        object.__setattr__(self, "intensities", r)

    @property
    def N(self) -> int:
        return self.points.shape[0]

    def moved(self, points) -> "VortexConfig":
        return VortexConfig(np.asarray(points, float).reshape(self.points.shape), self.intensities)


def _min_separation(cfg: VortexConfig, greens: GreensEvaluator) -> float:
    if cfg.N < 2:
        return np.inf
    d = cfg.points[:, None, :] - cfg.points[None, :, :]
    if isinstance(greens.domain, FlatTorus):
        L = np.array([greens.domain.period_x, greens.domain.period_y])
        d -= L * np.round(d / L)
    dist = np.hypot(d[..., 0], d[..., 1])
    dist[np.diag_indices(cfg.N)] = np.inf
    return float(dist.min())


def validate(cfg: VortexConfig, greens: GreensEvaluator) -> None:
    if _min_separation(cfg, greens) <= MIN_SEPARATION:
        raise KirchhoffError("vortex points coincide")
    if not isinstance(greens.domain, FlatTorus) and greens.method != "analytic-halfdisk":
        if np.any(greens.domain.boundary_distance(cfg.points) <= 0.0):
            raise KirchhoffError("vortex points must lie inside the domain")


def hamiltonian(cfg: VortexConfig, greens: GreensEvaluator) -> float:
    """Σ r_i^2 H(x_i, x_i) + Σ_{i≠j} r_i r_j G(x_i, x_j) over ordered pairs."""
    validate(cfg, greens)
    x, r = cfg.points, cfg.intensities
    total = sum(r[i] ** 2 * greens.robin(x[i]) for i in range(cfg.N))
    for i in range(cfg.N):
        for j in range(cfg.N):
            if i != j:
                total += r[i] * r[j] * float(greens.G(x[i], x[j]))
    return float(total)


def gradient(cfg: VortexConfig, greens: GreensEvaluator) -> FloatArray:
    """∂H_N/∂x_i = r_i^2 ∇R(x_i) + 2 r_i Σ_{j≠i} r_j ∇_x G(x_i, x_j), shape (N, 2).

    R(x) = H(x, x). The factor 2 uses the symmetry of G.
    """
    validate(cfg, greens)
    x, r = cfg.points, cfg.intensities
    out = r[:, None] ** 2 * greens.grad_robin_diagonal(x)
    for i in range(cfg.N):
        for j in range(cfg.N):
            if i != j:
                out[i] += 2.0 * r[i] * r[j] * greens.grad_G(x[i], x[j])
    return out


def gradient_fd(cfg: VortexConfig, greens: GreensEvaluator, step: float = 1e-6) -> FloatArray:
    """Central differences of :func:`hamiltonian`; an independent check of :func:`gradient`."""
    base = cfg.points.ravel()
    g = np.empty_like(base)
    for k in range(base.size):
        e = np.zeros_like(base)
        e[k] = step
        g[k] = (hamiltonian(cfg.moved(base + e), greens) - hamiltonian(cfg.moved(base - e), greens)) / (2 * step)
    return g.reshape(cfg.points.shape)


@dataclass
class CriticalityReport:
    gradient_norm: float
    gradients: FloatArray
    converged: bool
    iterations: int
    degenerate: bool = False
    message: str = ""
    history: list[float] = field(default_factory=list)


def _admissible(cfg: VortexConfig, greens: GreensEvaluator) -> bool:
    try:
        validate(cfg, greens)
    except KirchhoffError:
        return False
    return True


def _fd_hessian(cfg: VortexConfig, greens: GreensEvaluator, step: float) -> FloatArray:
    base = cfg.points.ravel()
    n = base.size
    Hs = np.empty((n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = step
        gp = gradient(cfg.moved(base + e), greens).ravel()
        gm = gradient(cfg.moved(base - e), greens).ravel()
        Hs[:, k] = (gp - gm) / (2 * step)
    return 0.5 * (Hs + Hs.T)


def find_critical(
    cfg0: VortexConfig,
    greens: GreensEvaluator,
    tol: float = 1e-10,
    max_iter: int = 500,
    hessian_step: float = 1e-5,
) -> tuple[VortexConfig, CriticalityReport]:
    """Search for a zero of ∇H_N by damped Newton with a finite-difference Hessian.

    Steps are halved until ||∇H_N|| decreases and the configuration stays
    admissible; when the Hessian is singular or the Newton direction fails,
    a gradient-flow step is tried instead.
    """
    validate(cfg0, greens)
    cfg = cfg0
    g = gradient(cfg, greens)
    gn = float(np.linalg.norm(g))
    history = [gn]
    torus = isinstance(greens.domain, FlatTorus)
    if torus and cfg.N == 1:
        # H(x, x) is constant on the flat torus: every point is critical
        return cfg, CriticalityReport(gn, g, gn <= tol, 0, True, "translation-invariant single vortex on the flat torus", history)
    it = 0
    message = ""
    while gn > tol and it < max_iter:
        it += 1
        x = cfg.points.ravel()
        directions = []
        Hs = _fd_hessian(cfg, greens, hessian_step)
        if np.linalg.cond(Hs) < 1e12:
            directions.append(np.linalg.solve(Hs, -g.ravel()))
        scale = max(1.0, float(np.max(np.abs(g))))
        directions.append(-g.ravel() / scale * 0.1)
        moved = False
        for d in directions:
            theta = 1.0
            for _ in range(40):
                trial = cfg.moved(x + theta * d)
                if _admissible(trial, greens):
                    gt = gradient(trial, greens)
                    gtn = float(np.linalg.norm(gt))
                    if gtn < gn:
                        cfg, g, gn = trial, gt, gtn
                        moved = True
                        break
                theta *= 0.5
            if moved:
                break
        history.append(gn)
        if not moved:
            message = "no admissible step decreases the gradient norm"
            break
    if gn > tol and not message:
        message = f"no convergence in {max_iter} iterations"
    return cfg, CriticalityReport(gn, g, gn <= tol, it, False, message, history)


def location_residual(points, net_masses, greens: GreensEvaluator) -> FloatArray:
    """Per point x_i: |∇_x [H(x, x_i) + Σ_{j≠i} (r_j / r_i) G(x, x_j)]| at x = x_i.

    ``net_masses`` are r_i = m+(x_i) - m-(x_i). On the flat torus H is the
    regular part in the identity chart and the conformal-factor term vanishes.
    """
    pts = np.atleast_2d(np.asarray(points, float))
    r = np.atleast_1d(np.asarray(net_masses, float))
    if r.shape != (pts.shape[0],):
        raise KirchhoffError("need one net mass per point")
    out = np.empty(pts.shape[0])
    for i in range(pts.shape[0]):
        if r[i] == 0.0:
            raise KirchhoffError(f"zero net mass at point {tuple(pts[i])}: mass relation violated")
        grad = np.asarray(greens.grad_H(pts[i], pts[i]), float).reshape(2)
        for j in range(pts.shape[0]):
            if j != i:
                grad = grad + (r[j] / r[i]) * np.asarray(greens.grad_G(pts[i], pts[j]), float).reshape(2)
        out[i] = float(np.hypot(*grad))
    return out


def dipole_half_separation() -> float:
    """Critical half-separation a* of the symmetric (+1, -1) pair on the unit disk.

    Restricting H_2 to x_1 = (a, 0) = -x_2 gives (1/π)[log(1 - a^2) - log((1 + a^2)/(2a))],
    whose derivative vanishes where a^4 + 4a^2 - 1 = 0.
    """
    return float(np.sqrt(np.sqrt(5.0) - 2.0))

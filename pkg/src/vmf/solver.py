"""Newton solver and λ-continuation for the mean-field equations.

Variants
--------
``neri``
    -Δv = λ ∫ α e^{αv} P(dα) / ∬ e^{α'v} P(dα') dx, v = 0 on ∂Ω.
    Liouville (P = δ_{+1}), sinh-Poisson (P = (δ_{+1} + δ_{-1})/2) and the
    two-atom model case are this variant with the matching measure.
``ss``
    -Δv = λ ∫ α e^{αv} / (∫_Ω e^{αv} dx) P(dα), one denominator per atom.
``torus-neri``
    The neri right-hand side minus its spatial mean on a flat torus, with
    the normalization ∫v = 0.

The nonlocal denominators make the Jacobian a sparse matrix plus a
low-rank term; each Newton step factors the sparse part once and applies
the Sherman-Morrison-Woodbury identity for the rest.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Literal

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from numpy.typing import NDArray

from .grid import Domain, FlatTorus, Grid, build_grid, integrate, is_dirichlet
from .measure import EXP_GUARD, IntensityMeasure

FloatArray = NDArray[np.float64]
Variant = Literal["neri", "ss", "torus-neri"]

MAX_NEWTON = 50
MAX_HALVINGS = 30
DEFAULT_TOL = 1e-9
# capacitance matrices with a larger condition number are treated as singular
CAPACITANCE_COND_LIMIT = 1e16
# relative residual a refined linear solve must reach
LINEAR_SOLVE_TOL = 1e-8
# gradients of v below this (L2 norm) mean there is no translation family to deflate
TRANSLATION_MODE_FLOOR = 1e-6


class SolverError(RuntimeError):
    pass


class SingularJacobianError(SolverError):
    """The Woodbury capacitance matrix (or the sparse part) is numerically singular."""


class ContinuationError(SolverError):
    pass


@lru_cache(maxsize=16)
def _cached_grid(domain: Domain, n: int, stencil: str) -> Grid:
    return build_grid(domain, n, stencil)


@dataclass(frozen=True)
class ProblemSpec:
    domain: Domain
    n: int
    measure: IntensityMeasure
    lam: float
    variant: Variant = "neri"
    stencil: str = "shortley-weller"

    def __post_init__(self) -> None:
        if not np.isfinite(self.lam) or self.lam < 0:
            raise ValueError(f"lambda must be finite and >= 0, got {self.lam}")
        if self.variant not in ("neri", "ss", "torus-neri"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.variant == "torus-neri" and not isinstance(self.domain, FlatTorus):
            raise ValueError("torus-neri requires a FlatTorus domain")
        if self.variant != "torus-neri" and not is_dirichlet(self.domain):
            raise ValueError(f"variant {self.variant!r} requires a Dirichlet domain")

    @property
    def grid(self) -> Grid:
        return _cached_grid(self.domain, self.n, self.stencil)

    def with_lambda(self, lam: float) -> "ProblemSpec":
        return ProblemSpec(self.domain, self.n, self.measure, float(lam), self.variant, self.stencil)


@dataclass
class SolveResult:
    v: FloatArray
    residual_norm: float
    newton_iters: int
    denominator: float | list[float]
    converged: bool
    increments: list[float] = field(default_factory=list)
    residual_history: list[float] = field(default_factory=list)
    reason: str = ""

    def summary(self) -> dict:
        return {
            "converged": self.converged,
            "residual_norm": self.residual_norm,
            "newton_iters": self.newton_iters,
            "denominator": self.denominator,
            "max_v": float(self.v.max()),
            "min_v": float(self.v.min()),
            "reason": self.reason,
        }


# ---------------------------------------------------------------------------
# pointwise nonlinearity


@dataclass
class _Terms:
    rhs: FloatArray            # right-hand side of -Δv = rhs
    dterm: FloatArray          # d(rhs_i)/d(v_i), local part
    U: FloatArray              # J = -Δ_h - diag(dterm) + U @ V.T
    V: FloatArray
    denominator: float | list[float]
    m0: FloatArray | None = None


def _guard(P: IntensityMeasure, v: FloatArray) -> None:
    amax = float(np.max(np.abs(P.alphas)))
    worst = amax * float(np.max(np.abs(v))) if v.size else 0.0
    if not np.isfinite(worst) or worst > EXP_GUARD:
        raise OverflowError(f"max |alpha v| = {worst:.6g} exceeds the exponential guard {EXP_GUARD}")


def _scaled_exponentials(P: IntensityMeasure, v: FloatArray, per_atom: bool = False):
    """w_j exp(alpha_j v - s) for all nodes and atoms.

    The shift is s = max(alpha v) overall, or one shift per atom when
    ``per_atom`` (each atom then carries its own denominator).
    """
    av = np.multiply.outer(v, P.alphas)
    s = av.max(axis=0) if per_atom else float(av.max())
    return np.exp(av - s) * P.weights, s


def _terms(spec: ProblemSpec, v: FloatArray) -> _Terms:
    g = spec.grid
    P = spec.measure
    lam = spec.lam
    w = g.weights
    _guard(P, v)
    a = P.alphas
    if spec.variant == "ss":
        E, s = _scaled_exponentials(P, v, per_atom=True)
        Dj = w @ E
        rhs = lam * (E * a) @ (1.0 / Dj)
        dterm = lam * (E * a * a) @ (1.0 / Dj)
        # d/dv_k of -lam a_j E_j(v_i)/D_j contributes +lam a_j E_ij/D_j^2 * w_k a_j E_kj
        U = lam * E * a / Dj**2
        V = (w[:, None] * E) * a
        with np.errstate(over="ignore"):
            den = [float(d * np.exp(s[j]) / P.weights[j]) for j, d in enumerate(Dj)]
        return _Terms(rhs, dterm, U, V, den)

    E, s = _scaled_exponentials(P, v)

    m0 = E.sum(axis=1)
    m1 = E @ a
    m2 = E @ (a * a)
    D = float(w @ m0)
    with np.errstate(over="ignore"):
        den = float(D * np.exp(s))
    if spec.variant == "neri":
        rhs = lam * m1 / D
        dterm = lam * m2 / D
        U = (lam * m1 / D**2)[:, None]
        V = (w * m1)[:, None]
        return _Terms(rhs, dterm, U, V, den, m0)

    area = spec.domain.area
    M1 = float(w @ m1)
    rhs = lam / D * (m1 - M1 / area)
    dterm = lam * m2 / D
    U = np.column_stack([np.full(v.size, lam / (D * area)), lam / D**2 * (m1 - M1 / area)])
    V = np.column_stack([w * m2, w * m1])
    return _Terms(rhs, dterm, U, V, den, m0)


def residual(spec: ProblemSpec, v) -> FloatArray:
    """F(v) = -Δ_h v - rhs(v); on the torus projected onto zero mean."""
    g = spec.grid
    v = g.check(v)
    t = _terms(spec, v)
    F = -(g.laplacian @ v) - t.rhs
    if spec.variant == "torus-neri":
        F = F - (g.weights @ F) / g.weights.sum()
    return F


def jacobian_apply(spec: ProblemSpec, v, w) -> FloatArray:
    """Directional derivative J(v) w of the (unprojected) residual."""
    g = spec.grid
    v, w = g.check(v), g.check(w)
    t = _terms(spec, v)
    return -(g.laplacian @ w) - t.dterm * w + t.U @ (t.V.T @ w)


def denominator(spec: ProblemSpec, v) -> float | list[float]:
    return _terms(spec, spec.grid.check(v)).denominator


# ---------------------------------------------------------------------------
# linear algebra


class WoodburySolver:
    """Solve (S + U V^T) x = b with S sparse, U and V of rank k."""

    def __init__(self, S: sp.spmatrix, U: FloatArray, V: FloatArray) -> None:
        try:
            self.lu = spla.splu(S.tocsc())
        except RuntimeError as exc:  # "Factor is exactly singular"
            raise SingularJacobianError(f"sparse part of the Jacobian is singular: {exc}") from exc
        self.S, self.U, self.V = S, U, V
        self.SinvU = self.lu.solve(U) if U.shape[1] else U
        cap = np.eye(U.shape[1]) + V.T @ self.SinvU
        if U.shape[1]:
            cond = np.linalg.cond(cap)
            if not np.isfinite(cond) or cond > CAPACITANCE_COND_LIMIT:
                raise SingularJacobianError(f"Woodbury capacitance is singular (cond = {cond:.3e})")
        self.cap = cap

    def _solve_once(self, b: FloatArray) -> FloatArray:
        y = self.lu.solve(b)
        if self.U.shape[1] == 0:
            return y
        return y - self.SinvU @ np.linalg.solve(self.cap, self.V.T @ y)

    def apply(self, x: FloatArray) -> FloatArray:
        return self.S @ x + self.U @ (self.V.T @ x)

    def solve(self, b: FloatArray, refine: int = 2) -> FloatArray:
        # a few refinement sweeps recover the accuracy Woodbury loses when
        # the sparse part is nearly singular (translation modes on the torus)
        x = self._solve_once(b)
        for _ in range(refine):
            x = x + self._solve_once(b - self.apply(x))
        scale = np.max(np.abs(b))
        if scale > 0 and np.max(np.abs(b - self.apply(x))) > LINEAR_SOLVE_TOL * scale:
            raise SingularJacobianError("Newton matrix is numerically singular (refined solve inaccurate)")
        return x


def _translation_modes(grid: Grid, v: FloatArray) -> FloatArray:
    """Periodic central differences of v in x and y, W-normalized; (N, k) with k <= 2."""
    nx, ny = grid.shape
    A = v.reshape(nx, ny)
    w = grid.weights
    cols = []
    for axis in (0, 1):
        d = (np.roll(A, -1, axis) - np.roll(A, 1, axis)).ravel() / (2.0 * grid.h)
        norm = np.sqrt(w @ (d * d))
        if norm > TRANSLATION_MODE_FLOOR:
            cols.append(d / norm)
    return np.column_stack(cols) if cols else np.zeros((v.size, 0))


def _newton_operator(spec: ProblemSpec, t: _Terms, v: FloatArray | None = None) -> WoodburySolver:
    g = spec.grid
    S = -g.laplacian - sp.diags(t.dterm)
    U, V = t.U, t.V
    if spec.variant == "torus-neri":
        # K = J + 1 w^T / |Ω| keeps Newton steps in the zero-mean subspace; the
        # sparse part is regularized at node 0 and the regularization undone
        # through the low-rank term.
        N = g.node_count
        kappa = 4.0 / g.h**2
        e0 = np.zeros(N)
        e0[0] = 1.0
        S = S + sp.csr_matrix(([kappa], ([0], [0])), shape=(N, N))
        U = np.column_stack([U, np.ones(N) / spec.domain.area, -kappa * e0])
        V = np.column_stack([V, g.weights, e0])
        if v is not None:
            # translating a solution gives a solution, so J has a (numerically)
            # two-dimensional kernel spanned by the gradients of v. Adding
            # T (W T)^T makes the matrix invertible; since the residual is
            # orthogonal to W T, the step still solves J x = -F and carries
            # no drift along the family.
            T = _translation_modes(g, v)
            U = np.column_stack([U, T])
            V = np.column_stack([V, g.weights[:, None] * T])
    return WoodburySolver(S, U, V)


# ---------------------------------------------------------------------------


def solve_newton(
    spec: ProblemSpec,
    v0=None,
    tol: float = DEFAULT_TOL,
    max_newton: int = MAX_NEWTON,
) -> SolveResult:
    """Damped Newton iteration on F(v) = 0, stopping when ||F||_inf <= tol.

    Each step is halved (up to 30 times) until the max-norm residual
    decreases. Non-convergence is reported through ``converged=False``;
    a singular Newton matrix raises :class:`SingularJacobianError`.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    g = spec.grid
    v = np.zeros(g.node_count) if v0 is None else np.array(g.check(v0), dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError("initial guess must be finite")
    if spec.variant == "torus-neri":
        v -= (g.weights @ v) / g.weights.sum()

    F = residual(spec, v)
    fn = float(np.max(np.abs(F)))
    history = [fn]
    increments: list[float] = []
    it = 0
    reason = ""
    while fn > tol:
        if it >= max_newton:
            reason = f"no convergence in {max_newton} Newton iterations"
            break
        t = _terms(spec, v)
        step = -_newton_operator(spec, t, v).solve(F)
        if spec.variant == "torus-neri":
            step -= (g.weights @ step) / g.weights.sum()
        theta = 1.0
        accepted = False
        for _ in range(MAX_HALVINGS + 1):
            trial = v + theta * step
            try:
                Ft = residual(spec, trial)
            except OverflowError:
                theta *= 0.5
                continue
            ft = float(np.max(np.abs(Ft)))
            if ft < fn:
                accepted = True
                break
            theta *= 0.5
        it += 1
        if not accepted:
            reason = "line search failed to decrease the residual"
            break
        increments.append(float(np.max(np.abs(theta * step))))
        v, F, fn = trial, Ft, ft
        history.append(fn)
    return SolveResult(
        v=v,
        residual_norm=fn,
        newton_iters=it,
        denominator=denominator(spec, v),
        converged=fn <= tol,
        increments=increments,
        residual_history=history,
        reason=reason,
    )


# ---------------------------------------------------------------------------
# seeds and continuation


def bump(grid: Grid, center=(0.0, 0.0), amplitude: float = 1.0, width: float = 0.25) -> FloatArray:
    """Gaussian bump amplitude * exp(-|x - c|^2 / (2 width^2)) sampled on the grid."""
    d = grid.nodes - np.asarray(center, float)
    if grid.is_torus:
        L = np.array([grid.domain.period_x, grid.domain.period_y])
        d -= L * np.round(d / L)
    return amplitude * np.exp(-np.einsum("ij,ij->i", d, d) / (2.0 * width**2))


@dataclass(frozen=True)
class SeedPolicy:
    kind: Literal["previous", "bump", "zero"] = "previous"
    center: tuple[float, float] = (0.0, 0.0)
    amplitude: float = 1.0
    width: float = 0.25
    every_step: bool = False

    def initial(self, grid: Grid, previous: FloatArray | None) -> FloatArray:
        """Initial guess for the next solve.

        A bump perturbs the first solve only, which is what pushes Newton off
        the trivial branch; later steps warm-start from the previous solution
        unless ``every_step`` is set.
        """
        if previous is None or self.kind == "zero":
            base = np.zeros(grid.node_count)
        else:
            base = previous.copy()
        if self.kind == "bump" and (previous is None or self.every_step):
            base = base + bump(grid, self.center, self.amplitude, self.width)
        return base


@dataclass
class TracePoint:
    lam: float
    max_v: float
    min_v: float
    residual: float
    peak: tuple[float, float]
    newton_iters: int
    converged: bool

    def as_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "max_v": self.max_v,
            "min_v": self.min_v,
            "residual": self.residual,
            "peak": list(self.peak),
            "newton_iters": self.newton_iters,
            "converged": self.converged,
        }


@dataclass
class ContinuationTrace:
    points: list[TracePoint] = field(default_factory=list)
    solutions: list[SolveResult] = field(default_factory=list)
    fold_candidate: tuple[float, float] | None = None
    stop_reason: str = ""

    @property
    def lambdas(self) -> list[float]:
        return [p.lam for p in self.points]

    @property
    def complete(self) -> bool:
        return self.fold_candidate is None


def continuation(
    spec_base: ProblemSpec,
    lambdas,
    seed: SeedPolicy = SeedPolicy(),
    tol: float = DEFAULT_TOL,
    max_newton: int = MAX_NEWTON,
) -> ContinuationTrace:
    """Solve along an ascending λ ladder, warm-starting each solve from ``seed``.

    Stops at the first failure and records (last converged λ, failed λ) as a
    fold candidate. Raises :class:`ContinuationError` if the first solve fails.
    """
    lambdas = [float(l) for l in lambdas]
    if not lambdas:
        raise ContinuationError("empty lambda list")
    if any(b <= a for a, b in zip(lambdas, lambdas[1:])):
        raise ContinuationError("lambdas must be strictly increasing")
    g = spec_base.grid
    trace = ContinuationTrace()
    previous = None
    for lam in lambdas:
        spec = spec_base.with_lambda(lam)
        try:
            res = solve_newton(spec, seed.initial(g, previous), tol, max_newton)
            reason = res.reason
        except (SolverError, OverflowError, np.linalg.LinAlgError) as exc:
            res, reason = None, str(exc)
        if res is None or not res.converged:
            if not trace.points:
                raise ContinuationError(f"first solve at lambda = {lam} failed: {reason}")
            trace.fold_candidate = (trace.points[-1].lam, lam)
            trace.stop_reason = reason
            break
        k = int(np.argmax(np.abs(res.v)))
        trace.points.append(
            TracePoint(lam, float(res.v.max()), float(res.v.min()), res.residual_norm,
                       (float(g.nodes[k, 0]), float(g.nodes[k, 1])), res.newton_iters, True)
        )
        trace.solutions.append(res)
        previous = res.v
    return trace


# ---------------------------------------------------------------------------


def nonlinearity_field(spec: ProblemSpec, v) -> tuple[FloatArray, FloatArray]:
    """Densities of the positive and negative vortex measures.

    plus  = λ ∫_{α>=0} |α| e^{αv} P(dα) / denominator
    minus = λ ∫_{α<0}  |α| e^{αv} P(dα) / denominator
    with the per-atom denominators for the ``ss`` variant.
    """
    g = spec.grid
    v = g.check(v)
    P = spec.measure
    _guard(P, v)
    E, _ = _scaled_exponentials(P, v, per_atom=spec.variant == "ss")
    a = P.alphas
    pos = np.where(a >= 0.0, a, 0.0)
    neg = np.where(a < 0.0, -a, 0.0)
    if spec.variant == "ss":
        Dj = g.weights @ E
        return spec.lam * (E * pos) @ (1.0 / Dj), spec.lam * (E * neg) @ (1.0 / Dj)
    D = float(g.weights @ E.sum(axis=1))
    return spec.lam * (E @ pos) / D, spec.lam * (E @ neg) / D


def potential_density(spec: ProblemSpec, v) -> FloatArray:
    """Φ(v) with dΦ/dv equal to the right-hand side (torus: up to the constant shift).

    neri: λ m0(v)/D; ss: λ Σ_j p_j e^{α_j v}/D_j; torus-neri: λ (m0(v) - κ v)/D
    where κ is the mean of m1(v). Used by the Pohozaev identity.
    """
    g = spec.grid
    v = g.check(v)
    P = spec.measure
    _guard(P, v)
    E, _ = _scaled_exponentials(P, v, per_atom=spec.variant == "ss")
    if spec.variant == "ss":
        return spec.lam * E @ (1.0 / (g.weights @ E))
    m0 = E.sum(axis=1)
    D = float(g.weights @ m0)
    out = spec.lam * m0 / D
    if spec.variant == "torus-neri":
        kappa = float(g.weights @ (E @ P.alphas)) / spec.domain.area
        out = out - spec.lam * kappa * v / D
    return out


def liouville_disk_exact(mu: float, r) -> FloatArray:
    """Radial solution 2 log((1+μ)/(1+μ r^2)) of the Liouville problem on the unit disk."""
    return 2.0 * np.log((1.0 + mu) / (1.0 + mu * np.asarray(r) ** 2))


def liouville_disk_lambda(mu: float) -> float:
    return 8.0 * np.pi * mu / (1.0 + mu)

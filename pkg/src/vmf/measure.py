"""Intensity measures on [-1, 1].

A measure is stored as a sorted list of (alpha, weight) nodes. Continuous
densities are discretized once, by Gauss-Legendre quadrature, when the
measure is built; nothing downstream re-quadratures.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Literal

import numpy as np
from numpy.typing import NDArray

FloatArray = NDArray[np.float64]

# |alpha * t| above this overflows exp in double precision.
EXP_GUARD = 750.0


class MeasureError(ValueError):
    pass


@dataclass(frozen=True)
class SupportExtrema:
    alpha_minus_star: float
    alpha_plus_star: float


@dataclass(frozen=True)
class BetaCoefficients:
    beta_plus: float
    beta_minus: float


@dataclass(frozen=True, eq=False)
class IntensityMeasure:
    """Probability measure on [-1, 1] held as weighted nodes.

    ``support`` is the declared closed support. For atomic measures it is
    spanned by the extreme atoms; for quadrature measures it is the interval
    the density was given on (Gauss nodes never reach the endpoints).
    """

    alphas: FloatArray
    weights: FloatArray
    kind: Literal["atomic", "quadrature"]
    support: tuple[float, float]

    def __post_init__(self) -> None:
        a = np.asarray(self.alphas, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if a.ndim != 1 or a.shape != w.shape or a.size == 0:
            raise MeasureError("alphas and weights must be non-empty 1-D arrays of equal length")
        if np.any(a < -1.0) or np.any(a > 1.0):
            raise MeasureError("intensities must lie in [-1, 1]")
        if np.any(w <= 0.0):
            raise MeasureError("weights must be positive")
        if np.any(np.diff(a) <= 0.0):
            raise MeasureError("alphas must be strictly increasing")
        if abs(w.sum() - 1.0) > 1e-12:
            raise MeasureError("weights must sum to 1")
        a.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "alphas", a)
        object.__setattr__(self, "weights", w)

    @property
    def nodes(self) -> list[tuple[float, float]]:
        return [(float(a), float(w)) for a, w in zip(self.alphas, self.weights)]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, IntensityMeasure):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.support == other.support
            and np.array_equal(self.alphas, other.alphas)
            and np.array_equal(self.weights, other.weights)
        )

    def __repr__(self) -> str:
        return f"IntensityMeasure(kind={self.kind!r}, nodes={self.alphas.size}, support={self.support})"


def make_atomic(pairs: Iterable[tuple[float, float]]) -> IntensityMeasure:
    """Build a discrete measure from (alpha, weight) pairs.

    Weights are rescaled to sum to one and atoms with exactly equal alpha
    are merged by adding their weights.
    """
    pairs = [(float(a), float(w)) for a, w in pairs]
    if not pairs:
        raise MeasureError("an atomic measure needs at least one atom")
    merged: dict[float, float] = {}
    for a, w in pairs:
        if not -1.0 <= a <= 1.0:
            raise MeasureError(f"intensity {a} outside [-1, 1]")
        if not w > 0.0:
            raise MeasureError(f"weight {w} must be positive")
        merged[a] = merged.get(a, 0.0) + w
    alphas = np.array(sorted(merged))
    weights = np.array([merged[a] for a in alphas])
    total = weights.sum()
    # leave already-normalized weights alone so that rebuilding is exact
    if abs(total - 1.0) > 4 * np.finfo(float).eps * weights.size:
        weights = weights / total
    return IntensityMeasure(alphas, weights, "atomic", (float(alphas[0]), float(alphas[-1])))


def make_quadrature(
    density: Callable[[FloatArray], FloatArray | float],
    support: tuple[float, float],
    n_nodes: int,
) -> IntensityMeasure:
    """Discretize ``density(alpha) d alpha`` on ``support`` with Gauss-Legendre nodes."""
    a, b = float(support[0]), float(support[1])
    if not -1.0 <= a < b <= 1.0:
        raise MeasureError(f"support [{a}, {b}] must be a non-degenerate subinterval of [-1, 1]")
    if n_nodes < 2:
        raise MeasureError("need at least two quadrature nodes")
    x, gw = np.polynomial.legendre.leggauss(n_nodes)
    alphas = 0.5 * (b - a) * x + 0.5 * (b + a)
    dens = np.broadcast_to(np.asarray(density(alphas), dtype=float), alphas.shape)
    if np.any(dens < 0.0) or not np.all(np.isfinite(dens)):
        raise MeasureError("density must be finite and nonnegative on the support")
    weights = 0.5 * (b - a) * gw * dens
    total = weights.sum()
    if total <= 0.0:
        raise MeasureError("density integrates to zero")
    keep = weights > 0.0
    return IntensityMeasure(alphas[keep], weights[keep] / total, "quadrature", (a, b))


def support_extrema(P: IntensityMeasure) -> SupportExtrema:
    return SupportExtrema(P.support[0], P.support[1])


def beta_pm(extrema: SupportExtrema, blows_up_plus: bool, blows_up_minus: bool) -> BetaCoefficients:
    """Reciprocal extremal intensities for the one-sided blow-up classes.

    A flag raised against a zero extremal intensity means the blow-up
    classification is inconsistent with the measure.
    """
    bp = bm = 0.0
    if blows_up_plus:
        if extrema.alpha_plus_star == 0.0:
            raise MeasureError("positive blow-up flagged but the maximal intensity is zero")
        bp = 1.0 / abs(extrema.alpha_plus_star)
    if blows_up_minus:
        if extrema.alpha_minus_star == 0.0:
            raise MeasureError("negative blow-up flagged but the minimal intensity is zero")
        bm = 1.0 / abs(extrema.alpha_minus_star)
    return BetaCoefficients(bp, bm)


def _check_guard(t: FloatArray | float) -> None:
    if np.max(np.abs(t)) > EXP_GUARD:
        raise OverflowError(f"|t| = {np.max(np.abs(t)):.6g} exceeds the exponential guard {EXP_GUARD}")


def exp_moments(P: IntensityMeasure, t: float | FloatArray) -> tuple:
    """Return (m0, m1, m2) with mk(t) = sum_j w_j alpha_j**k exp(alpha_j t).

    ``t`` may be a scalar or an array; the moments broadcast with it.
    """
    t = np.asarray(t, dtype=float)
    _check_guard(t)
    with np.errstate(over="ignore"):
        e = np.exp(np.multiply.outer(t, P.alphas)) * P.weights
    if not np.all(np.isfinite(e)):
        # the guard admits |t| up to 750 but exp overflows past ~709.78
        raise OverflowError("exponential moment overflows double precision")
    m0 = e.sum(axis=-1)
    m1 = e @ P.alphas
    m2 = e @ (P.alphas * P.alphas)
    if t.ndim == 0:
        return float(m0), float(m1), float(m2)
    return m0, m1, m2


def signed_moments(P: IntensityMeasure, t: FloatArray) -> tuple[FloatArray, FloatArray]:
    """|alpha|-weighted exponential moments split over alpha >= 0 and alpha < 0."""
    t = np.asarray(t, dtype=float)
    _check_guard(t)
    with np.errstate(over="ignore"):
        e = np.exp(np.multiply.outer(t, P.alphas)) * P.weights
    if not np.all(np.isfinite(e)):
        raise OverflowError("exponential moment overflows double precision")
    pos = np.where(P.alphas >= 0.0, P.alphas, 0.0)
    neg = np.where(P.alphas < 0.0, -P.alphas, 0.0)
    return e @ pos, e @ neg


def sinh_measure() -> IntensityMeasure:
    return make_atomic([(1.0, 0.5), (-1.0, 0.5)])


def liouville_measure() -> IntensityMeasure:
    return make_atomic([(1.0, 1.0)])


def model_measure(P: IntensityMeasure) -> IntensityMeasure:
    """Two-atom measure (delta at the support maximum + delta at the minimum) / 2."""
    ex = support_extrema(P)
    return make_atomic([(ex.alpha_plus_star, 0.5), (ex.alpha_minus_star, 0.5)])

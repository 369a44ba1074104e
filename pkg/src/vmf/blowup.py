"""Blow-up diagnostics for computed solutions.

Peaks of |v| stand in for blow-up points. Around each peak we measure the
local masses of the positive and negative vortex densities and test them
against the quadratic mass relation, compare v with the Green's function
superposition they predict, and check the Pohozaev identity on interior
balls.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .greens import GreensEvaluator, interpolate
from .grid import FlatTorus, Grid, GridError, UnitDisk, ball_weights, integrate, poisson_solve
from .kirchhoff import KirchhoffError, location_residual
from .measure import BetaCoefficients, MeasureError, beta_pm, support_extrema
from .solver import ProblemSpec, denominator, nonlinearity_field, potential_density

FloatArray = NDArray[np.float64]

EIGHT_PI = 8.0 * np.pi
# peaks at least this high are flagged as blow-up proxies
BLOWUP_HEIGHT = 6.0
DEFAULT_PEAK_THRESHOLD = 0.5
DEFAULT_MIN_SEPARATION = 0.1
DEFAULT_RV_RADIUS = 0.3
BALL_TOL = 1e-9


class BlowupError(ValueError):
    pass


@dataclass(frozen=True)
class Peak:
    location: tuple[float, float]
    sign: int
    height: float
    node: int = -1

    @property
    def blowup_proxy(self) -> bool:
        return self.height >= BLOWUP_HEIGHT


@dataclass(frozen=True)
class MassPair:
    """A point (s, t) = (m+, m-) of the mass plane."""

    s: float
    t: float

    def __post_init__(self) -> None:
        if self.s < 0.0 or self.t < 0.0:
            raise BlowupError(f"masses must be nonnegative, got ({self.s}, {self.t})")

    @property
    def m_plus(self) -> float:
        return self.s

    @property
    def m_minus(self) -> float:
        return self.t


# --- peaks -------------------------------------------------------------------


def _offsets(grid: Grid, p) -> FloatArray:
    d = grid.nodes - np.asarray(p, float)
    if grid.is_torus:
        L = np.array([grid.domain.period_x, grid.domain.period_y])
        d -= L * np.round(d / L)
    return d


def _distance(domain, a, b) -> float:
    d = np.asarray(a, float) - np.asarray(b, float)
    if isinstance(domain, FlatTorus):
        L = np.array([domain.period_x, domain.period_y])
        d -= L * np.round(d / L)
    return float(np.hypot(*d))


def detect_peaks(
    grid: Grid,
    v,
    threshold: float = DEFAULT_PEAK_THRESHOLD,
    min_separation: float = DEFAULT_MIN_SEPARATION,
) -> list[Peak]:
    """Strict local maxima of |v| over the 8 lattice neighbours with |v| >= threshold.

    Candidates are taken in decreasing height and dropped if closer than
    ``min_separation`` to one already kept. Missing neighbours read as 0
    (Dirichlet); on the torus the lattice wraps.
    """
    if threshold <= 0.0:
        raise BlowupError("peak threshold must be positive")
    v = grid.check(v)
    a = np.abs(grid.to_array(v))
    if grid.is_torus:
        pad = np.pad(a, 1, mode="wrap")
    else:
        pad = np.pad(a, 1, mode="constant")
    nx, ny = a.shape
    centre = pad[1:-1, 1:-1]
    is_max = np.ones_like(a, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                is_max &= centre > pad[1 + di:1 + di + nx, 1 + dj:1 + dj + ny]
    is_max &= centre >= threshold
    cand = []
    for i, j in zip(*np.nonzero(is_max)):
        node = grid.node_at(int(i), int(j))
        if node >= 0:
            cand.append(node)
    cand.sort(key=lambda k: -abs(v[k]))
    kept: list[Peak] = []
    for k in cand:
        loc = (float(grid.nodes[k, 0]), float(grid.nodes[k, 1]))
        if all(_distance(grid.domain, loc, p.location) >= min_separation for p in kept):
            kept.append(Peak(loc, 1 if v[k] > 0 else -1, float(abs(v[k])), k))
    return kept


# --- masses ------------------------------------------------------------------


def boundary_distance(peaks, domain) -> float:
    """Smallest distance from a peak to the boundary; +inf on the torus or with no peaks."""
    if isinstance(domain, FlatTorus) or not peaks:
        return math.inf
    pts = np.array([p.location if isinstance(p, Peak) else p for p in peaks], float)
    return float(np.min(domain.boundary_distance(pts)))


def _check_ball(domain, center, r: float) -> None:
    if r <= 0.0:
        raise BlowupError("ball radius must be positive")
    if isinstance(domain, FlatTorus):
        if 2.0 * r > min(domain.period_x, domain.period_y):
            raise BlowupError(f"ball radius {r} wraps around the torus")
        return
    dist = float(np.min(domain.boundary_distance(np.asarray(center, float))))
    if r > dist + BALL_TOL:
        raise BlowupError(f"ball of radius {r} at {tuple(center)} exits the domain (boundary distance {dist:.6g})")


def local_masses(spec: ProblemSpec, v, peak: Peak | tuple, r: float) -> MassPair:
    """Integrals of the positive and negative vortex densities over B_r(peak)."""
    center = peak.location if isinstance(peak, Peak) else tuple(peak)
    _check_ball(spec.domain, center, r)
    g = spec.grid
    plus, minus = nonlinearity_field(spec, v)
    w = ball_weights(g, center, r)
    return MassPair(max(float(w @ plus), 0.0), max(float(w @ minus), 0.0))


def mass_relation_residual(m: MassPair, beta: BetaCoefficients) -> float:
    """|(m+ - m-)^2 - 8π(β+ m+ + β- m-)|."""
    return abs((m.s - m.t) ** 2 - EIGHT_PI * (beta.beta_plus * m.s + beta.beta_minus * m.t))


def classify_mass_pair(m: MassPair, beta: BetaCoefficients) -> str:
    """Region tag: "D+" if s - t > 4πβ+, "D-" if t - s > 4πβ-, "both" or "neither"."""
    plus = m.s - m.t > 4.0 * np.pi * beta.beta_plus
    minus = m.t - m.s > 4.0 * np.pi * beta.beta_minus
    if plus and minus:
        return "both"
    if plus:
        return "D+"
    if minus:
        return "D-"
    return "neither"


def mass_curve_points(s: float, beta: BetaCoefficients) -> list[MassPair]:
    """Points (s, t) with t >= 0 on the curve (s - t)^2 = 8π(β+ s + β- t).

    For fixed s this is the quadratic t^2 - (2s + 8πβ-) t + s^2 - 8πβ+ s = 0.
    """
    if s < 0.0:
        raise BlowupError("s must be nonnegative")
    b = 2.0 * s + EIGHT_PI * beta.beta_minus
    c = s * s - EIGHT_PI * beta.beta_plus * s
    disc = b * b - 4.0 * c
    if disc < 0.0:
        return []
    sq = math.sqrt(disc)
    hi = 0.5 * (b + sq)
    roots = [hi] if hi >= 0.0 else []
    # stable small root; its sign is the sign of c (hi > 0), which survives
    # underflow where c / hi may not
    if hi > 0.0 and c >= 0.0:
        roots.insert(0, c / hi)
    roots = sorted(set(roots))
    return [MassPair(s, t) for t in roots]


def sample_mass_curve(n: int, beta: BetaCoefficients, s_max: float = 40.0 * np.pi) -> list[MassPair]:
    """Sweep s uniformly over [0, s_max] and collect all curve points."""
    out: list[MassPair] = []
    for s in np.linspace(0.0, s_max, n):
        out.extend(mass_curve_points(float(s), beta))
    return out


# --- residual vanishing ------------------------------------------------------


def residual_vanishing_error(
    grid: Grid,
    v,
    peaks,
    masses,
    greens: GreensEvaluator,
    exclusion_radius: float = DEFAULT_RV_RADIUS,
) -> float:
    """sup over nodes outside the union of B_r(peaks) of |v - Σ (m+ - m-) G(., peak)|."""
    v = grid.check(v)
    if not peaks:
        raise BlowupError("residual vanishing needs at least one peak")
    if len(masses) != len(peaks):
        raise BlowupError("need one mass pair per peak")
    locs = [np.asarray(p.location if isinstance(p, Peak) else p, float) for p in peaks]
    outside = np.ones(grid.node_count, dtype=bool)
    for loc in locs:
        d = _offsets(grid, loc)
        outside &= np.hypot(d[:, 0], d[:, 1]) >= exclusion_radius
    if not outside.any():
        raise BlowupError("exclusion balls cover the whole grid")
    x = grid.nodes[outside]
    profile = np.zeros(x.shape[0])
    for loc, m in zip(locs, masses):
        net = m.s - m.t
        if net != 0.0:
            profile += net * np.asarray(greens.G(x, loc), float)
    return float(np.max(np.abs(v[outside] - profile)))


# --- Pohozaev ----------------------------------------------------------------


def nodal_gradient(grid: Grid, v) -> tuple[FloatArray, FloatArray]:
    """Central-difference gradient at the nodes (missing neighbours read 0)."""
    a = grid.to_array(grid.check(v))
    h = grid.h
    if grid.is_torus:
        gx = (np.roll(a, -1, 0) - np.roll(a, 1, 0)) / (2 * h)
        gy = (np.roll(a, -1, 1) - np.roll(a, 1, 1)) / (2 * h)
    else:
        p = np.pad(a, 1)
        gx = (p[2:, 1:-1] - p[:-2, 1:-1]) / (2 * h)
        gy = (p[1:-1, 2:] - p[1:-1, :-2]) / (2 * h)
    i, j = grid.ij[:, 0], grid.ij[:, 1]
    return gx[i, j], gy[i, j]


@dataclass
class PohozaevTerms:
    center: tuple[float, float]
    radius: float
    kinetic: float
    surface_potential: float
    volume_potential: float
    form: str = "interior ball, flat metric"

    @property
    def residual(self) -> float:
        return abs(self.kinetic - self.surface_potential + self.volume_potential)


def pohozaev_terms(spec: ProblemSpec, v, center, r: float, n_quad: int | None = None) -> PohozaevTerms:
    """The three terms of the interior-ball Pohozaev identity

    r∮(|∇v|^2/2 - (n.∇v)^2) dσ - r∮Φ(v) dσ + 2∫_{B_r} Φ(v) dx = 0,

    where Φ' is the right-hand side. Midpoint rule on the circle with bilinear
    interpolation of nodal fields.
    """
    g = spec.grid
    v = g.check(v)
    c = np.asarray(center, float)
    _check_ball(spec.domain, c, r)
    if n_quad is None:
        n_quad = max(256, 8 * int(math.ceil(2 * np.pi * r / g.h)))
    theta = (np.arange(n_quad) + 0.5) * (2 * np.pi / n_quad)
    normal = np.column_stack([np.cos(theta), np.sin(theta)])
    pts = c + r * normal
    gx, gy = nodal_gradient(g, v)
    ux = interpolate(g, gx, pts)
    uy = interpolate(g, gy, pts)
    phi = potential_density(spec, v)
    ds = 2 * np.pi * r / n_quad
    dn = ux * normal[:, 0] + uy * normal[:, 1]
    kinetic = r * float(np.sum(0.5 * (ux**2 + uy**2) - dn**2)) * ds
    surface = r * float(np.sum(interpolate(g, phi, pts))) * ds
    volume = 2.0 * float(ball_weights(g, c, r) @ phi)
    return PohozaevTerms((float(c[0]), float(c[1])), float(r), kinetic, surface, volume)


def pohozaev_residual(spec: ProblemSpec, v, center, r: float) -> float:
    return pohozaev_terms(spec, v, center, r).residual


# --- Brezis-Merle ------------------------------------------------------------


@dataclass(frozen=True)
class BrezisMerleReport:
    delta: float
    l1_norm: float
    lhs: float
    rhs: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs


def brezis_merle_check(grid: Grid, f, delta: float) -> BrezisMerleReport:
    """Both sides of ∫ exp((4π - δ)|u| / ||f||_1) <= (4π^2/δ) diam^2 for -Δu = f, u = 0 on ∂D."""
    if grid.is_torus:
        raise BlowupError("the Brezis-Merle check needs a Dirichlet domain")
    if not 0.0 < delta < 4.0 * np.pi:
        raise BlowupError("delta must lie in (0, 4π)")
    f = grid.check(f)
    l1 = integrate(grid, np.abs(f))
    if not l1 > 0.0:
        raise BlowupError("f has zero L1 norm")
    u = poisson_solve(grid, f)
    lhs = integrate(grid, np.exp((4.0 * np.pi - delta) * np.abs(u) / l1))
    rhs = 4.0 * np.pi**2 / delta * grid.domain.diameter**2
    return BrezisMerleReport(float(delta), float(l1), float(lhs), float(rhs))


# --- report ------------------------------------------------------------------


@dataclass
class PeakReport:
    peak: Peak
    ball_radius: float
    masses: MassPair
    beta: BetaCoefficients | None
    mass_relation_residual: float | None
    region: str | None
    location_residual: float | None


@dataclass
class BlowupReport:
    lam: float
    denominator: float | list[float]
    peaks: list[PeakReport] = field(default_factory=list)
    rv_sup_error: float | None = None
    rv_exclusion_radius: float = DEFAULT_RV_RADIUS
    min_boundary_distance: float = math.inf
    pohozaev: list[PohozaevTerms] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        def fin(x):
            if x is None:
                return None
            return float(x) if math.isfinite(x) else None

        return {
            "lambda": self.lam,
            "denominator": self.denominator,
            "peaks": [
                {
                    "location": list(p.peak.location),
                    "sign": p.peak.sign,
                    "height": p.peak.height,
                    "blowup_proxy": p.peak.blowup_proxy,
                    "ball_radius": p.ball_radius,
                    "m_plus": p.masses.s,
                    "m_minus": p.masses.t,
                    "beta_plus": None if p.beta is None else p.beta.beta_plus,
                    "beta_minus": None if p.beta is None else p.beta.beta_minus,
                    "mass_relation_residual": fin(p.mass_relation_residual),
                    "mass_region": p.region,
                    "location_residual": fin(p.location_residual),
                }
                for p in self.peaks
            ],
            "rv_sup_error": fin(self.rv_sup_error),
            "rv_exclusion_radius": self.rv_exclusion_radius,
            "min_boundary_distance": fin(self.min_boundary_distance),
            "pohozaev": [
                {"center": list(t.center), "radius": t.radius, "residual": t.residual,
                 "kinetic": t.kinetic, "surface_potential": t.surface_potential,
                 "volume_potential": t.volume_potential, "form": t.form}
                for t in self.pohozaev
            ],
            "notes": list(self.notes),
        }


def default_ball_radius(peaks: list[Peak], domain) -> float:
    """0.25 * min(peak separation, boundary distance); on the torus a lone
    peak is separated from its own images by the shorter period."""
    seps = []
    if isinstance(domain, FlatTorus):
        seps.append(min(domain.period_x, domain.period_y))
    else:
        seps.append(boundary_distance(peaks, domain))
    for i, p in enumerate(peaks):
        for q in peaks[i + 1:]:
            seps.append(_distance(domain, p.location, q.location))
    return 0.25 * min(seps)


def default_greens(spec: ProblemSpec, peaks: list[Peak]) -> GreensEvaluator:
    if isinstance(spec.domain, (FlatTorus, UnitDisk)):
        return GreensEvaluator(spec.domain)
    return GreensEvaluator(spec.domain, "numeric-grid", grid=spec.grid, sources=[p.location for p in peaks])


def analyze(
    spec: ProblemSpec,
    v,
    threshold: float = DEFAULT_PEAK_THRESHOLD,
    min_separation: float = DEFAULT_MIN_SEPARATION,
    ball_radius: float | None = None,
    rv_radius: float = DEFAULT_RV_RADIUS,
    pohozaev_radii=None,
    greens: GreensEvaluator | None = None,
) -> BlowupReport:
    """Full diagnostic report for one solution."""
    g = spec.grid
    v = g.check(v)
    peaks = detect_peaks(g, v, threshold, min_separation)
    report = BlowupReport(spec.lam, denominator(spec, v), rv_exclusion_radius=rv_radius)
    report.min_boundary_distance = boundary_distance(peaks, spec.domain)
    if not peaks:
        report.notes.append("no peaks above threshold")
        return report
    r = default_ball_radius(peaks, spec.domain) if ball_radius is None else float(ball_radius)
    if greens is None:
        greens = default_greens(spec, peaks)
    extrema = support_extrema(spec.measure)
    masses = []
    for p in peaks:
        m = local_masses(spec, v, p, r)
        masses.append(m)
        try:
            beta = beta_pm(extrema, p.sign > 0, p.sign < 0)
            res, region = mass_relation_residual(m, beta), classify_mass_pair(m, beta)
        except MeasureError as exc:
            beta, res, region = None, None, None
            report.notes.append(f"peak at {p.location}: {exc}")
        report.peaks.append(PeakReport(p, r, m, beta, res, region, None))
    try:
        loc = location_residual([p.location for p in peaks], [m.s - m.t for m in masses], greens)
        for pr, val in zip(report.peaks, loc):
            pr.location_residual = float(val)
    except KirchhoffError as exc:
        report.notes.append(str(exc))
    try:
        report.rv_sup_error = residual_vanishing_error(g, v, peaks, masses, greens, rv_radius)
    except BlowupError as exc:
        report.notes.append(str(exc))
    radii = [r] if pohozaev_radii is None else list(pohozaev_radii)
    for p in peaks:
        for rp in radii:
            try:
                report.pohozaev.append(pohozaev_terms(spec, v, p.location, rp))
            except BlowupError as exc:
                report.notes.append(str(exc))
    return report


def check_snapshot(grid: Grid, values) -> FloatArray:
    try:
        return grid.check(values)
    except GridError as exc:
        raise BlowupError(str(exc)) from exc

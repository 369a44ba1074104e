import numpy as np
import pytest

from vmf.greens import (
    GreensError,
    GreensEvaluator,
    grad_green_disk,
    grad_green_half_disk,
    grad_robin_diagonal_disk,
    green_disk,
    green_estimate_check,
    green_half_disk,
    green_halfdisk_derivative_closed_form,
    green_numeric,
    green_torus,
    interpolate,
    mobius_chain,
    mobius_disk_to_halfplane,
    robin_disk,
    robin_numeric,
)
from vmf.grid import FlatTorus, Rectangle, UnitDisk, build_grid, integrate, laplacian_apply

TWO_PI = 2 * np.pi


def random_disk_points(rng, n, rmax=0.95):
    r = rmax * np.sqrt(rng.uniform(size=n))
    t = rng.uniform(0, TWO_PI, n)
    return np.column_stack([r * np.cos(t), r * np.sin(t)])


# --- disk ---------------------------------------------------------------------


def test_disk_radial():
    for r in (0.1, 0.5, 0.9):
        assert green_disk((r, 0.0), (0.0, 0.0)) == pytest.approx(np.log(1 / r) / TWO_PI, rel=1e-14)


def test_disk_pinned_value():
    assert green_disk((0.5, 0), (-0.5, 0)) == pytest.approx(np.log(1.25) / TWO_PI, rel=1e-14)
    assert np.log(1.25) / TWO_PI == pytest.approx(0.035514, abs=1e-6)


def test_disk_symmetric_and_positive(rng):
    x, y = random_disk_points(rng, 100), random_disk_points(rng, 100)
    gxy, gyx = green_disk(x, y), green_disk(y, x)
    assert np.max(np.abs(gxy - gyx)) <= 1e-14
    assert np.all(gxy > 0)


def test_disk_boundary_vanishing(rng):
    t = rng.uniform(0, TWO_PI, 50)
    x = (1 - 1e-4) * np.column_stack([np.cos(t), np.sin(t)])
    y = random_disk_points(rng, 50, 0.8)
    assert np.max(np.abs(green_disk(x, y))) < 1e-3


def test_disk_coincident():
    with pytest.raises(GreensError):
        green_disk((0.1, 0.1), (0.1, 0.1))


def test_robin_disk_values(rng):
    assert robin_disk((0, 0), (0, 0)) == 0.0
    assert robin_disk((0.6, 0), (0.6, 0)) == pytest.approx(np.log(0.64) / TWO_PI, rel=1e-14)
    assert robin_disk((0.6, 0), (0.6, 0)) == pytest.approx(-0.0710288, abs=1e-7)
    x, y = random_disk_points(rng, 100), random_disk_points(rng, 100)
    diff = green_disk(x, y) - robin_disk(x, y)
    assert np.allclose(diff, np.log(1 / np.hypot(*(x - y).T)) / TWO_PI, atol=1e-12)


def test_disk_gradients_match_fd(rng):
    x, y = random_disk_points(rng, 20, 0.9), random_disk_points(rng, 20, 0.9)
    e = 1e-6
    fd = np.column_stack([
        (green_disk(x + [e, 0], y) - green_disk(x - [e, 0], y)) / (2 * e),
        (green_disk(x + [0, e], y) - green_disk(x - [0, e], y)) / (2 * e),
    ])
    assert np.allclose(grad_green_disk(x, y), fd, rtol=1e-6, atol=1e-8)
    R = lambda p: robin_disk(p, p)
    fd = np.column_stack([(R(x + [e, 0]) - R(x - [e, 0])) / (2 * e), (R(x + [0, e]) - R(x - [0, e])) / (2 * e)])
    assert np.allclose(grad_robin_diagonal_disk(x), fd, rtol=1e-6, atol=1e-8)
    assert np.allclose(grad_robin_diagonal_disk(x), -x / (np.pi * (1 - np.sum(x * x, 1)))[:, None])


def test_disk_defining_pde():
    # 5-point Laplacian of the sampled kernel is O(h^2) away from source and rim
    errs = []
    for n in (64, 128):
        g = build_grid(UnitDisk(), n)
        r = np.hypot(g.x, g.y)
        G = np.zeros(g.node_count)
        G[r > 0] = green_disk(g.nodes[r > 0], (0.0, 0.0))
        lap = laplacian_apply(g, G)
        mask = (r >= 0.1) & (r < 0.9)
        errs.append(np.max(np.abs(lap[mask])))
    assert errs[0] / errs[1] >= 3.5
    assert errs[1] < 0.1


# --- half disk ----------------------------------------------------------------


def test_half_disk_pinned_value():
    # reference from 50-digit evaluation of the closed form
    assert green_half_disk((0.1, 0.2), (0.3, 0.4)) == pytest.approx(0.10108450905416165487, rel=1e-13)


def test_half_disk_boundary_vanishing():
    y = (0.2, 0.3)
    for t in np.linspace(0.05, np.pi - 0.05, 25):
        x = (1 - 1e-4) * np.array([np.cos(t), np.sin(t)])
        assert abs(green_half_disk(x, y)) < 1e-3
    assert abs(green_half_disk((0.5, 1e-6), y)) < 1e-4


def test_half_disk_domain_checks():
    with pytest.raises(GreensError):
        green_half_disk((0.1, -0.1), (0.2, 0.3))
    with pytest.raises(GreensError):
        green_half_disk((0.2, 0.3), (0.2, 0.3))


def test_half_disk_gradient_and_closed_form(rng):
    r = rng.uniform(0.1, 0.9, 30)
    t = rng.uniform(0.1, np.pi - 0.1, 30)
    x = np.column_stack([r * np.cos(t), r * np.sin(t)])
    y = np.array([0.05, 0.04])
    e = 1e-6
    fd = np.column_stack([
        (green_half_disk(x + [e, 0], y) - green_half_disk(x - [e, 0], y)) / (2 * e),
        (green_half_disk(x + [0, e], y) - green_half_disk(x - [0, e], y)) / (2 * e),
    ])
    assert np.allclose(grad_green_half_disk(x, y), fd, rtol=1e-6, atol=1e-7)
    # |∇G| is the modulus of the complex derivative
    assert np.allclose(np.abs(green_halfdisk_derivative_closed_form(x, y)), np.hypot(*fd.T), rtol=1e-6)


def test_estimate_bound_arithmetic():
    rep = green_estimate_check(0.1, 10)
    assert rep.value_bound == pytest.approx(np.log(2 * 1.1 / 0.9) / TWO_PI, rel=1e-15)
    assert rep.value_bound == pytest.approx(0.1422555, abs=1e-7)


@pytest.mark.parametrize("delta", [0.05, 0.1])
def test_estimate_check_holds(delta):
    rep = green_estimate_check(delta, 10_000)
    assert rep.ok
    assert rep.max_value_ratio < 1 and rep.max_gradient_ratio < 1


def test_estimate_check_is_seeded():
    a = green_estimate_check(0.1, 500, seed=7)
    b = green_estimate_check(0.1, 500, seed=7)
    c = green_estimate_check(0.1, 500, seed=8)
    assert a.max_value_ratio == b.max_value_ratio
    assert a.max_value_ratio != c.max_value_ratio


def test_estimate_check_delta_range():
    with pytest.raises(GreensError):
        green_estimate_check(0.3, 10)


# --- Möbius ---------------------------------------------------------------------


def test_mobius_values():
    assert mobius_disk_to_halfplane(-1) == 0
    assert mobius_disk_to_halfplane(0) == pytest.approx(1j)
    with pytest.raises(GreensError):
        mobius_disk_to_halfplane(1.0)
    assert mobius_chain(0, 1j, 2.0) == pytest.approx(0.0)


def test_mobius_maps_into_upper_half_plane(rng):
    z = random_disk_points(rng, 200) @ np.array([1, 1j])
    assert np.all(mobius_disk_to_halfplane(z).imag > 0)


def test_mobius_cauchy_riemann(rng):
    z = random_disk_points(rng, 100, 0.9) @ np.array([1, 1j])
    e = 1e-6
    f = mobius_disk_to_halfplane
    dx = (f(z + e) - f(z - e)) / (2 * e)
    dy = (f(z + 1j * e) - f(z - 1j * e)) / (2 * e)
    # u_x = v_y and u_y = -v_x
    assert np.max(np.abs(dx.real - dy.imag)) <= 1e-6 * np.max(np.abs(dx))
    assert np.max(np.abs(dy.real + dx.imag)) <= 1e-6 * np.max(np.abs(dx))


# --- torus ----------------------------------------------------------------------


def test_torus_zero_mean():
    g = build_grid(FlatTorus(1, 1), 160)
    G = green_torus(g.nodes, np.array([0.3, 0.7]))
    assert abs(integrate(g, G)) <= 1e-10


def test_torus_translation_invariance(rng):
    x, y, t = rng.uniform(0, 1, (3, 10, 2))
    assert np.allclose(green_torus(x + t, y + t), green_torus(x, y), atol=1e-10)


def test_torus_needs_modes():
    with pytest.raises(GreensError):
        green_torus((0.1, 0.1), (0.2, 0.2), K=16)


def test_torus_defining_equation_weak_form():
    # -ΔG = δ_y - 1 tested against φ = cos^8(πx) cos^8(πy), which vanishes
    # to high order at y = (1/2, 1/2): ∫ G (-Δ_h φ) should be -∫φ up to O(h^2)
    errs = []
    for n in (32, 64):
        g = build_grid(FlatTorus(1, 1), n)
        G = green_torus(g.nodes, np.array([0.5, 0.5]))
        phi = np.cos(np.pi * g.x) ** 8 * np.cos(np.pi * g.y) ** 8
        lhs = integrate(g, G * -laplacian_apply(g, phi))
        errs.append(abs(lhs + integrate(g, phi)))
    assert errs[1] < 1e-3
    assert errs[0] / errs[1] >= 3.5


@pytest.mark.xfail(strict=True, reason="square Fourier cutoff leaves an O(1/K) Gibbs term that -Δ_h amplifies by 1/h^2")
def test_torus_defining_equation_pointwise():
    g = build_grid(FlatTorus(1, 1), 32)
    y = g.nodes[g.nearest_node((0.5, 0.5))]
    lap = -laplacian_apply(g, green_torus(g.nodes, y))
    mask = np.hypot(*(g.nodes - y).T) > 0.25
    assert np.max(np.abs(lap[mask] + 1.0)) < 50 * g.h**2


def test_torus_robin_is_translation_invariant():
    ev = GreensEvaluator(FlatTorus(1, 1))
    a, b = ev.robin((0.2, 0.3)), ev.robin((0.7, 0.1))
    assert a == pytest.approx(b, abs=1e-8)
    assert np.allclose(ev.grad_robin_diagonal(np.array([0.2, 0.3])), 0.0)


def test_torus_regular_part_gradient_vanishes_at_source():
    ev = GreensEvaluator(FlatTorus(1, 1))
    assert np.max(np.abs(ev.grad_H((0.5, 0.5), (0.5, 0.5)))) <= 1e-8


# --- numeric ----------------------------------------------------------------------


def test_numeric_green_vs_analytic_disk():
    errs = []
    for n in (64, 128):
        g = build_grid(UnitDisk(), n)
        k = g.nearest_node((0, 0))
        col = green_numeric(g, k)
        far = np.hypot(g.x, g.y) > 0.1
        errs.append(np.max(np.abs(col[far] - green_disk(g.nodes[far], (0.0, 0.0)))))
    assert errs[1] <= 5e-3
    assert errs[0] / errs[1] >= 3.5


def test_numeric_symmetry():
    g = build_grid(UnitDisk(), 128)
    rng = np.random.default_rng(3)
    nodes = rng.choice(np.nonzero(np.hypot(g.x, g.y) < 0.8)[0], 20, replace=False)
    for a, b in zip(nodes[:10], nodes[10:]):
        ga, gb = green_numeric(g, a), green_numeric(g, b)
        assert abs(ga[b] - gb[a]) <= 2e-3


def test_numeric_positivity_rectangle():
    g = build_grid(Rectangle(1, 1), 32)
    col = green_numeric(g, g.nearest_node((0.5, 0.5)))
    assert col.min() > 0


def test_robin_numeric_vs_closed_form():
    g = build_grid(UnitDisk(), 64)
    for p in ((0.0, 0.0), (0.25, 0.0)):
        k = g.nearest_node(p)
        assert robin_numeric(g, k) == pytest.approx(float(robin_disk(g.nodes[k], g.nodes[k])), abs=2e-3)


def test_numeric_evaluator_needs_cached_source():
    g = build_grid(UnitDisk(), 32)
    ev = GreensEvaluator(g.domain, "numeric-grid", grid=g, sources=[(0.0, 0.0)])
    assert ev.G(np.array([0.5, 0.0]), np.array([0.0, 0.0])) == pytest.approx(np.log(2) / TWO_PI, abs=5e-3)
    with pytest.raises(GreensError):
        ev.G(np.array([0.5, 0.0]), np.array([0.3, 0.3]))


def test_interpolate_reproduces_linear(square32):
    g = square32
    u = 2 * g.x - 3 * g.y + 1
    p = np.array([[0.41, 0.37], [0.5, 0.5], [0.13, 0.88]])
    assert np.allclose(interpolate(g, u, p), 2 * p[:, 0] - 3 * p[:, 1] + 1)

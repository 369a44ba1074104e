import numpy as np
import pytest

from vmf.grid import (
    FlatTorus,
    GridError,
    Rectangle,
    UnitDisk,
    ball_weights,
    box_disk_area,
    build_grid,
    discrete_delta,
    integrate,
    laplacian_apply,
    poisson_solve,
    read_field_csv,
    write_field_csv,
)


def test_rectangle_counting():
    g = build_grid(Rectangle(1, 1), 4)
    assert g.node_count == 9
    assert g.h == 0.25


def test_torus_counting():
    g = build_grid(FlatTorus(1, 1), 4)
    assert g.node_count == 16


def test_disk_count_near_area_over_h2(disk64):
    expected = np.pi / disk64.h**2
    assert abs(disk64.node_count - expected) / expected < 0.01
    assert np.all(np.hypot(disk64.x, disk64.y) < 1.0)


def test_disk_arms_in_range(disk64):
    assert np.all(disk64.arms > 0) and np.all(disk64.arms <= disk64.h + 1e-15)
    assert disk64.arms.min() >= 1e-3 * disk64.h


def test_too_coarse():
    with pytest.raises(GridError):
        build_grid(UnitDisk(), 3)


def test_bad_domains():
    with pytest.raises(GridError):
        Rectangle(0, 1)
    with pytest.raises(GridError):
        FlatTorus(1, -1)


def test_quadratic_exact_on_rectangle(square32):
    g = square32
    u = g.x**2
    lap = laplacian_apply(g, u)
    inner = (g.x > 2 * g.h) & (g.x < 1 - 2 * g.h) & (g.y > 2 * g.h) & (g.y < 1 - 2 * g.h)
    assert np.allclose(lap[inner], 2.0, atol=1e-9)


def test_disk_quadratic_exact(disk64):
    # Shortley-Weller reproduces quadratics, including the cut cells
    g = disk64
    u = 1.0 - g.x**2 - g.y**2
    assert np.allclose(laplacian_apply(g, u), -4.0, atol=1e-8)


def test_torus_eigenfunction(torus32):
    g = torus32
    u = np.sin(2 * np.pi * g.x) * np.sin(2 * np.pi * g.y)
    err = np.max(np.abs(laplacian_apply(g, u) + 8 * np.pi**2 * u))
    assert err < 8 * np.pi**2 * 0.05


def test_torus_constant_and_conservation(torus32, rng):
    g = torus32
    assert np.max(np.abs(laplacian_apply(g, np.full(g.node_count, 3.0)))) == 0.0
    for _ in range(5):
        assert abs(integrate(g, laplacian_apply(g, rng.normal(size=g.node_count)))) < 1e-10


def test_integrals_of_one():
    assert integrate(build_grid(Rectangle(1, 1), 32), np.ones(31 * 31)) == pytest.approx(1.0, abs=2 * 1 / 32)
    g = build_grid(UnitDisk(), 128)
    assert integrate(g, np.ones(g.node_count)) == pytest.approx(np.pi, rel=1e-2)
    t = build_grid(FlatTorus(1, 1), 16)
    assert integrate(t, np.ones(t.node_count)) == pytest.approx(1.0, abs=1e-15)


def test_disk_weights_exact_area(disk64):
    assert disk64.weights.sum() == pytest.approx(np.pi, rel=1e-12)


@pytest.mark.parametrize("domain", [Rectangle(1, 1), FlatTorus(1, 1)])
def test_operator_symmetric(domain, rng):
    g = build_grid(domain, 24)
    for _ in range(20):
        u, w = rng.normal(size=(2, g.node_count))
        assert abs(laplacian_apply(g, u) @ w - u @ laplacian_apply(g, w)) < 1e-10 * g.node_count / g.h**2


def test_symmetric_disk_variant(rng):
    g = build_grid(UnitDisk(), 32, stencil="symmetric")
    L = g.laplacian
    assert abs(L - L.T).max() < 1e-10


def test_shortley_weller_not_symmetric(disk64):
    L = disk64.laplacian
    assert abs(L - L.T).max() > 0


def test_sine_oracle_second_order():
    errs = []
    for n in (32, 64):
        g = build_grid(Rectangle(1, 1), n)
        exact = np.sin(np.pi * g.x) * np.sin(np.pi * g.y)
        u = poisson_solve(g, 2 * np.pi**2 * exact)
        errs.append(np.max(np.abs(u - exact)))
    assert errs[0] / errs[1] >= 3.5
    assert errs[1] < 1e-3


def test_zero_rhs(disk64):
    assert np.all(poisson_solve(disk64, np.zeros(disk64.node_count)) == 0)


def test_maximum_principle(disk64, rng):
    for _ in range(3):
        f = rng.uniform(0, 1, disk64.node_count)
        assert poisson_solve(disk64, f).min() >= -1e-12


def test_torus_cos_mode(torus32):
    g = torus32
    u = poisson_solve(g, np.cos(2 * np.pi * g.x), zero_mean=True)
    lam = 4 / g.h**2 * np.sin(np.pi / 32) ** 2  # discrete symbol of the mode
    assert np.allclose(u, np.cos(2 * np.pi * g.x) / lam, atol=1e-12)
    assert np.allclose(u, np.cos(2 * np.pi * g.x) / (4 * np.pi**2), atol=1e-4)
    assert abs(integrate(g, u)) < 1e-14


def test_torus_requires_zero_mean(torus32):
    with pytest.raises(GridError):
        poisson_solve(torus32, np.ones(torus32.node_count), zero_mean=True)
    with pytest.raises(GridError):
        poisson_solve(torus32, np.cos(2 * np.pi * torus32.x))


def test_grid_mismatch(disk64):
    with pytest.raises(GridError):
        laplacian_apply(disk64, np.zeros(5))


def test_discrete_delta_integrates_to_one(square32):
    k = square32.nearest_node((0.5, 0.5))
    assert integrate(square32, discrete_delta(square32, k)) == pytest.approx(1.0)


def test_box_disk_area_cases():
    assert box_disk_area(-2, 2, -2, 2) == pytest.approx(np.pi)
    assert box_disk_area(0, 2, 0, 2) == pytest.approx(np.pi / 4)
    assert box_disk_area(-0.1, 0.1, -0.1, 0.1) == pytest.approx(0.04)
    assert box_disk_area(1.5, 2, 0, 1) == 0.0
    # a half-plane cut through the centre
    assert box_disk_area(0, 3, -3, 3) == pytest.approx(np.pi / 2)


def test_ball_weights(disk64, torus32):
    w = ball_weights(disk64, (0.1, -0.2), 0.3)
    assert w.sum() == pytest.approx(np.pi * 0.09, rel=1e-12)
    w = ball_weights(torus32, (0.0, 0.0), 0.2)  # wraps across the corner
    assert w.sum() == pytest.approx(np.pi * 0.04, rel=1e-12)


def test_csv_roundtrip(tmp_path, disk64, rng):
    u = rng.normal(size=disk64.node_count)
    write_field_csv(tmp_path / "f.csv", disk64, u)
    first = (tmp_path / "f.csv").read_text().splitlines()
    assert first[0] == "x,y,value"
    pts, vals = read_field_csv(tmp_path / "f.csv", disk64)
    assert np.array_equal(vals, u)
    with pytest.raises(GridError):
        read_field_csv(tmp_path / "f.csv", build_grid(UnitDisk(), 32))

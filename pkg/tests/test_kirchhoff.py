import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vmf.greens import GreensEvaluator
from vmf.grid import FlatTorus, UnitDisk
from vmf.kirchhoff import (
    KirchhoffError,
    VortexConfig,
    dipole_half_separation,
    find_critical,
    gradient,
    gradient_fd,
    hamiltonian,
    location_residual,
)

DISK = GreensEvaluator(UnitDisk())
TORUS = GreensEvaluator(FlatTorus(1.0, 1.0))


def cfg(points, rs):
    return VortexConfig(np.array(points, float), np.array(rs, float))


def random_disk_config(rng, N, rmax=0.8):
    while True:
        rad = rmax * np.sqrt(rng.uniform(0, 1, N))
        th = rng.uniform(0, 2 * np.pi, N)
        pts = np.column_stack([rad * np.cos(th), rad * np.sin(th)])
        d = np.hypot(*(pts[:, None] - pts[None]).transpose(2, 0, 1))
        if N == 1 or d[np.triu_indices(N, 1)].min() > 0.1:
            return cfg(pts, rng.uniform(-2, 2, N))


# --- configuration validation -----------------------------------------------------


def test_config_validation():
    with pytest.raises(KirchhoffError):
        cfg([[0.1, 0.0]], [1, 2])
    # coincidence depends on the domain (torus images), so it is checked on use
    with pytest.raises(KirchhoffError):
        hamiltonian(cfg([[0.1, 0.0], [0.1, 0.0]], [1, -1]), DISK)
    with pytest.raises(KirchhoffError):
        gradient(cfg([[0.0, 0.5], [1.0, 0.5]], [1, -1]), TORUS)
    with pytest.raises(KirchhoffError):
        hamiltonian(cfg([[1.2, 0.0]], [1]), DISK)


# --- Hamiltonian ------------------------------------------------------------------


def test_single_vortex_values():
    assert hamiltonian(cfg([[0, 0]], [1]), DISK) == pytest.approx(0.0, abs=1e-15)
    val = hamiltonian(cfg([[0.6, 0.0]], [2]), DISK)
    assert val == pytest.approx(4 * np.log(0.64) / (2 * np.pi), rel=1e-12)
    assert val == pytest.approx(-0.2841152, abs=1e-7)


def test_dipole_value_pinned():
    a = 0.4
    expected = (np.log(1 - a * a) - np.log((1 + a * a) / (2 * a))) / np.pi
    val = hamiltonian(cfg([[a, 0], [-a, 0]], [1, -1]), DISK)
    assert val == pytest.approx(expected, rel=1e-12)
    assert val == pytest.approx(-0.17377076, abs=1e-8)


def test_relabeling_invariance(rng):
    c = random_disk_config(rng, 4)
    perm = np.array([2, 0, 3, 1])
    c2 = cfg(c.points[perm], c.intensities[perm])
    assert hamiltonian(c2, DISK) == pytest.approx(hamiltonian(c, DISK), rel=1e-12)
    assert np.allclose(gradient(c2, DISK), gradient(c, DISK)[perm], atol=1e-12)


def test_sign_flip_invariance(rng):
    c = random_disk_config(rng, 3)
    flipped = cfg(c.points, -c.intensities)
    assert hamiltonian(flipped, DISK) == pytest.approx(hamiltonian(c, DISK), rel=1e-12)
    assert np.allclose(gradient(flipped, DISK), gradient(c, DISK), atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(0, 2 * np.pi), st.integers(0, 2**32 - 1))
def test_rotation_equivariance(theta, seed):
    c = random_disk_config(np.random.default_rng(seed), 3)
    R = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    rc = cfg(c.points @ R.T, c.intensities)
    assert hamiltonian(rc, DISK) == pytest.approx(hamiltonian(c, DISK), rel=1e-10, abs=1e-12)
    assert np.max(np.abs(gradient(rc, DISK) - gradient(c, DISK) @ R.T)) <= 1e-10


# --- gradient ---------------------------------------------------------------------------


def test_gradient_at_centre_vanishes():
    assert np.max(np.abs(gradient(cfg([[0, 0]], [1]), DISK))) <= 1e-15


def test_single_vortex_gradient_closed_form():
    x = np.array([0.3, -0.4])
    g = gradient(cfg([x], [1]), DISK)[0]
    assert np.allclose(g, -x / (np.pi * (1 - x @ x)), rtol=1e-12)


def test_gradient_matches_fd_disk(rng):
    for _ in range(20):
        c = random_disk_config(rng, int(rng.integers(1, 5)))
        g = gradient(c, DISK)
        fd = gradient_fd(c, DISK)
        assert np.max(np.abs(g - fd)) <= 1e-6 * max(1.0, np.max(np.abs(g)))


def test_gradient_matches_fd_torus(rng):
    for _ in range(5):
        pts = rng.uniform(0, 1, (3, 2))
        c = cfg(pts, rng.uniform(-2, 2, 3))
        try:
            g = gradient(c, TORUS)
        except KirchhoffError:
            continue
        fd = gradient_fd(c, TORUS, step=1e-5)
        assert np.max(np.abs(g - fd)) <= 1e-5 * max(1.0, np.max(np.abs(g)))


# --- critical points -----------------------------------------------------------------------


def test_single_vortex_goes_to_centre():
    c, rep = find_critical(cfg([[0.3, 0.2]], [1]), DISK, tol=1e-10)
    assert rep.converged and rep.iterations <= 50
    assert np.hypot(*c.points[0]) <= 1e-8


def test_dipole_symmetric_pair():
    a_star = dipole_half_separation()
    assert a_star == pytest.approx(0.48586827, abs=1e-8)
    assert a_star**4 + 4 * a_star**2 - 1 == pytest.approx(0.0, abs=1e-14)
    c, rep = find_critical(cfg([[0.3, 0], [-0.3, 0]], [1, -1]), DISK, tol=1e-10)
    assert rep.converged
    assert np.allclose(c.points, [[a_star, 0], [-a_star, 0]], atol=1e-8)


def test_dipole_reduced_function_root():
    # 1-D oracle: derivative of the symmetric restriction by bisection
    f = lambda a: (np.log(1 - a * a) - np.log((1 + a * a) / (2 * a))) / np.pi
    df = lambda a: (f(a + 1e-7) - f(a - 1e-7)) / 2e-7
    lo, hi = 0.1, 0.9
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if df(lo) * df(mid) <= 0:
            hi = mid
        else:
            lo = mid
    assert 0.5 * (lo + hi) == pytest.approx(dipole_half_separation(), abs=1e-6)


def test_torus_single_vortex_degenerate():
    c0 = cfg([[0.3, 0.7]], [1])
    assert np.max(np.abs(gradient(c0, TORUS))) <= 1e-8
    c, rep = find_critical(c0, TORUS)
    assert rep.degenerate and np.array_equal(c.points, c0.points)


def test_critical_point_satisfies_location_condition():
    tol = 1e-10
    c, rep = find_critical(cfg([[0.3, 0.1], [-0.2, -0.1]], [1, -1]), DISK, tol=tol)
    assert rep.converged
    res = location_residual(c.points, c.intensities, DISK)
    assert np.all(res <= 10 * tol)


def test_critical_three_vortices_torus():
    c, rep = find_critical(cfg([[0.3, 0.5], [0.7, 0.5], [0.5, 0.1]], [1, 1, -2]), TORUS, tol=1e-9)
    if rep.converged:
        assert np.all(location_residual(c.points, c.intensities, TORUS) <= 1e-8)


# --- location residual ------------------------------------------------------------------------


def test_location_residual_centre():
    assert location_residual([[0, 0]], [8 * np.pi], DISK)[0] <= 1e-10


def test_location_residual_off_centre():
    val = location_residual([[0.3, 0.0]], [5.0], DISK)[0]
    assert val == pytest.approx(0.3 / (2 * np.pi * 0.91), rel=1e-10)
    assert val == pytest.approx(0.0524687, abs=1e-7)


def test_location_residual_torus_single_peak():
    assert location_residual([[0.5, 0.5]], [3.0], TORUS)[0] <= 1e-8


def test_location_residual_torus_dipole_is_critical():
    res = location_residual([[0.5, 0.5], [0.0, 0.0]], [4.0, -4.0], TORUS)
    assert np.all(res <= 1e-8)


def test_location_residual_zero_mass():
    with pytest.raises(KirchhoffError):
        location_residual([[0.1, 0.0]], [0.0], DISK)


def test_location_residual_equivalent_to_hamiltonian_gradient(rng):
    # with r_i = net masses, ∇_i H_N = 2 r_i^2 * (bracket gradient)
    c = random_disk_config(rng, 3)
    g = gradient(c, DISK)
    res = location_residual(c.points, c.intensities, DISK)
    assert np.allclose(np.hypot(*g.T), 2 * c.intensities**2 * res, rtol=1e-10)

"""Critical configurations of the point-vortex Hamiltonian.

    python demos/vortex_pairs.py
"""
import numpy as np

from vmf.greens import GreensEvaluator
from vmf.grid import FlatTorus, UnitDisk
from vmf.kirchhoff import VortexConfig, dipole_half_separation, find_critical, hamiltonian, location_residual

disk = GreensEvaluator(UnitDisk())

# %% a single vortex drifts to the centre, where the Robin function is largest
cfg, rep = find_critical(VortexConfig([[0.3, 0.2]], [1.0]), disk)
print(f"one vortex: {cfg.points[0]}, |grad| = {rep.gradient_norm:.1e}, {rep.iterations} iterations")

# %% a +/- pair settles on a diameter at +-a*, with a*^4 + 4 a*^2 = 1
cfg, rep = find_critical(VortexConfig([[0.3, 0.0], [-0.3, 0.0]], [1.0, -1.0]), disk)
print(f"dipole: {cfg.points.round(10).tolist()}  a* = {dipole_half_separation():.10f}")
print(f"  H = {hamiltonian(cfg, disk):.8f}, location residuals {location_residual(cfg.points, cfg.intensities, disk)}")

# %% the energy along the symmetric family, sampled
print("  a      H_2(a)")
for a in np.linspace(0.2, 0.8, 7):
    print(f"  {a:.2f}  {hamiltonian(VortexConfig([[a, 0], [-a, 0]], [1, -1]), disk):+.5f}")

# %% four alternating vortices on a square settle at a common radius
a = 0.4
cfg, rep = find_critical(VortexConfig([[a, 0], [0, a], [-a, 0], [0, -a]], [1.0, -1.0, 1.0, -1.0]), disk)
print(f"quadrupole: radius {np.hypot(*cfg.points.T).round(8)}, converged {rep.converged}")

# %% like-signed vortices repel each other and the wall pulls them out:
# there is no static equilibrium and the search says so
cfg, rep = find_critical(VortexConfig([[0.3, 0.0], [-0.1, 0.25], [-0.15, -0.2]], [1.0, 1.0, 1.0]), disk)
print(f"three like-signed vortices: converged {rep.converged} ({rep.message})")

# %% on the torus one vortex is critical anywhere; an antipodal pair is critical too
torus = GreensEvaluator(FlatTorus(1.0, 1.0))
_, rep = find_critical(VortexConfig([[0.2, 0.7]], [1.0]), torus)
print(f"torus, one vortex: degenerate = {rep.degenerate} ({rep.message})")
res = location_residual([[0.5, 0.5], [0.0, 0.0]], [1.0, -1.0], torus)
print(f"torus, antipodal pair: location residuals {res}")

"""sinh-Poisson branches: one positive vortex on the disk, a vortex pair on the torus.

    python demos/sinh_concentration.py
"""
import numpy as np

from vmf.blowup import analyze
from vmf.scenarios import sinh_branch, torus_dipole

# %% the disk branch bifurcates from v = 0; a bump seed selects the positive side
sc = sinh_branch()
trace = sc.run()
print(f"{sc.description}: complete = {trace.complete}")
for p, s in zip(trace.points, trace.solutions):
    rep = analyze(sc.spec.with_lambda(p.lam), s.v)
    pk = rep.peaks[0]
    print(f"  lambda {p.lam:5.1f}  max v {p.max_v:6.3f}  m+ {pk.masses.s:7.3f}  m- {pk.masses.t:6.3f}  "
          f"region {pk.region:7s} blow-up proxy {pk.peak.blowup_proxy}")

# %% on the flat torus v = 0 solves the equation for every lambda; past
# 4 pi^2 a branch with one positive and one negative vortex appears
sc = torus_dipole()
trace = sc.run()
print(f"\n{sc.description}: complete = {trace.complete}")
g = sc.spec.grid
for p, s in zip(trace.points, trace.solutions):
    mean = g.weights @ s.v
    print(f"  lambda {p.lam:5.1f}  max v {p.max_v:6.3f}  min v {p.min_v:7.3f}  mean {mean:+.1e}")

rep = analyze(sc.spec.with_lambda(trace.points[-1].lam), trace.solutions[-1].v)
for pk in rep.peaks:
    print(f"  peak {pk.peak.sign:+d} at {pk.peak.location}  m+ {pk.masses.s:6.3f}  m- {pk.masses.t:6.3f}  "
          f"location residual {pk.location_residual:.1e}")
print(f"  ball radius {rep.peaks[0].ball_radius:.3f}, residual-vanishing error {rep.rv_sup_error:.3f}")
print(f"  antipodal symmetry v(x) = -v(x + (1/2, 1/2)): "
      f"{np.max(np.abs(g.to_array(trace.solutions[-1].v) + np.roll(g.to_array(trace.solutions[-1].v), (g.shape[0] // 2, g.shape[1] // 2), (0, 1)))):.1e}")

"""Liouville branch on the unit disk.

Walk up the exact radial family v = 2 log((1 + mu) / (1 + mu r^2)),
lambda = 8 pi mu / (1 + mu), compare the computed solutions with it and look
at how the mass in a small ball around the peak creeps toward 8 pi.

    python demos/liouville_branch.py [n]
"""
import sys

import numpy as np

from vmf.blowup import analyze, local_masses
from vmf.scenarios import liouville_ladder
from vmf.solver import continuation, liouville_disk_exact

n = int(sys.argv[1]) if len(sys.argv) > 1 else 64
mus = (0.5, 1.0, 2.0, 4.0, 8.0)

# %% solve the ladder, each step seeded by the previous solution
sc = liouville_ladder(n, mus)
trace = sc.run()
g = sc.spec.grid
r = np.hypot(g.x, g.y)
print(f"unit disk, n = {n}, {g.node_count} nodes, h = {g.h:.4f}")
print(f"{'mu':>5} {'lambda':>9} {'v(0)':>9} {'max err':>9} {'newton':>6}")
for mu, p, s in zip(mus, trace.points, trace.solutions):
    err = np.max(np.abs(s.v - liouville_disk_exact(mu, r)))
    print(f"{mu:5.1f} {p.lam:9.5f} {p.max_v:9.5f} {err:9.2e} {p.newton_iters:6d}")

# %% local masses: in the continuum m+(r) = 8 pi mu r^2 / (1 + mu r^2)
print("\nmass in B_r(0) against the closed form")
for rad in (0.25, 0.5):
    for mu, p, s in zip(mus, trace.points, trace.solutions):
        m = local_masses(sc.spec.with_lambda(p.lam), s.v, (0.0, 0.0), rad).s
        exact = 8 * np.pi * mu * rad**2 / (1 + mu * rad**2)
        print(f"  r = {rad:.2f}  mu = {mu:3.1f}  m+ = {m:8.4f}  closed form {exact:8.4f}  8pi = {8 * np.pi:.4f}")

# %% the full report for the top of the ladder
rep = analyze(sc.spec.with_lambda(trace.points[-1].lam), trace.solutions[-1].v)
peak = rep.peaks[0]
print(f"\npeak at {peak.peak.location}, height {peak.peak.height:.3f}, "
      f"mass relation residual {peak.mass_relation_residual:.3f}, region {peak.region}")
print(f"location residual {peak.location_residual:.1e}, boundary distance {rep.min_boundary_distance:.3f}")
for t in rep.pohozaev:
    print(f"Pohozaev on B_{t.radius:.2f}: kinetic {t.kinetic:.4f}, surface {t.surface_potential:.4f}, "
          f"volume {t.volume_potential:.4f}, defect {t.residual:.2e}")

# %% past 8 pi there is no solution: continuation stops and reports the gap
over = sc.spec.with_lambda(1.0)

stopped = continuation(over, [6 * np.pi, 7 * np.pi, 8.2 * np.pi])
print(f"\nladder through 8.2 pi: complete = {stopped.complete}, fold between {stopped.fold_candidate}")

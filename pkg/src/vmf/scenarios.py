"""Named continuation scenarios used by the demos and the acceptance suite."""
from __future__ import annotations

from dataclasses import dataclass

from .grid import FlatTorus, UnitDisk
from .measure import liouville_measure, make_atomic, sinh_measure
from .solver import ContinuationTrace, ProblemSpec, SeedPolicy, continuation, liouville_disk_lambda

LIOUVILLE_MUS = (0.5, 1.0, 2.0, 4.0)


@dataclass(frozen=True)
class Scenario:
    name: str
    spec: ProblemSpec
    lambdas: tuple[float, ...]
    seed: SeedPolicy
    description: str

    def run(self, tol: float = 1e-9) -> ContinuationTrace:
        return continuation(self.spec, self.lambdas, self.seed, tol)


def liouville_ladder(n: int = 128, mus=LIOUVILLE_MUS) -> Scenario:
    lambdas = tuple(liouville_disk_lambda(mu) for mu in mus)
    return Scenario(
        "liouville-disk",
        ProblemSpec(UnitDisk(), n, liouville_measure(), lambdas[0]),
        lambdas,
        SeedPolicy("previous"),
        "Liouville equation on the unit disk along the exact radial family",
    )


def sinh_branch(n: int = 64) -> Scenario:
    # first bifurcation from v = 0 sits near lambda = 18.2 at this resolution;
    # the bump pushes the first solve onto the positive branch
    return Scenario(
        "sinh-disk",
        ProblemSpec(UnitDisk(), n, sinh_measure(), 18.5),
        (18.5, 19.0, 20.0, 21.0, 22.0, 23.0, 24.0),
        SeedPolicy("bump", (0.0, 0.0), 2.0, 0.3),
        "sinh-Poisson on the unit disk, concentrating positive branch",
    )


def deterministic_ladder(n: int = 32) -> Scenario:
    P = make_atomic([(-0.4, 0.3), (0.2, 0.3), (0.9, 0.4)])
    return Scenario(
        "ss-disk",
        ProblemSpec(UnitDisk(), n, P, 5.0, "ss"),
        (5.0, 10.0, 15.0, 20.0, 25.0),
        SeedPolicy("previous"),
        "per-atom normalized variant with three intensities on the unit disk",
    )


def torus_dipole(n: int = 48) -> Scenario:
    # v = 0 loses stability at lambda = 4 pi^2 on the unit torus
    return Scenario(
        "sinh-torus",
        ProblemSpec(FlatTorus(1.0, 1.0), n, sinh_measure(), 41.0, "torus-neri"),
        (41.0, 42.0, 43.0, 44.0, 45.0),
        SeedPolicy("bump", (0.5, 0.5), 2.0, 0.15),
        "sinh-Poisson on the flat unit torus, vortex-pair branch",
    )


def delivered() -> list[Scenario]:
    return [liouville_ladder(), sinh_branch(), deterministic_ladder(), torus_dipole()]

import math

import numpy as np
import pytest

from vmf.config import (
    ConfigError,
    evaluate,
    load_config,
    parse_config,
    parse_domain,
    parse_measure,
    parse_seed,
    parse_vortices,
)
from vmf.grid import FlatTorus, Rectangle, UnitDisk


def test_arithmetic():
    assert evaluate("16*pi/3") == pytest.approx(16 * math.pi / 3)
    assert evaluate("-(2**3) + e") == pytest.approx(-8 + math.e)
    assert evaluate("[1, 2*pi]") == [1, pytest.approx(2 * math.pi)]
    for bad in ("__import__('os')", "x + 1", "1 if 1 else 2", "True", "'a'"):
        with pytest.raises(ValueError):
            evaluate(bad)


def test_domains():
    assert isinstance(parse_domain("disk"), UnitDisk)
    r = parse_domain("rectangle(2, 0.5)")
    assert isinstance(r, Rectangle) and (r.width, r.height) == (2.0, 0.5)
    t = parse_domain("torus(1, 2)")
    assert isinstance(t, FlatTorus) and (t.period_x, t.period_y) == (1.0, 2.0)
    for bad in ("ellipse", "rectangle(1)", "torus(1, -1)"):
        with pytest.raises(ValueError):
            parse_domain(bad)


def test_measures():
    assert parse_measure("liouville").alphas.tolist() == [1.0]
    assert sorted(parse_measure("sinh").alphas.tolist()) == [-1.0, 1.0]
    P = parse_measure("atomic[(-0.5, 1), (1, 3)]")
    assert P.weights.tolist() == [0.25, 0.75]
    Q = parse_measure("density(parabolic, 0, 1, 8)")
    assert Q.kind == "quadrature" and Q.support == (0.0, 1.0) and Q.alphas.size == 8
    for bad in ("atomic[(2, 1)]", "density(cubic, 0, 1, 8)", "gauss"):
        with pytest.raises(Exception):
            parse_measure(bad)


def test_seed_and_vortices():
    s = parse_seed("bump(0.1, 0, 2, 0.3)")
    assert (s.kind, s.center, s.amplitude, s.width) == ("bump", (0.1, 0.0), 2.0, 0.3)
    assert parse_seed("previous").kind == "previous"
    assert parse_vortices("[(0.3, 0, 1), (-0.3, 0, -1)]") == [(0.3, 0.0, 1.0), (-0.3, 0.0, -1.0)]
    with pytest.raises(ValueError):
        parse_vortices("[(0.3, 0)]")


GOOD = """
# Liouville on the disk
domain = disk
n = 32
measure = liouville
lambda = 4*pi       # μ = 1
lambda_list = [pi, 2*pi, 3*pi]
seed = bump(0, 0, 1, 0.4)
analyze = true
"""


def test_full_config(tmp_path):
    sc = parse_config(GOOD, tmp_path)
    assert sc.n == 32 and sc.lam == pytest.approx(4 * np.pi)
    assert sc.require_lambda_list() == pytest.approx([np.pi, 2 * np.pi, 3 * np.pi])
    spec = sc.problem(sc.lam)
    assert spec.grid.node_count > 0
    assert sc.resolve(sc.out) == tmp_path / "out"
    assert sc.rng_seed == 42


def test_torus_defaults_variant():
    sc = parse_config("domain = torus(1, 1)\nmeasure = sinh\n")
    assert sc.variant == "torus-neri"


@pytest.mark.parametrize(
    "text,key,line",
    [
        ("n = 32\nlambda = -1\n", "lambda", 2),
        ("n = 2\n", "n", 1),
        ("\nfoo = 1\n", "foo", 2),
        ("n = 32\nn = 64\n", "n", 2),
        ("lambda =\n", "lambda", 1),
        ("measure = atomic[(3, 1)]\n", "measure", 1),
        ("tol = 0\n", "tol", 1),
        ("rng_seed = -1\n", "rng_seed", 1),
    ],
)
def test_errors_name_key_and_line(text, key, line):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.key == key and info.value.line == line
    assert f"line {line}" in str(info.value) and f"'{key}'" in str(info.value)


def test_line_without_assignment():
    with pytest.raises(ConfigError) as info:
        parse_config("n = 32\ndisk\n")
    assert info.value.line == 2


def test_lambda_list_checks():
    with pytest.raises(ConfigError):
        parse_config("lambda_list = []\n").require_lambda_list()
    with pytest.raises(ConfigError):
        parse_config("lambda_list = [2, 1]\n").require_lambda_list()
    with pytest.raises(ConfigError):
        parse_config("n = 32\n").require_lambda_list()


def test_variant_domain_mismatch():
    sc = parse_config("domain = disk\nvariant = torus-neri\nlambda = 1\n")
    with pytest.raises(ConfigError) as info:
        sc.problem(sc.lam)
    assert info.value.key == "variant"


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.cfg")


def test_shipped_configs_parse():
    from pathlib import Path

    cfgs = sorted((Path(__file__).parent.parent / "demos" / "configs").glob("*.cfg"))
    assert cfgs
    for path in cfgs:
        sc = load_config(path)
        if sc.lambda_list is not None:
            sc.require_lambda_list()
            sc.problem(sc.lambda_list[0])

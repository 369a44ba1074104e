"""Scenario files: flat ``key = value`` text.

Grammar
-------
One assignment per line; ``#`` starts a comment; blank lines are ignored.
Numbers are arithmetic expressions over literals, ``pi`` and ``e`` with
``+ - * / **`` and parentheses (``lambda = 16*pi/3``).

=================  ===========================================================
key                value
=================  ===========================================================
domain             ``disk`` | ``rectangle(w, h)`` | ``torus(Lx, Ly)``
n                  grid resolution (integer >= 4)
stencil            ``shortley-weller`` | ``symmetric``
variant            ``neri`` | ``ss`` | ``torus-neri``
measure            ``atomic[(a1, w1), (a2, w2), ...]`` |
                   ``density(uniform|parabolic, a, b, nodes)`` |
                   ``liouville`` | ``sinh``
lambda             single λ (``solve``)
lambda_list        ``[l1, l2, ...]`` strictly increasing (``continue``)
seed               ``zero`` | ``previous`` | ``bump(x, y, amp, width)``
seed_every_step    ``true`` | ``false``: re-add the bump at every λ
tol, max_newton    Newton tolerance and iteration cap
out                output directory (relative to the config file)
input              ``analyze``: a field CSV or a ``trace.json``
analyze            ``continue``: also write blow-up reports per λ
peak_threshold     minimum |v| of a detected peak
min_separation     minimum distance between kept peaks
ball_radius        local-mass radius (default: 0.25 * min separation)
rv_radius          exclusion radius for the residual-vanishing error
pohozaev_radii     ``[r1, r2, ...]`` radii of the Pohozaev balls
estimate_deltas    ``[d1, ...]``: run the half-disk Green estimate check
estimate_samples   samples per estimate check
vortex             ``[(x1, y1, r1), (x2, y2, r2), ...]`` (``hamiltonian``)
critical           ``true`` | ``false``: search for a critical configuration
critical_tol       gradient-norm tolerance of the search
max_iter           iteration cap of the search
rng_seed           seed for randomized checks (default 42)
=================  ===========================================================
"""
from __future__ import annotations

import ast
import math
import operator
import re
from dataclasses import dataclass, field
from pathlib import Path

from .grid import MIN_N, FlatTorus, Rectangle, UnitDisk
from .measure import IntensityMeasure, MeasureError, liouville_measure, make_atomic, make_quadrature, sinh_measure
from .solver import ProblemSpec, SeedPolicy


class ConfigError(ValueError):
    def __init__(self, message: str, key: str | None = None, line: int | None = None) -> None:
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)
        self.key = key
        self.line = line


# --- arithmetic --------------------------------------------------------------

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNOPS = {ast.UAdd: operator.pos, ast.USub: operator.neg}
_NAMES = {"pi": math.pi, "e": math.e}


def _eval_node(node):
    if isinstance(node, ast.Expression):
        return _eval_node(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        return node.value
    if isinstance(node, ast.Name) and node.id in _NAMES:
        return _NAMES[node.id]
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval_node(node.left), _eval_node(node.right))
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
        return _UNOPS[type(node.op)](_eval_node(node.operand))
    if isinstance(node, ast.Tuple):
        return tuple(_eval_node(e) for e in node.elts)
    if isinstance(node, ast.List):
        return [_eval_node(e) for e in node.elts]
    raise ValueError(f"unsupported expression element {ast.dump(node)[:40]}")


def evaluate(text: str):
    """Evaluate a numeric expression, tuple or list without ``eval``."""
    try:
        tree = ast.parse(text.strip(), mode="eval")
        return _eval_node(tree)
    except (SyntaxError, ValueError, ZeroDivisionError, OverflowError, TypeError) as exc:
        raise ValueError(f"cannot evaluate {text.strip()!r}: {exc}") from None


def parse_number(text: str) -> float:
    val = evaluate(text)
    if isinstance(val, (tuple, list)):
        raise ValueError(f"expected a number, got {text.strip()!r}")
    val = float(val)
    if not math.isfinite(val):
        raise ValueError("number must be finite")
    return val


def parse_int(text: str) -> int:
    val = parse_number(text)
    if val != int(val):
        raise ValueError(f"expected an integer, got {text.strip()!r}")
    return int(val)


def parse_number_list(text: str) -> list[float]:
    val = evaluate(text)
    if not isinstance(val, list):
        raise ValueError("expected a list [a, b, ...]")
    out = []
    for x in val:
        if isinstance(x, (tuple, list)):
            raise ValueError("list entries must be numbers")
        out.append(float(x))
    return out


def parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "1"):
        return True
    if t in ("false", "no", "0"):
        return False
    raise ValueError(f"expected true or false, got {text.strip()!r}")


_CALL = re.compile(r"^\s*([A-Za-z_][\w-]*)\s*(?:\((.*)\))?\s*$", re.S)


def _split_call(text: str) -> tuple[str, list[str]]:
    m = _CALL.match(text)
    if not m:
        raise ValueError(f"malformed literal {text.strip()!r}")
    name, args = m.group(1).lower(), m.group(2)
    return name, [] if args is None or not args.strip() else [a.strip() for a in args.split(",")]


def parse_domain(text: str):
    name, args = _split_call(text)
    nums = [parse_number(a) for a in args]
    if name in ("disk", "unitdisk", "unit_disk"):
        if nums:
            raise ValueError("disk takes no arguments (radius is 1)")
        return UnitDisk()
    if name in ("rectangle", "square"):
        if name == "square" and not nums:
            nums = [1.0, 1.0]
        if len(nums) != 2:
            raise ValueError("rectangle(w, h) needs two numbers")
        return Rectangle(*nums)
    if name == "torus":
        if not nums:
            nums = [1.0, 1.0]
        if len(nums) != 2:
            raise ValueError("torus(Lx, Ly) needs two numbers")
        return FlatTorus(*nums)
    raise ValueError(f"unknown domain {name!r}")


_DENSITIES = {
    "uniform": lambda a, lo, hi: 1.0 + 0.0 * a,
    "parabolic": lambda a, lo, hi: (a - lo) * (hi - a),
}


def parse_measure(text: str) -> IntensityMeasure:
    t = text.strip()
    low = t.lower()
    if low == "liouville":
        return liouville_measure()
    if low == "sinh":
        return sinh_measure()
    if low.startswith("atomic"):
        body = t[len("atomic"):].strip()
        if not (body.startswith("[") and body.endswith("]")):
            raise ValueError("atomic measure must be atomic[(alpha, weight), ...]")
        pairs = evaluate(body)
        if not pairs or not all(isinstance(p, tuple) and len(p) == 2 for p in pairs):
            raise ValueError("atomic measure needs (alpha, weight) pairs")
        return make_atomic(pairs)
    if low.startswith("density"):
        name, args = _split_call(t)
        if len(args) != 4:
            raise ValueError("density(kind, a, b, nodes) needs four arguments")
        kind = args[0].lower()
        if kind not in _DENSITIES:
            raise ValueError(f"unknown density {kind!r}; choose from {sorted(_DENSITIES)}")
        lo, hi = parse_number(args[1]), parse_number(args[2])
        nodes = parse_int(args[3])
        f = _DENSITIES[kind]
        return make_quadrature(lambda a: f(a, lo, hi), (lo, hi), nodes)
    raise ValueError(f"unknown measure literal {t!r}")


def parse_seed(text: str) -> SeedPolicy:
    name, args = _split_call(text)
    if name in ("zero", "previous"):
        if args:
            raise ValueError(f"{name} takes no arguments")
        return SeedPolicy(name)
    if name == "bump":
        if len(args) != 4:
            raise ValueError("bump(x, y, amp, width) needs four numbers")
        x, y, amp, width = (parse_number(a) for a in args)
        if width <= 0:
            raise ValueError("bump width must be positive")
        return SeedPolicy("bump", (x, y), amp, width)
    raise ValueError(f"unknown seed policy {name!r}")


def parse_vortices(text: str) -> list[tuple[float, float, float]]:
    val = evaluate(text)
    if not isinstance(val, list) or not val:
        raise ValueError("vortex must be a non-empty list [(x, y, r), ...]")
    out = []
    for item in val:
        if not (isinstance(item, tuple) and len(item) == 3):
            raise ValueError("each vortex is a triple (x, y, r)")
        out.append(tuple(float(c) for c in item))
    return out


# --- scenario ----------------------------------------------------------------


@dataclass
class Scenario:
    domain: object = field(default_factory=UnitDisk)
    n: int = 64
    stencil: str = "shortley-weller"
    variant: str = "neri"
    measure: IntensityMeasure = field(default_factory=liouville_measure)
    lam: float | None = None
    lambda_list: list[float] | None = None
    seed: SeedPolicy | None = None
    seed_every_step: bool = False
    tol: float = 1e-9
    max_newton: int = 50
    out: Path = Path("out")
    input: Path | None = None
    analyze: bool = False
    peak_threshold: float = 0.5
    min_separation: float = 0.1
    ball_radius: float | None = None
    rv_radius: float = 0.3
    pohozaev_radii: list[float] | None = None
    estimate_deltas: list[float] = field(default_factory=list)
    estimate_samples: int = 10_000
    vortex: list[tuple[float, float, float]] | None = None
    critical: bool = True
    critical_tol: float = 1e-10
    max_iter: int = 500
    rng_seed: int = 42
    lines: dict[str, int] = field(default_factory=dict)
    base_dir: Path = Path(".")

    def line_of(self, key: str) -> int | None:
        return self.lines.get(key)

    def error(self, key: str, message: str) -> ConfigError:
        return ConfigError(message, key, self.line_of(key))

    def problem(self, lam: float) -> ProblemSpec:
        key = "lambda" if "lambda" in self.lines else "lambda_list"
        try:
            return ProblemSpec(self.domain, self.n, self.measure, lam, self.variant, self.stencil)
        except ValueError as exc:
            bad = key if "lambda" in str(exc) else "variant"
            raise self.error(bad, str(exc)) from None

    def seed_policy(self, default: str) -> SeedPolicy:
        s = self.seed if self.seed is not None else SeedPolicy(default)
        if self.seed_every_step:
            s = SeedPolicy(s.kind, s.center, s.amplitude, s.width, True)
        return s

    def require_lambda(self) -> float:
        if self.lam is None:
            raise ConfigError("missing required key", "lambda")
        return self.lam

    def require_lambda_list(self) -> list[float]:
        if self.lambda_list is None:
            raise ConfigError("missing required key", "lambda_list")
        if not self.lambda_list:
            raise self.error("lambda_list", "lambda_list is empty")
        if any(b <= a for a, b in zip(self.lambda_list, self.lambda_list[1:])):
            raise self.error("lambda_list", "lambda_list must be strictly increasing")
        return self.lambda_list

    def resolve(self, p: Path) -> Path:
        return p if p.is_absolute() else self.base_dir / p


def _positive(v: float) -> float:
    if not v > 0:
        raise ValueError("must be positive")
    return v


def _nonneg_lambda(v: float) -> float:
    if v < 0:
        raise ValueError(f"lambda must be >= 0, got {v}")
    return v


def _enum(*choices):
    def parse(text: str) -> str:
        t = text.strip().lower()
        if t not in choices:
            raise ValueError(f"expected one of {', '.join(choices)}, got {text.strip()!r}")
        return t
    return parse


def _n(text: str) -> int:
    n = parse_int(text)
    if n < MIN_N:
        raise ValueError(f"n must be at least {MIN_N}")
    return n


_PARSERS = {
    "domain": ("domain", parse_domain),
    "n": ("n", _n),
    "stencil": ("stencil", _enum("shortley-weller", "symmetric")),
    "variant": ("variant", _enum("neri", "ss", "torus-neri")),
    "measure": ("measure", parse_measure),
    "lambda": ("lam", lambda t: _nonneg_lambda(parse_number(t))),
    "lambda_list": ("lambda_list", lambda t: [_nonneg_lambda(x) for x in parse_number_list(t)]),
    "seed": ("seed", parse_seed),
    "seed_every_step": ("seed_every_step", parse_bool),
    "tol": ("tol", lambda t: _positive(parse_number(t))),
    "max_newton": ("max_newton", lambda t: int(_positive(parse_int(t)))),
    "out": ("out", lambda t: Path(t.strip())),
    "input": ("input", lambda t: Path(t.strip())),
    "analyze": ("analyze", parse_bool),
    "peak_threshold": ("peak_threshold", lambda t: _positive(parse_number(t))),
    "min_separation": ("min_separation", lambda t: _positive(parse_number(t))),
    "ball_radius": ("ball_radius", lambda t: _positive(parse_number(t))),
    "rv_radius": ("rv_radius", lambda t: _positive(parse_number(t))),
    "pohozaev_radii": ("pohozaev_radii", lambda t: [_positive(x) for x in parse_number_list(t)]),
    "estimate_deltas": ("estimate_deltas", lambda t: [_positive(x) for x in parse_number_list(t)]),
    "estimate_samples": ("estimate_samples", lambda t: int(_positive(parse_int(t)))),
    "vortex": ("vortex", parse_vortices),
    "critical": ("critical", parse_bool),
    "critical_tol": ("critical_tol", lambda t: _positive(parse_number(t))),
    "max_iter": ("max_iter", lambda t: int(_positive(parse_int(t)))),
    "rng_seed": ("rng_seed", lambda t: _seed_value(parse_int(t))),
}


def _seed_value(s: int) -> int:
    if not 0 <= s < 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return s


def parse_config(text: str, base_dir: Path | str = ".") -> Scenario:
    sc = Scenario(base_dir=Path(base_dir))
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", None, lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lower()
        if key not in _PARSERS:
            raise ConfigError("unknown key", key, lineno)
        if key in sc.lines:
            raise ConfigError(f"duplicate key (first set on line {sc.lines[key]})", key, lineno)
        if not value:
            raise ConfigError("missing value", key, lineno)
        attr, parser = _PARSERS[key]
        try:
            setattr(sc, attr, parser(value))
        except (ValueError, MeasureError) as exc:
            raise ConfigError(str(exc), key, lineno) from None
        sc.lines[key] = lineno
    if "variant" not in sc.lines and isinstance(sc.domain, FlatTorus):
        sc.variant = "torus-neri"
    return sc


def load_config(path: Path | str) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, path.parent)

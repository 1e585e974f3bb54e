"""Scenario configuration: JSON in, validated dataclass out, JSON back."""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from importlib import resources

from .expr import ExprError, as_expr
from .geometry import DEFAULT_QUAD


class ConfigError(ValueError):
    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class ScenarioConfig:
    dimension: int
    L: float
    N: int
    symbol: str
    order: float = 0.0
    kind: str = "polynomial"
    field_components: dict = field(default_factory=dict)
    gauge: str = "poincare"
    potential: list | None = None
    eps_min: float = 0.0
    eps_max: float = 0.0
    eps_steps: int = 1
    eps0: float = 0.0
    z: list = field(default_factory=list)
    K: list = field(default_factory=list)
    O: list = field(default_factory=list)
    chi: list = field(default_factory=list)
    band_index: int = 0
    hausdorff_count: int = 5
    quad_order: int = DEFAULT_QUAD
    trust_fraction: float = 0.25
    edge_margin: float | None = None
    bulk_threshold: float = 0.5
    cluster_gap: float = 0.5
    seed: int = 0
    output: str = "magspec-out"
    name: str = "scenario"

    @property
    def eps_values(self):
        if self.eps_steps == 1:
            return [float(self.eps0)]
        step = (self.eps_max - self.eps_min) / (self.eps_steps - 1)
        vals = [self.eps_min + i * step for i in range(self.eps_steps)]
        # land exactly on eps0; insert it when it falls between nodes
        vals = [self.eps0 if abs(v - self.eps0) <= 1e-12 * max(1.0, abs(v)) else v for v in vals]
        if self.eps0 not in vals:
            vals = sorted(vals + [self.eps0])
        return vals

    def to_dict(self):
        return {
            "name": self.name,
            "dimension": self.dimension,
            "grid": {"L": self.L, "N": self.N},
            "symbol": {"expr": self.symbol, "order": self.order, "kind": self.kind},
            "field": {"components": dict(self.field_components), "gauge": self.gauge,
                      **({"potential": list(self.potential)} if self.potential is not None else {})},
            "sweep": {"eps_min": self.eps_min, "eps_max": self.eps_max, "eps_steps": self.eps_steps,
                      "eps0": self.eps0},
            "probes": {"z": [[complex(z).real, complex(z).imag] for z in self.z],
                       "K": [list(k) for k in self.K], "O": [list(o) for o in self.O],
                       "chi": list(self.chi), "band_index": self.band_index,
                       "hausdorff_count": self.hausdorff_count},
            "quad_order": self.quad_order,
            "trust": {"fraction": self.trust_fraction, "edge_margin": self.edge_margin,
                      "bulk_threshold": self.bulk_threshold, "cluster_gap": self.cluster_gap},
            "seed": self.seed,
            "output": self.output,
        }


def _get(d, key, path, kind, default=..., check=None):
    p = f"{path}.{key}" if path else key
    if key not in d:
        if default is ...:
            raise ConfigError(p, "required")
        return default
    v = d[key]
    if kind is float:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ConfigError(p, f"expected a finite number, got {v!r}")
        v = float(v)
    elif kind is int:
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(p, f"expected an integer, got {v!r}")
    elif kind is not None and not isinstance(v, kind):
        raise ConfigError(p, f"expected {getattr(kind, '__name__', kind)}, got {type(v).__name__}")
    if check is not None:
        msg = check(v)
        if msg:
            raise ConfigError(p, msg)
    return v


def _section(d, key, required=True):
    if key not in d:
        if required:
            raise ConfigError(key, "required")
        return {}
    if not isinstance(d[key], dict):
        raise ConfigError(key, "expected an object")
    return d[key]


def _interval(v, path, open_=False):
    if not (isinstance(v, (list, tuple)) and len(v) == 2
            and all(isinstance(t, (int, float)) and not isinstance(t, bool) for t in v)):
        raise ConfigError(path, "expected [lo, hi]")
    lo, hi = float(v[0]), float(v[1])
    if lo > hi or (open_ and lo == hi):
        raise ConfigError(path, f"empty interval [{lo}, {hi}]")
    return (lo, hi)


def _expr(text, path, names):
    if not isinstance(text, str):
        raise ConfigError(path, "expected an expression string")
    try:
        as_expr(text, names)
    except ExprError as exc:
        raise ConfigError(path, str(exc)) from None
    return text


KNOWN = {"name", "dimension", "grid", "symbol", "field", "sweep", "probes", "quad_order", "trust",
         "seed", "output"}


def from_dict(d) -> ScenarioConfig:
    if not isinstance(d, dict):
        raise ConfigError("$", "config must be a JSON object")
    extra = sorted(set(d) - KNOWN)
    if extra:
        raise ConfigError(extra[0], "unknown key")
    n = _get(d, "dimension", "", int, check=lambda v: None if v in (1, 2) else "must be 1 or 2")
    xs = {f"x{j}" for j in range(1, n + 1)}
    xis = {f"xi{j}" for j in range(1, n + 1)}

    g = _section(d, "grid")
    L = _get(g, "L", "grid", float, check=lambda v: None if v > 0 else "must be positive")
    N = _get(g, "N", "grid", int, check=lambda v: None if v >= 2 and v % 2 == 0 else "must be even and >= 2")

    s = _section(d, "symbol")
    sym = _expr(_get(s, "expr", "symbol", str), "symbol.expr", xs | xis | {"eps"})
    order = _get(s, "order", "symbol", float, 0.0)
    kind = _get(s, "kind", "symbol", str, "polynomial",
                check=lambda v: None if v in ("polynomial", "schwartz") else "must be polynomial or schwartz")

    f = _section(d, "field", required=False)
    comps = _get(f, "components", "field", dict, {})
    for key, val in comps.items():
        if key != "12" or n != 2:
            raise ConfigError(f"field.components.{key}", "only component '12' exists (dimension 2)")
        _expr(val, f"field.components.{key}", xs | {"eps"})
    gauge = _get(f, "gauge", "field", str, "poincare",
                 check=lambda v: None if v in ("poincare", "explicit") else "must be poincare or explicit")
    potential = None
    if gauge == "explicit":
        potential = _get(f, "potential", "field", list)
        if len(potential) != n:
            raise ConfigError("field.potential", f"need {n} components")
        for j, c in enumerate(potential):
            _expr(c, f"field.potential[{j}]", xs | {"eps"})

    sw = _section(d, "sweep", required=False)
    eps_min = _get(sw, "eps_min", "sweep", float, 0.0)
    eps_max = _get(sw, "eps_max", "sweep", float, eps_min)
    steps = _get(sw, "eps_steps", "sweep", int, 1, check=lambda v: None if v >= 1 else "must be >= 1")
    eps0 = _get(sw, "eps0", "sweep", float, eps_min)
    if eps_max < eps_min:
        raise ConfigError("sweep.eps_max", "must be >= eps_min")
    if not eps_min <= eps0 <= eps_max:
        raise ConfigError("sweep.eps0", f"must lie in [{eps_min}, {eps_max}]")
    if steps == 1 and eps_max > eps_min:
        raise ConfigError("sweep.eps_steps", "a sweep of positive width needs at least 2 steps")

    pr = _section(d, "probes", required=False)
    zs = []
    for i, z in enumerate(_get(pr, "z", "probes", list, [])):
        zs.append(complex(*_pair(z, f"probes.z[{i}]")))
    K = [_interval(k, f"probes.K[{i}]") for i, k in enumerate(_get(pr, "K", "probes", list, []))]
    O = [_interval(o, f"probes.O[{i}]", True) for i, o in enumerate(_get(pr, "O", "probes", list, []))]
    chi = [_expr(c, f"probes.chi[{i}]", {"t"}) for i, c in enumerate(_get(pr, "chi", "probes", list, []))]
    band = _get(pr, "band_index", "probes", int, 0, check=lambda v: None if v >= 0 else "must be >= 0")
    hcount = _get(pr, "hausdorff_count", "probes", int, 5, check=lambda v: None if v >= 1 else "must be >= 1")

    tr = _section(d, "trust", required=False)
    frac = _get(tr, "fraction", "trust", float, 0.25, check=lambda v: None if 0 < v <= 1 else "must be in (0, 1]")
    margin = tr.get("edge_margin")
    if margin is not None:
        margin = _get(tr, "edge_margin", "trust", float, check=lambda v: None if v >= 0 else "must be >= 0")
        if margin >= L:
            raise ConfigError("trust.edge_margin", "must be smaller than grid.L")
    thr = _get(tr, "bulk_threshold", "trust", float, 0.5, check=lambda v: None if 0 <= v <= 1 else "must be in [0, 1]")
    gap = _get(tr, "cluster_gap", "trust", float, 0.5, check=lambda v: None if v > 0 else "must be positive")

    return ScenarioConfig(
        dimension=n, L=L, N=N, symbol=sym, order=order, kind=kind, field_components=dict(comps),
        gauge=gauge, potential=potential, eps_min=eps_min, eps_max=eps_max, eps_steps=steps, eps0=eps0,
        z=zs, K=K, O=O, chi=chi, band_index=band, hausdorff_count=hcount,
        quad_order=_get(d, "quad_order", "", int, DEFAULT_QUAD, check=lambda v: None if v >= 2 else "must be >= 2"),
        trust_fraction=frac, edge_margin=margin, bulk_threshold=thr, cluster_gap=gap,
        seed=_get(d, "seed", "", int, 0), output=_get(d, "output", "", str, "magspec-out"),
        name=_get(d, "name", "", str, "scenario"),
    )


def _pair(v, path):
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return (float(v), 0.0)
    if isinstance(v, (list, tuple)) and len(v) == 2 and all(
            isinstance(t, (int, float)) and not isinstance(t, bool) for t in v):
        return (float(v[0]), float(v[1]))
    raise ConfigError(path, "expected a number or [re, im]")


def load(path) -> ScenarioConfig:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("$", f"invalid JSON: {exc}") from None
    return from_dict(data)


def bundled(name) -> ScenarioConfig:
    """One of the configs shipped in ``magspec/data`` (``landau``, ``harmonic_shift``)."""
    fname = name if name.endswith(".json") else name + ".json"
    text = resources.files("magspec").joinpath("data").joinpath(fname).read_text()
    return from_dict(json.loads(text))


def with_overrides(cfg: ScenarioConfig, **changes) -> ScenarioConfig:
    d = cfg.to_dict()
    out = copy.deepcopy(d)
    for k, v in changes.items():
        section, _, key = k.partition("__")
        if key:
            out.setdefault(section, {})[key] = v
        else:
            out[section] = v
    return from_dict(out)

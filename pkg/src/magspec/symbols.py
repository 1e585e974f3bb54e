"""Phase-space grids, Hörmander-type symbols and their seminorms."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .expr import Expr, Num, Sub, as_expr, diff, evaluate, polynomial_degree, substitute, to_string

KINDS = ("schwartz", "polynomial")


@dataclass(frozen=True)
class GridSpec:
    """Uniform box [-L, L)^n with N points per axis.

    Flattened index ``i = i1 + N*i2`` (axis 1 fastest).  The dual momentum
    grid has the same number of points, spacing pi/L, and covers
    [-pi/delta, pi/delta).
    """

    n: int
    L: float
    N: int

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError("dimension must be 1 or 2")
        if self.N < 2 or self.N % 2:
            raise ValueError("N must be even and >= 2")
        if self.L <= 0:
            raise ValueError("L must be positive")

    @property
    def delta(self):
        return 2.0 * self.L / self.N

    @property
    def eta_max(self):
        return math.pi / self.delta

    @property
    def dxi(self):
        return math.pi / self.L

    @property
    def size(self):
        return self.N ** self.n

    @cached_property
    def axis(self):
        return -self.L + self.delta * np.arange(self.N)

    @cached_property
    def dual_axis(self):
        return self.dxi * (np.arange(self.N) - self.N // 2)

    def _flat(self, per_axis):
        idx = np.arange(self.size)
        cols = [per_axis[(idx // self.N ** j) % self.N] for j in range(self.n)]
        return np.stack(cols, axis=-1)

    @cached_property
    def indices(self):
        return self._flat(np.arange(self.N))

    @cached_property
    def points(self):
        return self._flat(self.axis)

    @cached_property
    def dual_points(self):
        return self._flat(self.dual_axis)

    @cached_property
    def offsets(self):
        """Centred integer displacements, same flattening as the grid."""
        return self._flat(np.arange(self.N) - self.N // 2)

    @cached_property
    def window_valid(self):
        """Displacements strictly inside the window (Nyquist slot excluded)."""
        return np.all(self.offsets > -(self.N // 2), axis=-1)

    @cached_property
    def displacements(self):
        return self.offsets * self.delta

    def offset_index(self, k):
        """Flat window index of integer displacement(s) ``k``; -1 outside the window."""
        k = np.asarray(k)
        half = self.N // 2
        inside = np.all((k > -half) & (k < half), axis=-1)
        flat = np.zeros(k.shape[:-1], dtype=np.int64)
        for j in range(self.n):
            flat += (k[..., j] + half) * self.N ** j
        return np.where(inside, flat, -1)

    def to_dict(self):
        return {"L": self.L, "N": self.N}


def bracket(xi):
    """<xi> = (1 + |xi|^2)^(1/2)."""
    xi = np.asarray(xi, dtype=float)
    return np.sqrt(1.0 + np.sum(xi * xi, axis=-1))


def phase_space_vars(n):
    return [f"x{j}" for j in range(1, n + 1)], [f"xi{j}" for j in range(1, n + 1)]


@dataclass(frozen=True)
class SymbolFn:
    expr: Expr
    n: int = 1
    order: float = 0.0
    kind: str = "schwartz"
    rho: int = 1

    def __post_init__(self):
        xs, xis = phase_space_vars(self.n)
        allowed = set(xs) | set(xis) | {"eps"}
        e = as_expr(self.expr, allowed)
        object.__setattr__(self, "expr", e)
        stray = e.free_vars() - allowed
        if stray:
            raise ValueError(f"symbol uses variables outside phase space: {sorted(stray)}")
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if self.rho not in (0, 1):
            raise ValueError("rho must be 0 or 1")
        if self.kind == "polynomial":
            d = polynomial_degree(e, xis)
            if d is None or d > 2:
                raise ValueError("polynomial symbols must have xi-degree <= 2")

    @property
    def xvars(self):
        return phase_space_vars(self.n)[0]

    @property
    def xivars(self):
        return phase_space_vars(self.n)[1]

    @property
    def depends_on_eps(self):
        return "eps" in self.expr.free_vars()

    def at(self, eps):
        return SymbolFn(substitute(self.expr, {"eps": float(eps)}), self.n, self.order, self.kind, self.rho)

    def with_expr(self, e):
        return SymbolFn(e, self.n, self.order, self.kind, self.rho)

    def bindings(self, x, xi):
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        b = {f"x{j + 1}": x[..., j] for j in range(self.n)}
        b.update({f"xi{j + 1}": xi[..., j] for j in range(self.n)})
        return b

    def values(self, x, xi, e=None):
        """Sample ``e`` (default: the symbol) at broadcast x, xi arrays."""
        e = self.expr if e is None else e
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        shape = np.broadcast_shapes(x.shape[:-1], xi.shape[:-1])
        v = evaluate(e, self.bindings(x, xi))
        return np.broadcast_to(np.asarray(v, dtype=float), shape).copy()

    def __str__(self):
        return to_string(self.expr)


def _phase_grid(grid: GridSpec):
    """All (x, xi) pairs of the grid, shape (N^n, N^n, n) each via broadcasting."""
    return grid.points[:, None, :], grid.dual_points[None, :, :]


def _derivative_indices(names, order):
    """Multisets of derivative variables of total size <= order."""
    out = []
    for k in range(order + 1):
        out.extend(itertools.combinations_with_replacement(names, k))
    return out


def seminorm(f: SymbolFn, m, rho, N, M, grid: GridSpec):
    """Grid sup of <xi>^(-m + rho|alpha|) |d_x^a d_xi^alpha f| over |a| <= N, |alpha| <= M."""
    if N > 4 or M > 4:
        raise ValueError("seminorm indices are capped at 4")
    x, xi = _phase_grid(grid)
    br = bracket(xi)
    worst = 0.0
    cache = {}
    for a in _derivative_indices(f.xvars, N):
        for alpha in _derivative_indices(f.xivars, M):
            key = tuple(sorted(a + alpha))
            if key not in cache:
                d = f.expr
                for v in key:
                    d = diff(d, v)
                cache[key] = d
            d = cache[key]
            if _is_zero(d):
                continue
            weight = br ** (-m + rho * len(alpha))
            vals = np.abs(f.values(x, xi, d)) * weight
            worst = max(worst, float(np.max(vals)))
    return worst


def _is_zero(e):
    return isinstance(e, Num) and e.value == 0.0


def ellipticity_constant(f: SymbolFn, m, grid: GridSpec, xi_threshold):
    """inf |f| / <xi>^m over grid points with |xi| >= threshold, or None if <= 0."""
    x, xi = _phase_grid(grid)
    keep = np.sqrt(np.sum(grid.dual_points ** 2, axis=-1)) >= xi_threshold
    if not np.any(keep):
        return None
    xi = xi[:, keep, :]
    ratio = np.abs(f.values(x, xi)) / bracket(xi) ** m
    c = float(np.min(ratio))
    return c if c > 0 else None


@dataclass
class FamilyModulus:
    points: list = field(default_factory=list)
    lower_bound: float = 0.0  # C with h^eps >= -C on the probe grid


def family_continuity_modulus(f: SymbolFn, eps0, eps_list, m, N, M, grid: GridSpec):
    """Seminorm of f(eps) - f(eps0) for each eps, plus the lower-bound constant."""
    base = substitute(f.expr, {"eps": float(eps0)})
    out = FamilyModulus()
    x, xi = _phase_grid(grid)
    lowest = math.inf
    for eps in eps_list:
        cur = substitute(f.expr, {"eps": float(eps)})
        if eps == eps0 or not f.depends_on_eps:
            val = 0.0
        else:
            val = seminorm(f.with_expr(Sub(cur, base)), m, f.rho, N, M, grid)
        out.points.append((float(eps), val))
        lowest = min(lowest, float(np.min(f.values(x, xi, cur))))
    out.lower_bound = max(0.0, -lowest) if math.isfinite(lowest) else 0.0
    return out

"""Magnetic fields, vector potentials, circulations and triangle fluxes.

Points are numpy arrays whose last axis has length ``n``; every flux and
circulation routine broadcasts over the leading axes.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from .expr import Expr, Mul, Neg, Num, as_expr, diff, evaluate, parse, substitute, to_string

DEFAULT_QUAD = 12


def xvars(n):
    return [f"x{j}" for j in range(1, n + 1)]


@lru_cache(maxsize=None)
def gauss_legendre01(order):
    """Gauss-Legendre nodes and weights on [0, 1]."""
    if order < 2:
        raise ValueError("quadrature order must be >= 2")
    t, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (t + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def triangle_rule(order):
    """Collapsed tensor rule on {s, t >= 0, s + t <= 1}, symmetric in s <-> t."""
    a, wa = gauss_legendre01(order)
    s = np.repeat(a, order)
    t = np.tile(a, order) * (1.0 - s)
    w = np.repeat(wa, order) * np.tile(wa, order) * (1.0 - s)
    return np.concatenate([s, t]), np.concatenate([t, s]), np.concatenate([w, w]) / 2.0


def _bindings(points, n, eps=None):
    pts = np.asarray(points, dtype=float)
    b = {f"x{j + 1}": pts[..., j] for j in range(n)}
    if eps is not None:
        b["eps"] = eps
    return b


def _sample(e: Expr, points, n, eps=None):
    pts = np.asarray(points, dtype=float)
    val = evaluate(e, _bindings(pts, n, eps))
    return np.broadcast_to(np.asarray(val, dtype=float), pts.shape[:-1]).copy()


# --- magnetic fields -------------------------------------------------------

class MagneticField:
    """Antisymmetric field B with only the strict upper triangle stored."""

    def __init__(self, n, components=None):
        if n not in (1, 2):
            raise ValueError("dimension must be 1 or 2")
        self.n = n
        comps = {}
        allowed = set(xvars(n)) | {"eps"}
        for key, val in (components or {}).items():
            j, k = _parse_pair(key)
            if not (1 <= j < k <= n):
                raise ValueError(f"component {key!r}: need 1 <= j < k <= {n}")
            e = as_expr(val, allowed)
            comps[(j, k)] = e
        self.components = comps

    @classmethod
    def constant(cls, b, n=2):
        return cls(n, {(1, 2): Num(float(b))}) if n == 2 else cls(n)

    @classmethod
    def zero(cls, n=2):
        return cls(n)

    def __repr__(self):
        body = ", ".join(f"B{j}{k}={to_string(e)}" for (j, k), e in self.components.items())
        return f"MagneticField(n={self.n}, {body or 'B=0'})"

    def to_dict(self):
        return {f"{j}{k}": to_string(e) for (j, k), e in self.components.items()}

    @property
    def depends_on_eps(self):
        return any("eps" in e.free_vars() for e in self.components.values())

    def bind(self, eps):
        out = MagneticField(self.n)
        out.components = {jk: substitute(e, {"eps": float(eps)}) for jk, e in self.components.items()}
        return out

    def scaled(self, factor):
        out = MagneticField(self.n)
        out.components = {jk: e if factor == 1 else _mul_num(e, factor) for jk, e in self.components.items()}
        return out

    @property
    def is_zero(self):
        return all(_const_value(e) == 0.0 for e in self.components.values())

    @property
    def is_constant(self):
        return all(not (e.free_vars() & set(xvars(self.n))) and "eps" not in e.free_vars()
                   for e in self.components.values())

    def constant_matrix(self):
        """Full n x n matrix for an x-independent field."""
        if not self.is_constant:
            raise ValueError("field is not constant")
        vals = {jk: float(evaluate(e, {})) for jk, e in self.components.items()}
        return self._assemble(vals, ())

    @staticmethod
    def _mirror(value):
        # lower-triangle entries are derived from the stored upper triangle
        return -value

    def _assemble(self, upper, shape):
        m = np.zeros(shape + (self.n, self.n))
        for (j, k), v in upper.items():
            m[..., j - 1, k - 1] = v
            m[..., k - 1, j - 1] = self._mirror(v)
        return m

    def matrix(self, points, eps=None):
        """B_jk sampled at ``points``; shape ``points.shape[:-1] + (n, n)``."""
        pts = np.asarray(points, dtype=float)
        upper = {jk: _sample(e, pts, self.n, eps) for jk, e in self.components.items()}
        return self._assemble(upper, pts.shape[:-1])

    def component(self, j, k):
        if j == k:
            return Num(0.0)
        if j < k:
            return self.components.get((j, k), Num(0.0))
        e = self.components.get((k, j))
        return Num(0.0) if e is None else _neg_expr(e)

    def derivative_bounds(self, half_width, points=21, max_order=2, eps=None):
        """Grid sup of |d^a B_jk| for |a| <= max_order on [-w, w]^n."""
        axes = [np.linspace(-half_width, half_width, points)] * self.n
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        worst = 0.0
        for e in self.components.values():
            if eps is not None:
                e = substitute(e, {"eps": eps})
            for combo in _multi_indices(self.n, max_order):
                d = e
                for v in combo:
                    d = diff(d, v)
                worst = max(worst, float(np.max(np.abs(_sample(d, mesh, self.n)))))
        return worst


def _multi_indices(n, order):
    names = xvars(n)
    out = [()]
    frontier = [()]
    for _ in range(order):
        frontier = [c + (v,) for c in frontier for v in names if not c or names.index(v) >= names.index(c[-1])]
        out.extend(frontier)
    return out


def _parse_pair(key):
    if isinstance(key, tuple):
        return int(key[0]), int(key[1])
    key = str(key).replace(",", "").strip()
    if len(key) != 2 or not key.isdigit():
        raise ValueError(f"bad component key {key!r}; expected e.g. '12'")
    return int(key[0]), int(key[1])


def _const_value(e):
    if e.free_vars():
        return None
    return float(evaluate(e, {}))


def _neg_expr(e):
    return Neg(e)


def _mul_num(e, factor):
    return Mul(Num(float(factor)), e)


# --- vector potentials -----------------------------------------------------

class VectorPotential:
    n: int
    tag: str = "A"

    def values(self, points):
        raise NotImplementedError

    def circulation(self, x, y, quad_order=DEFAULT_QUAD):
        """(y - x) . int_0^1 A(x + s(y - x)) ds by Gauss-Legendre."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        s, w = gauss_legendre01(quad_order)
        d = y - x
        pts = x[..., None, :] + s[:, None] * d[..., None, :]
        a = self.values(pts)
        return np.einsum("...qj,q,...j->...", a, w, d)

    def curl(self, points, h=1e-5):
        """Central-difference dA_2/dx_1 - dA_1/dx_2 (n = 2 only)."""
        pts = np.asarray(points, dtype=float)
        e1 = np.array([h, 0.0])
        e2 = np.array([0.0, h])
        d1a2 = (self.values(pts + e1)[..., 1] - self.values(pts - e1)[..., 1]) / (2 * h)
        d2a1 = (self.values(pts + e2)[..., 0] - self.values(pts - e2)[..., 0]) / (2 * h)
        return d1a2 - d2a1


class ExprPotential(VectorPotential):
    def __init__(self, components, n=None, tag=None):
        self.n = n if n is not None else len(components)
        allowed = set(xvars(self.n)) | {"eps"}
        self.components = [as_expr(c, allowed) for c in components]
        if len(self.components) != self.n:
            raise ValueError("need one component per dimension")
        self.tag = tag or "explicit A=(" + ", ".join(to_string(c) for c in self.components) + ")"

    @classmethod
    def zero(cls, n):
        return cls([Num(0.0)] * n, tag="A=0")

    def values(self, points):
        pts = np.asarray(points, dtype=float)
        return np.stack([_sample(c, pts, self.n) for c in self.components], axis=-1)

    def bind(self, eps):
        return ExprPotential([substitute(c, {"eps": float(eps)}) for c in self.components], self.n, self.tag)


class PoincarePotential(VectorPotential):
    """Transversal gauge A_k(x) = sum_j x_j int_0^1 s B_jk(s x) ds."""

    def __init__(self, field: MagneticField, quad_order=DEFAULT_QUAD):
        self.field = field
        self.n = field.n
        self.quad_order = quad_order
        self.tag = f"poincare gauge of {field!r}"

    def values(self, points):
        pts = np.asarray(points, dtype=float)
        s, w = gauss_legendre01(self.quad_order)
        scaled = s[:, None] * pts[..., None, :]
        bm = self.field.matrix(scaled)  # (..., q, n, n)
        return np.einsum("q,q,...j,...qjk->...k", w, s, pts, bm)


class GaugeShifted(VectorPotential):
    """A + grad(chi) with exactly integrated gradient part."""

    def __init__(self, base: VectorPotential, chi):
        self.base = base
        self.n = base.n
        self.chi = as_expr(chi, set(xvars(self.n)))
        self.grad = [diff(self.chi, v) for v in xvars(self.n)]
        self.tag = f"{base.tag} + grad({to_string(self.chi)})"

    def values(self, points):
        pts = np.asarray(points, dtype=float)
        g = np.stack([_sample(c, pts, self.n) for c in self.grad], axis=-1)
        return self.base.values(pts) + g

    def circulation(self, x, y, quad_order=DEFAULT_QUAD):
        return (self.base.circulation(x, y, quad_order)
                + _sample(self.chi, y, self.n) - _sample(self.chi, x, self.n))


def poincare_gauge(field: MagneticField, quad_order=DEFAULT_QUAD) -> VectorPotential:
    n = field.n
    if field.is_zero or n == 1:
        return ExprPotential.zero(n)
    if field.is_constant:
        b = float(field.constant_matrix()[0, 1])
        comps = [parse(f"{-b / 2!r}*x2"), parse(f"{b / 2!r}*x1")]
        return ExprPotential(comps, n, tag=f"symmetric gauge b={b!r}")
    return PoincarePotential(field, quad_order)


def segment_circulation(A: VectorPotential, x, y, quad_order=DEFAULT_QUAD):
    """Circulation of A along [x, y]; exactly antisymmetric in (x, y)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x, y = np.broadcast_arrays(x, y)
    # evaluate in a canonical orientation so that swapping endpoints flips the sign bit only
    flip = _lex_greater(x, y)
    lo = np.where(flip[..., None], y, x)
    hi = np.where(flip[..., None], x, y)
    c = np.asarray(A.circulation(lo, hi, quad_order), dtype=float)
    return np.where(flip, -c, c)


def _lex_greater(x, y):
    out = np.zeros(x.shape[:-1], dtype=bool)
    decided = np.zeros_like(out)
    for j in range(x.shape[-1]):
        gt = (x[..., j] > y[..., j]) & ~decided
        lt = (x[..., j] < y[..., j]) & ~decided
        out |= gt
        decided |= gt | lt
    return out


def peierls_phase(A, x, y, quad_order=DEFAULT_QUAD):
    return np.exp(-1j * segment_circulation(A, x, y, quad_order))


# --- fluxes ----------------------------------------------------------------

def _flux_sum(field, p0, u, v, quad_order):
    """int_simplex sum_jk B_jk(p0 + s u + t v) u_j v_k."""
    shape = np.broadcast_shapes(p0.shape, u.shape, v.shape)[:-1]
    if field.is_zero:
        return np.zeros(shape)
    if field.is_constant:
        m = field.constant_matrix()
        return 0.5 * np.einsum("jk,...j,...k->...", m, u, v)
    s, t, w = triangle_rule(quad_order)
    n = field.n
    coords = {f"x{j + 1}": p0[..., j, None] + s * u[..., j, None] + t * v[..., j, None] for j in range(n)}
    sign = field._mirror(1.0)
    total = np.zeros(shape)
    for (j, k), e in field.components.items():
        vals = np.broadcast_to(np.asarray(evaluate(e, coords), dtype=float), shape + (len(w),))
        coef = u[..., j - 1] * v[..., k - 1] + sign * u[..., k - 1] * v[..., j - 1]
        total = total + coef * (vals @ w)
    return total


def triangle_flux(B: MagneticField, p0, p1, p2, quad_order=DEFAULT_QUAD):
    """Flux of B through the oriented triangle <p0, p1, p2>."""
    p0 = np.asarray(p0, dtype=float)
    u = np.asarray(p1, dtype=float) - p0
    v = np.asarray(p2, dtype=float) - p0
    return _flux_sum(B, p0, u, v, quad_order)


def gamma_flux(B, x, y, z, quad_order=DEFAULT_QUAD):
    """Flux through <x, x+y, x+y+z>."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    return _flux_sum(B, x, y, y + z, quad_order)


def big_gamma_flux(B, x, y, z, quad_order=DEFAULT_QUAD):
    """4 sum_jk y_j z_k int int B_jk(x - y - z + 2sy + 2tz) over the unit simplex."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    return _flux_sum(B, x - y - z, 2.0 * y, 2.0 * z, quad_order)


def cocycle_omega(B, q, y, z, quad_order=DEFAULT_QUAD):
    return np.exp(-1j * gamma_flux(B, q, y, z, quad_order))


def phase_Omega(B, x, y, z, quad_order=DEFAULT_QUAD):
    return np.exp(-1j * big_gamma_flux(B, x, y, z, quad_order))


def cocycle_identity_residual(B, q, x, y, z, quad_order=DEFAULT_QUAD):
    """Additive residual of the 2-cocycle identity for omega = exp(-i gamma)."""
    q = np.asarray(q, dtype=float)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    r = (gamma_flux(B, q, x, y + z, quad_order) + gamma_flux(B, q + x, y, z, quad_order)
         - gamma_flux(B, q, x + y, z, quad_order) - gamma_flux(B, q, x, y, quad_order))
    return np.abs(r)


def phase_growth_exponent(B, radii=(1.0, 2.0, 4.0, 8.0), samples=200, seed=0, h=1e-4,
                          quad_order=DEFAULT_QUAD):
    """Measured log-log growth rate of sup |d_y Omega(x; y, z)| over boxes of radius R.

    ``Omega`` is unimodular, so only its derivatives can grow; the slope is an
    empirical exponent, not a bound.
    """
    rng = np.random.default_rng(seed)
    n = B.n
    sups = []
    for r in radii:
        x = rng.uniform(-r, r, (samples, n))
        y = rng.uniform(-r, r, (samples, n))
        z = rng.uniform(-r, r, (samples, n))
        e = np.zeros(n)
        e[0] = h
        d = (phase_Omega(B, x, y + e, z, quad_order) - phase_Omega(B, x, y - e, z, quad_order)) / (2 * h)
        sups.append(float(np.max(np.abs(d))))
    sups = np.array(sups)
    if np.any(sups <= 0):
        return 0.0, sups
    slope = np.polyfit(np.log(radii), np.log(sups), 1)[0]
    return float(slope), sups

"""Grid realizations of magnetic Weyl operators.

Two paths, never mixed in one matrix:

* ``build_kernel`` for symbols decaying in xi: the integral kernel
  ``K_ij = delta^n (2 pi)^-n lambda_ij phi((x_i + x_j)/2, x_j - x_i)`` with
  ``phi`` the inverse partial Fourier transform of the symbol.
* ``build_peierls`` for symbols of xi-degree <= 2: finite differences with
  Peierls hopping phases and Dirichlet truncation.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field, replace

import numpy as np

from .expr import Mul, Num, as_expr, diff, evaluate, polynomial_degree, substitute
from .geometry import DEFAULT_QUAD, VectorPotential, segment_circulation
from .kernels import KernelElement, as_kernel
from .symbols import GridSpec, SymbolFn


@dataclass
class OperatorMatrix:
    grid: GridSpec
    entries: np.ndarray
    hermitian: bool = False
    gauge_tag: str = ""
    kind: str = "dense"
    kinetic_cutoff: float | None = None
    bandwidth: int | None = None
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_array(cls, a, grid=None, **kw):
        a = np.asarray(a, dtype=complex)
        if grid is None:
            grid = GridSpec(1, 1.0, max(2, a.shape[0] + a.shape[0] % 2))
        out = cls(grid, a, **kw)
        out.hermitian = hermitian_defect(a) <= 1e-12 * max(1.0, float(np.max(np.abs(a), initial=0.0)))
        return out

    @property
    def shape(self):
        return self.entries.shape

    def __matmul__(self, other):
        return self.entries @ (other.entries if isinstance(other, OperatorMatrix) else other)


def hermitian_defect(a):
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - a.conj().T)))


def _pair_arrays(grid: GridSpec):
    idx = grid.indices  # (S, n)
    hsum = idx[:, None, :] + idx[None, :, :]
    kdiff = idx[None, :, :] - idx[:, None, :]
    return hsum, kdiff


def phase_matrix(A: VectorPotential, grid: GridSpec, quad_order=DEFAULT_QUAD):
    """lambda_ij = exp(-i int_[x_i, x_j] A)."""
    pts = grid.points
    circ = segment_circulation(A, pts[:, None, :], pts[None, :, :], quad_order)
    return np.exp(-1j * circ)


def kernel_matrix(phi: KernelElement, A: VectorPotential | None, grid: GridSpec, quad_order=DEFAULT_QUAD):
    n, N = grid.n, grid.N
    table = phi.midpoint_table()
    hsum, kdiff = _pair_arrays(grid)
    hidx = np.zeros(hsum.shape[:-1], dtype=np.int64)
    for j in range(n):
        hidx += hsum[..., j] * (2 * N - 1) ** j
    kidx = grid.offset_index(kdiff)
    inside = kidx >= 0
    vals = table[hidx, np.where(inside, kidx, 0)]
    vals[~inside] = 0.0
    K = vals * (grid.delta / (2 * math.pi)) ** n
    if A is not None:
        K = K * phase_matrix(A, grid, quad_order)
    return K


def build_kernel(f, A: VectorPotential | None, grid: GridSpec, quad_order=DEFAULT_QUAD) -> OperatorMatrix:
    """Kernel quantization of a Schwartz-in-xi symbol, sampled symbol or kernel element."""
    if isinstance(f, SymbolFn):
        if f.kind == "polynomial":
            raise ValueError("polynomial-in-xi symbols are not integrable; use build_peierls")
        if f.depends_on_eps:
            raise ValueError("bind eps before quantizing (SymbolFn.at)")
    phi = as_kernel(f, grid)
    K = kernel_matrix(phi, A, grid, quad_order)
    out = OperatorMatrix(grid, K, gauge_tag=getattr(A, "tag", "A=0"), kind="kernel")
    scale = max(1.0, float(np.max(np.abs(K), initial=0.0)))
    out.hermitian = hermitian_defect(K) <= 1e-12 * scale
    if out.hermitian:
        out.entries = 0.5 * (K + K.conj().T)
    return out


# --- Peierls path ------------------------------------------------------------

def xi_coefficients(h: SymbolFn):
    """Split h = c0 + sum_j c_j xi_j + sum_j c_jj xi_j^2 (as x-expressions)."""
    d = polynomial_degree(h.expr, h.xivars)
    if d is None or d > 2:
        raise ValueError("Peierls quantization needs a polynomial symbol of xi-degree <= 2")
    zero_xi = {v: 0.0 for v in h.xivars}
    c0 = substitute(h.expr, zero_xi)
    lin, quad = [], []
    for j, v in enumerate(h.xivars):
        d1 = diff(h.expr, v)
        lin.append(substitute(d1, zero_xi))
        quad.append(substitute(diff(d1, v), zero_xi))
        for w in h.xivars[j + 1:]:
            mixed = diff(d1, w)
            if not (isinstance(mixed, Num) and mixed.value == 0.0):
                raise ValueError(f"mixed term {v}*{w} is not supported by the Peierls discretization")
    quad = [_half(q) for q in quad]
    return c0, lin, quad


def _half(e):
    if isinstance(e, Num):
        return Num(0.5 * e.value)
    return Mul(Num(0.5), e)


def _sample_x(e, pts, n):
    b = {f"x{j + 1}": pts[..., j] for j in range(n)}
    v = evaluate(e, b)
    return np.broadcast_to(np.asarray(v, dtype=float), pts.shape[:-1]).copy()


def _is_zero(e):
    return isinstance(e, Num) and e.value == 0.0


def build_peierls(h: SymbolFn, A: VectorPotential | None, grid: GridSpec, quad_order=DEFAULT_QUAD) -> OperatorMatrix:
    """Finite-difference magnetic operator with Peierls hops, Dirichlet box."""
    if h.depends_on_eps:
        raise ValueError("bind eps before quantizing (SymbolFn.at)")
    c0, lin, quad = xi_coefficients(h)
    n, N, d = grid.n, grid.N, grid.delta
    S = grid.size
    pts = grid.points
    H = np.zeros((S, S), dtype=complex)
    diag = _sample_x(c0, pts, n).astype(complex)
    cutoff = 0.0
    for j in range(n):
        e = np.zeros(n)
        e[j] = d
        if _is_zero(quad[j]) and _is_zero(lin[j]):
            continue
        cq_plus = _sample_x(quad[j], pts + e / 2, n)
        cq_minus = _sample_x(quad[j], pts - e / 2, n)
        diag += (cq_plus + cq_minus) / d ** 2
        cutoff += 4.0 * float(np.max(np.abs(cq_plus), initial=0.0)) / d ** 2
        has_next = grid.indices[:, j] < N - 1
        src = np.nonzero(has_next)[0]
        dst = src + N ** j
        if A is None:
            phase = np.ones(len(src), dtype=complex)
        else:
            phase = np.exp(-1j * segment_circulation(A, pts[src], pts[src] + e, quad_order))
        cl = _sample_x(lin[j], pts[src] + e / 2, n)
        hop = (-cq_plus[src] / d ** 2 + cl / (2j * d)) * phase
        H[src, dst] += hop
        H[dst, src] += np.conj(hop)
    H[np.arange(S), np.arange(S)] += diag
    return OperatorMatrix(grid, H, hermitian=True, gauge_tag=getattr(A, "tag", "A=0"), kind="peierls",
                          kinetic_cutoff=cutoff if cutoff > 0 else None, bandwidth=N ** (n - 1))


def gauge_transform(K: OperatorMatrix, chi) -> OperatorMatrix:
    """U K U* with U = diag(exp(i chi(x_i)))."""
    chi = as_expr(chi, {f"x{j}" for j in range(1, K.grid.n + 1)})
    u = np.exp(1j * _sample_x(chi, K.grid.points, K.grid.n))
    entries = (u[:, None] * K.entries) * np.conj(u)[None, :]
    return replace(K, entries=entries, gauge_tag=f"{K.gauge_tag} then exp(i*{chi})")


# --- binary dump -------------------------------------------------------------

_HEADER = struct.Struct("<IId")


def dump_matrix(K: OperatorMatrix, path):
    """Header (u32 n, u32 N, f64 L, little-endian) then row-major complex128 pairs."""
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(K.grid.n, K.grid.N, float(K.grid.L)))
        fh.write(np.ascontiguousarray(K.entries, dtype="<c16").tobytes())


def load_matrix(path) -> OperatorMatrix:
    with open(path, "rb") as fh:
        n, N, L = _HEADER.unpack(fh.read(_HEADER.size))
        grid = GridSpec(n, L, N)
        data = np.frombuffer(fh.read(), dtype="<c16")
    entries = data.reshape(grid.size, grid.size).copy()
    return OperatorMatrix.from_array(entries, grid)

"""Twisted products of kernel elements and the magnetic Moyal product.

The diamond product of two kernel elements is the lattice sum

    (phi <> psi)(q; v) = (2 pi)^-n delta^n sum_z phi(q - (v - z)/2; z)
                         psi(q + z/2; v - z) omega(q - v/2; z, v - z)

over window displacements ``z`` with ``v - z`` also in the window, where
``omega(q; y, z) = exp(-i gamma)`` and gamma is the flux through
``<q, q + y, q + y + z>``.  With this normalization the product of kernel
elements is the kernel of the product of the quantized operators, so
``sharp(f, g)`` is the symbol of ``Op(f) Op(g)``.
"""
from __future__ import annotations

import math

import numpy as np
import scipy.linalg
import scipy.sparse

from .geometry import DEFAULT_QUAD, MagneticField, gamma_flux
from .kernels import (
    ExprKernel,
    GridKernel,
    InvolutionKernel,
    KernelElement,
    SampledSymbol,
    SymbolKernel,
    as_kernel,
    half_lattice_coords,
    half_lattice_points,
    partial_fourier_inv_samples,
    partial_fourier_samples,
)
from .quantize import build_kernel
from .symbols import GridSpec, SymbolFn

__all__ = [
    "DiamondKernel", "ExprKernel", "GridKernel", "InvolutionKernel", "KernelElement", "SampledSymbol",
    "SymbolKernel", "composition_residual", "diamond", "l1_norm", "l2_norm", "partial_fourier",
    "partial_fourier_inv", "regular_rep_apply", "sharp", "star_involution", "strong_continuity_modulus",
    "weyl_moyal_fft",
]

BLOCK = 1 << 22  # pair x query entries per vectorized block


# --- transforms --------------------------------------------------------------

def partial_fourier_inv(f: SymbolFn, grid: GridSpec) -> KernelElement:
    return SymbolKernel(f, grid)


def partial_fourier(phi: KernelElement, grid: GridSpec) -> SampledSymbol:
    """Symbol samples on (x-grid) x (dual grid) of a kernel element."""
    return SampledSymbol(partial_fourier_samples(phi.grid_samples(), grid), grid)


# --- pair bookkeeping --------------------------------------------------------

class _Pairs:
    """All (v, z) with z and e = v - z strictly inside the window."""

    def __init__(self, grid: GridSpec):
        offs = grid.offsets
        valid = np.nonzero(grid.window_valid)[0]
        v = np.repeat(valid, len(valid))
        z = np.tile(valid, len(valid))
        e_idx = grid.offset_index(offs[v] - offs[z])
        keep = e_idx >= 0
        self.v = v[keep]
        self.z = z[keep]
        self.e = e_idx[keep]
        self.zk = offs[self.z]
        self.ek = offs[self.e]
        self.vk = offs[self.v]
        self.grid = grid
        W = grid.size
        self.collect = scipy.sparse.csr_matrix(
            (np.ones(len(self.v)), (self.v, np.arange(len(self.v)))), shape=(W, len(self.v)))


_PAIR_CACHE: dict = {}


def _pairs(grid):
    key = (grid.n, grid.L, grid.N)
    if key not in _PAIR_CACHE:
        _PAIR_CACHE.clear()
        _PAIR_CACHE[key] = _Pairs(grid)
    return _PAIR_CACHE[key]


def _omega_pairs(B, P: _Pairs, base, quad_order):
    """omega(base - v/2; z, e) for one base point, or None when B = 0."""
    if B is None or B.is_zero:
        return None
    d = P.grid.delta
    if B.is_constant:
        return np.exp(-1j * gamma_flux(B, np.zeros(P.grid.n), P.zk * d, P.ek * d))
    q = base[None, :] - 0.5 * d * P.vk
    return np.exp(-1j * gamma_flux(B, q, P.zk * d, P.ek * d, quad_order))


# --- diamond -----------------------------------------------------------------

def diamond_values(phi: KernelElement, psi: KernelElement, B: MagneticField | None, grid: GridSpec,
                   points, quad_order=DEFAULT_QUAD):
    """Rows of phi <> psi at base ``points``: shape (M, N^n), window order."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if B is not None and B.depends_on_eps:
        raise ValueError("bind eps in the magnetic field before taking products")
    P = _pairs(grid)
    W = grid.size
    n = grid.n
    pref = (grid.delta / (2 * math.pi)) ** n
    out = np.zeros((len(pts), W), dtype=complex)
    if len(P.v) == 0 or len(pts) == 0:
        return out
    h = half_lattice_coords(grid, pts)
    const_phase = B is None or B.is_zero or B.is_constant
    omega_c = _omega_pairs(B, P, pts[0], quad_order) if const_phase else None
    if h is None:
        for m, q in enumerate(pts):
            bases_phi = q[None, :] - 0.5 * grid.delta * grid.offsets
            bases_psi = q[None, :] + 0.5 * grid.delta * grid.offsets
            fv = phi.values(bases_phi)  # row: e index, column: z index
            gv = psi.values(bases_psi)
            prod = fv[P.e, P.z] * gv[P.z, P.e]
            om = omega_c if const_phase else _omega_pairs(B, P, q, quad_order)
            if om is not None:
                prod = prod * om
            out[m] = P.collect @ prod
        return out * pref
    half = grid.N // 2
    lo = int(h.min()) - half
    hi = int(h.max()) + half
    count = hi - lo + 1
    tab_phi = phi.half_table(lo, hi)
    tab_psi = tab_phi if psi is phi else psi.half_table(lo, hi)
    strides = count ** np.arange(n)
    lin_e = P.ek @ strides
    lin_z = P.zk @ strides
    rows = (h - lo) @ strides
    gidx_phi = (-lin_e) * W + P.z
    gidx_psi = lin_z * W + P.e
    flat_phi = tab_phi.reshape(-1)
    flat_psi = tab_psi.reshape(-1)
    step = max(1, BLOCK // max(1, len(P.v)))
    for start in range(0, len(pts), step):
        sl = slice(start, start + step)
        r = rows[sl][None, :] * W
        prod = flat_phi[r + gidx_phi[:, None]] * flat_psi[r + gidx_psi[:, None]]
        if const_phase:
            if omega_c is not None:
                prod *= omega_c[:, None]
        else:
            om = np.stack([_omega_pairs(B, P, q, quad_order) for q in pts[sl]], axis=1)
            prod *= om
        out[sl] = (P.collect @ prod).T
    return out * pref


class DiamondKernel(KernelElement):
    """Lazy product phi <> psi; rows on the half lattice are cached."""

    def __init__(self, phi, psi, B, grid, quad_order=DEFAULT_QUAD):
        self.phi = as_kernel(phi, grid)
        self.psi = as_kernel(psi, grid)
        self.B = B
        self.grid = grid
        self.quad_order = quad_order
        self.depends_on_eps = self.phi.depends_on_eps or self.psi.depends_on_eps or (
            B is not None and B.depends_on_eps)
        self._cache = {}

    def at(self, eps):
        B = None if self.B is None else (self.B.bind(eps) if self.B.depends_on_eps else self.B)
        return DiamondKernel(self.phi.at(eps), self.psi.at(eps), B, self.grid, self.quad_order)

    def _values(self, pts):
        h = half_lattice_coords(self.grid, pts)
        if h is None:
            return diamond_values(self.phi, self.psi, self.B, self.grid, pts, self.quad_order)
        keys = [tuple(r) for r in h]
        missing = sorted({k for k in keys if k not in self._cache})
        if missing:
            mpts = -self.grid.L + 0.5 * self.grid.delta * np.array(missing, dtype=float)
            rows = diamond_values(self.phi, self.psi, self.B, self.grid, mpts, self.quad_order)
            for k, row in zip(missing, rows):
                self._cache[k] = row
        return np.stack([self._cache[k] for k in keys])


def diamond(phi, psi, B: MagneticField | None, grid: GridSpec, quad_order=DEFAULT_QUAD) -> DiamondKernel:
    phi = as_kernel(phi, grid)
    psi = as_kernel(psi, grid)
    if l1_norm(phi, grid) == math.inf or l1_norm(psi, grid) == math.inf:
        raise ValueError("diamond factors must have finite L1 norm on the working box")
    return DiamondKernel(phi, psi, B, grid, quad_order)


def sharp(f, g, B: MagneticField | None, grid: GridSpec, quad_order=DEFAULT_QUAD) -> SampledSymbol:
    """Magnetic Moyal product computed as F[ F^-1 f <> F^-1 g ]."""
    phi = partial_fourier_inv(f, grid) if isinstance(f, SymbolFn) else as_kernel(f, grid)
    psi = partial_fourier_inv(g, grid) if isinstance(g, SymbolFn) else as_kernel(g, grid)
    return partial_fourier(diamond(phi, psi, B, grid, quad_order), grid)


def spectral_norm(a):
    return float(scipy.linalg.svdvals(np.asarray(a))[0])


def composition_residual(f, g, A, B, grid: GridSpec, quad_order=DEFAULT_QUAD):
    """|| Op(f) Op(g) - Op(f # g) ||_2 / (||Op(f)||_2 ||Op(g)||_2)."""
    Kf = build_kernel(f, A, grid, quad_order).entries
    Kg = build_kernel(g, A, grid, quad_order).entries
    Kfg = build_kernel(sharp(f, g, B, grid, quad_order), A, grid, quad_order).entries
    return spectral_norm(Kf @ Kg - Kfg) / (spectral_norm(Kf) * spectral_norm(Kg))


# --- algebra structure ---------------------------------------------------------

def star_involution(phi: KernelElement) -> KernelElement:
    if isinstance(phi, InvolutionKernel):
        return phi.inner
    return InvolutionKernel(phi)


def l1_norm(phi, grid: GridSpec, eps_list=None):
    """delta^n sum_v max_q |phi(q; v)|, the max also ranging over ``eps_list`` if given."""
    if isinstance(phi, np.ndarray):
        samples = [np.abs(phi)]
    elif eps_list is None:
        samples = [np.abs(phi.grid_samples())]
    else:
        samples = [np.abs(phi.at(e).grid_samples()) for e in eps_list]
    sup = np.max([s.max(axis=0) for s in samples], axis=0)
    sup = np.where(grid.window_valid, sup, 0.0)
    return float(grid.delta ** grid.n * np.sum(sup))


def l2_norm(samples, grid: GridSpec):
    """L2 norm of a function on (grid) x (window), window slots outside excluded."""
    a = np.asarray(samples)[:, grid.window_valid]
    return float(math.sqrt(grid.delta ** (2 * grid.n) * np.sum(np.abs(a) ** 2)))


def regular_rep_apply(phi, psi, B, grid: GridSpec, quad_order=DEFAULT_QUAD):
    """Left regular representation: phi <> psi for a sampled psi on (grid) x (window)."""
    psi_k = psi if isinstance(psi, KernelElement) else GridKernel(psi, grid)
    return diamond_values(as_kernel(phi, grid), psi_k, B, grid, grid.points, quad_order)


def strong_continuity_modulus(phi_family, psi, B_family, eps0, eps_list, grid: GridSpec,
                              quad_order=DEFAULT_QUAD):
    """|| phi^eps <>_eps psi - phi^eps0 <>_eps0 psi ||_2 for each eps."""
    def apply(eps):
        B = None if B_family is None else B_family.bind(eps)
        return regular_rep_apply(phi_family.at(eps), psi, B, grid, quad_order)

    ref = apply(eps0)
    out = []
    for eps in eps_list:
        out.append((float(eps), 0.0 if eps == eps0 else l2_norm(apply(eps) - ref, grid)))
    return out


# --- independent nonmagnetic oracle -------------------------------------------

def weyl_moyal_fft(f, g, grid: GridSpec):
    """Nonmagnetic Weyl-Moyal product in one dimension via the twisted convolution
    of symplectic Fourier spectra, evaluated on (x-grid) x (dual grid).

    Uses e^{iK1.X} # e^{iK2.X} = e^{i(K1+K2).X} exp(-(i/2)(k1 kappa2 - kappa1 k2)).
    """
    if grid.n != 1:
        raise ValueError("the FFT oracle is one-dimensional")
    N = grid.N
    fs = _samples(f, grid).reshape(N, N)
    gs = _samples(g, grid).reshape(N, N)
    x0, p0 = grid.axis[0], grid.dual_axis[0]
    dk = 2 * math.pi / (N * grid.delta)   # x-frequency spacing
    dkap = 2 * math.pi / (N * grid.dxi)   # xi-frequency spacing
    m = np.arange(N) - N // 2
    ka, kb = np.meshgrid(m * dk, m * dkap, indexing="ij")

    def spectrum(a):
        F = np.fft.fftshift(np.fft.fft2(a)) / N ** 2
        return F * np.exp(-1j * (ka * x0 + kb * p0))

    Fs, Gs = spectrum(fs), spectrum(gs)
    M = 2 * N
    H = np.zeros((M, M), dtype=complex)
    big = np.arange(M) - N  # output frequency indices
    A_idx, B_idx = np.meshgrid(big, big, indexing="ij")
    for a1 in range(N):
        for b1 in range(N):
            c = Fs[a1, b1]
            if c == 0:
                continue
            ia, ib = m[a1], m[b1]
            sa = slice(N // 2 + ia, N // 2 + ia + N)  # where a1 + a2 lands for a2 in m
            sb = slice(N // 2 + ib, N // 2 + ib + N)
            phase = np.exp(-0.5j * (ia * dk * B_idx[sa, sb] * dkap - ib * dkap * A_idx[sa, sb] * dk))
            H[sa, sb] += c * Gs * phase
    # back to grid values: fold output frequencies modulo N
    Kx = big * dk
    Kp = big * dkap
    H = H * np.exp(1j * (Kx[:, None] * x0 + Kp[None, :] * p0))
    folded = np.zeros((N, N), dtype=complex)
    amod = np.mod(big, N)
    for a in range(M):
        np.add.at(folded, (amod[a], amod), H[a])
    vals = np.fft.ifft2(folded) * N ** 2
    return vals


def _samples(f, grid):
    if isinstance(f, SymbolFn):
        return SampledSymbol.from_symbol(f, grid).values
    if isinstance(f, SampledSymbol):
        return f.values
    return np.asarray(f)

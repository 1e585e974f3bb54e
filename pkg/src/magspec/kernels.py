"""Kernel elements phi(q; v): base point q, group displacement v.

Every element is resolved on the displacement window of a ``GridSpec``:
``values(points)`` returns an array of shape ``(len(points), N**n)`` whose
columns follow ``grid.offsets``.  Base points are arbitrary; the half
lattice ``-L + h*delta/2`` (integer h) is the one the products need.
"""
from __future__ import annotations

import math

import numpy as np

from .expr import as_expr, evaluate, substitute
from .symbols import GridSpec, SymbolFn

CHUNK = 1 << 22  # complex entries per evaluation block


def _axes(n):
    return tuple(range(1, n + 1))


def partial_fourier_inv_samples(samples, grid: GridSpec):
    """phi(q, v_k) = dxi^n sum_l exp(-i xi_l . v_k) f(q, xi_l), rows independent."""
    n, N = grid.n, grid.N
    a = np.asarray(samples, dtype=complex).reshape((-1,) + (N,) * n)
    ax = _axes(n)
    out = np.fft.fftshift(np.fft.fftn(np.fft.ifftshift(a, axes=ax), axes=ax), axes=ax)
    return out.reshape(a.shape[0], -1) * grid.dxi ** n


def partial_fourier_samples(kernel, grid: GridSpec):
    """f(q, xi_l) = (2 pi)^-n delta^n sum_k exp(i xi_l . v_k) phi(q, v_k)."""
    n, N = grid.n, grid.N
    a = np.asarray(kernel, dtype=complex).reshape((-1,) + (N,) * n)
    ax = _axes(n)
    out = np.fft.fftshift(np.fft.ifftn(np.fft.ifftshift(a, axes=ax), axes=ax), axes=ax)
    scale = (grid.delta / (2 * math.pi)) ** n * N ** n
    return out.reshape(a.shape[0], -1) * scale


def half_lattice_points(grid: GridSpec, lo, hi):
    """Points -L + h*delta/2 for integer h in [lo, hi]^n, axis 1 fastest."""
    count = hi - lo + 1
    idx = np.arange(count ** grid.n)
    cols = [lo + (idx // count ** j) % count for j in range(grid.n)]
    h = np.stack(cols, axis=-1)
    return -grid.L + 0.5 * grid.delta * h


def half_lattice_coords(grid: GridSpec, points, tol=1e-9):
    """Integer half-lattice coordinates of ``points`` or None if off-lattice."""
    h = 2.0 * (np.asarray(points, dtype=float) + grid.L) / grid.delta
    r = np.rint(h)
    if np.all(np.abs(h - r) <= tol * np.maximum(1.0, np.abs(h))):
        return r.astype(np.int64)
    return None


class KernelElement:
    """Base class; subclasses implement ``_values`` on a block of base points."""

    grid: GridSpec
    depends_on_eps = False

    @property
    def n(self):
        return self.grid.n

    def values(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        W = self.grid.size
        step = max(1, CHUNK // W)
        if len(pts) <= step:
            return self._values(pts)
        return np.concatenate([self._values(pts[i:i + step]) for i in range(0, len(pts), step)])

    def _values(self, pts):
        raise NotImplementedError

    def at(self, eps):
        return self

    def half_table(self, lo, hi):
        return self.values(half_lattice_points(self.grid, lo, hi))

    def midpoint_table(self):
        """Values at all midpoints (x_i + x_j)/2, coordinates h = i + j."""
        return self.half_table(0, 2 * self.grid.N - 2)

    def grid_samples(self):
        return self.values(self.grid.points)


class ExprKernel(KernelElement):
    """Kernel given by expressions in x1..xn (base) and y1..yn (displacement)."""

    def __init__(self, real, grid: GridSpec, imag=None, eps=None):
        self.grid = grid
        names = {f"x{j}" for j in range(1, grid.n + 1)} | {f"y{j}" for j in range(1, grid.n + 1)} | {"eps"}
        self.real = as_expr(real, names)
        self.imag = None if imag is None else as_expr(imag, names)
        self.eps = eps
        free = self.real.free_vars() | (self.imag.free_vars() if self.imag is not None else set())
        self.depends_on_eps = "eps" in free and eps is None

    def at(self, eps):
        b = {"eps": float(eps)}
        im = None if self.imag is None else substitute(self.imag, b)
        return ExprKernel(substitute(self.real, b), self.grid, im, eps=float(eps))

    def _values(self, pts):
        b = {}
        for j in range(self.n):
            b[f"x{j + 1}"] = pts[:, j][:, None]
            b[f"y{j + 1}"] = self.grid.displacements[:, j][None, :]
        shape = (len(pts), self.grid.size)
        out = np.broadcast_to(np.asarray(evaluate(self.real, b), dtype=float), shape).astype(complex)
        if self.imag is not None:
            out = out + 1j * np.broadcast_to(np.asarray(evaluate(self.imag, b), dtype=float), shape)
        return out


class SymbolKernel(KernelElement):
    """Inverse partial Fourier transform of a symbol, exact in the base point."""

    def __init__(self, symbol: SymbolFn, grid: GridSpec):
        if symbol.n != grid.n:
            raise ValueError("symbol and grid dimensions differ")
        self.symbol = symbol
        self.grid = grid
        self.depends_on_eps = symbol.depends_on_eps

    def at(self, eps):
        return SymbolKernel(self.symbol.at(eps), self.grid)

    def _values(self, pts):
        samples = self.symbol.values(pts[:, None, :], self.grid.dual_points[None, :, :])
        return partial_fourier_inv_samples(samples, self.grid)


class GridKernel(KernelElement):
    """Samples on grid points x displacement window, multilinear in the base point."""

    def __init__(self, samples, grid: GridSpec):
        s = np.asarray(samples, dtype=complex)
        if s.shape != (grid.size, grid.size):
            raise ValueError(f"expected samples of shape {(grid.size, grid.size)}, got {s.shape}")
        self.samples = s
        self.grid = grid

    def _values(self, pts):
        g = self.grid
        t = (pts + g.L) / g.delta
        i0 = np.floor(t).astype(np.int64)
        w = t - i0
        out = np.zeros((len(pts), g.size), dtype=complex)
        for corner in range(2 ** g.n):
            weight = np.ones(len(pts))
            flat = np.zeros(len(pts), dtype=np.int64)
            ok = np.ones(len(pts), dtype=bool)
            for j in range(g.n):
                bit = (corner >> j) & 1
                idx = i0[:, j] + bit
                weight = weight * (w[:, j] if bit else 1.0 - w[:, j])
                ok &= (idx >= 0) & (idx < g.N)
                flat += np.clip(idx, 0, g.N - 1) * g.N ** j
            take = ok & (weight != 0)
            out[take] += weight[take, None] * self.samples[flat[take]]
        return out


class SampledKernel(GridKernel):
    """Grid kernel whose midpoint values come from trigonometric half-shift interpolation."""

    def midpoint_table(self):
        g = self.grid
        a = self.samples.reshape((g.N,) * g.n + (g.size,))
        for axis in range(g.n):
            a = _upsample2(a, axis=g.n - 1 - axis)
        # drop the last half-lattice row (coordinate 2N - 1) on every axis
        sl = tuple(slice(0, 2 * g.N - 1) for _ in range(g.n))
        return a[sl].reshape(-1, g.size)


def _upsample2(a, axis):
    """Band-limited interpolation onto a grid twice as fine along ``axis``."""
    N = a.shape[axis]
    F = np.fft.fft(a, axis=axis)
    shape = list(a.shape)
    shape[axis] = 2 * N
    G = np.zeros(shape, dtype=complex)

    def put(dst, src, scale=1.0):
        d = [slice(None)] * a.ndim
        s = [slice(None)] * a.ndim
        d[axis] = dst
        s[axis] = src
        G[tuple(d)] += scale * F[tuple(s)]

    h = N // 2
    put(slice(0, h), slice(0, h))
    put(slice(2 * N - h + 1, 2 * N), slice(h + 1, N))
    put(slice(h, h + 1), slice(h, h + 1), 0.5)
    put(slice(2 * N - h, 2 * N - h + 1), slice(h, h + 1), 0.5)
    return 2.0 * np.fft.ifft(G, axis=axis)


class InvolutionKernel(KernelElement):
    """phi*(q; v) = conj phi(q; -v)."""

    def __init__(self, inner: KernelElement):
        self.inner = inner
        self.grid = inner.grid
        self.depends_on_eps = inner.depends_on_eps
        rev = self.grid.offset_index(-self.grid.offsets)
        self._rev = np.where(rev < 0, 0, rev)
        self._ok = rev >= 0

    def at(self, eps):
        return InvolutionKernel(self.inner.at(eps))

    def _values(self, pts):
        v = np.conj(self.inner.values(pts)[:, self._rev])
        v[:, ~self._ok] = 0.0
        return v


class SampledSymbol:
    """Symbol samples on (x-grid) x (dual grid): ``values[i, l] = f(x_i, xi_l)``."""

    def __init__(self, values, grid: GridSpec):
        v = np.asarray(values, dtype=complex)
        if v.shape != (grid.size, grid.size):
            raise ValueError("sampled symbol must have shape (N^n, N^n)")
        self.values = v
        self.grid = grid

    @property
    def n(self):
        return self.grid.n

    def kernel(self):
        return SampledKernel(partial_fourier_inv_samples(self.values, self.grid), self.grid)

    @classmethod
    def from_symbol(cls, f: SymbolFn, grid: GridSpec):
        return cls(f.values(grid.points[:, None, :], grid.dual_points[None, :, :]), grid)


def as_kernel(obj, grid: GridSpec) -> KernelElement:
    if isinstance(obj, KernelElement):
        return obj
    if isinstance(obj, SymbolFn):
        return SymbolKernel(obj, grid)
    if isinstance(obj, SampledSymbol):
        return obj.kernel()
    arr = np.asarray(obj)
    if arr.shape == (grid.size, grid.size):
        return GridKernel(arr, grid)
    raise TypeError(f"cannot interpret {type(obj).__name__} as a kernel element")

"""Spectra, resolvent norms and functional-calculus norms of grid operators."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .expr import Expr, as_expr, evaluate, parse
from .quantize import OperatorMatrix, hermitian_defect

HF_STEP = 1e-5  # perturbation size for bulk weights


@dataclass
class SpectrumSet:
    values: np.ndarray
    trust_ceiling: float
    trusted: np.ndarray
    bulk_weight: np.ndarray | None = None
    grid: object = None
    params: dict = field(default_factory=dict)

    @property
    def trusted_values(self):
        return self.values[self.trusted]

    def window(self, lo, hi, trusted_only=True):
        v = self.trusted_values if trusted_only else self.values
        return v[(v >= lo) & (v <= hi)]

    def __len__(self):
        return len(self.values)

    @classmethod
    def from_values(cls, values, trust_ceiling=None):
        v = np.sort(np.asarray(values, dtype=float))
        top = float(v[-1]) if len(v) else 0.0
        ceil = top if trust_ceiling is None else min(float(trust_ceiling), top)
        return cls(v, ceil, v <= ceil)


def _band_storage(a, u):
    """Upper banded storage: ab[u + i - j, j] = a[i, j]."""
    n = a.shape[0]
    ab = np.zeros((u + 1, n), dtype=a.dtype)
    for k in range(u + 1):
        ab[u - k, k:] = np.diagonal(a, k)
    return ab


def eigenvalues(a, bandwidth=None):
    """All eigenvalues of a Hermitian matrix, ascending (banded LAPACK solver when narrow)."""
    a = np.asarray(a)
    size = a.shape[0]
    if size == 0:
        return np.zeros(0)
    if bandwidth is not None and size > 64 and bandwidth <= size // 8:
        return scipy.linalg.eig_banded(_band_storage(a, bandwidth), lower=False, eigvals_only=True)
    return scipy.linalg.eigvalsh(a)


def bulk_mask(grid, margin):
    """Grid points at distance >= margin from every face of the box."""
    pts = grid.points
    lo = pts + grid.L
    hi = (grid.L - grid.delta) - pts
    dist = np.min(np.minimum(lo, hi), axis=-1)
    return dist >= margin - 1e-12


def spectrum(K: OperatorMatrix, trust_fraction=0.25, edge_margin=None, bulk_threshold=0.5) -> SpectrumSet:
    """Full Hermitian spectrum with trust flags.

    Eigenvalues above ``trust_fraction`` times the kinetic cutoff (Peierls
    operators) or the largest eigenvalue (others) are untrusted.  With
    ``edge_margin`` set, eigenvalues whose eigenvector keeps less than
    ``bulk_threshold`` of its weight at distance ``>= edge_margin`` from the
    walls are untrusted too; the weights are first-order eigenvalue
    sensitivities to the bulk projector, so no eigenvectors are formed.
    """
    a = K.entries
    scale = max(1.0, float(np.max(np.abs(a), initial=0.0)))
    if hermitian_defect(a) > 1e-10 * scale:
        raise ValueError("spectrum needs a Hermitian matrix")
    vals = eigenvalues(a, K.bandwidth)
    top = float(vals[-1]) if len(vals) else 0.0
    base = K.kinetic_cutoff if (K.kind == "peierls" and K.kinetic_cutoff) else top
    ceiling = min(trust_fraction * base, top)
    trusted = vals <= ceiling
    weights = None
    if edge_margin is not None and K.grid is not None and len(vals):
        mask = bulk_mask(K.grid, edge_margin).astype(float)
        shifted = a.copy()
        shifted[np.diag_indices_from(shifted)] += HF_STEP * mask
        weights = np.clip((eigenvalues(shifted, K.bandwidth) - vals) / HF_STEP, 0.0, 1.0)
        trusted &= weights >= bulk_threshold
    params = {"trust_fraction": trust_fraction, "edge_margin": edge_margin, "bulk_threshold": bulk_threshold}
    return SpectrumSet(vals, ceiling, trusted, weights, K.grid, params)


def _values(s, trusted_only):
    if isinstance(s, SpectrumSet):
        return s.trusted_values if trusted_only else s.values
    return np.asarray(s, dtype=float)


def resolvent_norm(s, z, trusted_only=False):
    """1 / dist(z, spectrum); ``inf`` when z is an eigenvalue."""
    v = _values(s, trusted_only)
    if len(v) == 0:
        return 0.0
    d = float(np.min(np.abs(complex(z) - v)))
    return math.inf if d == 0.0 else 1.0 / d


def resolvent_norm_direct(a, z):
    """Spectral norm of the explicit inverse of (a - z), the small-matrix oracle."""
    a = np.asarray(a, dtype=complex)
    r = np.linalg.inv(a - z * np.eye(a.shape[0]))
    return float(scipy.linalg.svdvals(r)[0])


def chi_norm(s, chi, trusted_only=False):
    """sup over the spectrum of |chi|; chi is an expression in t or a callable."""
    v = _values(s, trusted_only)
    if len(v) == 0:
        return 0.0
    if callable(chi) and not isinstance(chi, Expr):
        out = np.asarray(chi(v), dtype=float)
    else:
        e = as_expr(chi, {"t"})
        out = np.broadcast_to(np.asarray(evaluate(e, {"t": v}), dtype=float), v.shape)
    return float(np.max(np.abs(out)))


def hat(center, half_width) -> Expr:
    """Piecewise-linear bump: 1 at ``center``, 0 outside (center -/+ half_width)."""
    u = f"(1 - sqrt((t - ({float(center)!r}))^2)/{float(half_width)!r})"
    return parse(f"({u} + sqrt({u}^2))/2", {"t"})


def clusters(values, gap):
    """Group sorted values whose neighbours are closer than ``gap``."""
    v = np.sort(np.asarray(values, dtype=float))
    out = []
    if len(v) == 0:
        return out
    start = 0
    for i in range(1, len(v) + 1):
        if i == len(v) or v[i] - v[i - 1] >= gap:
            c = v[start:i]
            out.append({"center": float(np.mean(c)), "count": int(len(c)),
                        "min": float(c[0]), "max": float(c[-1])})
            start = i
    return out

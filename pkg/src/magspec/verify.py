"""Invariant suite behind ``magspec verify``.

``quick`` uses small grids (about a minute on one core); ``full`` runs the
production grids.  Each check returns ``(ok, detail)``.
"""
from __future__ import annotations

import math
import time

import numpy as np

from .cocycle_field import CocycleField, evaluation_consistency, field_continuity_check
from .config import bundled
from .continuity import ParamSweep, hausdorff_window, inner_check, outer_check, semicontinuity_diagnostic
from .geometry import (
    GaugeShifted,
    MagneticField,
    big_gamma_flux,
    cocycle_identity_residual,
    gamma_flux,
    poincare_gauge,
    triangle_flux,
)
from .kernels import ExprKernel
from .moyal import composition_residual, diamond, l1_norm, sharp, star_involution, weyl_moyal_fft
from .quantize import build_peierls
from .spectral import eigenvalues, resolvent_norm, resolvent_norm_direct, spectrum
from .sweep import run_sweep
from .symbols import GridSpec, SymbolFn

SMOOTH = "1 + 0.3*cos(x1)"


def _rng(seed=0):
    return np.random.default_rng(seed)


def check_flux_closed_forms(full=False):
    rng = _rng(1)
    b = 0.7
    B = MagneticField.constant(b)
    x, y, z = (rng.uniform(-3, 3, (100, 2)) for _ in range(3))
    w = y[:, 0] * z[:, 1] - y[:, 1] * z[:, 0]
    err = max(np.max(np.abs(gamma_flux(B, x, y, z) - 0.5 * b * w)),
              np.max(np.abs(big_gamma_flux(B, x, y, z) - 2 * b * w)))
    return err <= 1e-9, f"max error {err:.2e}"


def check_corner_convention(full=False):
    rng = _rng(2)
    B = MagneticField(2, {"12": SMOOTH})
    x, y, z = (rng.uniform(-2, 2, (50, 2)) for _ in range(3))
    err = np.max(np.abs(big_gamma_flux(B, x, y, z) - triangle_flux(B, x - y - z, x + y - z, x - y + z)))
    return err <= 1e-8, f"max error {err:.2e}"


def check_cocycle_identity(full=False):
    rng = _rng(3)
    fam = MagneticField(2, {"12": f"eps*({SMOOTH})"})
    worst = 0.0
    for eps in (0.5, 1.0, 1.5):
        q, x, y, z = (rng.uniform(-2, 2, (100, 2)) for _ in range(4))
        worst = max(worst, float(np.max(cocycle_identity_residual(fam.bind(eps), q, x, y, z))))
    return worst <= 1e-8, f"max residual {worst:.2e}"


def check_gauge_covariance(full=False):
    N = 32 if full else 16
    grid = GridSpec(2, 6.0, N)
    h = SymbolFn("xi1^2 + xi2^2", 2, 2, "polynomial")
    A = poincare_gauge(MagneticField.constant(1.0))
    e1 = eigenvalues(build_peierls(h, A, grid).entries)
    e2 = eigenvalues(build_peierls(h, GaugeShifted(A, "x1*x2"), grid).entries)
    err = float(np.max(np.abs(e1 - e2)))
    return err <= 1e-10, f"N={N} max eigenvalue difference {err:.2e}"


def _gauss_pair():
    f = SymbolFn("exp(-x1^2 - xi1^2)", 1)
    g = SymbolFn("exp(-(x1 - 0.5)^2 - 0.5*xi1^2)", 1)
    return f, g


def check_zero_field_reduction(full=False):
    N = 64 if full else 32
    grid = GridSpec(1, 8.0, N)
    f, g = _gauss_pair()
    ours = sharp(f, g, None, grid).values
    oracle = weyl_moyal_fft(f, g, grid).reshape(grid.size, grid.size)
    err = float(np.max(np.abs(ours - oracle)))
    return err <= 1e-6, f"N={N} max difference {err:.2e}"


def check_composition(full=False):
    f = SymbolFn("exp(-x1^2 - x2^2 - xi1^2 - xi2^2)", 2)
    g = SymbolFn("exp(-(x1 - 0.5)^2 - x2^2 - 0.5*xi1^2 - xi2^2)", 2)
    B = MagneticField.constant(0.5)
    A = poincare_gauge(B)
    coarse, fine = (8, 16) if not full else (16, 32)
    r1 = composition_residual(f, g, A, B, GridSpec(2, 6.0, coarse))
    r2 = composition_residual(f, g, A, B, GridSpec(2, 6.0, fine))
    return r2 * 4 <= r1, f"N={coarse}: {r1:.2e}, N={fine}: {r2:.2e}, ratio {r1 / r2:.1f}"


def _algebra_triple(grid, eps=None):
    phi = ExprKernel("exp(-x1^2 - x2^2 - y1^2 - y2^2)", grid)
    psi = ExprKernel("exp(-(x1 - 0.4)^2 - x2^2 - y1^2 - 0.5*y2^2)", grid,
                     imag="0.3*y1*exp(-x1^2 - x2^2 - y1^2 - y2^2)")
    chi = ExprKernel("exp(-x1^2 - (x2 + 0.3)^2 - 0.7*y1^2 - y2^2)", grid)
    return phi, psi, chi


def check_algebra(full=False):
    grid = GridSpec(2, 6.0, 8)
    B = MagneticField(2, {"12": SMOOTH})
    phi, psi, chi = _algebra_triple(grid)
    q = 12 if full else 8
    pts = grid.points
    left = diamond(diamond(phi, psi, B, grid, q), chi, B, grid, q).values(pts)
    right = diamond(phi, diamond(psi, chi, B, grid, q), B, grid, q).values(pts)
    mask = grid.window_valid
    assoc = float(np.max(np.abs(left - right)[:, mask]))
    a = star_involution(diamond(phi, psi, B, grid, q)).values(pts)
    b = diamond(star_involution(psi), star_involution(phi), B, grid, q).values(pts)
    anti = float(np.max(np.abs(a - b)[:, mask]))
    prod = l1_norm(diamond(phi, psi, B, grid, q), grid)
    bound = l1_norm(phi, grid) * l1_norm(psi, grid)
    ok = assoc <= 1e-6 and anti <= 1e-6 and prod <= bound
    return ok, f"associativity {assoc:.1e}, involution {anti:.1e}, |phi<>psi| {prod:.3g} <= {bound:.3g}"


def check_oscillator(full=False):
    N = 256 if full else 128
    grid = GridSpec(1, 10.0, N)
    s = spectrum(build_peierls(SymbolFn("xi1^2 + x1^2", 1, 2, "polynomial"), None, grid))
    low = s.trusted_values[:3]
    err = float(np.max(np.abs(low - [1, 3, 5]) / [1, 3, 5]))
    return err <= 0.01, f"N={N} lowest {np.round(low, 4).tolist()}"


def check_resolvent_oracle(full=False):
    rng = _rng(4)
    a = rng.normal(size=(24, 24)) + 1j * rng.normal(size=(24, 24))
    a = a + a.conj().T
    vals = np.linalg.eigvalsh(a)
    worst = 0.0
    for z in (1j, 0.5 + 0.3j, -2 + 1j):
        worst = max(worst, abs(resolvent_norm(vals, z) - resolvent_norm_direct(a, z)))
    return worst <= 1e-8, f"max difference {worst:.1e}"


def check_synthetic_gates(full=False):
    eps = np.linspace(-1, 1, 41)
    sw = ParamSweep.from_values(eps, [[e, 2 + e] for e in eps])
    o = outer_check(sw, 0.0, [(0.5, 1.5)])
    sw1 = ParamSweep.from_values(eps, [[e] for e in eps])
    i = inner_check(sw1, 0.0, [(-0.1, 0.1)])
    d = hausdorff_window([1, 3], [1.1, 2.9], (0, 4))
    ok = o.passed and abs(o.eta_max - 0.5) < 1e-12 and i.passed and abs(i.eta_max - 0.1) < 1e-12 \
        and abs(d - 0.1) < 1e-12
    return ok, f"outer eta {o.eta_max:.3g}, inner eta {i.eta_max:.3g}, hausdorff {d:.3g}"


def check_weyl_families(full=False):
    rng = _rng(5)
    worst = -math.inf
    flagged = 0
    for _ in range(20):
        a = rng.normal(size=(16, 16))
        b = rng.normal(size=(16, 16))
        a, b = a + a.T, 0.5 * (b + b.T)
        eps = np.linspace(-0.1, 0.1, 11)
        vals = [np.linalg.eigvalsh(a + e * b) for e in eps]
        for e, v in zip(eps, vals):
            slack = hausdorff_window(v, vals[5]) - np.linalg.norm(e * b, 2)
            worst = max(worst, slack)
        sw = ParamSweep.from_values(eps, vals)
        gates = family_gates(sw, 0.0)
        rep = semicontinuity_diagnostic(sw, 0.0, [1j, 2j, 0.5 + 1j, -1 + 0.5j, 3j], gates)
        flagged += rep.inconsistency or not rep.continuous or not all(g.passed for g in gates)
    return worst <= 1e-10 and flagged == 0, f"max Weyl slack {worst:.1e}, families flagged {flagged}"


def family_gates(sw, eps0):
    """Outer gate around the widest gap and inner gate around the lowest eigenvalue at eps0."""
    v = sw.values(sw.index_of(eps0))
    gaps = np.diff(v)
    j = int(np.argmax(gaps))
    mid, half = 0.5 * (v[j] + v[j + 1]), 0.1 * gaps[j]
    return [outer_check(sw, eps0, [(mid - half, mid + half)]),
            inner_check(sw, eps0, [(v[0] - 0.5, v[0] + 0.5)])]


def check_cocycle_field(full=False):
    cf = CocycleField(MagneticField(2, {"12": "eps"}))
    y, z = np.array([0.4, -0.3]), np.array([0.9, 0.6])
    w = y[0] * z[1] - y[1] * z[0]
    got = field_continuity_check(cf, y, z, 1.0, [0.8, 1.2])
    err = max(abs(d - abs(np.exp(-0.5j * e * w) - np.exp(-0.5j * w))) for e, d in got)
    grid = GridSpec(1, 4.0, 16)
    fam = ExprKernel("(1 + eps)*exp(-x1^2 - y1^2)", grid)
    rep = evaluation_consistency(fam, 0.5, grid, np.linspace(0, 1, 5))
    ok = err <= 1e-12 and abs(rep.ratio - 0.75) <= 1e-12 and rep.gap <= 0
    return ok, f"closed-form error {err:.1e}, evaluation ratio {rep.ratio:.4f}"


def check_harmonic_sweep(full=False):
    cfg = bundled("harmonic_shift")
    if not full:
        cfg.N = 128
    r = run_sweep(cfg)
    slope = r.report.bands["slope_at_eps0"]
    return abs(slope) <= 0.05 and r.report.passed, f"slope at eps0 {slope:.2e}"


def check_landau(full=False):
    cfg = bundled("landau")
    if not full:
        cfg.L, cfg.N, cfg.edge_margin = 8.0, 32, 2.5
        cfg.eps_min, cfg.eps_max, cfg.eps_steps = 0.95, 1.05, 3
    r = run_sweep(cfg)
    cl = [c["center"] for c in r.report.bands["clusters_at_eps0"][:3]]
    tol = 0.1 if full else 0.2
    levels = len(cl) == 3 and all(abs(c - t) <= tol * t for c, t in zip(cl, (1, 3, 5)))
    return levels and r.report.passed, f"N={cfg.N} clusters {np.round(cl, 3).tolist()}, gates {r.report.lines()[:2]}"


CHECKS = [
    ("flux closed forms", check_flux_closed_forms),
    ("corner convention", check_corner_convention),
    ("cocycle identity", check_cocycle_identity),
    ("gauge covariance", check_gauge_covariance),
    ("zero-field reduction", check_zero_field_reduction),
    ("composition law", check_composition),
    ("algebra axioms", check_algebra),
    ("oscillator levels", check_oscillator),
    ("resolvent oracle", check_resolvent_oracle),
    ("synthetic gates", check_synthetic_gates),
    ("matrix families", check_weyl_families),
    ("cocycle field", check_cocycle_field),
    ("harmonic sweep", check_harmonic_sweep),
    ("landau sweep", check_landau),
]


def run_verify(level="quick", out=print):
    full = level == "full"
    failures = 0
    for name, fn in CHECKS:
        t = time.perf_counter()
        try:
            ok, detail = fn(full)
        except Exception as exc:  # a crash is a failed invariant, keep going
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        failures += not ok
        out(f"{'PASS' if ok else 'FAIL'}  {name:<22} {time.perf_counter() - t:6.1f}s  {detail}")
    out(f"{len(CHECKS) - failures}/{len(CHECKS)} checks passed ({level})")
    return 0 if failures == 0 else 1

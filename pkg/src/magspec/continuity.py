"""Inner/outer continuity gates, Hausdorff moduli and resolvent diagnostics.

A finite sweep can only falsify continuity at its resolution, so verdicts
are phrased as "no violation at resolution d_eps" rather than "continuous".
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .spectral import SpectrumSet, resolvent_norm


@dataclass
class ParamSweep:
    eps: np.ndarray
    spectra: list
    z_probes: list = field(default_factory=list)
    resolvent: dict = field(default_factory=dict)  # z -> array over eps
    trusted_only: bool = True

    def __post_init__(self):
        self.eps = np.asarray(self.eps, dtype=float)
        if len(self.eps) != len(self.spectra):
            raise ValueError("one spectrum per sweep point")
        if np.any(np.diff(self.eps) <= 0):
            raise ValueError("sweep values must be strictly increasing")
        for z in self.z_probes:
            if z not in self.resolvent:
                self.resolvent[z] = np.array([resolvent_norm(s, z, self.trusted_only) for s in self.spectra])

    @classmethod
    def from_values(cls, eps, value_lists, z_probes=()):
        spectra = [SpectrumSet.from_values(v) for v in value_lists]
        return cls(eps, spectra, list(z_probes))

    @property
    def resolution(self):
        return float(np.max(np.diff(self.eps))) if len(self.eps) > 1 else 0.0

    def index_of(self, eps0):
        i = int(np.argmin(np.abs(self.eps - eps0)))
        if abs(self.eps[i] - eps0) > 1e-12 * max(1.0, abs(eps0)):
            raise ValueError(f"eps0={eps0} is not a sweep point")
        return i

    def values(self, i):
        s = self.spectra[i]
        return s.trusted_values if self.trusted_only else s.values


@dataclass
class GateVerdict:
    gate: str
    status: str                      # "pass" | "fail" | "precondition"
    eta_max: float = math.inf        # distance to the nearest violating sweep point
    offending: list = field(default_factory=list)
    resolution: float = 0.0
    detail: str = ""

    @property
    def passed(self):
        return self.status == "pass"

    def summary(self):
        if self.status == "precondition":
            return f"{self.gate}: precondition violated ({self.detail})"
        if self.status == "pass":
            return f"{self.gate}: no violation at resolution {self.resolution:.3g}"
        return f"{self.gate}: violated at eps={self.offending}"

    def to_dict(self):
        return {"gate": self.gate, "status": self.status,
                "eta_max": None if math.isinf(self.eta_max) else self.eta_max,
                "offending": self.offending, "resolution": self.resolution,
                "detail": self.detail, "summary": self.summary()}


def _meets_closed(vals, a, b):
    return bool(np.any((vals >= a) & (vals <= b)))


def _meets_open(vals, a, b):
    return bool(np.any((vals > a) & (vals < b)))


def _gate(sweep, eps0, intervals, eta, bad, pre_bad, name, pre_msg):
    i0 = sweep.index_of(eps0)
    ref = sweep.values(i0)
    pre = [iv for iv in intervals if pre_bad(ref, *iv)]
    if pre:
        return GateVerdict(name, "precondition", 0.0, [], sweep.resolution, f"{pre_msg}: {pre}")
    off = [float(e) for i, e in enumerate(sweep.eps)
           if any(bad(sweep.values(i), *iv) for iv in intervals)]
    eta_max = min((abs(e - eps0) for e in off), default=math.inf)
    if eta is None:
        # no radius requested: the adjacent sweep points must be clean
        others = np.abs(np.delete(sweep.eps, i0) - eps0)
        limit = float(others.min()) * (1 + 1e-9) if len(others) else 0.0
    else:
        limit = eta
    inside = [e for e in off if abs(e - eps0) < limit]
    status = "fail" if inside else "pass"
    return GateVerdict(name, status, eta_max, inside, sweep.resolution)


def outer_check(sweep: ParamSweep, eps0, K, eta=None) -> GateVerdict:
    """Closed intervals K free of spectrum at eps0 must stay free for |eps - eps0| < eta.

    ``eta_max`` is the distance to the nearest violating sweep point, i.e. the
    largest radius the sweep admits.  Without ``eta`` only the neighbours of
    eps0 are required to be clean.
    """
    return _gate(sweep, eps0, [tuple(k) for k in K], eta, _meets_closed, _meets_closed,
                 "outer", "K meets the reference spectrum")


def inner_check(sweep: ParamSweep, eps0, O, eta=None) -> GateVerdict:
    """Open intervals O meeting the spectrum at eps0 must keep meeting it for |eps - eps0| < eta."""
    return _gate(sweep, eps0, [tuple(o) for o in O], eta,
                 lambda v, a, b: not _meets_open(v, a, b), lambda v, a, b: not _meets_open(v, a, b),
                 "inner", "O misses the reference spectrum")


def hausdorff_window(s1, s2, window=(-math.inf, math.inf)):
    """Hausdorff distance of the two sets restricted to a closed window."""
    a = _windowed(s1, window)
    b = _windowed(s2, window)
    if len(a) == 0 and len(b) == 0:
        return 0.0
    if len(a) == 0 or len(b) == 0:
        return math.inf
    d = np.abs(a[:, None] - b[None, :])
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def _windowed(s, window):
    v = s.trusted_values if isinstance(s, SpectrumSet) else np.asarray(s, dtype=float)
    lo, hi = window
    return v[(v >= lo) & (v <= hi)]


def lipschitz_constant(eps, values, eps0, ref=None):
    """max |f(eps) - f(eps0)| / |eps - eps0| over eps != eps0."""
    eps = np.asarray(eps, dtype=float)
    values = np.asarray(values, dtype=float)
    if ref is None:
        ref = values[int(np.argmin(np.abs(eps - eps0)))]
    mask = np.abs(eps - eps0) > 0
    if not np.any(mask):
        return 0.0
    with np.errstate(invalid="ignore"):
        r = np.abs(values[mask] - ref) / np.abs(eps[mask] - eps0)
    return float(np.max(r)) if np.all(np.isfinite(r)) else math.inf


@dataclass
class SemicontinuityReport:
    probes: list
    continuous: bool
    gates_pass: bool | None
    inconsistency: bool
    resolution: float

    def to_dict(self):
        return {"probes": self.probes, "continuous": self.continuous, "gates_pass": self.gates_pass,
                "inconsistency": self.inconsistency, "resolution": self.resolution}


def semicontinuity_diagnostic(sweep: ParamSweep, eps0, z_probes, gates=None, jump_factor=10.0,
                              jump_fraction=0.25, floor=1e-9) -> SemicontinuityReport:
    """Tabulate eps -> ||R(z)||, flag jumps above a Lipschitz envelope and cross-check the gates.

    A step counts as a jump when its slope exceeds ``jump_factor`` times the
    median step slope (or ``floor``) and it moves the norm by more than
    ``jump_fraction`` of the largest norm on the sweep; kinks from a change
    of nearest eigenvalue pass the first test but not the second.  If every
    probe is jump-free, all
    supplied gate verdicts must pass; anything else is flagged as an
    inconsistency of the discretized family.
    """
    probes = []
    all_cont = True
    for z in z_probes:
        if z not in sweep.resolvent:
            sweep.resolvent[z] = np.array([resolvent_norm(s, z, sweep.trusted_only) for s in sweep.spectra])
        r = sweep.resolvent[z]
        finite = bool(np.all(np.isfinite(r)))
        if len(r) > 1 and finite:
            slopes = np.abs(np.diff(r)) / np.diff(sweep.eps)
            envelope = jump_factor * max(float(np.median(slopes)), floor)
            big = jump_fraction * float(np.max(np.abs(r)))
            steps = np.abs(np.diff(r))
            jumps = [float(sweep.eps[i + 1]) for i, s in enumerate(slopes)
                     if s > envelope and steps[i] > big]
        else:
            slopes, envelope, jumps = np.zeros(0), 0.0, []
        C = lipschitz_constant(sweep.eps, r, eps0) if finite else math.inf
        cont = finite and not jumps
        all_cont &= cont
        probes.append({"z": [complex(z).real, complex(z).imag], "norms": r.tolist(), "lipschitz": C,
                       "max_step_slope": float(slopes.max()) if len(slopes) else 0.0,
                       "envelope": envelope, "jumps": jumps, "continuous": cont})
    gates_pass = None if not gates else all(g.passed for g in gates)
    inconsistency = bool(all_cont and gates_pass is False)
    return SemicontinuityReport(probes, all_cont, gates_pass, inconsistency, sweep.resolution)


@dataclass
class BandTrack:
    points: list
    max_slope: float
    slopes: list

    def slope_at(self, eps):
        e = np.array([p[0] for p in self.points])
        i = int(np.argmin(np.abs(e - eps)))
        return self.slopes[i]


def band_edge_track(sweep: ParamSweep, k: int) -> BandTrack:
    """k-th trusted eigenvalue across the sweep with finite-difference slopes."""
    vals = []
    for i in range(len(sweep.eps)):
        v = sweep.values(i)
        vals.append(float(v[k]) if k < len(v) else math.nan)
    vals = np.array(vals)
    if len(vals) > 2:
        slopes = np.gradient(vals, sweep.eps, edge_order=2)
    elif len(vals) == 2:
        slopes = np.gradient(vals, sweep.eps)
    else:
        slopes = np.zeros(1)
    finite = slopes[np.isfinite(slopes)]
    return BandTrack([(float(e), float(v)) for e, v in zip(sweep.eps, vals)],
                     float(np.max(np.abs(finite))) if len(finite) else 0.0,
                     [float(s) for s in slopes])


@dataclass
class ContinuityReport:
    gates: list
    moduli: dict = field(default_factory=dict)
    diagnostic: SemicontinuityReport | None = None
    bands: dict = field(default_factory=dict)
    resolution: float = 0.0

    @property
    def offending(self):
        return sorted({e for g in self.gates for e in g.offending})

    @property
    def passed(self):
        return all(g.passed for g in self.gates) and not (self.diagnostic and self.diagnostic.inconsistency)

    def lines(self):
        out = [g.summary() for g in self.gates]
        if self.diagnostic is not None:
            out.append("resolvent probes: " + ("no jump" if self.diagnostic.continuous else "jump flagged")
                       + (", inconsistent with gates" if self.diagnostic.inconsistency else ""))
        out.append("scope: discretized family only")
        return out

    def to_dict(self):
        return {"gates": [g.to_dict() for g in self.gates], "moduli": self.moduli,
                "diagnostic": None if self.diagnostic is None else self.diagnostic.to_dict(),
                "bands": self.bands, "resolution": self.resolution, "passed": self.passed,
                "offending": self.offending, "summary": self.lines()}

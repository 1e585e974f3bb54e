"""End-to-end parameter sweeps: operators, spectra, gates, CSV and JSON output."""
from __future__ import annotations

import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ScenarioConfig
from .continuity import (
    ContinuityReport,
    ParamSweep,
    band_edge_track,
    hausdorff_window,
    inner_check,
    lipschitz_constant,
    outer_check,
    semicontinuity_diagnostic,
)
from .geometry import ExprPotential, MagneticField, poincare_gauge
from .quantize import OperatorMatrix, build_kernel, build_peierls
from .spectral import SpectrumSet, chi_norm, clusters, spectrum
from .symbols import GridSpec, SymbolFn

log = logging.getLogger("magspec")


def fmt(x) -> str:
    return "{:.17g}".format(float(x))


def grid_of(cfg: ScenarioConfig) -> GridSpec:
    return GridSpec(cfg.dimension, cfg.L, cfg.N)


def build_operator(cfg: ScenarioConfig, eps) -> OperatorMatrix:
    """H^eps for the configured symbol, field and gauge."""
    n = cfg.dimension
    grid = grid_of(cfg)
    h = SymbolFn(cfg.symbol, n, cfg.order, cfg.kind).at(eps)
    B = MagneticField(n, cfg.field_components).bind(eps)
    if cfg.gauge == "explicit":
        A = ExprPotential(cfg.potential, n).bind(eps)
    else:
        A = poincare_gauge(B, cfg.quad_order)
    build = build_peierls if cfg.kind == "polynomial" else build_kernel
    return build(h, A, grid, cfg.quad_order)


def spectrum_at(cfg: ScenarioConfig, eps) -> SpectrumSet:
    K = build_operator(cfg, eps)
    try:
        s = spectrum(K, cfg.trust_fraction, cfg.edge_margin, cfg.bulk_threshold)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise RuntimeError(f"eigensolver failed at eps={eps!r}: {exc}") from exc
    s.params["eps"] = float(eps)
    s.params["gauge"] = K.gauge_tag
    return s


def worker_count(requested=None, jobs=1):
    env = os.environ.get("MAGSPEC_THREADS")
    cap = int(env) if env and env.isdigit() and int(env) > 0 else (os.cpu_count() or 1)
    want = cap if requested is None else max(1, int(requested))
    return max(1, min(want, cap, jobs))


@dataclass
class SweepResult:
    config: ScenarioConfig
    sweep: ParamSweep
    report: ContinuityReport
    files: dict

    def to_dict(self):
        return {"config": self.config.to_dict(), **self.report.to_dict()}


def compute_spectra(cfg: ScenarioConfig, workers=None):
    eps = cfg.eps_values
    nw = worker_count(workers, len(eps))
    if nw == 1:
        return [spectrum_at(cfg, e) for e in eps]
    with ThreadPoolExecutor(max_workers=nw) as pool:
        # map preserves input order, so the merge is in eps order
        return list(pool.map(lambda e: spectrum_at(cfg, e), eps))


def analyse(cfg: ScenarioConfig, spectra) -> tuple[ParamSweep, ContinuityReport]:
    eps = np.array(cfg.eps_values)
    sweep = ParamSweep(eps, spectra, list(cfg.z))
    gates = []
    if cfg.K:
        gates.append(outer_check(sweep, cfg.eps0, cfg.K))
    if cfg.O:
        gates.append(inner_check(sweep, cfg.eps0, cfg.O))
    diag = semicontinuity_diagnostic(sweep, cfg.eps0, list(cfg.z), gates) if cfg.z else None
    i0 = sweep.index_of(cfg.eps0)
    ref = sweep.values(i0)[:cfg.hausdorff_count]
    haus = []
    for e, s in zip(eps, spectra):
        lowest = s.trusted_values[:cfg.hausdorff_count]
        d = hausdorff_window(lowest, ref)
        haus.append({"eps": float(e), "distance": d,
                     "ratio": 0.0 if e == cfg.eps0 else d / abs(e - cfg.eps0)})
    moduli = {
        "hausdorff_lowest": {"count": cfg.hausdorff_count, "points": haus,
                             "constant": max((h["ratio"] for h in haus), default=0.0)},
        "resolvent_lipschitz": {f"{complex(z).real:g}{complex(z).imag:+g}i":
                                lipschitz_constant(eps, sweep.resolvent[z], cfg.eps0) for z in cfg.z},
    }
    if cfg.chi:
        moduli["chi_norms"] = {c: [chi_norm(s, c, trusted_only=True) for s in spectra] for c in cfg.chi}
    bands = {}
    if len(eps) >= 1:
        track = band_edge_track(sweep, cfg.band_index)
        bands = {"index": cfg.band_index, "points": track.points, "max_slope": track.max_slope,
                 "slope_at_eps0": track.slope_at(cfg.eps0)}
    bands["clusters_at_eps0"] = clusters(spectra[i0].trusted_values, cfg.cluster_gap)[:8]
    bands["trust_ceiling_at_eps0"] = spectra[i0].trust_ceiling
    report = ContinuityReport(gates, moduli, diag, bands, sweep.resolution)
    return sweep, report


def write_outputs(cfg: ScenarioConfig, sweep: ParamSweep, report: ContinuityReport, outdir):
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    files = {"spectra": out / "spectra.csv", "resolvent": out / "resolvent.csv", "report": out / "report.json"}
    with open(files["spectra"], "w", newline="") as fh:
        fh.write("eps,k,eigenvalue_k,trusted\n")
        for e, s in zip(sweep.eps, sweep.spectra):
            for k, (v, t) in enumerate(zip(s.values, s.trusted)):
                fh.write(f"{fmt(e)},{k},{fmt(v)},{'true' if t else 'false'}\n")
    with open(files["resolvent"], "w", newline="") as fh:
        fh.write("eps,z_re,z_im,resolvent_norm\n")
        for z in sweep.z_probes:
            for e, r in zip(sweep.eps, sweep.resolvent[z]):
                fh.write(f"{fmt(e)},{fmt(complex(z).real)},{fmt(complex(z).imag)},{fmt(r)}\n")
    payload = {"config": cfg.to_dict(),
               "trust": {"fraction": cfg.trust_fraction, "edge_margin": cfg.edge_margin,
                         "bulk_threshold": cfg.bulk_threshold},
               **report.to_dict()}
    with open(files["report"], "w") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return {k: str(v) for k, v in files.items()}


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, (np.floating, float)):
        f = float(o)
        return f if math.isfinite(f) else ("inf" if f > 0 else "-inf" if f < 0 else "nan")
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    return o


def run_sweep(cfg: ScenarioConfig, outdir=None, workers=None, spectra=None) -> SweepResult:
    """Full pipeline; ``spectra`` lets callers reuse decompositions already in hand."""
    if spectra is None:
        log.info("sweep %s: %d points", cfg.name, cfg.eps_steps)
        spectra = compute_spectra(cfg, workers)
    sweep, report = analyse(cfg, spectra)
    files = write_outputs(cfg, sweep, report, outdir) if outdir is not None else {}
    return SweepResult(cfg, sweep, report, files)

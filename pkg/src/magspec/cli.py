"""Command-line entry point: ``magspec sweep|verify|flux|spectrum``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import config as cfgmod
from .expr import ExprError
from .geometry import MagneticField, big_gamma_flux, gamma_flux
from .spectral import clusters
from .sweep import fmt, run_sweep, spectrum_at


def _load_config(path):
    if path.startswith("bundled:"):
        return cfgmod.bundled(path.split(":", 1)[1])
    return cfgmod.load(path)


def cmd_sweep(args):
    cfg = _load_config(args.config)
    out = args.output or cfg.output
    res = run_sweep(cfg, out, workers=args.workers)
    for line in res.report.lines():
        print(line)
    print(f"wrote {', '.join(res.files.values())}")
    return 0 if res.report.passed else 2


def cmd_verify(args):
    from .verify import run_verify
    return run_verify("full" if args.full else "quick")


def _read_points(path):
    """Rows of ``x1 x2 y1 y2 z1 z2`` (whitespace or comma separated), '#' comments allowed."""
    rows = []
    with open(path) as fh:
        for ln, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.replace(",", " ").split()
            if len(parts) != 6:
                raise ValueError(f"{path}:{ln}: expected 6 numbers, got {len(parts)}")
            rows.append([float(p) for p in parts])
    return np.array(rows).reshape(-1, 6)


def cmd_flux(args):
    with open(args.field) as fh:
        data = json.load(fh)
    comps = data.get("components", data)
    B = MagneticField(int(data.get("dimension", 2)), comps)
    if B.depends_on_eps:
        if args.eps is None:
            raise ValueError("field depends on eps; pass --eps")
        B = B.bind(args.eps)
    pts = _read_points(args.points)
    x, y, z = pts[:, 0:2], pts[:, 2:4], pts[:, 4:6]
    g = gamma_flux(B, x, y, z, args.quad_order)
    G = big_gamma_flux(B, x, y, z, args.quad_order)
    print("x1,x2,y1,y2,z1,z2,gamma,Gamma")
    for row, a, b in zip(pts, g, G):
        print(",".join(fmt(v) for v in row) + f",{fmt(a)},{fmt(b)}")
    return 0


def cmd_spectrum(args):
    cfg = _load_config(args.config)
    eps = cfg.eps0 if args.eps is None else args.eps
    s = spectrum_at(cfg, eps)
    print("k,eigenvalue_k,trusted")
    count = len(s.values) if args.count is None else min(args.count, len(s.values))
    for k in range(count):
        print(f"{k},{fmt(s.values[k])},{'true' if s.trusted[k] else 'false'}")
    print(f"# trust_ceiling={fmt(s.trust_ceiling)} trusted={int(s.trusted.sum())}/{len(s.values)}",
          file=sys.stderr)
    for c in clusters(s.trusted_values, cfg.cluster_gap)[:6]:
        print(f"# cluster center={c['center']:.6g} count={c['count']}", file=sys.stderr)
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="magspec", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sweep", help="run a parameter sweep and write CSV + JSON reports")
    s.add_argument("config", help="config path, or bundled:<name>")
    s.add_argument("-o", "--output", help="output directory (default: config 'output')")
    s.add_argument("-j", "--workers", type=int, help="parallel sweep points (capped by MAGSPEC_THREADS)")
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify", help="run the invariant suite")
    v.add_argument("--full", action="store_true", help="production grids (minutes)")
    v.set_defaults(func=cmd_verify)

    f = sub.add_parser("flux", help="gamma and Gamma fluxes for point triples")
    f.add_argument("field", help='JSON like {"components": {"12": "1 + 0.3*cos(x1)"}}')
    f.add_argument("points", help="file with rows x1 x2 y1 y2 z1 z2")
    f.add_argument("--eps", type=float)
    f.add_argument("--quad-order", type=int, default=12)
    f.set_defaults(func=cmd_flux)

    sp = sub.add_parser("spectrum", help="eigenvalues at a single eps")
    sp.add_argument("config")
    sp.add_argument("--eps", type=float)
    sp.add_argument("-n", "--count", type=int, help="print only the lowest n")
    sp.set_defaults(func=cmd_spectrum)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (cfgmod.ConfigError, ExprError, ValueError, OSError, RuntimeError) as exc:
        print(f"magspec: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

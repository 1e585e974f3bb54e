import json

import pytest

from magspec import cli, config, verify
from magspec.config import ConfigError, from_dict
from magspec.geometry import MagneticField
from magspec.sweep import run_sweep

BASE = {
    "dimension": 1,
    "grid": {"L": 6.0, "N": 64},
    "symbol": {"expr": "xi1^2 + x1^2 + eps*x1", "order": 2, "kind": "polynomial"},
    "sweep": {"eps_min": -0.1, "eps_max": 0.1, "eps_steps": 3, "eps0": 0.0},
    "probes": {"z": [[0, 1]], "K": [[1.5, 2.5]], "O": [[0.8, 1.2]]},
}


def cfg_with(**sections):
    d = json.loads(json.dumps(BASE))
    for k, v in sections.items():
        if isinstance(v, dict) and isinstance(d.get(k), dict):
            d[k].update(v)
        else:
            d[k] = v
    return d


@pytest.mark.parametrize("patch, path", [
    ({"grid": {"N": 63}}, "grid.N"),
    ({"dimension": 3}, "dimension"),
    ({"sweep": {"eps0": 0.5}}, "sweep.eps0"),
    ({"sweep": {"eps_steps": 1}}, "sweep.eps_steps"),
    ({"symbol": {"expr": "xi1^2 + y7"}}, "symbol.expr"),
    ({"field": {"components": {"12": "1"}}}, "field.components.12"),
    ({"probes": {"K": [[2.0, 1.0]]}}, "probes.K[0]"),
    ({"probes": {"z": ["i"]}}, "probes.z[0]"),
    ({"trust": {"edge_margin": 6.0}}, "trust.edge_margin"),
    ({"colour": "red"}, "colour"),
])
def test_config_errors_carry_paths(patch, path):
    with pytest.raises(ConfigError) as err:
        from_dict(cfg_with(**patch))
    assert err.value.path == path


def test_config_roundtrip():
    for cfg in (from_dict(BASE), config.bundled("landau"), config.bundled("harmonic_shift")):
        assert from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg


def test_eps0_lands_on_the_grid():
    cfg = from_dict(cfg_with(sweep={"eps_min": 0.0, "eps_max": 1.0, "eps_steps": 4, "eps0": 0.5}))
    assert 0.5 in cfg.eps_values and len(cfg.eps_values) == 5


def test_width_zero_sweep(tmp_path):
    cfg = from_dict(cfg_with(sweep={"eps_min": 0.0, "eps_max": 0.0, "eps_steps": 1, "eps0": 0.0}))
    res = run_sweep(cfg, tmp_path)
    assert res.report.passed and all(g.passed for g in res.report.gates)
    mod = res.report.moduli
    assert mod["hausdorff_lowest"]["constant"] == 0.0
    assert all(v == 0.0 for v in mod["resolvent_lipschitz"].values())


def test_outputs_deterministic(tmp_path):
    cfg = from_dict(BASE)
    a = run_sweep(cfg, tmp_path / "a", workers=1)
    b = run_sweep(cfg, tmp_path / "b", workers=3)
    for name in ("spectra.csv", "resolvent.csv", "report.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    head = (tmp_path / "a" / "spectra.csv").read_text().splitlines()
    assert head[0] == "eps,k,eigenvalue_k,trusted"
    assert head[1].split(",")[3] in ("true", "false")
    assert (tmp_path / "a" / "resolvent.csv").read_text().startswith("eps,z_re,z_im,resolvent_norm\n")
    report = json.loads((tmp_path / "a" / "report.json").read_text())
    assert from_dict(report["config"]) == cfg
    assert a.report.to_dict()["passed"] == b.report.to_dict()["passed"]


def test_harmonic_bundled_sweep(tmp_path):
    res = run_sweep(config.bundled("harmonic_shift"), tmp_path)
    band = res.report.bands
    assert abs(band["slope_at_eps0"]) <= 0.05
    assert res.report.passed


def test_cli_sweep_and_spectrum(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(BASE))
    assert cli.main(["sweep", str(p), "-o", str(tmp_path / "out")]) == 0
    out = capsys.readouterr().out
    assert "no violation at resolution" in out and "scope: discretized family only" in out
    assert cli.main(["spectrum", str(p), "--eps", "0", "-n", "3"]) == 0
    rows = capsys.readouterr().out.splitlines()
    assert rows[0] == "k,eigenvalue_k,trusted" and len(rows) == 4
    assert float(rows[1].split(",")[1]) == pytest.approx(1.0, rel=0.02)


def test_cli_reports_config_errors(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(cfg_with(grid={"N": 7})))
    assert cli.main(["sweep", str(p)]) == 1
    assert "grid.N" in capsys.readouterr().err


def test_cli_flux(tmp_path, capsys):
    f = tmp_path / "field.json"
    f.write_text(json.dumps({"components": {"12": "eps"}}))
    pts = tmp_path / "pts.txt"
    pts.write_text("# x y z\n0.7 -1.3 1 0 0 1\n0, 0, 0, 0, 1, 1\n")
    assert cli.main(["flux", str(f), str(pts), "--eps", "2"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "x1,x2,y1,y2,z1,z2,gamma,Gamma"
    first = [float(v) for v in lines[1].split(",")]
    assert first[6] == pytest.approx(1.0) and first[7] == pytest.approx(4.0)
    assert [float(v) for v in lines[2].split(",")][6:] == [0.0, 0.0]
    assert cli.main(["flux", str(f), str(pts)]) == 1


def test_verify_quick_passes():
    assert cli.main(["verify"]) == 0


def test_verify_catches_mirror_mutation(monkeypatch):
    monkeypatch.setattr(MagneticField, "_mirror", staticmethod(lambda v: v))
    ok, detail = verify.check_cocycle_identity()
    assert not ok
    lines = []
    assert verify.run_verify("quick", out=lines.append) == 1
    assert any("cocycle" in ln and "FAIL" in ln for ln in lines)

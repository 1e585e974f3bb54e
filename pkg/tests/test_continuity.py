import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from magspec.continuity import (
    ContinuityReport,
    ParamSweep,
    band_edge_track,
    hausdorff_window,
    inner_check,
    lipschitz_constant,
    outer_check,
    semicontinuity_diagnostic,
)
from magspec.spectral import spectrum
from magspec.quantize import OperatorMatrix

EPS = np.round(np.linspace(-1, 1, 41), 12)


def synthetic(fn, eps=EPS, z=()):
    return ParamSweep.from_values(eps, [fn(e) for e in eps], z)


def test_outer_synthetic():
    sw = synthetic(lambda e: [e, 2 + e])
    v = outer_check(sw, 0.0, [[0.5, 1.5]], eta=0.5)
    assert v.passed and v.eta_max == pytest.approx(0.5)
    assert not outer_check(sw, 0.0, [[0.5, 1.5]], eta=0.6).passed
    assert outer_check(sw, 0.0, [[0.5, 1.5]]).passed
    assert outer_check(sw, 0.0, []).passed
    pre = outer_check(sw, 0.0, [[-0.1, 0.1]])
    assert pre.status == "precondition" and not pre.passed


def test_inner_synthetic():
    sw = synthetic(lambda e: [e])
    v = inner_check(sw, 0.0, [(-0.1, 0.1)], eta=0.1)
    assert v.passed and v.eta_max == pytest.approx(0.1)
    assert not inner_check(sw, 0.0, [(-0.1, 0.1)], eta=0.2).passed
    assert inner_check(sw, 0.0, [(0.5, 0.7)]).status == "precondition"


def test_verdict_wording():
    v = outer_check(synthetic(lambda e: [e, 2 + e]), 0.0, [[0.5, 1.5]])
    assert v.summary() == "outer: no violation at resolution 0.05"
    assert "continuous" not in v.summary()


def test_sweep_validation():
    with pytest.raises(ValueError):
        ParamSweep.from_values([0.0, 0.0], [[1], [1]])
    with pytest.raises(ValueError):
        synthetic(lambda e: [e]).index_of(0.01)


def test_hausdorff_examples():
    assert hausdorff_window([1, 3], [1.1, 2.9], (0, 4)) == pytest.approx(0.1)
    assert hausdorff_window([1, 3], [1, 3]) == 0.0
    assert hausdorff_window([1], [], (0, 4)) == math.inf
    assert hausdorff_window([5], [6], (0, 4)) == 0.0


finite_sets = st.lists(st.floats(-10, 10, allow_nan=False), min_size=1, max_size=8)


@settings(max_examples=200, deadline=None)
@given(finite_sets, finite_sets, finite_sets)
def test_hausdorff_metric_axioms(a, b, c):
    ab = hausdorff_window(a, b)
    assert ab == hausdorff_window(b, a)
    assert hausdorff_window(a, c) <= ab + hausdorff_window(b, c) + 1e-12


def test_eta_monotone_under_refinement():
    fn = lambda e: [0.0, 1.0 + 2 * e ** 2] if e < 0.37 else [0.0, 1.0]
    coarse = np.round(np.linspace(-1, 1, 11), 12)
    fine = np.round(np.linspace(-1, 1, 41), 12)
    K = [[0.5, 1.3]]
    fn2 = lambda e: fn(e) + ([1.0] if abs(e) > 0.42 else [])
    for f in (fn, fn2):
        ec = outer_check(synthetic(f, coarse), 0.0, K).eta_max
        ef = outer_check(synthetic(f, fine), 0.0, K).eta_max
        assert ef <= ec + (coarse[1] - coarse[0])


def test_weyl_inequality_random_families():
    rng = np.random.default_rng(12)
    eps = np.round(np.linspace(-0.5, 0.5, 11), 12)
    for _ in range(5):
        a = rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16))
        b = rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16))
        A, B = (a + a.conj().T) / 2, (b + b.conj().T) / 2
        fam = {e: A + e * B for e in eps}
        ref = spectrum(OperatorMatrix.from_array(fam[0.0]), trust_fraction=math.inf)
        for e in eps:
            s = spectrum(OperatorMatrix.from_array(fam[e]), trust_fraction=math.inf)
            assert hausdorff_window(s, ref) <= np.linalg.norm(fam[e] - fam[0.0], 2) + 1e-10


def test_diag_family_diagnostic():
    sw = synthetic(lambda e: [e], z=[1j])
    np.testing.assert_allclose(sw.resolvent[1j], 1 / np.sqrt(1 + EPS ** 2), rtol=1e-12)
    gates = [inner_check(sw, 0.0, [(-0.1, 0.1)])]
    rep = semicontinuity_diagnostic(sw, 0.0, [1j], gates)
    assert rep.continuous and rep.gates_pass and not rep.inconsistency
    assert rep.probes[0]["lipschitz"] < 1.0


def test_constant_family_diagnostic_and_band():
    sw = synthetic(lambda e: [1.0, 3.0], z=[1j, 2 + 0.5j])
    rep = semicontinuity_diagnostic(sw, 0.0, [1j, 2 + 0.5j], [outer_check(sw, 0.0, [[1.5, 2.5]])])
    assert rep.continuous and rep.gates_pass
    assert all(p["lipschitz"] == 0.0 for p in rep.probes)
    track = band_edge_track(sw, 0)
    assert track.max_slope <= 1e-12


def test_jump_is_flagged():
    sw = synthetic(lambda e: [1.0] + ([0.0] if e >= 0.3 else []), z=[0.1j])
    rep = semicontinuity_diagnostic(sw, 0.0, [0.1j])
    assert not rep.continuous and rep.probes[0]["jumps"] == [0.3]


def test_inconsistency_is_flagged():
    # an eigenvalue creeping into K far from every probe: norms stay smooth, the gate fails
    sw = synthetic(lambda e: [0.0, 5.0 - 4 * abs(e)], z=[0.1j])
    gate = outer_check(sw, 0.0, [[1.2, 2.0]], eta=1.0)
    rep = semicontinuity_diagnostic(sw, 0.0, [0.1j], [gate])
    assert not gate.passed and rep.continuous and rep.inconsistency
    report = ContinuityReport([gate], diagnostic=rep)
    assert not report.passed and report.offending and report.lines()[-1] == "scope: discretized family only"


def test_band_track_quadratic():
    track = band_edge_track(synthetic(lambda e: [1 - e ** 2 / 4, 3.0]), 0)
    assert abs(track.slope_at(0.0)) <= 1e-12
    assert track.max_slope == pytest.approx(0.5, rel=1e-9)


def test_band_track_linear():
    assert band_edge_track(synthetic(lambda e: [1 + e]), 0).slope_at(0.3) == pytest.approx(1.0)


def test_lipschitz_constant():
    eps = np.array([-1.0, 0.0, 2.0])
    assert lipschitz_constant(eps, [3.0, 1.0, 2.0], 0.0) == 2.0
    assert lipschitz_constant([0.0], [1.0], 0.0) == 0.0

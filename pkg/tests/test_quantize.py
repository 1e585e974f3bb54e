import math

import numpy as np
import pytest

from magspec.geometry import ExprPotential, GaugeShifted, MagneticField, poincare_gauge
from magspec.quantize import (
    OperatorMatrix,
    build_kernel,
    build_peierls,
    dump_matrix,
    gauge_transform,
    hermitian_defect,
    load_matrix,
)
from magspec.spectral import eigenvalues
from magspec.symbols import GridSpec, SymbolFn


def test_gaussian_kernel_diagonal():
    g = GridSpec(1, 8.0, 64)
    K = build_kernel(SymbolFn("exp(-xi1^2/2)", 1), None, g)
    # K_ii = delta (2 pi)^-1 * sqrt(2 pi)
    assert K.entries[10, 10].real / g.delta * 2 * math.pi == pytest.approx(math.sqrt(2 * math.pi), rel=1e-9)
    assert K.entries[10, 10].real * 2 * math.pi / g.delta / (2 * math.pi) == pytest.approx(0.398942, abs=1e-6)


def test_real_symbol_is_hermitian():
    g = GridSpec(2, 4.0, 8)
    A = poincare_gauge(MagneticField(2, {"12": "1 + 0.3*cos(x1)"}))
    K = build_kernel(SymbolFn("exp(-x1^2 - xi1^2 - xi2^2)*(1 + x2)", 2), A, g)
    assert K.hermitian and hermitian_defect(K.entries) <= 1e-12


def test_zero_symbol():
    g = GridSpec(1, 4.0, 16)
    assert not np.any(build_kernel(SymbolFn("0", 1), None, g).entries)


def test_kernel_rejects_polynomial_and_unbound_eps():
    g = GridSpec(1, 4.0, 16)
    with pytest.raises(ValueError):
        build_kernel(SymbolFn("xi1^2", 1, 2, "polynomial"), None, g)
    with pytest.raises(ValueError):
        build_kernel(SymbolFn("eps*exp(-xi1^2)", 1), None, g)


def test_kernel_matches_direct_quadrature():
    # Op(f) u at a few points vs the double sum with the symbol integrated over the dual grid
    g = GridSpec(1, 6.0, 48)
    f = SymbolFn("exp(-x1^2/4 - xi1^2)", 1)
    K = build_kernel(f, None, g).entries
    u = np.exp(-g.points[:, 0] ** 2)
    rng = np.random.default_rng(0)
    xs = g.points[:, 0]
    xi = g.dual_points[:, 0]
    for i in rng.choice(np.arange(10, 38), 5, replace=False):
        total = 0.0
        for j in range(g.size):
            if abs(j - i) >= g.N // 2:
                continue
            mid = 0.5 * (xs[i] + xs[j])
            integrand = np.exp(1j * (xs[i] - xs[j]) * xi) * np.exp(-mid ** 2 / 4 - xi ** 2)
            total += g.delta * g.dxi / (2 * math.pi) * integrand.sum() * u[j]
        assert abs((K @ u)[i] - total) <= 1e-6


def test_peierls_multiplication_operator():
    g = GridSpec(1, 3.0, 12)
    H = build_peierls(SymbolFn("x1^2", 1, 0, "polynomial"), None, g)
    np.testing.assert_allclose(H.entries, np.diag(g.points[:, 0] ** 2))


def test_dirichlet_laplacian():
    g = GridSpec(1, 10.0, 256)
    H = build_peierls(SymbolFn("xi1^2", 1, 2, "polynomial"), None, g)
    assert eigenvalues(H.entries)[0] == pytest.approx((math.pi / 20) ** 2, rel=0.01)


def test_oscillator():
    g = GridSpec(1, 10.0, 256)
    H = build_peierls(SymbolFn("xi1^2 + x1^2", 1, 2, "polynomial"), None, g)
    np.testing.assert_allclose(eigenvalues(H.entries)[:3], [1, 3, 5], rtol=0.01)


def test_zero_field_peierls_is_plain_finite_difference():
    g = GridSpec(2, 2.0, 6)
    h = SymbolFn("xi1^2 + xi2^2", 2, 2, "polynomial")
    a = build_peierls(h, poincare_gauge(MagneticField.zero()), g).entries
    b = build_peierls(h, None, g).entries
    assert np.array_equal(a, b)


def test_mixed_terms_rejected():
    g = GridSpec(2, 2.0, 6)
    with pytest.raises(ValueError):
        build_peierls(SymbolFn("xi1*xi2", 2, 2, "polynomial"), None, g)


def test_gauge_transform_identity_and_spectrum():
    g = GridSpec(2, 3.0, 8)
    h = SymbolFn("xi1^2 + xi2^2 + 0.2*x1*xi2", 2, 2, "polynomial")
    H = build_peierls(h, poincare_gauge(MagneticField.constant(0.8)), g)
    assert np.array_equal(gauge_transform(H, "0").entries, H.entries)
    U = gauge_transform(H, "sin(x1) + x2^2")
    np.testing.assert_allclose(eigenvalues(U.entries), eigenvalues(H.entries), atol=1e-10)


@pytest.mark.parametrize("chi", ["x1*x2", "sin(x1)"])
@pytest.mark.parametrize("field", ["1", "1 + 0.3*cos(x1)"])
def test_gauge_covariance_entrywise(chi, field):
    g = GridSpec(2, 3.0, 10)
    h = SymbolFn("xi1^2 + xi2^2 + 0.5*xi1", 2, 2, "polynomial")
    A = poincare_gauge(MagneticField(2, {"12": field}))
    shifted = build_peierls(h, GaugeShifted(A, chi), g).entries
    conj = gauge_transform(build_peierls(h, A, g), chi).entries
    np.testing.assert_allclose(shifted, conj, atol=1e-10)
    np.testing.assert_allclose(eigenvalues(shifted), eigenvalues(conj), atol=1e-10)


def test_explicit_potential_matches_symmetric_gauge():
    g = GridSpec(2, 3.0, 8)
    h = SymbolFn("xi1^2 + xi2^2", 2, 2, "polynomial")
    a = build_peierls(h, ExprPotential(["-x2/2", "x1/2"]), g).entries
    b = build_peierls(h, poincare_gauge(MagneticField.constant(1.0)), g).entries
    np.testing.assert_allclose(a, b, atol=1e-13)


def test_peierls_metadata():
    g = GridSpec(2, 3.0, 8)
    H = build_peierls(SymbolFn("xi1^2 + xi2^2", 2, 2, "polynomial"), None, g)
    assert H.kinetic_cutoff == pytest.approx(8 / g.delta ** 2)
    assert H.bandwidth == 8 and H.kind == "peierls"


def test_dump_roundtrip(tmp_path):
    g = GridSpec(1, 2.0, 6)
    rng = np.random.default_rng(3)
    K = OperatorMatrix.from_array(rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6)), g)
    p = tmp_path / "k.bin"
    dump_matrix(K, p)
    assert p.stat().st_size == 16 + 36 * 16
    back = load_matrix(p)
    assert np.array_equal(back.entries, K.entries) and back.grid == g

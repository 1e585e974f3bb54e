import numpy as np
import pytest

from magspec.expr import parse
from magspec.geometry import (
    ExprPotential,
    GaugeShifted,
    MagneticField,
    big_gamma_flux,
    cocycle_identity_residual,
    cocycle_omega,
    gamma_flux,
    phase_growth_exponent,
    phase_Omega,
    poincare_gauge,
    segment_circulation,
    triangle_flux,
)

SMOOTH = MagneticField(2, {"12": "1 + 0.3*cos(x1)"})


@pytest.fixture
def rng():
    return np.random.default_rng(11)


def test_zero_potential_circulation():
    A = ExprPotential.zero(2)
    assert segment_circulation(A, [0.3, 1.0], [2.0, -1.0]) == 0.0


def test_symmetric_gauge_segment():
    A = ExprPotential(["-x2/2", "x1/2"])
    assert segment_circulation(A, np.array([1.0, 0.0]), np.array([1.0, 1.0])) == pytest.approx(0.5, abs=1e-14)


def test_gradient_circulation(rng):
    A = GaugeShifted(ExprPotential.zero(2), "x1*x2")
    # bypass the exact override to exercise the quadrature on grad(chi)
    x, y = rng.uniform(-2, 2, (2, 20, 2))
    quad = A.__class__.__mro__[1].circulation(A, x, y)
    np.testing.assert_allclose(quad, y[:, 0] * y[:, 1] - x[:, 0] * x[:, 1], atol=1e-10)


def test_triangle_flux_examples():
    B1 = MagneticField.constant(1.0)
    assert triangle_flux(MagneticField.zero(), [0, 0], [1, 0], [0, 1]) == 0.0
    assert triangle_flux(B1, np.zeros(2), np.array([1.0, 0]), np.array([0, 1.0])) == pytest.approx(0.5, abs=1e-15)
    assert abs(triangle_flux(SMOOTH, np.zeros(2), np.array([1.0, 1.0]), np.array([2.0, 2.0]))) < 1e-12


def test_gamma_examples():
    B1 = MagneticField.constant(1.0)
    y, z = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    q = np.array([0.7, -1.3])
    assert gamma_flux(B1, q, y, z) == pytest.approx(0.5)
    assert big_gamma_flux(B1, q, y, z) == pytest.approx(2.0)
    assert gamma_flux(SMOOTH, q, y, np.zeros(2)) == 0.0
    assert big_gamma_flux(SMOOTH, q, y, np.zeros(2)) == 0.0
    assert cocycle_omega(B1, q, y, z) == pytest.approx(np.exp(-0.5j))
    assert phase_Omega(B1, q, y, z) == pytest.approx(np.exp(-2j))
    assert cocycle_omega(MagneticField.zero(), q, y, z) == 1.0
    assert phase_Omega(SMOOTH, q, np.zeros(2), z) == 1.0


def test_unit_modulus(rng):
    q, y, z = rng.uniform(-3, 3, (3, 50, 2))
    np.testing.assert_allclose(np.abs(cocycle_omega(SMOOTH, q, y, z)), 1.0, atol=1e-15)


def test_poincare_gauge_constant_and_zero():
    A = poincare_gauge(MagneticField.constant(2.0))
    pts = np.array([[1.0, 2.0], [-0.5, 0.3]])
    np.testing.assert_allclose(A.values(pts), np.stack([-pts[:, 1], pts[:, 0]], axis=-1), atol=1e-15)
    assert np.all(poincare_gauge(MagneticField.zero()).values(pts) == 0)


def test_poincare_gauge_curl():
    B = MagneticField(2, {"12": "cos(x1)"})
    A = poincare_gauge(B)
    g = np.linspace(-1, 1, 5)
    pts = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1).reshape(-1, 2)
    np.testing.assert_allclose(A.curl(pts), np.cos(pts[:, 0]), atol=1e-6)


def test_orientation_antisymmetry_and_median_split(rng):
    p0, p1, p2 = rng.uniform(-2, 2, (3, 40, 2))
    np.testing.assert_allclose(triangle_flux(SMOOTH, p0, p1, p2), -triangle_flux(SMOOTH, p0, p2, p1), atol=1e-12)
    m = 0.5 * (p1 + p2)
    split = triangle_flux(SMOOTH, p0, p1, m) + triangle_flux(SMOOTH, p0, m, p2)
    np.testing.assert_allclose(triangle_flux(SMOOTH, p0, p1, p2), split, atol=1e-10)


def test_segment_circulation_exact_antisymmetry(rng):
    A = poincare_gauge(SMOOTH)
    x, y = rng.uniform(-2, 2, (2, 30, 2))
    assert np.all(segment_circulation(A, x, y) == -segment_circulation(A, y, x))


def test_corner_convention(rng):
    x, y, z = rng.uniform(-2, 2, (3, 50, 2))
    np.testing.assert_allclose(big_gamma_flux(SMOOTH, x, y, z),
                               triangle_flux(SMOOTH, x - y - z, x + y - z, x - y + z), atol=1e-12)


@pytest.mark.parametrize("field, tol", [
    (MagneticField.zero(), 0.0),
    (MagneticField.constant(1.3), 1e-12),
    (SMOOTH, 1e-8),
    (MagneticField(2, {"12": "exp(-x1^2 - x2^2) + 0.2*sin(x2)"}), 1e-8),
])
def test_cocycle_identity(field, tol, rng):
    q, x, y, z = rng.uniform(-2, 2, (4, 100, 2))
    assert np.max(cocycle_identity_residual(field, q, x, y, z)) <= tol


def test_mirror_sign_mutation_breaks_cocycle(monkeypatch, rng):
    # the documented sabotage: deriving B_21 = +B_12 instead of -B_12
    monkeypatch.setattr(MagneticField, "_mirror", staticmethod(lambda v: v))
    q, x, y, z = rng.uniform(-2, 2, (4, 100, 2))
    assert np.max(cocycle_identity_residual(SMOOTH, q, x, y, z)) > 1e-3


def test_field_matrix_antisymmetric():
    m = SMOOTH.matrix(np.array([[0.2, 0.1]]))[0]
    assert m[0, 1] == -m[1, 0] and m[0, 0] == 0.0


def test_field_validation():
    with pytest.raises(ValueError):
        MagneticField(2, {"21": "1"})
    with pytest.raises(ValueError):
        MagneticField(3)
    fam = MagneticField(2, {"12": "eps*x1"})
    assert fam.depends_on_eps and not fam.bind(2.0).depends_on_eps
    assert fam.bind(0.0).components[(1, 2)] is not None


def test_growth_exponent_constant_field():
    slope, sups = phase_growth_exponent(MagneticField.constant(1.0), radii=(1.0, 2.0, 4.0))
    # |d_y Omega| = 2b|z| for a constant field, so the sup grows linearly with R
    assert slope == pytest.approx(1.0, abs=0.15)
    assert np.all(np.diff(sups) > 0)


def test_pretty_field_parse():
    assert parse(SMOOTH.to_dict()["12"]) == SMOOTH.components[(1, 2)]

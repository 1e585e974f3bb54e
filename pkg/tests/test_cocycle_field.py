import numpy as np
import pytest

from magspec.cocycle_field import (
    CocycleField,
    evaluation_consistency,
    field_continuity_check,
    glued_diamond,
    joint_continuity,
)
from magspec.geometry import MagneticField
from magspec.kernels import ExprKernel
from magspec.symbols import GridSpec

FAMILY = MagneticField(2, {"12": "eps*(1 + 0.3*cos(x1))"})
EPS = [0.0, 0.25, 0.5, 0.75, 1.0]


@pytest.fixture
def rng():
    return np.random.default_rng(4)


def test_normalized(rng):
    cf = CocycleField(FAMILY)
    q, y = rng.uniform(-2, 2, (2, 30, 2))
    zero = np.zeros_like(y)
    for e in (0.3, 1.7):
        assert np.all(cf.omega(e, q, y, zero) == 1.0)
        assert np.all(cf.omega(e, q, zero, y) == 1.0)


def test_eps_independent_field_has_zero_deviation():
    cf = CocycleField(MagneticField(2, {"12": "1 + 0.3*cos(x1)"}))
    out = field_continuity_check(cf, [1.0, 0.2], [-0.3, 0.8], 0.0, EPS)
    assert all(d == 0.0 for _, d in out)


def test_constant_family_closed_form():
    b = 1.3
    cf = CocycleField(MagneticField(2, {"12": f"eps*{b}"}))
    y, z = np.array([0.7, -0.2]), np.array([0.4, 1.1])
    g1 = 0.5 * b * (y[0] * z[1] - y[1] * z[0])  # flux at eps = 1
    eps0 = 0.4
    for e, d in field_continuity_check(cf, y, z, eps0, EPS):
        exact = abs(np.exp(-1j * g1 * e) - np.exp(-1j * g1 * eps0))
        assert d == pytest.approx(exact, abs=1e-12)
        assert d <= abs(g1 * (e - eps0)) + 1e-15


def test_deviation_bounded_by_flux_difference(rng):
    cf = CocycleField(FAMILY, probes=5)
    pts = cf.probe_points()
    for _ in range(5):
        y, z = rng.uniform(-1, 1, (2, 2))
        Y, Z = np.broadcast_to(y, pts.shape), np.broadcast_to(z, pts.shape)
        dg = np.max(np.abs(cf.gamma(0.8, pts, Y, Z) - cf.gamma(0.2, pts, Y, Z)))
        assert field_continuity_check(cf, y, z, 0.2, [0.8])[0][1] <= dg + 1e-14


def test_cocycle_identity_uniform_in_eps(rng):
    cf = CocycleField(FAMILY)
    q, x, y, z = rng.uniform(-2, 2, (4, 20, 2))
    for e in (0.5, 1.0, 1.5):
        assert np.max(cf.identity_residual(e, q, x, y, z)) <= 1e-8


def test_joint_continuity_linear(rng):
    cf = CocycleField(FAMILY, probes=5)
    pairs = [tuple(rng.uniform(-1, 1, (2, 2))) for _ in range(6)]
    small = [0.5 + d for d in (-0.1, -0.01, 0.0, 0.01, 0.1)]
    jm = joint_continuity(cf, pairs, 0.5, small)
    assert 0 < jm.constant < np.inf
    for e, d in jm.deviations:
        assert d <= jm.constant * abs(e - 0.5) + 1e-15


G = GridSpec(2, 4.0, 8)


def test_evaluation_contractive():
    phi = ExprKernel("(1 + eps)*exp(-x1^2 - x2^2 - y1^2 - y2^2)", G)
    rep = evaluation_consistency(phi, 0.5, G, EPS)
    assert rep.ratio == pytest.approx(0.75, rel=1e-12)
    assert rep.gap <= 0
    const = evaluation_consistency(ExprKernel("exp(-x1^2 - y1^2 - y2^2)", G), 0.5, G, EPS)
    assert const.gap == 0.0


def test_homomorphism_constant_family():
    phi = ExprKernel("exp(-x1^2 - x2^2 - y1^2 - y2^2)", G)
    psi = ExprKernel("(1 + eps)*exp(-(x1 - 0.3)^2 - x2^2 - 0.5*y1^2 - y2^2)", G)
    cf = CocycleField(MagneticField(2, {"12": "0.8*eps"}))
    for e in (0.0, 0.5, 1.0):
        rep = evaluation_consistency(phi, e, G, EPS, psi_family=psi, field=cf)
        assert rep.homomorphism_residual <= 1e-6


def test_glued_product_sees_the_field():
    phi = ExprKernel("exp(-x1^2 - x2^2 - y1^2 - y2^2)", G)
    psi = ExprKernel("exp(-(x1 - 0.3)^2 - x2^2 - 0.5*y1^2 - y2^2)", G)
    cf = CocycleField(MagneticField(2, {"12": "eps"}))
    out = glued_diamond(phi, psi, cf, G, [0.0, 1.0])
    assert out.shape == (2, G.size, G.size)
    assert np.max(np.abs(out[0] - out[1])) > 1e-4

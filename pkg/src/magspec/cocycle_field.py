"""The field of cocycles eps -> omega^eps and the evaluation maps at fixed eps."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import DEFAULT_QUAD, MagneticField, cocycle_identity_residual, gamma_flux
from .kernels import KernelElement, as_kernel
from .moyal import diamond_values, l1_norm
from .symbols import GridSpec


class CocycleField:
    """omega~(y, z)(eps, q) = exp(-i gamma^{B^eps}(q, y, z)) on a probe box.

    ``B`` may contain ``eps``; ``box`` is ``(lo, hi)`` per axis, sampled with
    ``probes`` points per axis for the sup over base points.
    """

    def __init__(self, B: MagneticField, box=None, probes=9, quad_order=DEFAULT_QUAD):
        self.B = B
        self.n = B.n
        if box is None:
            box = [(-1.0, 1.0)] * self.n
        self.box = [tuple(map(float, b)) for b in box]
        self.probes = int(probes)
        self.quad_order = quad_order

    def probe_points(self):
        axes = [np.linspace(lo, hi, self.probes) for lo, hi in self.box]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=-1)

    def field_at(self, eps):
        return self.B.bind(eps) if self.B.depends_on_eps else self.B

    def gamma(self, eps, q, y, z):
        return gamma_flux(self.field_at(eps), q, y, z, self.quad_order)

    def omega(self, eps, q, y, z):
        """Cocycle values; exactly 1 when y = 0 or z = 0."""
        q, y, z = (np.asarray(a, dtype=float) for a in (q, y, z))
        out = np.exp(-1j * self.gamma(eps, q, y, z))
        trivial = np.all(y == 0, axis=-1) | np.all(z == 0, axis=-1)
        return np.where(trivial, 1.0 + 0j, out)

    def omega_family(self, eps_values, q, y, z):
        """Stack over eps along a new leading axis."""
        return np.stack([self.omega(e, q, y, z) for e in eps_values])

    def identity_residual(self, eps, q, x, y, z):
        return cocycle_identity_residual(self.field_at(eps), q, x, y, z, self.quad_order)


def field_continuity_check(cf: CocycleField, y, z, eps0, eps_list):
    """sup over probe points of |omega^eps(., y, z) - omega^eps0(., y, z)| for each eps."""
    pts = cf.probe_points()
    y = np.broadcast_to(np.asarray(y, dtype=float), pts.shape)
    z = np.broadcast_to(np.asarray(z, dtype=float), pts.shape)
    ref = cf.omega(eps0, pts, y, z)
    return [(float(e), float(np.max(np.abs(cf.omega(e, pts, y, z) - ref)))) for e in eps_list]


@dataclass
class JointModulus:
    deviations: list          # (eps, sup over probes and pairs)
    constant: float           # fitted C with deviation <= C |eps - eps0|


def joint_continuity(cf: CocycleField, pairs, eps0, eps_list):
    """Sup deviation over a compact set of (y, z) pairs plus the fitted Lipschitz constant."""
    devs = []
    for e in eps_list:
        worst = max(field_continuity_check(cf, y, z, eps0, [e])[0][1] for y, z in pairs)
        devs.append((float(e), worst))
    ratios = [d / abs(e - eps0) for e, d in devs if e != eps0]
    return JointModulus(devs, max(ratios, default=0.0))


# --- glued products and evaluation --------------------------------------------

def glued_diamond(phi_family: KernelElement, psi_family: KernelElement, cf: CocycleField,
                  grid: GridSpec, eps_values):
    """Family product on grid points, summed directly with the field omega~.

    Returns an array of shape ``(len(eps_values), grid.size, grid.size)``.
    """
    d = grid.delta
    W = grid.size
    k = grid.offsets
    valid = grid.window_valid
    pref = (d / (2 * math.pi)) ** grid.n
    zi, vi = np.nonzero(valid[:, None] & valid[None, :])
    ek = k[vi] - k[zi]
    ei = grid.offset_index(ek)
    keep = ei >= 0
    zi, vi, ei, ek = zi[keep], vi[keep], ei[keep], ek[keep]
    zk = k[zi]
    vk = k[vi]
    out = np.zeros((len(eps_values), grid.size, W), dtype=complex)
    pts = grid.points
    for a, eps in enumerate(eps_values):
        phi = phi_family.at(eps)
        psi = psi_family.at(eps)
        for m, q in enumerate(pts):
            fv = phi.values(q[None, :] - 0.5 * d * ek)
            gv = psi.values(q[None, :] + 0.5 * d * zk)
            prod = fv[np.arange(len(zi)), zi] * gv[np.arange(len(zi)), ei]
            om = cf.omega(eps, q[None, :] - 0.5 * d * vk, zk * d, ek * d)
            np.add.at(out[a, m], vi, prod * om)
    return out * pref


@dataclass
class EvaluationReport:
    eps: float
    norm_at_eps: float
    family_norm: float
    homomorphism_residual: float | None = None

    @property
    def gap(self):
        return self.norm_at_eps - self.family_norm

    @property
    def ratio(self):
        return self.norm_at_eps / self.family_norm if self.family_norm else 0.0

    def to_dict(self):
        return {"eps": self.eps, "norm_at_eps": self.norm_at_eps, "family_norm": self.family_norm,
                "gap": self.gap, "ratio": self.ratio, "homomorphism_residual": self.homomorphism_residual}


def evaluation_consistency(phi_family, eps, grid: GridSpec, eps_list, psi_family=None,
                           field: CocycleField | None = None) -> EvaluationReport:
    """Contractivity of evaluation at ``eps``, optionally with the homomorphism residual.

    The family norm is the L1 norm with the sup also taken over ``eps_list``
    (which should contain ``eps``).  With ``psi_family`` and ``field`` given,
    the glued product evaluated at ``eps`` is compared with the product of
    the evaluations under ``B^eps``; the residual is a max-abs difference.
    """
    phi_family = as_kernel(phi_family, grid)
    eps = float(eps)
    at = l1_norm(phi_family.at(eps), grid)
    fam = l1_norm(phi_family, grid, eps_list=list(eps_list))
    rep = EvaluationReport(eps, at, fam)
    if psi_family is not None and field is not None:
        psi_family = as_kernel(psi_family, grid)
        glued = glued_diamond(phi_family, psi_family, field, grid, [eps])[0]
        direct = diamond_values(phi_family.at(eps), psi_family.at(eps), field.field_at(eps), grid,
                                grid.points, field.quad_order)
        mask = grid.window_valid
        rep.homomorphism_residual = float(np.max(np.abs(glued[:, mask] - direct[:, mask])))
    return rep

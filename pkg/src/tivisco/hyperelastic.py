"""Transversely isotropic compressible hyperelasticity.

The stored energy is the sum of an isotropic compressible neo-Hookean part
and a fiber part built from the invariants ``tr(C)`` and ``a0.C.a0`` (the
latter evaluated as ``a.a`` with ``a = F a0``).  The Cauchy stress of a
mode is

    sigma = mu/J (B - I) + lam (J - 1) I
          + 1/J [ 2 beta (xi2 - 1) B
                  + 2 (alpha + beta (xi1 - 3) + 2 gamma (xi2 - 1)) a(x)a
                  - alpha (B a (x) a + a (x) B a) ]

with ``B = F F^T``, ``xi1 = tr B`` and ``xi2 = a.a``.  The fiber vector is
deliberately *not* normalized: its stretch carries the fiber strain energy.
Parameter arrays broadcast against the leading batch axes of the inputs,
which is how the relaxation spectrum is vectorized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor_math as tm
from .errors import InvalidDeformationError, InvalidMaterialError


@dataclass(frozen=True)
class ElasticConstants:
    """Engineering constants of a unidirectional ply (MPa)."""

    E11: float
    E22: float
    G12: float
    nu21: float

    def scaled(self, m):
        """Constants of a mode carrying the stiffness fraction ``m``."""
        return ElasticConstants(m * self.E11, m * self.E22, m * self.G12, self.nu21)


@dataclass(frozen=True)
class HyperelasticParams:
    lam: np.ndarray | float
    mu: np.ndarray | float
    alpha: np.ndarray | float
    beta: np.ndarray | float
    gamma: np.ndarray | float

    def scaled(self, m):
        """All five moduli are linear in the engineering constants."""
        m = np.asarray(m, dtype=float)
        return HyperelasticParams(*(m * np.asarray(v) for v in
                                    (self.lam, self.mu, self.alpha, self.beta, self.gamma)))


def convert_constants(ec: ElasticConstants) -> HyperelasticParams:
    """Map engineering constants to the five energy moduli.

    Raises
    ------
    InvalidMaterialError
        If a modulus is non-positive or the compliance is not positive definite.
    """
    E11, E22, G12, nu = ec.E11, ec.E22, ec.G12, ec.nu21
    if min(E11, E22, G12) <= 0.0:
        raise InvalidMaterialError("elastic moduli must be positive")
    if not -1.0 < nu:
        raise InvalidMaterialError("nu21 must exceed -1")
    n = E22 / E11
    m = 1.0 - nu - 2.0 * n * nu**2
    if m <= 0.0:
        raise InvalidMaterialError("Poisson ratios give a non positive-definite compliance")
    lam = E22 * (nu + n * nu**2) / (m * (1.0 + nu))
    mu = E22 / (2.0 * (1.0 + nu))
    alpha = mu - G12
    beta = E22 * nu**2 * (1.0 - n) / (4.0 * m * (1.0 + nu))
    gamma = E11 * (1.0 - nu) / (8.0 * m) - (lam + 2.0 * mu) / 8.0 + alpha / 2.0 - beta
    return HyperelasticParams(lam, mu, alpha, beta, gamma)


def _p(x):
    return np.asarray(x)[..., None, None]


def _kinematics(Fe, a):
    J = tm.det(Fe)
    if np.any(~(J > 0.0)):
        raise InvalidDeformationError("elastic Jacobian must be positive")
    B = Fe @ tm.T(Fe)
    Ba = np.einsum("...ij,...j->...i", B, a)
    return J, B, Ba


def cauchy_stress(Fe, a, hp: HyperelasticParams):
    """Cauchy stress for elastic deformation ``Fe`` and current fiber ``a``."""
    Fe = np.asarray(Fe, dtype=float)
    a = np.asarray(a, dtype=float)
    J, B, Ba = _kinematics(Fe, a)
    xi1 = tm.trace(B)
    xi2 = np.sum(a * a, axis=-1)
    A = tm.outer(a, a)
    c = hp.alpha + hp.beta * (xi1 - 3.0) + 2.0 * hp.gamma * (xi2 - 1.0)
    iso = _p(hp.mu / J) * (B - tm.I3) + _p(hp.lam * (J - 1.0)) * tm.I3
    trn = (_p(2.0 * hp.beta * (xi2 - 1.0)) * B + _p(2.0 * c) * A
           - _p(hp.alpha) * (tm.outer(Ba, a) + tm.outer(a, Ba)))
    return iso + trn / _p(J)


def _P4(x):
    return np.asarray(x)[..., None, None, None, None]


def _P3(x):
    return np.asarray(x)[..., None, None, None]


def dstress_dFe(Fe, a, hp: HyperelasticParams):
    """``d sigma_ij / d Fe_kl`` at fixed current fiber ``a``.

    With ``dB_ijkl = d_ik F_jl + F_il d_jk`` every term is a product of two
    second-order tensors in one of the index patterns ``(ik)(jl)``,
    ``(il)(jk)`` or ``(ij)(kl)``; they are grouped to keep the number of
    fourth-order temporaries small.
    """
    Fe = np.asarray(Fe, dtype=float)
    a = np.asarray(a, dtype=float)
    J, B, Ba = _kinematics(Fe, a)
    FinvT = tm.T(tm.inv(Fe))
    xi1 = tm.trace(B)
    xi2 = np.sum(a * a, axis=-1)
    A = tm.outer(a, a)
    I = np.broadcast_to(tm.I3, B.shape)
    c = hp.alpha + hp.beta * (xi1 - 3.0) + 2.0 * hp.gamma * (xi2 - 1.0)
    c1 = _p((hp.mu + 2.0 * hp.beta * (xi2 - 1.0)) / J)
    aJ = _p(hp.alpha / J)
    AF = A @ Fe
    trn = (_p(2.0 * hp.beta * (xi2 - 1.0)) * B + _p(2.0 * c) * A
           - _p(hp.alpha) * (tm.outer(Ba, a) + tm.outer(a, Ba))) / _p(J)
    Z = -_p(hp.mu / J) * (B - tm.I3) + _p(hp.lam * J) * tm.I3 - trn
    out = tm.left_right(I, tm.T(c1 * Fe - aJ * AF))
    out += tm.left_right(-aJ * A, tm.T(Fe))
    out += tm.left_right_t(Fe, c1 * tm.I3 - aJ * A)
    out += tm.left_right_t(-aJ * AF, I)
    out += tm.dyad(Z, FinvT)
    out += tm.dyad(_p(4.0 * hp.beta / J) * A, Fe)
    return out


def dstress_da(Fe, a, hp: HyperelasticParams):
    """``d sigma_ij / d a_m`` at fixed ``Fe``."""
    Fe = np.asarray(Fe, dtype=float)
    a = np.asarray(a, dtype=float)
    J, B, Ba = _kinematics(Fe, a)
    xi1 = tm.trace(B)
    xi2 = np.sum(a * a, axis=-1)
    A = tm.outer(a, a)
    c = hp.alpha + hp.beta * (xi1 - 3.0) + 2.0 * hp.gamma * (xi2 - 1.0)
    I = tm.I3
    # dA_ij/da_m = delta_im a_j + a_i delta_jm
    dA = np.einsum("im,...j->...ijm", I, a) + np.einsum("...i,jm->...ijm", a, I)
    dT = (_P3(4.0 * hp.beta) * B[..., None] * a[..., None, None, :]
          + _P3(2.0 * c) * dA
          + _P3(8.0 * hp.gamma) * A[..., None] * a[..., None, None, :]
          - _P3(hp.alpha) * (np.einsum("...ik,...kjm->...ijm", B, dA)
                             + np.einsum("...ikm,...kj->...ijm", dA, B)))
    return dT / _P3(J)


def stress_derivatives(Fe, a, hp: HyperelasticParams):
    """Both partial derivatives of :func:`cauchy_stress`.

    Returns
    -------
    dS_dF : ndarray (..., 3, 3, 3, 3)
        ``d sigma_ij / d Fe_kl`` at fixed ``a``.
    dS_da : ndarray (..., 3, 3, 3)
        ``d sigma_ij / d a_m`` at fixed ``Fe``.
    """
    return dstress_dFe(Fe, a, hp), dstress_da(Fe, a, hp)


def small_strain_compliance(hp: HyperelasticParams, a0=(1.0, 0.0, 0.0)):
    """Linearized 6x6 compliance at ``F = I`` in Voigt order 11,22,33,23,13,12.

    Engineering shear strains are used, so ``1/S[5,5]`` is a shear modulus.
    """
    a0 = np.asarray(a0, dtype=float)
    dS_dF, dS_da = stress_derivatives(np.eye(3), a0, hp)
    # with a = F a0 the total derivative picks up dS/da_m * a0_l delta_mk
    C = dS_dF + np.einsum("ijk,l->ijkl", dS_da, a0)
    C = 0.5 * (C + np.swapaxes(C, -1, -2))
    idx = [(0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1)]
    M = np.empty((6, 6))
    for r, (i, j) in enumerate(idx):
        for s, (k, l) in enumerate(idx):
            M[r, s] = C[i, j, k, l]
    return np.linalg.inv(M)

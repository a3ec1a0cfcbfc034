"""Transversely isotropic stress invariants and the plastic flow direction.

For a stress ``S`` and unit fiber ``a`` (``A = a (x) a``) the pressure- and
fiber-stress-independent part is ``g = P(a) : S`` with

    P = II - 1/2 I(x)I - 3/2 A(x)A + 1/2 (A(x)I + I(x)A).

``g`` removes the transverse pressure ``p = (tr S - a.S.a)/2`` and the
fiber stress ``(3 a.S.a - tr S)/2``.  The invariants are

    I1 = tr(g^2)/2 - a.g^2.a        (transverse shear)
    I2 = a.g^2.a                    (longitudinal shear)
    I3 = tr S - a.S.a               (transverse pressure)

and the equivalent stress is ``sqrt(2 (I1 + alpha2 I2))``.

The flow tensor ``H = d(I1 + alpha2 I2)/dS`` evaluates to
``g + (alpha2 - 1)(A g + g A)``; it is linear in ``S`` and
``H : S = seq**2``, so the plastic rate ``seq N / eta`` equals ``H / eta``
and has no singularity at zero stress.
"""

from __future__ import annotations

import numpy as np

from . import tensor_math as tm

ZERO_STRESS_TOL = 1e-12


def projection(a):
    """Fourth-order projector ``P(a)``."""
    a = np.asarray(a, dtype=float)
    A = tm.outer(a, a)
    I = np.broadcast_to(tm.I3, A.shape)
    return (tm.identity4() - 0.5 * tm.dyad(I, I) - 1.5 * tm.dyad(A, A)
            + 0.5 * (tm.dyad(A, I) + tm.dyad(I, A)))


def project(S, a):
    """``P(a) : S`` without forming the fourth-order tensor."""
    A = tm.outer(a, a)
    trS = tm.trace(S)[..., None, None]
    s = tm.ddot(A, S)[..., None, None]
    return S - 0.5 * trS * tm.I3 - 1.5 * s * A + 0.5 * (trS * A + s * tm.I3)


def invariants(S, a):
    """Return ``(I1, I2, I3)``."""
    S = np.asarray(S, dtype=float)
    a = np.asarray(a, dtype=float)
    g = project(tm.sym(S), a)
    g2a = np.einsum("...ij,...jk,...k->...i", g, g, a)
    I2 = np.einsum("...i,...i->...", a, g2a)
    I1 = 0.5 * tm.ddot(g, g) - I2
    I3 = tm.trace(S) - np.einsum("...i,...ij,...j->...", a, S, a)
    return I1, I2, I3


def equivalent_stress(S, a, alpha2):
    I1, I2, _ = invariants(S, a)
    return np.sqrt(np.maximum(2.0 * (I1 + alpha2 * I2), 0.0))


def flow_tensor(S, a, alpha2):
    """``H = seq N``, the gradient of ``I1 + alpha2 I2`` with respect to ``S``."""
    A = tm.outer(np.asarray(a, dtype=float), a)
    g = project(tm.sym(np.asarray(S, dtype=float)), a)
    return g + (np.asarray(alpha2)[..., None, None] - 1.0) * (A @ g + g @ A)


def plastic_normal(S, a, alpha2, sigma0=1.0):
    """Unit-work normal ``N = H / seq``; zero where ``seq <= 1e-12 sigma0``."""
    H = flow_tensor(S, a, alpha2)
    seq = equivalent_stress(S, a, alpha2)
    live = seq > ZERO_STRESS_TOL * sigma0
    return np.where(live[..., None, None], H / np.where(live, seq, 1.0)[..., None, None], 0.0)


def dflow_dS(a, alpha2, P=None):
    """``dH/dS`` (independent of ``S``) as a fourth-order tensor.

    ``P`` may pass a precomputed :func:`projection` of ``a``.
    """
    a = np.asarray(a, dtype=float)
    A = tm.outer(a, a)
    I = np.broadcast_to(tm.I3, A.shape)
    c2 = (np.asarray(alpha2) - 1.0)[..., None, None, None, None]
    L = tm.identity4() + c2 * (tm.left_right(A, I) + tm.left_right(I, A))
    return tm.compose(L, projection(a) if P is None else P)


def dproject_dA(S, a):
    """``dg_ij / dA_kl`` treating ``A`` as independent of ``a``."""
    A = tm.outer(a, a)
    trS = tm.trace(S)
    sf = 1.5 * tm.ddot(A, S) - 0.5 * trS
    I = np.broadcast_to(tm.I3, A.shape)
    return (tm.dyad(0.5 * I - 1.5 * A, S)
            - sf[..., None, None, None, None] * tm.identity4())


def _dA_da(a):
    return np.einsum("km,...l->...klm", tm.I3, a) + np.einsum("...k,lm->...klm", a, tm.I3)


def dproject_da(S, a):
    """``d(P(a):S)_ij / da_m`` at fixed symmetric ``S`` (three-index array).

    Equals ``(S a)_m (I - 3A)_ij - sf dA_ij/da_m`` with the fiber stress
    ``sf = 3/2 a.S.a - 1/2 tr S``.
    """
    S = np.asarray(S, dtype=float)
    a = np.asarray(a, dtype=float)
    A = tm.outer(a, a)
    Sa = np.einsum("...ij,...j->...i", S, a)
    sf = 1.5 * np.einsum("...i,...i->...", a, Sa) - 0.5 * tm.trace(S)
    return ((tm.I3 - 3.0 * A)[..., None] * Sa[..., None, None, :]
            - sf[..., None, None, None] * _dA_da(a))


def dflow_da(S, a, alpha2):
    """``dH_ij / da_m`` for fixed ``S`` (three-index array)."""
    S = tm.sym(np.asarray(S, dtype=float))
    a = np.asarray(a, dtype=float)
    A = tm.outer(a, a)
    g = project(S, a)
    ga = np.einsum("...ij,...j->...i", g, a)
    dg = dproject_da(S, a)
    I = tm.I3
    # dA_m g + g dA_m, using the symmetry of g
    side = (I[:, None, :] * ga[..., None, :, None] + a[..., :, None, None] * g[..., None, :, :]
            + ga[..., :, None, None] * I[None, :, :] + g[..., :, None, :] * a[..., None, :, None])
    dgm = np.moveaxis(dg, -1, -3)
    mid = np.moveaxis(A[..., None, :, :] @ dgm + dgm @ A[..., None, :, :], -3, -1)
    c2 = (np.asarray(alpha2) - 1.0)[..., None, None, None]
    return dg + c2 * (side + mid)


def dQ_da(S, a, alpha2):
    """Gradient of ``Q = I1 + alpha2 I2`` with respect to the fiber at fixed ``S``.

    Valid at unit ``a``; equals ``-2 sf H a + 2 (alpha2 - 1) g^2 a`` where
    ``sf`` is the fiber stress removed by the projection.
    """
    S = tm.sym(np.asarray(S, dtype=float))
    a = np.asarray(a, dtype=float)
    A = tm.outer(a, a)
    g = project(S, a)
    sf = 1.5 * tm.ddot(A, S) - 0.5 * tm.trace(S)
    H = g + (np.asarray(alpha2)[..., None, None] - 1.0) * (A @ g + g @ A)
    Ha = np.einsum("...ij,...j->...i", H, a)
    g2a = np.einsum("...ij,...jk,...k->...i", g, g, a)
    return -2.0 * sf[..., None] * Ha + 2.0 * (np.asarray(alpha2)[..., None] - 1.0) * g2a


def second_derivatives(S, a, alpha2):
    """Derivatives of the normal and equivalent stress at a non-zero stress.

    Returns
    -------
    dN_dS : (..., 3, 3, 3, 3)
    dseq_da : (..., 3)
    dN_da : (..., 3, 3, 3)
    """
    S = tm.sym(np.asarray(S, dtype=float))
    H = flow_tensor(S, a, alpha2)
    seq = equivalent_stress(S, a, alpha2)
    N = H / seq[..., None, None]
    dN_dS = (dflow_dS(a, alpha2) - tm.dyad(N, N)) / seq[..., None, None, None, None]
    dseq_da = dQ_da(S, a, alpha2) / seq[..., None]
    dN_da = (dflow_da(S, a, alpha2) - N[..., None] * dseq_da[..., None, None, :]) / seq[..., None, None, None]
    return dN_dS, dseq_da, dN_da

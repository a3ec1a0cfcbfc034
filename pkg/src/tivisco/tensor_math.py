"""Dense 3x3 tensor algebra, batched over leading axes.

Second-order tensors are arrays of shape ``(..., 3, 3)`` and fourth-order
tensors are arrays of shape ``(..., 3, 3, 3, 3)`` with the convention
``C[..., i, j, k, l] = dY_ij / dX_kl``.  Contractions between fourth-order
tensors are carried out on the ``(9, 9)`` matrix view, which keeps the
batched products on ``np.matmul``.
"""

from __future__ import annotations

import numpy as np

from .errors import SingularTensorError

I3 = np.eye(3)
PIVOT_TOL = 1e-14


def det(A):
    """Closed-form determinant of a batch of 3x3 matrices."""
    A = np.asarray(A)
    return (
        A[..., 0, 0] * (A[..., 1, 1] * A[..., 2, 2] - A[..., 1, 2] * A[..., 2, 1])
        - A[..., 0, 1] * (A[..., 1, 0] * A[..., 2, 2] - A[..., 1, 2] * A[..., 2, 0])
        + A[..., 0, 2] * (A[..., 1, 0] * A[..., 2, 1] - A[..., 1, 1] * A[..., 2, 0])
    )


def adjugate(A):
    """Transpose of the cofactor matrix, so that ``A @ adj(A) = det(A) I``."""
    A = np.asarray(A)
    C = np.empty(A.shape, dtype=A.dtype)
    a, b, c = A[..., 0, 0], A[..., 0, 1], A[..., 0, 2]
    d, e, f = A[..., 1, 0], A[..., 1, 1], A[..., 1, 2]
    g, h, i = A[..., 2, 0], A[..., 2, 1], A[..., 2, 2]
    C[..., 0, 0] = e * i - f * h
    C[..., 0, 1] = c * h - b * i
    C[..., 0, 2] = b * f - c * e
    C[..., 1, 0] = f * g - d * i
    C[..., 1, 1] = a * i - c * g
    C[..., 1, 2] = c * d - a * f
    C[..., 2, 0] = d * h - e * g
    C[..., 2, 1] = b * g - a * h
    C[..., 2, 2] = a * e - b * d
    return C


def inv(A, pivot_tol=PIVOT_TOL):
    """Adjugate inverse with a relative determinant pivot check.

    Raises
    ------
    SingularTensorError
        If ``|det A| <= pivot_tol * |A|_F**3`` for any matrix in the batch.
    """
    A = np.asarray(A, dtype=float)
    d = det(A)
    scale = np.linalg.norm(A, axis=(-2, -1)) ** 3
    if np.any(~(np.abs(d) > pivot_tol * scale)):
        raise SingularTensorError("matrix is singular to working precision")
    return adjugate(A) / d[..., None, None]


def trace(A):
    return np.trace(A, axis1=-2, axis2=-1)


def T(A):
    """Swap the last two axes."""
    return np.swapaxes(A, -1, -2)


def sym(A):
    return 0.5 * (A + T(A))


def skw(A):
    return 0.5 * (A - T(A))


def dyad(A, B):
    """Fourth-order dyadic product ``A_ij B_kl``."""
    return A[..., :, :, None, None] * B[..., None, None, :, :]


def outer(a, b):
    """Vector outer product ``a_i b_j`` on trailing axes."""
    return a[..., :, None] * b[..., None, :]


def ddot(A, B):
    """Double contraction ``A_ij B_ij`` over the trailing two axes."""
    return np.sum(A * B, axis=(-2, -1))


def ddot42(C, B):
    """``C_ijkl B_kl``."""
    return np.einsum("...ijkl,...kl->...ij", C, B)


def ddot24(B, C):
    """``B_ij C_ijkl``."""
    return np.einsum("...ij,...ijkl->...kl", B, C)


def as_mat(C):
    """(…,3,3,3,3) -> (…,9,9) view."""
    return C.reshape(C.shape[:-4] + (9, 9))


def as_t4(M):
    return M.reshape(M.shape[:-2] + (3, 3, 3, 3))


def compose(A, B):
    """Fourth-order composition ``A_ijmn B_mnkl``."""
    return as_t4(as_mat(A) @ as_mat(B))


def identity4():
    """``dX_ij/dX_kl = delta_ik delta_jl``."""
    return np.einsum("ik,jl->ijkl", I3, I3)


def identity4_sym():
    return 0.5 * (np.einsum("ik,jl->ijkl", I3, I3) + np.einsum("il,jk->ijkl", I3, I3))


def identity4_transpose():
    """``d(X^T)_ij/dX_kl = delta_il delta_jk``."""
    return np.einsum("il,jk->ijkl", I3, I3)


def left_right(A, B):
    """Tensor of the linear map ``X -> A X B``: ``A_ik B_lj``."""
    return A[..., :, None, :, None] * T(B)[..., None, :, None, :]


def left_right_t(A, B):
    """Tensor of the linear map ``X -> A X^T B``: ``A_il B_kj``."""
    return A[..., :, None, None, :] * T(B)[..., None, :, :, None]


def sym_major(C):
    """Symmetrize the output pair: ``0.5 (C_ijkl + C_jikl)``."""
    return 0.5 * (C + np.swapaxes(C, -3, -4))


def pade_exp(D, dt):
    """First-order diagonal Pade approximant of ``expm(dt D)``.

    ``(I - dt/2 D)^-1 (I + dt/2 D)``.  Agrees with the exponential to O(dt^3);
    for traceless ``D`` the determinant deviates from one only at O(dt^3).
    """
    D = np.asarray(D, dtype=float)
    h = 0.5 * np.asarray(dt)[..., None, None]
    return inv(I3 - h * D) @ (I3 + h * D)


def pade_exp_derivative(D, dt):
    """Fourth-order derivative of :func:`pade_exp` with respect to ``D``.

    ``dPi = dt/2 Z^-1 dD (Pi + I)`` with ``Z = I - dt/2 D``.
    """
    D = np.asarray(D, dtype=float)
    h = 0.5 * np.asarray(dt)[..., None, None]
    Zi = inv(I3 - h * D)
    Pi = Zi @ (I3 + h * D)
    return h[..., None, None] * left_right(Zi, Pi + I3)


def dinv(A):
    """Derivative of ``inv(A)``: ``-A^-1_ik A^-1_lj``."""
    Ai = inv(A)
    return -left_right(Ai, Ai)


def rotation(axis, angle):
    """Rotation matrix about ``axis`` by ``angle`` radians (Rodrigues)."""
    k = np.asarray(axis, dtype=float)
    k = k / np.linalg.norm(k)
    K = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return I3 + np.sin(angle) * K + (1.0 - np.cos(angle)) * K @ K


def finite_difference(fun, X, h=1e-6, richardson=False):
    """Central-difference Jacobian of ``fun`` with respect to the array ``X``.

    The output has shape ``fun(X).shape + X.shape``.  With ``richardson`` the
    estimates at ``h`` and ``h/2`` are combined to cancel the O(h^2) term.
    """
    X = np.asarray(X, dtype=float)
    y0 = np.asarray(fun(X))
    out = np.empty(y0.shape + X.shape)
    flat = out.reshape(y0.shape + (-1,))

    def central(step, k):
        Xp = X.copy().reshape(-1)
        Xm = X.copy().reshape(-1)
        Xp[k] += step
        Xm[k] -= step
        return (np.asarray(fun(Xp.reshape(X.shape))) - np.asarray(fun(Xm.reshape(X.shape)))) / (2 * step)

    for k in range(X.size):
        d1 = central(h, k)
        if richardson:
            d2 = central(0.5 * h, k)
            d1 = (4.0 * d2 - d1) / 3.0
        flat[..., k] = d1
    return out


def first_piola(F, sigma, dsigma_dF=None):
    """Nominal stress ``P = J sigma F^-T`` and optionally ``dP/dF``.

    ``dsigma_dF`` is the Cauchy stress tangent ``d sigma_ij / d F_kl``.
    """
    Finv = inv(F)
    J = det(F)[..., None, None]
    P = J * sigma @ T(Finv)
    if dsigma_dF is None:
        return P
    dP = (np.einsum("...ij,...lk->...ijkl", P, Finv)
          + J[..., None, None] * np.einsum("...imkl,...jm->...ijkl", dsigma_dF, Finv)
          - np.einsum("...il,...jk->...ijkl", P, Finv))
    return P, dP

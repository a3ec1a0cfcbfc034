"""Compiled per-entry inner Newton solve.

Same residual, Jacobian and stopping rule as the array implementation in
:mod:`tivisco.material` (which serves as its reference), written with
explicit index loops over one (point, mode) entry at a time.  Fourth-order
quantities are stored as 9x9 matrices with row ``3 i + j`` and column
``3 k + l``.
"""

import warnings

import numpy as np
from numba import njit, prange

warnings.filterwarnings("ignore", message="The TBB threading layer")


@njit(cache=True, inline="always")
def _inv3(A, out):
    a, b, c = A[0, 0], A[0, 1], A[0, 2]
    d, e, f = A[1, 0], A[1, 1], A[1, 2]
    g, h, i = A[2, 0], A[2, 1], A[2, 2]
    c00 = e * i - f * h
    c01 = c * h - b * i
    c02 = b * f - c * e
    det = a * c00 + b * (f * g - d * i) + c * (d * h - e * g)
    out[0, 0] = c00 / det
    out[0, 1] = c01 / det
    out[0, 2] = c02 / det
    out[1, 0] = (f * g - d * i) / det
    out[1, 1] = (a * i - c * g) / det
    out[1, 2] = (c * d - a * f) / det
    out[2, 0] = (d * h - e * g) / det
    out[2, 1] = (b * g - a * h) / det
    out[2, 2] = (a * e - b * d) / det
    return det


@njit(cache=True, inline="always")
def _mm(A, B, out):
    for i in range(3):
        for j in range(3):
            s = 0.0
            for k in range(3):
                s += A[i, k] * B[k, j]
            out[i, j] = s


@njit(cache=True)
def _solve9(J, r, x):
    """Gaussian elimination with partial pivoting; ``J`` and ``r`` are overwritten."""
    n = 9
    for k in range(n):
        p = k
        big = abs(J[k, k])
        for i in range(k + 1, n):
            if abs(J[i, k]) > big:
                big = abs(J[i, k])
                p = i
        if big == 0.0:
            return False
        if p != k:
            for j in range(n):
                t = J[k, j]
                J[k, j] = J[p, j]
                J[p, j] = t
            t = r[k]
            r[k] = r[p]
            r[p] = t
        for i in range(k + 1, n):
            f = J[i, k] / J[k, k]
            if f != 0.0:
                for j in range(k, n):
                    J[i, j] -= f * J[k, j]
                r[i] -= f * r[k]
    for i in range(n - 1, -1, -1):
        s = r[i]
        for j in range(i + 1, n):
            s -= J[i, j] * x[j]
        x[i] = s / J[i, i]
    return True


@njit(cache=True)
def _project(S, ah, out):
    trS = S[0, 0] + S[1, 1] + S[2, 2]
    AS = 0.0
    for i in range(3):
        for j in range(3):
            AS += ah[i] * S[i, j] * ah[j]
    for i in range(3):
        for j in range(3):
            A = ah[i] * ah[j]
            d = 1.0 if i == j else 0.0
            out[i, j] = S[i, j] - 0.5 * trS * d - 1.5 * AS * A + 0.5 * (trS * A + AS * d)


@njit(cache=True)
def _dproject_da(S, ah, out, Sa):
    Sa[:] = 0.0
    for i in range(3):
        for j in range(3):
            Sa[i] += S[i, j] * ah[j]
    sf = 1.5 * (ah[0] * Sa[0] + ah[1] * Sa[1] + ah[2] * Sa[2]) - 0.5 * (S[0, 0] + S[1, 1] + S[2, 2])
    for i in range(3):
        for j in range(3):
            d = 1.0 if i == j else 0.0
            for m in range(3):
                dA = (ah[j] if i == m else 0.0) + (ah[i] if j == m else 0.0)
                out[i, j, m] = (d - 3.0 * ah[i] * ah[j]) * Sa[m] - sf * dA


@njit(cache=True)
def _evaluate(F, a0, Fp, Fp0, s, lam, mu, alpha, beta, gamma, eta0, kappa, alpha2, dt, midpoint,
              R, Jac, keep2, keep9, vec, wk3, wk9, wv, wt, wg):
    """Residual ``R`` (3,3) and Jacobian ``Jac`` (9,9) of one entry.

    ``keep2`` receives sig, S, H, Fe, Feinv, Fpinv, Mt (7,3,3); ``keep9``
    receives dsig, dSdFe, dFedFp, dHdS (4,9,9); ``vec`` receives a, ah, c.
    """
    Fpinv = keep2[5]
    _inv3(Fp, Fpinv)
    Fe = keep2[3]
    _mm(F, Fpinv, Fe)
    Finv = wk3[0]
    _inv3(F, Finv)
    Feinv = keep2[4]
    _mm(Fp, Finv, Feinv)
    a = wv[0]
    a[:] = 0.0
    for i in range(3):
        for j in range(3):
            a[i] += F[i, j] * a0[j]

    # elastic stress
    J = Fe[0, 0] * (Fe[1, 1] * Fe[2, 2] - Fe[1, 2] * Fe[2, 1]) \
        - Fe[0, 1] * (Fe[1, 0] * Fe[2, 2] - Fe[1, 2] * Fe[2, 0]) \
        + Fe[0, 2] * (Fe[1, 0] * Fe[2, 1] - Fe[1, 1] * Fe[2, 0])
    B = wk3[1]
    B[:] = 0.0
    for i in range(3):
        for j in range(3):
            for k in range(3):
                B[i, j] += Fe[i, k] * Fe[j, k]
    Ba = wv[1]
    Ba[:] = 0.0
    for i in range(3):
        for j in range(3):
            Ba[i] += B[i, j] * a[j]
    xi1 = B[0, 0] + B[1, 1] + B[2, 2]
    xi2 = a[0] * a[0] + a[1] * a[1] + a[2] * a[2]
    cc = alpha + beta * (xi1 - 3.0) + 2.0 * gamma * (xi2 - 1.0)
    sig = keep2[0]
    trn = wk3[2]
    for i in range(3):
        for j in range(3):
            d = 1.0 if i == j else 0.0
            trn[i, j] = (2.0 * beta * (xi2 - 1.0) * B[i, j] + 2.0 * cc * a[i] * a[j]
                         - alpha * (Ba[i] * a[j] + a[i] * Ba[j])) / J
            sig[i, j] = mu / J * (B[i, j] - d) + lam * (J - 1.0) * d + trn[i, j]

    # Mandel-like stress
    X = wk3[3]
    X[:] = 0.0
    for i in range(3):
        for j in range(3):
            for k in range(3):
                X[i, j] += sig[i, k] * Feinv[j, k]
    Sns = wk3[4]
    Sns[:] = 0.0
    for i in range(3):
        for j in range(3):
            for k in range(3):
                Sns[i, j] += Fe[k, i] * X[k, j]
    S = keep2[1]
    for i in range(3):
        for j in range(3):
            S[i, j] = 0.5 * (Sns[i, j] + Sns[j, i])

    # fiber direction in the intermediate configuration
    b = wv[2]
    b[:] = 0.0
    for i in range(3):
        for j in range(3):
            b[i] += (Fp[i, j] + Fp0[i, j] if midpoint else Fp[i, j]) * a0[j]
    nb = np.sqrt(b[0] * b[0] + b[1] * b[1] + b[2] * b[2])
    ah = wv[3]
    for i in range(3):
        ah[i] = b[i] / nb
    Ah = wk3[5]
    for i in range(3):
        for j in range(3):
            Ah[i, j] = ah[i] * ah[j]

    c2 = alpha2 - 1.0
    g = wk3[6]
    _project(S, ah, g)
    H = keep2[2]
    for i in range(3):
        for j in range(3):
            t = 0.0
            for k in range(3):
                t += Ah[i, k] * g[k, j] + g[i, k] * Ah[k, j]
            H[i, j] = g[i, j] + c2 * t

    Sum = wk3[7]
    for i in range(3):
        for j in range(3):
            Sum[i, j] = Fp[i, j] + Fp0[i, j]
    W = wk3[8]
    _inv3(Sum, W)
    Mt = keep2[6]
    Dif = wk3[9]
    for i in range(3):
        for j in range(3):
            Dif[i, j] = Fp[i, j] - Fp0[i, j]
    _mm(Dif, W, Mt)
    Ms = wk3[10]
    for i in range(3):
        for j in range(3):
            Ms[i, j] = 0.5 * (Mt[i, j] + Mt[j, i])
    PM = wk3[11]
    _project(Ms, ah, PM)
    c = 2.0 * eta0 * np.exp(s) / dt
    for i in range(3):
        for j in range(3):
            R[i, j] = c * Mt[i, j] - H[i, j] + kappa * (Mt[i, j] - PM[i, j])

    # projector P(ah) and dH/dS = L o P
    Pa = wk9[0]
    for i in range(3):
        for j in range(3):
            dij = 1.0 if i == j else 0.0
            for k in range(3):
                for l in range(3):
                    dkl = 1.0 if k == l else 0.0
                    v = (1.0 if (i == k and j == l) else 0.0) - 0.5 * dij * dkl \
                        - 1.5 * Ah[i, j] * Ah[k, l] + 0.5 * (Ah[i, j] * dkl + dij * Ah[k, l])
                    Pa[3 * i + j, 3 * k + l] = v
    dHdS = keep9[3]
    for i in range(3):
        for j in range(3):
            for q in range(9):
                t = 0.0
                for m in range(3):
                    t += Ah[i, m] * Pa[3 * m + j, q] + Pa[3 * i + m, q] * Ah[m, j]
                dHdS[3 * i + j, q] = Pa[3 * i + j, q] + c2 * t

    # d sigma / d Fe
    c1 = (mu + 2.0 * beta * (xi2 - 1.0)) / J
    aJ = alpha / J
    AF = wk3[12]
    AF[:] = 0.0
    for i in range(3):
        for j in range(3):
            for k in range(3):
                AF[i, j] += a[i] * a[k] * Fe[k, j]
    FinvT = wk3[13]
    FeinvE = wk3[14]
    _inv3(Fe, FeinvE)
    for i in range(3):
        for j in range(3):
            FinvT[i, j] = FeinvE[j, i]
    Z = wk3[15]
    for i in range(3):
        for j in range(3):
            d = 1.0 if i == j else 0.0
            Z[i, j] = -mu / J * (B[i, j] - d) + lam * J * d - trn[i, j]
    dsig = keep9[0]
    for i in range(3):
        for j in range(3):
            for k in range(3):
                dik = 1.0 if i == k else 0.0
                dkj = 1.0 if k == j else 0.0
                Aik = a[i] * a[k]
                Akj = a[k] * a[j]
                for l in range(3):
                    U = c1 * Fe[j, l] - aJ * AF[j, l]
                    V = c1 * dkj - aJ * Akj
                    dsig[3 * i + j, 3 * k + l] = (dik * U - aJ * Aik * Fe[j, l] + Fe[i, l] * V
                                                  - aJ * AF[i, l] * dkj + Z[i, j] * FinvT[k, l]
                                                  + 4.0 * beta / J * a[i] * a[j] * Fe[k, l])

    # d S / d Fe (symmetrized)
    dSdFe = keep9[1]
    T4 = wk9[1]
    for i in range(3):
        for j in range(3):
            for k in range(3):
                for l in range(3):
                    t = (X[k, j] if i == l else 0.0) - Sns[i, l] * Feinv[j, k]
                    for m in range(3):
                        for n in range(3):
                            t += Fe[m, i] * dsig[3 * m + n, 3 * k + l] * Feinv[j, n]
                    T4[3 * i + j, 3 * k + l] = t
    for i in range(3):
        for j in range(3):
            for q in range(9):
                dSdFe[3 * i + j, q] = 0.5 * (T4[3 * i + j, q] + T4[3 * j + i, q])

    # d Fe / d Fp = -Fe_ik Fpinv_lj
    dFedFp = keep9[2]
    for i in range(3):
        for j in range(3):
            for k in range(3):
                for l in range(3):
                    dFedFp[3 * i + j, 3 * k + l] = -Fe[i, k] * Fpinv[l, j]

    # dH/dah (fixed S) and d(P:Ms)/dah
    dg = wt[0]
    _dproject_da(S, ah, dg, wv[5])
    ga = wv[4]
    ga[:] = 0.0
    for i in range(3):
        for j in range(3):
            ga[i] += g[i, j] * ah[j]
    dHda = wg[0]
    for i in range(3):
        for j in range(3):
            for m in range(3):
                side = ((ga[j] if i == m else 0.0) + ah[i] * g[m, j]
                        + (ga[i] if j == m else 0.0) + g[i, m] * ah[j])
                mid = 0.0
                for k in range(3):
                    mid += Ah[i, k] * dg[k, j, m] + dg[i, k, m] * Ah[k, j]
                dHda[3 * i + j, m] = dg[i, j, m] + c2 * (side + mid)
    dPM = wt[1]
    _dproject_da(Ms, ah, dPM, wv[5])
    # total fiber term times dah/dFp = (I - ah ah)/|b| (x) a0
    G = wg[1]
    for r in range(9):
        for q in range(3):
            t = 0.0
            for m in range(3):
                pm = ((1.0 if m == q else 0.0) - ah[m] * ah[q]) / nb
                t += (dHda[r, m] + kappa * dPM[r // 3, r % 3, m]) * pm
            G[r, q] = t

    # dM/dFp = (2 Fp0 W)_ik W_lj
    L2 = wk3[16]
    _mm(Fp0, W, L2)
    dM = wk9[2]
    for i in range(3):
        for j in range(3):
            for k in range(3):
                for l in range(3):
                    dM[3 * i + j, 3 * k + l] = 2.0 * L2[i, k] * W[l, j]

    # chain dS/dFp
    dSdFp = wk9[3]
    for r in range(9):
        for q in range(9):
            t = 0.0
            for p in range(9):
                t += dSdFe[r, p] * dFedFp[p, q]
            dSdFp[r, q] = t
    for r in range(9):
        i, j = r // 3, r % 3
        for q in range(9):
            t1 = 0.0
            t2 = 0.0
            for p in range(9):
                psym = 0.5 * (Pa[r, p] + Pa[r, 3 * (p % 3) + p // 3])
                t1 += psym * dM[p, q]
                t2 += dHdS[r, p] * dSdFp[p, q]
            Jac[r, q] = (c + kappa) * dM[r, q] - kappa * t1 - t2 - G[r, q // 3] * a0[q % 3]
    vec[0:3] = a
    vec[3:6] = ah
    vec[6] = c


@njit(cache=True, parallel=True)
def inner_solve(F, a0, Fp0, s, Fp_init, lam, mu, alpha, beta, gamma, eta0, kappa, alpha2, dt,
                midpoint, tol, max_iter, polish_tol, max_step):
    """Inner Newton loop for every entry; ``status`` is 0 on success.

    Also returns ``Y = dFp/ds`` at the root and ``d sigma/ds = dsig/dFe dFe/dFp Y``.
    """
    n = F.shape[0]
    Fp = Fp_init.copy()
    iters = np.zeros(n, dtype=np.int64)
    status = np.zeros(n, dtype=np.int64)
    K2 = np.empty((n, 7, 3, 3))
    K9 = np.empty((n, 4, 9, 9))
    Jout = np.empty((n, 9, 9))
    vec = np.empty((n, 7))
    Y = np.empty((n, 9))
    dsig_ds = np.empty((n, 9))
    for e in prange(n):
        wk3 = np.empty((17, 3, 3))
        wk9 = np.empty((4, 9, 9))
        wv = np.empty((6, 3))
        wt = np.empty((2, 3, 3, 3))
        wg = np.empty((2, 9, 3))
        R = np.empty((3, 3))
        Jac = np.empty((9, 9))
        Jw = np.empty((9, 9))
        rw = np.empty(9)
        dx = np.empty(9)
        polish = False
        for it in range(max_iter + 1):
            _evaluate(F[e], a0[e], Fp[e], Fp0[e], s[e], lam[e], mu[e], alpha[e], beta[e], gamma[e],
                      eta0[e], kappa[e], alpha2, dt, midpoint, R, Jac, K2[e], K9[e], vec[e],
                      wk3, wk9, wv, wt, wg)
            fmax = 1.0
            for i in range(3):
                for j in range(3):
                    fmax = max(fmax, abs(Fp[e, i, j]))
            res = 0.0
            for i in range(3):
                for j in range(3):
                    res = max(res, abs(R[i, j]))
            res /= (vec[e, 6] + kappa[e]) * fmax
            if not np.isfinite(res):
                status[e] = 1
                break
            conv = res <= tol
            if (polish and conv) or res <= polish_tol:
                break
            if it == max_iter:
                status[e] = 2
                break
            for r in range(9):
                rw[r] = -R[r // 3, r % 3]
                for q in range(9):
                    Jw[r, q] = Jac[r, q]
            if not _solve9(Jw, rw, dx):
                status[e] = 3
                break
            big = 0.0
            for r in range(9):
                big = max(big, abs(dx[r]))
            f = min(1.0, max_step / max(big, 1e-300))
            for r in range(9):
                Fp[e, r // 3, r % 3] += f * dx[r]
            iters[e] += 1
            if conv:
                polish = True
        Jout[e] = Jac
        if status[e] == 0:
            # sensitivity of the root to s: J Y = -c M
            for r in range(9):
                rw[r] = -vec[e, 6] * K2[e, 6, r // 3, r % 3]
                for q in range(9):
                    Jw[r, q] = Jac[r, q]
            if not _solve9(Jw, rw, dx):
                status[e] = 3
            for r in range(9):
                Y[e, r] = dx[r]
            # d sigma/ds = dsig/dFe dFe/dFp Y
            for r in range(9):
                t = 0.0
                for q in range(9):
                    t += K9[e, 2, r, q] * dx[q]
                rw[r] = t
            for r in range(9):
                t = 0.0
                for q in range(9):
                    t += K9[e, 0, r, q] * rw[q]
                dsig_ds[e, r] = t
    return Fp, iters, status, K2, K9, Jout, vec, Y, dsig_ds

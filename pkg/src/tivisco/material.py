"""Multi-mode Eyring viscoplastic stress update with consistent tangent.

Every mode ``i`` owns a plastic deformation gradient ``Fp_i`` and a
hyperelastic law scaled by its stiffness fraction ``m_i``.  The modes share
the deformation gradient ``F`` and a single stress shift factor

    a_sigma = x / sinh(x) * exp(-mu_p I3 / sigma0),   x = seq / sigma0,

evaluated on the *total* Cauchy stress.  Mode viscosities are
``eta_i = eta0_i a_sigma`` and the plastic rate is ``H_i / eta_i`` with
``H_i`` the flow tensor of the mode's Mandel stress.

Time integration uses the first-order Pade approximant of the exponential
map.  The update is solved as two nested Newton loops:

* inner (per mode, fixed ``a_sigma``): the stress-scaled residual
  ``2 eta_i/dt (Fp - Fp0)(Fp + Fp0)^-1 - H_i = 0``, which has the same
  root as ``Fp - Pade(dt D) Fp0 = 0`` but stays well scaled when a mode is
  effectively inviscid;
* outer: ``r(s) = s - ln(x/sinh x) + mu_p I3/sigma0 = 0`` for
  ``s = ln a_sigma``, safeguarded by bracketing.

The consistent tangent ``d sigma / dF`` differentiates through both loops.
All arrays are batched over material points and modes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import hyperelastic as he
from . import invariants as inv
from . import tensor_math as tm
from .errors import ConfigError, InvalidMaterialError, StepRejected

POLISH_TOL = 1e-14
MAX_FP_STEP = 0.25
MAX_S_STEP = 20.0


@dataclass(frozen=True)
class PlasticParams:
    """Eyring parameters: pressure sensitivity, activation stress (MPa),
    reference viscosity (MPa s) and the longitudinal-shear weight."""

    mu_p: float
    sigma0: float
    eta0: float
    alpha2: float

    def __post_init__(self):
        if self.sigma0 <= 0.0 or self.eta0 <= 0.0:
            raise InvalidMaterialError("sigma0 and eta0 must be positive")
        if self.alpha2 <= 0.0:
            raise InvalidMaterialError("alpha2 must be positive")
        if abs(self.mu_p) >= 1.0 / np.sqrt(2.0):
            raise InvalidMaterialError("|mu_p| must stay below 1/sqrt(2)")


@dataclass(frozen=True)
class RelaxationSpectrum:
    """Stiffness fractions ``m`` and reference viscosities ``eta0`` per mode."""

    m: np.ndarray
    eta0: np.ndarray

    def __post_init__(self):
        m = np.atleast_1d(np.asarray(self.m, dtype=float))
        e = np.atleast_1d(np.asarray(self.eta0, dtype=float))
        if m.shape != e.shape or m.ndim != 1 or m.size == 0:
            raise InvalidMaterialError("spectrum needs matching 1-D m and eta0")
        if np.any(m <= 0.0) or np.any(e <= 0.0):
            raise InvalidMaterialError("spectrum entries must be positive")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "eta0", e)

    @property
    def n_modes(self):
        return self.m.size

    @classmethod
    def single(cls, eta0):
        return cls(np.array([1.0]), np.array([float(eta0)]))

    @classmethod
    def from_csv(cls, path, sum_tol=1e-3):
        """Read a ``mode,m,eta0`` file.

        Raises
        ------
        ConfigError
            On a malformed row (row number reported), a non-positive entry or
            fractions that do not sum to one within ``sum_tol``.
        """
        m, eta = [], []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = [h.strip() for h in next(reader, [])]
            if header != ["mode", "m", "eta0"]:
                raise ConfigError(f"{path}: expected header 'mode,m,eta0'")
            for row_no, row in enumerate(reader, start=2):
                if not row or not "".join(row).strip():
                    continue
                try:
                    _, mi, ei = (float(v) for v in row)
                except ValueError as exc:
                    raise ConfigError(f"{path}: row {row_no}: {exc}") from None
                if mi <= 0.0 or ei <= 0.0:
                    raise ConfigError(f"{path}: row {row_no}: m and eta0 must be positive")
                m.append(mi)
                eta.append(ei)
        if not m:
            raise ConfigError(f"{path}: no modes")
        if abs(sum(m) - 1.0) > sum_tol:
            raise ConfigError(f"{path}: stiffness fractions sum to {sum(m):.6g}, not 1")
        return cls(np.array(m), np.array(eta))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["mode", "m", "eta0"])
            for i, (mi, ei) in enumerate(zip(self.m, self.eta0), start=1):
                w.writerow([i, repr(float(mi)), repr(float(ei))])


@dataclass(frozen=True)
class MaterialParams:
    elastic: he.ElasticConstants
    plastic: PlasticParams
    spectrum: RelaxationSpectrum

    @property
    def n_modes(self):
        return self.spectrum.n_modes

    @cached_property
    def hyper(self) -> he.HyperelasticParams:
        """Per-mode moduli as arrays of shape ``(n_modes,)``."""
        return he.convert_constants(self.elastic).scaled(self.spectrum.m)

    @cached_property
    def stiffness_scale(self):
        return self.spectrum.m * self.elastic.E22


@dataclass(frozen=True)
class SolverSettings:
    tol_internal: float = 1e-10
    tol_external: float = 1e-12
    max_iter_internal: int = 50
    max_iter_external: int = 50
    fiber_eval: str = "midpoint"
    backend: str = "compiled"

    def __post_init__(self):
        if self.fiber_eval not in ("midpoint", "end"):
            raise ConfigError("fiber_eval must be 'midpoint' or 'end'")
        if self.backend not in ("compiled", "numpy"):
            raise ConfigError("backend must be 'compiled' or 'numpy'")


@dataclass(frozen=True)
class MaterialState:
    """Internal variables of one material point (immutable)."""

    Fp: np.ndarray
    log_a_sigma: float = 0.0
    a0: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))
    time: float = 0.0

    @property
    def a_sigma(self):
        return float(np.exp(self.log_a_sigma))

    @classmethod
    def initial(cls, n_modes, a0=(1.0, 0.0, 0.0)):
        a0 = np.asarray(a0, dtype=float)
        a0 = a0 / np.linalg.norm(a0)
        return cls(np.broadcast_to(np.eye(3), (n_modes, 3, 3)).copy(), 0.0, a0, 0.0)


@dataclass
class UpdateDiagnostics:
    iter_external: int
    iter_internal: int
    det_fp_error: float
    fiber_norm_error: float
    plastic_rate: np.ndarray  # equivalent plastic rate per mode (1/s)


@dataclass
class StressUpdateResult:
    sigma: np.ndarray
    tangent: np.ndarray | None
    state: MaterialState
    diagnostics: UpdateDiagnostics


def log_x_over_sinh(x):
    """``ln(x / sinh x)`` for ``x >= 0`` without overflow or cancellation."""
    x = np.asarray(x, dtype=float)
    small = x < 0.3
    xs = np.where(small, 1.0, x)
    big = np.log(2.0 * xs) - xs - np.log1p(-np.exp(-2.0 * xs))
    x2 = x * x
    c = (-1.0 / 6.0, 1.0 / 180.0, -1.0 / 2835.0, 1.0 / 37800.0, -1.0 / 467775.0, 691.0 / 3831077250.0)
    series = np.zeros_like(x)
    for ck in reversed(c):
        series = x2 * (ck + series)
    return np.where(small, series, big)


def psi(x):
    """``(coth x - 1/x) / x``, the smooth factor in ``d ln(x/sinh x)/dx = -x psi``."""
    x = np.asarray(x, dtype=float)
    small = x < 0.1
    xs = np.where(small, 1.0, x)
    big = (1.0 / np.tanh(xs) - 1.0 / xs) / xs
    x2 = x * x
    series = 1.0 / 3.0 + x2 * (-1.0 / 45.0 + x2 * (2.0 / 945.0 + x2 * (-1.0 / 4725.0 + x2 * 2.0 / 93555.0)))
    return np.where(small, series, big)


def shift_factor(sigma, abar, plastic: PlasticParams):
    """Stress shift factor of a total Cauchy stress."""
    seq = inv.equivalent_stress(sigma, abar, plastic.alpha2)
    _, _, I3 = inv.invariants(sigma, abar)
    return np.exp(log_x_over_sinh(seq / plastic.sigma0) - plastic.mu_p * I3 / plastic.sigma0)


# ---------------------------------------------------------------------------
# batched kernels


class _Modes:
    """Per-entry parameter arrays for a flattened (point, mode) batch."""

    def __init__(self, params: MaterialParams, n_points):
        N = params.n_modes
        rep = lambda v: np.broadcast_to(np.asarray(v, dtype=float), (n_points, N)).reshape(-1)
        hp = params.hyper
        self.lam, self.mu, self.alpha = rep(hp.lam), rep(hp.mu), rep(hp.alpha)
        self.beta, self.gamma = rep(hp.beta), rep(hp.gamma)
        self.eta0 = rep(params.spectrum.eta0)
        self.stiff = rep(params.stiffness_scale)

    def hp(self, idx):
        return he.HyperelasticParams(self.lam[idx], self.mu[idx], self.alpha[idx],
                                     self.beta[idx], self.gamma[idx])


def _mandel_derivative(Fe, Feinv, sig, dsig):
    """``d sym(Fe^T sigma Fe^-T) / dFe`` given ``d sigma / dFe``."""
    X = sig @ tm.T(Feinv)
    Sns = tm.T(Fe) @ X
    # Fe^T (dsig/dFe_kl) Fe^-T for each (k, l), batched over kl
    dk = np.moveaxis(dsig.reshape(dsig.shape[:-2] + (9,)), -1, -3)
    t2 = tm.T(Fe)[..., None, :, :] @ dk @ tm.T(Feinv)[..., None, :, :]
    t2 = np.moveaxis(t2, -3, -1).reshape(dsig.shape)
    I = np.broadcast_to(tm.I3, X.shape)
    return tm.sym_major(tm.left_right_t(I, X) + t2 - tm.left_right_t(Sns, tm.T(Feinv)))


def _evaluate(F, a0, Fp, Fp0, s, hp, eta0, kappa, alpha2, dt, midpoint):
    """Residual and Jacobian of the inner problem for a flat batch of entries.

    The residual is ``c M - H + kappa (M - P:sym M)`` with
    ``M = (Fp - Fp0)(Fp + Fp0)^-1`` and ``c = 2 eta / dt``.  ``H`` always lies
    in the range of ``P``, so the last term vanishes at the root; it pins the
    skew, trace and fiber-normal parts of ``M`` to zero with a stiffness of
    order ``kappa`` even when ``c`` is negligible.
    """
    Fpinv = tm.inv(Fp)
    Fe = F @ Fpinv
    Feinv = Fp @ tm.inv(F)
    a = np.einsum("...ij,...j->...i", F, a0)
    sig = he.cauchy_stress(Fe, a, hp)
    S = tm.sym(tm.T(Fe) @ sig @ tm.T(Feinv))
    b = np.einsum("...ij,...j->...i", Fp + Fp0 if midpoint else Fp, a0)
    nb = np.linalg.norm(b, axis=-1)
    ah = b / nb[..., None]
    H = inv.flow_tensor(S, ah, alpha2)
    W = tm.inv(Fp + Fp0)
    Mt = (Fp - Fp0) @ W
    Ms = tm.sym(Mt)
    c = 2.0 * eta0 * np.exp(s) / dt
    k3 = kappa[:, None, None]
    R = c[:, None, None] * Mt - H + k3 * (Mt - inv.project(Ms, ah))

    Pa = inv.projection(ah)
    dsig = he.dstress_dFe(Fe, a, hp)
    dSdFe = tm.as_mat(_mandel_derivative(Fe, Feinv, sig, dsig))
    dFedFp = tm.as_mat(tm.left_right(-Fe, Fpinv))
    dHdS = tm.as_mat(inv.dflow_dS(ah, alpha2, Pa))
    dHda = inv.dflow_da(S, ah, alpha2).reshape(-1, 9, 3)
    dPMda = inv.dproject_da(Ms, ah).reshape(-1, 9, 3)
    proj = (tm.I3 - tm.outer(ah, ah)) / nb[:, None, None]
    dadFp = np.einsum("...qm,...n->...qmn", proj, a0).reshape(-1, 3, 9)
    dM = tm.as_mat(tm.left_right(2.0 * Fp0 @ W, W))
    Psym = tm.as_mat(0.5 * (Pa + np.swapaxes(Pa, -1, -2)))
    J = ((c + kappa)[:, None, None] * dM - k3 * (Psym @ dM)
         - dHdS @ (dSdFe @ dFedFp) - (dHda + k3 * dPMda) @ dadFp)
    return dict(R=R, J=J, dRds=(c[:, None, None] * Mt).reshape(-1, 9), sig=sig, S=S,
                ah=ah, H=H, c=c, Fe=Fe, Feinv=Feinv, Fpinv=Fpinv, a=a,
                dsig=tm.as_mat(dsig), dSdFe=dSdFe, dFedFp=dFedFp, dHdS=dHdS)


_KEEP = ("J", "dRds", "sig", "S", "ah", "H", "c", "Fe", "Feinv", "Fpinv", "a",
         "dsig", "dSdFe", "dFedFp", "dHdS")


def _inner_solve(F, a0, Fp0, s, Fp_init, modes: _Modes, ent, alpha2, dt, st: SolverSettings):
    """Newton solve of every mode entry in ``ent`` at fixed ``s``."""
    n = ent.size
    Fp = Fp_init.copy()
    polish = np.zeros(n, dtype=bool)
    iters = np.zeros(n, dtype=int)
    out = {}
    act = np.arange(n)
    midpoint = st.fiber_eval == "midpoint"
    for it in range(st.max_iter_internal + 1):
        e = ent[act]
        ev = _evaluate(F[act], a0[act], Fp[act], Fp0[act], s[act], modes.hp(e),
                       modes.eta0[e], modes.stiff[e], alpha2, dt, midpoint)
        scale = (ev["c"] + modes.stiff[e]) * np.maximum(1.0, np.abs(Fp[act]).max(axis=(1, 2)))
        res = np.abs(ev["R"]).max(axis=(1, 2)) / scale
        if not np.all(np.isfinite(res)):
            raise StepRejected("non-finite inner residual")
        conv = res <= st.tol_internal
        finished = (polish[act] & conv) | (res <= POLISH_TOL)
        if np.any(finished):
            idx = act[finished]
            for k in _KEEP:
                v = ev[k]
                if k not in out:
                    out[k] = np.empty((n,) + v.shape[1:])
                out[k][idx] = v[finished]
        step = ~finished
        if not np.any(step):
            break
        if it == st.max_iter_internal:
            raise StepRejected("inner Newton did not converge")
        dx = -np.linalg.solve(ev["J"][step], ev["R"][step].reshape(-1, 9, 1))[..., 0]
        big = np.abs(dx).max(axis=1)
        dx *= np.minimum(1.0, MAX_FP_STEP / np.maximum(big, 1e-300))[:, None]
        idx = act[step]
        Fp[idx] += dx.reshape(-1, 3, 3)
        iters[idx] += 1
        polish[idx[conv[step]]] = True
        act = idx
    out["Fp"] = Fp
    out["iters"] = iters
    return out


def _inner_solve_compiled(F, a0, Fp0, s, Fp_init, modes: _Modes, ent, alpha2, dt, st: SolverSettings):
    """Same contract as :func:`_inner_solve`, running the compiled kernel."""
    from ._kernels import inner_solve

    Fp, iters, status, K2, K9, J, vec, Y, dsig_ds = inner_solve(
        np.ascontiguousarray(F), np.ascontiguousarray(a0), np.ascontiguousarray(Fp0),
        np.ascontiguousarray(s), np.ascontiguousarray(Fp_init),
        modes.lam[ent], modes.mu[ent], modes.alpha[ent], modes.beta[ent], modes.gamma[ent],
        modes.eta0[ent], modes.stiff[ent], float(alpha2), float(dt),
        st.fiber_eval == "midpoint", st.tol_internal, st.max_iter_internal, POLISH_TOL, MAX_FP_STEP)
    if np.any(status):
        raise StepRejected("inner Newton did not converge")
    c = vec[:, 6]
    out = dict(J=J, sig=K2[:, 0], S=K2[:, 1], H=K2[:, 2], Fe=K2[:, 3], Feinv=K2[:, 4],
               Fpinv=K2[:, 5], dsig=K9[:, 0], dSdFe=K9[:, 1], dFedFp=K9[:, 2], dHdS=K9[:, 3],
               a=vec[:, 0:3], ah=vec[:, 3:6], c=c, dRds=c[:, None] * K2[:, 6].reshape(-1, 9),
               Fp=Fp, iters=iters, Y=Y, dsig_ds=dsig_ds)
    return out


def _external_residual(sig_tot, a_cur, s, pl: PlasticParams):
    """``r``, ``dr/dsigma`` and ``dr/dabar`` for a batch of points."""
    abar = a_cur / np.linalg.norm(a_cur, axis=-1, keepdims=True)
    Q1, Q2, I3 = inv.invariants(sig_tot, abar)
    seq = np.sqrt(np.maximum(2.0 * (Q1 + pl.alpha2 * Q2), 0.0))
    x = seq / pl.sigma0
    r = s - log_x_over_sinh(x) + pl.mu_p * I3 / pl.sigma0
    Htot = inv.flow_tensor(sig_tot, abar, pl.alpha2)
    k = psi(x) / pl.sigma0**2
    Abar = tm.outer(abar, abar)
    drdsig = k[:, None, None] * Htot + (pl.mu_p / pl.sigma0) * (tm.I3 - Abar)
    drda = (k[:, None] * inv.dQ_da(sig_tot, abar, pl.alpha2)
            - 2.0 * (pl.mu_p / pl.sigma0) * np.einsum("...ij,...j->...i", sig_tot, abar))
    return r, drdsig, drda, abar, seq


def integrate(F, Fp0, s0, a0, dt, params: MaterialParams, settings: SolverSettings | None = None,
              guess=None, tangent=True):
    """Batched stress update of ``P`` material points.

    Parameters
    ----------
    F : (P, 3, 3) deformation gradients at the end of the step.
    Fp0 : (P, N, 3, 3) converged plastic deformation gradients.
    s0 : (P,) converged ``ln a_sigma``.
    a0 : (P, 3) or (3,) initial unit fiber directions.
    dt : time increment (s).
    guess : optional ``(Fp, s)`` starting point, e.g. from a previous
        global iteration of the same increment.

    Returns
    -------
    dict with ``sigma`` (P,3,3), ``Fp`` (P,N,3,3), ``s`` (P,), ``tangent``
    (P,3,3,3,3) or None, and iteration / rate diagnostics.

    Raises
    ------
    StepRejected
        When either Newton loop fails; the caller should cut the increment.
    """
    st = settings or SolverSettings()
    pl = params.plastic
    F = np.asarray(F, dtype=float)
    P = F.shape[0]
    N = params.n_modes
    a0 = np.broadcast_to(np.asarray(a0, dtype=float), (P, 3))
    Fp0 = np.asarray(Fp0, dtype=float)
    s0 = np.asarray(s0, dtype=float).reshape(P)
    if np.any(~(tm.det(F) > 0.0)):
        raise StepRejected("deformation gradient with non-positive determinant")
    modes = _Modes(params, P)
    if dt <= 0.0:
        return _elastic_only(F, Fp0, s0, a0, params, modes, tangent)

    Fp = (guess[0] if guess is not None else Fp0).reshape(P * N, 3, 3).copy()
    s = (guess[1] if guess is not None else s0).astype(float).copy()
    Fp0f = Fp0.reshape(P * N, 3, 3)
    Ff = np.repeat(F, N, axis=0)
    a0f = np.repeat(a0, N, axis=0)
    acur = np.einsum("pij,pj->pi", F, a0)

    solve_inner = _inner_solve_compiled if st.backend == "compiled" else _inner_solve
    lo = np.full(P, -np.inf)
    hi = np.full(P, np.inf)
    polish = np.zeros(P, dtype=bool)
    done = np.zeros(P, dtype=bool)
    it_ext = np.zeros(P, dtype=int)
    it_int = np.zeros(P, dtype=int)
    keep = {}
    act = np.arange(P)
    for k in range(st.max_iter_external + 1):
        ent = (act[:, None] * N + np.arange(N)).reshape(-1)
        inner = solve_inner(Ff[ent], a0f[ent], Fp0f[ent], np.repeat(s[act], N), Fp[ent],
                             modes, ent, pl.alpha2, dt, st)
        Fp[ent] = inner["Fp"]
        it_int[act] = np.maximum(it_int[act], inner["iters"].reshape(-1, N).max(axis=1))
        if "Y" in inner:
            Y, dsig_ds = inner["Y"], inner["dsig_ds"]
        else:
            Y = -np.linalg.solve(inner["J"], inner["dRds"][..., None])[..., 0]
            dsig_ds = (inner["dsig"] @ (inner["dFedFp"] @ Y[..., None]))[..., 0]
        sig_tot = inner["sig"].reshape(-1, N, 3, 3).sum(axis=1)
        Ss = dsig_ds.reshape(-1, N, 9).sum(axis=1)
        r, drdsig, drda, abar, seq = _external_residual(sig_tot, acur[act], s[act], pl)
        if not np.all(np.isfinite(r)):
            raise StepRejected("non-finite outer residual")
        drds = 1.0 + np.einsum("pk,pk->p", drdsig.reshape(-1, 9), Ss)
        # r carries terms of size |s|, so its rounding floor grows with |s|
        tol_r = st.tol_external * (1.0 + np.abs(s[act]))
        conv = np.abs(r) <= tol_r
        finished = (polish[act] & conv) | (np.abs(r) <= 1e-3 * tol_r)
        if np.any(finished):
            idx = act[finished]
            done[idx] = True
            fin_ent = np.flatnonzero(np.repeat(finished, N))
            for name, v in (("sig_tot", sig_tot), ("drdsig", drdsig), ("drda", drda),
                            ("abar", abar), ("Ss", Ss), ("drds", drds)):
                keep.setdefault(name, np.empty((P,) + v.shape[1:]))[idx] = v[finished]
            for name in _KEEP + ("Y",):
                v = Y if name == "Y" else inner[name]
                keep.setdefault("m_" + name, np.empty((P * N,) + v.shape[1:]))[ent[fin_ent]] = v[fin_ent]
        step = ~finished
        if not np.any(step):
            break
        if k == st.max_iter_external:
            raise StepRejected("outer Newton did not converge")
        idx = act[step]
        rs, ss = r[step], s[idx]
        hi[idx] = np.where(rs > 0, np.minimum(hi[idx], ss), hi[idx])
        lo[idx] = np.where(rs < 0, np.maximum(lo[idx], ss), lo[idx])
        d = drds[step]
        ds = np.where(d > 0, -rs / np.where(d > 0, d, 1.0), -np.sign(rs) * MAX_S_STEP)
        ds = np.clip(ds, -MAX_S_STEP, MAX_S_STEP)
        snew = ss + ds
        bracketed = np.isfinite(lo[idx]) & np.isfinite(hi[idx])
        outside = (snew <= lo[idx]) | (snew >= hi[idx])
        snew = np.where(bracketed & outside & ~conv[step], 0.5 * (lo[idx] + hi[idx]), snew)
        # warm start the inner loop with the linearized response to ds
        e_step = (idx[:, None] * N + np.arange(N)).reshape(-1)
        loc = np.flatnonzero(np.repeat(step, N))
        Fp[e_step] += (Y[loc] * np.repeat(snew - ss, N)[:, None]).reshape(-1, 3, 3)
        s[idx] = snew
        it_ext[idx] += 1
        polish[idx[conv[step]]] = True
        act = idx

    Fp = Fp.reshape(P, N, 3, 3)
    out = dict(sigma=keep["sig_tot"], Fp=Fp, s=s.copy(), iter_external=it_ext, iter_internal=it_int)
    c = keep["m_c"].reshape(P, N)
    # from the invariants rather than sqrt(H:S), which loses the fiber-stress cancellation
    seq = inv.equivalent_stress(keep["m_S"], keep["m_ah"], pl.alpha2)
    out["plastic_rate"] = seq.reshape(P, N) * 2.0 / (c * dt)
    out["tangent"] = _tangent(keep, modes, a0f, acur, N) if tangent else None
    return out


def _tangent(keep, modes, a0f, acur, N):
    """Consistent tangent ``d sigma / dF`` through the nested solution."""
    Fpinv = keep["m_Fpinv"]
    dFedF = tm.as_mat(tm.left_right(np.broadcast_to(tm.I3, Fpinv.shape), Fpinv))
    M = Fpinv.shape[0]
    dadF = np.einsum("mk,pl->pmkl", tm.I3, a0f).reshape(M, 3, 9)
    Fe, Feinv = keep["m_Fe"], keep["m_Feinv"]
    dsig_da = he.dstress_da(Fe, keep["m_a"], modes.hp(slice(None)))
    dSda = np.einsum("...mi,...mnq,...jn->...ijq", Fe, dsig_da, Feinv, optimize=True)
    dSda = (0.5 * (dSda + np.swapaxes(dSda, -2, -3))).reshape(M, 9, 3)
    dRdF = -keep["m_dHdS"] @ (keep["m_dSdFe"] @ dFedF + dSda @ dadF)
    X = -np.linalg.solve(keep["m_J"], dRdF)
    dsdFe = keep["m_dsig"]
    Sfix_m = dsdFe @ (dFedF + keep["m_dFedFp"] @ X) + dsig_da.reshape(M, 9, 3) @ dadF
    Sfix = Sfix_m.reshape(-1, N, 9, 9).sum(axis=1)
    Ss = keep["Ss"]
    P = Sfix.shape[0]
    nrm = np.linalg.norm(acur, axis=-1)
    abar = keep["abar"]
    dabar = np.einsum("pqk,pl->pqkl", tm.I3 - tm.outer(abar, abar), a0f.reshape(P, N, 3)[:, 0]) / nrm[:, None, None, None]
    num = (np.einsum("pk,pkl->pl", keep["drdsig"].reshape(P, 9), Sfix)
           + np.einsum("pq,pql->pl", keep["drda"], dabar.reshape(P, 3, 9)))
    dsdF = -num / keep["drds"][:, None]
    return tm.as_t4(Sfix + Ss[:, :, None] * dsdF[:, None, :])


def _elastic_only(F, Fp0, s0, a0, params, modes, tangent):
    P, N = Fp0.shape[:2]
    Fpinv = tm.inv(Fp0)
    Fe = F[:, None] @ Fpinv
    a = np.einsum("pij,pj->pi", F, a0)[:, None, :]
    hp = params.hyper
    sig = he.cauchy_stress(Fe, a, hp).sum(axis=1)
    out = dict(sigma=sig, Fp=Fp0.copy(), s=s0.copy(), iter_external=np.zeros(P, int),
               iter_internal=np.zeros(P, int), plastic_rate=np.zeros((P, N)), tangent=None)
    if tangent:
        dsig = he.dstress_dFe(Fe, a, hp)
        dFedF = tm.left_right(np.broadcast_to(tm.I3, Fpinv.shape), Fpinv)
        dsa = he.dstress_da(Fe, a, hp)
        T4 = tm.compose(dsig, dFedF) + np.einsum("pnijm,pl->pnijml", dsa, a0)
        out["tangent"] = T4.sum(axis=1)
    return out


def update(F, state: MaterialState, dt, params: MaterialParams,
           settings: SolverSettings | None = None, tangent=True) -> StressUpdateResult:
    """Stress update of a single material point (see :func:`integrate`)."""
    F = np.asarray(F, dtype=float)
    res = integrate(F[None], state.Fp[None], np.array([state.log_a_sigma]), state.a0, dt,
                    params, settings, tangent=tangent)
    Fp = res["Fp"][0]
    new = MaterialState(Fp, float(res["s"][0]), state.a0, state.time + dt)
    b = Fp @ state.a0
    diag = UpdateDiagnostics(
        int(res["iter_external"][0]), int(res["iter_internal"][0]),
        float(np.abs(tm.det(Fp) - 1.0).max()),
        float(np.abs(np.linalg.norm(b, axis=-1) - 1.0).max()),
        res["plastic_rate"][0])
    T = res["tangent"][0] if tangent else None
    return StressUpdateResult(res["sigma"][0], T, new, diag)

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tivisco import hyperelastic as he
from tivisco import invariants as inv
from tivisco import tensor_math as tm
from tivisco.errors import ConfigError, InvalidMaterialError, StepRejected
from tivisco.material import (MaterialState, PlasticParams, RelaxationSpectrum, SolverSettings,
                              integrate, log_x_over_sinh, psi, shift_factor, update)

from conftest import fiber, random_rotation

NUMPY = SolverSettings(backend="numpy")


def loaded_state(params, theta0, strain, dt, rng=None, shear=0.0):
    """One material point stretched along e1 in a single increment."""
    F = np.eye(3)
    F[0, 0] += strain
    F[1, 1] -= 0.3 * strain
    F[2, 2] -= 0.3 * strain
    F[1, 0] = shear
    if rng is not None:
        F = F + 1e-3 * rng.standard_normal((3, 3))
    N = params.n_modes
    return F, np.broadcast_to(np.eye(3), (1, N, 3, 3)).copy(), np.zeros(1), fiber(theta0), dt


# --- scalar helpers ---------------------------------------------------------

def _ref_log_x_over_sinh(x):
    # -log1p(sinh(x)/x - 1) with the bracket summed term by term
    t, acc, k = 1.0, 0.0, 1
    while True:
        t *= x * x / ((2 * k) * (2 * k + 1))
        acc += t
        if t < 1e-18 * acc or k > 200:
            return -math.log1p(acc)
        k += 1


def _ref_psi(x):
    # (x cosh x - sinh x) / (x^2 sinh x), numerator as a series
    num, t, k = 0.0, x, 1
    while True:
        t *= x * x / ((2 * k) * (2 * k + 1))
        term = 2 * k * t
        num += term
        if term < 1e-18 * num or k > 200:
            return num / (x * x * math.sinh(x))
        k += 1


@pytest.mark.parametrize("x", [1e-6, 1e-3, 0.05, 0.299, 0.301, 1.0, 7.5, 20.0])
def test_log_x_over_sinh(x):
    assert log_x_over_sinh(x) == pytest.approx(_ref_log_x_over_sinh(x), rel=1e-13)


def test_log_x_over_sinh_large_argument():
    x = 900.0
    assert log_x_over_sinh(x) == pytest.approx(math.log(2 * x) - x, rel=1e-15)
    assert log_x_over_sinh(0.0) == 0.0


@pytest.mark.parametrize("x", [1e-6, 1e-3, 0.0999, 0.1001, 0.5, 3.0, 15.0])
def test_psi(x):
    assert psi(x) == pytest.approx(_ref_psi(x), rel=1e-13)


# --- parameter containers ---------------------------------------------------

def test_plastic_params_validation():
    with pytest.raises(InvalidMaterialError):
        PlasticParams(0.053, -1.0, 1e29, 1.1)
    with pytest.raises(InvalidMaterialError):
        PlasticParams(0.8, 1.0, 1e29, 1.1)
    with pytest.raises(InvalidMaterialError):
        PlasticParams(0.0, 1.0, 1e29, 0.0)


def test_shipped_spectrum(params):
    sp = params.spectrum
    assert sp.n_modes == 24
    assert (sp.m[-1], sp.eta0[-1]) == (0.292, 5.920e29)
    assert int(np.argmax(sp.eta0)) == 23
    assert abs(sp.m.sum() - 1.0) < 1e-3


def test_spectrum_round_trip(tmp_path, params):
    p = tmp_path / "s.csv"
    params.spectrum.to_csv(p)
    back = RelaxationSpectrum.from_csv(p)
    assert np.array_equal(back.m, params.spectrum.m)
    assert np.array_equal(back.eta0, params.spectrum.eta0)


@pytest.mark.parametrize("body, msg", [
    ("mode,m,eta0\n1,0.5,1e5\n2,0.5,0\n", "row 3"),
    ("mode,m,eta0\n1,0.5,1e5\n2,abc,1e6\n", "row 3"),
    ("mode,m,eta0\n1,0.5,1e5\n2,0.5\n", "row 3"),
    ("mode,m,eta0\n1,0.5,1e5\n2,0.4,1e6\n", "sum"),
    ("m,eta0\n0.5,1\n", "header"),
    ("mode,m,eta0\n", "no modes"),
])
def test_spectrum_parse_errors(tmp_path, body, msg):
    p = tmp_path / "bad.csv"
    p.write_text(body)
    with pytest.raises(ConfigError, match=msg):
        RelaxationSpectrum.from_csv(p)


def test_settings_validation():
    with pytest.raises(ConfigError):
        SolverSettings(backend="fortran")
    with pytest.raises(ConfigError):
        SolverSettings(fiber_eval="start")


# --- the update -------------------------------------------------------------

def test_zero_step_is_elastic(params):
    F, Fp0, s0, a0, _ = loaded_state(params, 30, 0.01, 0.0)
    r = integrate(F[None], Fp0, s0, a0, 0.0, params)
    hp = params.hyper
    sig = he.cauchy_stress(np.broadcast_to(F, (24, 3, 3)), np.broadcast_to(F @ a0, (24, 3)), hp).sum(0)
    assert np.allclose(r["sigma"][0], sig)
    assert np.array_equal(r["Fp"], Fp0)


def test_identity_gives_no_stress_and_no_flow(params):
    F, Fp0, s0, a0, dt = loaded_state(params, 45, 0.0, 1.0)
    r = integrate(F[None], Fp0, s0, a0, dt, params)
    assert np.abs(r["sigma"]).max() < 1e-10
    assert np.allclose(r["Fp"], Fp0, atol=1e-14)


@pytest.mark.parametrize("theta0, strain, dt", [(30, 0.02, 20.0), (90, -0.03, 30.0), (15, 0.012, 5.0)])
def test_compiled_kernel_matches_numpy_route(params, theta0, strain, dt):
    rng = np.random.default_rng(theta0)
    F, Fp0, s0, a0, dt = loaded_state(params, theta0, strain, dt, rng)
    rc = integrate(F[None], Fp0, s0, a0, dt, params)
    rn = integrate(F[None], Fp0, s0, a0, dt, params, NUMPY)
    for k in ("sigma", "Fp", "s", "tangent"):
        assert np.allclose(rc[k], rn[k], rtol=1e-10, atol=1e-12 * np.abs(rn[k]).max()), k
    assert np.array_equal(rc["iter_internal"], rn["iter_internal"])


def test_root_is_the_pade_update(params):
    """Converged Fp of every mode equals Pade(dt H/eta) Fp0 at the solved shift factor."""
    F, Fp0, s0, a0, dt = loaded_state(params, 30, 0.02, 20.0)
    r = integrate(F[None], Fp0, s0, a0, dt, params)
    Fp = r["Fp"][0]
    hp = params.hyper
    Fe = F @ tm.inv(Fp)
    a = F @ a0
    sig = he.cauchy_stress(Fe, np.broadcast_to(a, (24, 3)), hp)
    S = tm.sym(tm.T(Fe) @ sig @ tm.T(tm.inv(Fe)))
    b = (Fp + Fp0[0]) @ a0
    ah = b / np.linalg.norm(b, axis=1)[:, None]
    H = inv.flow_tensor(S, ah, params.plastic.alpha2)
    eta = params.spectrum.eta0 * np.exp(r["s"][0])
    D = H / eta[:, None, None]
    # rebuilding D from Fp amplifies rounding by dt E_i / eta_i; check the viscous modes
    ok = dt * params.stiffness_scale / eta < 1.0
    assert ok.sum() >= 8
    pade = tm.pade_exp(D[ok], dt) @ Fp0[0, ok]
    assert np.abs(pade - Fp[ok]).max() < 1e-10
    # the shift factor is that of the total stress and current fiber
    abar = a / np.linalg.norm(a)
    assert np.exp(r["s"][0]) == pytest.approx(float(shift_factor(r["sigma"][0], abar, params.plastic)), rel=1e-10)


def test_fiber_end_evaluation_differs_slightly(params):
    F, Fp0, s0, a0, dt = loaded_state(params, 30, 0.03, 30.0)
    rm = integrate(F[None], Fp0, s0, a0, dt, params)
    re = integrate(F[None], Fp0, s0, a0, dt, params, SolverSettings(fiber_eval="end"))
    rel = np.abs(rm["sigma"] - re["sigma"]).max() / np.abs(rm["sigma"]).max()
    assert 0 < rel < 1e-2


@pytest.mark.parametrize("backend", ["compiled", "numpy"])
def test_tangent_finite_difference(params, backend):
    st_ = SolverSettings(backend=backend)
    F, Fp0, s0, a0, dt = loaded_state(params, 15, 0.015, 15.0, np.random.default_rng(3))
    r = integrate(F[None], Fp0, s0, a0, dt, params, st_)

    def sig(X):
        return integrate(X[None], Fp0, s0, a0, dt, params, st_, tangent=False)["sigma"][0]

    fd = tm.finite_difference(sig, F, 1e-6)
    err = np.abs(r["tangent"][0] - fd).max() / np.abs(fd).max()
    assert err < 1e-6


def test_update_diagnostics(params):
    F, Fp0, s0, a0, dt = loaded_state(params, 45, 0.025, 25.0)
    state = MaterialState.initial(params.n_modes, a0)
    res = update(F, state, dt, params)
    assert res.diagnostics.det_fp_error < 1e-6
    assert res.state.time == dt
    assert res.diagnostics.iter_external >= 1
    assert res.tangent.shape == (3, 3, 3, 3)


def test_inverted_deformation_rejected(params):
    F = np.diag([1.0, 1.0, -1.0])
    with pytest.raises(StepRejected):
        integrate(F[None], np.broadcast_to(np.eye(3), (1, 24, 3, 3)), np.zeros(1), fiber(0), 1.0, params)


def test_batch_equals_individual_points(params):
    rng = np.random.default_rng(11)
    Fs, outs = [], []
    for th in (0, 20, 60):
        F, Fp0, s0, a0, dt = loaded_state(params, th, 0.02, 20.0, rng)
        Fs.append(F)
        outs.append(integrate(F[None], Fp0, s0, a0, dt, params))
    a0s = np.array([fiber(th) for th in (0, 20, 60)])
    Fp0 = np.broadcast_to(np.eye(3), (3, 24, 3, 3)).copy()
    rb = integrate(np.array(Fs), Fp0, np.zeros(3), a0s, 20.0, params)
    for i, o in enumerate(outs):
        assert np.allclose(rb["sigma"][i], o["sigma"][0], rtol=1e-12, atol=1e-10)


# --- symmetry ---------------------------------------------------------------

@settings(max_examples=8)
@given(st.integers(0, 10_000))
def test_objectivity_of_update(params1, seed):
    rng = np.random.default_rng(seed)
    F, Fp0, s0, a0, dt = loaded_state(params1, rng.uniform(0, 90), 0.02, 20.0, rng)
    Q = random_rotation(rng)
    r = integrate(F[None], Fp0, s0, a0, dt, params1)
    rq = integrate((Q @ F)[None], Fp0, s0, a0, dt, params1)
    s = r["sigma"][0]
    assert np.abs(rq["sigma"][0] - Q @ s @ Q.T).max() <= 1e-8 * np.abs(s).max()
    assert np.allclose(rq["Fp"], r["Fp"], atol=1e-10)


@settings(max_examples=8)
@given(st.integers(0, 10_000), st.floats(-np.pi, np.pi))
def test_transverse_isotropy_of_update(params1, seed, angle):
    rng = np.random.default_rng(seed)
    F, Fp0, s0, a0, dt = loaded_state(params1, rng.uniform(0, 90), 0.02, 20.0, rng)
    R = tm.rotation(a0, angle)
    r = integrate(F[None], Fp0, s0, a0, dt, params1)
    rr = integrate((F @ R.T)[None], Fp0, s0, a0, dt, params1)
    s = r["sigma"][0]
    assert np.abs(rr["sigma"][0] - s).max() <= 1e-8 * np.abs(s).max()


def test_fiber_direction_loading_does_not_flow(params):
    F, Fp0, s0, a0, dt = loaded_state(params, 0, 0.01, 10.0)
    F[1, 1] = F[2, 2] = 1.0 - 0.016 * 0.01
    r = integrate(F[None], Fp0, s0, a0, dt, params)
    assert r["plastic_rate"].max() < 1e-15

"""Identification of the four single-mode yield parameters.

The pipeline works on uniaxial stress-strain curves:

1. ``mu_p`` from transverse (90 deg) tension and compression at one rate;
2. ``sigma0`` and ``eta0`` from the slope and offset of an Eyring plot of
   transverse compression yield stresses at two or more rates;
3. ``alpha2`` from a 30 deg tension yield stress.

The closed forms follow from the exponential limit of the flow rule,
``rate = sigma0 / (2 eta0) q exp((seq - mu_p I3) / sigma0)``, with
``seq = q |sigma|`` and ``I3 = sigma sin^2(theta)`` at the moment of
yielding under small deformations.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.signal import savgol_filter

from .errors import CalibrationError, ConfigError, ExtractionError
from .invariants import equivalent_stress
from .material import PlasticParams

log = logging.getLogger(__name__)

SQRT_HALF = math.sqrt(0.5)


@dataclass(frozen=True)
class YieldPoint:
    strain_rate: float
    yield_stress: float
    mode: str = "tension"
    theta0: float = 90.0
    strain: float = float("nan")

    def __post_init__(self):
        if not self.yield_stress > 0 or not self.strain_rate > 0:
            raise CalibrationError("yield stress and strain rate magnitude must be positive")
        if self.mode not in ("tension", "compression"):
            raise CalibrationError(f"unknown mode {self.mode!r}")


@dataclass(frozen=True)
class YieldMethod:
    """Knee detection settings for :func:`extract_yield`.

    The curve is resampled on ``n_resample`` uniform strain points and its
    tangent taken from a Savitzky-Golay derivative (``window`` points,
    quadratic).  The post-yield slope ``m_t`` is either the smallest tangent
    on the curve (``terminal="min_tangent"``, robust to geometric stiffening
    after the knee and to knees close to the end of the record) or a least
    squares fit over the last ``terminal_fraction`` of the strain range
    (``terminal="fit"``).  The initial slope ``E0`` is a fit over the first
    ``initial_fraction``.  Yield is the first point where
    ``slope - m_t <= threshold (E0 - m_t)``.
    """

    terminal: str = "min_tangent"
    terminal_fraction: float = 0.2
    initial_fraction: float = 0.02
    threshold: float = 0.02
    n_resample: int = 501
    window: int = 11
    min_knee_drop: float = 0.5

    def __post_init__(self):
        if self.terminal not in ("min_tangent", "fit"):
            raise ConfigError(f"terminal must be 'min_tangent' or 'fit', got {self.terminal!r}")
        if not 0.0 < self.terminal_fraction < 1.0 or not 0.0 < self.initial_fraction < 1.0:
            raise ConfigError("terminal_fraction and initial_fraction must lie in (0, 1)")
        if not 0.0 < self.threshold < 1.0:
            raise ConfigError("threshold must lie in (0, 1)")


def _line_slope(x, y):
    return np.polyfit(x, y, 1)[0]


def extract_yield(curve, method: YieldMethod | None = None, *, rate=None, theta0=None) -> YieldPoint:
    """Locate the yield knee of a uniaxial curve.

    ``curve`` is a :class:`~tivisco.driver.CurveRecord` (true strain and
    stress are used) or a pair ``(strain, stress)``.  Compression curves are
    handled through their magnitudes.  ``rate`` and ``theta0`` default to the
    values implied by the record.

    Raises
    ------
    ExtractionError
        If the tangent never drops towards a post-yield line, e.g. for a
        curve truncated before yielding.
    """
    m = method or YieldMethod()
    if isinstance(curve, tuple):
        eps, sig = (np.asarray(v, dtype=float) for v in curve)
        t = None
    else:
        eps, sig, t = curve.eps_true, curve.sigma_true, curve.t
        if theta0 is None:
            theta0 = round(float(curve.theta[0]), 9)
    mode = "compression" if eps[-1] < 0 else "tension"
    eps, sig = np.abs(eps), np.abs(sig)
    if rate is None:
        if t is None or t[-1] <= 0:
            raise ExtractionError("strain rate must be given for bare arrays")
        rate = eps[-1] / t[-1]
    if eps.size < 3 or np.any(np.diff(eps) <= 0):
        raise ExtractionError("strain must be strictly monotone")

    x = np.linspace(eps[0], eps[-1], m.n_resample)
    y = np.interp(x, eps, sig)
    h = x[1] - x[0]
    w = min(m.window | 1, (m.n_resample - 1) | 1)
    slope = savgol_filter(y, w, 2, deriv=1, delta=h, mode="interp")

    ni = max(3, int(round(m.initial_fraction * m.n_resample)))
    E0 = _line_slope(x[:ni], y[:ni])
    if E0 <= 0:
        raise ExtractionError("non-positive initial slope")
    if m.terminal == "min_tangent":
        k0 = int(np.argmin(slope))
        mt = slope[k0]
    else:
        k0 = int(np.searchsorted(x, x[-1] - m.terminal_fraction * (x[-1] - x[0])))
        if x.size - k0 < 3:
            raise ExtractionError("no post-yield segment")
        mt = _line_slope(x[k0:], y[k0:])
    if mt > (1.0 - m.min_knee_drop) * E0:
        raise ExtractionError(f"no knee: terminal slope {mt:.4g} vs initial {E0:.4g}")
    hit = np.nonzero(slope[:k0 + 1] - mt <= m.threshold * (E0 - mt))[0]
    if m.terminal == "fit" and (hit.size == 0 or hit[0] >= k0):
        raise ExtractionError("tangent does not settle before the terminal segment")
    i = hit[0]
    return YieldPoint(float(rate), float(y[i]), mode, 90.0 if theta0 is None else float(theta0), float(x[i]))


# closed-form yield relations

def uniaxial_factor(theta0, alpha2):
    """``q = seq / |sigma|`` for uniaxial stress at angle ``theta0`` (deg) to the fiber."""
    th = np.radians(theta0)
    a = np.array([np.cos(th), np.sin(th), 0.0])
    S = np.zeros((3, 3))
    S[0, 0] = 1.0
    return float(equivalent_stress(S, a, alpha2))


def analytic_yield(theta0, rate, plastic: PlasticParams, mode="tension"):
    """Yield stress magnitude of a uniaxial test in the exponential limit."""
    q = uniaxial_factor(theta0, plastic.alpha2)
    if q <= 0:
        raise CalibrationError("fiber-direction loading does not yield")
    s2 = math.sin(math.radians(theta0)) ** 2
    sign = 1.0 if mode == "tension" else -1.0
    return plastic.sigma0 / (q + sign * plastic.mu_p * s2) * math.log(
        2.0 * plastic.eta0 * abs(rate) / (plastic.sigma0 * q))


def yield_90(rate, mu_p, sigma0, eta0, mode="tension"):
    mu = mu_p if mode == "tension" else -mu_p
    return sigma0 / (SQRT_HALF + mu) * math.log(2.0 * math.sqrt(2.0) * eta0 / sigma0 * abs(rate))


def yield_30t(rate, mu_p, sigma0, eta0, alpha2):
    r = math.sqrt(0.5 + 6.0 * alpha2)
    return 4.0 * sigma0 / (mu_p + r) * math.log(8.0 / r * eta0 / sigma0 * rate)


# parameter identification

def identify_mu_p(sy_t, sy_c):
    if sy_t <= 0 or sy_c <= 0:
        raise CalibrationError("yield stresses must be positive")
    if sy_c < sy_t:
        log.warning("compression yield below tension yield: negative mu_p")
    return SQRT_HALF * (sy_c - sy_t) / (sy_c + sy_t)


def fit_eyring(points, mu_p):
    """``(sigma0, eta0)`` from compression yield points at two or more rates."""
    rates = np.array([abs(p.strain_rate) for p in points], dtype=float)
    sy = np.array([p.yield_stress for p in points], dtype=float)
    if np.unique(rates).size < 2:
        raise CalibrationError("Eyring fit needs at least two distinct strain rates")
    lr = np.log10(rates)
    slope, icpt = np.polyfit(lr, sy, 1)
    if slope <= 0:
        raise CalibrationError(f"non-positive Eyring slope {slope:.4g}")
    sigma0 = slope * (SQRT_HALF - mu_p) / math.log(10.0)
    # log10 of eta0 implied by every point, averaged
    log_eta = np.log10(sigma0 / (2.0 * math.sqrt(2.0))) + sy / slope - lr
    return sigma0, float(10.0 ** log_eta.mean())


def eyring_residual(points, mu_p, sigma0, eta0):
    """Root-mean-square misfit of the fitted compression line (MPa)."""
    r = [p.yield_stress - yield_90(p.strain_rate, mu_p, sigma0, eta0, "compression") for p in points]
    return float(np.sqrt(np.mean(np.square(r))))


def solve_alpha2(sy_30t, rate, mu_p, sigma0, eta0, bracket=(0.0, 100.0), rtol=1e-12):
    def f(a2):
        return yield_30t(rate, mu_p, sigma0, eta0, a2) - sy_30t

    lo, hi = bracket
    flo, fhi = f(lo), f(hi)
    if flo * fhi > 0:
        raise CalibrationError(f"no alpha2 root in [{lo}, {hi}] for sigma_y = {sy_30t:.6g}")
    return brentq(f, lo, hi, xtol=1e-14, rtol=rtol)


@dataclass
class CalibrationResult:
    mu_p: float
    sigma0: float
    eta0: float
    alpha2: float
    fit_residual: float
    points: list = field(default_factory=list)

    @property
    def plastic(self):
        return PlasticParams(self.mu_p, self.sigma0, self.eta0, self.alpha2)

    def as_dict(self):
        d = asdict(self)
        d["points"] = [asdict(p) for p in self.points]
        return d

    def report(self):
        lines = [
            f"mu_p    = {self.mu_p:.6g}",
            f"sigma0  = {self.sigma0:.6g} MPa",
            f"eta0    = {self.eta0:.6g} MPa s",
            f"alpha2  = {self.alpha2:.6g}",
            f"eyring rms residual = {self.fit_residual:.3g} MPa",
            "",
            "theta0  mode         rate       sigma_y   strain",
        ]
        for p in self.points:
            lines.append(f"{p.theta0:6.1f}  {p.mode:<11} {p.strain_rate:9.3g}  {p.yield_stress:8.3f}  {p.strain:.5f}")
        return "\n".join(lines) + "\n"


def calibrate(points) -> CalibrationResult:
    """Run the identification on extracted yield points.

    Needs 90 deg tension and compression at a common rate, compression at two
    or more rates, and one 30 deg tension point.
    """
    points = list(points)
    t90 = {round(math.log10(p.strain_rate), 6): p for p in points
           if p.theta0 == 90 and p.mode == "tension"}
    c90 = [p for p in points if p.theta0 == 90 and p.mode == "compression"]
    t30 = [p for p in points if p.theta0 == 30 and p.mode == "tension"]
    missing = []
    common = [p for p in c90 if round(math.log10(p.strain_rate), 6) in t90]
    if not common:
        missing.append("90 deg tension and compression at a common rate")
    if len({p.strain_rate for p in c90}) < 2:
        missing.append("90 deg compression at two or more rates")
    if not t30:
        missing.append("30 deg tension")
    if missing:
        raise CalibrationError("missing curves: " + "; ".join(missing))
    mu = float(np.mean([identify_mu_p(t90[round(math.log10(p.strain_rate), 6)].yield_stress,
                                      p.yield_stress) for p in common]))
    sigma0, eta0 = fit_eyring(c90, mu)
    a2 = float(np.mean([solve_alpha2(p.yield_stress, p.strain_rate, mu, sigma0, eta0) for p in t30]))
    return CalibrationResult(mu, sigma0, eta0, a2, eyring_residual(c90, mu, sigma0, eta0), points)

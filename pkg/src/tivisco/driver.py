"""Single material point under uniaxial off-axis loading.

The load axis is ``e1`` and the fiber starts at angle ``theta0`` in the
1-2 plane.  Three components of ``F`` are pinned to remove the rigid
rotation.  The choice matters for the response because the spin it
implies rotates the fiber:

* ``"lower"`` (default): ``F12 = F13 = F23 = 0``.  Material lines initially
  normal to ``e1`` stay normal to it, as for a specimen whose loaded faces
  stay flat and perpendicular to the grips (a single element on rollers).
* ``"upper"``: ``F21 = F31 = F32 = 0``.  The ``e1`` material line stays on
  the load axis.

All stress components other than ``sigma_11`` are driven to zero by a
Newton loop on the free components of ``F`` that uses the consistent
tangent:

* strain control: ``F11 = exp(rate t)`` (constant true strain rate);
* creep control: the nominal stress ``P11`` follows a linear ramp to the
  target over ``ramp_time`` and is then held.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, fields

import numpy as np

from . import tensor_math as tm
from .errors import ConfigError, StepRejected, TivError
from .material import MaterialParams, MaterialState, SolverSettings, integrate

log = logging.getLogger(__name__)

# stress components forced to zero, and free components of F per gauge
_ZERO = [(1, 1), (2, 2), (0, 1), (0, 2), (1, 2)]
GAUGES = {
    "lower": [(1, 0), (2, 0), (1, 1), (2, 1), (2, 2)],
    "upper": [(0, 1), (0, 2), (1, 1), (1, 2), (2, 2)],
}


class IntegrationFailure(TivError):
    """The time step fell below its lower bound."""


@dataclass(frozen=True)
class LoadProgram:
    """Loading history of a material-point simulation.

    Parameters
    ----------
    kind : ``"strain"`` or ``"creep"``.
    theta0 : initial off-axis angle in degrees.
    rate : true strain rate (1/s), negative for compression.
    stress : creep target nominal stress (MPa).
    ramp_time : duration of the creep load ramp (s).
    duration : total simulated time (s).
    dt0 : initial (or fixed) time increment (s).
    adaptive : grow/cut the increment; fixed steps are still halved on failure
        but never grown beyond ``dt0``.
    dt_max : upper bound on the increment; ``None`` means ``dt0 * 20``.
    max_strain_step : strain programs also keep ``|rate| dt`` below this, so
        the recorded curve resolves the yield knee whatever the rate.
    gauge : ``"lower"`` or ``"upper"``, see the module docstring.
    """

    kind: str = "strain"
    theta0: float = 30.0
    rate: float = 1e-3
    stress: float = 0.0
    ramp_time: float = 10.0
    duration: float = 50.0
    dt0: float = 0.25
    adaptive: bool = True
    dt_max: float | None = None
    max_strain_step: float = 5e-4
    grow: float = 1.2
    grow_below: int = 5
    dt_min_fraction: float = 1e-6
    stress_tol: float = 1e-10
    max_iter: int = 25
    gauge: str = "lower"

    def __post_init__(self):
        if self.kind not in ("strain", "creep"):
            raise ConfigError("kind must be 'strain' or 'creep'")
        if self.gauge not in GAUGES:
            raise ConfigError(f"gauge must be one of {sorted(GAUGES)}")
        if self.duration <= 0 or self.dt0 <= 0 or self.max_strain_step <= 0:
            raise ConfigError("duration, dt0 and max_strain_step must be positive")
        if not -90.0 <= self.theta0 <= 90.0:
            raise ConfigError(f"theta0 = {self.theta0} outside [-90, 90] degrees")
        if self.kind == "creep" and self.ramp_time <= 0:
            raise ConfigError("ramp_time must be positive for creep")

    @property
    def a0(self):
        th = np.radians(self.theta0)
        return np.array([np.cos(th), np.sin(th), 0.0])

    @classmethod
    def strain_to(cls, strain, rate, **kw):
        """Constant true strain rate until ``|ln F11| = |strain|``."""
        return cls(kind="strain", rate=rate, duration=abs(strain / rate), **kw)

    def target(self, t):
        if self.kind == "strain":
            return np.exp(self.rate * t)
        return self.stress * min(t / self.ramp_time, 1.0)


_COLUMNS = ["t", "eps_true", "eps_eng", "sigma_true", "sigma_eng", "theta", "a_sigma",
            "detFp_worst", "fiber_norm_worst", "plastic_rate_max", "iter_global",
            "iter_external", "iter_internal", "dt"]


@dataclass
class CurveRecord:
    """Time series of a material-point run; one row per converged step."""

    t: np.ndarray = field(default_factory=lambda: np.zeros(0))
    eps_true: np.ndarray = field(default_factory=lambda: np.zeros(0))
    eps_eng: np.ndarray = field(default_factory=lambda: np.zeros(0))
    sigma_true: np.ndarray = field(default_factory=lambda: np.zeros(0))
    sigma_eng: np.ndarray = field(default_factory=lambda: np.zeros(0))
    theta: np.ndarray = field(default_factory=lambda: np.zeros(0))
    a_sigma: np.ndarray = field(default_factory=lambda: np.zeros(0))
    detFp_worst: np.ndarray = field(default_factory=lambda: np.zeros(0))
    fiber_norm_worst: np.ndarray = field(default_factory=lambda: np.zeros(0))
    plastic_rate_max: np.ndarray = field(default_factory=lambda: np.zeros(0))
    iter_global: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    iter_external: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    iter_internal: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    dt: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @classmethod
    def from_rows(cls, rows):
        cols = list(zip(*rows)) if rows else [[] for _ in _COLUMNS]
        kw = {}
        for name, col in zip(_COLUMNS, cols):
            dtype = int if name.startswith("iter_") else float
            kw[name] = np.array(col, dtype=dtype)
        return cls(**kw)

    def __len__(self):
        return self.t.size

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(_COLUMNS)
            for i in range(len(self)):
                w.writerow([repr(getattr(self, c)[i].item()) for c in _COLUMNS])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != _COLUMNS:
                raise ValueError(f"{path}: unexpected header")
            rows = [[int(v) if c.startswith("iter_") else float(v) for c, v in zip(header, r)]
                    for r in reader if r]
        return cls.from_rows(rows)

    def equals(self, other):
        return all(np.array_equal(getattr(self, f.name), getattr(other, f.name)) for f in fields(self))


class PointSimulator:
    """Runs a :class:`LoadProgram` on one material point."""

    def __init__(self, params: MaterialParams, settings: SolverSettings | None = None):
        self.params = params
        self.settings = settings or SolverSettings()

    def _step(self, prog, F_old, state, t_new, dt, F_guess):
        free = GAUGES[prog.gauge]
        if prog.kind == "creep":
            free = [(0, 0)] + free
        F = F_guess.copy()
        if prog.kind == "strain":
            F[0, 0] = prog.target(t_new)
        guess = None
        s0 = np.array([state.log_a_sigma])
        for it in range(1, prog.max_iter + 1):
            res = integrate(F[None], state.Fp[None], s0, state.a0, dt, self.params,
                            self.settings, guess=guess)
            guess = (res["Fp"], res["s"])
            sig = res["sigma"][0]
            T = res["tangent"][0]
            scale = max(1.0, np.abs(sig).max())
            r = [sig[i, j] for i, j in _ZERO]
            Jrows = [T[i, j] for i, j in _ZERO]
            if prog.kind == "creep":
                P, dP = tm.first_piola(F, sig, T)
                r.insert(0, P[0, 0] - prog.target(t_new))
                Jrows.insert(0, dP[0, 0])
            r = np.array(r)
            if not np.all(np.isfinite(r)):
                raise StepRejected("non-finite stress")
            conv = np.abs(r).max() <= prog.stress_tol * scale
            Jm = np.array([[row[k, l] for k, l in free] for row in Jrows])
            du = np.linalg.solve(Jm, -r)
            if conv:
                return F, res, it
            if np.abs(du).max() > 0.1:
                du *= 0.1 / np.abs(du).max()
            for (k, l), d in zip(free, du):
                F[k, l] += d
        raise StepRejected("global Newton did not converge")

    def run(self, prog: LoadProgram, record_every=1, observer=None) -> CurveRecord:
        """Integrate the program to its end time and return the curve.

        ``observer(F_new, old_state, new_state, dt, res)`` is called after
        every accepted step, ``res`` being the raw :func:`integrate` output.
        """
        N = self.params.n_modes
        state = MaterialState.initial(N, prog.a0)
        F = np.eye(3)
        F_prev, dt_prev = F, None
        t = 0.0
        dt = prog.dt0
        dt_max = prog.dt_max if prog.dt_max is not None else (20.0 * prog.dt0 if prog.adaptive else prog.dt0)
        if prog.kind == "strain" and prog.adaptive and prog.rate != 0.0:
            dt_max = min(dt_max, prog.max_strain_step / abs(prog.rate))
        dt_min = prog.dt_min_fraction * prog.duration
        rows = [self._row(0.0, F, np.zeros((3, 3)), state, np.zeros(N), (0, 0, 0), 0.0)]
        n = 0
        while t < prog.duration * (1 - 1e-12):
            dt = min(dt, prog.duration - t)
            if prog.kind == "creep" and t < prog.ramp_time:
                dt = min(dt, prog.ramp_time - t)
            # linear extrapolation of the free components
            F_guess = F + (F - F_prev) * (dt / dt_prev) if dt_prev else F.copy()
            try:
                F_new, res, it = self._step(prog, F, state, t + dt, dt, F_guess)
            except (StepRejected, np.linalg.LinAlgError, TivError) as exc:
                dt *= 0.5
                log.debug("step rejected at t=%g (%s); dt -> %g", t, exc, dt)
                if dt < dt_min:
                    raise IntegrationFailure(f"time step underflow at t={t:g}") from exc
                continue
            t += dt
            Fp = res["Fp"][0]
            old, state = state, MaterialState(Fp, float(res["s"][0]), state.a0, t)
            if observer is not None:
                observer(F_new, old, state, dt, res)
            F_prev, F, dt_prev = F, F_new, dt
            n += 1
            if n % record_every == 0 or t >= prog.duration * (1 - 1e-12):
                iters = (it, int(res["iter_external"][0]), int(res["iter_internal"][0]))
                rows.append(self._row(t, F, res["sigma"][0], state,
                                      res["plastic_rate"][0], iters, dt))
            if prog.adaptive and it <= prog.grow_below and res["iter_external"][0] <= prog.grow_below:
                dt = min(dt * prog.grow, dt_max)
            elif not prog.adaptive:
                dt = min(dt * prog.grow, prog.dt0)
        return CurveRecord.from_rows(rows)

    @staticmethod
    def _row(t, F, sig, state, rate, iters, dt):
        P = tm.first_piola(F, sig)
        a = F @ state.a0
        abar = a / np.linalg.norm(a)
        theta = np.degrees(np.arctan2(np.linalg.norm(abar[1:]), abs(abar[0])))
        b = state.Fp @ state.a0
        return (t, np.log(F[0, 0]), F[0, 0] - 1.0, sig[0, 0], P[0, 0], theta, state.a_sigma,
                float(np.abs(tm.det(state.Fp) - 1.0).max()),
                float(np.abs(np.linalg.norm(b, axis=-1) - 1.0).max()),
                float(np.max(rate)) if np.size(rate) else 0.0, *iters, dt)


def simulate(params, prog, settings=None):
    return PointSimulator(params, settings).run(prog)

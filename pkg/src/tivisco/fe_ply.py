"""Implicit total-Lagrangian hexahedral solver for a unidirectional ply strip.

Eight-node trilinear bricks with 2x2x2 Gauss quadrature on a structured
grid.  Node ``(i, j, k)`` of an ``nx x ny x nz`` grid has number
``i + (nx + 1) (j + (ny + 1) k)``; element corners follow the usual
counter-clockwise order, bottom face (``z = 0``) first.  Dof ``3 n + c``
is displacement component ``c`` of node ``n``.

The material update of all Gauss points runs as one batch through
:func:`tivisco.material.integrate`; the global Newton loop uses the
consistent tangent and a sparse LU factorization of the nonsymmetric
stiffness.
"""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import tensor_math as tm
from .errors import ConfigError, InvalidDeformationError, SingularTensorError, StepRejected, TivError
from .material import MaterialParams, SolverSettings, integrate

log = logging.getLogger(__name__)

_CORNERS = np.array([[-1, -1, -1], [1, -1, -1], [1, 1, -1], [-1, 1, -1],
                     [-1, -1, 1], [1, -1, 1], [1, 1, 1], [-1, 1, 1]], dtype=float)
_GAUSS = _CORNERS / np.sqrt(3.0)


class NewtonFailure(TivError):
    """The global Newton loop did not converge even after increment cuts."""


@dataclass(frozen=True)
class PlyProblem:
    """Geometry, loading and discretization of the strip test (mm, s).

    ``bc = "grips"`` clamps ``u2 = u3 = 0`` on both end faces with ``u1 = 0``
    at ``x = 0`` and ``u1`` prescribed at ``x = length``.  ``bc = "rollers"``
    only prescribes ``u1`` on the end faces and removes rigid motion with
    three point constraints, which gives a homogeneous uniaxial stress state
    on a regular mesh.
    """

    length: float = 120.0
    width: float = 15.0
    thickness: float = 1.8
    theta0: float = 15.0
    rate: float = 1e-4
    final_strain: float = 0.03
    strain_step: float = 2.5e-4
    nx: int = 20
    ny: int = 6
    nz: int = 2
    bc: str = "grips"
    newton_tol: float = 1e-8
    max_newton: int = 15
    max_cuts: int = 6

    def __post_init__(self):
        if min(self.length, self.width, self.thickness) <= 0:
            raise ConfigError("ply dimensions must be positive")
        if min(self.nx, self.ny, self.nz) < 1:
            raise ConfigError("subdivision counts must be at least 1")
        if not -90.0 <= self.theta0 <= 90.0:
            raise ConfigError(f"theta0 = {self.theta0} outside [-90, 90] degrees")
        if self.rate <= 0 or self.strain_step <= 0 or self.final_strain <= 0:
            raise ConfigError("rate, strain_step and final_strain must be positive")
        if self.bc not in ("grips", "rollers"):
            raise ConfigError("bc must be 'grips' or 'rollers'")

    @property
    def a0(self):
        th = np.radians(self.theta0)
        return np.array([np.cos(th), np.sin(th), 0.0])

    @property
    def area(self):
        return self.width * self.thickness


@dataclass
class Mesh:
    nodes: np.ndarray
    elements: np.ndarray
    shape: tuple

    @property
    def n_elements(self):
        return self.elements.shape[0]

    @property
    def n_nodes(self):
        return self.nodes.shape[0]


def build_ply_mesh(problem: PlyProblem) -> Mesh:
    nx, ny, nz = problem.nx, problem.ny, problem.nz
    x = np.linspace(0.0, problem.length, nx + 1)
    y = np.linspace(0.0, problem.width, ny + 1)
    z = np.linspace(0.0, problem.thickness, nz + 1)
    Z, Y, X = np.meshgrid(z, y, x, indexing="ij")
    nodes = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])

    def nid(i, j, k):
        return i + (nx + 1) * (j + (ny + 1) * k)

    k, j, i = np.meshgrid(np.arange(nz), np.arange(ny), np.arange(nx), indexing="ij")
    i, j, k = i.ravel(), j.ravel(), k.ravel()
    elements = np.column_stack([nid(i, j, k), nid(i + 1, j, k), nid(i + 1, j + 1, k), nid(i, j + 1, k),
                                nid(i, j, k + 1), nid(i + 1, j, k + 1), nid(i + 1, j + 1, k + 1),
                                nid(i, j + 1, k + 1)])
    return Mesh(nodes, elements, (nx, ny, nz))


def shape_gradients(xi):
    """``dN_a/dxi`` of the trilinear brick at natural points ``xi`` (G, 3) -> (G, 8, 3)."""
    xi = np.atleast_2d(xi)
    f = 1.0 + xi[:, None, :] * _CORNERS[None]
    d = np.empty(f.shape)
    d[..., 0] = _CORNERS[:, 0] * f[..., 1] * f[..., 2]
    d[..., 1] = _CORNERS[:, 1] * f[..., 0] * f[..., 2]
    d[..., 2] = _CORNERS[:, 2] * f[..., 0] * f[..., 1]
    return d / 8.0


class PlyModel:
    """Discrete operators of a mesh for a given material."""

    def __init__(self, mesh: Mesh, params: MaterialParams, a0, settings: SolverSettings | None = None):
        self.mesh = mesh
        self.params = params
        self.settings = settings or SolverSettings()
        self.a0 = np.asarray(a0, dtype=float)
        Xe = mesh.nodes[mesh.elements]                       # (E, 8, 3)
        dNdxi = shape_gradients(_GAUSS)                      # (G, 8, 3)
        J0 = np.einsum("gai,eaj->egji", dNdxi, Xe)           # dX_j/dxi_i
        det0 = tm.det(J0)
        if np.any(det0 <= 0):
            raise InvalidDeformationError("reference mesh has a non-positive Jacobian")
        self.dNdX = np.einsum("gai,egij->egaj", dNdxi, tm.inv(J0))
        self.wdet = det0                                      # unit Gauss weights
        self.n_gauss = mesh.n_elements * 8
        dofs = (3 * mesh.elements[:, :, None] + np.arange(3)).reshape(-1, 24)
        self.edofs = dofs
        self.rows = np.repeat(dofs, 24, axis=1).ravel()
        self.cols = np.tile(dofs, (1, 24)).ravel()
        self.n_dof = 3 * mesh.n_nodes

    def deformation(self, u):
        ue = u[self.edofs].reshape(-1, 8, 3)
        return tm.I3 + np.einsum("eai,egaj->egij", ue, self.dNdX).reshape(-1, 3, 3)

    def assemble(self, u, Fp0, s0, dt, guess=None, tangent=True):
        """Internal force, tangent stiffness and the trial material state.

        Raises
        ------
        StepRejected
            On a non-positive ``det F`` or a failed material update.
        """
        F = self.deformation(u)
        if np.any(~(tm.det(F) > 0)):
            raise StepRejected("non-positive det F at a Gauss point")
        res = integrate(F, Fp0, s0, self.a0, dt, self.params, self.settings, guess=guess, tangent=tangent)
        E = self.mesh.n_elements
        P, dP = tm.first_piola(F, res["sigma"], res["tangent"]) if tangent else (tm.first_piola(F, res["sigma"]), None)
        P = P.reshape(E, 8, 3, 3) * self.wdet[..., None, None]
        fe = np.einsum("egiJ,egaJ->eai", P, self.dNdX).reshape(E, 24)
        f = np.bincount(self.edofs.ravel(), weights=fe.ravel(), minlength=self.n_dof)
        K = None
        if tangent:
            dP = dP.reshape(E, 8, 3, 3, 3, 3) * self.wdet[..., None, None, None, None]
            G = np.einsum("egiJkL,egbL->egiJbk", dP, self.dNdX, optimize=True)
            Ke = np.einsum("egaJ,egiJbk->eaibk", self.dNdX, G, optimize=True).reshape(E, 24 * 24)
            K = sp.csc_matrix((Ke.ravel(), (self.rows, self.cols)), shape=(self.n_dof, self.n_dof))
        return f, K, res


def boundary_dofs(mesh: Mesh, problem: PlyProblem):
    """``(fixed_dofs, loaded_dofs)``: zero-displacement dofs and the ``u1`` dofs at ``x = L``."""
    X = mesh.nodes
    tol = 1e-9 * problem.length
    left = np.flatnonzero(np.abs(X[:, 0]) < tol)
    right = np.flatnonzero(np.abs(X[:, 0] - problem.length) < tol)
    loaded = 3 * right
    if problem.bc == "grips":
        fixed = np.concatenate([3 * left, 3 * left + 1, 3 * left + 2, 3 * right + 1, 3 * right + 2])
    else:
        origin = np.flatnonzero(np.all(np.abs(X) < tol, axis=1))
        top = np.flatnonzero((np.abs(X[:, 0]) < tol) & (np.abs(X[:, 1]) < tol)
                             & (np.abs(X[:, 2] - problem.thickness) < tol))
        fixed = np.concatenate([3 * left, 3 * origin + 1, 3 * origin + 2, 3 * top + 1])
    return np.unique(fixed), loaded


@dataclass
class PlyResult:
    time: np.ndarray
    eps_eng: np.ndarray
    sigma_eng: np.ndarray
    iterations: np.ndarray
    snapshots: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "eps_eng", "sigma_eng", "iterations"])
            for row in zip(self.time, self.eps_eng, self.sigma_eng, self.iterations):
                w.writerow([repr(float(row[0])), repr(float(row[1])), repr(float(row[2])), int(row[3])])


def element_fields(model: PlyModel, u, Fp):
    """Per element: centroid, current off-axis angle and ``Fp_11`` of the stiffest-viscosity mode."""
    mesh = model.mesh
    E = mesh.n_elements
    F = model.deformation(u).reshape(E, 8, 3, 3)
    a = np.einsum("egij,j->egi", F, model.a0).mean(axis=1)
    theta = np.degrees(np.arctan2(np.linalg.norm(a[:, 1:], axis=1), np.abs(a[:, 0])))
    k = int(np.argmax(model.params.spectrum.eta0))
    fp11 = Fp.reshape(E, 8, -1, 3, 3)[:, :, k, 0, 0].mean(axis=1)
    centroid = mesh.nodes[mesh.elements].mean(axis=1)
    return np.column_stack([np.arange(E), centroid, theta, fp11])


def write_fields(path, fields):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["element", "x", "y", "z", "theta", "Fp11"])
        for r in fields:
            w.writerow([int(r[0])] + [repr(float(v)) for v in r[1:]])


def _newton(model, u, free, fixed_mask, Fp0, s0, dt, guess, tol, max_iter):
    """Equilibrate the free dofs; returns ``(u, f, res, iterations)``."""
    for it in range(1, max_iter + 1):
        f, K, res = model.assemble(u, Fp0, s0, dt, guess)
        guess = (res["Fp"], res["s"])
        r = f[free]
        # reference: the reaction forces of the current iterate
        ref = max(np.linalg.norm(f[fixed_mask]), 1.0)
        if np.linalg.norm(r) <= tol * ref:
            return u, f, res, it
        try:
            lu = splu(K[free][:, free].tocsc())
        except RuntimeError as exc:
            raise StepRejected(f"singular tangent: {exc}") from None
        du = lu.solve(-r)
        if not np.all(np.isfinite(du)):
            raise StepRejected("non-finite displacement correction")
        u = u.copy()
        u[free] += du
    raise StepRejected("global Newton did not converge")


def solve_ply(problem: PlyProblem, params: MaterialParams, settings: SolverSettings | None = None,
              snapshot_strains=(), callback=None) -> PlyResult:
    """Displacement-controlled run of the strip to ``final_strain``.

    ``snapshot_strains`` lists engineering strains at which element fields
    are stored (the nearest converged step at or beyond each value).
    """
    mesh = build_ply_mesh(problem)
    model = PlyModel(mesh, params, problem.a0, settings)
    fixed, loaded = boundary_dofs(mesh, problem)
    constrained = np.union1d(fixed, loaded)
    free = np.setdiff1d(np.arange(model.n_dof), constrained)
    fixed_mask = np.zeros(model.n_dof, dtype=bool)
    fixed_mask[constrained] = True

    N = params.n_modes
    P = model.n_gauss
    Fp = np.broadcast_to(tm.I3, (P, N, 3, 3)).copy()
    s = np.zeros(P)
    u = np.zeros(model.n_dof)
    du_prev = None
    Fp_prev, s_prev = None, None
    L = problem.length
    strain, t = 0.0, 0.0
    rows = [(0.0, 0.0, 0.0, 0)]
    snaps = {}
    pending = sorted(snapshot_strains)
    step = problem.strain_step
    t_start = time.perf_counter()
    while strain < problem.final_strain * (1 - 1e-12):
        d_eps = min(step, problem.final_strain - strain)
        dt = d_eps / problem.rate
        # predictor: extrapolate displacement and plastic state from the last increment
        u_try = u.copy()
        guess = None
        if du_prev is not None:
            ratio = d_eps / du_prev[1]
            u_try += ratio * du_prev[0]
            guess = (Fp + ratio * (Fp - Fp_prev), s + ratio * (s - s_prev))
        u_try[loaded] = (strain + d_eps) * L
        try:
            u_new, f, res, its = _newton(model, u_try, free, fixed_mask, Fp, s, dt, guess,
                                         problem.newton_tol, problem.max_newton)
        except (StepRejected, SingularTensorError, InvalidDeformationError) as exc:
            step *= 0.5
            log.info("increment cut at eps=%.5f (%s); step -> %.3g", strain, exc, step)
            if step < problem.strain_step / 2 ** problem.max_cuts:
                raise NewtonFailure(f"no convergence at eng strain {strain:.5f}") from exc
            continue
        du_prev = (u_new - u, d_eps)
        Fp_prev, s_prev = Fp, s
        u, Fp, s = u_new, res["Fp"], res["s"]
        strain += d_eps
        t += dt
        force = f[loaded].sum()
        rows.append((t, strain, force / problem.area, its))
        log.info("eps=%.5f sigma=%.3f iters=%d", strain, force / problem.area, its)
        while pending and strain >= pending[0] - 1e-12:
            snaps[pending.pop(0)] = element_fields(model, u, Fp)
        if callback is not None:
            callback(strain, force / problem.area, its)
        step = min(problem.strain_step, step * 2.0)
    arr = np.array(rows)
    return PlyResult(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3].astype(int), snaps,
                     time.perf_counter() - t_start)

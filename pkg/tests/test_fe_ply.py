from dataclasses import dataclass

import numpy as np
import pytest

from tivisco import tensor_math as tm
from tivisco.driver import LoadProgram, PointSimulator
from tivisco.errors import ConfigError
from tivisco.fe_ply import (PlyModel, PlyProblem, boundary_dofs, build_ply_mesh, element_fields,
                            shape_gradients, solve_ply, write_fields)


def virgin(model, params):
    P = model.n_gauss
    return np.broadcast_to(np.eye(3), (P, params.n_modes, 3, 3)).copy(), np.zeros(P)


def test_default_mesh_has_240_elements():
    mesh = build_ply_mesh(PlyProblem())
    assert mesh.n_elements == 240
    assert mesh.n_nodes == 21 * 7 * 3
    assert np.allclose(mesh.nodes.max(axis=0), [120.0, 15.0, 1.8])


def test_single_element_mesh():
    mesh = build_ply_mesh(PlyProblem(nx=1, ny=1, nz=1))
    assert mesh.n_elements == 1 and mesh.n_nodes == 8


@pytest.mark.parametrize("kw", [dict(length=-1.0), dict(nx=0), dict(theta0=200.0), dict(bc="glue"),
                                dict(rate=0.0)])
def test_problem_validation(kw):
    with pytest.raises(ConfigError):
        PlyProblem(**kw)


def test_shape_functions_partition_of_unity():
    rng = np.random.default_rng(0)
    xi = rng.uniform(-1, 1, (5, 3))
    assert np.allclose(shape_gradients(xi).sum(axis=1), 0.0)


def test_zero_displacement_zero_residual(params):
    pb = PlyProblem(nx=2, ny=1, nz=1)
    model = PlyModel(build_ply_mesh(pb), params, pb.a0)
    Fp, s = virgin(model, params)
    f, _, _ = model.assemble(np.zeros(model.n_dof), Fp, s, 1.0)
    # rounding only: nodal forces of order E22 * element volume / length
    L = np.ptp(model.mesh.nodes, axis=0)
    assert np.abs(f).max() < 1e-14 * params.elastic.E22 * L.max() ** 2


def test_affine_displacement_gives_uniform_F(params1):
    pb = PlyProblem(nx=3, ny=2, nz=2)
    mesh = build_ply_mesh(pb)
    model = PlyModel(mesh, params1, pb.a0)
    G = np.random.default_rng(1).normal(scale=0.01, size=(3, 3))
    u = (mesh.nodes @ G.T).ravel()
    assert np.abs(model.deformation(u) - (np.eye(3) + G)).max() < 1e-14


def test_tangent_matches_finite_differences(params):
    pb = PlyProblem(nx=2, ny=1, nz=1, theta0=30.0)
    mesh = build_ply_mesh(pb)
    model = PlyModel(mesh, params, pb.a0)
    Fp, s = virgin(model, params)
    rng = np.random.default_rng(2)
    u = (mesh.nodes @ np.diag([0.012, -0.004, -0.004])).ravel() + 1e-3 * rng.standard_normal(model.n_dof)
    dt = 10.0
    _, K, _ = model.assemble(u, Fp, s, dt)
    K = K.toarray()
    h = 1e-6
    fd = np.empty_like(K)
    for j in range(model.n_dof):
        up, um = u.copy(), u.copy()
        up[j] += h
        um[j] -= h
        fd[:, j] = (model.assemble(up, Fp, s, dt, tangent=False)[0]
                    - model.assemble(um, Fp, s, dt, tangent=False)[0]) / (2 * h)
    assert np.abs(K - fd).max() / np.abs(fd).max() < 1e-5


def test_rigid_translation_leaves_residual_unchanged(params):
    pb = PlyProblem(nx=2, ny=1, nz=1, theta0=15.0)
    mesh = build_ply_mesh(pb)
    model = PlyModel(mesh, params, pb.a0)
    Fp, s = virgin(model, params)
    u = (mesh.nodes @ np.diag([0.01, -0.003, -0.003])).ravel()
    f1 = model.assemble(u, Fp, s, 5.0, tangent=False)[0]
    f2 = model.assemble(u + np.tile([0.3, -1.2, 2.0], mesh.n_nodes), Fp, s, 5.0, tangent=False)[0]
    assert np.abs(f1 - f2).max() <= 1e-12 * np.abs(f1).max()


def test_boundary_sets(params):
    for bc in ("grips", "rollers"):
        pb = PlyProblem(nx=2, ny=2, nz=1, bc=bc)
        fixed, loaded = boundary_dofs(build_ply_mesh(pb), pb)
        assert np.intersect1d(fixed, loaded).size == 0
        assert loaded.size == 3 * 2


@dataclass(frozen=True)
class _EngStrain(LoadProgram):
    """Driver program following the ply's engineering strain history."""

    def target(self, t):
        return 1.0 + self.rate * t


def test_single_element_matches_material_point(params):
    pb = PlyProblem(length=1.0, width=1.0, thickness=1.0, nx=1, ny=1, nz=1, bc="rollers",
                    theta0=30.0, rate=1e-3, final_strain=0.02, strain_step=1e-3)
    res = solve_ply(pb, params)
    prog = _EngStrain(kind="strain", theta0=30.0, rate=1e-3, duration=20.0, dt0=1.0, adaptive=False,
                      gauge="lower")
    rec = PointSimulator(params).run(prog)
    assert np.allclose(res.eps_eng, rec.eps_eng, rtol=1e-12, atol=1e-15)
    assert np.abs(res.sigma_eng - rec.sigma_eng).max() <= 1e-8 * np.abs(rec.sigma_eng).max()


def test_grips_reactions_balance_and_fields(tmp_path, params):
    pb = PlyProblem(nx=4, ny=2, nz=1, theta0=15.0, rate=1e-4, final_strain=0.004, strain_step=1e-3)
    seen = []
    res = solve_ply(pb, params, snapshot_strains=(0.004,), callback=lambda e, s, i: seen.append(i))
    assert len(seen) == len(res.eps_eng) - 1
    assert np.all(np.diff(res.sigma_eng) > 0)
    fields = res.snapshots[0.004]
    assert fields.shape == (8, 6)
    write_fields(tmp_path / "f.csv", fields)
    assert (tmp_path / "f.csv").read_text().startswith("element,x,y,z,theta,Fp11\n")
    res.to_csv(tmp_path / "c.csv")
    assert (tmp_path / "c.csv").read_text().splitlines()[0] == "t,eps_eng,sigma_eng,iterations"


def test_reaction_equilibrium(params):
    pb = PlyProblem(nx=3, ny=1, nz=1, theta0=30.0)
    mesh = build_ply_mesh(pb)
    model = PlyModel(mesh, params, pb.a0)
    fixed, loaded = boundary_dofs(mesh, pb)
    res = solve_ply(PlyProblem(nx=3, ny=1, nz=1, theta0=30.0, final_strain=0.002, strain_step=1e-3), params)
    assert res.sigma_eng[-1] > 0
    # internal forces of any displacement field sum to zero (no body force)
    Fp, s = virgin(model, params)
    u = (mesh.nodes @ np.diag([0.002, -0.001, 0.0])).ravel()
    f = model.assemble(u, Fp, s, 1.0, tangent=False)[0].reshape(-1, 3)
    left = np.abs(mesh.nodes[:, 0]) < 1e-9
    right = np.abs(mesh.nodes[:, 0] - pb.length) < 1e-9
    assert abs(f[left, 0].sum() + f[right, 0].sum()) <= 1e-8 * abs(f[right, 0].sum())

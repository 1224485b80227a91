"""Reduced model: projection fidelity, equivalence oracles, online behavior."""

import numpy as np
import pytest

from cdrpipe.basis import apply_product, orthonormalize, pod
from cdrpipe.errors import SingularSystemError
from cdrpipe.fom import Grid1D, Parameter, assemble, qoi_error, solve_fom
from cdrpipe.io import load_reduced_model, save_reduced_model
from cdrpipe.rom import ReducedOperatorSet, project, reduced_operator_at, solve_rom


def full_free_basis(ops):
    """Orthonormalized identity on the free DoFs: projection is the identity."""
    return orthonormalize(np.eye(ops.num_free), ops.free_h1_product())


def test_full_basis_reproduces_fom_qoi():
    # oracle equivalence on a tiny grid: the ROM on the full free space is
    # the FOM in different coordinates
    ops = assemble(Grid1D(8))
    red = project(ops, full_free_basis(ops))
    rng = np.random.default_rng(17)
    for _ in range(10):
        mu = Parameter(*rng.random(2))
        f_h = solve_fom(ops, mu, 40, 1.5).qoi
        f_rb = solve_rom(red, mu, 40, 1.5)
        assert np.max(np.abs(f_rb - f_h)) < 1e-12


def test_single_mode_reduced_operators_are_rayleigh_quotients():
    ops = assemble(Grid1D(6))
    product = ops.free_h1_product()
    rng = np.random.default_rng(2)
    v = orthonormalize(rng.standard_normal((6, 1)), product)
    red = project(ops, v)
    w = v[:, 0]
    assert red.mass_r.shape == (1, 1)
    assert red.mass_r[0, 0] == pytest.approx(w @ ops.free_mass().matvec(w),
                                             rel=1e-12)
    assert red.a_conv_r[0, 0] == pytest.approx(
        w @ ops.a_conv.restrict(1).matvec(w), rel=1e-12, abs=1e-15)
    assert red.qoi_r[0] == pytest.approx(w[-1], rel=1e-12)


def test_projection_matches_projected_matrices_on_random_vectors():
    ops = assemble(Grid1D(20))
    snaps, product = _snapshots(ops)
    rb = pod(snaps, product, tol=1e-8)
    red = project(ops, rb)
    v = rb.basis
    rng = np.random.default_rng(8)
    for tri, mat_r in ((ops.mass, red.mass_r), (ops.a_diff, red.a_diff_r),
                       (ops.a_conv, red.a_conv_r), (ops.a_reac, red.a_reac_r)):
        x = rng.standard_normal(red.num_modes)
        assert np.allclose(mat_r @ x, v.T @ tri.restrict(1).matvec(v @ x),
                           rtol=1e-12, atol=1e-14)
    assert red.qoi_lift_offset == 0.0
    assert np.allclose(red.init_r, 0.0)


def _snapshots(ops, mus=(Parameter(0.2, 0.2), Parameter(0.9, 0.8))):
    snaps = np.hstack([solve_fom(ops, mu, 48, 3.0).states[1:, :]
                       for mu in mus])
    return snaps, ops.free_h1_product()


def test_reduced_mass_spd():
    ops = assemble(Grid1D(16))
    snaps, product = _snapshots(ops)
    red = project(ops, pod(snaps, product, tol=1e-6))
    assert np.allclose(red.mass_r, red.mass_r.T, atol=1e-14)
    assert np.linalg.eigvalsh(red.mass_r).min() > 0.0


def test_galerkin_orthogonality_per_step():
    # the full-space residual of a reconstructed reduced step is orthogonal
    # to every basis vector
    ops = assemble(Grid1D(12))
    snaps, product = _snapshots(ops)
    rb = pod(snaps, product, tol=1e-4)
    red = project(ops, rb)
    mu = Parameter(0.4, 0.6)
    num_steps, t_end = 24, 3.0
    qoi, states = solve_rom(red, mu, num_steps, t_end, return_states=True)
    from cdrpipe.fom import operator_at

    a, l = operator_at(ops, mu)
    mass_dt = ops.free_mass() * (num_steps / t_end)
    v = rb.basis
    for n in range(1, num_steps + 1):
        c_new = v @ states[:, n]
        c_old = v @ states[:, n - 1]
        resid = mass_dt.matvec(c_new) + a.matvec(c_new) \
            - mass_dt.matvec(c_old) - l
        assert np.max(np.abs(v.T @ resid)) < 1e-10 * max(np.max(np.abs(resid)), 1.0)


def test_reproduction_of_contained_trajectory():
    # a trajectory lying exactly in the span is reproduced through the QoI
    ops = assemble(Grid1D(10))
    mu = Parameter(0.5, 0.5)
    traj = solve_fom(ops, mu, 32, 3.0)
    product = ops.free_h1_product()
    basis = orthonormalize(traj.states[1:, :], product)
    red = project(ops, basis)
    f_rb = solve_rom(red, mu, 32, 3.0)
    assert np.max(np.abs(f_rb - traj.qoi)) < 1e-10


def test_training_error_within_pod_tolerance():
    ops = assemble(Grid1D(16))
    mus = [Parameter(0.1, 0.1), Parameter(1.0, 1.0)]
    snaps, product = _snapshots(ops, mus)
    red = project(ops, pod(snaps, product, tol=1e-4))
    for mu in mus:
        f_h = solve_fom(ops, mu, 48, 3.0).qoi
        f_rb = solve_rom(red, mu, 48, 3.0)
        assert qoi_error(f_rb, f_h) <= 1e-4


def test_error_monotone_in_mode_count():
    ops = assemble(Grid1D(16))
    mus = [Parameter(0.1, 0.1), Parameter(1.0, 1.0)]
    snaps, product = _snapshots(ops, mus)
    rb = pod(snaps, product, tol=1e-10)
    errs = []
    for k in range(1, rb.num_modes + 1):
        red = project(ops, rb.basis[:, :k])
        err = max(qoi_error(solve_rom(red, mu, 48, 3.0),
                            solve_fom(ops, mu, 48, 3.0).qoi) for mu in mus)
        errs.append(err)
    for a, b in zip(errs, errs[1:]):
        assert b <= a * (1.0 + 1e-9) + 1e-14


def test_online_phase_is_independent_of_full_dimension(tmp_path):
    ops = assemble(Grid1D(32))
    snaps, product = _snapshots(ops)
    red = project(ops, pod(snaps, product, tol=1e-5))
    n_free = ops.num_free
    for name in ("mass_r", "a_diff_r", "a_conv_r", "a_reac_r", "rhs_diff_r",
                 "rhs_conv_r", "rhs_reac_r", "qoi_r", "init_r"):
        arr = getattr(red, name)
        assert all(dim < n_free for dim in arr.shape)
    # the persisted blob alone drives the online phase
    path = tmp_path / "reduced.npz"
    save_reduced_model(path, red, time_meta={"num_steps": 48, "t_end": 3.0})
    loaded, time_meta = load_reduced_model(path)
    assert time_meta == {"num_steps": 48, "t_end": 3.0}
    mu = Parameter(0.3, 0.3)
    assert np.allclose(solve_rom(loaded, mu, 48, 3.0),
                       solve_rom(red, mu, 48, 3.0), rtol=0, atol=0)
    assert loaded.basis_ref["num_modes"] == red.num_modes


def test_project_dimension_mismatch():
    ops = assemble(Grid1D(8))
    with pytest.raises(ValueError):
        project(ops, np.ones((5, 2)))


def test_singular_reduced_system_reported():
    red = ReducedOperatorSet(
        mass_r=np.zeros((2, 2)), a_diff_r=np.zeros((2, 2)),
        a_conv_r=np.zeros((2, 2)), a_reac_r=np.zeros((2, 2)),
        rhs_diff_r=np.zeros(2), rhs_conv_r=np.zeros(2), rhs_reac_r=np.zeros(2),
        qoi_r=np.zeros(2), init_r=np.zeros(2))
    with pytest.raises(SingularSystemError):
        solve_rom(red, Parameter(0.1, 0.1), 4, 1.0)


def test_reduced_affine_evaluation():
    ops = assemble(Grid1D(10))
    snaps, product = _snapshots(ops)
    red = project(ops, pod(snaps, product, tol=1e-6))
    mu = Parameter(0.25, 0.75)
    a, l = reduced_operator_at(red, mu)
    manual = red.a_diff_r + 0.75 * red.a_conv_r + 0.25 * red.a_reac_r
    assert np.allclose(a, manual, rtol=1e-15)
    assert np.allclose(l, red.rhs_diff_r + 0.75 * red.rhs_conv_r
                       + 0.25 * red.rhs_reac_r, rtol=1e-15)

"""Full-order model: assembly integrals, stepping, and the steady oracle."""

import math

import numpy as np
import pytest

from cdrpipe.errors import (AssemblyError, BlowUpError, SingularSystemError,
                            ZeroReferenceError)
from cdrpipe.fom import (Grid1D, Parameter, ParameterDomain, assemble,
                         operator_at, qoi_error, solve_fom, steady_qoi_oracle)
from cdrpipe.tridiag import Tridiagonal


def test_grid_basics():
    g = Grid1D(64)
    assert g.h == 1.0 / 64
    assert g.num_nodes == 65
    assert np.allclose(g.nodes()[:3], [0.0, g.h, 2 * g.h])


def test_assemble_shapes_and_dirichlet():
    ops = assemble(Grid1D(2))
    assert ops.mass.shape == (3, 3)
    assert ops.dirichlet_dofs == (0,)
    assert ops.num_free == 2


def test_assemble_rejects_single_interval():
    with pytest.raises(AssemblyError):
        assemble(Grid1D(1))


def test_hand_integrated_entries_h_half():
    # exact P1 integrals on two intervals, h = 1/2
    ops = assemble(Grid1D(2))
    a = ops.a_diff.toarray()
    assert np.allclose(a[1], [-2.0, 4.0, -2.0])
    m = ops.mass.toarray()
    assert m[1, 1] == pytest.approx(1.0 / 3.0)
    assert m[0, 1] == pytest.approx(1.0 / 12.0)
    assert m[1, 0] == pytest.approx(1.0 / 12.0)


def test_symmetry_exact():
    ops = assemble(Grid1D(17))
    for tri in (ops.mass, ops.a_diff, ops.a_reac, ops.h1_product):
        assert np.array_equal(tri.lower, tri.upper)


def test_reaction_matrix_equals_mass():
    ops = assemble(Grid1D(9))
    assert np.array_equal(ops.a_reac.toarray(), ops.mass.toarray())


def test_convection_semidefinite_identity():
    # with v(0) = 0 the convection form telescopes to v(1)^2 / 2
    rng = np.random.default_rng(7)
    for n in (2, 5, 33):
        ops = assemble(Grid1D(n))
        for _ in range(20):
            v = rng.standard_normal(n + 1)
            v[0] = 0.0
            quad = v @ ops.a_conv.matvec(v)
            assert quad == pytest.approx(0.5 * v[-1] ** 2, rel=1e-12, abs=1e-14)


@pytest.mark.parametrize("num_intervals", [2, 4, 8, 16])
def test_coercivity_eigenvalue_oracle(num_intervals):
    # dense eigensolve: lambda_min of the symmetric part of A(mu) on the free
    # DoFs never falls below lambda_min of the stiffness part
    ops = assemble(Grid1D(num_intervals))
    a_diff = ops.a_diff.restrict(1).toarray()
    lam_diff = np.linalg.eigvalsh(a_diff).min()
    assert lam_diff > 0.0
    rng = np.random.default_rng(3)
    mus = [Parameter(0.0, 0.0), Parameter(1.0, 1.0), Parameter(0.0, 1.0)]
    mus += [Parameter(*np.abs(rng.standard_normal(2))) for _ in range(10)]
    for mu in mus:
        a, _ = operator_at(ops, mu)
        sym = 0.5 * (a.toarray() + a.toarray().T)
        assert np.linalg.eigvalsh(sym).min() >= lam_diff * (1 - 1e-12)


def test_operator_at_trivial_combinations():
    ops = assemble(Grid1D(8))
    a0, l0 = operator_at(ops, Parameter(0.0, 0.0))
    assert np.array_equal(a0.toarray(), ops.a_diff.restrict(1).toarray())
    assert np.array_equal(l0, ops.rhs_diff)
    a1, _ = operator_at(ops, Parameter(1.0, 1.0))
    expected = (ops.a_diff.restrict(1) + ops.a_conv.restrict(1)
                + ops.a_reac.restrict(1))
    assert np.allclose(a1.toarray(), expected.toarray(), rtol=1e-15)
    # the example query shape from the reference workflow
    a, l = operator_at(ops, Parameter(1.0, 1e-3))
    assert a.shape == (8, 8) and l.shape == (8,)


def test_affine_consistency_on_random_vectors():
    ops = assemble(Grid1D(12))
    rng = np.random.default_rng(11)
    for _ in range(10):
        mu = Parameter(*rng.random(2))
        v = rng.standard_normal(12)
        a, _ = operator_at(ops, mu)
        direct = a.matvec(v)
        split = (ops.a_diff.restrict(1).matvec(v)
                 + mu.pe * ops.a_conv.restrict(1).matvec(v)
                 + mu.da * ops.a_reac.restrict(1).matvec(v))
        assert np.allclose(direct, split, rtol=1e-14, atol=1e-15)


def test_qoi_starts_at_zero_and_states_layout():
    ops = assemble(Grid1D(8))
    traj = solve_fom(ops, Parameter(0.7, 0.3), num_steps=16, t_end=1.0)
    assert traj.qoi[0] == 0.0
    # shifted initial datum restricted to the free DoFs is the zero vector
    assert np.array_equal(traj.states[:, 0], np.zeros(9))
    # the constrained node stays zero in the shifted representation
    assert np.array_equal(traj.states[0], np.zeros(17))
    assert traj.states.shape == (9, 17)
    assert np.array_equal(traj.qoi, traj.states[-1])
    assert traj.times[0] == 0.0 and traj.times[-1] == 1.0


def test_steady_oracle_closed_forms():
    assert steady_qoi_oracle(Parameter(0.0, 0.0)) == 1.0
    assert steady_qoi_oracle(Parameter(0.0, 1.0)) == 1.0
    assert steady_qoi_oracle(Parameter(1.0, 0.0)) == pytest.approx(
        1.0 / math.cosh(1.0), rel=1e-12)


def test_steady_oracle_against_stationary_fem():
    # independent check: stationary FEM solve on a fine grid converges to the
    # closed-form outflow value
    ops = assemble(Grid1D(512))
    for mu in (Parameter(0.5, 0.5), Parameter(1.0, 1.0), Parameter(0.02, 0.9),
               Parameter(0.9, 0.02)):
        a, l = operator_at(ops, mu)
        c = a.factor().solve(l)
        assert c[-1] == pytest.approx(steady_qoi_oracle(mu), abs=2e-6)


def test_long_time_limit_pure_diffusion():
    # steady state of the (0, 0) problem is the constant 1; at t_end = 3 the
    # slowest mode still leaves a ~8e-4 transient, gone by t_end = 6
    ops = assemble(Grid1D(64))
    qoi3 = solve_fom(ops, Parameter(0.0, 0.0), 24576, 3.0,
                     store_states=False).qoi[-1]
    assert qoi3 == pytest.approx(1.0, abs=1e-3)
    qoi6 = solve_fom(ops, Parameter(0.0, 0.0), 8192, 6.0,
                     store_states=False).qoi[-1]
    assert qoi6 == pytest.approx(1.0, abs=1e-4)


def test_long_time_limit_pure_reaction():
    ops = assemble(Grid1D(64))
    qoi = solve_fom(ops, Parameter(1.0, 0.0), 24576, 3.0,
                    store_states=False).qoi[-1]
    assert qoi == pytest.approx(1.0 / math.cosh(1.0), abs=1e-3)


def test_self_convergence_ladder():
    # halving h and dt shrinks the distance to the steady oracle monotonically
    mu = Parameter(1.0, 1.0)
    oracle = steady_qoi_oracle(mu)
    errs = []
    for ni, ns in [(8, 3072), (16, 6144), (32, 12288), (64, 24576)]:
        ops = assemble(Grid1D(ni))
        traj = solve_fom(ops, mu, ns, 3.0, store_states=False)
        errs.append(abs(traj.qoi[-1] - oracle))
    assert all(a > b for a, b in zip(errs, errs[1:]))
    assert errs[-1] <= 1e-4


def test_unconditional_stability_random_mu_and_dt():
    ops = assemble(Grid1D(16))
    rng = np.random.default_rng(5)
    for _ in range(15):
        mu = Parameter(*rng.random(2))
        num_steps = int(rng.integers(1, 8))
        t_end = float(rng.choice([1e-3, 1.0, 50.0]))
        traj = solve_fom(ops, mu, num_steps, t_end)
        assert np.all(np.isfinite(traj.states))
        assert np.all(np.isfinite(traj.qoi))


def test_factor_once_reused(monkeypatch):
    import cdrpipe.fom as fom_mod

    calls = {"n": 0}
    orig = Tridiagonal.factor

    def counting_factor(self):
        calls["n"] += 1
        return orig(self)

    monkeypatch.setattr(Tridiagonal, "factor", counting_factor)
    ops = assemble(Grid1D(8))
    solve_fom(ops, Parameter(0.5, 0.5), num_steps=64, t_end=1.0)
    assert calls["n"] == 1


def test_singular_factorization_detected():
    singular = Tridiagonal(np.zeros(2), np.zeros(3), np.zeros(2))
    with pytest.raises(SingularSystemError):
        singular.factor()


def test_blowup_detected_for_nonfinite_inputs():
    ops = assemble(Grid1D(8))
    with pytest.raises(BlowUpError):
        solve_fom(ops, Parameter(float("nan"), 0.0), num_steps=4, t_end=1.0)


def test_solve_fom_input_validation():
    ops = assemble(Grid1D(8))
    with pytest.raises(ValueError):
        solve_fom(ops, Parameter(0.1, 0.1), num_steps=0, t_end=1.0)
    with pytest.raises(ValueError):
        solve_fom(ops, Parameter(0.1, 0.1), num_steps=4, t_end=0.0)


def test_qoi_error_examples():
    assert qoi_error([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert qoi_error([0.0, 0.0], [3.0, 4.0]) == pytest.approx(1.0)
    f = np.ones(2)
    assert qoi_error(f * (1 + 1e-4), f) == pytest.approx(1e-4, rel=1e-8)
    with pytest.raises(ZeroReferenceError):
        qoi_error([1.0], [0.0])
    with pytest.raises(ValueError):
        qoi_error([1.0, 2.0], [1.0])


def test_parameter_domain_membership():
    dom = ParameterDomain(Parameter(1e-3, 1e-3), Parameter(1.0, 1.0))
    assert dom.contains(Parameter(0.5, 0.5))
    assert not dom.contains(Parameter(0.0, 0.5))
    with pytest.raises(ValueError):
        ParameterDomain(Parameter(1.0, 0.0), Parameter(0.0, 1.0))

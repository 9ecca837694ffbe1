import numpy as np
import pytest

import oracles
from mpcc.errors import BadArgs, NotConverged, RankDeficient, TooLarge
from mpcc.recovery import (APPROX_SPARSE, FEAS_SLACK, SolverOptions, l0_oracle, solve_bp,
                           solve_bp_many, solve_omp, with_options)
from mpcc.sensing import SensingMatrix, gen_sensing_matrix


def _sparse(rng, n, k):
    x = np.zeros(n)
    x[rng.choice(n, k, replace=False)] = rng.standard_normal(k) * 3
    return x


def test_exact_recovery_of_sparse_vector(rng):
    phi = gen_sensing_matrix(4, 60, 200)
    x = _sparse(rng, 200, 8)
    res = solve_bp(phi, phi.data @ x)
    assert res.converged
    assert np.linalg.norm(res.z - x) < 1e-8 * np.linalg.norm(x)
    assert set(res.support) == set(np.flatnonzero(x))


def test_matches_linear_program(rng):
    phi = gen_sensing_matrix(8, 15, 40)
    for _ in range(5):
        y = rng.standard_normal(15)  # dense target: l1 minimizer is not the generator
        res = solve_bp(phi, y)
        lp = oracles.basis_pursuit_lp(phi.data, y)
        assert res.residual <= FEAS_SLACK
        assert abs(res.l1_norm - np.abs(lp).sum()) < 1e-5 * np.abs(lp).sum()


def test_batch_matches_single(rng):
    phi = gen_sensing_matrix(2, 30, 90)
    xs = np.column_stack([_sparse(rng, 90, 4) for _ in range(6)])
    batch = solve_bp_many(phi, phi.data @ xs)
    for c, res in enumerate(batch):
        single = solve_bp(phi, phi.data @ xs[:, c])
        assert np.allclose(res.z, single.z, atol=1e-10)


def test_zero_measurement_gives_zero():
    phi = gen_sensing_matrix(1, 5, 10)
    res = solve_bp(phi, np.zeros(5))
    assert np.array_equal(res.z, np.zeros(10))


def test_square_matrix_uses_direct_solve(rng):
    phi = gen_sensing_matrix(1, 12, 12)
    x = rng.standard_normal(12)
    res = solve_bp(phi, phi.data @ x)
    assert res.iterations == 0
    assert np.allclose(res.z, x, atol=1e-10)


def test_noise_ball_constraint_respected(rng):
    phi = gen_sensing_matrix(3, 40, 120)
    x = _sparse(rng, 120, 5)
    y = phi.data @ x + 0.01 * rng.standard_normal(40)
    opts = SolverOptions(epsilon=0.2)
    res = solve_bp(phi, y, opts)
    assert res.residual <= 0.2 + FEAS_SLACK
    assert res.l1_norm <= np.abs(x).sum() + 1e-6


def test_relative_epsilon(rng):
    phi = gen_sensing_matrix(3, 40, 120)
    y = phi.data @ rng.standard_normal(120)
    res = solve_bp(phi, y, APPROX_SPARSE)
    assert res.residual <= 1e-6 * np.linalg.norm(y) + FEAS_SLACK


def test_budget_exhaustion_returns_feasible_iterate(rng):
    phi = gen_sensing_matrix(3, 40, 120)
    y = phi.data @ rng.standard_normal(120)
    res = solve_bp(phi, y, SolverOptions(max_iters=3, debias=False))
    assert res.converged and not res.tolerance_met
    assert res.iterations == 3
    assert res.residual <= FEAS_SLACK


def test_not_converged_carries_result(monkeypatch, rng):
    import mpcc.recovery as rec

    phi = gen_sensing_matrix(3, 10, 30)
    y = rng.standard_normal(10)
    real = rec._admm

    def broken(f, yn, epsn, opts):
        z, x, iters, stopped = real(f, yn, epsn, opts)
        return z + 1.0, x + 1.0, iters, stopped

    monkeypatch.setattr(rec, "_admm", broken)
    with pytest.raises(NotConverged) as info:
        solve_bp(phi, y, SolverOptions(debias=False))
    assert info.value.result.residual > FEAS_SLACK


def test_options_validation_and_digest():
    with pytest.raises(BadArgs):
        SolverOptions(epsilon=-1)
    with pytest.raises(BadArgs):
        SolverOptions(alpha=2.0)
    a = SolverOptions()
    assert a.digest() == SolverOptions().digest()
    assert a.digest() != with_options(a, max_iters=10).digest()


def test_omp_recovers_sparse(rng):
    phi = gen_sensing_matrix(6, 40, 100)
    x = _sparse(rng, 100, 5)
    res = solve_omp(phi, phi.data @ x, 5)
    assert np.allclose(res.z, x, atol=1e-10)


def test_omp_rank_deficient():
    phi = SensingMatrix.from_array([[1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    with pytest.raises(RankDeficient):
        solve_omp(phi, np.array([1.0, 0.0]), 2, tol=-1.0)


def test_l0_oracle_hand_case():
    phi = SensingMatrix.from_array([[1.0, 0.0, 1.0, 2.0], [0.0, 1.0, 1.0, -1.0]])
    out = l0_oracle(phi, np.array([2.0, 2.0]), 2)
    assert out.support == (2,) and out.feasible
    assert np.allclose(out.z, [0, 0, 2, 0])
    zero = l0_oracle(phi, np.zeros(2), 2)
    assert zero.support == () and zero.feasible


def test_l0_oracle_size_gate():
    with pytest.raises(TooLarge):
        l0_oracle(gen_sensing_matrix(0, 6, 17), np.zeros(6), 2)
    with pytest.raises(TooLarge):
        l0_oracle(gen_sensing_matrix(0, 6, 12), np.zeros(6), 4)


def test_bp_agrees_with_l0_on_one_sparse(rng):
    phi = gen_sensing_matrix(11, 6, 12)
    for _ in range(20):
        x = _sparse(rng, 12, 1)
        y = phi.data @ x
        assert set(solve_bp(phi, y).support) == set(l0_oracle(phi, y, 2).support)

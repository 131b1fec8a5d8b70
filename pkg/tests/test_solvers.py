import numpy as np
import pytest
import scipy.sparse as sp

from porofem.errors import InvalidConfigError, NonconvergenceError, SolverError
from porofem.problems import HOUR, Mp1Problem, preset_mp1, run_preset
from porofem.solvers import Factorization, RunResult, SolverConfig, newton_solve, run_time_loop, sparse_direct_solve

CFG = SolverConfig(dt=1.0, t_end=1.0)


def test_identity_and_hand_solve():
    b = np.array([3.0, -1.0, 2.0])
    np.testing.assert_array_equal(sparse_direct_solve(sp.identity(3, format="csr"), b), b)
    x = sparse_direct_solve(sp.csr_matrix([[2.0, 1.0], [1.0, 3.0]]), np.array([3.0, 4.0]))
    np.testing.assert_allclose(x, [1.0, 1.0], rtol=1e-15)


def test_mp1_first_step_matches_dense_solve():
    prob = Mp1Problem(preset_mp1())
    x0 = prob.initial_state()
    x1, _ = prob.step(x0, HOUR, 1)
    A = prob.A_bc.toarray()
    idx = prob._bc_idx
    b = prob.op.system(x0, HOUR).b - prob.A_dcols @ np.zeros_like(x0)
    b[idx] = 0.0
    np.testing.assert_allclose(x1, np.linalg.solve(A, b), rtol=1e-10, atol=1e-10 * np.abs(x1).max())


def test_solution_is_deterministic():
    A = sp.random(40, 40, density=0.2, random_state=3, format="csr") + 10 * sp.identity(40)
    b = np.arange(40.0)
    assert sparse_direct_solve(A, b).tobytes() == sparse_direct_solve(A, b).tobytes()


def test_singular_matrix_reports_pivot():
    A = sp.csr_matrix(np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 2.0]]))
    with pytest.raises(SolverError) as exc:
        sparse_direct_solve(A, np.ones(3))
    assert exc.value.pivot == 1


def test_near_singular_matrix_rejected():
    A = sp.csr_matrix(np.array([[1.0, 1.0], [1.0, 1.0 + 1e-16]]))
    with pytest.raises(SolverError):
        Factorization(A)


def test_mixed_scale_blocks_are_solved_accurately():
    # rows that differ by many orders of magnitude, as in the u-p systems
    A = sp.csr_matrix(np.array([[1e8, 2e8, 0.0], [1e-9, 0.0, 3e-9], [0.0, 1e-12, 1e-12]]))
    x_true = np.array([1.0, -2.0, 0.5])
    np.testing.assert_allclose(sparse_direct_solve(A, A @ x_true), x_true, rtol=1e-10)


def test_newton_linear_residual_one_iteration():
    A = np.array([[3.0, 1.0], [1.0, 2.0]])
    b = np.array([1.0, 4.0])
    x, it = newton_solve(lambda x: A @ x - b, lambda x: A, np.zeros(2), CFG)
    assert it == 1
    np.testing.assert_allclose(A @ x, b)


def test_newton_sqrt_two_iterates():
    seen = []

    def r(x):
        seen.append(float(x[0]))
        return np.array([x[0] ** 2 - 2.0])

    x, _ = newton_solve(r, lambda x: np.array([[2.0 * x[0]]]), np.array([2.0]), CFG)
    assert seen[1] == pytest.approx(1.5)
    assert seen[2] == pytest.approx(17.0 / 12.0)
    errs = np.abs(np.array(seen[1:5]) - np.sqrt(2.0))
    # quadratic contraction: e_{k+1} ~ e_k^2 / (2 sqrt 2)
    assert errs[2] <= errs[1] ** 2 and errs[3] <= errs[2] ** 2
    assert abs(x[0] ** 2 - 2.0) <= 1e-8 * 2.0


def test_newton_wrong_sign_jacobian_fails_with_history():
    with pytest.raises(NonconvergenceError) as exc:
        newton_solve(lambda x: np.array([x[0] - 1.0]), lambda x: np.array([[-1.0]]), np.array([0.0]),
                     SolverConfig(dt=1.0, t_end=1.0, max_newton_iter=5))
    assert len(exc.value.history) == 6
    assert exc.value.history[-1] > exc.value.history[0]


def test_config_validation():
    assert CFG.errors() == []
    bad = SolverConfig(dt=-1.0, t_end=1.0, rel_tol=0.0)
    assert len(bad.errors()) == 2
    off = SolverConfig(dt=2.0, t_end=10.0, output_times=(3.0, 12.0))
    assert len(off.errors()) == 2
    with pytest.raises(InvalidConfigError):
        run_time_loop(None, bad)


class _Zero:
    def initial_state(self):
        return np.zeros(4)

    def step(self, x, t, n):
        return x * 0.0, {}


def test_zero_forcing_zero_snapshots():
    res = run_time_loop(_Zero(), SolverConfig(dt=1.0, t_end=5.0, output_times=(0.0, 2.0, 5.0)))
    assert res.times == [0.0, 2.0, 5.0]
    assert all(np.all(s.x == 0) for s in res.snapshots)
    with pytest.raises(KeyError):
        res.at(3.0)


def test_mp1_zero_duration_returns_initial_condition():
    _, res = run_preset(preset_mp1().with_(t_end=0.0, output_times=(0.0,)))
    np.testing.assert_array_equal(res.snapshots[0].x, 1.0e5)
    assert res.steps == []


def test_mp1_eighty_steps_with_decaying_energy():
    prob, res = run_preset(preset_mp1().with_(output_times=tuple(float(h) * HOUR for h in range(81))))
    assert len(res.steps) == 80
    M = prob.op.M
    energy = [s.x @ M @ s.x for s in res.snapshots[1:]]
    assert np.all(np.diff(energy) < 0)


def test_nonconvergence_carries_step_and_time():
    class Stuck(_Zero):
        def step(self, x, t, n):
            if n == 3:
                raise NonconvergenceError("stuck", history=[1.0, 2.0])
            return x, {}

    with pytest.raises(NonconvergenceError) as exc:
        run_time_loop(Stuck(), SolverConfig(dt=0.5, t_end=5.0))
    assert exc.value.step == 3 and exc.value.time == 1.5
    assert exc.value.history == [1.0, 2.0]


def test_mp1_first_order_in_time():
    t40 = 40 * HOUR
    sols = []
    for dt in (1.0, 0.5, 0.25, 0.125):
        _, res = run_preset(preset_mp1().with_(dt=dt * HOUR, output_times=(t40,)))
        sols.append(res.at(t40).x)
    d1 = np.linalg.norm(sols[0] - sols[1])
    d2 = np.linalg.norm(sols[1] - sols[2])
    d3 = np.linalg.norm(sols[2] - sols[3])
    assert abs(d1 / d2 - 2.0) <= 0.15 * 2.0
    assert abs(d2 / d3 - 2.0) <= abs(d1 / d2 - 2.0) + 1e-12


def test_run_result_lookup():
    r = RunResult()
    assert r.times == []

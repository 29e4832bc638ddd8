import numpy as np
import pytest
import scipy.sparse as sp

from groupdict.conic import ConicProblem, SolverError, default_backend, default_gap_tolerance, solve

BACKENDS = ["cvxopt", "clarabel"]


def _eig_problem(M):
    """max <M, X> s.t. tr X = 1, X PSD  ->  largest eigenvalue of M."""
    n = M.shape[0]
    prob = ConicProblem()
    iu = [(i, j) for i in range(n) for j in range(i, n)]
    x = prob.add_variables(len(iu), "X")
    coef = sp.lil_matrix((n * n, len(iu)))
    obj = np.zeros(len(iu))
    tr = np.zeros(len(iu))
    for k, (i, j) in enumerate(iu):
        coef[i * n + j, k] = 1.0
        coef[j * n + i, k] = 1.0
        obj[k] = -(M[i, j] if i == j else 2 * M[i, j])
        tr[k] = 1.0 if i == j else 0.0
    prob.add_psd(coef.tocsr(), np.zeros(n * n), n)
    prob.add_linear_objective(x, obj)
    prob.add_equality(tr[None, :], [1.0])
    return prob


@pytest.mark.parametrize("backend", BACKENDS)
def test_sdp_largest_eigenvalue(backend, rng):
    A = rng.standard_normal((4, 4))
    M = A + A.T
    sol = solve(_eig_problem(M), backend=backend)
    assert sol.ok
    assert -sol.objective == pytest.approx(np.linalg.eigvalsh(M)[-1], abs=1e-6)


@pytest.mark.parametrize("backend", BACKENDS)
def test_hermitian_psd_block(backend):
    # min t  s.t. [[t, z], [conj z, t]] PSD with z = 1 + 2i fixed  ->  t = |z|
    prob = ConicProblem()
    t = prob.add_variables(1)
    coef = sp.csr_matrix(np.array([[1.0], [0.0], [0.0], [1.0]]))
    const = np.array([0, 1 + 2j, 1 - 2j, 0])
    prob.add_hermitian_psd(coef, const, 2)
    prob.add_linear_objective(t, 1.0)
    sol = solve(prob, backend=backend)
    assert sol.objective == pytest.approx(np.sqrt(5), abs=1e-6)


@pytest.mark.parametrize("backend", BACKENDS)
def test_least_squares_with_soc_and_offset(backend):
    # min 0.5 |x - (3, 4)|^2 + s  s.t. |x| <= s, s <= 1 -> optimum on the ray
    prob = ConicProblem()
    x = prob.add_variables(2)
    s = prob.add_variables(1)
    prob.add_squared_residual(sp.csr_matrix(np.eye(2, 3)), -np.array([3.0, 4.0]))
    prob.add_linear_objective(s, 1.0)
    prob.add_soc(sp.csr_matrix(np.array([[0, 0, 1.0], [1, 0, 0], [0, 1, 0]])), np.zeros(3))
    prob.add_nonneg(sp.csr_matrix(np.array([[0, 0, -1.0]])), [1.0])
    sol = solve(prob, backend=backend)
    assert sol.ok
    xs = sol.x[x]
    assert np.allclose(xs, [0.6, 0.8], atol=1e-5)
    assert sol.objective == pytest.approx(0.5 * 16 + 1.0, abs=1e-5)
    assert prob.objective_value(sol.x) == pytest.approx(sol.objective, abs=1e-6)


def test_infeasible_is_reported_not_raised():
    prob = ConicProblem()
    x = prob.add_variables(1)
    prob.add_nonneg(sp.csr_matrix([[1.0]]), [-1.0])  # x >= 1
    prob.add_nonneg(sp.csr_matrix([[-1.0]]), [0.0])  # x <= 0
    prob.add_linear_objective(x, 1.0)
    sol = solve(prob)
    assert not sol.ok
    with pytest.raises(SolverError):
        sol.require("test")


def test_backends_agree(rng):
    A = rng.standard_normal((5, 5))
    M = A + A.T
    vals = [solve(_eig_problem(M), backend=b).objective for b in BACKENDS]
    assert vals[0] == pytest.approx(vals[1], abs=1e-6)


def test_environment_overrides(monkeypatch):
    monkeypatch.setenv("GROUPDICT_SOLVER_GAP", "1e-6")
    monkeypatch.setenv("GROUPDICT_SOLVER", "clarabel")
    assert default_gap_tolerance() == 1e-6
    assert default_backend() == "clarabel"


def test_unknown_backend():
    with pytest.raises(ValueError):
        solve(_eig_problem(np.eye(2)), backend="nope")


def test_dump_writes_text(tmp_path):
    prob = _eig_problem(np.eye(2))
    path = tmp_path / "p.txt"
    prob.dump(path)
    assert path.read_text().strip()

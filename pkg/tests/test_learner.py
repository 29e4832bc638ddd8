import math

import numpy as np
import pytest

from groupdict.harmonics import (
    BlockDiagOperator,
    FourierCoefficients,
    Group,
    GroupElement,
    IrrepTable,
    act_left_regular,
    enumerate_irreps,
    plancherel_norm,
)
from groupdict.learner import (
    CodingResult,
    Dictionary,
    FitConfig,
    SizeGuardError,
    code_exact,
    code_so3_one_sparse,
    code_so3_sdp,
    dictionary_distance,
    fit,
    fit_baseline_l1,
    lambda_max,
    model_prediction,
    normalize,
    one_sparse_objective,
    pair_distance,
    random_dictionary,
    update_dictionary,
    update_residual,
)
from groupdict.orbitope import so3_operator_norm_relaxed, vandermonde_decompose


def _rel_residual(y, yhat):
    return plancherel_norm(y - yhat) / plancherel_norm(y)


# ---------------------------------------------------------------------------
# containers


def test_dictionary_requires_unit_atoms(rng):
    table = enumerate_irreps(Group.SO2, 2)
    with pytest.raises(ValueError):
        Dictionary((FourierCoefficients.random(table, rng) * 3.0,))


def test_normalize_policies(rng):
    table = enumerate_irreps(Group.SO3, 1)
    a = normalize([FourierCoefficients.random(table, rng)])[0]
    assert normalize([a])[0].allclose(a, atol=1e-15)
    assert normalize([a * 7.0])[0].allclose(a, atol=1e-14)
    d = normalize([FourierCoefficients.zeros(table), a], rng=1)
    assert d.reseeded == (0,)
    assert plancherel_norm(d[0]) == pytest.approx(1.0, abs=1e-12)


def test_fit_config_validation():
    with pytest.raises(ValueError):
        FitConfig(mode="nope")
    with pytest.raises(ValueError):
        FitConfig(iterations=0)


# ---------------------------------------------------------------------------
# exact coding


@pytest.mark.parametrize("group", [Group.SO2, Group.O2])
def test_code_exact_zero_data(group, rng):
    table = enumerate_irreps(group, 3)
    d = random_dictionary(table, 2, rng)
    res = code_exact(FourierCoefficients.zeros(table), d, 0.1)
    assert res.objective == pytest.approx(0.0, abs=1e-7)
    assert all(plancherel_norm(op) < 1e-5 for op in res.operators)


def test_code_exact_decodes_rotated_atom_so2(rng):
    table = enumerate_irreps(Group.SO2, 4)
    d = random_dictionary(table, 1, rng)
    g = GroupElement.so2(2.2)
    y = act_left_regular(d[0], g) * 0.8
    res = code_exact(y, d, 1e-3)
    target = BlockDiagOperator.from_element(table, g) * 0.8
    assert res.operators[0].max_abs_diff(target) < 1e-2
    atoms = vandermonde_decompose(res.certificates[0]["+"], psd_tol=1e-6)
    big = max(atoms, key=lambda a: a[1])
    assert abs((big[0] - 2.2 + math.pi) % (2 * math.pi) - math.pi) < 1e-3


def test_code_exact_decodes_o2_reflection(rng):
    table = enumerate_irreps(Group.O2, 3)
    d = random_dictionary(table, 1, rng)
    g = GroupElement.o2(0.7, reflection=True)
    y = act_left_regular(d[0], g) * 1.3
    res = code_exact(y, d, 1e-3)
    target = BlockDiagOperator.from_element(table, g) * 1.3
    assert res.operators[0].max_abs_diff(target) < 1e-2


def test_coding_result_parts_add_up(rng):
    table = enumerate_irreps(Group.SO2, 3)
    d = random_dictionary(table, 2, rng)
    y = FourierCoefficients.random(table, rng)
    res = code_exact(y, d, 0.2)
    assert isinstance(res, CodingResult)
    r = 0.5 * plancherel_norm(y - model_prediction(d, res.operators)) ** 2
    assert res.residual == pytest.approx(r, abs=1e-9)
    assert res.objective == pytest.approx(res.residual + 0.2 * res.penalty, abs=1e-9)


def test_lambda_max_threshold(rng):
    table = enumerate_irreps(Group.SO2, 3)
    d = random_dictionary(table, 1, rng)
    y = FourierCoefficients.random(table, rng)
    lm = lambda_max(y, d)
    above = code_exact(y, d, lm * 1.01)
    assert plancherel_norm(above.operators[0]) < 1e-4
    below = code_exact(y, d, lm * 0.8)
    assert plancherel_norm(below.operators[0]) > 1e-3


def test_code_exact_is_order_independent(rng):
    table = enumerate_irreps(Group.SO2, 2)
    d = random_dictionary(table, 1, rng)
    ys = [FourierCoefficients.random(table, rng) for _ in range(3)]
    a = [code_exact(y, d, 0.1).objective for y in ys]
    b = [code_exact(y, d, 0.1).objective for y in reversed(ys)]
    assert np.allclose(a, b[::-1], atol=1e-12)


# ---------------------------------------------------------------------------
# SO(3) coding


def test_code_so3_sdp_zero_and_size_guard(rng):
    table = enumerate_irreps(Group.SO3, 1)
    d = random_dictionary(table, 1, rng)
    res = code_so3_sdp(FourierCoefficients.zeros(table), d, 0.1)
    assert plancherel_norm(res.operators[0]) < 1e-5
    big = enumerate_irreps(Group.SO3, 4)
    with pytest.raises(SizeGuardError):
        code_so3_sdp(FourierCoefficients.zeros(big), random_dictionary(big, 1, rng), 0.1)


def test_code_so3_sdp_single_rotated_atom(rng):
    table = enumerate_irreps(Group.SO3, 1)
    d = random_dictionary(table, 1, rng)
    y = act_left_regular(d[0], GroupElement.random(Group.SO3, rng))
    res = code_so3_sdp(y, d, 0.1)
    yhat = model_prediction(d, res.operators)
    # lam only shrinks the scale; the reconstructed direction is exact
    scale = plancherel_norm(yhat)
    assert _rel_residual(y, yhat * (1.0 / scale)) < 1e-3
    assert res.penalty >= so3_operator_norm_relaxed(res.operators[0]) - 1e-5


def test_one_sparse_zero_data(rng):
    table = enumerate_irreps(Group.SO3, 2)
    d = random_dictionary(table, 2, rng)
    code = code_so3_one_sparse(FourierCoefficients.zeros(table), d)
    assert np.all(code.c == 0)


def test_one_sparse_on_grid_recovery(rng):
    table = enumerate_irreps(Group.SO3, 2)
    d = random_dictionary(table, 1, rng)
    grid = (16, 8, 16)
    g = (2 * math.pi * 5 / 16, (3 + 0.5) * math.pi / 8, 2 * math.pi * 11 / 16)
    y = act_left_regular(d[0], GroupElement.so3(*g)) * 1.7
    code = code_so3_one_sparse(y, d, grid, sweeps=5)
    assert code.objective < 1e-10
    assert code.c[0] == pytest.approx(1.7, abs=1e-9)
    assert np.all(np.diff(code.trace) <= 0)


def test_one_sparse_off_grid_is_near_grid_optimum(rng):
    table = enumerate_irreps(Group.SO3, 2)
    d = random_dictionary(table, 1, rng)
    grid = (16, 8, 16)
    g = GroupElement.random(Group.SO3, rng)
    y = act_left_regular(d[0], g)
    code = code_so3_one_sparse(y, d, grid, sweeps=5)
    # brute force over the full grid with optimal real c
    na, nb, ng = grid
    best = math.inf
    for a in 2 * math.pi * np.arange(na) / na:
        for b in (np.arange(nb) + 0.5) * math.pi / nb:
            for c in 2 * math.pi * np.arange(ng) / ng:
                yh = act_left_regular(d[0], GroupElement.so3(a, b, c))
                num = sum(np.vdot(p, q).real for p, q in zip(yh.blocks, y.blocks))
                den = sum(np.vdot(p, p).real for p in yh.blocks)
                best = min(best, one_sparse_objective(y, d, [num / den], [[a, b, c]]))
    assert code.objective <= 10 * best
    assert np.all(np.diff(code.trace) <= 0)


def test_one_sparse_angles_are_canonical(rng):
    table = enumerate_irreps(Group.SO3, 1)
    d = random_dictionary(table, 2, rng)
    code = code_so3_one_sparse(FourierCoefficients.random(table, rng), d, sweeps=2)
    assert np.all((code.angles[:, 0] >= 0) & (code.angles[:, 0] < 2 * math.pi))
    assert np.all((code.angles[:, 1] >= 0) & (code.angles[:, 1] <= math.pi))
    assert len(code.trace) == 1 + 2 * 2 * 4


# ---------------------------------------------------------------------------
# dictionary update


def test_update_with_identity_codes_is_mean(rng):
    table = enumerate_irreps(Group.SO3, 2)
    ys = [FourierCoefficients.random(table, rng) for _ in range(4)]
    ops = [[BlockDiagOperator.identity(table)] for _ in ys]
    (phi,) = update_dictionary(ys, ops, table)
    mean = ys[0]
    for y in ys[1:]:
        mean = mean + y
    assert phi.allclose(mean * 0.25, atol=1e-12)


def test_update_recovers_generating_dictionary(rng):
    table = enumerate_irreps(Group.O2, 2)
    atoms = [FourierCoefficients.random(table, rng) for _ in range(2)]
    ops = [[BlockDiagOperator.random(table, rng) for _ in range(2)] for _ in range(10)]
    ys = [model_prediction(atoms, o) for o in ops]
    got = update_dictionary(ys, ops, table)
    for a, b in zip(atoms, got):
        assert a.max_abs_diff(b) < 1e-8


def test_update_first_order_conditions(rng):
    table = enumerate_irreps(Group.SO3, 1)
    ys = [FourierCoefficients.random(table, rng) for _ in range(6)]
    ops = [[BlockDiagOperator.random(table, rng) for _ in range(2)] for _ in ys]
    atoms = update_dictionary(ys, ops, table)
    for k in range(len(table)):
        for jp in range(2):
            g = np.zeros_like(ys[0].blocks[k])
            for y, o in zip(ys, ops):
                r = model_prediction(atoms, o).blocks[k] - y.blocks[k]
                g += r @ o[jp].blocks[k]
            assert np.linalg.norm(g) < 1e-8


def test_update_with_zero_codes_gives_zero(rng):
    table = enumerate_irreps(Group.SO2, 2)
    ys = [FourierCoefficients.random(table, rng) for _ in range(3)]
    ops = [[BlockDiagOperator.zeros(table)] for _ in ys]
    (phi,) = update_dictionary(ys, ops, table)
    assert plancherel_norm(phi) == 0.0


# ---------------------------------------------------------------------------
# distance


def test_distance_identities(rng):
    table = enumerate_irreps(Group.SO3, 1)
    d = random_dictionary(table, 2, rng)
    assert dictionary_distance(d, d) <= 1e-7
    g = GroupElement.random(Group.SO3, rng)
    moved = normalize([act_left_regular(a, g) * np.exp(0.4j) for a in d.atoms])
    assert dictionary_distance(d, moved, refine=True) < 1e-5
    assert dictionary_distance(d, moved) < 0.1


def test_distance_of_random_atoms_is_order_one(rng):
    table = IrrepTable.from_labels(Group.SO3, [1])
    vals = [pair_distance(random_dictionary(table, 1, rng)[0], random_dictionary(table, 1, rng)[0])
            for _ in range(5)]
    assert all(0.4 <= v <= 1.4 for v in vals)


def test_distance_limits_q(rng):
    table = enumerate_irreps(Group.SO2, 1)
    d = random_dictionary(table, 9, rng)
    with pytest.raises(ValueError):
        dictionary_distance(d, d)


def test_so2_distance_finds_rotation(rng):
    table = enumerate_irreps(Group.SO2, 3)
    d = random_dictionary(table, 1, rng)
    moved = [act_left_regular(d[0], GroupElement.so2(1.234))]
    assert dictionary_distance(d, moved, refine=True) < 1e-6


# ---------------------------------------------------------------------------
# fit


def test_fit_on_copies_of_one_atom(rng):
    table = enumerate_irreps(Group.SO3, 2)
    star = random_dictionary(table, 1, rng)
    data = [star[0] * 1.0 for _ in range(5)]
    cfg = FitConfig(q=1, lam=0.0, iterations=3, mode="so3_one_sparse", seed=3)
    d, trace, _ = fit(data, cfg, reference=star)
    assert dictionary_distance(d, star, refine=True) < 1e-6


def test_fit_steps_descend(rng):
    table = enumerate_irreps(Group.SO2, 2)
    data = [FourierCoefficients.random(table, rng) for _ in range(6)]
    cfg = FitConfig(q=2, lam=0.1, iterations=3, mode="so2_exact", seed=0)
    _, trace, _ = fit(data, cfg)
    for before, after in zip(trace.coding_residual, trace.update_residual):
        assert after <= before + 1e-8


def test_fit_rejects_mode_mismatch(rng):
    table = enumerate_irreps(Group.SO2, 1)
    with pytest.raises(ValueError):
        fit([FourierCoefficients.random(table, rng)], FitConfig(mode="so3_sdp"))


def test_fit_is_equivariant(rng):
    table = enumerate_irreps(Group.SO2, 2)
    star = random_dictionary(table, 1, rng)
    data = [act_left_regular(star[0], GroupElement.so2(t)) * c
            for t, c in zip(rng.uniform(0, 2 * math.pi, 8), rng.uniform(0.5, 1.5, 8))]
    g = GroupElement.so2(0.9)
    cfg = FitConfig(q=1, lam=0.05, iterations=4, mode="so2_exact", seed=2)
    d1, _, _ = fit(data, cfg)
    d2, _, _ = fit([act_left_regular(y, g) for y in data], cfg)
    assert dictionary_distance(d1, d2, refine=True) < 1e-3


def test_fit_one_sparse_records_codes(rng):
    table = enumerate_irreps(Group.SO3, 1)
    star = random_dictionary(table, 1, rng)
    data = [act_left_regular(star[0], GroupElement.random(Group.SO3, rng)) for _ in range(4)]
    cfg = FitConfig(q=1, lam=0.0, iterations=2, mode="so3_one_sparse", seed=1)
    d, trace, codes = fit(data, cfg, reference=star)
    assert len(codes) == 4
    assert all(np.all(np.diff(c.trace) <= 0) for c in codes)


# ---------------------------------------------------------------------------
# baseline


def test_baseline_zero_data():
    Phi, A, _ = fit_baseline_l1(np.zeros((4, 3)), 2, 0.1, 2)
    assert np.all(A == 0)


def test_baseline_recovers_orthogonal_atoms(rng):
    e1, e2 = np.eye(4)[0], np.eye(4)[2]
    Y = np.array([c * (e1 if k % 2 else e2) for k, c in enumerate(rng.uniform(0.5, 2.0, 20))])
    Phi, A, _ = fit_baseline_l1(Y, 2, 0.05, 60, seed=4)
    got = [Phi[:, k] * np.sign(Phi[np.argmax(np.abs(Phi[:, k])), k]) for k in range(2)]
    err = min(max(np.linalg.norm(got[0] - e1), np.linalg.norm(got[1] - e2)),
              max(np.linalg.norm(got[0] - e2), np.linalg.norm(got[1] - e1)))
    assert err < 1e-3

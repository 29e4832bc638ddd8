import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from groupdict.harmonics import (
    BlockDiagOperator,
    FourierCoefficients,
    GridTooCoarseError,
    Group,
    GroupElement,
    IrrepTable,
    act_left_regular,
    apply_operator,
    conjugation_matrix,
    enumerate_irreps,
    euler_to_matrix,
    fourier_transform,
    irrep_matrix,
    matrix_to_euler,
    plancherel_norm,
    quadrature_grid,
    so3_grid,
    synthesize,
    synthesize_grid,
    synthesize_many,
    wigner_D_matrix,
    wigner_d_matrix,
    wigner_little_d,
)

angles = st.tuples(
    st.floats(0, 2 * math.pi), st.floats(0, math.pi), st.floats(0, 2 * math.pi)
)


def test_enumerate_irreps_labels_and_dims():
    assert enumerate_irreps(Group.SO2, 2).labels == [-2, -1, 0, 1, 2]
    assert enumerate_irreps(Group.O2, 2).dims == [1, 2, 2]
    t = enumerate_irreps(Group.SO3, 3)
    assert t.dims == [1, 3, 5, 7]
    assert t.total_dim == 1 + 9 + 25 + 49
    with pytest.raises(ValueError):
        enumerate_irreps(Group.SO3, -1)


def test_from_labels_single_degree():
    t = IrrepTable.from_labels(Group.SO3, [2])
    assert t.bandwidth == 2 and t.dims == [5]
    with pytest.raises(ValueError):
        IrrepTable.from_labels(Group.SO3, [1, 1])


def test_small_wigner_closed_forms():
    b = 0.7
    assert wigner_little_d(0, 0, 0, b) == pytest.approx(1.0)
    assert wigner_little_d(1, 0, 0, b) == pytest.approx(math.cos(b))
    assert wigner_little_d(1, 1, 1, b) == pytest.approx((1 + math.cos(b)) / 2)
    assert wigner_little_d(1, 1, -1, b) == pytest.approx((1 - math.cos(b)) / 2)
    assert wigner_little_d(1, 1, 0, b) == pytest.approx(-math.sin(b) / math.sqrt(2))
    d = wigner_d_matrix(1, b)
    assert d[2, 1] == pytest.approx(-math.sin(b) / math.sqrt(2))


def test_wigner_matrix_matches_entrywise_sum(rng):
    for j in (2, 5, 9):
        b = rng.uniform(0, math.pi)
        d = wigner_d_matrix(j, b)
        for mp in range(-j, j + 1, 3):
            for m in range(-j, j + 1, 2):
                assert d[mp + j, m + j] == pytest.approx(wigner_little_d(j, mp, m, b), abs=1e-12)


def test_wigner_orthogonal_at_high_degree(rng):
    d = wigner_d_matrix(20, rng.uniform(0, math.pi, 5))
    err = np.abs(np.einsum("bij,bkj->bik", d, d) - np.eye(41)).max()
    assert err < 1e-12


@settings(max_examples=30, deadline=None)
@given(angles, angles, st.integers(0, 5))
def test_D_is_a_homomorphism(a1, a2, j):
    g1, g2 = GroupElement.so3(*a1), GroupElement.so3(*a2)
    D1, D2, D12 = (wigner_D_matrix(j, *g.angles) for g in (g1, g2, g1 * g2))
    assert np.linalg.norm(D1 @ D2 - D12) < 1e-9
    assert np.linalg.norm(D1 @ D1.conj().T - np.eye(2 * j + 1)) < 1e-10


def test_euler_round_trip_and_gimbal_lock(rng):
    for _ in range(50):
        g = GroupElement.random(Group.SO3, rng)
        R = g.matrix()
        assert np.allclose(euler_to_matrix(*matrix_to_euler(R)), R, atol=1e-12)
    for beta in (0.0, math.pi):
        R = euler_to_matrix(0.4, beta, 0.9)
        assert np.allclose(euler_to_matrix(*matrix_to_euler(R)), R, atol=1e-12)


@pytest.mark.parametrize("group", [Group.SO2, Group.O2])
def test_planar_irreps_are_homomorphisms(group, rng):
    table = enumerate_irreps(group, 3)
    for _ in range(20):
        g, h = GroupElement.random(group, rng), GroupElement.random(group, rng)
        for xi in table:
            assert np.allclose(irrep_matrix(xi, g) @ irrep_matrix(xi, h), irrep_matrix(xi, g * h), atol=1e-12)


def test_o2_reflection_is_involution():
    r = GroupElement.o2(0.8, reflection=True)
    assert (r * r).reflection is False
    assert np.allclose(r.matrix() @ r.matrix(), np.eye(2))
    assert np.isclose(np.linalg.det(r.matrix()), -1.0)


def test_conjugation_matrix_relation(rng):
    for j in range(4):
        xi = enumerate_irreps(Group.SO3, j).entries[j]
        C = conjugation_matrix(xi)
        g = GroupElement.random(Group.SO3, rng)
        D = irrep_matrix(xi, g)
        assert np.allclose(D.conj(), C @ D @ C.T, atol=1e-12)


@pytest.mark.parametrize("group,N", [(Group.SO2, 5), (Group.O2, 4), (Group.SO3, 3)])
def test_transform_round_trip(group, N, rng):
    table = enumerate_irreps(group, N)
    grid = quadrature_grid(group, N)
    X = FourierCoefficients.random(table, rng)
    f = synthesize_grid(X, grid)
    Y = fourier_transform(f, grid, table)
    assert Y.max_abs_diff(X) < 1e-10


def test_grid_too_coarse():
    table = enumerate_irreps(Group.SO3, 4)
    with pytest.raises(GridTooCoarseError):
        fourier_transform(np.zeros(so3_grid(5, 3, 5).shape), so3_grid(5, 3, 5), table)


def test_plancherel_against_dense_quadrature(rng):
    table = enumerate_irreps(Group.SO3, 2)
    X = FourierCoefficients.random(table, rng)
    grid = quadrature_grid(Group.SO3, 2, oversample=3)
    f = synthesize_grid(X, grid)
    l2 = math.sqrt(float(np.sum(grid.weights() * np.abs(f) ** 2)))
    assert plancherel_norm(X) == pytest.approx(l2, rel=1e-10)


def test_left_regular_action_translates_the_function(rng):
    table = enumerate_irreps(Group.SO3, 2)
    X = FourierCoefficients.random(table, rng)
    g = GroupElement.random(Group.SO3, rng)
    Y = act_left_regular(X, g)
    for _ in range(5):
        h = GroupElement.random(Group.SO3, rng)
        assert synthesize(Y, h) == pytest.approx(synthesize(X, g.inverse() * h), abs=1e-10)
    assert plancherel_norm(Y) == pytest.approx(plancherel_norm(X))


def test_apply_operator_with_identity_is_noop(rng):
    table = enumerate_irreps(Group.O2, 3)
    X = FourierCoefficients.random(table, rng)
    assert apply_operator(X, BlockDiagOperator.identity(table)).allclose(X)


def test_synthesize_many_matches_pointwise(rng):
    table = enumerate_irreps(Group.SO3, 3)
    X = FourierCoefficients.random(table, rng)
    els = [GroupElement.random(Group.SO3, rng) for _ in range(6)]
    a, b, c = np.array([e.angles for e in els]).T
    vals = synthesize_many(X, a, b, c)
    assert np.allclose(vals, [synthesize(X, e) for e in els], atol=1e-11)


def test_real_vector_is_isometric(rng):
    table = enumerate_irreps(Group.SO3, 2)
    X = FourierCoefficients.random(table, rng)
    v = X.real_vector()
    assert np.linalg.norm(v) == pytest.approx(plancherel_norm(X))
    assert FourierCoefficients.from_real_vector(table, v).allclose(X, atol=1e-13)


def test_blocks_are_read_only(rng):
    X = FourierCoefficients.random(enumerate_irreps(Group.SO3, 1), rng)
    with pytest.raises(ValueError):
        X.blocks[0][0, 0] = 1.0

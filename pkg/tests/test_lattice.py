import warnings
from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import diag_list, mat_mul, max_dev, self_comm, weighted_adjoint
from latcomm.lattice import (
    DiagonalSpec,
    LatticeOperator,
    NormNotConverged,
    SpaceKind,
    SpaceMismatchError,
    ToleranceConfig,
    WeightedSpace,
    adjoint,
    compose,
    diagonal,
    direct_sum,
    dyadic_space,
    estimate_norm,
    exact_scalar,
    identity,
    is_positive,
    operator_norm,
    restrict,
    self_commutator,
    sequence_space,
    switch_operator,
    zero,
)

small_ints = st.integers(min_value=-5, max_value=5)


def _frac_entries(op):
    return [[Fraction(str(v)) for v in row] for row in op.entries]


# -- spaces ------------------------------------------------------------------

def test_dyadic_weights_are_powers_of_two():
    space = dyadic_space(4)
    assert space.weights == (Fraction(1, 2), Fraction(1, 4), Fraction(1, 8), Fraction(1, 16))
    assert space.kind is SpaceKind.DYADIC


@pytest.mark.parametrize(
    "dim, weights, kind",
    [
        (2, (1, 2), SpaceKind.SEQUENCE),
        (2, (Fraction(1, 2), Fraction(1, 2)), SpaceKind.DYADIC),
        (2, (1, 0), SpaceKind.WEIGHTED),
        (3, (1, 1), SpaceKind.WEIGHTED),
    ],
)
def test_invalid_spaces_rejected(dim, weights, kind):
    with pytest.raises(ValueError):
        WeightedSpace(dim, weights, kind)


def test_direct_sum_keeps_blocks():
    space = WeightedSpace.direct_sum([sequence_space(2), dyadic_space(3)])
    assert space.dim == 5
    assert space.kind is SpaceKind.WEIGHTED
    assert space.block_offsets() == [0, 2]
    assert space.weights[2] == Fraction(1, 2)


@pytest.mark.parametrize("text, expected", [("3/4", sympy.Rational(3, 4)), ("0.5", sympy.Rational(1, 2)),
                                            (" 2 ", sympy.Integer(2)), ("sqrt(2)", sympy.sqrt(2))])
def test_exact_scalar_parsing(text, expected):
    assert exact_scalar(text) == expected


def test_operators_are_immutable():
    op = identity(sequence_space(2))
    with pytest.raises(AttributeError):
        op.entries = None
    with pytest.raises(ValueError):
        op.entries[0, 0] = 5


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        LatticeOperator(sequence_space(2), sequence_space(3), np.zeros((2, 3)))


# -- adjoint -----------------------------------------------------------------

def test_adjoint_of_identity():
    I = identity(dyadic_space(3))
    assert np.array_equal(adjoint(I).entries, I.entries)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.data())
def test_adjoint_matches_inner_product_oracle(m, n, data):
    dom = dyadic_space(n) if data.draw(st.booleans()) else sequence_space(n)
    cod = dyadic_space(m) if data.draw(st.booleans()) else sequence_space(m)
    raw = [[Fraction(data.draw(small_ints)) for _ in range(n)] for _ in range(m)]
    A = LatticeOperator(dom, cod, [[exact_scalar(v) for v in row] for row in raw])
    expected = weighted_adjoint(raw, list(dom.weights), list(cod.weights))
    assert _frac_entries(adjoint(A)) == expected
    # <Ax, y>_cod == <x, A*y>_dom for integer vectors
    x = [Fraction(data.draw(small_ints)) for _ in range(n)]
    y = [Fraction(data.draw(small_ints)) for _ in range(m)]
    Ax = [sum(raw[i][j] * x[j] for j in range(n)) for i in range(m)]
    Asy = [sum(expected[i][j] * y[j] for j in range(m)) for i in range(n)]
    lhs = sum(cod.weights[i] * Ax[i] * y[i] for i in range(m))
    rhs = sum(dom.weights[i] * x[i] * Asy[i] for i in range(n))
    assert lhs == rhs
    assert _frac_entries(adjoint(adjoint(A))) == raw


def test_adjoint_reverses_composition(rng):
    a = LatticeOperator(dyadic_space(3), sequence_space(2), rng.random((2, 3)))
    b = LatticeOperator(sequence_space(4), dyadic_space(3), rng.random((3, 4)))
    lhs = adjoint(compose(a, b)).float_entries()
    rhs = compose(adjoint(b), adjoint(a)).float_entries()
    assert np.allclose(lhs, rhs, atol=1e-14)


# -- compose -----------------------------------------------------------------

def test_compose_identity_law(rng):
    A = LatticeOperator(sequence_space(3), dyadic_space(2), rng.random((2, 3)))
    assert np.array_equal(compose(identity(dyadic_space(2), exact=False), A).float_entries(), A.float_entries())


def test_compose_mismatch_names_both_spaces():
    a = identity(sequence_space(2))
    b = identity(dyadic_space(2))
    with pytest.raises(SpaceMismatchError, match="DyadicStepSpace"):
        compose(a, b)


def test_compose_of_positive_is_positive(rng):
    for _ in range(20):
        a = LatticeOperator(sequence_space(4), sequence_space(4), rng.random((4, 4)))
        b = LatticeOperator(sequence_space(4), sequence_space(4), rng.random((4, 4)))
        assert is_positive(compose(a, b))


def test_exact_compose_matches_oracle():
    raw_a = [[Fraction(1, 2), 0], [3, Fraction(-1, 3)]]
    raw_b = [[2, 1], [0, Fraction(5, 7)]]
    a = LatticeOperator(sequence_space(2), sequence_space(2), [[exact_scalar(v) for v in r] for r in raw_a])
    b = LatticeOperator(sequence_space(2), sequence_space(2), [[exact_scalar(v) for v in r] for r in raw_b])
    assert _frac_entries(compose(a, b)) == mat_mul(raw_a, raw_b)


# -- self-commutator ---------------------------------------------------------

def test_self_commutator_of_truncated_shift():
    shift = np.zeros((4, 4), dtype=object)
    shift[:] = sympy.S.Zero
    for i in range(3):
        shift[i + 1, i] = sympy.S.One
    A = LatticeOperator(sequence_space(4), sequence_space(4), shift)
    assert _frac_entries(self_commutator(A)) == diag_list([1, 0, 0, -1])


def test_self_commutator_of_self_adjoint_vanishes(rng):
    M = rng.random((3, 3))
    A = LatticeOperator(sequence_space(3), sequence_space(3), M + M.T)
    assert np.max(np.abs(self_commutator(A).float_entries())) < 1e-14


def test_self_commutator_needs_endomorphism():
    with pytest.raises(SpaceMismatchError):
        self_commutator(zero(sequence_space(2), sequence_space(3)))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.data())
def test_weighted_self_commutator_matches_oracle(n, data):
    space = dyadic_space(n)
    raw = [[Fraction(data.draw(st.integers(0, 4))) for _ in range(n)] for _ in range(n)]
    A = LatticeOperator(space, space, [[exact_scalar(v) for v in row] for row in raw])
    assert _frac_entries(self_commutator(A)) == self_comm(raw, list(space.weights))


# -- positivity --------------------------------------------------------------

def test_positivity_witness_is_one_based():
    C = diagonal(sequence_space(3), [1, 0, -1])
    result = is_positive(C)
    assert not result
    assert result.witness == (3, 3, -1.0)
    assert is_positive(zero(sequence_space(3)))


def test_positivity_tolerance():
    C = diagonal(sequence_space(2), [1.0, -1e-13], exact=False)
    assert is_positive(C, ToleranceConfig(pos_tol=1e-12))
    assert not is_positive(C, ToleranceConfig(pos_tol=0.0))


# -- norms -------------------------------------------------------------------

def test_diagonal_norm():
    assert operator_norm(diagonal(sequence_space(3), [3, 1, 2])) == 3.0
    assert operator_norm(zero(dyadic_space(3))) == 0.0


def test_power_iteration_matches_svd_oracle(rng):
    for _ in range(10):
        dom, cod = dyadic_space(4), WeightedSpace.direct_sum([sequence_space(2), dyadic_space(2)])
        M = rng.random((4, 4))
        A = LatticeOperator(dom, cod, M)
        s_cod = np.sqrt([float(w) for w in cod.weights])
        s_dom = np.sqrt([float(w) for w in dom.weights])
        expected = np.linalg.svd(M * s_cod[:, None] / s_dom[None, :], compute_uv=False)[0]
        est = estimate_norm(A)
        assert est.converged
        assert abs(est.value - expected) <= 1e-9 * expected


def test_non_convergence_is_flagged(rng):
    A = LatticeOperator(sequence_space(5), sequence_space(5), rng.random((5, 5)))
    cfg = ToleranceConfig(norm_iters=1)
    est = estimate_norm(A, cfg)
    assert not est.converged and est.method == "power"
    with pytest.warns(NormNotConverged):
        operator_norm(A, cfg)


def test_norm_of_converged_estimate_does_not_warn(rng):
    A = LatticeOperator(sequence_space(3), sequence_space(3), rng.random((3, 3)))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        operator_norm(A)


# -- direct sums, switch, restriction ----------------------------------------

def test_direct_sum_of_identity_and_zero():
    s = direct_sum([identity(sequence_space(2)), zero(sequence_space(2))])
    assert _frac_entries(s) == diag_list([1, 1, 0, 0])


def test_switch_is_symmetric_involution():
    H = WeightedSpace.direct_sum([dyadic_space(3), dyadic_space(3)])
    U = switch_operator(H)
    assert _frac_entries(adjoint(U)) == _frac_entries(U)
    assert _frac_entries(compose(U, U)) == diag_list([1] * 6)


def test_switch_moves_second_block_to_first():
    H = WeightedSpace.direct_sum([sequence_space(1), sequence_space(1)])
    U = switch_operator(H)
    T = diagonal(H, [0, 5])
    moved = compose(compose(adjoint(U), T), U)
    assert _frac_entries(moved) == diag_list([5, 0])


def test_switch_rejects_unequal_halves():
    with pytest.raises(SpaceMismatchError):
        switch_operator(WeightedSpace.direct_sum([sequence_space(1), sequence_space(2)]))
    with pytest.raises(SpaceMismatchError):
        switch_operator(sequence_space(4))


def test_restrict_keeps_weights():
    space = dyadic_space(4)
    A = diagonal(space, [1, 2, 3, 4])
    sub = restrict(A, [1, 3], [1, 3])
    assert sub.domain.weights == (Fraction(1, 4), Fraction(1, 16))
    assert _frac_entries(sub) == diag_list([2, 4])


# -- diagonal specs ----------------------------------------------------------

def test_diagonal_spec_support_and_kernel():
    d = DiagonalSpec.on_sequence([1, 0, Fraction(1, 2), 0])
    assert d.support == (0, 2)
    assert d.kernel == (1, 3)
    assert d.rational
    assert d.max() == 1


def test_diagonal_spec_rejects_negative():
    with pytest.raises(ValueError):
        DiagonalSpec.on_dyadic([1, -1])

import json
from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import mat_mul, self_comm
from latcomm.lattice import (
    DiagonalSpec,
    LatticeOperator,
    ToleranceConfig,
    diagonal,
    dyadic_space,
    identity,
    self_commutator,
    sequence_space,
    zero,
)
from latcomm.selfcommutator import (
    build_block_shift,
    partition_diagonal,
    realize_diagonal,
    switched_lemma,
)
from latcomm.serialize import operator_from_dict
from latcomm.verifiers import (
    Verdict,
    _run_chunk,
    certificate_power_inequality,
    check_finite_selfcommutator_vanishes,
    check_idempotent_theorem,
    check_power_inequality,
    run_campaign,
    sample_positive_idempotents,
    trace_obstruction,
    verify_certificate,
)

F = Fraction


def _op(rows, space=None):
    n = len(rows)
    space = space or sequence_space(n)
    return LatticeOperator(space, space, np.array(rows, dtype=float))


# -- idempotents ---------------------------------------------------------------

def test_band_projection_is_case_d():
    v = check_idempotent_theorem(diagonal(sequence_space(3), [1, 0, 1]))
    assert v.case == "hypotheses_hold" and v.passed


def test_rank_one_oblique_idempotent_is_case_c():
    x, f = [1, 1], [1, 0]
    A = [[x[i] * f[j] for j in range(2)] for i in range(2)]
    assert mat_mul(A, A) == A
    # oracle: C = A^T A - A A^T computed by hand
    assert self_comm(A, [1, 1]) == [[1, -1], [-1, -1]]
    v = check_idempotent_theorem(_op(A))
    assert v.case == "commutator_not_positive" and v.passed and not v.applicable


def test_zero_is_case_d():
    v = check_idempotent_theorem(zero(sequence_space(3), exact=False))
    assert v.case == "hypotheses_hold" and v.passed


def test_idempotent_classification_of_other_cases():
    assert check_idempotent_theorem(_op([[-1, 0], [0, 1]])).case == "not_positive"
    assert check_idempotent_theorem(_op([[2, 0], [0, 1]])).case == "not_idempotent"


def test_idempotent_check_rejects_rectangular():
    with pytest.raises(ValueError):
        check_idempotent_theorem(zero(sequence_space(2), sequence_space(3)))


def test_sampled_idempotents_are_idempotent_and_positive():
    ops = list(sample_positive_idempotents(4, 60, seed=3))
    assert np.array_equal(ops[0].float_entries(), np.eye(4))
    for A in ops:
        E = A.float_entries()
        assert np.min(E) >= 0
        assert np.max(np.abs(E @ E - E)) <= 1e-12
    assert any(A.domain.compatible(dyadic_space(4)) for A in ops)
    assert list(sample_positive_idempotents(3, 0)) == []


def test_sampling_is_deterministic():
    a = [A.float_entries() for A in sample_positive_idempotents(3, 10, seed=9)]
    b = [A.float_entries() for A in sample_positive_idempotents(3, 10, seed=9)]
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


def test_weighted_orthogonal_projection_passes():
    # projection onto span(chi_1 + chi_2) in the dyadic space is weight-orthogonal
    space = dyadic_space(2)
    x = np.array([1.0, 1.0])
    w = np.array([0.5, 0.25])
    P = np.outer(x, w * x) / np.sum(w * x * x)
    v = check_idempotent_theorem(LatticeOperator(space, space, P))
    assert v.case == "hypotheses_hold" and v.passed


# -- finite power-compact analog ----------------------------------------------

def test_symmetric_matrix_has_zero_commutator():
    v = check_finite_selfcommutator_vanishes(_op([[1, 2], [2, 3]]))
    assert v.case == "hypotheses_hold" and v.details["commutator_size"] == 0


def test_truncated_shift_is_vacuous():
    shift = np.diag(np.ones(3), -1)
    v = check_finite_selfcommutator_vanishes(_op(shift))
    assert v.case == "commutator_not_positive" and v.details["witness"] == (4, 4, -1.0)


def test_power_compact_check_requires_positive():
    with pytest.raises(ValueError):
        check_finite_selfcommutator_vanishes(_op([[0, -1], [1, 0]]))


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 5), st.data())
def test_positive_commutator_always_vanishes(n, data):
    vals = data.draw(st.lists(st.integers(0, 3), min_size=n * n, max_size=n * n))
    A = _op(np.array(vals, dtype=float).reshape(n, n))
    v = check_finite_selfcommutator_vanishes(A)
    assert v.passed


# -- power inequality ------------------------------------------------------------

def test_power_inequality_symmetric_equality():
    v = check_power_inequality(_op([[1, 2], [2, 1]]), 5)
    assert v.case == "hypotheses_hold" and v.passed
    for stats in v.details["powers"].values():
        assert abs(stats["min_entry"]) <= 1e-9


def test_power_inequality_weighted_permutation_is_inapplicable():
    A = [[0, 2], [1, 0]]
    # oracle: without C >= 0 the entrywise order already fails at n = 2
    AsA = mat_mul([[0, 1], [2, 0]], A)
    A2 = mat_mul(A, A)
    lhs = mat_mul(mat_mul([[0, 1], [2, 0]], [[0, 1], [2, 0]]), A2)
    rhs = mat_mul(AsA, AsA)
    assert min(lhs[i][j] - rhs[i][j] for i in range(2) for j in range(2)) < 0
    v = check_power_inequality(_op(A), 4)
    assert v.case == "inapplicable" and v.passed and not v.applicable


def test_power_inequality_on_certificates():
    cert = realize_diagonal([F(1, 2**k) for k in range(10)], 4)
    assert certificate_power_inequality(cert, 5).passed
    assert certificate_power_inequality(switched_lemma(DiagonalSpec.on_dyadic([1, 2]), 3), 4).passed


# -- trace obstruction -------------------------------------------------------------

def test_identity_is_not_a_commutator():
    v = trace_obstruction(identity(sequence_space(3)))
    assert v.case == "not_a_commutator" and v.details["delta"] == "1"


def test_zero_has_no_obstruction():
    assert trace_obstruction(zero(sequence_space(2))).case == "no_obstruction"


def test_trace_obstruction_with_kernel():
    v = trace_obstruction(diagonal(sequence_space(2), [1, 0]))
    assert v.case == "not_a_commutator" and v.details["trace"] == "1"


def test_trace_obstruction_needs_diagonal():
    with pytest.raises(ValueError):
        trace_obstruction(_op([[1, 1], [0, 1]]))


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 32), st.fractions(min_value=F(1, 10**6), max_value=100))
def test_scalar_multiples_of_identity_are_obstructed(n, delta):
    v = trace_obstruction(diagonal(sequence_space(n), [delta] * n))
    assert v.details["obstructed"] and Fraction(v.details["delta"]) == delta


def test_commutator_traces_vanish(rng):
    for _ in range(50):
        n = int(rng.integers(1, 6))
        space = dyadic_space(n) if rng.random() < 0.5 else sequence_space(n)
        A = LatticeOperator(space, space, rng.random((n, n)))
        assert abs(np.trace(self_commutator(A).float_entries())) <= 1e-10


# -- certificate verification ------------------------------------------------------

def test_block_shift_certificate_verifies():
    cert = build_block_shift(partition_diagonal([1, F(1, 2)], 3))
    report = verify_certificate(cert)
    assert report.passed
    assert {c.name for c in report.checks} >= {"positivity", "verified_region_equality", "operator_norm_bound"}


def test_tampered_certificate_fails_with_witness():
    cert = build_block_shift(partition_diagonal([1, F(1, 2)], 3), exact=True)
    entries = cert.A.entries.copy()
    entries[1, 0] = -entries[1, 0]
    bad = replace(cert, A=LatticeOperator(cert.space, cert.space, entries))
    report = verify_certificate(bad)
    assert not report.passed
    pos = next(c for c in report.checks if c.name == "positivity")
    assert not pos.passed and "(2, 1)" in pos.detail


def test_zero_certificate_verifies():
    cert = build_block_shift(partition_diagonal([0, 0], 2))
    assert verify_certificate(cert).passed


def test_overclaimed_edge_bound_fails():
    cert = realize_diagonal([1, 1], 3)
    report = verify_certificate(replace(cert, edge_bound=0.1))
    assert not report.passed


# -- campaigns -----------------------------------------------------------------------

@pytest.mark.parametrize("name", ["idempotent", "powercompact", "powerineq", "trace"])
def test_campaign_is_deterministic_and_clean(name):
    a = run_campaign(name, 4, 300, seed=11)
    b = run_campaign(name, 4, 300, seed=11)
    assert a.to_json() == b.to_json()
    assert a.passed and sum(a.tallies.values()) == 300
    data = json.loads(a.to_json())
    assert data["seed"] == 11 and data["tool_version"] and data["statement"]


def test_campaign_chunking_does_not_change_report():
    a = run_campaign("powercompact", 5, 500, seed=4, chunk=64)
    b = run_campaign("powercompact", 5, 500, seed=4)
    assert a.to_json() == b.to_json()


def test_campaign_with_workers_matches_sequential():
    a = run_campaign("idempotent", 4, 400, seed=2, workers=2, chunk=100)
    b = run_campaign("idempotent", 4, 400, seed=2)
    assert a.to_json() == b.to_json()


def test_counterexamples_reverify_from_serialized_operator():
    shift = _op(np.diag(np.ones(2), -1))

    def failing_trial(t, n, seed, cfg):
        return shift, Verdict("hypotheses_hold", False, True, {"forced": True})

    (_, case, cex), = _run_chunk(failing_trial, range(1), n=3, seed=0, cfg=ToleranceConfig())
    assert case == "hypotheses_hold" and cex["trial"] == 0
    again = operator_from_dict(json.loads(json.dumps(cex["operator"])))
    assert np.array_equal(again.float_entries(), shift.float_entries())
    assert again.domain.compatible(shift.domain)

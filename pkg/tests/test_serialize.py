import json
from fractions import Fraction

import numpy as np
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from latcomm.lattice import LatticeOperator, WeightedSpace, dyadic_space, sequence_space
from latcomm.selfcommutator import mixed_identity_block, realize_diagonal
from latcomm.serialize import (
    certificate_from_dict,
    certificate_to_dict,
    dumps,
    operator_from_dict,
    operator_to_dict,
    read_matrix_csv,
    space_from_dict,
    space_to_dict,
    write_matrix_csv,
)
from latcomm.verifiers import verify_certificate


def test_space_round_trip_with_blocks():
    space = WeightedSpace.direct_sum([sequence_space(2), dyadic_space(3)])
    again = space_from_dict(json.loads(json.dumps(space_to_dict(space))))
    assert again == space
    assert [b.kind for b in again.blocks] == [b.kind for b in space.blocks]


def test_weights_are_fraction_strings():
    assert space_to_dict(dyadic_space(2))["weights"] == ["1/2", "1/4"]


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=4, max_size=4))
def test_float_entries_round_trip_bit_for_bit(values):
    space = sequence_space(2)
    A = LatticeOperator(space, space, np.array(values).reshape(2, 2))
    again = operator_from_dict(json.loads(json.dumps(operator_to_dict(A))))
    assert np.array_equal(again.float_entries(), A.float_entries())


def test_exact_entries_round_trip():
    space = sequence_space(2)
    A = LatticeOperator(space, space, [[sympy.Rational(3, 4), sympy.sqrt(6) / 2], [0, Fraction(-1, 3)]])
    data = operator_to_dict(A)
    assert data["entries"][0] == ["3/4", "sqrt(6)/2"]
    again = operator_from_dict(data)
    assert again.exact
    assert all(a == b for a, b in zip(again.entries.flat, A.entries.flat))


def test_csv_round_trip(tmp_path):
    cert = mixed_identity_block(1, 1, 3, exact=True)
    path = write_matrix_csv(cert.A, tmp_path / "z.csv")
    assert path.read_text().splitlines()[1] == "sqrt(2),0,0"
    back = read_matrix_csv(path, exact=True)
    assert all(a == b for a, b in zip(back.flat, cert.A.entries.flat))


def test_certificate_inline_round_trip():
    cert = realize_diagonal([1, Fraction(1, 2), Fraction(1, 4)], 3, exact=True)
    data = json.loads(dumps(certificate_to_dict(cert, seed=3)))
    assert data["seed"] == 3 and data["tag"] == cert.tag
    again = certificate_from_dict(data)
    assert again.verified_region == cert.verified_region
    assert again.permutation == cert.permutation
    assert verify_certificate(again).passed


def test_certificate_csv_references(tmp_path):
    cert = realize_diagonal([1, 2, 3], 3)
    data = certificate_to_dict(cert, tmp_path / "m", ref_base=tmp_path)
    assert data["A"]["csv"] == "m/A.csv"
    (tmp_path / "c.json").write_text(dumps(data))
    again = certificate_from_dict(json.loads((tmp_path / "c.json").read_text()), tmp_path)
    assert np.array_equal(again.A.float_entries(), cert.A.float_entries())


def test_dumps_is_deterministic():
    cert = realize_diagonal([1, 1], 3)
    assert dumps(certificate_to_dict(cert)) == dumps(certificate_to_dict(cert))

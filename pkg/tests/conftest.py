"""Independent oracles: plain Python arithmetic on nested lists, no library code."""

from fractions import Fraction

import numpy as np
import pytest
import sympy


def mat_mul(a, b):
    return [[sum(a[i][k] * b[k][j] for k in range(len(b))) for j in range(len(b[0]))] for i in range(len(a))]


def weighted_adjoint(a, w_dom, w_cod):
    """A* with <Ax, y>_cod = <x, A*y>_dom, entrywise."""
    return [[a[j][i] * w_cod[j] / w_dom[i] for j in range(len(a))] for i in range(len(a[0]))]


def self_comm(a, w):
    s = weighted_adjoint(a, w, w)
    left, right = mat_mul(s, a), mat_mul(a, s)
    return [[left[i][j] - right[i][j] for j in range(len(a))] for i in range(len(a))]


def as_lists(op, exact=True):
    if exact:
        return [[sympy.nsimplify(v) if not isinstance(v, sympy.Basic) else v for v in row] for row in op.entries]
    return op.float_entries().tolist()


def weights(space, exact=True):
    return [Fraction(w) if exact else float(w) for w in space.weights]


def diag_list(values):
    n = len(values)
    return [[values[i] if i == j else 0 for j in range(n)] for i in range(n)]


def max_dev(a, b):
    return max((abs(float(a[i][j] - b[i][j])) for i in range(len(a)) for j in range(len(a[0]))), default=0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

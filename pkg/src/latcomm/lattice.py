"""Weighted coordinate spaces and the operators between them.

A finite Hilbert lattice is modeled by a coordinate space with a distinguished
disjoint positive basis ``e_1, ..., e_n`` and the inner product
``<e_i, e_j> = w_i * delta_ij``.  Two families matter:

* ``SequenceSpace``   -- the truncation of l^2, all weights 1;
* ``DyadicStepSpace`` -- span of the indicators chi_k of [2^-k, 2^-k+1] inside
  L^2[0,1]; the weight of chi_k is its squared norm 2^-k.

Operators are dense matrices (codomain-indexed rows).  Entries are either
float64 or, in exact mode, sympy numbers (rationals and square roots of
rationals) held in an object array.  Lattice positivity always means entrywise
nonnegativity in the canonical basis; it is never confused with positive
semidefiniteness.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Iterable, NamedTuple, Sequence

import numpy as np
import sympy

__all__ = [
    "SpaceKind",
    "WeightedSpace",
    "sequence_space",
    "dyadic_space",
    "LatticeOperator",
    "DiagonalSpec",
    "ToleranceConfig",
    "SpaceMismatchError",
    "PositivityResult",
    "NormEstimate",
    "NormNotConverged",
    "adjoint",
    "compose",
    "self_commutator",
    "is_positive",
    "operator_norm",
    "estimate_norm",
    "direct_sum",
    "switch_operator",
    "identity",
    "zero",
    "diagonal",
    "restrict",
    "to_exact",
    "exact_scalar",
    "max_abs",
]


class SpaceMismatchError(ValueError):
    """Raised when operator spaces do not line up."""


class SpaceKind(str, enum.Enum):
    SEQUENCE = "SequenceSpace"
    DYADIC = "DyadicStepSpace"
    # concatenations of mixed blocks and coordinate restrictions
    WEIGHTED = "WeightedSpace"


def _as_fraction(w) -> Fraction:
    if isinstance(w, Fraction):
        return w
    if isinstance(w, (int, Rational)):
        return Fraction(int(w.numerator), int(w.denominator))
    if isinstance(w, str):
        return Fraction(w)
    if isinstance(w, sympy.Rational):
        return Fraction(int(w.p), int(w.q))
    if isinstance(w, float):
        return Fraction(w)
    raise TypeError(f"weight {w!r} is not rational")


@dataclass(frozen=True)
class WeightedSpace:
    dim: int
    weights: tuple[Fraction, ...]
    kind: SpaceKind = SpaceKind.WEIGHTED
    blocks: tuple["WeightedSpace", ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        weights = tuple(_as_fraction(w) for w in self.weights)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "kind", SpaceKind(self.kind))
        if self.dim < 0 or len(weights) != self.dim:
            raise ValueError(f"dim {self.dim} does not match {len(weights)} weights")
        if any(w <= 0 for w in weights):
            raise ValueError("all weights must be strictly positive")
        if self.kind is SpaceKind.SEQUENCE and any(w != 1 for w in weights):
            raise ValueError("SequenceSpace weights must all be 1")
        if self.kind is SpaceKind.DYADIC:
            for k, w in enumerate(weights, start=1):
                if w != Fraction(1, 2**k):
                    raise ValueError(f"DyadicStepSpace weight {k} must be 2^-{k}, got {w}")
        if self.blocks is not None:
            blocks = tuple(self.blocks)
            object.__setattr__(self, "blocks", blocks)
            if sum(b.dim for b in blocks) != self.dim:
                raise ValueError("block dimensions do not sum to dim")
            if tuple(w for b in blocks for w in b.weights) != weights:
                raise ValueError("block weights do not concatenate to the space weights")

    @property
    def depth(self) -> int:
        return self.dim

    def compatible(self, other: "WeightedSpace") -> bool:
        return self.dim == other.dim and self.weights == other.weights and self.kind == other.kind

    def weight_array(self, exact: bool = False) -> np.ndarray:
        if exact:
            return np.array([sympy.Rational(w.numerator, w.denominator) for w in self.weights], dtype=object)
        return np.array([float(w) for w in self.weights], dtype=float)

    def block_offsets(self) -> list[int]:
        """Start index of every block (a single block when unstructured)."""
        if self.blocks is None:
            return [0]
        offsets, start = [], 0
        for b in self.blocks:
            offsets.append(start)
            start += b.dim
        return offsets

    @staticmethod
    def direct_sum(spaces: Iterable["WeightedSpace"]) -> "WeightedSpace":
        spaces = tuple(spaces)
        weights = tuple(w for s in spaces for w in s.weights)
        kind = SpaceKind.SEQUENCE if all(s.kind is SpaceKind.SEQUENCE for s in spaces) else SpaceKind.WEIGHTED
        return WeightedSpace(len(weights), weights, kind, spaces)

    @staticmethod
    def copies(space: "WeightedSpace", count: int) -> "WeightedSpace":
        return WeightedSpace.direct_sum([space] * count)

    def describe(self) -> str:
        return f"{self.kind.value}(dim={self.dim})"


def sequence_space(n: int) -> WeightedSpace:
    return WeightedSpace(n, (Fraction(1),) * n, SpaceKind.SEQUENCE)


def dyadic_space(depth: int) -> WeightedSpace:
    return WeightedSpace(depth, tuple(Fraction(1, 2**k) for k in range(1, depth + 1)), SpaceKind.DYADIC)


@dataclass(frozen=True)
class ToleranceConfig:
    eq_tol: float = 1e-10
    pos_tol: float = 1e-12
    norm_iters: int = 200

    def __post_init__(self):
        if self.eq_tol < 0 or self.pos_tol < 0:
            raise ValueError("tolerances must be nonnegative")
        if self.norm_iters < 1:
            raise ValueError("norm_iters must be at least 1")

    def to_dict(self) -> dict:
        return {"eq_tol": self.eq_tol, "pos_tol": self.pos_tol, "norm_iters": self.norm_iters}


# -- scalars -----------------------------------------------------------------

def exact_scalar(x):
    """Convert an int, Fraction, float, decimal string or sympy number to sympy."""
    if isinstance(x, sympy.Basic):
        return x
    if isinstance(x, (bool, np.bool_)):
        raise TypeError("booleans are not scalars")
    if isinstance(x, (int, np.integer)):
        return sympy.Integer(int(x))
    if isinstance(x, (Fraction, Rational)):
        return sympy.Rational(int(x.numerator), int(x.denominator))
    if isinstance(x, (float, np.floating)):
        f = Fraction(float(x))
        return sympy.Rational(f.numerator, f.denominator)
    if isinstance(x, str):
        try:
            f = Fraction(x.strip())
        except ValueError:
            return sympy.sympify(x)
        return sympy.Rational(f.numerator, f.denominator)
    raise TypeError(f"cannot convert {x!r} to an exact scalar")


def to_exact(values: np.ndarray) -> np.ndarray:
    arr = np.asarray(values)
    out = np.empty(arr.shape, dtype=object)
    for idx, v in np.ndenumerate(arr):
        out[idx] = exact_scalar(v)
    return out


def _to_float(values: np.ndarray) -> np.ndarray:
    if values.dtype == object:
        return np.array([float(v) for v in values.flat], dtype=float).reshape(values.shape)
    return np.asarray(values, dtype=float)


def max_abs(values: np.ndarray) -> float:
    """Largest absolute entry as a float (0 for empty arrays)."""
    if values.size == 0:
        return 0.0
    if values.dtype == object:
        return max(float(abs(v)) for v in values.flat)
    return float(np.max(np.abs(values)))


def _matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.dtype != object and b.dtype != object:
        return a @ b
    if a.dtype != object:
        a = to_exact(a)
    if b.dtype != object:
        b = to_exact(b)
    # construction matrices are sparse; skipping zeros keeps sympy tractable
    out = np.full((a.shape[0], b.shape[1]), sympy.S.Zero, dtype=object)
    b_rows = [[(j, v) for j, v in enumerate(row) if v != 0] for row in b]
    for i in range(a.shape[0]):
        for k, aik in enumerate(a[i]):
            if aik == 0:
                continue
            for j, bkj in b_rows[k]:
                out[i, j] = out[i, j] + aik * bkj
    return out


# -- operators ---------------------------------------------------------------

class LatticeOperator:
    """Dense matrix from ``domain`` to ``codomain``; immutable."""

    __slots__ = ("domain", "codomain", "entries")

    def __init__(self, domain: WeightedSpace, codomain: WeightedSpace, entries):
        if _is_object(entries):
            arr = to_exact(np.array(entries, dtype=object))
        else:
            arr = np.array(entries, dtype=float)
        if arr.ndim != 2 or arr.shape != (codomain.dim, domain.dim):
            raise ValueError(f"entries shape {arr.shape} != ({codomain.dim}, {domain.dim})")
        arr.setflags(write=False)
        object.__setattr__(self, "domain", domain)
        object.__setattr__(self, "codomain", codomain)
        object.__setattr__(self, "entries", arr)

    def __setattr__(self, name, value):
        raise AttributeError("LatticeOperator is immutable")

    @property
    def exact(self) -> bool:
        return self.entries.dtype == object

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    def is_endomorphism(self) -> bool:
        return self.domain.compatible(self.codomain)

    def as_float(self) -> "LatticeOperator":
        if not self.exact:
            return self
        return LatticeOperator(self.domain, self.codomain, _to_float(self.entries))

    def as_exact(self) -> "LatticeOperator":
        if self.exact:
            return self
        return LatticeOperator(self.domain, self.codomain, to_exact(self.entries))

    def float_entries(self) -> np.ndarray:
        return _to_float(self.entries)

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x)
        if self.exact and x.dtype == object:
            return _matmul(self.entries, x.reshape(-1, 1)).ravel()
        return self.float_entries() @ np.asarray(x, dtype=float)

    def __add__(self, other: "LatticeOperator") -> "LatticeOperator":
        _require_same(self.domain, other.domain)
        _require_same(self.codomain, other.codomain)
        a, b = _common(self.entries, other.entries)
        return LatticeOperator(self.domain, self.codomain, a + b)

    def __sub__(self, other: "LatticeOperator") -> "LatticeOperator":
        _require_same(self.domain, other.domain)
        _require_same(self.codomain, other.codomain)
        a, b = _common(self.entries, other.entries)
        return LatticeOperator(self.domain, self.codomain, a - b)

    def __neg__(self) -> "LatticeOperator":
        return LatticeOperator(self.domain, self.codomain, -self.entries)

    def __matmul__(self, other: "LatticeOperator") -> "LatticeOperator":
        return compose(self, other)

    def __repr__(self):
        mode = "exact" if self.exact else "float"
        return f"LatticeOperator({self.domain.describe()} -> {self.codomain.describe()}, {mode})"


def _is_object(entries) -> bool:
    if isinstance(entries, np.ndarray):
        return entries.dtype == object
    return any(isinstance(v, (sympy.Basic, Fraction)) for v in np.asarray(entries, dtype=object).flat)


def _common(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if a.dtype == object and b.dtype == object:
        return a, b
    return _to_float(a), _to_float(b)


def _require_same(left: WeightedSpace, right: WeightedSpace) -> None:
    if not left.compatible(right):
        raise SpaceMismatchError(f"space mismatch: {left.describe()} vs {right.describe()}")


def identity(space: WeightedSpace, exact: bool = True) -> LatticeOperator:
    return diagonal(space, [1] * space.dim, exact=exact)


def zero(domain: WeightedSpace, codomain: WeightedSpace | None = None, exact: bool = True) -> LatticeOperator:
    codomain = domain if codomain is None else codomain
    if exact:
        entries = np.full((codomain.dim, domain.dim), sympy.S.Zero, dtype=object)
    else:
        entries = np.zeros((codomain.dim, domain.dim))
    return LatticeOperator(domain, codomain, entries)


def diagonal(space: WeightedSpace, values: Sequence, exact: bool = True) -> LatticeOperator:
    if len(values) != space.dim:
        raise ValueError("diagonal length does not match the space")
    if exact:
        entries = np.full((space.dim, space.dim), sympy.S.Zero, dtype=object)
        for i, v in enumerate(values):
            entries[i, i] = exact_scalar(v)
    else:
        entries = np.diag(np.asarray([float(v) for v in values], dtype=float)).reshape(space.dim, space.dim)
    return LatticeOperator(space, space, entries)


def adjoint(A: LatticeOperator) -> LatticeOperator:
    """Hilbert-space adjoint ``W_dom^-1 A^T W_cod``.

    Every adjoint in the package goes through here; with non-unit weights the
    plain transpose is not the adjoint.
    """
    exact = A.exact
    w_dom = A.domain.weight_array(exact)
    w_cod = A.codomain.weight_array(exact)
    entries = A.entries.T * w_cod[np.newaxis, :] / w_dom[:, np.newaxis]
    return LatticeOperator(A.codomain, A.domain, entries)


def compose(A: LatticeOperator, B: LatticeOperator) -> LatticeOperator:
    """``A @ B`` -- apply B first."""
    if not B.codomain.compatible(A.domain):
        raise SpaceMismatchError(
            f"cannot compose: B maps into {B.codomain.describe()} but A acts on {A.domain.describe()}"
        )
    return LatticeOperator(B.domain, A.codomain, _matmul(A.entries, B.entries))


def self_commutator(A: LatticeOperator) -> LatticeOperator:
    """``A*A - AA*``."""
    if not A.is_endomorphism():
        raise SpaceMismatchError(f"self-commutator needs an endomorphism, got {A!r}")
    As = adjoint(A)
    return compose(As, A) - compose(A, As)


class PositivityResult(NamedTuple):
    positive: bool
    witness: tuple[int, int, float] | None  # 1-based (row, col, value) of the minimum entry

    def __bool__(self):
        return self.positive


def is_positive(A: LatticeOperator, cfg: ToleranceConfig = ToleranceConfig()) -> PositivityResult:
    """Entrywise nonnegativity up to ``pos_tol``; witness is the most negative entry."""
    if A.entries.size == 0:
        return PositivityResult(True, None)
    values = A.float_entries()
    i, j = np.unravel_index(int(np.argmin(values)), values.shape)
    value = float(values[i, j])
    return PositivityResult(value >= -cfg.pos_tol, (int(i) + 1, int(j) + 1, value))


class NormEstimate(NamedTuple):
    value: float
    converged: bool
    iterations: int
    method: str


class NormNotConverged(RuntimeWarning):
    pass


def _normalized(A: LatticeOperator) -> np.ndarray:
    """Matrix of A in orthonormal coordinates: S_cod A S_dom^-1, S = sqrt(W)."""
    s_cod = np.sqrt(A.codomain.weight_array())
    s_dom = np.sqrt(A.domain.weight_array())
    return A.float_entries() * s_cod[:, np.newaxis] / s_dom[np.newaxis, :]


def estimate_norm(A: LatticeOperator, cfg: ToleranceConfig = ToleranceConfig()) -> NormEstimate:
    """Weighted operator norm, by power iteration on A*A.

    Shortcuts: a diagonal operator between identical spaces has norm
    ``max |d_i|``; more generally when A*A is diagonal the norm is the square
    root of its largest entry.
    """
    if A.entries.size == 0:
        return NormEstimate(0.0, True, 0, "empty")
    B = _normalized(A)
    if A.is_endomorphism() and not np.any(B - np.diag(np.diag(B))):
        return NormEstimate(float(np.max(np.abs(np.diag(B)))), True, 0, "diagonal")
    M = B.T @ B
    if not np.any(M - np.diag(np.diag(M))):
        return NormEstimate(float(np.sqrt(max(np.max(np.diag(M)), 0.0))), True, 0, "gram-diagonal")
    rng = np.random.default_rng(0)
    x = 1.0 + rng.random(M.shape[0])
    x /= np.linalg.norm(x)
    lam = 0.0
    for it in range(1, cfg.norm_iters + 1):
        y = M @ x
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return NormEstimate(0.0, True, it, "power")
        new = float(x @ y)
        x = y / ny
        if abs(new - lam) <= 1e-15 * max(new, 1e-300):
            return NormEstimate(float(np.sqrt(max(new, 0.0))), True, it, "power")
        lam = new
    return NormEstimate(float(np.sqrt(max(lam, 0.0))), False, cfg.norm_iters, "power")


def operator_norm(A: LatticeOperator, cfg: ToleranceConfig = ToleranceConfig()) -> float:
    est = estimate_norm(A, cfg)
    if not est.converged:
        warnings.warn(
            f"power iteration did not converge in {est.iterations} iterations; estimate {est.value!r}",
            NormNotConverged,
            stacklevel=2,
        )
    return est.value


def direct_sum(ops: Sequence[LatticeOperator]) -> LatticeOperator:
    """Block-diagonal operator on the concatenated spaces."""
    ops = list(ops)
    if not ops:
        raise ValueError("direct_sum of nothing")
    domain = WeightedSpace.direct_sum(op.domain for op in ops)
    codomain = WeightedSpace.direct_sum(op.codomain for op in ops)
    exact = all(op.exact for op in ops)
    out = zero(domain, codomain, exact=exact).entries.copy()
    r = c = 0
    for op in ops:
        block = op.entries if exact else op.float_entries()
        out[r:r + op.codomain.dim, c:c + op.domain.dim] = block
        r += op.codomain.dim
        c += op.domain.dim
    return LatticeOperator(domain, codomain, out)


def switch_operator(H: WeightedSpace) -> LatticeOperator:
    """The block swap U on H = H1 + H1; U = U^-1 = U*."""
    if H.blocks is None or len(H.blocks) != 2:
        raise SpaceMismatchError("switch operator needs a space made of exactly two blocks")
    first, second = H.blocks
    if not first.compatible(second):
        raise SpaceMismatchError(f"unequal halves: {first.describe()} vs {second.describe()}")
    m = first.dim
    entries = np.full((H.dim, H.dim), sympy.S.Zero, dtype=object)
    for i in range(m):
        entries[i, m + i] = sympy.S.One
        entries[m + i, i] = sympy.S.One
    return LatticeOperator(H, H, entries)


def restrict(A: LatticeOperator, rows: Sequence[int], cols: Sequence[int]) -> LatticeOperator:
    """Compression of A to coordinate subspaces (0-based index lists)."""
    rows, cols = list(rows), list(cols)
    dom = _subspace(A.domain, cols)
    cod = _subspace(A.codomain, rows)
    return LatticeOperator(dom, cod, A.entries[np.ix_(rows, cols)] if rows and cols else
                           np.empty((len(rows), len(cols)), dtype=A.entries.dtype))


def _subspace(space: WeightedSpace, index: Sequence[int]) -> WeightedSpace:
    weights = tuple(space.weights[i] for i in index)
    kind = SpaceKind.SEQUENCE if all(w == 1 for w in weights) else SpaceKind.WEIGHTED
    if space.kind is SpaceKind.DYADIC and list(index) == list(range(len(index))):
        kind = SpaceKind.DYADIC
    return WeightedSpace(len(weights), weights, kind)


@dataclass(frozen=True)
class DiagonalSpec:
    """Diagonal entries (d_n) of a positive central operator on ``space``."""

    entries: tuple
    space: WeightedSpace

    def __post_init__(self):
        entries = tuple(_normalize_number(v) for v in self.entries)
        object.__setattr__(self, "entries", entries)
        if len(entries) != self.space.dim:
            raise ValueError(f"{len(entries)} diagonal entries for a space of dim {self.space.dim}")
        for k, v in enumerate(entries, start=1):
            if v < 0:
                raise ValueError(f"diagonal entry {k} is negative: {v}")

    @classmethod
    def on_sequence(cls, entries: Sequence) -> "DiagonalSpec":
        return cls(tuple(entries), sequence_space(len(entries)))

    @classmethod
    def on_dyadic(cls, entries: Sequence) -> "DiagonalSpec":
        return cls(tuple(entries), dyadic_space(len(entries)))

    @property
    def rational(self) -> bool:
        return all(isinstance(v, Fraction) for v in self.entries)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(i for i, v in enumerate(self.entries) if v != 0)

    @property
    def kernel(self) -> tuple[int, ...]:
        return tuple(i for i, v in enumerate(self.entries) if v == 0)

    def max(self):
        return max(self.entries, default=Fraction(0))

    def operator(self, exact: bool | None = None) -> LatticeOperator:
        exact = self.rational if exact is None else exact
        return diagonal(self.space, self.entries, exact=exact)


def _normalize_number(v):
    if isinstance(v, bool):
        raise TypeError("booleans are not numbers")
    if isinstance(v, Fraction):
        return v
    if isinstance(v, (int, np.integer)):
        return Fraction(int(v))
    if isinstance(v, Rational):
        return Fraction(int(v.numerator), int(v.denominator))
    if isinstance(v, sympy.Rational):
        return Fraction(int(v.p), int(v.q))
    if isinstance(v, str):
        return Fraction(v)
    return float(v)

"""Factorizations through the dyadic step space and the isometry lemmas.

``build_X`` realizes a positive diagonal ``D`` on l^2_n as ``X*X`` with
``X e_k = sqrt(2^k d_k) chi_k``; ``build_Y`` is the positive self-adjoint
square root of ``XX*``.  The remaining helpers cover positive isometries, the
L^1 averaging contraction and the superadditivity argument behind the
non-existence of positive isometries L^p -> l^p.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import mpmath
import numpy as np
import sympy

from .lattice import (
    DiagonalSpec,
    LatticeOperator,
    SpaceKind,
    ToleranceConfig,
    WeightedSpace,
    dyadic_space,
    exact_scalar,
    is_positive,
    sequence_space,
)

__all__ = [
    "build_X",
    "build_Y",
    "positive_isometry",
    "dyadic_averaging_V",
    "AveragingReport",
    "averaging_report",
    "lp_norm_p",
    "strict_superadditivity_gap",
    "DisjointnessReport",
    "disjointness_trial",
    "check_disjointness_preservation",
]


def _check_depth(d: DiagonalSpec, depth: int | None) -> int:
    if d.space.kind is not SpaceKind.SEQUENCE:
        raise ValueError("build_X expects a diagonal on a sequence space")
    n = d.space.dim
    depth = n if depth is None else int(depth)
    if depth < n:
        raise ValueError(f"dyadic depth {depth} is smaller than n = {n}")
    return depth


def _sqrt(value, exact: bool):
    if exact:
        return sympy.sqrt(exact_scalar(value))
    return math.sqrt(float(value))


def build_X(d: DiagonalSpec, depth: int | None = None, exact: bool = False) -> LatticeOperator:
    """Positive X: l^2_n -> span{chi_1..chi_N} with X*X = diag(d)."""
    depth = _check_depth(d, depth)
    n = d.space.dim
    target = dyadic_space(depth)
    if exact:
        entries = np.full((depth, n), sympy.S.Zero, dtype=object)
    else:
        entries = np.zeros((depth, n))
    for k in range(1, n + 1):
        entries[k - 1, k - 1] = _sqrt(2**k * (Fraction(d.entries[k - 1]) if exact else d.entries[k - 1]), exact)
    return LatticeOperator(d.space, target, entries)


def build_Y(d: DiagonalSpec, depth: int | None = None, exact: bool = False) -> LatticeOperator:
    """Positive self-adjoint Y on the dyadic space with Y^2 = XX*.

    In step-function coordinates Y is ``diag(sqrt(d_1), ..., sqrt(d_n), 0, ...)``.
    """
    depth = _check_depth(d, depth)
    space = dyadic_space(depth)
    if exact:
        entries = np.full((depth, depth), sympy.S.Zero, dtype=object)
    else:
        entries = np.zeros((depth, depth))
    for k, dk in enumerate(d.entries):
        entries[k, k] = _sqrt(dk, exact)
    return LatticeOperator(space, space, entries)


def positive_isometry(n: int, depth: int | None = None, exact: bool = False) -> LatticeOperator:
    """Positive isometry l^2_n -> L^2[0,1] (truncated to depth N)."""
    if n < 1:
        raise ValueError("n must be positive")
    return build_X(DiagonalSpec.on_sequence([1] * n), depth, exact=exact)


def dyadic_averaging_V(depth: int) -> LatticeOperator:
    """(Vf)_n = integral of f over [2^-n, 2^-n+1], as an exact matrix.

    For f = sum c_k chi_k this is (Vf)_n = c_n 2^-n.
    """
    if depth < 1:
        raise ValueError("depth must be at least 1")
    domain = dyadic_space(depth)
    entries = np.full((depth, depth), sympy.S.Zero, dtype=object)
    for k in range(1, depth + 1):
        entries[k - 1, k - 1] = sympy.Rational(1, 2**k)
    return LatticeOperator(domain, sequence_space(depth), entries)


@dataclass(frozen=True)
class AveragingReport:
    coefficients: tuple[Fraction, ...]
    image: tuple[Fraction, ...]
    norm_f: Fraction
    norm_Vf: Fraction

    @property
    def contraction(self) -> bool:
        return self.norm_Vf <= self.norm_f

    @property
    def isometric(self) -> bool:
        return self.norm_Vf == self.norm_f


def averaging_report(coefficients: Sequence) -> AveragingReport:
    """Exact L^1 norms of f = sum c_k chi_k and of Vf."""
    coeffs = tuple(Fraction(c) for c in coefficients)
    V = dyadic_averaging_V(len(coeffs))
    image = tuple(Fraction(str(v)) for v in V.apply(np.array([exact_scalar(c) for c in coeffs], dtype=object)))
    norm_f = sum((abs(c) * Fraction(1, 2**k) for k, c in enumerate(coeffs, start=1)), Fraction(0))
    norm_Vf = sum((abs(v) for v in image), Fraction(0))
    return AveragingReport(coeffs, image, norm_f, norm_Vf)


def lp_norm_p(space: WeightedSpace, x, p: float) -> float:
    """``||x||_p^p`` with the space weights as atom masses."""
    w = space.weight_array()
    return float(np.sum(w * np.abs(np.asarray(x, dtype=float)) ** p))


def strict_superadditivity_gap(a: float, b: float, p: float) -> float:
    """``(a+b)^p - a^p - b^p`` for a, b > 0 and p > 1; always positive."""
    if not (a > 0 and b > 0):
        raise ValueError("a and b must be strictly positive")
    if not p > 1:
        raise ValueError("p must be greater than 1")
    hi, lo = (a, b) if a >= b else (b, a)
    x = lo / hi
    # (a+b)^p - a^p = a^p expm1(p log1p(b/a)) avoids the cancellation for b << a
    gap = hi**p * (math.expm1(p * math.log1p(x)) - x**p)
    if gap > 64 * 2.0**-52 * (hi + lo) ** p:
        return gap
    with mpmath.workdps(60):
        A, B, P = mpmath.mpf(a), mpmath.mpf(b), mpmath.mpf(p)
        return float((A + B) ** P - A**P - B**P)


@dataclass
class DisjointnessReport:
    p: float
    trials: int
    seed: int
    additive: int = 0
    disjoint: int = 0
    min_overlap_excess: float | None = None
    violations: list[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "trials": self.trials,
            "seed": self.seed,
            "additive": self.additive,
            "disjoint": self.disjoint,
            "min_overlap_excess": self.min_overlap_excess,
            "violations": self.violations,
        }


def disjointness_trial(V: LatticeOperator, f, g, p: float, rel_tol: float = 1e-12) -> dict:
    """Compare norm additivity of V(f+g) with disjointness of Vf and Vg."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    Vf, Vg = V.apply(f), V.apply(g)
    lhs = lp_norm_p(V.codomain, Vf + Vg, p)
    rhs = lp_norm_p(V.codomain, Vf, p) + lp_norm_p(V.codomain, Vg, p)
    scale = max(lhs, rhs, 1e-300)
    additive = abs(lhs - rhs) <= rel_tol * scale
    overlap = [i for i in range(len(Vf)) if min(Vf[i], Vg[i]) > rel_tol * max(Vf.max(initial=0), Vg.max(initial=0))]
    gaps = [float(V.codomain.weights[i]) * strict_superadditivity_gap(Vf[i], Vg[i], p) for i in overlap]
    return {
        "additive": bool(additive),
        "disjoint": not overlap,
        "excess": lhs - rhs,
        "overlap": overlap,
        "gap_sum": float(sum(gaps)),
        "Vf": Vf.tolist(),
        "Vg": Vg.tolist(),
    }


def check_disjointness_preservation(
    V: LatticeOperator,
    p: float,
    trials: int = 100,
    seed: int = 0,
    cfg: ToleranceConfig = ToleranceConfig(),
) -> DisjointnessReport:
    """Sample disjoint positive pairs f, g and flag norm-additive non-disjoint images.

    For positive vectors the excess ``||V(f+g)||^p - ||Vf||^p - ||Vg||^p`` is a
    sum of strict superadditivity gaps over the overlapping coordinates, so a
    violation can only come from floating point noise.
    """
    if not is_positive(V, cfg):
        raise ValueError("V must be entrywise nonnegative")
    if p <= 1:
        raise ValueError("p must be greater than 1")
    n = V.domain.dim
    report = DisjointnessReport(p=p, trials=trials, seed=seed)
    if n < 2:
        return report
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        labels = rng.integers(0, 3, size=n)
        i, j = rng.choice(n, size=2, replace=False)
        labels[i], labels[j] = 0, 1
        values = rng.uniform(0.0, 1.0, size=n) + 1e-3
        f = np.where(labels == 0, values, 0.0)
        g = np.where(labels == 1, values, 0.0)
        result = disjointness_trial(V, f, g, p)
        report.additive += result["additive"]
        report.disjoint += result["disjoint"]
        if not result["disjoint"]:
            ex = result["excess"]
            report.min_overlap_excess = ex if report.min_overlap_excess is None else min(report.min_overlap_excess, ex)
            if result["additive"]:
                report.violations.append({"trial": t, "f": f.tolist(), "g": g.tolist(), **result})
    return report

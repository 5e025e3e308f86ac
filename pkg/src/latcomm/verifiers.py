"""Falsification campaigns and certificate verification.

The impossibility statements are tested, not proved: each check classifies a
sampled operator, and any operator that meets the hypotheses but violates the
conclusion is serialized in full as a counterexample.  In finite dimension
every matrix is power compact, so the power-compact campaign runs on plain
random positive matrices.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Iterator

import numpy as np

from . import __version__
from .lattice import (
    LatticeOperator,
    SpaceKind,
    ToleranceConfig,
    WeightedSpace,
    adjoint,
    compose,
    dyadic_space,
    _normalized,
    identity,
    is_positive,
    max_abs,
    operator_norm,
    restrict,
    self_commutator,
    sequence_space,
)
from .selfcommutator import SelfCommutatorCertificate, subdiagonal_blocks

__all__ = [
    "Verdict",
    "FalsificationReport",
    "check_idempotent_theorem",
    "sample_positive_idempotents",
    "sample_positive_matrices",
    "check_finite_selfcommutator_vanishes",
    "check_power_inequality",
    "certificate_power_inequality",
    "trace_obstruction",
    "CheckResult",
    "CertificateReport",
    "verify_certificate",
    "run_campaign",
    "idempotent_campaign",
    "powercompact_campaign",
    "powerineq_campaign",
    "trace_campaign",
]


@dataclass
class Verdict:
    case: str
    passed: bool
    applicable: bool = True
    details: dict = field(default_factory=dict)

    def __bool__(self):
        return self.passed


def _require_square(A: LatticeOperator) -> None:
    if not A.is_endomorphism():
        raise ValueError(f"expected a square operator on one space, got {A!r}")


# -- positive idempotents ----------------------------------------------------

def check_idempotent_theorem(A: LatticeOperator, cfg: ToleranceConfig = ToleranceConfig()) -> Verdict:
    """Classify A against: positive idempotent with positive C must be an orthogonal projection.

    Cases: ``not_positive``, ``not_idempotent``, ``commutator_not_positive``
    or ``hypotheses_hold``; only the last can fail.
    """
    _require_square(A)
    pos = is_positive(A, cfg)
    if not pos:
        return Verdict("not_positive", True, False, {"witness": pos.witness})
    idem = max_abs((compose(A, A) - A).entries)
    if idem > cfg.eq_tol:
        return Verdict("not_idempotent", True, False, {"idempotent_deviation": idem})
    C = self_commutator(A)
    cpos = is_positive(C, cfg)
    if not cpos:
        return Verdict("commutator_not_positive", True, False, {"witness": cpos.witness})
    asym = max_abs((A - adjoint(A)).entries)
    cnorm = max_abs(C.entries)
    passed = asym <= cfg.eq_tol and cnorm <= cfg.eq_tol
    return Verdict("hypotheses_hold", passed, True, {"self_adjoint_deviation": asym, "commutator_size": cnorm})


def _random_space(n: int, rng: np.random.Generator) -> WeightedSpace:
    return dyadic_space(n) if rng.random() < 0.3 else sequence_space(n)


def _sample_idempotent(n: int, rng: np.random.Generator) -> LatticeOperator:
    space = _random_space(n, rng)
    w = space.weight_array()
    flavor = rng.integers(0, 3)
    if flavor == 0:
        # band projection onto a random set of coordinates
        keep = rng.random(n) < 0.5
        return LatticeOperator(space, space, np.diag(keep.astype(float)))
    r = int(rng.integers(1, n + 1))
    labels = rng.integers(0, r + 2, size=n)  # r cores, then the x-only and f-only leftovers
    labels[rng.choice(n, size=r, replace=False)] = np.arange(r)
    A = np.zeros((n, n))
    for i in range(r):
        core = labels == i
        x = np.where(core, rng.uniform(0.1, 1.0, n), 0.0)
        if flavor == 1:
            # orthogonal projection onto span of disjoint positive vectors
            f = w * x / np.sum(w * x * x)
        else:
            x = x + np.where(labels == r, rng.uniform(0.0, 1.0, n), 0.0)
            f = np.where(core | (labels == r + 1), rng.uniform(0.1, 1.0, n), 0.0)
            f[labels == r] = 0.0
            f = f / (f @ x)
        A += np.outer(x, f)
    return LatticeOperator(space, space, A)


def _idempotent_for_trial(n: int, seed: int, t: int) -> LatticeOperator:
    if t == 0:
        return identity(sequence_space(n), exact=False)
    rng = np.random.default_rng([seed, t])
    while True:
        A = _sample_idempotent(n, rng)
        E = A.float_entries()
        if np.max(np.abs(E @ E - E), initial=0.0) <= 1e-12:
            return A


def sample_positive_idempotents(n: int, count: int, seed: int = 0) -> Iterator[LatticeOperator]:
    """Positive idempotents ``sum x_i f_i^T`` with ``f_i(x_j) = delta_ij``.

    The identity comes first; then band projections, orthogonal projections
    onto disjoint positive vectors, and general oblique ones.  Each emitted
    matrix is checked to satisfy A^2 = A to 1e-12.
    """
    if n < 1:
        raise ValueError("n must be positive")
    for t in range(count):
        yield _idempotent_for_trial(n, seed, t)


# -- power compact analog ----------------------------------------------------

def sample_positive_matrices(n: int, rng: np.random.Generator) -> LatticeOperator:
    """Random positive matrix; a third are normal (symmetric or scaled permutation)."""
    space = sequence_space(n)
    kind = rng.integers(0, 6)
    if kind == 0:
        M = rng.random((n, n))
        return LatticeOperator(space, space, M + M.T)
    if kind == 1:
        P = np.eye(n)[rng.permutation(n)]
        return LatticeOperator(space, space, rng.uniform(0.1, 2.0) * P)
    M = rng.random((n, n)) * (rng.random((n, n)) < rng.uniform(0.2, 1.0))
    return LatticeOperator(space, space, M)


def check_finite_selfcommutator_vanishes(A: LatticeOperator, cfg: ToleranceConfig = ToleranceConfig()) -> Verdict:
    """If A >= 0 and C = A*A - AA* >= 0 entrywise then C must vanish."""
    _require_square(A)
    if not is_positive(A, cfg):
        raise ValueError("A must be entrywise nonnegative")
    C = self_commutator(A)
    cpos = is_positive(C, cfg)
    if not cpos:
        return Verdict("commutator_not_positive", True, False, {"witness": cpos.witness})
    size = max_abs(C.entries)
    limit = max(cfg.eq_tol, 10 * cfg.pos_tol * A.domain.dim)
    return Verdict("hypotheses_hold", size <= limit, True, {"commutator_size": size, "limit": limit})


def _spectral_norm(A: LatticeOperator) -> float:
    # LAPACK 2-norm in orthonormal coordinates; power iteration is too coarse
    # for an inequality that is tight for normal A
    return float(np.linalg.norm(_normalized(A), 2)) if A.entries.size else 0.0


def _powers(A: LatticeOperator, n_max: int) -> list[LatticeOperator]:
    out = [A]
    for _ in range(n_max - 1):
        out.append(compose(out[-1], A))
    return out


def _power_deviation(A: LatticeOperator, n_max: int, cfg: ToleranceConfig, region=None) -> dict:
    As = adjoint(A)
    AsA = compose(As, A)
    norm_A = _spectral_norm(A)
    worst = {}
    pa = _powers(A, n_max)
    pas = _powers(As, n_max)
    pg = _powers(AsA, n_max)
    ok = True
    for n in range(1, n_max + 1):
        diff = compose(pas[n - 1], pa[n - 1]) - pg[n - 1]
        idx = region(n) if region is not None else list(range(A.domain.dim))
        values = restrict(diff, idx, idx).float_entries()
        scale = max(1.0, norm_A ** (2 * n))
        lowest = float(values.min(initial=0.0))
        if region is None:
            lhs = _spectral_norm(pg[n - 1])
            rhs = _spectral_norm(pas[n - 1]) * _spectral_norm(pa[n - 1])
        else:
            # on a compression only the entrywise order survives; for nonnegative
            # matrices it implies the norm comparison of the compressions
            lhs = _spectral_norm(restrict(pg[n - 1], idx, idx))
            rhs = _spectral_norm(restrict(compose(pas[n - 1], pa[n - 1]), idx, idx))
        order_ok = lowest >= -cfg.pos_tol * scale
        norm_ok = lhs <= rhs + cfg.eq_tol * scale
        ok = ok and order_ok and norm_ok
        worst[n] = {"min_entry": lowest, "scale": scale, "norm_lhs": lhs, "norm_rhs": rhs}
    return {"ok": ok, "powers": worst}


def check_power_inequality(A: LatticeOperator, n_max: int = 5, cfg: ToleranceConfig = ToleranceConfig()) -> Verdict:
    """``(A*)^n A^n - (A*A)^n >= 0`` entrywise and the norm consequence, for n <= n_max.

    The entrywise tolerance is scaled by ``||A||^(2n)``.  When C is not
    positive the check is inapplicable rather than failed.
    """
    _require_square(A)
    if not is_positive(A, cfg):
        raise ValueError("A must be entrywise nonnegative")
    cpos = is_positive(self_commutator(A), cfg)
    if not cpos:
        return Verdict("inapplicable", True, False, {"witness": cpos.witness})
    result = _power_deviation(A, n_max, cfg)
    return Verdict("hypotheses_hold", result["ok"], True, {"powers": result["powers"]})


def certificate_power_inequality(
    cert: SelfCommutatorCertificate, n_max: int = 5, cfg: ToleranceConfig = ToleranceConfig()
) -> Verdict:
    """Power inequality for a certificate operator, restricted to its verified region.

    For power n only coordinates whose orbit ``e_i, Ae_i, ..., A^(n-1)e_i``
    stays in the verified region are compared; beyond that the truncation
    edge breaks the hypothesis C >= 0.
    """
    A = cert.A
    verified = set(cert.verified_region)
    reach = A.float_entries() != 0
    dim = A.domain.dim

    def region(n: int) -> list[int]:
        out = []
        for i in range(dim):
            front = np.zeros(dim, dtype=bool)
            front[i] = True
            good = True
            for _ in range(n):
                if any(j not in verified for j in np.flatnonzero(front)):
                    good = False
                    break
                front = reach[:, front].any(axis=1)
            if good:
                out.append(i)
        return out

    result = _power_deviation(A, n_max, cfg, region)
    return Verdict("restricted", result["ok"], True, {"powers": result["powers"]})


def trace_obstruction(C: LatticeOperator) -> Verdict:
    """Nonzero trace of a positive diagonal C rules out C = AB - BA at this dimension."""
    _require_square(C)
    E = C.entries
    off = E.copy()
    np.fill_diagonal(off, 0)
    if max_abs(off) != 0.0:
        raise ValueError("trace_obstruction expects a diagonal operator")
    diag = [E[i, i] for i in range(E.shape[0])]
    if any(v < 0 for v in diag):
        raise ValueError("diagonal entries must be nonnegative")
    trace = sum(diag) if diag else 0
    delta = min(diag) if diag else 0
    obstructed = trace != 0
    return Verdict(
        "not_a_commutator" if obstructed else "no_obstruction",
        True,
        True,
        {"trace": str(trace), "delta": str(delta), "obstructed": bool(obstructed)},
    )


# -- certificate verification ------------------------------------------------

@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: float
    threshold: float
    detail: str = ""


@dataclass
class CertificateReport:
    tag: str
    checks: list[CheckResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "tag": self.tag,
            "passed": self.passed,
            "checks": [vars(c) for c in self.checks],
        }


def verify_certificate(cert: SelfCommutatorCertificate, cfg: ToleranceConfig = ToleranceConfig()) -> CertificateReport:
    """Recompute ``[A*, A]`` from scratch and audit every claim in ``cert``."""
    A, target = cert.A, cert.target
    checks = []
    pos = is_positive(A, cfg)
    w = pos.witness
    checks.append(CheckResult("positivity", bool(pos), w[2] if w else 0.0, -cfg.pos_tol,
                              f"min entry at {w[:2]}" if w else ""))
    dim = A.domain.dim
    regions_ok = sorted(set(cert.verified_region) | set(cert.edge_region)) == list(range(dim)) and not (
        set(cert.verified_region) & set(cert.edge_region)
    )
    checks.append(CheckResult("regions_partition_space", regions_ok, float(dim), float(dim)))
    R = self_commutator(A) - target
    edge = list(cert.edge_region)
    in_edge = np.zeros(dim, dtype=bool)
    in_edge[edge] = True
    mask = ~np.outer(in_edge, in_edge)
    residual = max_abs(R.entries[mask]) if mask.any() else 0.0
    checks.append(CheckResult("verified_region_equality", residual <= cfg.eq_tol, residual, cfg.eq_tol))
    checks.append(CheckResult("claimed_residual", residual <= cert.residual_verified + cfg.eq_tol,
                              residual, cert.residual_verified + cfg.eq_tol))
    edge_norm = operator_norm(restrict(R, edge, edge), cfg) if edge else 0.0
    checks.append(CheckResult("edge_norm_matches_claim", abs(edge_norm - cert.edge_norm) <= cfg.eq_tol,
                              edge_norm, cert.edge_norm))
    checks.append(CheckResult("edge_within_bound", edge_norm <= cert.edge_bound + cfg.eq_tol,
                              edge_norm, cert.edge_bound))
    bound = float(cert.norm_witness.get("bound", float("inf")))
    a_norm = operator_norm(A, cfg)
    checks.append(CheckResult("operator_norm_bound", a_norm <= bound + cfg.eq_tol, a_norm, bound))
    if A.domain.blocks is not None and len(A.domain.blocks) > 1:
        block_max = max((operator_norm(b, cfg) for b in subdiagonal_blocks(A)), default=0.0)
        checks.append(CheckResult("block_norm_bound", block_max <= bound + cfg.eq_tol, block_max, bound))
    return CertificateReport(cert.tag, checks)


# -- campaigns ---------------------------------------------------------------

@dataclass
class FalsificationReport:
    statement: str
    trials: int
    seed: int
    config: ToleranceConfig
    counterexamples: list[dict] = field(default_factory=list)
    tallies: dict = field(default_factory=dict)
    header: str = ""

    @property
    def passed(self) -> bool:
        return not self.counterexamples

    def to_dict(self) -> dict:
        return {
            "tool_version": __version__,
            "statement": self.statement,
            "header": self.header,
            "trials": self.trials,
            "seed": self.seed,
            "config": self.config.to_dict(),
            "tallies": dict(sorted(self.tallies.items())),
            "counterexamples": self.counterexamples,
            "passed": self.passed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _serialize_operator(A: LatticeOperator) -> dict:
    from .serialize import operator_to_dict

    return operator_to_dict(A)


def _idempotent_trial(t: int, n: int, seed: int, cfg: ToleranceConfig):
    A = _idempotent_for_trial(n, seed, t)
    return A, check_idempotent_theorem(A, cfg)


def _random_dim(n: int, rng: np.random.Generator) -> int:
    return int(rng.integers(2, n + 1)) if n >= 2 else 1


def _powercompact_trial(t: int, n: int, seed: int, cfg: ToleranceConfig):
    rng = np.random.default_rng([seed, t])
    A = sample_positive_matrices(_random_dim(n, rng), rng)
    return A, check_finite_selfcommutator_vanishes(A, cfg)


def _powerineq_trial(t: int, n: int, seed: int, cfg: ToleranceConfig, n_max: int = 5):
    rng = np.random.default_rng([seed, t])
    A = sample_positive_matrices(_random_dim(n, rng), rng)
    return A, check_power_inequality(A, n_max, cfg)


def _trace_trial(t: int, n: int, seed: int, cfg: ToleranceConfig):
    rng = np.random.default_rng([seed, t])
    dim = int(rng.integers(1, n + 1))
    space = sequence_space(dim)
    delta = float(rng.uniform(1e-6, 10.0))
    values = delta + rng.exponential(1.0, dim) * (rng.random(dim) < 0.5)
    C = LatticeOperator(space, space, np.diag(values))
    v = trace_obstruction(C)
    # a positive invertible diagonal must be obstructed
    v.passed = v.details["obstructed"]
    return C, v


def _run_chunk(trial: Callable, ts: range, n: int, seed: int, cfg: ToleranceConfig):
    out = []
    for t in ts:
        A, v = trial(t, n, seed, cfg)
        cex = None
        if v.applicable and not v.passed:
            cex = {"trial": t, "operator": _serialize_operator(A), "case": v.case, "details": v.details}
        out.append((t, v.case, cex))
    return out


_TRIALS = {
    "idempotent": (_idempotent_trial, "positive-idempotent-projection"),
    "powercompact": (_powercompact_trial, "power-compact-self-commutator-vanishes"),
    "powerineq": (_powerineq_trial, "self-commutator-power-inequality"),
    "trace": (_trace_trial, "invertible-central-not-commutator"),
}

_HEADER = (
    "Finite-dimensional analog: every matrix is power compact. "
    "Positivity means entrywise nonnegativity; adjoints are weighted."
)


def run_campaign(
    name: str,
    n: int,
    trials: int,
    seed: int = 0,
    cfg: ToleranceConfig = ToleranceConfig(),
    workers: int = 1,
    chunk: int = 2000,
) -> FalsificationReport:
    """Run a named campaign; the report is independent of ``workers``."""
    trial, statement = _TRIALS[name]
    chunks = [range(s, min(s + chunk, trials)) for s in range(0, trials, chunk)]
    job = partial(_run_chunk, trial, n=n, seed=seed, cfg=cfg)
    if workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = [r for part in pool.map(job, chunks) for r in part]
    else:
        results = [r for ts in chunks for r in job(ts)]
    results.sort(key=lambda r: r[0])
    report = FalsificationReport(statement, trials, seed, cfg, header=_HEADER)
    for _, case, cex in results:
        report.tallies[case] = report.tallies.get(case, 0) + 1
        if cex is not None:
            report.counterexamples.append(cex)
    return report


def idempotent_campaign(n: int, trials: int, seed: int = 0, cfg: ToleranceConfig = ToleranceConfig(), workers: int = 1):
    return run_campaign("idempotent", n, trials, seed, cfg, workers)


def powercompact_campaign(n: int, trials: int, seed: int = 0, cfg: ToleranceConfig = ToleranceConfig(), workers: int = 1):
    return run_campaign("powercompact", n, trials, seed, cfg, workers)


def powerineq_campaign(n: int, trials: int, seed: int = 0, cfg: ToleranceConfig = ToleranceConfig(), workers: int = 1):
    return run_campaign("powerineq", n, trials, seed, cfg, workers)


def trace_campaign(n: int, trials: int, seed: int = 0, cfg: ToleranceConfig = ToleranceConfig(), workers: int = 1):
    return run_campaign("trace", n, trials, seed, cfg, workers)

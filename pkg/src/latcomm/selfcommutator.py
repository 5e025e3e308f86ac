"""Positive central operators as (sums of) self-commutators, at truncation.

All constructions are weighted block shifts

    A = [[0,   0,   0, ...],
         [X_1, 0,   0, ...],
         [0,   X_2, 0, ...], ...]

whose self-commutator telescopes to ``diag(X_1^2, X_2^2 - X_1^2, ...)``.  With
finitely many blocks the last diagonal block is ``-X_{K-1}^2`` instead of the
next term, so every construction returns a :class:`SelfCommutatorCertificate`
that separates the *verified region* (where ``[A*, A]`` must equal the target)
from the *edge region* carrying that truncation deficit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Sequence

import numpy as np
import sympy

from .lattice import (
    DiagonalSpec,
    LatticeOperator,
    SpaceKind,
    SpaceMismatchError,
    ToleranceConfig,
    WeightedSpace,
    adjoint,
    compose,
    dyadic_space,
    exact_scalar,
    max_abs,
    operator_norm,
    restrict,
    self_commutator,
    sequence_space,
    switch_operator,
    zero,
)
from .constructions import build_X, build_Y

__all__ = [
    "PartitionResult",
    "SelfCommutatorCertificate",
    "CentralOperatorDescriptor",
    "SumDecomposition",
    "partition_diagonal",
    "build_block_shift",
    "realize_diagonal",
    "lemma_block_shift",
    "conjugate_by_switch",
    "switched_lemma",
    "kernel_split_selfcommutator",
    "mixed_identity_block",
    "sum_of_two_selfcommutators",
    "certify",
    "embed_certificates",
    "subdiagonal_blocks",
]


# -- partition ---------------------------------------------------------------

@dataclass(frozen=True)
class PartitionResult:
    """K subsequences of the diagonal, zero-padded to a common length.

    ``assignment[i] = (n, k)`` places the i-th input entry at position k of
    subsequence n (both 0-based); ``order`` is the descending sort order used.
    """

    subsequences: tuple[tuple, ...]
    assignment: tuple[tuple[int, int], ...]
    order: tuple[int, ...]
    d_max: object

    @property
    def K(self) -> int:
        return len(self.subsequences)

    @property
    def M(self) -> int:
        return len(self.subsequences[0]) if self.subsequences else 0

    def heads(self) -> tuple:
        return tuple(s[0] for s in self.subsequences)


def _numbers(d) -> tuple:
    if isinstance(d, DiagonalSpec):
        return d.entries
    return DiagonalSpec.on_sequence(list(d)).entries


def partition_diagonal(d, K: int) -> PartitionResult:
    """Split ``d`` into K subsequences with head-maximal, geometrically bounded heads.

    Values are taken in descending order.  A value v may join subsequence n
    (1-based) when ``v <= d_1 * 2^(1-n)``; it joins the eligible subsequence
    with the fewest elements so far, ties going to the smallest index.
    """
    values = _numbers(d)
    if not values:
        raise ValueError("cannot partition an empty diagonal")
    if K < 1:
        raise ValueError("K must be at least 1")
    order = tuple(sorted(range(len(values)), key=lambda i: (-values[i], i)))
    d1 = values[order[0]]
    seqs: list[list] = [[] for _ in range(K)]
    assignment: list[tuple[int, int] | None] = [None] * len(values)
    for i in order:
        v = values[i]
        eligible = [n for n in range(K) if v <= d1 / 2**n]
        n = min(eligible, key=lambda m: (len(seqs[m]), m))
        assignment[i] = (n, len(seqs[n]))
        seqs[n].append(v)
    M = max(len(s) for s in seqs)
    zero_value = Fraction(0) if isinstance(d1, Fraction) else 0.0
    padded = tuple(tuple(s) + (zero_value,) * (M - len(s)) for s in seqs)
    return PartitionResult(padded, tuple(assignment), order, d1)


# -- certificates ------------------------------------------------------------

@dataclass(frozen=True)
class SelfCommutatorCertificate:
    A: LatticeOperator
    target: LatticeOperator
    verified_region: tuple[int, ...]
    edge_region: tuple[int, ...]
    residual_verified: float
    edge_norm: float
    edge_bound: float
    norm_witness: dict
    tag: str
    permutation: tuple[int, ...] | None = None
    notes: dict = field(default_factory=dict)

    @property
    def space(self) -> WeightedSpace:
        return self.A.domain

    def commutator(self) -> LatticeOperator:
        return self_commutator(self.A)

    def accepted(self, cfg: ToleranceConfig = ToleranceConfig()) -> bool:
        return self.residual_verified <= cfg.eq_tol


def _off_edge_mask(dim: int, edge: Sequence[int]) -> np.ndarray:
    in_edge = np.zeros(dim, dtype=bool)
    in_edge[list(edge)] = True
    return ~np.outer(in_edge, in_edge)


def certify(
    A: LatticeOperator,
    target: LatticeOperator,
    edge: Sequence[int],
    *,
    edge_bound: float,
    norm_bound: float,
    block_norms: Sequence[float] = (),
    tag: str,
    permutation: Sequence[int] | None = None,
    notes: dict | None = None,
    cfg: ToleranceConfig = ToleranceConfig(),
) -> SelfCommutatorCertificate:
    """Measure a construction against its target and package the result.

    The residual ``[A*, A] - target`` is checked on every entry outside
    ``edge x edge``; the edge block's norm is recorded separately.
    """
    edge = tuple(sorted(set(edge)))
    verified = tuple(i for i in range(A.domain.dim) if i not in set(edge))
    R = self_commutator(A) - target
    mask = _off_edge_mask(A.domain.dim, edge)
    residual = max_abs(R.entries[mask]) if mask.any() else 0.0
    edge_norm = operator_norm(restrict(R, edge, edge), cfg) if edge else 0.0
    witness = {
        "operator_norm": operator_norm(A, cfg),
        "bound": float(norm_bound),
        "block_norms": [float(b) for b in block_norms],
    }
    return SelfCommutatorCertificate(
        A=A,
        target=target,
        verified_region=verified,
        edge_region=edge,
        residual_verified=residual,
        edge_norm=edge_norm,
        edge_bound=float(edge_bound),
        norm_witness=witness,
        tag=tag,
        permutation=None if permutation is None else tuple(int(i) for i in permutation),
        notes=dict(notes or {}),
    )


def _empty(space: WeightedSpace, exact: bool) -> np.ndarray:
    return zero(space, exact=exact).entries.copy()


def _sqrt(value, exact: bool):
    if exact:
        return sympy.sqrt(exact_scalar(value))
    return math.sqrt(float(value))


def _diag_target(space: WeightedSpace, values: Sequence, exact: bool) -> LatticeOperator:
    entries = _empty(space, exact)
    for i, v in enumerate(values):
        entries[i, i] = exact_scalar(v) if exact else float(v)
    return LatticeOperator(space, space, entries)


def subdiagonal_blocks(A: LatticeOperator) -> list[LatticeOperator]:
    """The blocks A[j+1, j] of a block-structured operator."""
    offsets = A.domain.block_offsets() + [A.domain.dim]
    out = []
    for j in range(len(offsets) - 2):
        rows = range(offsets[j + 1], offsets[j + 2])
        cols = range(offsets[j], offsets[j + 1])
        out.append(restrict(A, rows, cols))
    return out


# -- block shift realizations ------------------------------------------------

def build_block_shift(
    partition: PartitionResult, exact: bool = False, cfg: ToleranceConfig = ToleranceConfig()
) -> SelfCommutatorCertificate:
    """Block shift with ``X_n = sqrt(D_1 + ... + D_n)`` on K copies of l^2_M.

    The verified target is ``diag(D_1, ..., D_{K-1}, 0)``; the K-th subsequence
    cannot be carried by K blocks and is reported under ``notes["unrealized"]``.
    """
    K, M = partition.K, partition.M
    if K < 2:
        raise ValueError("a block shift needs at least two blocks")
    base = sequence_space(M)
    space = WeightedSpace.copies(base, K)
    entries = _empty(space, exact)
    cumulative = [0] * M
    block_norms = []
    for n in range(K - 1):
        cumulative = [c + s for c, s in zip(cumulative, partition.subsequences[n])]
        for k, c in enumerate(cumulative):
            entries[(n + 1) * M + k, n * M + k] = _sqrt(c, exact)
        block_norms.append(math.sqrt(float(max(cumulative))))
    A = LatticeOperator(space, space, entries)
    realized = [v for n in range(K - 1) for v in partition.subsequences[n]] + [0] * M
    target = _diag_target(space, realized, exact)
    d1 = float(partition.d_max)
    edge_bound = float(sum(partition.heads()[: K - 1]))
    unrealized = [str(v) for v in partition.subsequences[K - 1] if v != 0]
    return certify(
        A,
        target,
        range((K - 1) * M, K * M),
        edge_bound=edge_bound,
        norm_bound=math.sqrt(2 * d1),
        block_norms=block_norms,
        tag="compact-central-self-commutator",
        notes={"blocks": K, "block_dim": M, "unrealized": unrealized},
        cfg=cfg,
    )


def realize_diagonal(d, K: int, exact: bool = False, cfg: ToleranceConfig = ToleranceConfig()) -> SelfCommutatorCertificate:
    """Realize all of ``diag(d)`` on the verified region of a K-block shift.

    ``d`` is partitioned into K-1 subsequences and an empty K-th block is
    appended as room for the edge.  ``permutation[i]`` is the certificate
    coordinate of input entry i.
    """
    if K < 2:
        raise ValueError("K must be at least 2")
    part = partition_diagonal(d, K - 1)
    zeros = tuple(Fraction(0) if isinstance(v, Fraction) else 0.0 for v in part.subsequences[0])
    padded = PartitionResult(part.subsequences + (zeros,), part.assignment, part.order, part.d_max)
    cert = build_block_shift(padded, exact=exact, cfg=cfg)
    M = padded.M
    perm = tuple(n * M + k for n, k in padded.assignment)
    return replace(cert, permutation=perm)


def lemma_block_shift(
    T: DiagonalSpec, K: int, exact: bool = False, cfg: ToleranceConfig = ToleranceConfig()
) -> SelfCommutatorCertificate:
    """Realize ``T + 0 + ... + 0`` on K copies of T's space with all blocks sqrt(T)."""
    if K < 2:
        raise ValueError("K must be at least 2")
    base = T.space
    m = base.dim
    space = WeightedSpace.copies(base, K)
    entries = _empty(space, exact)
    roots = [_sqrt(t, exact) for t in T.entries]
    for j in range(K - 1):
        for r in range(m):
            entries[(j + 1) * m + r, j * m + r] = roots[r]
    A = LatticeOperator(space, space, entries)
    target = _diag_target(space, list(T.entries) + [0] * (m * (K - 1)), exact)
    t_max = float(T.max())
    return certify(
        A,
        target,
        range((K - 1) * m, K * m),
        edge_bound=t_max,
        norm_bound=math.sqrt(t_max),
        block_norms=[math.sqrt(t_max)] * (K - 1),
        tag="square-root-block-shift",
        notes={"blocks": K, "block_dim": m, "base_kind": base.kind.value},
        cfg=cfg,
    )


def _halves(space: WeightedSpace) -> WeightedSpace:
    """Regroup ``space`` as exactly two identical blocks."""
    blocks = space.blocks
    if blocks is not None and len(blocks) % 2 == 0 and len(blocks) >= 2:
        h = len(blocks) // 2
        first = WeightedSpace.direct_sum(blocks[:h]) if h > 1 else blocks[0]
        second = WeightedSpace.direct_sum(blocks[h:]) if h > 1 else blocks[h]
        if first.compatible(second):
            return WeightedSpace(space.dim, space.weights, space.kind, (first, second))
    m, rem = divmod(space.dim, 2)
    if rem == 0 and space.weights[:m] == space.weights[m:]:
        first = restrict(zero(space), range(m), range(m)).domain
        return WeightedSpace(space.dim, space.weights, space.kind, (first, first))
    raise SpaceMismatchError(f"{space.describe()} does not split into two equal halves")


def conjugate_by_switch(
    cert: SelfCommutatorCertificate, cfg: ToleranceConfig = ToleranceConfig()
) -> SelfCommutatorCertificate:
    """Move a certificate for ``T + 0`` to one for ``0 + T`` via ``U A U*``."""
    space = cert.space
    halves = _halves(space)
    U = switch_operator(halves)
    Us = adjoint(U)
    m = halves.blocks[0].dim
    swap = [(i + m) % (2 * m) for i in range(2 * m)]

    def conj(op: LatticeOperator) -> LatticeOperator:
        if not op.exact:
            u, us = U.as_float(), Us.as_float()
        else:
            u, us = U, Us
        moved = compose(compose(u, LatticeOperator(halves, halves, op.entries)), us)
        return LatticeOperator(space, space, moved.entries)

    A = conj(cert.A)
    target = conj(cert.target)
    perm = None if cert.permutation is None else tuple(swap[i] for i in cert.permutation)
    notes = dict(cert.notes)
    notes["switched"] = not notes.get("switched", False)
    return certify(
        A,
        target,
        [swap[i] for i in cert.edge_region],
        edge_bound=cert.edge_bound,
        norm_bound=cert.norm_witness["bound"],
        block_norms=cert.norm_witness["block_norms"],
        tag=cert.tag,
        permutation=perm,
        notes=notes,
        cfg=cfg,
    )


def _extend_space(space: WeightedSpace, extra: int) -> WeightedSpace:
    if extra == 0:
        return space
    if space.kind is SpaceKind.SEQUENCE:
        return sequence_space(space.dim + extra)
    if space.kind is SpaceKind.DYADIC:
        return dyadic_space(space.dim + extra)
    return WeightedSpace(space.dim + extra, space.weights + (Fraction(1),) * extra, SpaceKind.WEIGHTED)


def kernel_split_selfcommutator(
    C: DiagonalSpec, K: int = 2, exact: bool = False, cfg: ToleranceConfig = ToleranceConfig()
) -> SelfCommutatorCertificate:
    """Use kernel coordinates of C as the extra copies of the support block shift.

    Coordinates are regrouped as support + kernel.  When the kernel has at
    least ``(K-1) * |support|`` coordinates the certificate lives on the
    original space; otherwise the space is enlarged (deeper dyadic intervals
    or further sequence coordinates) and ``notes["padding"]`` says by how much.
    Copies on coordinates of different weight are identified through the
    positive isometry ``e_i -> sqrt(w_i / w_j) e_j``.
    """
    if K < 2:
        raise ValueError("K must be at least 2")
    support = list(C.support)
    kernel = list(C.kernel)
    s = len(support)
    need = (K - 1) * s
    padding = max(0, need - len(kernel))
    space = _extend_space(C.space, padding)
    kernel += list(range(C.space.dim, C.space.dim + padding))
    values = list(C.entries) + [0] * padding
    target = _diag_target(space, values, exact)
    entries = _empty(space, exact)
    copies = [support] + [kernel[j * s:(j + 1) * s] for j in range(K - 1)]
    w = space.weights
    t_max = float(C.max())
    for j in range(K - 1):
        for r in range(s):
            src, dst = copies[j][r], copies[j + 1][r]
            scale = Fraction(w[src]) / Fraction(w[dst])
            entries[dst, src] = _sqrt(Fraction(values[support[r]]) * scale, True) if exact else math.sqrt(
                float(values[support[r]]) * float(scale)
            )
    A = LatticeOperator(space, space, entries)
    edge = copies[-1] if s else []
    return certify(
        A,
        target,
        edge,
        edge_bound=t_max,
        norm_bound=math.sqrt(t_max),
        block_norms=[math.sqrt(t_max)] * (K - 1) if s else [],
        tag="kernel-split-self-commutator",
        permutation=support + kernel,
        notes={"support": s, "kernel": len(C.kernel), "padding": padding, "used_kernel": need},
        cfg=cfg,
    )


def mixed_identity_block(
    n: int,
    depth: int,
    K: int,
    d: Sequence | None = None,
    exact: bool = False,
    cfg: ToleranceConfig = ToleranceConfig(),
) -> SelfCommutatorCertificate:
    """Z on l^2_n + (dyadic_N)^(K-1) with first block X and later blocks Y.

    Since X*X = diag(d) and Y^2 = XX*, the self-commutator is
    ``diag(d) + 0 + ... + 0`` away from the last dyadic copy.  ``d`` defaults
    to all ones (the identity on the sequence part).
    """
    if K < 3:
        raise ValueError("the mixed construction needs K >= 3")
    if n < 1:
        raise ValueError("n must be positive")
    if depth < n:
        raise ValueError(f"dyadic depth {depth} is smaller than n = {n}")
    d = DiagonalSpec.on_sequence([1] * n if d is None else list(d))
    if d.space.dim != n:
        raise ValueError("d must have n entries")
    X = build_X(d, depth, exact=exact)
    Y = build_Y(d, depth, exact=exact)
    seq, dy = sequence_space(n), dyadic_space(depth)
    space = WeightedSpace.direct_sum([seq] + [dy] * (K - 1))
    entries = _empty(space, exact)
    entries[n:n + depth, 0:n] = X.entries if exact else X.float_entries()
    for j in range(1, K - 1):
        r0, c0 = n + j * depth, n + (j - 1) * depth
        entries[r0:r0 + depth, c0:c0 + depth] = Y.entries if exact else Y.float_entries()
    A = LatticeOperator(space, space, entries)
    target = _diag_target(space, list(d.entries) + [0] * (depth * (K - 1)), exact)
    d_max = float(d.max())
    return certify(
        A,
        target,
        range(n + (K - 2) * depth, n + (K - 1) * depth),
        edge_bound=d_max,
        norm_bound=math.sqrt(d_max),
        block_norms=[operator_norm(X, cfg)] + [operator_norm(Y, cfg)] * (K - 2),
        tag="mixed-identity-self-commutator",
        notes={"n": n, "depth": depth, "blocks": K},
        cfg=cfg,
    )


# -- sums of two -------------------------------------------------------------

@dataclass(frozen=True)
class CentralOperatorDescriptor:
    """C = C_1 + C_2 (+ C_3) across sequence and dyadic components."""

    components: tuple[DiagonalSpec, ...]

    def __post_init__(self):
        comps = tuple(self.components)
        object.__setattr__(self, "components", comps)
        for c in comps:
            if c.space.kind not in (SpaceKind.SEQUENCE, SpaceKind.DYADIC):
                raise ValueError("components must live on sequence or dyadic spaces")
        kinds = [c.space.kind for c in comps]
        if len(comps) == 2:
            return
        if len(comps) == 3 and kinds == [SpaceKind.SEQUENCE, SpaceKind.DYADIC, SpaceKind.DYADIC]:
            return
        raise ValueError(
            "descriptor must have two components, or three as (sequence, dyadic, dyadic)"
        )

    @property
    def mixed(self) -> bool:
        return len({c.space.kind for c in self.components}) > 1

    def kinds(self) -> list[str]:
        return [c.space.kind.value for c in self.components]


def embed_certificates(
    parts: Sequence[tuple[SelfCommutatorCertificate, int]],
    space: WeightedSpace,
    *,
    tag: str,
    cfg: ToleranceConfig = ToleranceConfig(),
    notes: dict | None = None,
) -> SelfCommutatorCertificate:
    """Place certificates at coordinate offsets of ``space`` (zero elsewhere).

    The result realizes the direct sum of the pieces; coordinates outside all
    pieces carry A = 0 and target 0 and so verify trivially.
    """
    exact = all(c.A.exact for c, _ in parts)
    A = _empty(space, exact)
    T = _empty(space, exact)
    edge: list[int] = []
    for cert, off in parts:
        m = cert.space.dim
        if space.weights[off:off + m] != cert.space.weights:
            raise SpaceMismatchError("certificate does not fit at the requested offset")
        A[off:off + m, off:off + m] = cert.A.entries if exact else cert.A.float_entries()
        T[off:off + m, off:off + m] = cert.target.entries if exact else cert.target.float_entries()
        edge.extend(off + i for i in cert.edge_region)
    return certify(
        LatticeOperator(space, space, A),
        LatticeOperator(space, space, T),
        edge,
        edge_bound=max((c.edge_bound for c, _ in parts), default=0.0),
        norm_bound=max((c.norm_witness["bound"] for c, _ in parts), default=0.0),
        block_norms=[b for c, _ in parts for b in c.norm_witness["block_norms"]],
        tag=tag,
        notes=notes,
        cfg=cfg,
    )


@dataclass(frozen=True)
class SumDecomposition:
    cert_a: SelfCommutatorCertificate
    cert_b: SelfCommutatorCertificate
    target: LatticeOperator
    embedding: tuple[int, ...]
    common_region: tuple[int, ...]
    residual: float

    def __iter__(self):
        return iter((self.cert_a, self.cert_b))


def _pad(spec: DiagonalSpec, dim: int) -> DiagonalSpec:
    extra = dim - spec.space.dim
    values = list(spec.entries) + [Fraction(0)] * extra
    if spec.space.kind is SpaceKind.DYADIC:
        return DiagonalSpec.on_dyadic(values)
    return DiagonalSpec.on_sequence(values)


def switched_lemma(
    spec: DiagonalSpec, K: int, exact: bool = False, cfg: ToleranceConfig = ToleranceConfig()
) -> SelfCommutatorCertificate:
    """Certificate for ``0 + T`` on ``(T-space)^K + (T-space)^K``.

    The ``T + 0`` shift is placed in the first half and conjugated by the switch.
    """
    lemma = lemma_block_shift(spec, K, exact=exact, cfg=cfg)
    half = lemma.space
    pair = WeightedSpace.direct_sum(list(half.blocks) * 2)
    return conjugate_by_switch(embed_certificates([(lemma, 0)], pair, tag=lemma.tag, cfg=cfg), cfg)


def sum_of_two_selfcommutators(
    C: CentralOperatorDescriptor, K: int = 3, exact: bool = False, cfg: ToleranceConfig = ToleranceConfig()
) -> SumDecomposition:
    """Write C as ``[A*, A] + [B*, B]`` with A, B positive.

    Homogeneous descriptors (two sequence or two dyadic components, padded to
    a common size H) live on ``H^K + H^K``: A realizes ``C_1 + 0`` in the first
    half and B realizes ``0 + C_2`` by switching a realization of ``C_2 + 0``.

    Mixed descriptors ``(D, phi, psi)`` on l^2_n + L^2 + L^2 use
    ``(D + M_phi + 0) + (0 + 0 + M_psi)``: A is the mixed block Z for D next to a
    square-root shift for phi, B the switched shift for psi.  A two-component
    mixed descriptor ``(D, chi)`` is read as phi = 0, psi = chi.
    """
    comps = list(C.components)
    tag = "sum-of-two-self-commutators"
    if not C.mixed:
        if K < 2:
            raise ValueError("K must be at least 2")
        dim = max(c.space.dim for c in comps)
        c1, c2 = (_pad(c, dim) for c in comps)
        base = c1.space
        space = WeightedSpace.copies(base, 2 * K)
        cert_a = embed_certificates([(lemma_block_shift(c1, K, exact=exact, cfg=cfg), 0)], space, tag=tag, cfg=cfg)
        cert_b = embed_certificates([(switched_lemma(c2, K, exact, cfg), 0)], space, tag=tag, cfg=cfg)
        offsets = [0, K * dim]
        embedding = tuple(offsets[c] + i for c, comp in enumerate(comps) for i in range(comp.space.dim))
        placed = [(c1, 0), (c2, K * dim)]
    else:
        if K < 3:
            raise ValueError("mixed descriptors need K >= 3")
        seq_idx = next(i for i, c in enumerate(comps) if c.space.kind is SpaceKind.SEQUENCE)
        dyadic = [c for c in comps if c.space.kind is SpaceKind.DYADIC]
        D = comps[seq_idx]
        phi, psi = (None, dyadic[0]) if len(dyadic) == 1 else (dyadic[0], dyadic[1])
        n = D.space.dim
        depth = max([n] + [c.space.dim for c in dyadic])
        psi = _pad(psi, depth)
        dy = dyadic_space(depth)
        mixed = mixed_identity_block(n, depth, K, D.entries, exact=exact, cfg=cfg)
        blocks = list(mixed.space.blocks)
        parts_a = [(mixed, 0)]
        off = mixed.space.dim
        phi_off = None
        if phi is not None:
            phi = _pad(phi, depth)
            parts_a.append((lemma_block_shift(phi, K, exact=exact, cfg=cfg), off))
            phi_off = off
            blocks += [dy] * K
            off += K * depth
        pair = switched_lemma(psi, K, exact, cfg)
        psi_off = off + K * depth
        blocks += [dy] * (2 * K)
        space = WeightedSpace.direct_sum(blocks)
        cert_a = embed_certificates(parts_a, space, tag=tag, cfg=cfg)
        cert_b = embed_certificates([(pair, off)], space, tag=tag, cfg=cfg)
        comp_offsets = {}
        comp_offsets[seq_idx] = 0
        dy_indices = [i for i, c in enumerate(comps) if c.space.kind is SpaceKind.DYADIC]
        if phi is None:
            comp_offsets[dy_indices[0]] = psi_off
        else:
            comp_offsets[dy_indices[0]] = phi_off
            comp_offsets[dy_indices[1]] = psi_off
        embedding = tuple(comp_offsets[c] + i for c, comp in enumerate(comps) for i in range(comp.space.dim))
        placed = [(comps[c], comp_offsets[c]) for c in range(len(comps))]
    values = [0] * space.dim
    for comp, off in placed:
        for i, v in enumerate(comp.entries):
            values[off + i] = v
    target = _diag_target(space, values, exact)
    common = tuple(sorted(set(cert_a.verified_region) & set(cert_b.verified_region)))
    total = self_commutator(cert_a.A) + self_commutator(cert_b.A) - target
    in_common = np.zeros(space.dim, dtype=bool)
    in_common[list(common)] = True
    mask = np.outer(in_common, in_common)
    residual = max_abs(total.entries[mask]) if mask.any() else 0.0
    return SumDecomposition(cert_a, cert_b, target, embedding, common, residual)

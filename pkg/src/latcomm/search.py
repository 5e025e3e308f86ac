"""Projected gradient search for positive operators with a prescribed self-commutator.

The search space is ``l^2_n + (dyadic_N)^(K-1)`` and the objective is

    f(Z) = || [Z*, Z] - T ||_F^2

measured in orthonormal coordinates ``B = S Z S^-1`` (``S`` the square root of
the weights), so dyadic coordinates are not over-weighted.  Since ``S`` is a
positive diagonal, ``Z >= 0`` iff ``B >= 0`` and the iteration runs on ``B``
directly.  Reports carry residual data only.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .lattice import LatticeOperator, WeightedSpace, dyadic_space, sequence_space

__all__ = [
    "TARGETS",
    "SearchConfig",
    "SearchReport",
    "search_space",
    "build_target",
    "objective",
    "gradient",
    "residual",
    "gradient_check",
    "projected_gradient_search",
]

log = logging.getLogger(__name__)

TARGETS = ("zero_identity", "identity_zero", "zero")


@dataclass(frozen=True)
class SearchConfig:
    n: int = 1
    depth: int = 1
    copies: int = 3
    max_iters: int = 2000
    step_size: float = 0.1
    backtrack: float = 0.5
    seed: int = 0
    restarts: int = 4
    stop_tol: float = 1e-12
    target: str = "zero_identity"
    init_scale: float = 1.0

    def __post_init__(self):
        for name in ("n", "depth", "copies", "max_iters", "restarts"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.copies < 2:
            raise ValueError("copies must be at least 2")
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack must lie in (0, 1)")
        if self.stop_tol < 0 or self.init_scale <= 0:
            raise ValueError("stop_tol must be nonnegative and init_scale positive")
        if self.target not in TARGETS:
            raise ValueError(f"target must be one of {TARGETS}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SearchReport:
    config: SearchConfig
    best_residual: float
    best_Z: LatticeOperator
    residual_history: list[list[float]]
    restarts_summary: list[dict] = field(default_factory=list)

    def to_dict(self, include_matrix: bool = True) -> dict:
        out = {
            "tool_version": __version__,
            "kind": "exploratory-evidence",
            "tag": "positive-self-commutator-search",
            "seed": self.config.seed,
            "config": self.config.to_dict(),
            "best_residual": self.best_residual,
            "restarts": self.restarts_summary,
        }
        if include_matrix:
            out["best_Z"] = [[repr(float(v)) for v in row] for row in self.best_Z.entries]
        return out

    def history_rows(self) -> list[tuple[int, int, float]]:
        return [(r, i, v) for r, hist in enumerate(self.residual_history) for i, v in enumerate(hist)]


def search_space(n: int, depth: int, copies: int) -> WeightedSpace:
    return WeightedSpace.direct_sum([sequence_space(n)] + [dyadic_space(depth)] * (copies - 1))


def build_target(name: str, n: int, depth: int, copies: int) -> LatticeOperator:
    """Diagonal target on the search space.

    ``zero_identity`` is 0 on the sequence part and I on the first dyadic
    copy; ``identity_zero`` is I on the sequence part only.
    """
    space = search_space(n, depth, copies)
    diag = np.zeros(space.dim)
    if name == "zero_identity":
        diag[n:n + depth] = 1.0
    elif name == "identity_zero":
        diag[:n] = 1.0
    elif name != "zero":
        raise ValueError(f"unknown target {name!r}")
    return LatticeOperator(space, space, np.diag(diag))


def _scales(space: WeightedSpace) -> np.ndarray:
    return np.sqrt(space.weight_array())


def _to_normalized(Z: np.ndarray, s: np.ndarray) -> np.ndarray:
    return Z * s[:, None] / s[None, :]


def _from_normalized(B: np.ndarray, s: np.ndarray) -> np.ndarray:
    return B * s[None, :] / s[:, None]


def _residual_matrix(B: np.ndarray, T: np.ndarray) -> np.ndarray:
    return B.T @ B - B @ B.T - T


def _f(B: np.ndarray, T: np.ndarray) -> float:
    R = _residual_matrix(B, T)
    return float(np.sum(R * R))


def _grad_B(B: np.ndarray, T: np.ndarray) -> np.ndarray:
    R = _residual_matrix(B, T)
    return 2.0 * (B @ R.T + B @ R - R @ B - R.T @ B)


def _check(Z: LatticeOperator, target: LatticeOperator) -> np.ndarray:
    if not (Z.is_endomorphism() and target.is_endomorphism() and Z.domain.compatible(target.domain)):
        raise ValueError("Z and target must be endomorphisms of the same space")
    return _scales(Z.domain)


def objective(Z: LatticeOperator, target: LatticeOperator) -> float:
    """Squared weighted Frobenius norm of ``[Z*, Z] - target``."""
    s = _check(Z, target)
    # target is diagonal in every use, but normalize it anyway
    return _f(_to_normalized(Z.float_entries(), s), _to_normalized(target.float_entries(), s))


def residual(Z: LatticeOperator, target: LatticeOperator) -> float:
    return math.sqrt(objective(Z, target))


def gradient(Z: LatticeOperator, target: LatticeOperator) -> np.ndarray:
    """Analytic gradient of ``objective`` with respect to the entries of Z."""
    s = _check(Z, target)
    B = _to_normalized(Z.float_entries(), s)
    T = _to_normalized(target.float_entries(), s)
    # chain rule through B_ij = s_i Z_ij / s_j
    return _to_normalized(_grad_B(B, T), s)


def gradient_check(Z: LatticeOperator, target: LatticeOperator, epsilon: float = 1e-5) -> float:
    """Max deviation between analytic and central-difference gradients.

    The deviation is relative to ``max(|g|_inf, 1)`` so that vanishing
    gradients (for example at Z = 0) do not divide by zero.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    analytic = gradient(Z, target)
    base = Z.float_entries()
    numeric = np.zeros_like(base)
    for idx in np.ndindex(base.shape):
        plus, minus = base.copy(), base.copy()
        plus[idx] += epsilon
        minus[idx] -= epsilon
        fp = objective(LatticeOperator(Z.domain, Z.codomain, plus), target)
        fm = objective(LatticeOperator(Z.domain, Z.codomain, minus), target)
        numeric[idx] = (fp - fm) / (2 * epsilon)
    scale = max(float(np.max(np.abs(numeric), initial=0.0)), 1.0)
    return float(np.max(np.abs(analytic - numeric), initial=0.0)) / scale


def _run_restart(cfg: SearchConfig, restart: int, init: np.ndarray | None) -> tuple[np.ndarray, list[float], dict]:
    space = search_space(cfg.n, cfg.depth, cfg.copies)
    s = _scales(space)
    T = _to_normalized(build_target(cfg.target, cfg.n, cfg.depth, cfg.copies).float_entries(), s)
    if init is not None:
        B = np.maximum(_to_normalized(np.asarray(init, dtype=float), s), 0.0)
        origin = "init"
    else:
        rng = np.random.default_rng([cfg.seed, restart])
        B = cfg.init_scale * rng.random((space.dim, space.dim))
        origin = "random"
    fB = _f(B, T)
    history = [math.sqrt(fB)]
    step = cfg.step_size
    status = "max_iters"
    it = 0
    for it in range(1, cfg.max_iters + 1):
        g = _grad_B(B, T)
        if not np.all(np.isfinite(g)):
            log.warning("restart %d: non-finite gradient at iteration %d", restart, it)
            status = "non_finite"
            break
        accepted = False
        while step > 1e-20:
            cand = np.maximum(B - step * g, 0.0)
            move = cand - B
            if not np.any(move):
                break
            f_cand = _f(cand, T)
            # Armijo condition along the projected arc
            if np.isfinite(f_cand) and f_cand < fB and f_cand <= fB + 1e-4 * float(np.sum(g * move)):
                accepted = True
                break
            step *= cfg.backtrack
        if not accepted:
            status = "stationary"
            break
        improvement = math.sqrt(fB) - math.sqrt(f_cand)
        B, fB = cand, f_cand
        history.append(math.sqrt(fB))
        step /= cfg.backtrack
        if improvement <= cfg.stop_tol:
            status = "stalled"
            break
    summary = {
        "restart": restart,
        "origin": origin,
        "initial_residual": history[0],
        "final_residual": history[-1],
        "iterations": len(history) - 1,
        "status": status,
    }
    return _from_normalized(B, s), history, summary


def projected_gradient_search(
    cfg: SearchConfig,
    init: LatticeOperator | np.ndarray | None = None,
    workers: int = 1,
) -> SearchReport:
    """Minimize f over entrywise nonnegative Z with restarts.

    Restart 0 starts from ``init`` when given; the others start from uniform
    random matrices drawn from ``default_rng([seed, restart])``.
    """
    space = search_space(cfg.n, cfg.depth, cfg.copies)
    if isinstance(init, LatticeOperator):
        if not init.domain.compatible(space):
            raise ValueError("init does not live on the search space")
        init = init.float_entries()
    inits = [init if r == 0 else None for r in range(cfg.restarts)]
    if workers > 1 and cfg.restarts > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_restart, [cfg] * cfg.restarts, range(cfg.restarts), inits))
    else:
        results = [_run_restart(cfg, r, inits[r]) for r in range(cfg.restarts)]
    best = min(range(len(results)), key=lambda r: (results[r][1][-1], r))
    Z = results[best][0]
    return SearchReport(
        config=cfg,
        best_residual=results[best][1][-1],
        best_Z=LatticeOperator(space, space, Z),
        residual_history=[r[1] for r in results],
        restarts_summary=[r[2] for r in results],
    )

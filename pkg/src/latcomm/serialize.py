"""JSON and CSV round-trips for spaces, operators and certificates.

Float entries are written with ``repr`` (shortest round-trip form); exact
entries are written as sympy strings such as ``3/4`` or ``sqrt(6)/2``.
"""

from __future__ import annotations

import csv
import json
import os
from fractions import Fraction
from pathlib import Path

import numpy as np
import sympy

from . import __version__
from .lattice import LatticeOperator, SpaceKind, ToleranceConfig, WeightedSpace, exact_scalar

__all__ = [
    "space_to_dict",
    "space_from_dict",
    "operator_to_dict",
    "operator_from_dict",
    "write_matrix_csv",
    "read_matrix_csv",
    "certificate_to_dict",
    "certificate_from_dict",
    "jsonable",
    "dumps",
]


def space_to_dict(space: WeightedSpace) -> dict:
    out = {
        "dim": space.dim,
        "kind": space.kind.value,
        "weights": [str(w) for w in space.weights],
    }
    if space.blocks is not None:
        out["blocks"] = [space_to_dict(b) for b in space.blocks]
    return out


def space_from_dict(data: dict) -> WeightedSpace:
    blocks = data.get("blocks")
    return WeightedSpace(
        int(data["dim"]),
        tuple(Fraction(w) for w in data["weights"]),
        SpaceKind(data["kind"]),
        None if blocks is None else tuple(space_from_dict(b) for b in blocks),
    )


def _cell(v, exact: bool) -> str:
    return str(v) if exact else repr(float(v))


def _rows(A: LatticeOperator) -> list[list[str]]:
    return [[_cell(v, A.exact) for v in row] for row in A.entries]


def _parse(rows, exact: bool) -> np.ndarray:
    if exact:
        return np.array([[exact_scalar(v) for v in row] for row in rows], dtype=object).reshape(len(rows), -1)
    return np.array([[float(v) for v in row] for row in rows], dtype=float).reshape(len(rows), -1)


def operator_to_dict(A: LatticeOperator) -> dict:
    return {
        "domain": space_to_dict(A.domain),
        "codomain": space_to_dict(A.codomain),
        "exact": A.exact,
        "entries": _rows(A),
    }


def operator_from_dict(data: dict, base: Path | None = None) -> LatticeOperator:
    domain = space_from_dict(data["domain"])
    codomain = space_from_dict(data["codomain"])
    exact = bool(data["exact"])
    if "csv" in data:
        path = Path(data["csv"])
        if base is not None and not path.is_absolute():
            path = base / path
        entries = read_matrix_csv(path, exact)
    else:
        entries = _parse(data["entries"], exact)
    if entries.size == 0:
        entries = entries.reshape(codomain.dim, domain.dim)
    return LatticeOperator(domain, codomain, entries)


def write_matrix_csv(A: LatticeOperator, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(_rows(A))
    return path


def read_matrix_csv(path: str | Path, exact: bool = False) -> np.ndarray:
    with Path(path).open(newline="") as fh:
        rows = [row for row in csv.reader(fh) if row]
    return _parse(rows, exact)


def jsonable(obj):
    """Recursively convert tuples, Fractions, sympy and numpy scalars for JSON."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, (Fraction, sympy.Basic)):
        return str(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj) -> str:
    """Deterministic JSON text (sorted keys, fixed indentation)."""
    return json.dumps(jsonable(obj), indent=2, sort_keys=True)


def certificate_to_dict(
    cert,
    matrix_dir: str | Path | None = None,
    prefix: str = "",
    seed: int | None = None,
    cfg: ToleranceConfig | None = None,
    ref_base: str | Path | None = None,
) -> dict:
    """Certificate as a JSON-ready dict.

    With ``matrix_dir`` the operator and target go to CSV files and the JSON
    keeps references relative to ``ref_base`` (the directory the JSON will
    live in, default the working directory); otherwise entries are inlined.
    """

    def ref(op: LatticeOperator, name: str) -> dict:
        if matrix_dir is None:
            return operator_to_dict(op)
        path = write_matrix_csv(op, Path(matrix_dir) / f"{prefix}{name}.csv")
        return {
            "domain": space_to_dict(op.domain),
            "codomain": space_to_dict(op.codomain),
            "exact": op.exact,
            "csv": os.path.relpath(path, ref_base if ref_base is not None else os.curdir),
        }

    out = {
        "tool_version": __version__,
        "tag": cert.tag,
        "A": ref(cert.A, "A"),
        "target": ref(cert.target, "target"),
        "space": space_to_dict(cert.space),
        "verified_region": list(cert.verified_region),
        "edge_region": list(cert.edge_region),
        "residual_verified": cert.residual_verified,
        "edge_norm": cert.edge_norm,
        "edge_bound": cert.edge_bound,
        "norm_witness": cert.norm_witness,
        "permutation": None if cert.permutation is None else list(cert.permutation),
        "notes": cert.notes,
        "exact": cert.A.exact,
    }
    if seed is not None:
        out["seed"] = seed
    if cfg is not None:
        out["tolerances"] = cfg.to_dict()
    return jsonable(out)


def certificate_from_dict(data: dict, base: str | Path | None = None):
    from .selfcommutator import SelfCommutatorCertificate

    base = None if base is None else Path(base)
    perm = data.get("permutation")
    return SelfCommutatorCertificate(
        A=operator_from_dict(data["A"], base),
        target=operator_from_dict(data["target"], base),
        verified_region=tuple(int(i) for i in data["verified_region"]),
        edge_region=tuple(int(i) for i in data["edge_region"]),
        residual_verified=float(data["residual_verified"]),
        edge_norm=float(data["edge_norm"]),
        edge_bound=float(data["edge_bound"]),
        norm_witness=dict(data["norm_witness"]),
        tag=str(data["tag"]),
        permutation=None if perm is None else tuple(int(i) for i in perm),
        notes=dict(data.get("notes", {})),
    )

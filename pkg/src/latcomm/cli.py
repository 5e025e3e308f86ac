"""Command-line front end.

Exit codes: 0 when every check passed, 2 when a verification or falsification
check failed, 1 on usage or I/O errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .constructions import (
    averaging_report,
    build_X,
    build_Y,
    dyadic_averaging_V,
    positive_isometry,
)
from .lattice import (
    DiagonalSpec,
    ToleranceConfig,
    adjoint,
    compose,
    max_abs,
    operator_norm,
)
from .search import SearchConfig, TARGETS, build_target, projected_gradient_search, residual
from .selfcommutator import (
    CentralOperatorDescriptor,
    conjugate_by_switch,
    kernel_split_selfcommutator,
    lemma_block_shift,
    mixed_identity_block,
    partition_diagonal,
    realize_diagonal,
    sum_of_two_selfcommutators,
    switched_lemma,
)
from .serialize import certificate_from_dict, certificate_to_dict, dumps, operator_to_dict, write_matrix_csv
from .verifiers import run_campaign, verify_certificate

__all__ = ["run", "main", "build_parser"]

SEED_ENV = "LATTICE_COMM_SEED"
OK, USAGE, FAILED = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# -- argument helpers --------------------------------------------------------

def parse_numbers(text: str) -> list[Fraction]:
    """Comma or whitespace separated numbers, or ``@path`` / a path to a file of them."""
    source = text
    if text.startswith("@") or Path(text).is_file():
        path = Path(text[1:] if text.startswith("@") else text)
        try:
            source = path.read_text()
        except OSError as exc:
            raise UsageError(f"cannot read {path}: {exc.strerror}") from exc
    tokens = [t for t in source.replace(",", " ").split() if t]
    if not tokens:
        raise UsageError("empty number list")
    try:
        return [Fraction(t) for t in tokens]
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"malformed number list {text!r}") from exc


def _nonneg(values: list[Fraction], what: str = "d") -> list[Fraction]:
    if any(v < 0 for v in values):
        raise UsageError(f"{what} entries must be nonnegative")
    return values


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is None or env.strip() == "":
        return 0
    try:
        return int(env)
    except ValueError as exc:
        raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from exc


def _cfg(args) -> ToleranceConfig:
    try:
        return ToleranceConfig(eq_tol=args.eq_tol, pos_tol=args.pos_tol)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _common() -> argparse.ArgumentParser:
    p = _Parser(add_help=False)
    p.add_argument("--seed", type=int, default=None, help=f"RNG seed (falls back to ${SEED_ENV}, then 0)")
    p.add_argument("--eq-tol", type=float, default=1e-10, help="equality tolerance")
    p.add_argument("--pos-tol", type=float, default=1e-12, help="positivity tolerance")
    p.add_argument("--exact", action="store_true", help="exact rational/surd arithmetic")
    p.add_argument("--json", metavar="PATH", help="write the JSON report here")
    p.add_argument("--quiet", action="store_true", help="suppress the text summary")
    return p


def _emit(args, report: dict, lines: list[str]) -> None:
    if args.json:
        try:
            Path(args.json).write_text(dumps(report) + "\n")
        except OSError as exc:
            raise UsageError(f"cannot write {args.json}: {exc.strerror}") from exc
    if not args.quiet:
        for line in lines:
            print(line)


def _header(args, tag: str) -> dict:
    return {"tool_version": __version__, "tag": tag, "seed": _seed(args), "tolerances": _cfg(args).to_dict()}


# -- construct ---------------------------------------------------------------

def cmd_construct(args) -> int:
    cfg = _cfg(args)
    report = _header(args, "")
    checks: dict[str, dict] = {}
    if args.what in ("x", "y"):
        if args.d is None:
            raise UsageError("--d is required")
        d = DiagonalSpec.on_sequence(_nonneg(parse_numbers(args.d)))
        try:
            X = build_X(d, args.depth, exact=args.exact)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        D = d.operator(exact=args.exact)
        dev = max_abs((compose(adjoint(X), X) - D).entries)
        checks["adjoint_X_X_equals_D"] = {"deviation": dev, "passed": dev <= cfg.eq_tol}
        bound = float(np.sqrt(float(d.max())))
        norm = operator_norm(X, cfg)
        checks["norm_bound"] = {"value": norm, "bound": bound, "passed": norm <= bound + cfg.eq_tol}
        op = X
        report["tag"] = "positive-square-root-factorization"
        if args.what == "y":
            Y = build_Y(d, args.depth, exact=args.exact)
            dev_y = max_abs((compose(Y, Y) - compose(X, adjoint(X))).entries)
            sym = max_abs((Y - adjoint(Y)).entries)
            checks["Y_squared_equals_XXstar"] = {"deviation": dev_y, "passed": dev_y <= cfg.eq_tol}
            checks["Y_self_adjoint"] = {"deviation": sym, "passed": sym <= cfg.eq_tol}
            op = Y
    elif args.what == "isometry":
        if args.n is None:
            raise UsageError("--n is required")
        U = positive_isometry(args.n, args.depth, exact=args.exact)
        rng = np.random.default_rng(_seed(args))
        w = U.codomain.weight_array()
        worst = 0.0
        for _ in range(args.samples):
            x = rng.standard_normal(args.n)
            ux = U.apply(x)
            worst = max(worst, abs(np.sqrt(np.sum(w * ux * ux)) / np.linalg.norm(x) - 1.0))
        checks["norm_ratio"] = {"samples": args.samples, "max_deviation": worst, "passed": worst <= 1e-12}
        op = U
        report["tag"] = "positive-isometry"
    else:
        if args.d is None:
            raise UsageError("--d is required")
        rep = averaging_report(parse_numbers(args.d))
        nonneg = all(c >= 0 for c in rep.coefficients)
        checks["contraction"] = {"norm_f": str(rep.norm_f), "norm_Vf": str(rep.norm_Vf), "passed": rep.contraction}
        if nonneg:
            checks["isometric_on_cone"] = {"passed": rep.isometric}
        report["image"] = [str(v) for v in rep.image]
        op = dyadic_averaging_V(len(rep.coefficients))
        report["tag"] = "cone-isometric-averaging"
    report["checks"] = checks
    if args.dump_matrices:
        path = write_matrix_csv(op, Path(args.dump_matrices) / f"{args.what}.csv")
        report["operator"] = {"csv": path.name, "domain": op.domain.describe(), "codomain": op.codomain.describe()}
    else:
        report["operator"] = operator_to_dict(op)
    passed = all(c["passed"] for c in checks.values())
    report["passed"] = passed
    lines = [f"construct {args.what}: {op!r}"]
    lines += [f"  {name}: {'ok' if c['passed'] else 'FAIL'}" for name, c in checks.items()]
    _emit(args, report, lines)
    return OK if passed else FAILED


# -- selfcomm ----------------------------------------------------------------

def _cert_report(args, cert, cfg, prefix: str = "") -> tuple[dict, bool]:
    base = Path(args.json).resolve().parent if args.json else None
    data = certificate_to_dict(cert, args.dump_matrices, prefix=prefix, seed=_seed(args), cfg=cfg, ref_base=base)
    verdict = verify_certificate(cert, cfg)
    data["verification"] = verdict.to_dict()
    return data, verdict.passed


def cmd_selfcomm(args) -> int:
    cfg = _cfg(args)
    if args.what == "partition":
        d = _nonneg(parse_numbers(_require(args.d, "--d")))
        part = partition_diagonal(d, args.k)
        report = _header(args, "compact-central-self-commutator")
        report.update(
            {
                "subsequences": [[str(v) for v in s] for s in part.subsequences],
                "assignment": [list(a) for a in part.assignment],
                "heads": [str(h) for h in part.heads()],
            }
        )
        lines = [f"s^({i + 1}) = " + ", ".join(str(v) for v in s) for i, s in enumerate(part.subsequences)]
        _emit(args, report, lines)
        return OK
    try:
        if args.what == "construct":
            d = _nonneg(parse_numbers(_require(args.d, "--d")))
            certs = [("", realize_diagonal(d, args.k, exact=args.exact, cfg=cfg))]
        elif args.what == "lemma":
            T = DiagonalSpec.on_dyadic(_nonneg(parse_numbers(_require(args.d, "--d")))) if args.dyadic else \
                DiagonalSpec.on_sequence(_nonneg(parse_numbers(_require(args.d, "--d"))))
            make = switched_lemma if args.switch else lemma_block_shift
            certs = [("", make(T, args.k, exact=args.exact, cfg=cfg))]
        elif args.what == "kernel":
            C = DiagonalSpec.on_dyadic if args.dyadic else DiagonalSpec.on_sequence
            spec = C(_nonneg(parse_numbers(_require(args.d, "--d"))))
            certs = [("", kernel_split_selfcommutator(spec, args.k, exact=args.exact, cfg=cfg))]
        elif args.what == "mixed":
            if args.n is None:
                raise UsageError("--n is required")
            d = None if args.d is None else _nonneg(parse_numbers(args.d))
            depth = args.depth if args.depth is not None else args.n
            certs = [("", mixed_identity_block(args.n, depth, args.k, d, exact=args.exact, cfg=cfg))]
        else:
            return _selfcomm_sum(args, cfg)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return _report_certs(args, certs, cfg)


def _report_certs(args, certs, cfg, extra: dict | None = None) -> int:
    reports, lines, passed = {}, [], True
    for prefix, cert in certs:
        data, ok = _cert_report(args, cert, cfg, prefix)
        reports[prefix.rstrip("_") or "certificate"] = data
        passed &= ok
        lines.append(
            f"{cert.tag}: dim={cert.space.dim} residual_verified={cert.residual_verified:.3e} "
            f"edge_norm={cert.edge_norm:.6g} verify={'ok' if ok else 'FAIL'}"
        )
    report = reports["certificate"] if len(reports) == 1 else {**_header(args, certs[0][1].tag), **reports}
    if extra:
        report.update(extra)
        passed &= extra.get("passed", True)
    _emit(args, report, lines)
    return OK if passed else FAILED


def _require(value, flag: str):
    if value is None:
        raise UsageError(f"{flag} is required")
    return value


def _selfcomm_sum(args, cfg) -> int:
    if args.d is not None:
        comps = [DiagonalSpec.on_sequence(_nonneg(parse_numbers(args.d)))]
        if args.phi is not None:
            comps.append(DiagonalSpec.on_dyadic(_nonneg(parse_numbers(args.phi), "phi")))
        comps.append(DiagonalSpec.on_dyadic(_nonneg(parse_numbers(_require(args.psi, "--psi")), "psi")))
    else:
        make = DiagonalSpec.on_dyadic if args.dyadic else DiagonalSpec.on_sequence
        comps = [make(_nonneg(parse_numbers(_require(v, f)))) for v, f in ((args.c1, "--c1"), (args.c2, "--c2"))]
    dec = sum_of_two_selfcommutators(CentralOperatorDescriptor(tuple(comps)), args.k, exact=args.exact, cfg=cfg)
    extra = {
        "embedding": list(dec.embedding),
        "common_region": list(dec.common_region),
        "sum_residual": dec.residual,
        "passed": dec.residual <= cfg.eq_tol,
    }
    return _report_certs(args, [("a_", dec.cert_a), ("b_", dec.cert_b)], cfg, extra)


# -- verify ------------------------------------------------------------------

def cmd_verify(args) -> int:
    cfg = _cfg(args)
    path = Path(args.cert)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not valid JSON: {exc.msg}") from exc
    try:
        cert = certificate_from_dict(data, path.parent)
    except (KeyError, TypeError, ValueError) as exc:
        # structurally broken certificates count as failed checks, not usage errors
        report = {**_header(args, str(data.get("tag", ""))), "passed": False, "error": f"malformed certificate: {exc}"}
        _emit(args, report, [f"{path}: FAIL (malformed certificate: {exc})"])
        return FAILED
    verdict = verify_certificate(cert, cfg)
    report = {**_header(args, cert.tag), **verdict.to_dict()}
    lines = [f"{c.name}: {'ok' if c.passed else 'FAIL'} (measured={c.measured:.6g}, threshold={c.threshold:.6g})" for c in verdict.checks]
    lines.append(f"{path}: {'PASS' if verdict.passed else 'FAIL'}")
    _emit(args, report, lines)
    return OK if verdict.passed else FAILED


# -- falsify -----------------------------------------------------------------

def cmd_falsify(args) -> int:
    cfg = _cfg(args)
    if args.n < 1 or args.trials < 0:
        raise UsageError("--n must be positive and --trials nonnegative")
    report = run_campaign(args.what, args.n, args.trials, _seed(args), cfg, workers=args.workers)
    data = report.to_dict()
    data["tag"] = report.statement
    tallies = ", ".join(f"{k}={v}" for k, v in sorted(report.tallies.items()))
    lines = [
        f"{args.what}: {args.trials} trials, seed {report.seed}: {tallies}",
        f"counterexamples: {len(report.counterexamples)}",
    ]
    _emit(args, data, lines)
    return OK if report.passed else FAILED


# -- search ------------------------------------------------------------------

def cmd_search(args) -> int:
    try:
        cfg = SearchConfig(
            n=args.n,
            depth=args.depth,
            copies=args.copies,
            max_iters=args.iters,
            step_size=args.step,
            seed=_seed(args),
            restarts=args.restarts,
            target=args.target,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    init = None
    if args.seed_known:
        if args.copies < 3:
            raise UsageError("--seed-known needs --copies >= 3")
        init = mixed_identity_block(args.n, args.depth, args.copies).A
    result = projected_gradient_search(cfg, init=init, workers=args.workers)
    report = result.to_dict()
    report["tolerances"] = _cfg(args).to_dict()
    if args.history:
        try:
            with open(args.history, "w", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(["restart", "iteration", "residual"])
                writer.writerows((r, i, repr(v)) for r, i, v in result.history_rows())
        except OSError as exc:
            raise UsageError(f"cannot write {args.history}: {exc.strerror}") from exc
    lines = [f"restart {s['restart']}: {s['initial_residual']:.6g} -> {s['final_residual']:.6g} ({s['status']})"
             for s in result.restarts_summary]
    lines.append(f"best residual {result.best_residual:.12g} (exploratory; no conclusion drawn)")
    _emit(args, report, lines)
    return OK


# -- demo --------------------------------------------------------------------

def _demo_rows(cfg: ToleranceConfig, seed: int) -> list[dict]:
    rows = []

    def add(step, tag, value, passed):
        rows.append({"step": step, "tag": tag, "value": value, "passed": bool(passed)})

    d = DiagonalSpec.on_sequence([Fraction(1, 2**k) for k in range(8)])
    X = build_X(d, exact=True)
    dev = max_abs((compose(adjoint(X), X) - d.operator(exact=True)).entries)
    add("factorization X*X = D (exact)", "positive-square-root-factorization", dev, dev == 0)

    cert = realize_diagonal([Fraction(1, 2**k) for k in range(32)], 4, cfg=cfg)
    add("block shift, d = 2^-n, K = 4", cert.tag, cert.residual_verified, verify_certificate(cert, cfg).passed)

    T = DiagonalSpec.on_sequence([1, Fraction(1, 3), 2])
    lemma = lemma_block_shift(T, 3, exact=True, cfg=cfg)
    switched = switched_lemma(T, 3, exact=True, cfg=cfg)
    back = conjugate_by_switch(switched, cfg)
    involution = all(a == b for a, b in zip(back.A.entries[: lemma.space.dim, : lemma.space.dim].flat, lemma.A.entries.flat))
    ok = involution and verify_certificate(lemma, cfg).passed and verify_certificate(switched, cfg).passed
    add("square-root shift and switch", lemma.tag, switched.residual_verified, ok)

    desc = CentralOperatorDescriptor((DiagonalSpec.on_sequence([1, 1]), DiagonalSpec.on_dyadic([1, 1])))
    dec = sum_of_two_selfcommutators(desc, 3, cfg=cfg)
    add("sum of two self-commutators", "sum-of-two-self-commutators", dec.residual, dec.residual <= cfg.eq_tol)

    mixed = mixed_identity_block(4, 4, 5, cfg=cfg)
    r = residual(mixed.A, build_target("identity_zero", 4, 4, 5))
    add("mixed identity block, n = N = 4, K = 5", mixed.tag, mixed.residual_verified,
        mixed.residual_verified <= cfg.eq_tol and abs(r - 2.0) <= 1e-8)

    for name, n, trials in (("idempotent", 4, 500), ("powercompact", 4, 2000), ("powerineq", 4, 500), ("trace", 6, 500)):
        rep = run_campaign(name, n, trials, seed, cfg)
        add(f"campaign {name} ({trials} trials)", rep.statement, len(rep.counterexamples), rep.passed)
    return rows


def cmd_demo(args) -> int:
    cfg = _cfg(args)
    rows = _demo_rows(cfg, _seed(args))
    passed = all(r["passed"] for r in rows)
    report = {**_header(args, "demo"), "rows": rows, "passed": passed}
    width = max(len(r["step"]) for r in rows)
    lines = [f"{'step'.ljust(width)}  {'statement':40s}  {'value':>12s}  result"]
    for r in rows:
        value = r["value"] if isinstance(r["value"], int) else f"{float(r['value']):.3e}"
        lines.append(f"{r['step'].ljust(width)}  {r['tag']:40s}  {value!s:>12s}  {'ok' if r['passed'] else 'FAIL'}")
    _emit(args, report, lines)
    return OK if passed else FAILED


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="latcomm", description="Positive operators, self-commutators and lattice checks.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("construct", help="square-root factorizations and isometries")
    csub = p.add_subparsers(dest="what", required=True)
    for what in ("x", "y", "isometry", "averaging"):
        q = csub.add_parser(what, parents=[common])
        q.add_argument("--d", help="diagonal entries or averaging coefficients")
        q.add_argument("--n", type=int, help="sequence dimension (isometry)")
        q.add_argument("--depth", type=int, default=None, help="dyadic depth N (default n)")
        q.add_argument("--samples", type=int, default=1000, help="random vectors (isometry)")
        q.add_argument("--dump-matrices", metavar="DIR")
        q.set_defaults(func=cmd_construct)

    p = sub.add_parser("selfcomm", help="self-commutator certificates")
    ssub = p.add_subparsers(dest="what", required=True)
    for what in ("partition", "construct", "lemma", "kernel", "mixed", "sum"):
        q = ssub.add_parser(what, parents=[common])
        q.add_argument("--d", help="diagonal entries: list or file")
        q.add_argument("--k", type=int, default=3, help="number of blocks K")
        q.add_argument("--depth", type=int, default=None, help="dyadic depth N")
        q.add_argument("--dump-matrices", metavar="DIR")
        if what == "mixed":
            q.add_argument("--n", type=int)
        if what in ("lemma", "kernel"):
            q.add_argument("--dyadic", action="store_true", help="the diagonal lives on the dyadic space")
        if what == "lemma":
            q.add_argument("--switch", action="store_true", help="conjugate by the switch operator")
        if what == "sum":
            q.add_argument("--phi", help="first dyadic component (mixed case)")
            q.add_argument("--psi", help="second dyadic component (mixed case)")
            q.add_argument("--c1", help="first component (homogeneous case)")
            q.add_argument("--c2", help="second component (homogeneous case)")
            q.add_argument("--dyadic", action="store_true", help="homogeneous components are dyadic")
        q.set_defaults(func=cmd_selfcomm)

    q = sub.add_parser("verify", parents=[common], help="re-verify a certificate JSON")
    q.add_argument("--cert", required=True)
    q.set_defaults(func=cmd_verify)

    p = sub.add_parser("falsify", help="randomized falsification campaigns")
    fsub = p.add_subparsers(dest="what", required=True)
    for what in ("idempotent", "powercompact", "powerineq", "trace"):
        q = fsub.add_parser(what, parents=[common])
        q.add_argument("--n", type=int, default=4, help="maximum matrix size")
        q.add_argument("--trials", type=int, default=1000)
        q.add_argument("--workers", type=int, default=1)
        q.set_defaults(func=cmd_falsify)

    q = sub.add_parser("search", parents=[common], help="projected gradient exploration")
    q.add_argument("--n", type=int, default=1)
    q.add_argument("--depth", type=int, default=1)
    q.add_argument("--copies", type=int, default=3)
    q.add_argument("--iters", type=int, default=2000)
    q.add_argument("--restarts", type=int, default=4)
    q.add_argument("--step", type=float, default=0.1)
    q.add_argument("--target", choices=TARGETS, default="zero_identity")
    q.add_argument("--seed-known", action="store_true", help="start restart 0 at the mixed identity block")
    q.add_argument("--workers", type=int, default=1)
    q.add_argument("--history", metavar="CSV")
    q.set_defaults(func=cmd_search)

    q = sub.add_parser("demo", parents=[common], help="scripted tour of all constructions")
    q.set_defaults(func=cmd_demo)
    return parser


def run(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE


def main() -> None:
    sys.exit(run())

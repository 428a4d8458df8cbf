"""Command line front end; every command prints one JSON document on stdout.

Exit codes: 0 when every verdict is decided, 2 when some verdict is only
numeric evidence, 1 on errors (with a machine-readable error code).
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from fractions import Fraction

from . import __version__
from . import linalg, lpfun, operators, spaceability
from . import numerics as nx
from . import sequences as sq
from .numerics import format_rational

EXIT_OK, EXIT_ERROR, EXIT_EVIDENCE = 0, 1, 2


class CliError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


def rational(text: str) -> Fraction:
    try:
        return nx.parse_rational(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise CliError("malformed_rational", f"{text!r}: {exc}") from None


def positive_rational(text: str) -> Fraction:
    x = rational(text)
    if x <= 0:
        raise CliError("malformed_rational", f"{text!r} must be positive")
    return x


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _envelope(command: str, query: dict, body: dict) -> dict:
    return {
        "command": command,
        "query": query,
        "tool_version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        **body,
    }


def _read_json(path: str | None) -> dict:
    try:
        if path in (None, "-"):
            text = sys.stdin.read()
        else:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
    except OSError as exc:
        raise CliError("io_error", str(exc)) from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError("schema_violation", f"invalid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise CliError("schema_violation", "descriptor must be a JSON object")
    return obj


def _parse_descriptor(obj: dict):
    try:
        if obj.get("type") == "sequence":
            return sq.sequence_from_json(obj)
        if obj.get("type") == "function":
            return lpfun.function_from_json(obj)
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError("schema_violation", f"bad descriptor: {exc}") from None
    raise CliError("schema_violation", f"unknown descriptor type {obj.get('type')!r}")


def _exit_for(verdicts) -> int:
    return EXIT_EVIDENCE if any(isinstance(v, sq.NumericEvidence) for v in verdicts) else EXIT_OK


# ---------------------------------------------------------------------------
# commands


def cmd_witness(args) -> tuple[dict, int]:
    p = positive_rational(args.p)
    if args.kind == "seq":
        return sq.witness_vector(p).to_json(), EXIT_OK
    return lpfun.fn_witness(p).to_json(), EXIT_OK


def cmd_certify(args) -> tuple[dict, int]:
    q = positive_rational(args.q)
    eps = positive_rational(args.eps)
    obj = _read_json(args.input)
    target = _parse_descriptor(obj)
    budget = sq.Budget(
        max_terms=args.max_terms,
        threshold=positive_rational(args.threshold),
        eps=eps,
        block_choice=args.block_choice,
    )
    if isinstance(target, sq.SymbolicSequence):
        v = sq.lq_membership(target, q, budget)
    else:
        v = lpfun.lq_fn_membership(target, q, budget)
    body = {"verdict": v.to_json()}
    if isinstance(v, sq.Converges):
        body["enclosure"] = nx.enclose(v.bound, eps).to_json()
    if isinstance(v, sq.Diverges):
        cert = v.certificate
        body["certificate_valid"] = cert.validate()
        if isinstance(cert, sq.DivergenceCertificate):
            body["predicted_truncation"] = str(cert.predicted_truncation(budget.threshold))
    query = {
        "descriptor": obj,
        "q": format_rational(q),
        "max_terms": args.max_terms,
        "eps": format_rational(eps),
        "threshold": format_rational(budget.threshold),
        "block_choice": args.block_choice,
    }
    return _envelope("certify", query, body), _exit_for([v])


def _sample_coeffs(rng: random.Random, n: int) -> list[Fraction]:
    m = rng.randint(n, n + 4)
    coeffs = [Fraction(rng.randint(-6, 6), rng.randint(1, 4)) for _ in range(m)]
    if not any(coeffs):
        coeffs[rng.randrange(m)] = Fraction(1)
    return coeffs


def cmd_construct(args) -> tuple[dict, int]:
    basis = []
    for path in args.inputs:
        s = _parse_descriptor(_read_json(path))
        if not isinstance(s, sq.SymbolicSequence):
            raise CliError("schema_violation", f"{path}: construct needs sequence descriptors")
        basis.append(s)
    try:
        op = spaceability.build_operator(basis, max_n=args.max_n, depth=args.depth)
    except linalg.BudgetExceeded as exc:
        raise CliError("budget_exceeded", f"{exc} {dumps(exc.diagnostics)}") from None
    except spaceability.SelectionStalled as exc:
        raise CliError("selection_stalled", str(exc)) from None
    except spaceability.PreconditionError as exc:
        raise CliError("precondition", str(exc)) from None
    q = rational(args.q) if args.q else op.p / 4
    if not 0 < q < op.p:
        raise CliError("precondition", "q must lie in (0, p)")
    rng = random.Random(args.seed)
    samples = [_sample_coeffs(rng, op.n) for _ in range(args.sample)]
    budget = sq.Budget(max_terms=args.max_terms)

    def run_one(coeffs):
        image = spaceability.apply_operator(op, coeffs)
        head = spaceability.head_combination(op, coeffs)
        f = op.complement
        recovered = all(
            image.coordinate(f.at(m)) == head.coordinate(f.at(m)) for m in range(1, args.coords + 1)
        )
        verdict = spaceability.certify_outside(op, coeffs, q, budget)
        return coeffs, recovered, spaceability.norm_bound_check(op, coeffs), verdict

    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        results = list(pool.map(run_one, samples))
    body = {
        "operator": op.to_json(),
        "n0": op.n0,
        "cardinality": {"given": spaceability.Finite(op.n).to_json(), "extended": spaceability.Continuum().to_json()},
        "selection": {
            "alphas": op.selection.alphas(args.depth),
            "checks": [c.to_json() for c in op.selection.checks(args.depth)],
            "skips": [list(s) for s in op.selection.skips],
        },
        "samples": [
            {
                "coeffs": [format_rational(c) for c in coeffs],
                "head_recovery": rec,
                "norm_bound": nb,
                "verdict": v.to_json(),
            }
            for coeffs, rec, nb, v in results
        ],
    }
    query = {
        "inputs": [b.to_json() for b in basis],
        "depth": args.depth,
        "sample": args.sample,
        "coords": args.coords,
        "q": format_rational(q),
        "seed": args.seed,
        "max_n": args.max_n,
        "max_terms": args.max_terms,
    }
    return _envelope("construct", query, body), _exit_for([r[3] for r in results])


def cmd_obstruct(args) -> tuple[dict, int]:
    p = positive_rational(args.p)
    if args.kind == "aleph0":
        report = spaceability.aleph0_obstruction(p, depth=args.depth)
    else:
        if args.n is None or args.n < 1:
            raise CliError("precondition", "example12 needs --n >= 1")
        k0 = sq.first_block_index(p)
        tail = sq.witness_vector(p, spaceability.BlockPartition(first_block=k0, offset=args.n))
        report = spaceability.example12_obstruction(args.n, tail)
    query = {"kind": args.kind, "p": format_rational(p), "n": args.n, "depth": args.depth}
    return _envelope("obstruct", query, {"report": report.to_json()}), EXIT_OK


def cmd_opdemo(args) -> tuple[dict, int]:
    p, q = positive_rational(args.p), positive_rational(args.q)
    T, part, j0 = operators.demo_operator(p, q)
    z = operators.ones(args.coords)
    checks = []
    for k in range(1, args.masks + 1):
        masks = [operators.mask_operator(T, i, part, j0) for i in range(1, k + 1)]
        checks.append({"k": k, "independent": operators.independence_j0_check(T, masks, z, j0)})
    rng = random.Random(args.seed)
    psis = []
    for _ in range(args.samples):
        a = [Fraction(rng.randint(-5, 5), rng.randint(1, 4)) for _ in range(rng.randint(1, 6))]
        P = operators.psi(a, T, part)
        psis.append(
            {
                "a": [format_rational(x) for x in a],
                "collision": operators.collision_holds(P, args.coords),
                "norm_bound": operators.psi_norm_check(a, T, part),
            }
        )
    body = {
        "operator": T.to_json(),
        "j0": j0,
        "mask_partition": part.to_json(),
        "norm_bound": nx.expr_to_json(T.norm_bound()),
        "noninjective": operators.verify_noninjective(T, args.coords),
        "independence": checks,
        "psi_samples": psis,
    }
    query = {
        "p": format_rational(p),
        "q": format_rational(q),
        "coords": args.coords,
        "masks": args.masks,
        "samples": args.samples,
        "seed": args.seed,
    }
    return _envelope("opdemo", query, body), EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="spaceable", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    w = sub.add_parser("witness", help="print a witness descriptor")
    w.add_argument("kind", choices=["seq", "fun"])
    w.add_argument("--p", required=True)
    w.set_defaults(func=cmd_witness)

    c = sub.add_parser("certify", help="decide l_q / L_q membership of a descriptor")
    c.add_argument("--in", dest="input", default="-")
    c.add_argument("--q", required=True)
    c.add_argument("--max-terms", type=int, default=20000)
    c.add_argument("--eps", default="1/1099511627776")
    c.add_argument("--threshold", default="1000/1")
    c.add_argument("--block-choice", choices=["first", "fastest"], default="first")
    c.set_defaults(func=cmd_certify)

    k = sub.add_parser("construct", help="build the extension operator for a basis")
    k.add_argument("--inputs", nargs="+", required=True)
    k.add_argument("--depth", type=int, default=16)
    k.add_argument("--sample", type=int, default=8)
    k.add_argument("--coords", type=int, default=64)
    k.add_argument("--q")
    k.add_argument("--seed", type=int, default=0)
    k.add_argument("--max-n", type=int, default=64)
    k.add_argument("--max-terms", type=int, default=20000)
    k.add_argument("--jobs", type=int, default=1)
    k.set_defaults(func=cmd_construct)

    o = sub.add_parser("obstruct", help="obstruction reports")
    o.add_argument("--kind", choices=["aleph0", "example12"], required=True)
    o.add_argument("--p", required=True)
    o.add_argument("--n", type=int)
    o.add_argument("--depth", type=int, default=10)
    o.set_defaults(func=cmd_obstruct)

    d = sub.add_parser("opdemo", help="non-injective operator demonstration")
    d.add_argument("--p", required=True)
    d.add_argument("--q", required=True)
    d.add_argument("--coords", type=int, default=64)
    d.add_argument("--masks", type=int, default=10)
    d.add_argument("--samples", type=int, default=50)
    d.add_argument("--seed", type=int, default=0)
    d.set_defaults(func=cmd_opdemo)
    return ap


def run(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_OK
    try:
        doc, code = args.func(args)
    except CliError as exc:
        doc, code = {"error": {"code": exc.code, "message": str(exc)}}, EXIT_ERROR
    except nx.PrecisionError as exc:
        doc, code = {"error": {"code": "precision", "message": str(exc)}}, EXIT_ERROR
    except (ValueError, ArithmeticError) as exc:
        doc, code = {"error": {"code": "invalid_input", "message": str(exc)}}, EXIT_ERROR
    out.write(dumps(doc) + "\n")
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

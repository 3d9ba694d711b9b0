"""Command-line front end.

Every report is deterministic for a given seed: keys are sorted, floats are
rounded, and no timestamps or paths enter the report body.  Exit codes are
0 (pass / success), 1 (a checked relation failed) and 2 (usage or
evaluation error).
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .catalog import Bindings, default_catalog, record_checksum
from .expr import evaluate
from .lift import LiftError, LiftJob, lift
from .rll import RllError, chain_operator, charges, hamiltonian_density, lax_from_solution, solve_fcr_space
from .scalars import get_backend
from .verify import DEFAULT_TOL, RELATIONS, SamplePlan, SamplingError, run_relation

EXIT_PASS, EXIT_FAIL, EXIT_ERROR = 0, 1, 2


class CliError(Exception):
    pass


def _split_bindings(rec, items, backend="f64"):
    """Split ``--bind`` assignments into parameter values and function bindings."""
    b = Bindings.parse_assignments(items)
    be = get_backend("f64" if backend == "formal" else backend)
    params, fns = {}, {}
    for name, e in b.table.items():
        if name in rec.params:
            try:
                params[name] = evaluate(e, be, {})
            except Exception as exc:
                raise CliError(f"cannot evaluate parameter {name}: {exc}") from None
        elif name in rec.free_fns:
            fns[name] = e
        else:
            raise CliError(f"{rec.id} has no parameter or free function named {name!r}")
    out = Bindings()
    out.table = fns
    return params, out


def _config(args, **extra) -> dict:
    cfg = {"command": args.command, "seed": args.seed, "bind": list(args.bind or [])}
    cfg.update(extra)
    return cfg


def _emit(args, report: dict, summary: str):
    text = json.dumps(report, sort_keys=True, indent=2)
    if args.json == "-":
        print(text)
    else:
        print(summary)
        if args.json:
            with open(args.json, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")


def _record(rid):
    try:
        return default_catalog().get(rid)
    except KeyError as exc:
        raise CliError(str(exc.args[0])) from None


# ---------------------------------------------------------------- verbs

def cmd_catalog(args) -> int:
    cat = default_catalog()
    if args.action == "list":
        recs = cat.list(kind=args.kind, rank=args.rank, include_builtin=args.kind is None)
        for r in recs:
            print(f"{r.id:12s} {r.kind:10s} rank {r.rank}  {r.citation}")
        if args.kind == "spectral":
            fams = sorted({r.family for r in recs})
            print(f"families: {len(fams)} ({', '.join(fams)})")
        return EXIT_PASS
    if args.action == "show":
        if not args.id:
            raise CliError("catalog show needs a record id")
        rec = _record(args.id)
        print(rec.display())
        print(f"  checksum: {record_checksum(rec)}")
        return EXIT_PASS
    if args.id:
        data = _record(args.id).to_json()
    else:
        data = [r.to_json() for r in cat.list()]
    text = json.dumps(data, sort_keys=True, indent=2)
    if args.json and args.json != "-":
        with open(args.json, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return EXIT_PASS


def cmd_verify(args) -> int:
    rec = _record(args.id)
    params, fns = _split_bindings(rec, args.bind, args.backend)
    plan = SamplePlan(seed=args.seed, count=args.samples, backend=args.backend)
    try:
        rep = run_relation(args.relation, rec, plan, params=params, bindings=fns, tol=args.tol)
    except SamplingError as exc:
        raise CliError(str(exc)) from None
    out = rep.to_json()
    out["config"] = _config(args, relation=args.relation, id=rec.id, samples=args.samples,
                            tol=args.tol, backend=args.backend)
    _emit(args, out, f"{args.relation} {rec.id}: {rep.verdict} (max residual {rep.max:.3e}, "
                     f"{len(rep.residuals)} samples, backend {rep.backend})")
    return EXIT_PASS if rep.passed else EXIT_FAIL


def cmd_lift(args) -> int:
    job = LiftJob(seed=args.id, branch=args.branch, order=args.order)
    ledger = lift(job, match_seed=args.seed)
    out = ledger.to_json()
    out["config"] = _config(args, id=args.id, branch=args.branch, order=args.order)
    out["checksum"] = record_checksum(_record(args.id))
    leaves = ledger.leaves()
    lines = [f"lift {args.id} to order {args.order}: {len(leaves)} leaf branch(es)"]
    for k, leaf in enumerate(leaves):
        dims = leaf.dims(args.order)
        tag = f" -> {leaf.match}" if leaf.match else ""
        lines.append(f"  [{k}] {leaf.status}{tag} dims {dims} constraints {list(leaf.constraints)}")
    _emit(args, out, "\n".join(lines))
    return EXIT_PASS


def _sample_pairs(seed, count):
    out = []
    for i in range(count):
        rng = np.random.default_rng([seed, i, 7])
        z = []
        while len(z) < 2:
            r, t = rng.uniform(0.5, 1.5), rng.uniform(0, 2 * np.pi)
            w = complex(r * np.cos(t), r * np.sin(t))
            if all(abs(w - x) >= 0.05 for x in z):
                z.append(w)
        out.append(tuple(z))
    return out


def _lax(args, rec):
    params, fns = _split_bindings(rec, args.bind)
    return lax_from_solution(rec, fns, params, seed=args.seed)


def cmd_rll(args) -> int:
    rec = _record(args.id)
    lax = _lax(args, rec)
    spaces = [solve_fcr_space(lax, u, v, seed=args.seed) for u, v in _sample_pairs(args.seed, args.samples)]
    dims = [s.dim for s in spaces]
    members = sorted({n for s in spaces for n, r in s.matches if r <= args.tol})
    always = [n for n in members if all(any(m == n and r <= args.tol for m, r in s.matches) for s in spaces)]
    out = {
        "record": rec.id,
        "checksum": record_checksum(rec),
        "regular": lax.regular,
        "dims": dims,
        "template_members": always,
        "spaces": [s.to_json() for s in spaces],
        "bindings": lax.bindings.text() if lax.bindings else {},
        "params": {k: [round(complex(v).real, 12), round(complex(v).imag, 12)] for k, v in sorted(lax.params.items())},
        "config": _config(args, id=rec.id, samples=args.samples, tol=args.tol),
    }
    _emit(args, out, f"rll {rec.id}: FCR dims {dims}; members {always}; regular {lax.regular}")
    return EXIT_PASS


def cmd_charges(args) -> int:
    rec = _record(args.id)
    lax = _lax(args, rec)
    cs = charges(lax, args.sites, args.order)
    out = cs.to_json()
    out.update(record=rec.id, checksum=record_checksum(rec), regular=lax.regular,
               config=_config(args, id=rec.id, sites=args.sites, order=args.order, tol=args.tol))
    ok = cs.max_tilde_commutator() <= args.tol and cs.max_q_commutator() <= args.tol
    if lax.regular:
        H = hamiltonian_density(lax)
        if cs.log_defined:
            dev = float(np.linalg.norm(cs.q[2] - chain_operator(H, args.sites)))
            out["hamiltonian_deviation"] = float(f"{dev:.6e}")
            ok = ok and dev <= args.tol
    summary = (f"charges {rec.id} N={args.sites}: max [Q~m,Q~n] {cs.max_tilde_commutator():.3e}"
               + (f", max [Qm,Qn] {cs.max_q_commutator():.3e}" if cs.log_defined else f", {cs.flag}"))
    _emit(args, out, summary)
    return EXIT_PASS if ok else EXIT_FAIL


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--tol", type=float, default=DEFAULT_TOL)
    common.add_argument("--bind", action="append", default=[],
                        help='parameter or function assignment, e.g. "f1=exp(u-v)" or "p=2"')
    common.add_argument("--json", metavar="PATH", help="write the JSON report to PATH ('-' for stdout)")

    p = argparse.ArgumentParser(prog="ybx", description="Yang-Baxter toolkit for 4x4 R-matrices.")
    p.add_argument("--version", action="version", version=f"ybx {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("catalog", parents=[common], help="list, show or dump catalog records")
    c.add_argument("action", choices=["list", "show", "dump"])
    c.add_argument("id", nargs="?")
    c.add_argument("--kind", choices=["constant", "spectral", "rll-tilde"])
    c.add_argument("--rank", type=int)
    c.set_defaults(fn=cmd_catalog)

    v = sub.add_parser("verify", parents=[common], help="check a relation at seeded samples")
    v.add_argument("relation", choices=sorted(RELATIONS))
    v.add_argument("id")
    v.add_argument("--samples", type=int, default=20)
    v.add_argument("--backend", choices=["f64", "exact", "formal"], default="f64")
    v.set_defaults(fn=cmd_verify)

    lf = sub.add_parser("lift", parents=[common], help="lift a constant solution order by order")
    lf.add_argument("id")
    lf.add_argument("--branch")
    lf.add_argument("--order", type=int, default=4)
    lf.set_defaults(fn=cmd_lift)

    r = sub.add_parser("rll", parents=[common], help="FCR solution space of L(u) = R(u,0)")
    r.add_argument("id")
    r.add_argument("--samples", type=int, default=5)
    r.set_defaults(fn=cmd_rll)

    ch = sub.add_parser("charges", parents=[common], help="transfer-matrix charges on a periodic chain")
    ch.add_argument("id")
    ch.add_argument("--sites", type=int, default=4)
    ch.add_argument("--order", "--orders", dest="order", type=int, default=4)
    ch.set_defaults(fn=cmd_charges)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_PASS
    try:
        return args.fn(args)
    except (CliError, LiftError, RllError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

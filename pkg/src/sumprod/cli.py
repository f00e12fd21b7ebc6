"""Command-line entry point: ``sumprod <command> [options]``.

Exit codes: 0 success, 2 configuration error, 3 audit/verification failure,
4 budget or cap exceeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .acceptance import run_all
from .digraph import GraphParams, SumProductDigraph, audit_graph
from .errors import AuditFailure, CapExceeded, ConfigError
from .fq_linalg import (
    DEFAULT_ENUMERATION_CAP,
    MatrixRing,
    field_from_order,
    format_matrix,
    mat_rank,
    mat_unindex,
    parse_matrix,
)
from .incidence import (
    count_incidences,
    count_solutions_via_f,
    random_family,
    random_pairs,
    read_family,
    read_pairs,
    theorem_report,
    write_family,
    write_pairs,
)
from .parallel import default_workers
from .rank_census import (
    DEFAULT_PAIR_BUDGET,
    census_bruteforce,
    census_exact,
    measured_constant,
    solvable_pairs_bruteforce,
)
from .spectrum import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    SPECTRAL_CAP,
    dense_spectrum,
    second_singular_direction,
)

EXIT_CONFIG, EXIT_AUDIT, EXIT_CAP = 2, 3, 4


class Failed(Exception):
    """A check ran to completion and failed; the report is still written."""


# ---------------------------------------------------------------------------
# parser


def _poly(text: str) -> tuple[int, ...]:
    return tuple(int(c) for c in text.replace(",", " ").split())


def _sizes(text: str) -> list[int]:
    return [int(s) for s in text.replace(",", " ").split()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key=value file; flags override it")
    common.add_argument("--workers", type=int, default=default_workers())
    common.add_argument("--out", type=Path, help="write the report here instead of stdout")
    common.add_argument("--format", choices=["json", "csv"], default="json")

    fieldp = argparse.ArgumentParser(add_help=False)
    fieldp.add_argument("--q", type=int, default=3, help="field order (prime or 4, 8, 9)")
    fieldp.add_argument("--poly", type=_poly, help="irreducible polynomial, little-endian coefficients")

    graphp = argparse.ArgumentParser(add_help=False)
    graphp.add_argument("--n", type=int, default=2)
    graphp.add_argument("--d", type=int, default=1)

    parser = argparse.ArgumentParser(prog="sumprod", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("census", parents=[common, fieldp], help="rank census and solvable-pair counts")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--t", type=int, default=2)
    p.add_argument("--cap", type=int, default=DEFAULT_ENUMERATION_CAP)
    p.add_argument("--budget", type=int, default=DEFAULT_PAIR_BUDGET)
    p.add_argument("--no-pairs", action="store_true", help="skip the solvable-pair table")
    p.add_argument("--exact-only", action="store_true", help="closed-form counts, no enumeration")

    g = sub.add_parser("graph", help="digraph audits")
    gsub = g.add_subparsers(dest="action", required=True)
    p = gsub.add_parser("audit", parents=[common, fieldp, graphp], help="degree, normality, case prediction")
    p.add_argument("--vertex-sample", type=int, default=1000)
    p.add_argument("--pair-sample", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--exhaustive", action="store_true")

    p = sub.add_parser("spectrum", parents=[common, fieldp, graphp], help="second eigenvalue estimate")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cap", type=int, default=SPECTRAL_CAP)
    p.add_argument("--dense-oracle", action="store_true", help="exact dense eigensolve (<= 10^4 vertices)")

    p = sub.add_parser("solve", parents=[common, fieldp, graphp], help="count sum-product solutions")
    p.add_argument("--family", type=Path, help="family file; random family when omitted")
    p.add_argument("--sizes", type=_sizes, default=[20], help="one size, or a1..ad,b1..bd,e,f")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget", type=int, default=10**9)
    p.add_argument("--lambda", dest="lambda_est", type=float, help="use this lambda for the mixing bound")
    p.add_argument("--measure-lambda", action="store_true", help="estimate lambda by power iteration")
    p.add_argument("--save-family", type=Path, help="also write the family used")

    p = sub.add_parser("incidence", parents=[common, fieldp], help="count point-line incidences")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--points", type=Path)
    p.add_argument("--lines", type=Path)
    p.add_argument("--sizes", type=_sizes, default=[500], help="|P| or |P|,|L| for random sets")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget", type=int, default=10**9)
    p.add_argument("--lambda", dest="lambda_est", type=float)
    p.add_argument("--measure-lambda", action="store_true")
    p.add_argument("--save-points", type=Path)
    p.add_argument("--save-lines", type=Path)

    p = sub.add_parser("verify-all", parents=[common], help="run the acceptance checks at q=3, n=2, d=1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pair-sample", type=int, default=10_000)

    p = sub.add_parser("matrix", parents=[common, fieldp], help="matrix text format utilities")
    p.add_argument("action", choices=["rank", "index", "unindex"])
    p.add_argument("value", help='"q n t : e00 e01 ..." or a decimal index')
    p.add_argument("--rows", type=int, default=2)
    p.add_argument("--cols", type=int, default=2)
    return parser


def _leaf_parser(parser: argparse.ArgumentParser, args) -> argparse.ArgumentParser:
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    leaf = sub.choices[args.command]
    if args.command == "graph":
        inner = next(a for a in leaf._actions if isinstance(a, argparse._SubParsersAction))
        leaf = inner.choices[args.action]
    return leaf


def load_config(path: Path) -> dict[str, str]:
    entries = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        entries[key.replace("-", "_")] = value
    return entries


def _apply_config(leaf: argparse.ArgumentParser, entries: dict[str, str]) -> None:
    actions = {a.dest: a for a in leaf._actions}
    defaults = {}
    for key, value in entries.items():
        action = actions.get(key)
        if action is None or key in ("config", "help"):
            raise ConfigError(f"unknown config key {key!r}")
        if isinstance(action, argparse._StoreTrueAction):
            defaults[key] = value.lower() in ("1", "true", "yes", "on")
        else:
            convert = action.type or str
            try:
                defaults[key] = convert(value)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {key}: {value!r}") from exc
    leaf.set_defaults(**defaults)


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        _apply_config(_leaf_parser(parser, args), load_config(args.config))
        args = parser.parse_args(argv)
    if getattr(args, "workers", 1) < 1:
        raise ConfigError("--workers must be >= 1")
    for name in ("cap", "budget", "vertex_sample", "pair_sample", "max_iter"):
        if getattr(args, name, 1) < 1:
            raise ConfigError(f"--{name.replace('_', '-')} must be positive")
    return args


def resolved_config(args) -> dict:
    out = {}
    for key, value in sorted(vars(args).items()):
        if key in ("out", "config"):
            continue
        if isinstance(value, Path):
            value = str(value)
        elif isinstance(value, tuple):
            value = list(value)
        out[key] = value
    return out


# ---------------------------------------------------------------------------
# commands


def _field(args):
    return field_from_order(args.q, args.poly)


def _notes(field, n) -> list[str]:
    notes = []
    if field.q % 2 == 0:
        notes.append("even q: extrapolation beyond the odd-q hypothesis")
    if n < 2:
        notes.append("n = 1: below the n >= 2 hypothesis")
    return notes


def cmd_census(args, timing):
    field = _field(args)
    if args.exact_only:
        ranks = census_exact(args.n, args.t, field)
    else:
        ranks = census_bruteforce(args.n, args.t, field, cap=args.cap)
    result = {"rank_census": [r.to_dict() for r in ranks]}
    if not args.no_pairs:
        pairs = solvable_pairs_bruteforce(args.n, args.t, field, budget=args.budget)
        result["solvable_pairs"] = [r.to_dict() for r in pairs]
        result["solvable_pairs_measured_constant"] = measured_constant(pairs)
    notes = _notes(field, args.n)
    if args.n >= args.t:
        notes.append("n >= t: the rank bound is stated for n < t")
    return result, notes


def _census_csv(result) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "t", "q", "k", "exact", "bound", "ratio"])
    for r in result["rank_census"]:
        w.writerow([r["n"], r["t"], r["q"], r["k"], r["exact_count"], r["paper_bound"], repr(r["ratio"])])
    if "solvable_pairs" in result:
        buf.write("\n")
        w.writerow(["n", "t", "q", "m", "k", "T_exact", "T_bound", "ratio"])
        for r in result["solvable_pairs"]:
            w.writerow([r["n"], r["t"], r["q"], r["m"], r["k"], r["exact_count"], r["paper_bound"],
                        repr(r["ratio"])])
    return buf.getvalue()


def cmd_graph_audit(args, timing):
    field = _field(args)
    graph = SumProductDigraph(GraphParams(field, args.n, args.d))
    rep = audit_graph(graph, args.vertex_sample, args.pair_sample, args.seed,
                      exhaustive=args.exhaustive, workers=args.workers, raise_on_failure=False)
    result = {"q": field.q, "n": args.n, "d": args.d, "n_vertices": graph.n_vertices,
              "degree": graph.degree, **rep.to_dict()}
    if rep.first_counterexample is not None:
        raise Failed(result, GraphParams(field, args.n, args.d).hypothesis_notes())
    return result, GraphParams(field, args.n, args.d).hypothesis_notes()


def _spectrum_for(field, n, d, args):
    graph = SumProductDigraph(GraphParams(field, n, d))
    return second_singular_direction(graph, tol=getattr(args, "tol", DEFAULT_TOL),
                                     max_iter=getattr(args, "max_iter", DEFAULT_MAX_ITER),
                                     seed=args.seed, workers=args.workers)


def cmd_spectrum(args, timing):
    field = _field(args)
    params = GraphParams(field, args.n, args.d)
    graph = SumProductDigraph(params)
    if args.dense_oracle:
        rep = dense_spectrum(graph)
    else:
        rep = second_singular_direction(graph, tol=args.tol, max_iter=args.max_iter, seed=args.seed,
                                        cap=args.cap, workers=args.workers)
    return rep.to_dict(), params.hypothesis_notes()


def _lambda(args, field, n, d, timing):
    if args.lambda_est is not None:
        return args.lambda_est, "given"
    if args.measure_lambda:
        t0 = time.perf_counter()
        rep = _spectrum_for(field, n, d, args)
        timing["lambda_s"] = time.perf_counter() - t0
        return rep.lambda_est, "measured"
    return None, None


def cmd_solve(args, timing):
    field = _field(args)
    if args.family:
        fam = read_family(args.family, field, args.n, args.d)
    else:
        fam = random_family(args.sizes, field, args.n, args.d, args.seed)
    if args.save_family:
        write_family(args.save_family, fam)
    ring = MatrixRing(field, args.n)
    lam, source = _lambda(args, field, args.n, args.d, timing)
    rep = theorem_report(fam, lam, ring, budget=args.budget, workers=args.workers)
    other = count_solutions_via_f(fam, ring, budget=args.budget)
    result = {**rep.to_dict(), "count_via_f": other, "counters_agree": other == rep.count,
              "lambda_source": source}
    if other != rep.count:
        raise Failed(result, rep.notes)
    return result, rep.notes


def cmd_incidence(args, timing):
    field = _field(args)
    ring = MatrixRing(field, args.n)
    rng = np.random.default_rng(args.seed)
    if args.points:
        pts = read_pairs(args.points)
    else:
        pts = random_pairs(args.sizes[0], ring.order, rng)
    if args.lines:
        lns = read_pairs(args.lines)
    else:
        lns = random_pairs(args.sizes[-1], ring.order, rng)
    if args.save_points:
        write_pairs(args.save_points, pts)
    if args.save_lines:
        write_pairs(args.save_lines, lns)
    lam, source = _lambda(args, field, args.n, 1, timing)
    rep = count_incidences(pts, lns, field, args.n, lam, ring, budget=args.budget)
    return {**rep.to_dict(), "lambda_source": source}, rep.notes


def cmd_verify_all(args, timing):
    results = run_all(args.seed, args.workers, args.pair_sample, timing)
    for r in results:
        print(r.line(), file=sys.stderr)
    result = {
        "passed": all(r.passed for r in results),
        "criteria": [r.to_dict() for r in results],
    }
    if not result["passed"]:
        raise Failed(result, [])
    return result, []


def cmd_matrix(args, timing):
    if args.action == "unindex":
        field = _field(args)
        m = mat_unindex(int(args.value), args.rows, args.cols, field)
        return {"matrix": format_matrix(m)}, []
    m = parse_matrix(args.value)
    if args.action == "rank":
        return {"matrix": format_matrix(m), "rank": mat_rank(m)}, []
    return {"matrix": format_matrix(m), "index": m.index()}, []


COMMANDS = {
    "census": cmd_census,
    "graph": cmd_graph_audit,
    "spectrum": cmd_spectrum,
    "solve": cmd_solve,
    "incidence": cmd_incidence,
    "verify-all": cmd_verify_all,
    "matrix": cmd_matrix,
}


# ---------------------------------------------------------------------------
# output


def _flatten(prefix: str, value, rows: list) -> None:
    if isinstance(value, dict):
        for k in sorted(value):
            _flatten(f"{prefix}.{k}" if prefix else str(k), value[k], rows)
    elif isinstance(value, list) and value and isinstance(value[0], (dict, list)):
        for i, v in enumerate(value):
            _flatten(f"{prefix}.{i}", v, rows)
    else:
        rows.append((prefix, json.dumps(value) if isinstance(value, list) else value))


def render(command: str, config: dict, result: dict, notes: list[str], timing: dict, fmt: str) -> str:
    if fmt == "json":
        doc = {"command": command, "config": config, "notes": notes, "result": result, "timing": timing}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    header = "".join(f"# {k}={json.dumps(v)}\n" for k, v in config.items())
    header += "".join(f"# note: {n}\n" for n in notes)
    if command == "census":
        return header + _census_csv(result)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["key", "value"])
    rows: list = []
    _flatten("", result, rows)
    w.writerows(rows)
    return header + buf.getvalue()


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except ConfigError as exc:
        print(f"sumprod: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    command = args.command + (f" {args.action}" if args.command == "graph" else "")
    config = resolved_config(args)
    timing: dict = {}
    t0 = time.perf_counter()
    status = 0
    try:
        result, notes = COMMANDS[args.command](args, timing)
    except Failed as exc:
        result, notes = exc.args
        status = EXIT_AUDIT
    except ConfigError as exc:
        print(f"sumprod: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AuditFailure as exc:
        print(f"sumprod: audit failure: {exc}", file=sys.stderr)
        return EXIT_AUDIT
    except CapExceeded as exc:
        print(f"sumprod: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CAP
    timing["elapsed_s"] = time.perf_counter() - t0
    _emit(render(command, config, result, notes, timing, args.format), args.out)
    return status


if __name__ == "__main__":
    sys.exit(main())

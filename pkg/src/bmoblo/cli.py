"""Command-line interface.

Subcommands
    eval       point evaluation: region, segment parameter, B, gradient, A
    table      CSV tables: phi (decay function), b (boundary trace),
               boundary-regions (region knots)
    regions    alias for `table --kind boundary-regions`
    concavity  seeded randomized concavity sweep
    tree       verify an alpha-tree given as JSON
    optimizer  convergence table of the norm-optimizing family

Exit codes: 0 success, 1 verification failure, 2 usage or domain error.
All numeric output uses 17 significant digits, so files are byte-stable
for a fixed seed and flag set.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import __version__
from .bellman import eval_A, eval_b, eval_B, eval_F, solve_s
from .concavity import sweep
from .errors import BmobloError, DomainError
from .geometry import OmegaPoint, classify, make_context
from .optimizers import m_norm_report, report_to_csv
from . import trees as trees_mod

_FMT = ".17g"


def _fmt(x: float) -> str:
    return format(float(x), _FMT)


def _add_common(p: argparse.ArgumentParser, need_alpha: bool = True):
    if need_alpha:
        g = p.add_mutually_exclusive_group(required=True)
        g.add_argument("--alpha", type=float, help="splitting parameter in (0, 1/2]")
        g.add_argument("--n", type=int, help="dyadic dimension; alpha = 2^-n")
    p.add_argument("--tol", type=float, default=1e-12, help="membership tolerance")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", type=str, default=None, help="output path (default stdout)")


def _context(args):
    alpha = 2.0 ** (-args.n) if args.alpha is None else args.alpha
    return make_context(alpha, tol=args.tol)


def _emit(text: str, args) -> None:
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _grid(spec: str):
    try:
        lo_s, hi_s, step_s = spec.split(":")
        lo, hi, step = float(lo_s), float(hi_s), float(step_s)
    except ValueError:
        raise DomainError(f"grid spec {spec!r} is not lo:hi:step") from None
    if step <= 0 or hi < lo:
        raise DomainError(f"grid spec {spec!r} is empty or has non-positive step")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [lo + i * step for i in range(n)]


def _rows_to_text(rows, header, args) -> str:
    if args.format == "json":
        payload = [dict(zip(header, r)) for r in rows]
        return json.dumps(payload, indent=2) + "\n"
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(_fmt(v) if isinstance(v, float) else str(v) for v in r))
    return "\n".join(lines) + "\n"


def cmd_eval(args) -> int:
    ctx = _context(args)
    x = OmegaPoint(args.x[0], args.x[1])
    region = classify(x, ctx)
    bv = eval_B(x, ctx)
    record = {
        "x1": x.x1,
        "x2": x.x2,
        "region": str(region),
        "B": bv.value,
        "grad1": bv.grad1,
        "grad2": bv.grad2,
    }
    if region.is_chain:
        record["s"] = solve_s(x, ctx).s
    if args.L is not None:
        record["A"] = eval_A(x, args.L, ctx)
        record["L"] = args.L
    if args.format == "json":
        _emit(json.dumps(record, indent=2) + "\n", args)
    else:
        _emit(
            "".join(
                f"{k} = {_fmt(v) if isinstance(v, float) else v}\n"
                for k, v in record.items()
            ),
            args,
        )
    return 0


def cmd_table(args) -> int:
    ctx = _context(args)
    if args.kind == "phi":
        ts = _grid(args.grid) if args.grid else [i * ctx.tau / 20 for i in range(101)]
        # Knot rows t = k*tau carry the exact values alpha^k; make sure they
        # are present whatever the grid.
        kmax = int(math.floor(max(ts) / ctx.tau + 1e-9))
        knots = [k * ctx.tau for k in range(kmax + 1)]
        ts = sorted(set(float(t) for t in ts) | set(knots))
        rows = [(t, float(eval_F(t, ctx))) for t in ts if t >= 0]
        return _finish_table(rows, ("t", "phi"), args)
    if args.kind == "b":
        ps = _grid(args.grid) if args.grid else [-5 * ctx.tau + i * ctx.tau / 20 for i in range(141)]
        if not any(abs(p) < 1e-15 for p in ps):
            ps = sorted(set(ps) | {0.0})
        rows = [(float(p), float(eval_b(p, ctx))) for p in ps]
        return _finish_table(rows, ("p", "b"), args)
    if args.kind == "boundary-regions":
        kmax = args.kmax
        rows = []
        for k in range(1, kmax + 1):
            rows.append(
                (
                    k,
                    float(ctx.p(k)),
                    float(-k * ctx.tau),
                    float(ctx.alpha**k),
                )
            )
        return _finish_table(rows, ("k", "p_k", "tangency", "alpha_pow_k"), args)
    raise DomainError(f"unknown table kind {args.kind!r}")


def _finish_table(rows, header, args) -> int:
    _emit(_rows_to_text(rows, header, args), args)
    return 0


def cmd_concavity(args) -> int:
    ctx = _context(args)
    if args.samples <= 0:
        raise DomainError("--samples must be positive")
    report = sweep(ctx, args.samples, args.seed)
    _emit(report.to_json() + "\n" if args.format == "json" else report.to_text(), args)
    return 0 if report.min_margin >= -1e-9 else 1


def cmd_tree(args) -> int:
    ctx_tol = args.tol
    with open(args.path) as fh:
        obj = json.load(fh)
    tree = trees_mod.tree_from_json(obj)
    ctx = make_context(tree.alpha, tol=ctx_tol)
    norm = trees_mod.bmo_norm(tree)
    work = tree
    if norm > 1.0:
        # The induction hypothesis needs a unit-norm function; margins are
        # invariant under the rescale, norms are reported pre-rescale.
        f = tree.flat
        vals = np.array([f.nodes[i].value for i in f.leaf_idx])
        mean = f.mean[0]
        work = trees_mod.with_leaf_values(
            tree, mean + (vals - mean) * ((1.0 - 1e-11) / norm)
        )
    out = trees_mod.verify_all_nodes(work, ctx)
    key_obs = float(np.max(out["key_obs"]))
    margins = {
        "induction": float(np.nanmin(out["induction"])),
        "main_n": float(np.min(out["main_n"])),
        "main_m": float(np.min(out["main_m"])),
    }
    root_report = trees_mod.verify_main_theorem(work, None, ctx)
    lines = [
        f"alpha = {_fmt(tree.alpha)}",
        f"nodes = {len(tree.flat.nodes)}",
        f"bmo_norm = {_fmt(norm)}",
        f"blo_norm = {_fmt(trees_mod.blo_norm(tree))}",
        f"key_obs_max_residual = {_fmt(key_obs)}",
        f"min_margin.induction = {_fmt(margins['induction'])}",
        f"min_margin.main_n = {_fmt(margins['main_n'])}",
        f"min_margin.main_m = {_fmt(margins['main_m'])}",
        f"blo_margin.natural = {_fmt(root_report.blo_margin_n)}",
        f"blo_margin.classical = {_fmt(root_report.blo_margin_m)}",
    ]
    _emit("\n".join(lines) + "\n", args)
    ok = (
        key_obs <= 1e-12
        and all(m >= -1e-9 for m in margins.values())
        and root_report.blo_margin_n >= -1e-9
        and root_report.blo_margin_m >= -1e-9
    )
    return 0 if ok else 1


def cmd_optimizer(args) -> int:
    if args.jmax < 1:
        raise DomainError("--jmax must be at least 1")
    if args.depth < args.jmax:
        raise DomainError(f"--depth {args.depth} is below --jmax {args.jmax}")
    rows = m_norm_report(range(1, args.jmax + 1), args.depth)
    if args.format == "json":
        payload = [
            {
                "j": r.j,
                "gamma": r.stats.gamma,
                "delta": r.stats.delta,
                "mean": [r.stats.mean.lo, r.stats.mean.hi],
                "mean_sq": [r.stats.mean_sq.lo, r.stats.mean_sq.hi],
                "bmo": [r.stats.bmo.lo, r.stats.bmo.hi],
                "mean_N": [r.stats.mean_N.lo, r.stats.mean_N.hi],
                "unresolved_mass": r.stats.unresolved_mass,
            }
            for r in rows
        ]
        _emit(json.dumps(payload, indent=2) + "\n", args)
    else:
        _emit(report_to_csv(rows), args)
    return 0 if all(r.targets_enclosed for r in rows) else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="bmoblo",
        description="Sharp BMO-to-BLO bounds for dyadic-type maximal operators: "
        "evaluation, verification sweeps, and optimizer reports.",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    pe = sub.add_parser("eval", help="evaluate B (and A) at a point")
    _add_common(pe)
    pe.add_argument("--x", type=float, nargs=2, required=True, metavar=("X1", "X2"))
    pe.add_argument("--L", type=float, default=None)
    pe.set_defaults(func=cmd_eval)

    pt = sub.add_parser("table", help="emit CSV/JSON tables")
    _add_common(pt)
    pt.add_argument("--kind", choices=("phi", "b", "boundary-regions"), required=True)
    pt.add_argument("--grid", type=str, default=None, help="lo:hi:step")
    pt.add_argument("--kmax", type=int, default=6)
    pt.set_defaults(func=cmd_table)

    pr = sub.add_parser("regions", help="region knot table (boundary-regions alias)")
    _add_common(pr)
    pr.add_argument("--kmax", type=int, default=6)
    pr.set_defaults(func=cmd_table, kind="boundary-regions", grid=None)

    pc = sub.add_parser("concavity", help="randomized concavity sweep")
    _add_common(pc)
    pc.add_argument("--samples", type=int, default=100000)
    pc.add_argument("--seed", type=int, default=0)
    pc.set_defaults(func=cmd_concavity)

    ptr = sub.add_parser("tree", help="verify an alpha-tree JSON file")
    _add_common(ptr, need_alpha=False)
    ptr.add_argument("path", type=str)
    ptr.set_defaults(func=cmd_tree)

    po = sub.add_parser("optimizer", help="norm-optimizer convergence table")
    _add_common(po, need_alpha=False)
    po.add_argument("--jmax", type=int, default=12)
    po.add_argument("--depth", type=int, default=24)
    po.set_defaults(func=cmd_optimizer)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (BmobloError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

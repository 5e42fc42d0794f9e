"""Command-line entry point: ``hoppe <command> [options]``.

Exit codes: 0 success, 1 a verification check failed, 2 bad usage or
invalid parameters.  JSON output is one object per line.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import exact, fixpoint, tree as tr
from .errors import FixpointError, ParameterError
from .kernels import parse_kernel
from .pointset import realize
from .rng import DEFAULT_SEED, stream
from .verify import CHECKS, Settings, run_all

EPILOG = f"""\
commands and their output:
  tree          two-line tree text ("n theta", then parents of 1..n-1) followed by
                a "# T=.. W=.. U=.. R=.." comment; --format json gives one object
  realize       CSV columns vertex,parent,depth,x (parent empty for the root)
  expectations  CSV columns n,theta,ET,EU,EW; --format json gives one object per row
  fixpoint      JSON moments of the pool; --samples PATH also writes the pool as CSV
                (column U, or columns W,T)
  verify        one line per acceptance check, or one JSON object per check
  decompose     JSON report comparing U'_n with its first-branch split

The default seed is {DEFAULT_SEED}.  The same flags always give the same bytes.
"""


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def _int_list(text: str) -> list[int]:
    try:
        return [_positive_int(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed, default=DEFAULT_SEED,
                        help=f"master seed (default {DEFAULT_SEED})")
    common.add_argument("--threads", type=_positive_int, default=1, help="worker threads")
    common.add_argument("--output", "-o", type=Path, help="write here instead of stdout")
    common.add_argument("--format", choices=("csv", "json"), default=None)

    parser = argparse.ArgumentParser(
        prog="hoppe", description="Hoppe trees, their path-length statistics and limit laws.",
        epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tree", parents=[common], help="sample one tree")
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--theta", type=_positive_float, default=1.0)

    p = sub.add_parser("realize", parents=[common], help="tree-indexed random walk as CSV")
    p.add_argument("--n", type=_positive_int)
    p.add_argument("--theta", type=_positive_float, default=1.0)
    p.add_argument("--tree", type=Path, help="read the tree from this file instead of sampling")
    p.add_argument("--kernel", default="normal:1",
                   help="normal:SIGMA2, poisson:LAMBDA, shift or srw (default normal:1)")

    p = sub.add_parser("expectations", parents=[common], help="exact E T, E U, E W table")
    p.add_argument("--n", type=_int_list, required=True, help="comma-separated sizes")
    p.add_argument("--theta", type=_positive_float, default=1.0)

    p = sub.add_parser("fixpoint", parents=[common], help="pool iteration for a limit law")
    p.add_argument("--kind", choices=fixpoint.KINDS, default="U")
    p.add_argument("--theta", type=_positive_float, default=1.0)
    p.add_argument("--pool-size", type=_positive_int, default=fixpoint.DEFAULT_POOL_SIZE)
    p.add_argument("--generations", type=_positive_int, default=fixpoint.DEFAULT_GENERATIONS)
    p.add_argument("--samples", type=Path, help="also write the final pool as CSV")

    p = sub.add_parser("verify", parents=[common], help="run the acceptance checks")
    p.add_argument("--theta", type=_positive_float, help="restrict theta grids to one value")
    p.add_argument("--quick", action="store_true", help="smaller samples, same tolerances")
    p.add_argument("--only", type=_int_list, help="comma-separated check numbers")
    p.add_argument("--pool-size", type=_positive_int)
    p.add_argument("--generations", type=_positive_int, default=fixpoint.DEFAULT_GENERATIONS)
    p.add_argument("--config", type=Path, help="key=value file; its entries override flags")

    p = sub.add_parser("decompose", parents=[common], help="first-branch decomposition check")
    p.add_argument("--n", type=_positive_int, default=50)
    p.add_argument("--theta", type=_positive_float, default=1.0)
    p.add_argument("--replicates", type=_positive_int, default=100_000)
    p.add_argument("--cross-term", action="store_true", help="add 2K(n-K) to the split side")
    return parser


# ------------------------------------------------------------------ commands


def _cmd_tree(args, out):
    tree = tr.generate_tree(args.n, args.theta, stream(args.seed))
    st = tr.compute_stats(tree)
    if args.format == "json":
        record = {"n": tree.n, "theta": tree.theta, "seed": args.seed,
                  "parents": tree.parent[1:].tolist()}
        record.update({k: v for k, v in st.as_dict().items() if k not in record})
        out.write(json.dumps(record) + "\n")
    else:
        out.write(tr.dumps(tree))
        out.write(f"# T={st.total_length} W={st.wiener} U={st.u} R={st.r}\n")
    return 0


def _cmd_realize(args, out):
    if args.tree is not None:
        tree = tr.loads(args.tree.read_text())
    elif args.n is not None:
        tree = tr.generate_tree(args.n, args.theta, stream(args.seed))
    else:
        raise ParameterError("realize needs --n or --tree")
    kernel = parse_kernel(args.kernel)
    out.write(realize(tree, kernel, stream(args.seed, 1)).to_csv())
    return 0


def _cmd_expectations(args, out):
    if args.format == "json":
        for row in exact.expectation_table(args.n, args.theta):
            out.write(json.dumps(row) + "\n")
    else:
        out.write(exact.expectation_table_csv(args.n, args.theta))
    return 0


def _cmd_fixpoint(args, out):
    pool = fixpoint.solve(args.kind, args.theta, args.pool_size, args.generations, args.seed)
    record = pool.report()
    record["seed"] = args.seed
    if args.kind in ("U", "U_prime"):
        lim = exact.limit_moments_u(args.theta)
        record["target"] = {"mean": lim.u_mean, "second": lim.u_second}
    out.write(json.dumps(record) + "\n")
    if args.samples is not None:
        args.samples.write_text(pool.to_csv())
    return 0


_CONFIG_KEYS = {
    "seed": _seed, "theta": _positive_float, "threads": _positive_int,
    "pool_size": _positive_int, "generations": _positive_int, "only": _int_list,
    "quick": lambda v: v.strip().lower() in ("1", "true", "yes", "on"),
}


def read_config(path: Path) -> dict:
    """Parse a ``key = value`` file; ``#`` starts a comment."""
    values = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"{path}:{lineno}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _CONFIG_KEYS:
            raise ParameterError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values[key] = _CONFIG_KEYS[key](value)
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise ParameterError(f"{path}:{lineno}: {exc}") from None
    return values


def _cmd_verify(args, out):
    if args.config is not None:
        for key, value in read_config(args.config).items():
            setattr(args, key, value)
    known = {num for num, *_ in CHECKS}
    if args.only and not set(args.only) <= known:
        raise ParameterError(f"unknown check numbers {sorted(set(args.only) - known)}")
    settings = Settings(seed=args.seed, theta=args.theta, quick=args.quick,
                        threads=args.threads, pool_size=args.pool_size,
                        generations=args.generations)

    def echo(res):
        out.write((res.to_json() if args.format == "json" else res.line()) + "\n")
        out.flush()

    results = run_all(settings, only=args.only, echo=echo)
    return 0 if all(r.passed for r in results) else 1


def _cmd_decompose(args, out):
    rep = fixpoint.subtree_decomposition_check(args.n, args.theta, args.replicates, args.seed,
                                               cross_term=args.cross_term)
    out.write(json.dumps(rep.as_dict()) + "\n")
    return 0


COMMANDS = {
    "tree": _cmd_tree, "realize": _cmd_realize, "expectations": _cmd_expectations,
    "fixpoint": _cmd_fixpoint, "verify": _cmd_verify, "decompose": _cmd_decompose,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handle = None
    try:
        if args.output is not None:
            handle = open(args.output, "w", newline="")
            out = handle
        else:
            out = sys.stdout
        return COMMANDS[args.command](args, out)
    except (ParameterError, FixpointError) as exc:
        print(f"hoppe {args.command}: error: {exc}", file=sys.stderr)
        return 2
    finally:
        if handle is not None:
            handle.close()


if __name__ == "__main__":
    sys.exit(main())

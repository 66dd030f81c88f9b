"""Command-line harness: ``gen``, ``solve`` and ``sweep``.

Exit codes: 0 success, 1 numerical or data failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import bench
from .bspd import load_matrix, save_matrix
from .core import BlockedSPDMatrix, SolverConfig
from .errors import ConfigError, HetSolveError
from .genmat import KernelParams, generate_rhs, generate_spd

log = logging.getLogger("hetsolve")

DEFAULT_BLOCK = {"cg": 32, "cholesky": 128}
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def parse_grid(text: str) -> list[float]:
    """``"0:1:0.05"`` (inclusive range) or a comma separated list."""
    text = text.strip()
    if ":" in text:
        try:
            start, stop, step = (float(t) for t in text.split(":"))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad range {text!r}, expected start:stop:step") from None
        if step <= 0:
            raise argparse.ArgumentTypeError("range step must be positive")
        count = int(round((stop - start) / step)) + 1
        return [round(start + k * step, 10) for k in range(count) if start + k * step <= stop + 1e-9]
    return [float(t) for t in text.replace(",", " ").split()]


def _flatten(values):
    out = []
    for v in values or []:
        out.extend(v if isinstance(v, list) else [v])
    return out


def _common(p: argparse.ArgumentParser, multi=False):
    num = dict(nargs="+") if multi else {}
    p.add_argument("--size", type=int, **num, help="matrix side length (generated on the fly)")
    p.add_argument("--block-size", type=int, **num)
    if multi:
        p.add_argument("--fraction", type=parse_grid, nargs="+", help="list or start:stop:step")
    else:
        p.add_argument("--fraction", type=float, default=0.0)
    p.add_argument("--eps", type=float, default=1e-6)
    p.add_argument("--max-iters", type=int, default=1000)
    p.add_argument("--recompute-interval", type=int, default=50, help="0 disables recomputation")
    p.add_argument("--workers-a", type=int, default=1)
    p.add_argument("--workers-b", type=int, default=1)
    p.add_argument("--slowdown-a", type=float, default=1.0)
    p.add_argument("--slowdown-b", type=float, default=1.0)
    p.add_argument("--pace-gflops", type=float, default=None,
                   help="emulate devices: cap each worker at this many GFLOP/s")
    p.add_argument("--mode", choices=("auto", "hetero", "homogeneous"), default="auto")
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--matrix", help="BSPD1 input matrix")
    p.add_argument("--output", help="CSV output path (default: stdout)")
    p.add_argument("--no-warmup", action="store_true")
    _kernel_flags(p)


def _kernel_flags(p):
    g = p.add_argument_group("generator")
    g.add_argument("--signal-var", type=float, default=1.0)
    g.add_argument("--length-scale", type=float, default=None)
    g.add_argument("--noise-var", type=float, default=1e-2)
    g.add_argument("--dim", type=int, default=2)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hetsolve", description=__doc__)
    parser.add_argument("--config", help="key=value file mirroring the long flags")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="write a generated SPD matrix as BSPD1")
    gen.add_argument("--size", type=int, required=False)
    gen.add_argument("--block-size", type=int, default=32)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--output", help="destination .bspd file")
    _kernel_flags(gen)

    solve = sub.add_parser("solve", help="time one configuration, print one CSV row")
    solve.add_argument("algo", choices=bench.ALGOS)
    _common(solve)

    sweep = sub.add_parser("sweep", help="cross product of sizes, block sizes and fractions")
    sweep.add_argument("--algo", nargs="+", choices=bench.ALGOS, default=list(bench.ALGOS))
    _common(sweep, multi=True)
    sweep.add_argument("--summary", action="store_true", help="also print the best fraction per (algo, n)")
    return parser


def read_config(path) -> dict[str, str]:
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, value = (t.strip() for t in line.split("=", 1))
            values[key.lstrip("-").replace("-", "_")] = value
    return values


def _apply_config(sub: argparse.ArgumentParser, values: dict[str, str]):
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, raw in values.items():
        act = actions.get(key)
        if act is None:
            raise UsageError(f"unknown config key {key!r}")
        if isinstance(act, argparse._StoreTrueAction):
            defaults[key] = raw.lower() in ("1", "true", "yes", "on")
            continue
        conv = act.type or str
        if act.nargs == "+":
            defaults[key] = [conv(t) for t in raw.replace(",", " ").split()] if conv is not parse_grid else [conv(raw)]
        else:
            defaults[key] = conv(raw)
    sub.set_defaults(**defaults)


def parse_args(argv):
    parser = build_parser()
    pre_p = argparse.ArgumentParser(add_help=False)
    pre_p.add_argument("--config")
    pre, _ = pre_p.parse_known_args(argv)
    if pre.config:
        values = read_config(pre.config)
        cmd = next((a for a in argv if a in ("gen", "solve", "sweep")), None)
        if cmd is None:
            raise UsageError("--config needs a subcommand")
        subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
        _apply_config(subparsers.choices[cmd], values)
    return parser, parser.parse_args(argv)


def _params(args) -> KernelParams:
    return KernelParams(args.signal_var, args.length_scale, args.noise_var, args.dim)


def _config(args, fraction, block_size) -> SolverConfig:
    return SolverConfig(
        eps=args.eps, max_iters=args.max_iters, recompute_interval=args.recompute_interval,
        fraction=fraction, block_size=block_size, workers_a=args.workers_a, workers_b=args.workers_b,
        slowdown_a=args.slowdown_a, slowdown_b=args.slowdown_b, seed=args.seed, mode=args.mode,
        pace_gflops=args.pace_gflops,
    )


def _emit(rows, args):
    if args.output:
        with open(args.output, "w", newline="") as fh:
            bench.write_csv(rows, fh)
    else:
        sys.stdout.write(bench.write_csv(rows))


def cmd_gen(args) -> int:
    if not args.size or not args.output:
        raise UsageError("gen needs --size and --output")
    M = generate_spd(args.size, args.block_size, _params(args), args.seed)
    save_matrix(args.output, M)
    log.info("wrote %r to %s", M, args.output)
    return EXIT_OK


def _load_or_generate(args, n, b) -> BlockedSPDMatrix:
    if args.matrix:
        M = load_matrix(args.matrix)
        if b is not None and M.b != b:
            M = BlockedSPDMatrix.from_dense(M.to_dense(), b)
        return M
    return generate_spd(n, b, _params(args), args.seed)


def cmd_solve(args) -> int:
    if not 0.0 <= args.fraction <= 1.0:
        raise UsageError(f"--fraction must lie in [0, 1], got {args.fraction}")
    if not args.matrix and not args.size:
        raise UsageError("solve needs --matrix or --size")
    b = args.block_size or (None if args.matrix else DEFAULT_BLOCK[args.algo])
    A = _load_or_generate(args, args.size, b)
    cfg = _config(args, args.fraction, A.b)
    res = bench.run_solve(args.algo, A, generate_rhs(A.n, A.b, args.seed), cfg,
                          reps=args.reps, warmup=not args.no_warmup)
    _emit([res.row], args)
    status = res.row["status"]
    if status not in ("ok", "converged"):
        print(f"error: kind={'NotConverged' if status == 'not_converged' else status}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_sweep(args) -> int:
    fractions = _flatten(args.fraction)
    if args.fraction is None:
        fractions = parse_grid("0:1:0.05")
    if not fractions:
        raise UsageError("empty fraction grid")
    if any(not 0.0 <= f <= 1.0 for f in fractions):
        raise UsageError("fractions must lie in [0, 1]")
    blocks = args.block_size or [DEFAULT_BLOCK["cg"]]
    matrix = load_matrix(args.matrix) if args.matrix else None
    if matrix is None and not args.size:
        raise UsageError("sweep needs --size or --matrix")
    base = _config(args, 0.0, blocks[0])

    def progress(row):
        log.info("%s n=%s b=%s f=%s -> %s ms (%s)", row["algo"], row["n"], row["block_size"],
                 row["fraction"], row.get("runtime_ms_median"), row["status"])

    rows = bench.run_sweep(args.algo, args.size or [], blocks, fractions, base, reps=args.reps,
                           warmup=not args.no_warmup, params=_params(args), matrix=matrix, progress=progress)
    _emit(rows, args)
    if args.summary:
        if not args.output:
            sys.stdout.write("\n")
        sys.stdout.write(bench.write_csv(bench.argmin_summary(rows),
                                         fields=("algo", "n", "block_size", "best_fraction", "runtime_ms_median")))
    return EXIT_OK


COMMANDS = {"gen": cmd_gen, "solve": cmd_solve, "sweep": cmd_sweep}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        parser, args = parse_args(argv)
    except UsageError as exc:
        print(f"hetsolve: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # argparse usage errors
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"hetsolve: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except HetSolveError as exc:
        print(f"error: kind={exc.kind} {exc}", file=sys.stderr)
        return EXIT_FAIL
    except OSError as exc:
        print(f"error: kind=IOError {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())

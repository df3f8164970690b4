"""Command-line front end: ``grafem run | scenario | verify | info``."""

import argparse
import logging
import os
import sys
from contextlib import nullcontext
from pathlib import Path

from threadpoolctl import threadpool_limits

from .exceptions import ConvergenceError, GrafemError, MeshFormatError, ScenarioError

logger = logging.getLogger("grafem")


def _threads(value):
    if value is not None:
        return value
    env = os.environ.get("GRAFEM_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise SystemExit(f"GRAFEM_THREADS must be an integer, got {env!r}") from None
        if n < 1:
            raise SystemExit("GRAFEM_THREADS must be at least 1")
        return n
    return None


def _positive_int(text):
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return n


def _nonnegative_int(text):
    n = int(text)
    if n < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return n


def _cmd_run(args):
    from .scenario import load_scenario, run_scenario

    config_path = Path(args.config)
    if not config_path.is_file():
        raise FileNotFoundError(f"config file not found: {config_path}")
    config = load_scenario(config_path)
    out = Path(args.out) if args.out else Path("runs") / config.name

    def progress(sim, result):
        if not args.quiet and sim.state.step % 50 == 0:
            print(f"step {sim.state.step}  t={sim.state.time:.6g}  broken={sim.state.broken_count}", flush=True)

    outcome = run_scenario(config, out_dir=out, frame_every=args.frames, on_step=progress)
    if not args.quiet:
        print(f"wrote {out} ({len(outcome.metrics) - 1} steps, {outcome.state.broken_count} broken edges, "
              f"{len(outcome.result.frames)} frames)")
    return 0


def _cmd_scenario(args):
    from .scenario import builtin_scenarios, dump_scenario, builtin_scenario

    if args.list or args.name is None:
        for name in builtin_scenarios():
            print(name)
        return 0
    text = dump_scenario(builtin_scenario(args.name))
    if args.out:
        Path(args.out).write_text(text)
        if not args.quiet:
            print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_verify(args):
    from .verification import run_oracle_suite

    results = run_oracle_suite(n_samples=args.samples, seed=args.seed)
    for r in results:
        if not args.quiet or not r.passed:
            print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.detail}")
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"{len(failed)} oracle(s) failed: {', '.join(failed)}", file=sys.stderr)
        return 1
    if not args.quiet:
        print(f"all {len(results)} oracles passed")
    return 0


def _cmd_info(args):
    from .mesh import load_tetgen_files
    from .scenario import build_mesh, load_scenario

    path = Path(args.mesh)
    if path.suffix in (".yaml", ".yml"):
        if not path.is_file():
            raise FileNotFoundError(f"config file not found: {path}")
        mesh = build_mesh(load_scenario(path).mesh)
    else:
        mesh = load_tetgen_files(path)
    for key, value in mesh.stats().items():
        print(f"{key}: {value}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="grafem", description="Remeshing-free graph-based fracture simulator.")
    parser.add_argument("--threads", type=_positive_int, default=None,
                        help="worker threads for numeric kernels (default: GRAFEM_THREADS or library default)")
    parser.add_argument("--quiet", action="store_true", help="only print errors")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute a scenario config and write its outputs")
    p.add_argument("config", help="scenario YAML file")
    p.add_argument("--out", help="output directory (default: runs/<scenario name>)")
    p.add_argument("--frames", type=_nonnegative_int, default=None, help="write an OBJ frame every N steps (0: none)")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("scenario", help="print or save a built-in scenario config")
    p.add_argument("name", nargs="?", help="built-in scenario name; omit to list them")
    p.add_argument("--out", help="write the config to this file instead of stdout")
    p.add_argument("--list", action="store_true", help="list built-in scenario names")
    p.set_defaults(func=_cmd_scenario)

    p = sub.add_parser("verify", help="run the verification oracles")
    p.add_argument("--samples", type=_positive_int, default=1000, help="random configurations per oracle")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("info", help="print statistics of a TetGen mesh or a scenario's mesh")
    p.add_argument("mesh", help="TetGen base path (.node/.ele) or scenario YAML")
    p.set_defaults(func=_cmd_info)

    # the global flags are also accepted after the subcommand
    for action in sub.choices.values():
        action.add_argument("--threads", type=_positive_int, default=argparse.SUPPRESS, help=argparse.SUPPRESS)
        action.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS, help=argparse.SUPPRESS)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING, format="%(levelname)s: %(message)s")
    threads = _threads(args.threads)
    limit = threadpool_limits(limits=threads) if threads else nullcontext()
    try:
        with limit:
            return args.func(args)
    except ScenarioError as exc:
        print("invalid scenario:", file=sys.stderr)
        for err in exc.errors:
            print(f"  - {err}", file=sys.stderr)
        return 2
    except (FileNotFoundError, MeshFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print("outputs are incomplete (see the INCOMPLETE marker)", file=sys.stderr)
        return 3
    except GrafemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

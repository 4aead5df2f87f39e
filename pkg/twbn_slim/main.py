import argparse
import sys
from functools import partial
from typing import Optional, Sequence

import pandas as pd
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from twbn_slim.bench import generate_synthetic, load_bench_spec, run_bench, write_table
from twbn_slim.config import SlimSettings, SolverConfig
from twbn_slim.engine import Improvement, run
from twbn_slim.errors import InputError, SlimError
from twbn_slim.graphs import write_td
from twbn_slim.heuristic import greedy_initial, import_initial, write_dag
from twbn_slim.log import setup_logging
from twbn_slim.scoring import bic_score, build_cache, delta_bic, load_dataset, read_jkl, save_dataset, write_jkl
from twbn_slim.solvers import make_backend

console = Console()


def build_parser(settings: SlimSettings) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twbn-slim",
                                     description="Bounded-treewidth Bayesian network learning with local MaxSAT improvement")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for info, -vv for debug logging")
    commands = parser.add_subparsers(dest="command", required=True)

    learn = commands.add_parser("learn", help="Learn a DAG of bounded treewidth and improve it locally")
    source = learn.add_mutually_exclusive_group(required=True)
    source.add_argument("--data", help="Whitespace-separated data file")
    source.add_argument("--jkl", help="Score cache in .jkl format")
    learn.add_argument("--no-header", action="store_true", help="Data file has no name/arity lines")
    learn.add_argument("--treewidth", type=int, required=True, help="Treewidth bound W")
    learn.add_argument("--budget", type=int, default=settings.budget,
                       help=f"Subinstance budget (default: {settings.budget})")
    learn.add_argument("--solver", default=settings.solver_command,
                       help="MaxSAT solver command; {wcnf} is replaced by the instance path")
    learn.add_argument("--solver-timeout", type=float, default=settings.solver_timeout,
                       help=f"Seconds per solver call (default: {settings.solver_timeout})")
    learn.add_argument("--time-limit", type=float, default=60.0, help="Total seconds of local improvement")
    learn.add_argument("--max-iterations", type=int, default=None, help="Stop after this many subinstances")
    learn.add_argument("--seed", type=int, default=settings.seed, help="Random seed")
    learn.add_argument("--initial-dag", help="Start from this DAG instead of the greedy solution")
    learn.add_argument("--initial-td", help="Tree decomposition (.td) of the initial DAG")
    learn.add_argument("--out-dag", help="Write the final DAG here")
    learn.add_argument("--out-td", help="Write the final tree decomposition here")
    learn.add_argument("--report", action="store_true", help="Print IMPROVE lines and the delta-BIC report")
    learn.add_argument("--verify", action="store_true", help="Verify the global solution after every merge")
    backend = learn.add_mutually_exclusive_group()
    backend.add_argument("--oracle", action="store_true", help="Solve subinstances by exhaustive search")
    backend.add_argument("--rc2", action="store_true", help="Solve subinstances with python-sat's RC2")
    learn.add_argument("--max-parent-size", type=int, default=settings.max_parent_size,
                       help=f"Largest parent set scored from data (default: {settings.max_parent_size})")
    learn.add_argument("--weight-scale", type=int, default=settings.weight_scale,
                       help=f"Soft-clause weight per score unit (default: {settings.weight_scale})")
    learn.add_argument("--workers", type=int, default=settings.workers, help="Concurrent subinstance solves")
    learn.add_argument("--dump-dir", help="Write every subinstance, WCNF and variable map here")

    cache = commands.add_parser("cache", help="Score parent sets from data and write a .jkl cache")
    cache.add_argument("--data", required=True, help="Whitespace-separated data file")
    cache.add_argument("--no-header", action="store_true", help="Data file has no name/arity lines")
    cache.add_argument("--out", required=True, help="Output .jkl file")
    cache.add_argument("--max-parent-size", type=int, default=settings.max_parent_size,
                       help=f"Largest parent set (default: {settings.max_parent_size})")

    bench = commands.add_parser("bench", help="Run a benchmark sweep")
    bench.add_argument("--spec", required=True, help="Bench spec in TOML")
    bench.add_argument("--out", required=True, help="Output CSV")

    generate = commands.add_parser("generate", help="Sample a dataset from a random network")
    generate.add_argument("--n", type=int, required=True, help="Number of variables")
    generate.add_argument("--samples", type=int, default=5000, help="Number of rows (default: 5000)")
    generate.add_argument("--max-parents", type=int, default=2, help="In-degree bound of the network")
    generate.add_argument("--arity", type=int, default=2, help="Values per variable")
    generate.add_argument("--seed", type=int, default=settings.seed, help="Random seed")
    generate.add_argument("--out", required=True, help="Output data file")
    generate.add_argument("--truth", help="Write the generating DAG here")
    return parser


def solver_config(args: argparse.Namespace) -> SolverConfig:
    if args.oracle:
        mode = "oracle"
    elif args.rc2 or not args.solver:
        mode = "rc2"
    else:
        mode = "external"
    try:
        return SolverConfig(command=args.solver, timeout=args.solver_timeout, mode=mode)
    except ValidationError as e:
        raise InputError(f"invalid solver settings: {e}") from e


def learn(args: argparse.Namespace, settings: SlimSettings) -> None:
    data = None
    if args.data:
        data = load_dataset(args.data, header=not args.no_header)
        cache = build_cache(data, args.max_parent_size, settings.candidate_limit, progress=args.verbose > 0)
    else:
        cache = read_jkl(args.jkl)

    if args.initial_dag:
        initial, cache = import_initial(args.initial_dag, args.initial_td, cache, args.treewidth, data, args.seed)
    else:
        initial = greedy_initial(cache, args.treewidth, args.seed)

    def report_improvement(improvement: Improvement) -> None:
        print(f"IMPROVE {improvement.wall_time:.3f} {improvement.score:.6f}", flush=True)

    state = run(cache, initial, args.treewidth, args.budget, args.solver_timeout, args.time_limit, args.seed,
                backend=make_backend(solver_config(args)), weight_scale=args.weight_scale,
                max_iterations=args.max_iterations, verify_each=args.verify, workers=args.workers,
                on_improvement=report_improvement if args.report else None, dump_dir=args.dump_dir)

    if args.out_dag:
        write_dag(state.dag, args.out_dag, cache.score)
    if args.out_td:
        write_td(state.td, state.dag.vertex_count, args.out_td)

    if args.report:
        print(delta_bic(initial.score, state.score).format())
    table = Table(title="twbn-slim learn")
    table.add_column("treewidth bound")
    table.add_column("width")
    table.add_column("iterations")
    table.add_column("improvements")
    table.add_column("initial score")
    table.add_column("final score")
    table.add_row(str(args.treewidth), str(state.td.width), str(state.iteration), str(len(state.improvements)),
                  f"{initial.score:.6f}", f"{state.score:.6f}")
    console.print(table)
    if not state.verified:
        raise SlimError("final solution failed verification")


def show_bench(results: pd.DataFrame) -> None:
    table = Table(title="twbn-slim bench")
    for column in results.columns:
        table.add_column(column)
    for row in results.itertuples(index=False):
        table.add_row(*(f"{x:.3f}" if isinstance(x, float) else str(x) for x in row))
    console.print(table)


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        settings = SlimSettings()
    except ValidationError as e:
        print(f"error: invalid TWBN_SLIM_* settings: {e}", file=sys.stderr)
        return 2
    args = build_parser(settings).parse_args(argv)
    setup_logging(args.verbose)

    try:
        if args.command == "learn":
            learn(args, settings)
        elif args.command == "cache":
            data = load_dataset(args.data, header=not args.no_header)
            cache = build_cache(data, args.max_parent_size, settings.candidate_limit, progress=True)
            write_jkl(cache, args.out)
            print(f"wrote {cache.size()} parent sets for {cache.vertex_count} variables to {args.out}")
        elif args.command == "bench":
            results = run_bench(load_bench_spec(args.spec), progress=True)
            write_table(results, args.out)
            show_bench(results)
        elif args.command == "generate":
            data, truth = generate_synthetic(args.n, args.max_parents, args.arity, args.samples, args.seed)
            save_dataset(data, args.out)
            if args.truth:
                write_dag(truth, args.truth, partial(bic_score, data))
            print(f"wrote {data.sample_count} rows over {data.variable_count} variables to {args.out}")
    except (SlimError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

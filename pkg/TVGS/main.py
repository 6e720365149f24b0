"""
Command-line entry point for graph construction, single reconstructions,
experiments, conditioning reports and plots.

    python -m TVGS.main run-final --config configs/global_covid.json
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from TVGS.config import ExperimentConfig
from TVGS.errors import ReconstructionError
from TVGS.experiments import (
    METHODS,
    SEARCHABLE_METHODS,
    ExperimentContext,
    ResultTable,
    grid_search,
    iteration_experiment,
    iteration_ordering,
    mse_ordering,
    read_best,
    run_final,
    summarize,
    write_best,
)
from TVGS.geo_graph import write_edge_list
from TVGS.plotting import emit_outputs
from TVGS.reconstruction import ReconProblem, dense_solve, solve
from TVGS.sampling import FINAL_STREAM, SamplingPlan, draw_mask, observe, write_mask
from TVGS.spectral import EIG_METHODS, condition_number_shifted, hessian_condition_compare
from TVGS.tv_signal import mse, write_signal_csv

logger = logging.getLogger(__name__)


def _float_list(text: str) -> List[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def banner(title: str) -> None:
    print("=" * 60)
    print(title)
    print("=" * 60)


def add_config_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--config', type=str, help='Path to a JSON experiment profile')
    parser.add_argument('--output-dir', type=str, help='Output directory (default: $TVGS_OUTPUT_DIR or results/)')
    parser.add_argument('--k', type=int, help='Nearest neighbors per node')
    parser.add_argument('--metric', choices=['euclidean', 'haversine'], help='Distance between coordinates')
    parser.add_argument('--densities', type=_float_list, help='Comma-separated sampling densities')
    parser.add_argument('--lambda-grid', type=_float_list, help='Comma-separated lambda grid')
    parser.add_argument('--epsilon-grid', type=_float_list, help='Comma-separated epsilon grid')
    parser.add_argument('--beta', type=float, help='Sobolev exponent')
    parser.add_argument('--trials-search', type=int, help='Masks per grid point')
    parser.add_argument('--trials-final', type=int, help='Masks per density in final runs')
    parser.add_argument('--master-seed', type=int, help='Master seed for all masks')
    parser.add_argument('--mse-scope', choices=['all', 'unsampled-only'], help='Entries scored by the MSE')
    parser.add_argument('--tol', type=float, help='Relative residual tolerance of CG')
    parser.add_argument('--workers', type=int, help='Worker processes for trials')


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    config = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    return config.with_overrides(
        output_dir=args.output_dir,
        k=args.k,
        metric=args.metric,
        densities=args.densities,
        lambda_grid=args.lambda_grid,
        epsilon_grid=args.epsilon_grid,
        beta=args.beta,
        trials_search=args.trials_search,
        trials_final=args.trials_final,
        master_seed=args.master_seed,
        mse_scope=args.mse_scope,
        tol=args.tol,
        workers=args.workers,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='Reconstruction of time-varying graph signals')
    parser.add_argument('--verbose', action='store_true', help='Debug logging (per-iteration CG residuals)')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('build-graph', help='Build the kNN graph and write its edge list')
    add_config_arguments(p)

    p = sub.add_parser('reconstruct', help='Reconstruct one randomly sampled signal')
    add_config_arguments(p)
    p.add_argument('--variant', choices=list(SEARCHABLE_METHODS), default='sobolev')
    p.add_argument('--lam', type=float, required=True, help='Regularization weight')
    p.add_argument('--epsilon', type=float, default=0.0, help='Laplacian shift')
    p.add_argument('--density', type=float, required=True, help='Sampling density')
    p.add_argument('--trial', type=int, default=0, help='Trial index selecting the mask')
    p.add_argument('--direct', action='store_true', help='Dense direct solve instead of CG (small N*M only)')

    p = sub.add_parser('grid-search', help='Search the best parameters per density')
    add_config_arguments(p)
    p.add_argument('--method', choices=list(SEARCHABLE_METHODS), required=True)

    p = sub.add_parser('run-final', help='Final runs with the best parameters')
    add_config_arguments(p)
    p.add_argument('--methods', nargs='+', choices=list(METHODS), default=list(SEARCHABLE_METHODS))
    p.add_argument('--best-qiu', type=str, help='Best-parameter CSV for qiu (skips its grid search)')
    p.add_argument('--best-sobolev', type=str, help='Best-parameter CSV for sobolev (skips its grid search)')

    p = sub.add_parser('iterations', help='CG iteration counts of both variants on shared masks')
    add_config_arguments(p)
    p.add_argument('--best-sobolev', type=str, help='Best-parameter CSV for sobolev (skips its grid search)')

    p = sub.add_parser('conditioning', help='Condition numbers of the shifted Laplacian and both Hessian terms')
    add_config_arguments(p)
    p.add_argument('--epsilons', type=_float_list, default=[0.1, 1.0, 10.0], help='Comma-separated shifts')
    p.add_argument('--eig-method', choices=list(EIG_METHODS), default='auto')

    p = sub.add_parser('plot', help='Regenerate CSV summaries and SVG plots from result CSVs')
    p.add_argument('results', nargs='+', help='results_<experiment>.csv files')
    p.add_argument('--output-dir', type=str, help='Output directory (default: next to each input)')
    return parser


def cmd_build_graph(args) -> int:
    config = load_config(args)
    banner("Building kNN graph")
    ctx = ExperimentContext.from_config(config)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "graph_edges.txt"
    write_edge_list(ctx.graph, path)
    print(f"Nodes: {ctx.graph.n_nodes}  edges: {len(ctx.graph.edges)}  sigma: {ctx.graph.sigma:.6g}")
    print(f"[OK] Edge list saved to: {path}")
    return 0


def cmd_reconstruct(args) -> int:
    config = load_config(args)
    banner(f"Reconstruction ({args.variant})")
    ctx = ExperimentContext.from_config(config)
    n_nodes, n_steps = ctx.shape
    plan = SamplingPlan.for_trial(args.density, config.master_seed, FINAL_STREAM, args.trial)
    J = draw_mask(plan, n_nodes, n_steps)
    sampling = observe(J, ctx.dataset.signal)

    epsilon = 0.0 if args.variant == 'qiu' else args.epsilon
    beta = 1.0 if args.variant == 'qiu' else config.beta
    problem = ReconProblem(
        graph=ctx.graph, mask=sampling, lam=args.lam, epsilon=epsilon, beta=beta,
        tol=config.tol, max_iters=config.max_iters, variant=args.variant,
    )

    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_mask(J, out / "mask.txt")

    if args.direct:
        X_hat = ctx.dataset.signal.with_values(dense_solve(problem))
        print("Dense direct solve")
    else:
        report = solve(problem)
        X_hat = ctx.dataset.signal.with_values(report.X_hat.values)
        report.residual_frame().to_csv(out / f"residuals_{args.variant}.csv", index=False, float_format="%.17g")
        (out / f"solve_{args.variant}.txt").write_text(report.summary_text(), encoding="utf-8")
        status = "[OK]" if report.converged else "[WARN]"
        print(f"{status} CG iterations: {report.iterations}  final residual: {report.residual_history[-1]:.3e}")
        if report.possibly_singular:
            print("[WARN] Some nodes are never sampled; their temporal means are not determined")

    path = out / f"reconstruction_{args.variant}.csv"
    write_signal_csv(X_hat, path)
    print(f"MSE ({config.mse_scope}): {mse(X_hat, ctx.dataset.signal, scope=config.mse_scope, mask=sampling):.6g}")
    print(f"[OK] Reconstruction saved to: {path}")
    return 0


def cmd_grid_search(args) -> int:
    config = load_config(args)
    banner(f"Grid search ({args.method})")
    ctx = ExperimentContext.from_config(config)
    best, table = grid_search(ctx, args.method)

    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    table.write(out)
    best_path = out / f"best_{args.method}.csv"
    write_best(best, best_path)
    for density, params in best.items():
        flag = "[WARN]" if params.nonconverged else "[OK]"
        print(f"{flag} density {density:.3f}: lambda={params.lam:g} epsilon={params.epsilon:g} "
              f"mean MSE={params.mean_mse:.6g}")
    print(f"[OK] Best parameters saved to: {best_path}")
    return 0


def _best_for(ctx: ExperimentContext, method: str, path: Optional[str], out: Path):
    if path:
        return read_best(path)
    best, table = grid_search(ctx, method)
    table.write(out)
    write_best(best, out / f"best_{method}.csv")
    return best


def cmd_run_final(args) -> int:
    config = load_config(args)
    banner("Final runs")
    ctx = ExperimentContext.from_config(config)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    methods = list(args.methods)
    if config.include_baseline and "idw-baseline" not in methods:
        methods.append("idw-baseline")
    best_paths = {"qiu": args.best_qiu, "sobolev": args.best_sobolev}

    combined: Optional[ResultTable] = None
    for method in methods:
        best = None
        if method in SEARCHABLE_METHODS:
            best = _best_for(ctx, method, best_paths[method], out)
        table = run_final(ctx, method, best)
        combined = table if combined is None else combined.concat(table)
    combined = ResultTable(experiment="final", frame=combined.frame)

    emit_outputs(combined, out)
    print(summarize(combined).to_string(index=False))
    if set(SEARCHABLE_METHODS) <= set(methods):
        ordering, ok = mse_ordering(combined)
        print(ordering.to_string(index=False))
        status = "[OK]" if ok else "[WARN]"
        print(f"\n{status} Sobolev mean MSE never above qiu (within one SEM): {ok}")
    print(f"\n[OK] Results saved to: {out}")
    return 0


def cmd_iterations(args) -> int:
    config = load_config(args)
    banner("CG iterations: qiu vs sobolev")
    ctx = ExperimentContext.from_config(config)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    best = _best_for(ctx, "sobolev", args.best_sobolev, out)
    table = iteration_experiment(ctx, best)
    emit_outputs(table, out)
    medians, ordered = iteration_ordering(table)
    print(medians.to_string(index=False))
    status = "[OK]" if ordered else "[WARN]"
    print(f"\n{status} Sobolev median iterations never above qiu and lower at half of the densities: {ordered}")
    return 0


def cmd_conditioning(args) -> int:
    config = load_config(args)
    banner("Conditioning report")
    ctx = ExperimentContext.from_config(config)
    _, n_steps = ctx.shape
    lam = config.lambda_grid[0]
    for epsilon in args.epsilons:
        report = condition_number_shifted(ctx.graph.laplacian, epsilon, method=args.eig_method)
        print(f"\n-- epsilon = {epsilon:g}")
        print(report.to_text(), end="")
        if epsilon > 0.0:
            compare = hessian_condition_compare(
                ctx.graph.laplacian, n_steps, lam, epsilon, beta=config.beta, method=args.eig_method,
            )
            print(compare.to_text(), end="")
            status = "[OK]" if report.bounds_hold else "[WARN]"
            print(f"{status} lower bound <= kappa <= upper bound: {report.bounds_hold}")
    return 0


def cmd_plot(args) -> int:
    banner("Plotting results")
    for path in args.results:
        table = ResultTable.read(path)
        out = Path(args.output_dir) if args.output_dir else Path(path).parent
        for written in emit_outputs(table, out, write_tables=False):
            print(f"[OK] {written}")
    return 0


COMMANDS = {
    'build-graph': cmd_build_graph,
    'reconstruct': cmd_reconstruct,
    'grid-search': cmd_grid_search,
    'run-final': cmd_run_final,
    'iterations': cmd_iterations,
    'conditioning': cmd_conditioning,
    'plot': cmd_plot,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except ReconstructionError as e:
        print(f"Error: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())

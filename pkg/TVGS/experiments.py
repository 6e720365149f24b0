"""
Experiment harness: parameter grid search, final runs over many random masks,
paired CG iteration counts, and summaries.

Every trial is a pure function of (config, method, density, parameters, trial
index): its mask is drawn from a seed derived from the master seed, a seed
stream and the trial index. Results therefore do not depend on the number of
workers or on which other trials are run.
"""

import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from tqdm import tqdm

from TVGS.baselines import IDW_LABEL, idw_reconstruct
from TVGS.config import ExperimentConfig
from TVGS.errors import InvalidParameterError, UnsupportedConfigurationError
from TVGS.geo_graph import GeoGraph, build_geo_graph
from TVGS.ingest import Dataset
from TVGS.reconstruction import ReconProblem, solve
from TVGS.sampling import FINAL_STREAM, SEARCH_STREAM, SamplingPlan, draw_mask, observe
from TVGS.tv_signal import mse

logger = logging.getLogger(__name__)

METHODS = ("qiu", "sobolev", IDW_LABEL)
SEARCHABLE_METHODS = ("qiu", "sobolev")

RESULT_COLUMNS = [
    "method", "density", "lam", "epsilon", "beta", "trial",
    "mse", "iterations", "converged", "possibly_singular",
]
TIMING_COLUMNS = ["method", "density", "lam", "epsilon", "trial", "wall_time"]
SORT_KEYS = ["method", "density", "lam", "epsilon", "trial"]


@dataclass(frozen=True)
class TrialSpec:
    """One reconstruction to run"""
    method: str
    density: float
    lam: float
    epsilon: float
    beta: float
    trial: int
    stream: int


@dataclass(frozen=True)
class BestParams:
    lam: float
    epsilon: float
    beta: float
    mean_mse: float
    nonconverged: int = 0


@dataclass
class ResultTable:
    """Per-trial rows of one experiment; wall time is kept apart from the reproducible columns"""
    experiment: str
    frame: pd.DataFrame = field(default_factory=lambda: pd.DataFrame(columns=RESULT_COLUMNS + ["wall_time"]))

    def __len__(self) -> int:
        return len(self.frame)

    @property
    def empty(self) -> bool:
        return self.frame.empty

    @classmethod
    def from_rows(cls, experiment: str, rows: List[dict]) -> "ResultTable":
        frame = pd.DataFrame(rows, columns=RESULT_COLUMNS + ["wall_time"])
        frame = frame.sort_values(SORT_KEYS, kind="mergesort").reset_index(drop=True)
        return cls(experiment=experiment, frame=frame)

    def results(self) -> pd.DataFrame:
        return self.frame[RESULT_COLUMNS]

    def timings(self) -> pd.DataFrame:
        return self.frame[TIMING_COLUMNS]

    def rows_for(self, method: str, density: Optional[float] = None) -> pd.DataFrame:
        selected = self.frame[self.frame["method"] == method]
        if density is not None:
            selected = selected[np.isclose(selected["density"], density)]
        return selected

    def concat(self, other: "ResultTable", experiment: Optional[str] = None) -> "ResultTable":
        frame = pd.concat([self.frame, other.frame], ignore_index=True)
        frame = frame.sort_values(SORT_KEYS, kind="mergesort").reset_index(drop=True)
        return ResultTable(experiment=experiment or self.experiment, frame=frame)

    def write(self, directory: Union[str, Path]) -> Tuple[Path, Path]:
        directory = Path(directory)
        results_path = directory / f"results_{self.experiment}.csv"
        timings_path = directory / f"timings_{self.experiment}.csv"
        self.results().to_csv(results_path, index=False, float_format="%.17g")
        self.timings().to_csv(timings_path, index=False, float_format="%.6f")
        return results_path, timings_path

    @classmethod
    def read(cls, path: Union[str, Path], experiment: Optional[str] = None) -> "ResultTable":
        """Reads a results CSV (wall time is not restored)"""
        path = Path(path)
        frame = pd.read_csv(path)
        missing = [c for c in RESULT_COLUMNS if c not in frame.columns]
        if missing:
            raise InvalidParameterError(f"{path} is not a result table, missing {missing}")
        frame["wall_time"] = np.nan
        name = experiment or path.stem.removeprefix("results_")
        return cls(experiment=name, frame=frame[RESULT_COLUMNS + ["wall_time"]])


@dataclass
class ExperimentContext:
    """Everything a trial needs: configuration, dataset and graph"""
    config: ExperimentConfig
    dataset: Dataset
    graph: GeoGraph

    @classmethod
    def from_config(cls, config: ExperimentConfig, dataset: Optional[Dataset] = None) -> "ExperimentContext":
        dataset = dataset if dataset is not None else config.dataset.load(k=config.k)
        k = min(config.k, dataset.nodes.count - 1)
        graph = build_geo_graph(dataset.nodes, k=k, metric=config.metric)
        return cls(config=config, dataset=dataset, graph=graph)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.dataset.signal.values.shape


def run_trial(ctx: ExperimentContext, spec: TrialSpec) -> dict:
    """Draws the trial's mask, reconstructs and scores"""
    config = ctx.config
    n_nodes, n_steps = ctx.shape
    plan = SamplingPlan.for_trial(spec.density, config.master_seed, spec.stream, spec.trial)
    sampling = observe(draw_mask(plan, n_nodes, n_steps), ctx.dataset.signal)

    if spec.method == IDW_LABEL:
        X_hat = idw_reconstruct(ctx.dataset.nodes, sampling, k=config.k, metric=config.metric)
        iterations, converged, singular, wall_time = 0, True, False, 0.0
    else:
        problem = ReconProblem(
            graph=ctx.graph, mask=sampling, lam=spec.lam, epsilon=spec.epsilon, beta=spec.beta,
            tol=config.tol, max_iters=config.max_iters, variant=spec.method,
        )
        report = solve(problem)
        X_hat = report.X_hat
        iterations, converged = report.iterations, report.converged
        singular, wall_time = report.possibly_singular, report.wall_time

    return {
        "method": spec.method,
        "density": spec.density,
        "lam": spec.lam,
        "epsilon": spec.epsilon,
        "beta": spec.beta,
        "trial": spec.trial,
        "mse": mse(X_hat, ctx.dataset.signal, scope=config.mse_scope, mask=sampling),
        "iterations": iterations,
        "converged": converged,
        "possibly_singular": singular,
        "wall_time": wall_time,
    }


_WORKER_CONTEXT: Optional[ExperimentContext] = None


def _init_worker(ctx: ExperimentContext) -> None:
    global _WORKER_CONTEXT
    _WORKER_CONTEXT = ctx


def _run_in_worker(spec: TrialSpec) -> dict:
    return run_trial(_WORKER_CONTEXT, spec)


def run_trials(ctx: ExperimentContext, specs: List[TrialSpec], desc: str = "trials") -> List[dict]:
    """Runs every trial, in a process pool when config.workers > 1; output order follows specs"""
    workers = ctx.config.workers
    if workers <= 1 or len(specs) <= 1:
        return [run_trial(ctx, spec) for spec in tqdm(specs, desc=desc, leave=False)]
    chunksize = max(1, len(specs) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker, initargs=(ctx,)) as pool:
        return list(tqdm(pool.map(_run_in_worker, specs, chunksize=chunksize),
                         total=len(specs), desc=desc, leave=False))


def _check_method(method: str, allowed: Iterable[str]) -> None:
    if method not in allowed:
        raise UnsupportedConfigurationError(f"method {method!r} is not one of {tuple(allowed)}")


def grid_points(config: ExperimentConfig, method: str) -> List[Tuple[float, float]]:
    """(lambda, epsilon) pairs searched for a method"""
    _check_method(method, SEARCHABLE_METHODS)
    if method == "qiu":
        return [(lam, 0.0) for lam in config.lambda_grid]
    return list(itertools.product(config.lambda_grid, config.epsilon_grid))


def select_best(table: ResultTable, method: str) -> Dict[float, BestParams]:
    """
    Argmin of mean MSE per density; ties go to the smaller lambda, then the smaller epsilon.
    """
    rows = table.rows_for(method)
    grouped = rows.groupby(["density", "lam", "epsilon", "beta"], as_index=False).agg(
        mean_mse=("mse", "mean"),
        nonconverged=("converged", lambda c: int((~c.astype(bool)).sum())),
    )
    best = {}
    for density, group in grouped.groupby("density", sort=True):
        winner = group.sort_values(["mean_mse", "lam", "epsilon"], kind="mergesort").iloc[0]
        best[float(density)] = BestParams(
            lam=float(winner["lam"]),
            epsilon=float(winner["epsilon"]),
            beta=float(winner["beta"]),
            mean_mse=float(winner["mean_mse"]),
            nonconverged=int(winner["nonconverged"]),
        )
    return best


def write_best(best: Dict[float, BestParams], path: Union[str, Path]) -> None:
    frame = pd.DataFrame(
        [{"density": density, **vars(params)} for density, params in sorted(best.items())],
        columns=["density", "lam", "epsilon", "beta", "mean_mse", "nonconverged"],
    )
    frame.to_csv(path, index=False, float_format="%.17g")


def read_best(path: Union[str, Path]) -> Dict[float, BestParams]:
    frame = pd.read_csv(path)
    missing = {"density", "lam", "epsilon", "beta"} - set(frame.columns)
    if missing:
        raise InvalidParameterError(f"{path} lacks columns {sorted(missing)}")
    return {
        float(row["density"]): BestParams(
            lam=float(row["lam"]),
            epsilon=float(row["epsilon"]),
            beta=float(row["beta"]),
            mean_mse=float(row.get("mean_mse", math.nan)),
            nonconverged=int(row.get("nonconverged", 0)),
        )
        for _, row in frame.iterrows()
    }


def grid_search(ctx: ExperimentContext, method: str) -> Tuple[Dict[float, BestParams], ResultTable]:
    """
    Runs trials_search reconstructions per grid point and density.

    Masks come from the search seed stream, disjoint from the final runs.
    Non-converged solves keep their achieved MSE and are flagged in the table.

    Returns:
        Best parameters per density and the full grid table
    """
    config = ctx.config
    beta = 1.0 if method == "qiu" else config.beta
    specs = [
        TrialSpec(method, density, lam, eps, beta, trial, SEARCH_STREAM)
        for density in config.densities
        for lam, eps in grid_points(config, method)
        for trial in range(config.trials_search)
    ]
    logger.info("Grid search for %s: %d solves", method, len(specs))
    table = ResultTable.from_rows(f"grid_{method}", run_trials(ctx, specs, desc=f"grid {method}"))

    nonconverged = int((~table.frame["converged"].astype(bool)).sum())
    if nonconverged:
        logger.warning("%d of %d grid-search solves did not converge", nonconverged, len(table))

    best = select_best(table, method)
    for density, params in best.items():
        logger.info(
            "%s density %.3f: lambda=%g epsilon=%g mean MSE %.6g",
            method, density, params.lam, params.epsilon, params.mean_mse,
        )
    return best, table


def _params_for(best: Optional[Dict[float, BestParams]], density: float) -> BestParams:
    if best is None:
        raise InvalidParameterError("best parameters are required for this method")
    for key, params in best.items():
        if math.isclose(key, density):
            return params
    raise InvalidParameterError(f"no best parameters for density {density}")


def run_final(
    ctx: ExperimentContext,
    method: str,
    best: Optional[Dict[float, BestParams]] = None,
) -> ResultTable:
    """trials_final independent masks per density, scored with the best parameters"""
    _check_method(method, METHODS)
    config = ctx.config
    specs = []
    for density in config.densities:
        if method == IDW_LABEL:
            lam, eps, beta = 0.0, 0.0, 0.0
        else:
            params = _params_for(best, density)
            lam, eps, beta = params.lam, params.epsilon, params.beta
            if method == "qiu":
                eps, beta = 0.0, 1.0
        specs.extend(
            TrialSpec(method, density, lam, eps, beta, trial, FINAL_STREAM)
            for trial in range(config.trials_final)
        )
    logger.info("Final runs for %s: %d solves", method, len(specs))
    return ResultTable.from_rows(f"final_{method}", run_trials(ctx, specs, desc=f"final {method}"))


def iteration_experiment(ctx: ExperimentContext, best_sobolev: Dict[float, BestParams]) -> ResultTable:
    """
    Solves both variants on identical masks with the Sobolev arm's lambda,
    the same tolerance and the same starting point, and records iteration counts.
    """
    config = ctx.config
    specs = []
    for density in config.densities:
        params = _params_for(best_sobolev, density)
        for trial in range(config.trials_final):
            specs.append(TrialSpec("qiu", density, params.lam, 0.0, 1.0, trial, FINAL_STREAM))
            specs.append(TrialSpec("sobolev", density, params.lam, params.epsilon, params.beta, trial, FINAL_STREAM))
    return ResultTable.from_rows("iterations", run_trials(ctx, specs, desc="iterations"))


def paired_iterations(table: ResultTable) -> pd.DataFrame:
    """One row per (density, trial) with the qiu and sobolev iteration counts side by side"""
    frame = table.frame[table.frame["method"].isin(SEARCHABLE_METHODS)]
    paired = frame.pivot_table(index=["density", "trial"], columns="method", values="iterations", aggfunc="first")
    return paired.reset_index().rename_axis(columns=None)


def summarize(table: ResultTable) -> pd.DataFrame:
    """Mean and spread of MSE and iteration counts per (method, density)"""
    if table.empty:
        raise InvalidParameterError("cannot summarize an empty result table")
    grouped = table.frame.groupby(["method", "density"], sort=True)
    summary = grouped.agg(
        lam=("lam", "first"),
        epsilon=("epsilon", "first"),
        trials=("trial", "count"),
        mse_mean=("mse", "mean"),
        mse_std=("mse", "std"),
        iterations_mean=("iterations", "mean"),
        iterations_median=("iterations", "median"),
        nonconverged=("converged", lambda c: int((~c.astype(bool)).sum())),
    ).reset_index()
    summary["mse_std"] = summary["mse_std"].fillna(0.0)
    summary["mse_sem"] = summary["mse_std"] / np.sqrt(summary["trials"])
    return summary


def iteration_ordering(table: ResultTable) -> Tuple[pd.DataFrame, bool]:
    """
    Median iterations per density for both variants and whether the Sobolev
    arm is never worse and strictly better at half of the densities or more.
    """
    medians = table.frame.groupby(["density", "method"])["iterations"].median().unstack("method")
    if not set(SEARCHABLE_METHODS) <= set(medians.columns):
        raise InvalidParameterError("iteration table needs both qiu and sobolev rows")
    medians = medians[list(SEARCHABLE_METHODS)].reset_index().rename_axis(columns=None)
    never_worse = bool((medians["sobolev"] <= medians["qiu"]).all())
    strictly = int((medians["sobolev"] < medians["qiu"]).sum())
    return medians, never_worse and 2 * strictly >= len(medians)


def mse_ordering(table: ResultTable) -> Tuple[pd.DataFrame, bool]:
    """
    Mean MSE per density for both variants and whether the Sobolev arm is
    never worse than qiu, ties allowed within one standard error of the mean.
    """
    summary = summarize(table)
    summary = summary[summary["method"].isin(SEARCHABLE_METHODS)]
    means = summary.pivot(index="density", columns="method", values="mse_mean")
    sems = summary.pivot(index="density", columns="method", values="mse_sem")
    if not set(SEARCHABLE_METHODS) <= set(means.columns):
        raise InvalidParameterError("MSE comparison needs both qiu and sobolev rows")

    frame = pd.DataFrame({
        "density": means.index.to_numpy(),
        "qiu": means["qiu"].to_numpy(),
        "sobolev": means["sobolev"].to_numpy(),
        "sem": np.maximum(sems["qiu"].to_numpy(), sems["sobolev"].to_numpy()),
    })
    frame["sobolev_ok"] = frame["sobolev"] <= frame["qiu"] + frame["sem"]
    return frame, bool(frame["sobolev_ok"].all())

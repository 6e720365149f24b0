"""
Result artifacts: CSV tables and SVG line plots per experiment.

SVG output is byte-stable: the element id salt is fixed, text stays text and
the date metadata is omitted.
"""

import logging
from pathlib import Path
from typing import Iterable, List, Union

import matplotlib

matplotlib.use("Agg")
from matplotlib.figure import Figure  # noqa: E402

from TVGS.errors import InvalidParameterError, OutputWriteError  # noqa: E402
from TVGS.experiments import ResultTable, summarize  # noqa: E402

logger = logging.getLogger(__name__)

SVG_RC = {
    "svg.hashsalt": "tvgs",
    "svg.fonttype": "none",
    "path.simplify": False,
}
SERIES_STYLE = {
    "qiu": {"marker": "o", "linestyle": "--"},
    "sobolev": {"marker": "s", "linestyle": "-"},
    "idw-baseline": {"marker": "^", "linestyle": ":"},
}


def _line_plot(summary, column: str, ylabel: str, title: str, path: Path, log_y: bool = False) -> None:
    with matplotlib.rc_context(SVG_RC):
        fig = Figure(figsize=(6.0, 4.0))
        ax = fig.add_subplot()
        for method, rows in summary.groupby("method", sort=True):
            rows = rows.sort_values("density")
            ax.plot(
                rows["density"], rows[column],
                label=method, gid=f"series-{method}",
                **SERIES_STYLE.get(method, {"marker": "o"}),
            )
        if log_y:
            ax.set_yscale("log")
        ax.set_xlabel("sampling density")
        ax.set_ylabel(ylabel)
        ax.set_title(title)
        ax.grid(True, alpha=0.3)
        ax.legend()
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})


def plot_mse(table: ResultTable, path: Union[str, Path]) -> None:
    """Average MSE versus sampling density, one line per method"""
    summary = summarize(table)
    _line_plot(summary, "mse_mean", "average MSE", f"{table.experiment}: MSE", Path(path))


def plot_iterations(table: ResultTable, path: Union[str, Path]) -> None:
    """Average CG iterations versus sampling density on a log scale"""
    summary = summarize(table)
    summary = summary[summary["iterations_mean"] > 0]
    if summary.empty:
        raise InvalidParameterError(f"{table.experiment} has no iterative solves to plot")
    _line_plot(summary, "iterations_mean", "average CG iterations", f"{table.experiment}: iterations",
               Path(path), log_y=True)


def emit_outputs(
    tables: Union[ResultTable, Iterable[ResultTable]],
    output_dir: Union[str, Path],
    write_tables: bool = True,
) -> List[Path]:
    """
    Writes results/timings/summary CSVs and the SVG plots of every table.

    Args:
        tables: One or more result tables
        output_dir: Target directory (created when missing)
        write_tables: False regenerates summaries and plots only

    Returns:
        Paths of the written files
    """
    if isinstance(tables, ResultTable):
        tables = [tables]
    tables = list(tables)
    if not tables:
        raise InvalidParameterError("no result tables to emit")
    for table in tables:
        if table.empty:
            raise InvalidParameterError(f"result table {table.experiment!r} is empty, nothing to emit")

    output_dir = Path(output_dir)
    written: List[Path] = []
    try:
        output_dir.mkdir(parents=True, exist_ok=True)
        for table in tables:
            if write_tables:
                written.extend(table.write(output_dir))

            summary_path = output_dir / f"summary_{table.experiment}.csv"
            summarize(table).to_csv(summary_path, index=False, float_format="%.17g")
            written.append(summary_path)

            mse_path = output_dir / f"mse_{table.experiment}.svg"
            plot_mse(table, mse_path)
            written.append(mse_path)

            if (table.frame["iterations"] > 0).any():
                iter_path = output_dir / f"iterations_{table.experiment}.svg"
                plot_iterations(table, iter_path)
                written.append(iter_path)
    except OSError as e:
        raise OutputWriteError(f"cannot write results to {output_dir}: {e}") from e

    for path in written:
        logger.info("Wrote %s", path)
    return written

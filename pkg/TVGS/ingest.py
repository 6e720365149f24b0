"""
Dataset loading: JHU COVID-19 time series (global and USA layouts), generic
node x time matrices with a coordinate table, and synthetic smooth signals.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
import pandas as pd

from TVGS.errors import DatasetParseError, InvalidParameterError
from TVGS.geo_graph import NodeTable, build_geo_graph
from TVGS.spectral import dense_eig
from TVGS.tv_signal import TvSignal, read_signal_csv, write_signal_csv

logger = logging.getLogger(__name__)

JHU_LAYOUTS = {
    "global": {
        "required": ["Province/State", "Country/Region", "Lat", "Long"],
        "lat": "Lat",
        "lon": "Long",
    },
    "usa": {
        "required": ["Admin2", "Province_State", "Country_Region", "Lat", "Long_"],
        "lat": "Lat",
        "lon": "Long_",
    },
}
JHU_DATE_FORMAT = "%m/%d/%y"
DEFAULT_WINDOW = ("2020-01-22", "2020-04-06")


@dataclass(frozen=True)
class RawCaseTable:
    """Cumulative case counts per locality and day"""
    labels: List[str]
    coords: np.ndarray
    dates: List[str]
    counts: np.ndarray
    layout: str
    source: str = ""
    dropped_labels: List[str] = field(default_factory=list)
    zero_labels: List[str] = field(default_factory=list)


@dataclass(frozen=True)
class Provenance:
    source: str
    kind: str
    differenced: bool = False
    clamp_negative: bool = False
    clamped: int = 0
    dropped_rows: int = 0
    dropped_labels: List[str] = field(default_factory=list)
    zero_rows: int = 0


@dataclass(frozen=True)
class Dataset:
    """Geolocated nodes with a time-varying signal (1-day sampling period)"""
    nodes: NodeTable
    signal: TvSignal
    provenance: Provenance

    def __post_init__(self):
        if self.signal.n_nodes != self.nodes.count:
            raise InvalidParameterError(
                f"signal has {self.signal.n_nodes} rows but there are {self.nodes.count} nodes"
            )


def _jhu_label(row: pd.Series, layout: str) -> str:
    if layout == "global":
        province = row["Province/State"].strip()
        country = row["Country/Region"].strip()
        return f"{province}, {country}" if province else country
    if row.get("Combined_Key", "").strip():
        return row["Combined_Key"].strip()
    parts = [row["Admin2"].strip(), row["Province_State"].strip(), row["Country_Region"].strip()]
    return ", ".join(p for p in parts if p)


def parse_jhu(
    path: Union[str, Path],
    layout: str = "global",
    start: Optional[str] = DEFAULT_WINDOW[0],
    end: Optional[str] = DEFAULT_WINDOW[1],
    drop_zero_rows: bool = False,
) -> RawCaseTable:
    """
    Reads a JHU CSSE time-series CSV.

    Rows with missing or (0, 0) coordinates are dropped (cruise ships,
    unassigned entries). Row order of the file is preserved.

    Args:
        path: CSV file
        layout: 'global' or 'usa'
        start, end: Inclusive ISO dates of the window (None keeps every date)
        drop_zero_rows: Also drop localities without a single case inside the window

    Returns:
        RawCaseTable with cumulative counts
    """
    if layout not in JHU_LAYOUTS:
        raise InvalidParameterError(f"unknown JHU layout {layout!r}, expected one of {list(JHU_LAYOUTS)}")
    spec = JHU_LAYOUTS[layout]

    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DatasetParseError(f"{path}: {e}", line=1) from e
    frame.columns = [str(c).strip() for c in frame.columns]

    missing = [c for c in spec["required"] if c not in frame.columns]
    if missing:
        raise DatasetParseError(f"{path}: header lacks columns {missing} for layout {layout!r}", line=1)

    parsed_dates = pd.to_datetime(pd.Series(frame.columns), format=JHU_DATE_FORMAT, errors="coerce")
    date_columns = [c for c, d in zip(frame.columns, parsed_dates) if not pd.isna(d)]
    if not date_columns:
        raise DatasetParseError(f"{path}: header has no date columns (expected m/d/yy)", line=1)
    dates = pd.to_datetime(pd.Series(date_columns), format=JHU_DATE_FORMAT)
    keep = pd.Series(True, index=dates.index)
    if start is not None:
        keep &= dates >= pd.Timestamp(start)
    if end is not None:
        keep &= dates <= pd.Timestamp(end)
    window = [c for c, k in zip(date_columns, keep) if k]
    window_dates = [d.strftime("%Y-%m-%d") for d, k in zip(dates, keep) if k]
    if not window:
        raise InvalidParameterError(f"{path}: no dates inside [{start}, {end}]")

    lat = pd.to_numeric(frame[spec["lat"]], errors="coerce")
    lon = pd.to_numeric(frame[spec["lon"]], errors="coerce")
    invalid = lat.isna() | lon.isna() | ((lat == 0.0) & (lon == 0.0))

    counts = frame[window].apply(pd.to_numeric, errors="coerce")
    bad = counts.isna().to_numpy() & ~invalid.to_numpy()[:, None]
    if bad.any():
        rows, cols = np.nonzero(bad)
        cells = ", ".join(f"line {r + 2} column {window[c]!r}" for r, c in zip(rows[:10], cols[:10]))
        raise DatasetParseError(
            f"{path}: {len(rows)} non-numeric count cell(s): {cells}",
            line=int(rows[0]) + 2,
            column=window[cols[0]],
        )

    labels = [_jhu_label(row, layout) for _, row in frame.iterrows()]
    dropped = [label for label, flag in zip(labels, invalid) if flag]
    if dropped:
        logger.info("Dropped %d rows without usable coordinates from %s", len(dropped), path)
        for label in dropped:
            logger.debug("  excluded: %s", label)

    valid = ~invalid.to_numpy()
    zero_labels = []
    if drop_zero_rows:
        silent = valid & (counts.to_numpy(dtype=float).max(axis=1) <= 0.0)
        zero_labels = [label for label, flag in zip(labels, silent) if flag]
        valid &= ~silent
        if zero_labels:
            logger.info("Dropped %d rows without cases inside the window from %s", len(zero_labels), path)
    table = RawCaseTable(
        labels=[label for label, flag in zip(labels, valid) if flag],
        coords=np.column_stack([lat.to_numpy()[valid], lon.to_numpy()[valid]]).astype(float),
        dates=window_dates,
        counts=counts.to_numpy(dtype=float)[valid],
        layout=layout,
        source=str(path),
        dropped_labels=dropped,
        zero_labels=zero_labels,
    )
    logger.info("Parsed %s (%s): %d localities x %d days", path, layout, len(table.labels), len(table.dates))
    return table


def cumulative_to_new(table: RawCaseTable, clamp_negative: bool = True) -> Dataset:
    """
    Daily new cases from cumulative counts.

    new(i, 1) = cum(i, 1); new(i, t) = cum(i, t) - cum(i, t-1) afterwards.
    With clamp_negative, negative differences (reporting corrections) become 0.
    """
    if len(table.dates) < 2:
        raise InvalidParameterError("need at least 2 days to difference cumulative counts")

    new = np.diff(table.counts, axis=1, prepend=0.0)
    clamped = 0
    if clamp_negative:
        negative = new < 0.0
        clamped = int(negative.sum())
        new[negative] = 0.0
        if clamped:
            logger.info("Clamped %d negative daily differences to 0", clamped)

    return Dataset(
        nodes=NodeTable(coords=table.coords, labels=table.labels),
        signal=TvSignal(values=new, node_labels=table.labels, time_labels=table.dates),
        provenance=Provenance(
            source=table.source,
            kind=f"jhu-{table.layout}",
            differenced=True,
            clamp_negative=clamp_negative,
            clamped=clamped,
            dropped_rows=len(table.dropped_labels),
            dropped_labels=list(table.dropped_labels),
            zero_rows=len(table.zero_labels),
        ),
    )


def load_jhu_dataset(
    path: Union[str, Path],
    layout: str = "global",
    start: Optional[str] = DEFAULT_WINDOW[0],
    end: Optional[str] = DEFAULT_WINDOW[1],
    clamp_negative: bool = True,
    drop_zero_rows: bool = False,
) -> Dataset:
    table = parse_jhu(path, layout, start, end, drop_zero_rows=drop_zero_rows)
    return cumulative_to_new(table, clamp_negative=clamp_negative)


def _coordinate_column(frame: pd.DataFrame, names: List[str], path) -> str:
    for name in names:
        if name in frame.columns:
            return name
    raise DatasetParseError(f"{path}: missing a column named one of {names}", line=1)


def load_matrix_dataset(values_path: Union[str, Path], coords_path: Union[str, Path]) -> Dataset:
    """
    Generic node x time matrix (read_signal_csv format) plus a coordinate CSV
    with columns label (optional), latitude, longitude. No differencing.
    """
    signal = read_signal_csv(values_path)
    try:
        coords = pd.read_csv(coords_path, dtype={"label": str}, keep_default_na=False)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DatasetParseError(f"{coords_path}: {e}", line=1) from e
    lat_col = _coordinate_column(coords, ["latitude", "lat", "Lat"], coords_path)
    lon_col = _coordinate_column(coords, ["longitude", "lon", "long", "Long", "Long_"], coords_path)

    if len(coords) != signal.n_nodes:
        raise InvalidParameterError(
            f"{values_path} has {signal.n_nodes} nodes but {coords_path} has {len(coords)} rows"
        )
    if "label" in coords.columns and list(coords["label"]) != signal.node_labels:
        raise DatasetParseError(f"{coords_path}: node labels do not match {values_path}", column="label")

    lat = pd.to_numeric(coords[lat_col], errors="coerce")
    lon = pd.to_numeric(coords[lon_col], errors="coerce")
    if lat.isna().any() or lon.isna().any():
        row = int(np.flatnonzero((lat.isna() | lon.isna()).to_numpy())[0])
        raise DatasetParseError(f"{coords_path}: non-numeric coordinate", line=row + 2)

    return Dataset(
        nodes=NodeTable(coords=np.column_stack([lat, lon]), labels=signal.node_labels),
        signal=signal,
        provenance=Provenance(source=str(values_path), kind="matrix"),
    )


def write_matrix_dataset(dataset: Dataset, values_path: Union[str, Path], coords_path: Union[str, Path]) -> None:
    """Writes the values/coordinates pair read by load_matrix_dataset"""
    write_signal_csv(dataset.signal, values_path)
    coords = pd.DataFrame({
        "label": dataset.nodes.labels,
        "latitude": dataset.nodes.coords[:, 0],
        "longitude": dataset.nodes.coords[:, 1],
    })
    coords.to_csv(coords_path, index=False, float_format="%.17g")


def synthetic_smooth_dataset(
    n_nodes: int = 200,
    n_steps: int = 30,
    k: int = 10,
    n_modes: int = 5,
    seed: int = 0,
) -> Dataset:
    """
    Random geolocated nodes carrying a signal that is smooth on the graph
    (a few low-frequency Laplacian eigenvectors) and slowly varying in time.
    """
    if n_modes < 1 or n_modes > n_nodes:
        raise InvalidParameterError(f"n_modes must lie in [1, {n_nodes}], got {n_modes}")
    rng = np.random.default_rng(seed)
    coords = np.column_stack([
        rng.uniform(25.0, 50.0, n_nodes),
        rng.uniform(-125.0, -65.0, n_nodes),
    ])
    nodes = NodeTable(coords=coords, labels=[f"node_{i}" for i in range(n_nodes)])
    graph = build_geo_graph(nodes, k=min(k, n_nodes - 1))
    U = dense_eig(graph.laplacian).eigenvectors[:, :n_modes]

    t = np.arange(n_steps) / n_steps
    amplitude = 1.0 / (1.0 + np.arange(n_modes))
    freq = rng.uniform(0.2, 1.0, n_modes)
    phase = rng.uniform(0.0, 2.0 * np.pi, n_modes)
    coeffs = amplitude[:, None] * np.cos(2.0 * np.pi * freq[:, None] * t[None, :] + phase[:, None])
    values = np.sqrt(n_nodes) * (U @ coeffs) + 5.0

    return Dataset(
        nodes=nodes,
        signal=TvSignal(
            values=values,
            node_labels=nodes.labels,
            time_labels=[f"t{i}" for i in range(n_steps)],
        ),
        provenance=Provenance(source=f"synthetic(seed={seed})", kind="synthetic"),
    )

import logging

import numpy as np
import pytest
from numpy.testing import assert_allclose

from TVGS.errors import DatasetParseError, InvalidParameterError
from TVGS.geo_graph import build_geo_graph
from TVGS.ingest import (
    cumulative_to_new,
    load_jhu_dataset,
    load_matrix_dataset,
    parse_jhu,
    synthetic_smooth_dataset,
    write_matrix_dataset,
)
from TVGS.spectral import dense_eig
from TVGS.tv_signal import smoothness_s2

GLOBAL_CSV = """Province/State,Country/Region,Lat,Long,1/21/20,1/22/20,1/23/20,1/24/20
,Afghanistan,33.0,65.0,0,0,1,3
Alberta,Canada,53.9,-116.5,0,2,2,1
,Diamond Princess,0.0,0.0,0,10,20,30
,Nowhere,,,0,0,0,0
"""

USA_CSV = """UID,iso2,iso3,code3,FIPS,Admin2,Province_State,Country_Region,Lat,Long_,Combined_Key,1/22/20,1/23/20
84001001,US,USA,840,1001.0,Autauga,Alabama,US,32.53,-86.64,"Autauga, Alabama, US",0,1
84080001,US,USA,840,80001.0,Out of AL,Alabama,US,0.0,0.0,"Out of AL, Alabama, US",0,0
84001003,US,USA,840,1003.0,Baldwin,Alabama,US,30.72,-87.72,"Baldwin, Alabama, US",1,3
"""


@pytest.fixture
def global_csv(tmp_path):
    path = tmp_path / "time_series_covid19_confirmed_global.csv"
    path.write_text(GLOBAL_CSV)
    return path


def test_parse_global(global_csv, caplog):
    caplog.set_level(logging.INFO, logger="TVGS.ingest")
    table = parse_jhu(global_csv)
    assert table.labels == ["Afghanistan", "Alberta, Canada"]
    assert table.dates == ["2020-01-22", "2020-01-23", "2020-01-24"]
    assert_allclose(table.counts, [[0, 1, 3], [2, 2, 1]])
    assert_allclose(table.coords, [[33.0, 65.0], [53.9, -116.5]])
    assert table.dropped_labels == ["Diamond Princess", "Nowhere"]
    assert "Dropped 2 rows" in caplog.text


def test_window_without_bounds(global_csv):
    table = parse_jhu(global_csv, start=None, end=None)
    assert len(table.dates) == 4


def test_window_outside_data(global_csv):
    with pytest.raises(InvalidParameterError):
        parse_jhu(global_csv, start="2021-01-01", end="2021-02-01")


def test_daily_new_cases_with_clamping(global_csv):
    dataset = cumulative_to_new(parse_jhu(global_csv), clamp_negative=True)
    assert_allclose(dataset.signal.values, [[0, 1, 2], [2, 0, 0]])
    assert dataset.provenance.clamped == 1
    assert dataset.provenance.dropped_rows == 2
    assert dataset.nodes.labels == dataset.signal.node_labels


def test_telescoping_sum_without_clamping(global_csv):
    table = parse_jhu(global_csv)
    dataset = cumulative_to_new(table, clamp_negative=False)
    assert_allclose(np.cumsum(dataset.signal.values, axis=1), table.counts)
    assert dataset.provenance.clamped == 0
    assert dataset.signal.values.min() == -1.0


def test_parse_usa(tmp_path, caplog):
    caplog.set_level(logging.INFO, logger="TVGS.ingest")
    path = tmp_path / "us.csv"
    path.write_text(USA_CSV)
    dataset = load_jhu_dataset(path, layout="usa")
    assert dataset.nodes.labels == ["Autauga, Alabama, US", "Baldwin, Alabama, US"]
    assert_allclose(dataset.signal.values, [[0, 1], [1, 2]])
    assert dataset.provenance.dropped_labels == ["Out of AL, Alabama, US"]
    assert "Dropped 1 rows" in caplog.text


def test_non_numeric_count(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text(GLOBAL_CSV.replace("Canada,53.9,-116.5,0,2,2,1", "Canada,53.9,-116.5,0,2,x,1"))
    with pytest.raises(DatasetParseError) as err:
        parse_jhu(path)
    assert err.value.line == 3
    assert err.value.column == "1/23/20"


def test_header_without_required_columns(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("Country,Lat,Long,1/22/20\nX,1,2,3\n")
    with pytest.raises(DatasetParseError) as err:
        parse_jhu(path)
    assert err.value.line == 1


def test_single_day_cannot_be_differenced(global_csv):
    table = parse_jhu(global_csv, start="2020-01-22", end="2020-01-22")
    with pytest.raises(InvalidParameterError):
        cumulative_to_new(table)


def test_matrix_dataset_files(tmp_path, global_csv):
    dataset = load_jhu_dataset(global_csv)
    values_path = tmp_path / "values.csv"
    coords_path = tmp_path / "coords.csv"
    write_matrix_dataset(dataset, values_path, coords_path)

    loaded = load_matrix_dataset(values_path, coords_path)
    assert loaded.nodes.labels == dataset.nodes.labels
    assert np.array_equal(loaded.nodes.coords, dataset.nodes.coords)
    assert np.array_equal(loaded.signal.values, dataset.signal.values)
    assert loaded.provenance.kind == "matrix"


def test_matrix_dataset_label_mismatch(tmp_path, global_csv):
    dataset = load_jhu_dataset(global_csv)
    values_path = tmp_path / "values.csv"
    coords_path = tmp_path / "coords.csv"
    write_matrix_dataset(dataset, values_path, coords_path)
    coords_path.write_text(coords_path.read_text().replace("Afghanistan", "Atlantis"))
    with pytest.raises(DatasetParseError):
        load_matrix_dataset(values_path, coords_path)


def test_synthetic_dataset_is_smooth_and_seeded():
    a = synthetic_smooth_dataset(n_nodes=60, n_steps=12, k=6, n_modes=4, seed=3)
    b = synthetic_smooth_dataset(n_nodes=60, n_steps=12, k=6, n_modes=4, seed=3)
    assert np.array_equal(a.signal.values, b.signal.values)
    assert a.signal.values.shape == (60, 12)

    L = build_geo_graph(a.nodes, k=6).laplacian
    eigenvalues = dense_eig(L).eigenvalues
    centered = a.signal.values - 5.0
    ratio = smoothness_s2(centered, L) / np.sum(centered ** 2)
    assert ratio <= eigenvalues[3] + 1e-9


def test_rows_without_cases_are_kept_unless_asked(tmp_path, caplog):
    path = tmp_path / "with_bhutan.csv"
    path.write_text(GLOBAL_CSV + ",Bhutan,27.5,90.4,0,0,0,0\n")
    assert parse_jhu(path).labels == ["Afghanistan", "Alberta, Canada", "Bhutan"]

    caplog.set_level(logging.INFO, logger="TVGS.ingest")
    table = parse_jhu(path, drop_zero_rows=True)
    assert table.labels == ["Afghanistan", "Alberta, Canada"]
    assert table.zero_labels == ["Bhutan"]
    assert table.dropped_labels == ["Diamond Princess", "Nowhere"]
    assert "Dropped 1 rows without cases" in caplog.text

    dataset = load_jhu_dataset(path, drop_zero_rows=True)
    assert dataset.provenance.zero_rows == 1
    assert dataset.provenance.dropped_rows == 2
    assert dataset.nodes.count == 2

import numpy as np
import pytest
from numpy.testing import assert_allclose

from TVGS.errors import InvalidParameterError
from TVGS.sampling import (
    FINAL_STREAM,
    SEARCH_STREAM,
    SamplingPlan,
    draw_mask,
    observe,
    per_step_count,
    read_mask,
    trial_seed,
    write_mask,
)


@pytest.mark.parametrize("density, n_nodes, expected", [
    (0.5, 10, 5),
    (0.25, 10, 3),
    (0.995, 3149, 3133),
    (0.995, 259, 258),
    (1.0, 7, 7),
])
def test_per_step_count(density, n_nodes, expected):
    assert per_step_count(density, n_nodes) == expected


def test_every_column_has_the_same_count():
    J = draw_mask(SamplingPlan(0.3, seed=4), 50, 20)
    assert set(np.unique(J)) <= {0.0, 1.0}
    assert_allclose(J.sum(axis=0), 15.0)


def test_same_seed_same_mask():
    plan = SamplingPlan(0.6, seed=99)
    assert np.array_equal(draw_mask(plan, 30, 10), draw_mask(plan, 30, 10))
    assert not np.array_equal(draw_mask(plan, 30, 10), draw_mask(SamplingPlan(0.6, seed=100), 30, 10))


def test_trial_seeds_are_independent_streams():
    assert trial_seed(0, SEARCH_STREAM, 3) == trial_seed(0, SEARCH_STREAM, 3)
    assert trial_seed(0, SEARCH_STREAM, 3) != trial_seed(0, FINAL_STREAM, 3)
    assert trial_seed(0, FINAL_STREAM, 3) != trial_seed(1, FINAL_STREAM, 3)
    assert len({trial_seed(0, FINAL_STREAM, t) for t in range(100)}) == 100


def test_inclusion_frequency_is_uniform():
    n_nodes, n_steps, trials, density = 20, 5, 400, 0.4
    counts = np.zeros(n_nodes)
    for t in range(trials):
        counts += draw_mask(SamplingPlan.for_trial(density, 0, FINAL_STREAM, t), n_nodes, n_steps).sum(axis=1)
    draws = trials * n_steps
    freq = counts / draws
    stderr = np.sqrt(density * (1 - density) / draws)
    assert np.all(np.abs(freq - density) < 5 * stderr)


@pytest.mark.parametrize("density", [0.0, -0.1, 1.5])
def test_density_out_of_range(density):
    with pytest.raises(InvalidParameterError):
        SamplingPlan(density, seed=0)


def test_density_too_small_for_graph():
    with pytest.raises(InvalidParameterError):
        draw_mask(SamplingPlan(0.01, seed=0), 10, 3)


def test_observe(rng):
    X = rng.normal(size=(6, 4))
    J = draw_mask(SamplingPlan(0.5, seed=1), 6, 4)
    sampling = observe(J, X)
    assert_allclose(sampling.observed, J * X)
    with pytest.raises(InvalidParameterError):
        observe(J[:, :3], X)


def test_mask_listing(tmp_path):
    J = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    path = tmp_path / "mask.txt"
    write_mask(J, path)
    assert path.read_text().splitlines() == ["0 0", "0 2", "1 1", "1 2"]
    assert np.array_equal(read_mask(path, 3, 2), J)

import numpy as np
import pytest

from homspec.sampling import AliasTable


def test_matches_distribution_within_five_sigma():
    rng = np.random.default_rng(2024)
    weights = rng.random(50) ** 2
    weights[7] = 0.0
    probs = weights / weights.sum()
    table = AliasTable(weights)
    n = 400_000
    draws = table.draw(np.random.default_rng(1), n)
    counts = np.bincount(draws, minlength=50)
    sigma = np.sqrt(np.maximum(n * probs * (1 - probs), 1.0))
    z = (counts - n * probs) / sigma
    assert np.max(np.abs(z)) < 5.0


def test_zero_weight_outcomes_never_drawn():
    weights = np.array([0.0, 1.0, 0.0, 2.0, 0.0])
    table = AliasTable(weights)
    draws = table.draw(np.random.default_rng(3), 100_000)
    assert set(np.unique(draws)) <= {1, 3}


def test_deterministic_for_fixed_stream():
    table = AliasTable(np.arange(1, 20, dtype=float))
    a = table.draw(np.random.default_rng(42), 1000)
    b = table.draw(np.random.default_rng(42), 1000)
    assert np.array_equal(a, b)


def test_matrix_weights_flattened():
    weights = np.array([[1.0, 0.0], [0.0, 3.0]])
    table = AliasTable(weights)
    assert table.n_outcomes == 4
    draws = table.draw(np.random.default_rng(5), 50_000)
    assert set(np.unique(draws)) <= {0, 3}
    assert np.mean(draws == 3) == pytest.approx(0.75, abs=0.01)


def test_single_outcome():
    table = AliasTable(np.array([2.5]))
    assert np.all(table.draw(np.random.default_rng(0), 100) == 0)


@pytest.mark.parametrize("bad", [[], [-1.0, 2.0], [0.0, 0.0], [np.nan, 1.0]])
def test_invalid_weights(bad):
    with pytest.raises(ValueError):
        AliasTable(np.array(bad, dtype=float))

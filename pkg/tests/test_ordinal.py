import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import quantile_oracle

from geofair.ingest import ObservationTable
from geofair.ordinal import (
    DegenerateBinningError,
    OrdinalScheme,
    argmax_class,
    assign_class,
    confidence_scores,
    fit_binning,
    random_baseline,
    score_table,
)

SCHEME = OrdinalScheme((0.0, 1.0, 2.0, 4.0, 8.0, 10.0))


def test_fit_binning_matches_exact_quantiles():
    rng = np.random.default_rng(1)
    values = rng.uniform(5000, 15000, size=37)
    scheme = fit_binning(values, 5)
    for k, cut in enumerate(scheme.cuts):
        assert cut == pytest.approx(float(quantile_oracle(values, k / 5)), rel=1e-14)
    assert scheme.cuts[0] == values.min() and scheme.cuts[-1] == values.max()


def test_degenerate_binning_rejected():
    with pytest.raises(DegenerateBinningError):
        fit_binning([1.0, 1.0, 2.0, 2.0], 5)
    with pytest.raises(DegenerateBinningError):
        OrdinalScheme((0.0, 1.0, 1.0, 2.0))
    # enough distinct values but repeated mass still collapses a cut
    with pytest.raises(DegenerateBinningError):
        fit_binning([1, 1, 1, 1, 1, 1, 1, 1, 2, 3, 4, 5], 5)


def test_interval_assignment():
    assert assign_class(0.0, SCHEME) == 1
    assert assign_class(0.999, SCHEME) == 1
    assert assign_class(1.0, SCHEME) == 2
    assert assign_class(10.0, SCHEME) == 5
    assert assign_class(-3.0, SCHEME) == 1
    assert assign_class(99.0, SCHEME) == 5


def test_midpoint_round_trip():
    assert assign_class(SCHEME.midpoints, SCHEME).tolist() == [1, 2, 3, 4, 5]


@settings(max_examples=100, deadline=None)
@given(st.floats(-5, 15), st.floats(-5, 15))
def test_assignment_monotone(a, b):
    lo, hi = min(a, b), max(a, b)
    assert assign_class(lo, SCHEME) <= assign_class(hi, SCHEME)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-1, 12, allow_nan=False), min_size=1, max_size=30), st.floats(0.1, 5))
def test_scores_normalised_and_argmax_consistent(z, temp):
    scores = confidence_scores(np.array(z), SCHEME, temp)
    np.testing.assert_allclose(scores.sum(axis=1), 1.0, atol=1e-9)
    assert ((scores > 0) & (scores < 1)).all()
    dist = np.abs(np.array(z)[:, None] - SCHEME.midpoints) / SCHEME.lengths
    assert (argmax_class(scores) == np.argmin(dist, axis=1) + 1).all()


def test_scalar_scores_shape():
    assert confidence_scores(3.0, SCHEME).shape == (5,)


@pytest.mark.parametrize("n", [25, 26, 99, 1000])
def test_class_balance_on_distinct_values(n):
    values = np.random.default_rng(n).permutation(np.arange(n, dtype=float) * 1.5 + 100)
    counts = np.bincount(assign_class(values, fit_binning(values, 5)), minlength=6)[1:]
    assert (np.abs(counts - n / 5) <= 1).all()


def test_scheme_json_round_trip():
    data = json.loads(SCHEME.to_json())
    assert data == {"K": 5, "cuts": [0.0, 1.0, 2.0, 4.0, 8.0, 10.0]}
    assert OrdinalScheme.from_dict(data).cuts == SCHEME.cuts
    with pytest.raises(ValueError):
        OrdinalScheme.from_dict({"K": 3, "cuts": [0, 1, 2]})


def _obs(z_true, z_pred):
    n = len(z_true)
    return ObservationTable(
        region_id=np.array(["a"] * n, dtype=object),
        z_true=np.asarray(z_true, dtype=float),
        z_pred=np.asarray(z_pred, dtype=float),
        row=np.arange(n),
        n_loaded=n,
    )


def test_score_table_modes():
    table = score_table(_obs([0.5, 3.0, 9.0], [1.9, 3.0, 7.9]), SCHEME)
    assert table.y.tolist() == [1, 3, 5]
    assert table.y_hat.tolist() == [2, 3, 4]
    argmax = score_table(_obs([0.5], [1.9]), SCHEME, yhat_from="argmax")
    assert argmax.y_hat.tolist() == argmax_class(argmax.scores).tolist()
    with pytest.raises(ValueError):
        score_table(_obs([1.0], [1.0]), SCHEME, yhat_from="mode")


def test_random_baseline():
    a = random_baseline(10_000, 5, seed=3)
    b = random_baseline(10_000, 5, seed=3)
    assert (a[0] == b[0]).all() and (a[1] == b[1]).all()
    freq = np.bincount(a[0], minlength=6)[1:] / 10_000
    assert (np.abs(freq - 0.2) < 0.05).all()
    np.testing.assert_allclose(a[1].sum(axis=1), 1.0)
    y_hat, scores = random_baseline(20, 4, seed=0, confidence=1.0)
    assert (scores == np.eye(4)[y_hat - 1]).all()

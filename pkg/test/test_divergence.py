import numpy as np
import pytest

from cilfair.analysis import (DivergenceMetric, hellinger_distance, js_divergence, kl_divergence,
                              rowwise_divergence)
from cilfair.utils.errors import ParameterError

LN2 = np.log(2.0)


def random_distributions(rng, n, k):
    raw = rng.random((n, k)) ** 3
    return raw / raw.sum(axis=1, keepdims=True)


def test_js_disjoint_support_is_ln2():
    assert js_divergence([1.0, 0.0], [0.0, 1.0]) == pytest.approx(LN2, abs=1e-12)


def test_js_identity_and_symmetry(rng):
    ps = random_distributions(rng, 200, 5)
    qs = random_distributions(rng, 200, 5)
    for p, q in zip(ps, qs):
        assert js_divergence(p, p) == pytest.approx(0.0, abs=1e-12)
        assert js_divergence(p, q) == pytest.approx(js_divergence(q, p), abs=1e-15)
        assert 0.0 <= js_divergence(p, q) <= LN2


def test_kl_closed_form():
    assert kl_divergence([1.0, 0.0], [0.5, 0.5]) == pytest.approx(LN2, abs=1e-12)
    assert kl_divergence([0.3, 0.7], [0.3, 0.7]) == pytest.approx(0.0, abs=1e-12)


def test_kl_support_violation():
    with pytest.raises(ParameterError):
        kl_divergence([0.5, 0.5], [1.0, 0.0])
    smoothed = kl_divergence([0.5, 0.5], [1.0, 0.0], epsilon=1e-12)
    assert np.isfinite(smoothed) and smoothed > 0


def test_hellinger_closed_form():
    assert hellinger_distance([1.0, 0.0], [0.0, 1.0]) == pytest.approx(1.0, abs=1e-12)
    assert hellinger_distance([0.2, 0.8], [0.2, 0.8]) == pytest.approx(0.0, abs=1e-12)


def test_hellinger_matches_bhattacharyya_form(rng):
    for p, q in zip(random_distributions(rng, 50, 4), random_distributions(rng, 50, 4)):
        expected = np.sqrt(max(1.0 - np.sum(np.sqrt(p * q)), 0.0))
        assert hellinger_distance(p, q) == pytest.approx(expected, abs=1e-7)


@pytest.mark.parametrize("p,q", [
    ([0.5, 0.6], [0.5, 0.5]),
    ([1.2, -0.2], [0.5, 0.5]),
    ([0.5, 0.5], [0.2, 0.3, 0.5]),
    ([np.nan, 1.0], [0.5, 0.5]),
])
def test_invalid_distributions_are_rejected(p, q):
    with pytest.raises(ParameterError):
        js_divergence(p, q)


def test_rowwise_matches_scalar(rng):
    ps = random_distributions(rng, 30, 6)
    qs = random_distributions(rng, 30, 6)
    for metric, scalar in ((DivergenceMetric.JENSEN_SHANNON, js_divergence),
                           (DivergenceMetric.KULLBACK_LEIBLER, kl_divergence),
                           (DivergenceMetric.HELLINGER, hellinger_distance)):
        rows = rowwise_divergence(ps, qs, metric)
        assert rows.shape == (30,)
        for value, p, q in zip(rows, ps, qs):
            assert value == pytest.approx(scalar(p, q), abs=1e-12)


def test_metric_names():
    assert DivergenceMetric("jensen_shannon") is DivergenceMetric.JENSEN_SHANNON
    with pytest.raises(ValueError):
        DivergenceMetric("wasserstein")

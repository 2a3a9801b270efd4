"""Shared fixtures and small builders used across the test suite."""

import numpy as np
import pytest

from focus_forecast.clustering import PrototypeSet
from focus_forecast.data import SegmentMatrix, generate_synthetic, split_and_normalize
from focus_forecast.model import HyperParams, init_params


def make_segments(arr) -> SegmentMatrix:
    """Wrap a raw (n, p) array as a SegmentMatrix with synthetic provenance."""
    arr = np.asarray(arr, dtype=np.float64)
    prov = np.zeros((arr.shape[0], 2), dtype=np.int64)
    prov[:, 1] = np.arange(arr.shape[0])
    return SegmentMatrix(segments=arr, provenance=prov)


@pytest.fixture(scope="session")
def planted():
    """Noisy 4-template synthetic series, split 7/1/2, with its templates."""
    result = generate_synthetic(4, 2400, 4, 0.05, seed=0)
    ds = split_and_normalize(result.dataset, (0.7, 0.1, 0.2))
    return ds, result


@pytest.fixture
def tiny_model():
    """A small but fully general model: 3 entities, 4 segments of length 4."""
    hyper = HyperParams(p=4, d=8, m=2, k=4, lookback=16, horizon=4, n_entities=3)
    rng = np.random.default_rng(11)
    protos = PrototypeSet(rng.standard_normal((4, 4)), alpha=0.2)
    params = init_params(hyper, protos, seed=5)
    x = rng.standard_normal((2, 16, 3))
    y = rng.standard_normal((2, 4, 3))
    return params, x, y

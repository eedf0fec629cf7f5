import math
import os
import subprocess
import sys

import numpy as np
import pytest

from spillsense import _kernels
from spillsense.simulate import generate_network

BACKENDS = ["numpy"] + (["numba"] if _kernels.numba_available() else [])


@pytest.fixture(params=BACKENDS)
def backend(request):
    return _kernels.get_backend(request.param)


def test_compensated_sum_is_exact_on_cancelling_terms(backend):
    x = np.array([1e16, 1.0, -1e16, 1.0] * 1000)
    assert backend.compensated_sum(x) == 2000.0
    rng = np.random.default_rng(0)
    y = rng.normal(size=10_000) * 10.0 ** rng.integers(-8, 8, 10_000)
    assert backend.compensated_sum(y) == pytest.approx(math.fsum(y), rel=1e-15, abs=1e-12)


def test_group_sum(backend):
    rng = np.random.default_rng(1)
    keys = rng.integers(0, 7, 5000)
    x = rng.normal(size=5000)
    out = backend.group_compensated_sum(keys, x, 9)
    expected = [math.fsum(x[keys == k]) for k in range(9)]
    np.testing.assert_allclose(out, expected, atol=1e-12)
    assert out[7] == 0.0 and out[8] == 0.0


def test_backends_agree():
    if len(BACKENDS) < 2:
        pytest.skip("numba unavailable")
    nb, npy = _kernels.get_backend("numba"), _kernels.get_backend("numpy")
    rng = np.random.default_rng(2)
    net = generate_network("erdos_renyi", 300, 2, p=0.03)
    width = int(net.degrees.max()) + 1
    probs = rng.uniform(size=300)
    treat = (rng.random((5, 300)) < 0.4).astype(np.int64)
    p = rng.uniform(size=50)
    np.testing.assert_allclose(nb.poisson_binomial(p), npy.poisson_binomial(p), atol=1e-15)
    np.testing.assert_allclose(nb.batch_poisson_binomial(net.indptr, net.indices, probs, width),
                               npy.batch_poisson_binomial(net.indptr, net.indices, probs, width), atol=1e-15)
    assert np.array_equal(nb.neighbor_counts(net.indptr, net.indices, treat),
                          npy.neighbor_counts(net.indptr, net.indices, treat))


def test_neighbor_counts_direct(backend):
    net = generate_network("star", 5)
    treat = np.array([[0, 1, 1, 1, 1], [1, 0, 0, 0, 0]], dtype=np.int64)
    out = backend.neighbor_counts(net.indptr, net.indices, treat)
    assert out.tolist() == [[4, 0, 0, 0, 0], [0, 1, 1, 1, 1]]


def test_batch_rows_are_pmfs(backend):
    net = generate_network("k_regular_ring", 6, k=2)
    out = backend.batch_poisson_binomial(net.indptr, net.indices, np.full(6, 0.5), 3)
    np.testing.assert_allclose(out, np.tile([0.25, 0.5, 0.25], (6, 1)))


def test_unknown_backend():
    with pytest.raises(ValueError):
        _kernels.get_backend("cuda")


@pytest.mark.parametrize("flag, expected", [("1", "numpy"), ("0", "numba")])
def test_env_flag_selects_backend(flag, expected):
    if expected == "numba" and not _kernels.numba_available():
        pytest.skip("numba unavailable")
    env = dict(os.environ, SPILLSENSE_DISABLE_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", "from spillsense import _kernels; print(_kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == expected

import numpy as np
import pytest

from geofair import kernels
from geofair._pykernels import bfs_distances as py_bfs

needs_compiled = pytest.mark.skipif(
    "compiled" not in kernels.available_backends(), reason="extension not built"
)


def random_csr(rng, n, p):
    adj = np.triu(rng.random((n, n)) < p, 1)
    adj = adj | adj.T
    indptr = np.r_[0, np.cumsum(adj.sum(axis=1))]
    indices = np.concatenate([np.flatnonzero(row) for row in adj]) if n else np.array([], int)
    return indptr.astype(np.int64), indices.astype(np.int64)


def test_backend_name_is_known():
    assert kernels.BACKEND in kernels.available_backends()
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


def test_bfs_line_graph(backend):
    indptr = np.array([0, 1, 3, 4])
    indices = np.array([1, 0, 2, 1])
    d = backend.bfs_distances(indptr, indices, 5)
    assert d.tolist() == [[0, 1, 2], [1, 0, 1], [2, 1, 0]]
    d1 = backend.bfs_distances(indptr, indices, 1)
    assert d1[0, 2] == -1


def test_smooth_handles_missing(backend):
    dist = np.array([[0, 1], [1, 0]], dtype=np.int32)
    out, cnt = backend.smooth(dist, np.array([0.0, np.nan]), np.array([1, 0]), np.ones(2), 1.0, 1)
    assert out[0] == 0.0 and out[1] == 0.0
    assert cnt.tolist() == [1, 1]


def test_plugin_argmax_ties_lowest(backend):
    scores = np.array([[0.5, 0.5], [0.2, 0.8]])
    out = backend.plugin_argmax(scores, np.ones(2), np.array([0, 0]), np.zeros((1, 2)))
    assert out.tolist() == [0, 1]


@needs_compiled
@pytest.mark.parametrize("seed", range(5))
def test_backends_agree(seed):
    rng = np.random.default_rng(seed)
    c, p = kernels.get_backend("compiled"), kernels.get_backend("python")
    indptr, indices = random_csr(rng, 40, 0.08)
    d_c = c.bfs_distances(indptr, indices, 6)
    np.testing.assert_array_equal(d_c, p.bfs_distances(indptr, indices, 6))

    x = rng.normal(size=40)
    present = rng.random(40) > 0.3
    mult = rng.uniform(0.5, 2, size=40)
    sc, nc = c.smooth(d_c, np.where(present, x, np.nan), present, mult, 1.3, 4)
    sp, np_ = p.smooth(d_c, np.where(present, x, np.nan), present, mult, 1.3, 4)
    np.testing.assert_allclose(sc, sp, rtol=1e-12, atol=1e-15)
    np.testing.assert_array_equal(nc, np_)

    scores = rng.dirichlet(np.ones(5), size=300)
    groups = rng.integers(0, 2, size=300)
    scale = np.where(groups == 0, 0.3, 0.7)
    offsets = rng.normal(scale=0.05, size=(2, 5))
    np.testing.assert_array_equal(
        c.plugin_argmax(scores, scale, groups, offsets),
        p.plugin_argmax(scores, scale, groups, offsets),
    )

    y, yh = rng.integers(0, 5, 300), rng.integers(0, 5, 300)
    np.testing.assert_array_equal(
        c.confusion_counts(y, yh, groups, 5, 2), p.confusion_counts(y, yh, groups, 5, 2)
    )


def test_python_bfs_isolated_nodes():
    d = py_bfs(np.zeros(4, dtype=np.int64), np.array([], dtype=np.int64), 3)
    assert (np.diag(d) == 0).all()
    assert (d[~np.eye(3, dtype=bool)] == -1).all()

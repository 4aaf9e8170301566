"""Backend selection for the numerical kernels.

The compiled extension is used when importable; set ``GEOFAIR_PURE_PYTHON=1``
to force the fallback. ``BACKEND`` names the active one. Both backends are
importable by name for tests and benchmarks via :func:`get_backend`.
"""

import os

import numpy as np

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

__all__ = [
    "BACKEND",
    "available_backends",
    "get_backend",
    "bfs_distances",
    "smooth",
    "plugin_argmax",
    "confusion_counts",
]


class _Compiled:
    """Adapts array arguments to the dtypes/layout the extension expects."""

    name = "compiled"

    @staticmethod
    def bfs_distances(indptr, indices, horizon):
        return _ckernels.bfs_distances(
            np.ascontiguousarray(indptr, dtype=np.int64),
            np.ascontiguousarray(indices, dtype=np.int64),
            int(horizon),
        )

    @staticmethod
    def smooth(dist, values, present, multipliers, p, m):
        return _ckernels.smooth(
            np.ascontiguousarray(dist, dtype=np.int32),
            np.ascontiguousarray(np.nan_to_num(values), dtype=np.float64),
            np.ascontiguousarray(present, dtype=np.uint8),
            np.ascontiguousarray(multipliers, dtype=np.float64),
            float(p),
            int(m),
        )

    @staticmethod
    def plugin_argmax(scores, row_scale, row_group, offsets):
        return _ckernels.plugin_argmax(
            np.ascontiguousarray(scores, dtype=np.float64),
            np.ascontiguousarray(row_scale, dtype=np.float64),
            np.ascontiguousarray(row_group, dtype=np.int64),
            np.ascontiguousarray(offsets, dtype=np.float64),
        )

    @staticmethod
    def confusion_counts(y, y_hat, group, n_classes, n_groups):
        return _ckernels.confusion_counts(
            np.ascontiguousarray(y, dtype=np.int64),
            np.ascontiguousarray(y_hat, dtype=np.int64),
            np.ascontiguousarray(group, dtype=np.int64),
            int(n_classes),
            int(n_groups),
        )


class _Python:
    name = "python"
    bfs_distances = staticmethod(_pykernels.bfs_distances)
    smooth = staticmethod(_pykernels.smooth)
    plugin_argmax = staticmethod(_pykernels.plugin_argmax)
    confusion_counts = staticmethod(_pykernels.confusion_counts)


def available_backends():
    return ["compiled", "python"] if _ckernels is not None else ["python"]


def get_backend(name=None):
    if name is None:
        name = BACKEND
    if name == "compiled":
        if _ckernels is None:
            raise ImportError("geofair._ckernels is not built")
        return _Compiled
    if name == "python":
        return _Python
    raise ValueError(f"unknown kernel backend {name!r}")


if _ckernels is not None and not os.environ.get("GEOFAIR_PURE_PYTHON"):
    BACKEND = "compiled"
else:
    BACKEND = "python"

_active = get_backend(BACKEND)
bfs_distances = _active.bfs_distances
smooth = _active.smooth
plugin_argmax = _active.plugin_argmax
confusion_counts = _active.confusion_counts

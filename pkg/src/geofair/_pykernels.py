"""Pure-Python implementations of the hot kernels.

These are the reference versions; ``_ckernels.pyx`` must produce identical
results. Class labels are 0-based here, callers translate.
"""

from collections import deque

import numpy as np


def bfs_distances(indptr, indices, horizon):
    """All-pairs hop distances up to ``horizon``; -1 marks unreachable."""
    n = len(indptr) - 1
    dist = np.full((n, n), -1, dtype=np.int32)
    for src in range(n):
        row = dist[src]
        row[src] = 0
        queue = deque([src])
        while queue:
            u = queue.popleft()
            du = row[u]
            if du >= horizon:
                continue
            for v in indices[indptr[u]:indptr[u + 1]]:
                if row[v] < 0:
                    row[v] = du + 1
                    queue.append(v)
    return dist


def smooth(dist, values, present, multipliers, p, m):
    """Path-weighted average of ``values`` over balls of radius ``m``.

    Returns (smoothed, n_contributing); regions whose ball holds no present
    value get NaN and a zero count.
    """
    dist = np.asarray(dist)
    present = np.asarray(present, dtype=bool)
    reach = (dist >= 0) & (dist <= m) & present[None, :]
    w = np.where(reach, (1.0 + np.where(reach, dist, 0)) ** (-float(p)), 0.0)
    w = w * np.asarray(multipliers, dtype=np.float64)[None, :]
    x = np.where(present, values, 0.0)
    # accumulate deviations from a reference value in the ball (the region's
    # own value when present) so constant fields and m=0 come back exactly
    first = np.argmax(reach, axis=1)
    ref = np.where(present, x, x[first])
    den = w.sum(axis=1)
    num = (w * (x[None, :] - ref[:, None])).sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(den > 0, ref + num / np.where(den > 0, den, 1.0), np.nan)
    return out, reach.sum(axis=1).astype(np.int64)


def plugin_argmax(scores, row_scale, row_group, offsets):
    """Row-wise argmax of ``row_scale * scores - offsets[row_group]``.

    Ties resolve to the lowest class index (``np.argmax`` semantics).
    """
    fair = np.asarray(row_scale)[:, None] * scores - np.asarray(offsets)[row_group]
    return np.argmax(fair, axis=1).astype(np.int64)


def confusion_counts(y, y_hat, group, n_classes, n_groups):
    """Counts indexed ``[group, true class, predicted class]``."""
    flat = (np.asarray(group, dtype=np.int64) * n_classes + y) * n_classes + y_hat
    counts = np.bincount(flat, minlength=n_groups * n_classes * n_classes)
    return counts.reshape(n_groups, n_classes, n_classes).astype(np.int64)

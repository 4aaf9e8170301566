"""Calibration (ECE) and unfairness (DP, EO) measures on scored observations.

All probabilities are plain empirical frequencies. Class labels in reports
are 1-based; group labels are whatever the :class:`GroupAssignment` holds.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .graph import ball

DEFAULT_BINS = 10


class MetricError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GroupAssignment:
    """One group label per row of the table it was built for."""

    labels: np.ndarray
    descriptor: str = ""

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 1 or len(labels) == 0:
            raise MetricError("group labels must be a non-empty 1-d sequence")
        groups, codes = np.unique(labels, return_inverse=True)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "groups", tuple(g.item() if hasattr(g, "item") else g for g in groups))
        object.__setattr__(self, "codes", codes.astype(np.int64))

    @property
    def M(self):
        return len(self.groups)

    def __len__(self):
        return len(self.labels)

    @classmethod
    def from_regions(cls, region_ids, mapping, descriptor="", default=None):
        """Label rows through a region id -> group mapping.

        Rows whose region is unmapped get ``default``; if that is None they
        raise.
        """
        out = []
        for rid in region_ids:
            label = mapping.get(rid, default)
            if label is None:
                raise MetricError(f"region {rid!r} has no group in {descriptor or 'mapping'}")
            out.append(label)
        return cls(np.asarray(out), descriptor)


@dataclass(frozen=True)
class EceReport:
    B: int
    counts: tuple
    acc: tuple
    conf: tuple
    lower: tuple
    upper: tuple
    ece: float
    reduced: bool = False

    def to_dict(self):
        return {
            "B": self.B,
            "ece": self.ece,
            "reduced": self.reduced,
            "bins": [
                {"count": c, "acc": a, "conf": f, "lower": lo, "upper": hi}
                for c, a, f, lo, hi in zip(self.counts, self.acc, self.conf, self.lower, self.upper)
            ],
        }


@dataclass(frozen=True)
class DpResult:
    value: float
    witness: tuple  # (group, class)


@dataclass(frozen=True)
class EoResult:
    """``value`` is None when no (group, true class) cell met the support."""

    value: float | None
    witness: tuple | None  # (group, predicted class, true class) or (class, true class)
    support: dict = field(default_factory=dict)
    skipped: tuple = ()

    @property
    def defined(self):
        return self.value is not None


def confidence_bin_edges(confidence, B=DEFAULT_BINS):
    """Quantile edges of the confidence values, for bins shared across subsets."""
    return np.quantile(np.asarray(confidence, dtype=np.float64), np.linspace(0, 1, B + 1))


def ece(table, B=DEFAULT_BINS, edges=None):
    """Weak-form expected calibration error.

    Bin edges are the quantiles of the subset's own confidences unless
    ``edges`` (from :func:`confidence_bin_edges`) is given. Rows are binned by
    value, bin ``b`` covering ``(edge_b, edge_b+1]`` (the first bin closed),
    so tied confidences always share a bin and bins may be empty. With fewer
    than ``B`` rows, ``B`` drops to the row count and the report says so.
    """
    n = len(table)
    if n == 0:
        raise MetricError("ECE of an empty subset")
    if B < 1:
        raise ValueError("B must be >= 1")
    conf = table.confidence
    correct = (table.y == table.y_hat).astype(np.float64)

    reduced = False
    if edges is None:
        if n < B:
            B, reduced = n, True
        edges = confidence_bin_edges(conf, B)
    edges = np.asarray(edges, dtype=np.float64)
    b_eff = len(edges) - 1
    which = np.searchsorted(edges[1:-1], conf, side="left")

    counts, accs, confs = [], [], []
    total = 0.0
    for b in range(b_eff):
        idx = np.flatnonzero(which == b)
        c = len(idx)
        counts.append(c)
        if c == 0:
            accs.append(0.0)
            confs.append(0.0)
            continue
        a = float(correct[idx].mean())
        f = float(conf[idx].mean())
        accs.append(a)
        confs.append(f)
        total += c * abs(a - f)
    return EceReport(
        B=b_eff,
        counts=tuple(counts),
        acc=tuple(accs),
        conf=tuple(confs),
        lower=tuple(float(e) for e in edges[:-1]),
        upper=tuple(float(e) for e in edges[1:]),
        ece=total / n,
        reduced=reduced,
    )


def _check_groups(table, groups):
    if len(groups) != len(table):
        raise MetricError("group assignment does not cover the table")


def dp_unfairness(table, groups):
    """Max over (group, class) of |P(Y_hat=k | A=a) - P(Y_hat=k)|."""
    _check_groups(table, groups)
    K, M = table.K, groups.M
    yh = table.y_hat - 1
    cnt = kernels.confusion_counts(np.zeros_like(yh), yh, groups.codes, K, M)[:, 0, :]
    n_a = cnt.sum(axis=1)
    marginal = cnt.sum(axis=0) / len(table)
    gaps = np.abs(cnt / n_a[:, None] - marginal[None, :])
    a, k = np.unravel_index(np.argmax(gaps), gaps.shape)
    return DpResult(float(gaps[a, k]), (groups.groups[a], int(k) + 1))


def eo_unfairness(table, groups, min_support=1):
    """Max over feasible (group, class, true class) of
    |P(Y_hat=k | Y=k', A=a) - P(Y_hat=k | Y=k')|.

    A (group, true class) cell is feasible when it holds at least
    ``min_support`` rows; infeasible cells are listed in ``skipped``.
    """
    if min_support < 1:
        raise ValueError("min_support must be >= 1")
    _check_groups(table, groups)
    K, M = table.K, groups.M
    cnt = kernels.confusion_counts(table.y - 1, table.y_hat - 1, groups.codes, K, M)
    glob = cnt.sum(axis=0)
    glob_rows = glob.sum(axis=1)
    support = cnt.sum(axis=2)

    best, witness, skipped = None, None, []
    for a in range(M):
        for kt in range(K):
            if support[a, kt] < min_support or glob_rows[kt] < 1:
                if support[a, kt] > 0 or glob_rows[kt] > 0:
                    skipped.append((groups.groups[a], kt + 1))
                continue
            gaps = np.abs(cnt[a, kt] / support[a, kt] - glob[kt] / glob_rows[kt])
            k = int(np.argmax(gaps))
            if best is None or gaps[k] > best:
                best, witness = float(gaps[k]), (groups.groups[a], k + 1, kt + 1)
    sup = {
        (groups.groups[a], kt + 1): int(support[a, kt]) for a in range(M) for kt in range(K)
    }
    return EoResult(best, witness, sup, tuple(skipped))


def eo_vs_global(table, region_rows, min_support=1):
    """EO gap between a subset of rows and the whole table.

    ``region_rows`` is a boolean mask or index array into ``table``. The
    witness is (predicted class, true class).
    """
    if min_support < 1:
        raise ValueError("min_support must be >= 1")
    mask = np.zeros(len(table), dtype=bool)
    mask[region_rows] = True
    if not mask.any():
        raise MetricError("empty region subset")
    K = table.K
    zeros = np.zeros(len(table), dtype=np.int64)
    glob = kernels.confusion_counts(table.y - 1, table.y_hat - 1, zeros, K, 1)[0]
    sub = kernels.confusion_counts(
        table.y[mask] - 1, table.y_hat[mask] - 1, zeros[: mask.sum()], K, 1
    )[0]
    glob_rows, sub_rows = glob.sum(axis=1), sub.sum(axis=1)

    best, witness, skipped = None, None, []
    for kt in range(K):
        if sub_rows[kt] < min_support:
            if sub_rows[kt] > 0:
                skipped.append(kt + 1)
            continue
        gaps = np.abs(sub[kt] / sub_rows[kt] - glob[kt] / glob_rows[kt])
        k = int(np.argmax(gaps))
        if best is None or gaps[k] > best:
            best, witness = float(gaps[k]), (k + 1, kt + 1)
    sup = {kt + 1: int(sub_rows[kt]) for kt in range(K)}
    return EoResult(best, witness, sup, tuple(skipped))


@dataclass(frozen=True)
class GroupRow:
    grouping: str
    group: object
    n: int
    eo: float | None
    eo_witness: tuple | None
    ece: float
    ece_bins: int
    ece_reduced: bool


@dataclass(frozen=True)
class GroupingReport:
    descriptor: str
    dp: DpResult
    eo: EoResult
    rows: tuple


@dataclass(frozen=True)
class AuditReport:
    n: int
    K: int
    B: int
    min_support: int
    global_bins: bool
    ece: EceReport
    groupings: tuple

    def rows(self):
        return [row for g in self.groupings for row in g.rows]

    def to_dict(self):
        return {
            "n": self.n,
            "K": self.K,
            "B": self.B,
            "min_support": self.min_support,
            "global_bins": self.global_bins,
            "global_ece": self.ece.to_dict(),
            "groupings": [
                {
                    "descriptor": g.descriptor,
                    "dp": g.dp.value,
                    "dp_witness": _jsonable(g.dp.witness),
                    "eo": g.eo.value,
                    "eo_witness": _jsonable(g.eo.witness),
                    "eo_skipped": _jsonable(g.eo.skipped),
                    "groups": [
                        {
                            "group": _jsonable(r.group),
                            "n": r.n,
                            "eo_vs_global": r.eo,
                            "eo_witness": _jsonable(r.eo_witness),
                            "ece": r.ece,
                            "ece_bins": r.ece_bins,
                            "ece_reduced": r.ece_reduced,
                        }
                        for r in g.rows
                    ],
                }
                for g in self.groupings
            ],
        }


def _jsonable(obj):
    if isinstance(obj, (tuple, list)):
        return [_jsonable(o) for o in obj]
    if hasattr(obj, "item"):
        return obj.item()
    return obj


def audit(table, groupings=(), B=DEFAULT_BINS, min_support=1, global_bins=False):
    """Global ECE plus per-group EO-vs-global and ECE for each grouping."""
    edges = confidence_bin_edges(table.confidence, B) if global_bins else None
    reports = []
    for grouping in groupings:
        _check_groups(table, grouping)
        rows = []
        for code, label in enumerate(grouping.groups):
            mask = grouping.codes == code
            sub = table.take(mask)
            eo = eo_vs_global(table, mask, min_support)
            e = ece(sub, B, edges)
            rows.append(
                GroupRow(
                    grouping.descriptor, label, int(mask.sum()), eo.value, eo.witness,
                    e.ece, e.B, e.reduced,
                )
            )
        reports.append(
            GroupingReport(
                grouping.descriptor,
                dp_unfairness(table, grouping),
                eo_unfairness(table, grouping, min_support),
                tuple(rows),
            )
        )
    return AuditReport(
        n=len(table), K=table.K, B=B, min_support=min_support, global_bins=global_bins,
        ece=ece(table, B, edges), groupings=tuple(reports),
    )


@dataclass(frozen=True)
class SweepPoint:
    level: int
    n_rows: int
    n_regions: int
    eo: float | None
    ece: float | None
    random_eo: float | None = None
    random_ece: float | None = None


def sweep_levels(table, graph, center, levels, B=DEFAULT_BINS, min_support=1, baseline=None):
    """EO-vs-global and ECE on growing neighbourhood balls around ``center``.

    ``baseline`` is an optional ScoredTable over the same rows holding random
    predictions; its metrics are reported alongside. Levels with no rows
    report None.
    """
    graph.index(center)
    out = []
    for level in levels:
        regions = ball(graph, center, level)
        mask = np.isin(table.region_id, list(regions))
        if not mask.any():
            out.append(SweepPoint(level, 0, len(regions), None, None))
            continue
        point = dict(
            level=level,
            n_rows=int(mask.sum()),
            n_regions=len(regions),
            eo=eo_vs_global(table, mask, min_support).value,
            ece=ece(table.take(mask), B).ece,
        )
        if baseline is not None:
            point["random_eo"] = eo_vs_global(baseline, mask, min_support).value
            point["random_ece"] = ece(baseline.take(mask), B).ece
        out.append(SweepPoint(**point))
    return out

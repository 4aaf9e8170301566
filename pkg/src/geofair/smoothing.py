"""Neighbourhood low-pass filtering of per-region statistics.

Each region's value is replaced by a weighted mean over its ``m``-hop ball,
with weight ``1 / (1 + d) ** p`` for a region ``d`` hops away. Missing
values drop out of both numerator and denominator.
"""

import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .graph import UNREACHABLE

DEFAULT_P = 1.0
DEFAULT_M = 5


@dataclass(frozen=True)
class SmoothingParams:
    p: float = DEFAULT_P
    m: int = DEFAULT_M

    def __post_init__(self):
        if not self.p > 0:
            raise ValueError("p must be positive")
        if self.m < 0 or int(self.m) != self.m:
            raise ValueError("m must be a non-negative integer")


@dataclass(frozen=True)
class RegionField:
    """Region id -> value; ``None`` (or NaN) means missing."""

    values: dict
    descriptor: str = ""
    counts: dict = field(default_factory=dict)

    def get(self, rid):
        v = self.values.get(rid)
        return None if v is None or (isinstance(v, float) and math.isnan(v)) else v


def weight(d, params=SmoothingParams()):
    """Kernel weight for a region ``d`` hops away; 0 beyond ``m`` or unreachable."""
    if d is None or d == UNREACHABLE or d < 0 or d > params.m:
        return 0.0
    return 1.0 / (1.0 + d) ** params.p


def smooth_field(field_, graph, params=SmoothingParams(), multipliers=None):
    """Smooth ``field_`` over ``graph``.

    ``multipliers`` optionally scales each region's weight (e.g. observation
    counts); regions absent from it get 1. Returns a new field whose
    ``counts`` hold the number of contributing regions.
    """
    if graph.dist is None:
        raise ValueError("graph has no distance table")
    if params.m > graph.horizon:
        raise ValueError(f"m={params.m} exceeds graph horizon {graph.horizon}")
    unknown = set(field_.values) - set(graph.ids)
    if unknown:
        raise KeyError(f"field has regions not in graph: {sorted(unknown)[:5]}")

    x = np.array([_as_float(field_.values.get(rid)) for rid in graph.ids])
    present = ~np.isnan(x)
    mult = np.ones(len(graph.ids))
    if multipliers is not None:
        mult = np.array([float(multipliers.get(rid, 1.0)) for rid in graph.ids])
        if (mult < 0).any():
            raise ValueError("weight multipliers must be non-negative")
    out, cnt = kernels.smooth(graph.dist, x, present, mult, params.p, params.m)
    values = {rid: (None if np.isnan(v) else float(v)) for rid, v in zip(graph.ids, out)}
    counts = {rid: int(c) for rid, c in zip(graph.ids, cnt)}
    return RegionField(values, field_.descriptor, counts)


def _as_float(v):
    return math.nan if v is None else float(v)


def reaggregate(field_, parent):
    """Mean of present values grouped by ``parent`` (region id -> parent id)."""
    groups = defaultdict(list)
    for rid, v in field_.values.items():
        if rid in parent and field_.get(rid) is not None:
            groups[parent[rid]].append(float(v))
    return {key: float(np.mean(vals)) for key, vals in sorted(groups.items(), key=lambda kv: str(kv[0]))}

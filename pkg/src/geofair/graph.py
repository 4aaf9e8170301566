"""Contiguity graph over regions and hop-distance neighbourhoods."""

import csv
from dataclasses import dataclass, replace

import numpy as np
import shapely

from . import kernels

UNREACHABLE = -1
DEFAULT_HORIZON = 9


@dataclass(frozen=True, eq=False)
class RegionGraph:
    """Undirected contiguity graph in CSR form.

    ``dist`` is filled by :func:`shortest_paths`; entries beyond ``horizon``
    hops are :data:`UNREACHABLE`.
    """

    ids: tuple
    indptr: np.ndarray
    indices: np.ndarray
    dist: np.ndarray | None = None
    horizon: int = 0

    def __post_init__(self):
        object.__setattr__(self, "_index", {rid: i for i, rid in enumerate(self.ids)})

    def __len__(self):
        return len(self.ids)

    def index(self, rid):
        try:
            return self._index[rid]
        except KeyError:
            raise KeyError(f"unknown region id {rid!r}") from None

    def neighbors(self, rid):
        i = self.index(rid)
        return [self.ids[j] for j in self.indices[self.indptr[i]:self.indptr[i + 1]]]

    def adjacency_matrix(self):
        n = len(self.ids)
        mat = np.zeros((n, n), dtype=np.int8)
        for i in range(n):
            mat[i, self.indices[self.indptr[i]:self.indptr[i + 1]]] = 1
        return mat

    def edges(self):
        """Undirected edges as (id_a, id_b) with id_a < id_b, sorted."""
        out = []
        for i, a in enumerate(self.ids):
            for j in self.indices[self.indptr[i]:self.indptr[i + 1]]:
                if i < j:
                    out.append((a, self.ids[j]))
        return sorted(out)

    def distance(self, a, b):
        if self.dist is None:
            raise ValueError("distances not computed; call shortest_paths first")
        return int(self.dist[self.index(a), self.index(b)])

    @classmethod
    def from_edges(cls, ids, edges):
        """Build a graph from explicit edges; ids are sorted into node order."""
        ids = tuple(sorted(set(ids)))
        pos = {rid: i for i, rid in enumerate(ids)}
        nbrs = [set() for _ in ids]
        for a, b in edges:
            i, j = pos[a], pos[b]
            if i != j:
                nbrs[i].add(j)
                nbrs[j].add(i)
        return cls._from_neighbor_sets(ids, nbrs)

    @classmethod
    def _from_neighbor_sets(cls, ids, nbrs):
        counts = np.array([len(s) for s in nbrs], dtype=np.int64)
        indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        indices = np.fromiter(
            (j for s in nbrs for j in sorted(s)), dtype=np.int64, count=int(counts.sum())
        )
        return cls(ids=ids, indptr=indptr, indices=indices)


def build_adjacency(regions):
    """Queen contiguity: any shared point, including a single corner, is an edge."""
    ids = regions.ids
    geoms = [regions.geometries[rid] for rid in ids]
    tree = shapely.STRtree(geoms)
    # the tree's envelope filter is conservative; "intersects" is the exact test
    left, right = tree.query(geoms, predicate="intersects")
    nbrs = [set() for _ in ids]
    for i, j in zip(left.tolist(), right.tolist()):
        if i != j:
            nbrs[i].add(j)
            nbrs[j].add(i)
    return RegionGraph._from_neighbor_sets(ids, nbrs)


def shortest_paths(graph, horizon=DEFAULT_HORIZON):
    """Hop distances up to ``horizon`` via per-source BFS."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    return kernels.bfs_distances(graph.indptr, graph.indices, int(horizon))


def with_distances(graph, horizon=DEFAULT_HORIZON):
    return replace(graph, dist=shortest_paths(graph, horizon), horizon=int(horizon))


def region_graph(regions, horizon=DEFAULT_HORIZON):
    """Adjacency plus distance table in one step."""
    return with_distances(build_adjacency(regions), horizon)


def ball(graph, center, m):
    """Regions within ``m`` hops of ``center`` (always includes the center)."""
    if graph.dist is None:
        raise ValueError("distances not computed; call shortest_paths first")
    if m < 0 or m > graph.horizon:
        raise ValueError(f"radius {m} outside [0, {graph.horizon}]")
    row = graph.dist[graph.index(center)]
    return frozenset(graph.ids[j] for j in np.flatnonzero((row >= 0) & (row <= m)))


def write_edges_csv(graph, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id_a", "id_b"])
        writer.writerows(graph.edges())

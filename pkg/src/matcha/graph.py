"""Undirected simple graphs, Laplacians, seeded generators and graph files.

Randomness comes from numpy's ``PCG64`` bit generator (a 128-bit-state
permuted congruential generator with 64-bit output) seeded through
``numpy.random.SeedSequence(seed)``; i.e. ``numpy.random.default_rng(seed)``.
Given the same seed, every generator here draws the same sequence on every
platform numpy supports.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import GenerationFailed, GraphFormatError
from .linalg import deflated_eigh

CONNECTIVITY_TOL = 1e-9
MAX_RETRIES = 1000


@dataclass(frozen=True)
class Topology:
    """A simple undirected graph on nodes ``0..m-1``.

    ``edges`` is stored as a sorted tuple of ``(i, j)`` pairs with ``i < j``.
    """

    m: int
    edges: tuple

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise GraphFormatError(f"node count must be a positive integer, got {self.m}")
        seen = set()
        for e in self.edges:
            i, j = int(e[0]), int(e[1])
            if i == j:
                raise GraphFormatError(f"self-loop at node {i}")
            if not (0 <= i < self.m and 0 <= j < self.m):
                raise GraphFormatError(f"edge ({i}, {j}) has an endpoint outside [0, {self.m})")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise GraphFormatError(f"duplicate edge {key}")
            seen.add(key)
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "edges", tuple(sorted(seen)))

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.m, dtype=int)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    @property
    def max_degree(self) -> int:
        return int(self.degrees().max()) if self.m else 0

    def neighbors(self) -> list:
        adj = [[] for _ in range(self.m)]
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        return [sorted(a) for a in adj]

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.m, self.m), dtype=int)
        for i, j in self.edges:
            a[i, j] = a[j, i] = 1
        return a


def path_graph(m: int) -> Topology:
    return Topology(m, tuple((i, i + 1) for i in range(m - 1)))


def complete_graph(m: int) -> Topology:
    return Topology(m, tuple((i, j) for i in range(m) for j in range(i + 1, m)))


def star_graph(leaves: int) -> Topology:
    return Topology(leaves + 1, tuple((0, j) for j in range(1, leaves + 1)))


def laplacian_int(topology: Topology) -> np.ndarray:
    """D - A with integer entries."""
    a = topology.adjacency()
    return np.diag(a.sum(axis=1)) - a


def laplacian(topology: Topology) -> np.ndarray:
    return laplacian_int(topology).astype(float)


def algebraic_connectivity(lap) -> float:
    """Second-smallest Laplacian eigenvalue (lambda_2).

    Computed as the smallest eigenvalue of the Laplacian compressed onto the
    subspace orthogonal to the all-ones vector.
    """
    w, _ = deflated_eigh(lap)
    if w.size == 0:
        return 0.0
    return max(0.0, float(w[0]))


def is_connected(topology: Topology) -> bool:
    if topology.m == 1:
        return True
    return algebraic_connectivity(laplacian(topology)) > CONNECTIVITY_TOL


def _retry(build, seed: int, require_connected: bool) -> Topology:
    attempts = MAX_RETRIES if require_connected else 1
    for offset in range(attempts):
        topo = build(np.random.default_rng(seed + offset))
        if not require_connected or is_connected(topo):
            return topo
    raise GenerationFailed(f"no connected graph after {MAX_RETRIES} draws starting at seed {seed}")


def generate_erdos_renyi(m: int, edge_prob: float, seed: int, require_connected: bool = True) -> Topology:
    """G(m, p): each pair ``i < j`` (lexicographic order) kept with probability p.

    When ``require_connected`` is set, disconnected draws are discarded and the
    seed is incremented, up to 1000 attempts.
    """
    if m < 2:
        raise ValueError("need at least two nodes")
    if not 0.0 < edge_prob <= 1.0:
        raise ValueError("edge_prob must lie in (0, 1]")
    iu, ju = np.triu_indices(m, k=1)

    def build(rng):
        keep = rng.random(iu.size) < edge_prob
        return Topology(m, tuple(zip(iu[keep].tolist(), ju[keep].tolist())))

    return _retry(build, seed, require_connected)


def _geometric_points(m: int, rng) -> np.ndarray:
    return rng.random((m, 2))


def _pair_distances(points):
    m = points.shape[0]
    iu, ju = np.triu_indices(m, k=1)
    return iu, ju, np.linalg.norm(points[iu] - points[ju], axis=1)


def generate_geometric(m: int, radius: float, seed: int, require_connected: bool = True) -> Topology:
    """Random geometric graph: m uniform points in the unit square, edge iff
    Euclidean distance <= radius."""
    if m < 2:
        raise ValueError("need at least two nodes")
    if not 0.0 < radius <= math.sqrt(2.0):
        raise ValueError("radius must lie in (0, sqrt(2)]")

    def build(rng):
        iu, ju, dist = _pair_distances(_geometric_points(m, rng))
        keep = dist <= radius
        return Topology(m, tuple(zip(iu[keep].tolist(), ju[keep].tolist())))

    return _retry(build, seed, require_connected)


def geometric_with_max_degree(m: int, target_degree: int, seed: int):
    """Geometric graph whose maximal degree is exactly ``target_degree``.

    For a fixed point set the radius is grown edge by edge (sorted by length);
    each added edge raises the maximal degree by at most one, so the target is
    always hit.  The smallest such radius giving a connected graph is used,
    moving to the next seed when the point set cannot satisfy both.
    Returns ``(topology, radius, seed_used)``.
    """
    if not 1 <= target_degree <= m - 1:
        raise ValueError("target degree must lie in [1, m-1]")
    for offset in range(MAX_RETRIES):
        rng = np.random.default_rng(seed + offset)
        iu, ju, dist = _pair_distances(_geometric_points(m, rng))
        order = np.argsort(dist, kind="stable")
        deg = np.zeros(m, dtype=int)
        edges = []
        for idx in order:
            i, j = int(iu[idx]), int(ju[idx])
            deg[i] += 1
            deg[j] += 1
            if deg.max() > target_degree:
                break
            edges.append((i, j))
            if deg.max() == target_degree:
                topo = Topology(m, tuple(edges))
                if is_connected(topo):
                    return topo, float(dist[idx]), seed + offset
    raise GenerationFailed(f"no connected geometric graph with max degree {target_degree}")


def topology_to_dict(topology: Topology) -> dict:
    return {"m": topology.m, "edges": [list(e) for e in topology.edges]}


def topology_from_dict(data: dict) -> Topology:
    """Parse ``{"m": int, "edges": [[i, j], ...]}``; rejects i >= j, duplicates."""
    try:
        m = data["m"]
        raw = data["edges"]
    except (KeyError, TypeError) as exc:
        raise GraphFormatError("graph JSON needs 'm' and 'edges'") from exc
    if not isinstance(m, int) or isinstance(m, bool):
        raise GraphFormatError("'m' must be an integer")
    edges = []
    for e in raw:
        if len(e) != 2 or not all(isinstance(x, int) and not isinstance(x, bool) for x in e):
            raise GraphFormatError(f"malformed edge {e!r}")
        i, j = e
        if i == j:
            raise GraphFormatError(f"self-loop at node {i}")
        if i > j:
            raise GraphFormatError(f"edge {e!r} must be written with i < j")
        edges.append((i, j))
    if len(set(edges)) != len(edges):
        raise GraphFormatError("duplicate edges in graph file")
    return Topology(m, tuple(edges))


def read_graph(path) -> Topology:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise GraphFormatError(f"{path}: {exc}") from exc
    return topology_from_dict(data)


def write_graph(topology: Topology, path) -> None:
    Path(path).write_text(json.dumps(topology_to_dict(topology)) + "\n")

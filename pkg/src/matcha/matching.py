"""Split a graph into disjoint matchings via Misra-Gries edge colouring.

Misra-Gries colours every edge with one of Delta+1 colours such that no two
edges at a vertex share a colour; each colour class is therefore a matching.
Edges are processed in lexicographic order and every choice (fan extension,
free colour) takes the smallest candidate, so the result is reproducible.
Fan growth stops as soon as the fan's tail shares a free colour with the
centre vertex, which skips the path inversion in the common case.
Colour classes are kept in colour-index order with empty classes removed.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import Topology

Edge = tuple


@dataclass(frozen=True)
class MatchingDecomposition:
    m: int
    matchings: tuple  # tuple of tuples of (i, j) edges
    laplacians: np.ndarray  # shape (M, m, m)

    @property
    def M(self) -> int:
        return len(self.matchings)

    def base_laplacian(self) -> np.ndarray:
        return self.laplacians.sum(axis=0)

    def weighted_laplacian(self, weights) -> np.ndarray:
        """sum_j weights[j] * L_j."""
        return np.tensordot(np.asarray(weights, dtype=float), self.laplacians, axes=1)


class _EdgeColoring:
    """Mutable colouring state: edge -> colour and vertex -> {colour: neighbour}."""

    def __init__(self, m: int):
        self.colour = {}
        self.at = [dict() for _ in range(m)]

    def get(self, u, v):
        return self.colour.get((u, v) if u < v else (v, u))

    def is_free(self, v, c) -> bool:
        return c not in self.at[v]

    def first_free(self, v) -> int:
        c = 0
        while c in self.at[v]:
            c += 1
        return c

    def unset(self, u, v):
        key = (u, v) if u < v else (v, u)
        c = self.colour.pop(key, None)
        if c is not None:
            del self.at[u][c]
            del self.at[v][c]
        return c

    def set(self, u, v, c):
        self.unset(u, v)
        assert c not in self.at[u] and c not in self.at[v], "colour clash"
        self.colour[(u, v) if u < v else (v, u)] = c
        self.at[u][c] = v
        self.at[v][c] = u


def _fan(state: _EdgeColoring, u, v, c) -> list:
    """Grow a fan of u from v, always taking the smallest eligible neighbour.

    Growth stops early once the colour c (free at u) is also free at the last
    fan vertex: the fan can then be rotated and closed with c directly.
    Otherwise the fan returned is maximal.
    """
    fan = [v]
    members = {v}
    at_u = state.at[u]
    while c in state.at[fan[-1]]:
        at_last = state.at[fan[-1]]
        candidates = [w for col, w in at_u.items() if col not in at_last and w not in members]
        if not candidates:
            break
        w = min(candidates)
        fan.append(w)
        members.add(w)
    return fan


def _invert_path(state: _EdgeColoring, u, c, d) -> None:
    """Swap colours c and d along the maximal c/d alternating path from u.

    c is free at u, so the path leaves u on its d-coloured edge.
    """
    path = []
    x, want = u, d
    while want in state.at[x]:
        y = state.at[x][want]
        path.append((x, y, want))
        x, want = y, (c if want == d else d)
    for x, y, _ in path:
        state.unset(x, y)
    for x, y, cc in path:
        state.set(x, y, d if cc == c else c)


def misra_gries_colouring(topology: Topology) -> dict:
    """Proper edge colouring using at most Delta+1 colours; returns edge -> colour."""
    state = _EdgeColoring(topology.m)
    for u, v in topology.edges:
        c = state.first_free(u)
        fan = _fan(state, u, v, c)
        d = c if state.is_free(fan[-1], c) else state.first_free(fan[-1])
        if c != d:
            _invert_path(state, u, c, d)
        # smallest prefix of the fan that is still a fan with d free at its end
        chosen = None
        for idx, w in enumerate(fan):
            if idx > 0:
                prev_c = state.get(u, w)
                if prev_c is None or not state.is_free(fan[idx - 1], prev_c):
                    break
            if state.is_free(w, d):
                chosen = idx
                break
        assert chosen is not None, "Misra-Gries invariant violated"
        for idx in range(chosen):
            nxt = state.unset(u, fan[idx + 1])
            state.set(u, fan[idx], nxt)
        state.set(u, fan[chosen], d)
    return dict(state.colour)


def matching_laplacian_int(matching, m: int) -> np.ndarray:
    lap = np.zeros((m, m), dtype=int)
    for i, j in matching:
        lap[i, i] += 1
        lap[j, j] += 1
        lap[i, j] -= 1
        lap[j, i] -= 1
    return lap


def matching_laplacian(matching, m: int) -> np.ndarray:
    """Laplacian of the subgraph (V, matching)."""
    return matching_laplacian_int(matching, m).astype(float)


def is_matching(edges) -> bool:
    seen = set()
    for i, j in edges:
        if i in seen or j in seen:
            return False
        seen.update((i, j))
    return True


def from_matchings(m: int, matchings) -> MatchingDecomposition:
    mats = tuple(tuple(sorted((min(i, j), max(i, j)) for i, j in mt)) for mt in matchings)
    for mt in mats:
        if not is_matching(mt):
            raise ValueError(f"not a matching: {mt}")
    laps = np.array([matching_laplacian(mt, m) for mt in mats]).reshape(len(mats), m, m)
    return MatchingDecomposition(m, mats, laps)


def decompose(topology: Topology) -> MatchingDecomposition:
    colouring = misra_gries_colouring(topology)
    classes = {}
    for edge, c in colouring.items():
        classes.setdefault(c, []).append(edge)
    return from_matchings(topology.m, [sorted(classes[c]) for c in sorted(classes)])


def decomposition_to_dict(decomp: MatchingDecomposition) -> dict:
    return {"M": decomp.M, "matchings": [[list(e) for e in mt] for mt in decomp.matchings]}


def decomposition_from_dict(data: dict, m: int) -> MatchingDecomposition:
    decomp = from_matchings(m, [[tuple(e) for e in mt] for mt in data["matchings"]])
    if decomp.M != data["M"]:
        raise ValueError("'M' does not match the number of matchings")
    return decomp


def write_decomposition(decomp: MatchingDecomposition, path) -> None:
    Path(path).write_text(json.dumps(decomposition_to_dict(decomp)) + "\n")

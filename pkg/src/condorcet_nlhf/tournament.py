"""Strict-majority digraphs and the tournament algorithms built on them.

An edge ``i -> j`` means ``p[i, j] > 1/2``.  When no pair is tied the
digraph is a tournament, and the reward, Hamiltonian-path and
decomposition routines apply.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InputError
from .prefcore import PreferenceMatrix

BEATS, TIE, LOSES = 1, 0, -1


@dataclass(frozen=True)
class MajorityDigraph:
    """Ternary relation ``rel[i, j]`` in {1 beats, 0 tie, -1 loses}."""

    rel: np.ndarray

    def __post_init__(self):
        rel = np.asarray(self.rel, dtype=np.int8)
        if rel.ndim != 2 or rel.shape[0] != rel.shape[1]:
            raise InputError("relation must be a square matrix")
        if not np.array_equal(rel, -rel.T):
            raise InputError("relation must be antisymmetric")
        if np.any(np.abs(rel) > 1):
            raise InputError("relation entries must be -1, 0 or 1")
        rel = rel.copy()
        rel.flags.writeable = False
        object.__setattr__(self, "rel", rel)

    @property
    def n(self) -> int:
        return self.rel.shape[0]

    @property
    def beats(self) -> np.ndarray:
        return self.rel == BEATS

    @property
    def is_tournament(self) -> bool:
        off = ~np.eye(self.n, dtype=bool)
        return bool(np.all(self.rel[off] != TIE))

    def out_degree(self) -> np.ndarray:
        return self.beats.sum(axis=1)

    def subgraph(self, vertices) -> "MajorityDigraph":
        idx = np.asarray(vertices, dtype=np.int64)
        return MajorityDigraph(self.rel[np.ix_(idx, idx)])

    @classmethod
    def from_beats(cls, beats) -> "MajorityDigraph":
        b = np.asarray(beats, dtype=bool)
        return cls(b.astype(np.int8) - b.T.astype(np.int8))


@dataclass(frozen=True)
class RewardConstruction:
    """Either a consistent reward vector or a witness cycle, never both."""

    reward: Optional[np.ndarray] = None
    cycle: Optional[tuple[int, ...]] = None

    @property
    def ok(self) -> bool:
        return self.reward is not None


Decomposition = list  # list[list[int]], winning block first


def digraph_from_matrix(pm: PreferenceMatrix, tie_tolerance: float = 0.0) -> MajorityDigraph:
    if tie_tolerance < 0:
        raise InputError("tie_tolerance must be nonnegative")
    if pm.counts is not None and pm.m is not None and tie_tolerance == 0:
        rel = np.sign(2 * pm.counts - pm.m)
    else:
        d = pm.p - 0.5
        rel = np.where(d > tie_tolerance, BEATS, np.where(d < -tie_tolerance, LOSES, TIE))
    rel = np.array(rel, dtype=np.int8)
    np.fill_diagonal(rel, TIE)
    return MajorityDigraph(rel)


def random_tournament(n: int, rng: np.random.Generator) -> MajorityDigraph:
    upper = np.triu(rng.random((n, n)) < 0.5, 1)
    lower = np.triu(~upper, 1).T
    return MajorityDigraph.from_beats(upper | lower)


def _require_tournament(g: MajorityDigraph, what: str):
    if not g.is_tournament:
        raise InputError(f"{what} needs a tournament (no tied pairs)")


# --------------------------------------------------------------------------
# cycles


def _rotate(cycle) -> tuple[int, ...]:
    cycle = [int(v) for v in cycle]
    k = cycle.index(min(cycle))
    return tuple(cycle[k:] + cycle[:k])


def find_triangle(g: MajorityDigraph) -> Optional[tuple[int, ...]]:
    """First Condorcet triangle ``i -> j -> k -> i`` in index order, or None."""
    b = g.beats.astype(np.int64)
    two_step = b @ b  # two_step[i, k] = #j with i -> j -> k
    hits = np.argwhere((two_step > 0) & g.beats.T)
    if hits.size == 0:
        return None
    i, k = (int(v) for v in hits[0])
    j = int(np.flatnonzero(g.beats[i] & g.beats[:, k])[0])
    return _rotate((i, j, k))


def dfs_cycle(g: MajorityDigraph) -> Optional[tuple[int, ...]]:
    """Any directed cycle among strict edges, found by iterative depth-first search."""
    n = g.n
    beats = g.beats
    color = np.zeros(n, dtype=np.int8)  # 0 new, 1 on stack, 2 done
    parent = np.full(n, -1)
    for root in range(n):
        if color[root]:
            continue
        stack = [(root, iter(np.flatnonzero(beats[root])))]
        color[root] = 1
        while stack:
            v, it = stack[-1]
            for u in it:
                if color[u] == 0:
                    color[u] = 1
                    parent[u] = v
                    stack.append((u, iter(np.flatnonzero(beats[u]))))
                    break
                if color[u] == 1:
                    cycle = [int(v)]
                    while cycle[-1] != u:
                        cycle.append(int(parent[cycle[-1]]))
                    return _rotate(cycle[::-1])
            else:
                color[v] = 2
                stack.pop()
    return None


def shortest_cycle(g: MajorityDigraph) -> Optional[tuple[int, ...]]:
    """A minimum-length directed cycle among strict edges (BFS from every vertex)."""
    beats = g.beats
    best = None
    for s in range(g.n):
        parent = {s: None}
        queue = deque([s])
        found = None
        while queue and found is None:
            v = queue.popleft()
            for u in np.flatnonzero(beats[v]):
                u = int(u)
                if u == s:
                    found = v
                    break
                if u not in parent:
                    parent[u] = v
                    queue.append(u)
        if found is not None:
            path = [found]
            while path[-1] != s:
                path.append(parent[path[-1]])
            cycle = path[::-1]
            if best is None or len(cycle) < len(best):
                best = cycle
                if len(best) == 3:
                    break
    return None if best is None else _rotate(best)


def reduce_to_triangle(g: MajorityDigraph, cycle) -> tuple[int, ...]:
    """Shrink a tournament cycle to a triangle by following chords."""
    cyc = list(cycle)
    while len(cyc) > 3:
        a, c = cyc[0], cyc[2]
        if g.rel[c, a] == BEATS:
            return _rotate(cyc[:3])
        del cyc[1]  # a -> c is a chord, skip the middle vertex
    return _rotate(cyc)


def find_condorcet_cycle(g: MajorityDigraph) -> Optional[tuple[int, ...]]:
    if g.is_tournament:
        return find_triangle(g)
    return shortest_cycle(g)


def find_condorcet_winner(g: MajorityDigraph) -> Optional[int]:
    """Index that strictly beats every other index, or None."""
    champion = 0
    for i in range(1, g.n):
        if g.rel[champion, i] != BEATS:
            champion = i
    others = np.arange(g.n) != champion
    if np.all(g.rel[champion, others] == BEATS):
        return champion
    return None


# --------------------------------------------------------------------------
# rewards and paths


def construct_reward(g: MajorityDigraph) -> RewardConstruction:
    """Scores ``n-1, ..., 0`` along the majority order, or a witness cycle."""
    _require_tournament(g, "reward construction")
    cycle = find_triangle(g)
    if cycle is not None:
        return RewardConstruction(cycle=cycle)
    reward = g.out_degree().astype(float)
    return RewardConstruction(reward=reward)


def reward_is_consistent(g: MajorityDigraph, reward) -> bool:
    """``r[i] > r[j]`` implies ``i`` strictly beats ``j``."""
    r = np.asarray(reward, dtype=float)
    higher = r[:, None] > r[None, :]
    return bool(np.all(g.beats[higher]))


def hamiltonian_path(g: MajorityDigraph) -> list[int]:
    """Insertion construction: every consecutive pair is a majority edge."""
    _require_tournament(g, "Hamiltonian path")
    rel = g.rel
    path = [0]
    for v in range(1, g.n):
        if rel[v, path[0]] == BEATS:
            path.insert(0, v)
            continue
        for k in range(len(path) - 1):
            if rel[v, path[k + 1]] == BEATS:
                # path[k] -> v holds because v did not beat path[k] earlier in the scan
                path.insert(k + 1, v)
                break
        else:
            path.append(v)
    return path


def is_hamiltonian_path(g: MajorityDigraph, path) -> bool:
    path = list(path)
    if sorted(path) != list(range(g.n)):
        return False
    return all(g.rel[a, b] == BEATS for a, b in zip(path, path[1:]))


def has_hamiltonian_cycle(g: MajorityDigraph, vertices=None) -> bool:
    """Bitmask dynamic program; fine for blocks up to ~16 vertices."""
    vs = list(range(g.n)) if vertices is None else [int(v) for v in vertices]
    k = len(vs)
    if k < 3:
        return False
    b = g.beats[np.ix_(vs, vs)]
    full = (1 << k) - 1
    # reach[mask] = bitset of end vertices of paths from vs[0] covering mask
    succ = [[int(u) for u in np.flatnonzero(b[v])] for v in range(k)]
    reach = [0] * (1 << k)
    reach[1] = 1
    for mask in range(1, 1 << k):
        ends = reach[mask]
        if not ends or not mask & 1:
            continue
        for v in range(k):
            if ends >> v & 1:
                for u in succ[v]:
                    if not mask >> u & 1:
                        reach[mask | 1 << u] |= 1 << u
    ends = reach[full]
    return any(ends >> v & 1 and b[v, 0] for v in range(1, k))


# --------------------------------------------------------------------------
# winning-set decomposition


def _winning_prefix(g: MajorityDigraph, vertices: list[int]) -> list[int]:
    sub = g.rel[np.ix_(vertices, vertices)]
    outdeg = (sub == BEATS).sum(axis=1)
    order = sorted(range(len(vertices)), key=lambda i: (-outdeg[i], vertices[i]))
    ranked = [vertices[i] for i in order]
    size = 1
    i = 0
    while i < len(ranked) and i < size:
        for j in range(len(ranked) - 1, i, -1):
            if g.rel[ranked[j], ranked[i]] == BEATS:
                size = max(size, j + 1)
                break
        i += 1
    return ranked[:size]


def winning_set_decomposition(g: MajorityDigraph) -> Decomposition:
    """Blocks ``S_1, ..., S_k``: each earlier block beats every later one.

    ``S_1`` is grown over the vertices ranked by descending out-degree
    (ties by index): whenever a lower-ranked vertex beats a member, the
    prefix is extended to include it.  The remainder is processed the
    same way.
    """
    _require_tournament(g, "decomposition")
    remaining = list(range(g.n))
    blocks = []
    while remaining:
        block = _winning_prefix(g, remaining)
        blocks.append(sorted(block))
        taken = set(block)
        remaining = [v for v in remaining if v not in taken]
    return blocks


def brute_force_decomposition(g: MajorityDigraph, max_n: int = 12) -> Decomposition:
    """Reference decomposition from out-degree thresholds.

    In a tournament on ``N`` vertices, members of a first block of size
    ``k`` beat the ``N - k`` outsiders, so their out-degree is at least
    ``N - k``; outsiders lose to all ``k`` members, so theirs is at most
    ``N - k - 1``.  The block is therefore ``{x : outdeg(x) >= N - k}``
    and must beat every vertex outside.  Every size ``k`` is tried in turn; the first one
    that satisfies both conditions gives the block.
    """
    _require_tournament(g, "decomposition")
    if g.n > max_n:
        raise InputError(f"brute-force decomposition is limited to n <= {max_n}")
    remaining = np.arange(g.n)
    blocks = []
    while remaining.size:
        sub = g.rel[np.ix_(remaining, remaining)]
        outdeg = (sub == BEATS).sum(axis=1)
        size = remaining.size
        for k in range(1, size + 1):
            inside = outdeg >= size - k
            if inside.sum() != k:
                continue
            if np.all(sub[np.ix_(inside, ~inside)] == BEATS):
                break
        blocks.append(sorted(int(v) for v in remaining[inside]))
        remaining = remaining[~inside]
    return blocks


def decomposition_is_valid(g: MajorityDigraph, blocks: Decomposition) -> bool:
    flat = sorted(v for b in blocks for v in b)
    if flat != list(range(g.n)):
        return False
    for b in blocks:
        if len(b) > 1 and not has_hamiltonian_cycle(g, b):
            return False
    for a in range(len(blocks)):
        for c in range(a + 1, len(blocks)):
            if not np.all(g.rel[np.ix_(blocks[a], blocks[c])] == BEATS):
                return False
    return True

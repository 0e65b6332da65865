"""Compiled per-trial classifiers for the Monte Carlo estimators.

A trial is an ``(m, n)`` score array; labeler ``l`` prefers ``i`` to ``j``
when ``s[l, i] > s[l, j]``.  Both routines touch only the pairs they need,
so a trial costs ``O(n m)`` unless the majority relation is acyclic.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _beats(s, i, j):
    m = s.shape[0]
    c = 0
    for k in range(m):
        if s[k, i] > s[k, j]:
            c += 1
    return 2 * c > m


@njit(cache=True, nogil=True)
def has_winner(s):
    n = s.shape[1]
    champion = 0
    for i in range(1, n):
        if not _beats(s, champion, i):
            champion = i
    for i in range(n):
        if i != champion and not _beats(s, champion, i):
            return False
    return True


@njit(cache=True, nogil=True)
def has_cycle(s):
    """Walk backwards along strict majority edges.

    From the tip of the current path, move to the first remaining vertex
    that beats it.  Reaching a vertex already on the path closes a cycle;
    a tip nobody beats is a source and is deleted.  Deleting every vertex
    proves the relation acyclic.
    """
    n = s.shape[1]
    removed = np.zeros(n, dtype=np.bool_)
    on_path = np.zeros(n, dtype=np.bool_)
    path = np.empty(n, dtype=np.int64)
    depth = 0
    start = 0
    remaining = n
    while remaining > 0:
        if depth == 0:
            while removed[start]:
                start += 1
            path[0] = start
            on_path[start] = True
            depth = 1
        v = path[depth - 1]
        u = -1
        for j in range(n):
            if j != v and not removed[j] and _beats(s, j, v):
                u = j
                break
        if u < 0:
            removed[v] = True
            on_path[v] = False
            depth -= 1
            remaining -= 1
        elif on_path[u]:
            return True
        else:
            path[depth] = u
            on_path[u] = True
            depth += 1
    return False


@njit(cache=True, nogil=True)
def classify_block(scores, cycle_out, winner_out):
    for t in range(scores.shape[0]):
        s = scores[t]
        cycle_out[t] = has_cycle(s)
        winner_out[t] = has_winner(s)

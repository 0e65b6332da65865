"""Dense tableau simplex for ``max c.x  s.t.  A x <= b, x >= 0`` with ``b >= 0``.

The origin is feasible, so no phase one is needed.  Bland's rule is used
for both the entering and the leaving variable, which rules out cycling
on the degenerate pivots that symmetric games produce.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SolverError

PIVOT_EPS = 1e-12


@dataclass
class LPResult:
    x: np.ndarray
    dual: np.ndarray
    objective: float
    pivots: int


def simplex_max(c, A, b, max_pivots: int = 10_000) -> LPResult:
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = A.shape
    if np.any(b < 0):
        raise SolverError("right-hand side must be nonnegative", {"b": b.tolist()})

    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    T[m, :n] = -c
    basis = list(range(n, n + m))

    for pivots in range(max_pivots):
        reduced = T[m, :-1]
        entering = np.flatnonzero(reduced < -PIVOT_EPS)
        if entering.size == 0:
            break
        j = int(entering[0])
        col = T[:m, j]
        rows = np.flatnonzero(col > PIVOT_EPS)
        if rows.size == 0:
            raise SolverError("linear program is unbounded", {"column": j, "pivots": pivots})
        ratios = T[rows, -1] / col[rows]
        best = ratios.min()
        tied = rows[ratios <= best + PIVOT_EPS * max(1.0, abs(best))]
        i = int(min(tied, key=lambda r: basis[r]))

        T[i] /= T[i, j]
        for r in range(m + 1):
            if r != i and T[r, j] != 0.0:
                T[r] -= T[r, j] * T[i]
        basis[i] = j
    else:
        raise SolverError("simplex pivot limit reached", {"pivots": max_pivots})

    x = np.zeros(n + m)
    x[basis] = T[:m, -1]
    return LPResult(x=x[:n], dual=T[m, n:n + m].copy(), objective=float(T[m, -1]), pivots=pivots)

"""Mixed-strategy equilibria of the symmetric constant-sum preference game.

The row player picks ``pi`` to maximise ``min_pi' pi @ p @ pi'``.  Because
``p + p.T = 1`` the game value is always 1/2.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.special import softmax

from ._simplex import simplex_max
from .errors import InputError, SolverError
from .prefcore import PreferenceMatrix

SUPPORT_THRESHOLD = 1e-9


@dataclass(frozen=True)
class NashSolution:
    strategy: np.ndarray
    value: float
    support: tuple[int, ...]
    method: str
    residual: float

    def to_json(self) -> dict:
        return {"strategy": self.strategy.tolist(), "value": self.value,
                "support": list(self.support), "residual": self.residual}


@dataclass(frozen=True)
class EnumerationResult:
    equilibria: list
    degenerate: bool

    @property
    def unique(self) -> bool:
        return len(self.equilibria) == 1 and not self.degenerate


@dataclass(frozen=True)
class EquilibriumReport:
    passed: bool
    best_response: int
    gain: float
    payoffs: np.ndarray


def mixed_strategy(weights, n: int | None = None) -> np.ndarray:
    """Validate a probability vector; tiny negative round-off is clamped to zero."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or (n is not None and w.size != n):
        raise InputError(f"strategy must be a vector of length {n}")
    if np.any(w < -1e-12) or abs(w.sum() - 1.0) > 1e-9:
        raise InputError("strategy must be nonnegative and sum to 1")
    return np.clip(w, 0.0, None)


def _matrix(p) -> np.ndarray:
    return p.p if isinstance(p, PreferenceMatrix) else np.asarray(p, dtype=float)


def _support(w: np.ndarray) -> tuple[int, ...]:
    return tuple(int(i) for i in np.flatnonzero(w > 0))


def preference_of_strategies(p, pi, pi_prime) -> float:
    """Probability that a draw from ``pi`` is preferred to a draw from ``pi_prime``."""
    mat = _matrix(p)
    n = mat.shape[0]
    pi = mixed_strategy(pi, n)
    pi_prime = mixed_strategy(pi_prime, n)
    return float(pi @ mat @ pi_prime)


def solve_nash_lp(p, tolerance: float = 1e-9) -> NashSolution:
    """Maximin strategy from the game LP, solved by the dense simplex.

    The payoff ``p + 1/2`` (the skew-symmetric ``p - 1/2`` shifted by one)
    is strictly positive, so ``max 1.w s.t. M w <= 1`` is feasible at the
    origin.  Its dual variables, normalised, are the row player's
    optimal mixture.
    """
    mat = _matrix(p)
    n = mat.shape[0]
    payoff = mat + 0.5
    lp = simplex_max(np.ones(n), payoff, np.ones(n))
    if lp.objective <= 0:
        raise SolverError("degenerate LP objective", {"objective": lp.objective})

    pi = np.clip(lp.dual, 0.0, None)
    if pi.sum() <= 0:
        raise SolverError("LP returned no dual mass", {"dual": lp.dual.tolist()})
    pi = pi / pi.sum()
    pi[pi < SUPPORT_THRESHOLD] = 0.0
    pi /= pi.sum()

    residual = float(0.5 - np.min(pi @ mat))
    if residual > tolerance:
        raise SolverError("equilibrium residual above tolerance",
                          {"residual": residual, "tolerance": tolerance, "pivots": lp.pivots,
                           "strategy": pi.tolist()})
    return NashSolution(strategy=pi, value=1.0 / lp.objective - 0.5, support=_support(pi),
                        method="simplex-lp", residual=max(residual, 0.0))


def solve_nash_support_enumeration(p, tolerance: float = 1e-9, max_n: int = 10) -> EnumerationResult:
    """All equilibria found by enumerating supports (exact oracle for small ``n``).

    On a support ``S`` an optimal strategy makes every response of ``S``
    exactly indifferent against it and no response outside ``S`` does
    better.  Rank-deficient indifference systems describe a continuum of
    equilibria; their least-norm member is reported and ``degenerate``
    is set.
    """
    mat = _matrix(p)
    n = mat.shape[0]
    if n > max_n:
        raise InputError(f"support enumeration is limited to n <= {max_n}")
    skew = mat - 0.5
    found = []
    degenerate = False
    for size in range(1, n + 1):
        for support in itertools.combinations(range(n), size):
            s = list(support)
            system = np.vstack([skew[np.ix_(s, s)].T, np.ones((1, size))])
            rhs = np.zeros(size + 1)
            rhs[-1] = 1.0
            sol, _, rank, _ = np.linalg.lstsq(system, rhs, rcond=None)
            if np.max(np.abs(system @ sol - rhs)) > 1e-9:
                continue
            if np.any(sol <= tolerance):
                continue
            pi = np.zeros(n)
            pi[s] = sol
            if np.min(pi @ skew) < -tolerance:
                continue
            if rank < size:
                degenerate = True
            if any(np.allclose(pi, e.strategy, atol=1e-9) for e in found):
                continue
            residual = float(max(0.0, 0.5 - np.min(pi @ mat)))
            found.append(NashSolution(strategy=pi, value=float(pi @ mat @ pi), support=tuple(s),
                                      method="support-enumeration", residual=residual))
    return EnumerationResult(equilibria=found, degenerate=degenerate or len(found) > 1)


def verify_equilibrium(p, pi, tolerance: float = 1e-9) -> EquilibriumReport:
    """Check that no pure response beats ``pi`` by more than ``tolerance``."""
    mat = _matrix(p)
    pi = mixed_strategy(pi, mat.shape[0])
    payoffs = mat @ pi  # P(y > pi) for each y
    best = int(np.argmax(payoffs))
    gain = float(payoffs[best] - 0.5)
    return EquilibriumReport(passed=gain <= tolerance, best_response=best, gain=gain,
                             payoffs=payoffs)


def rlhf_optimal_policy(rewards, pi_ref, tau: float) -> np.ndarray:
    """Maximiser of expected reward minus ``tau`` times KL to ``pi_ref``."""
    if not tau > 0:
        raise InputError("tau must be positive")
    r = np.asarray(rewards, dtype=float)
    ref = mixed_strategy(pi_ref, r.size)
    with np.errstate(divide="ignore"):
        logits = np.log(ref) + r / tau
    return softmax(logits)

"""Monte Carlo estimates of cycle and winner probabilities under impartial culture.

Every trial draws an ``m x n`` matrix of i.i.d. uniform scores.  Trial
``t`` reads a fixed block of a Philox counter stream keyed by
``(seed, m, n)``, so the counts do not depend on how trials are split
into batches or spread over threads.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from . import _kernels
from .errors import FitError, InputError
from .prefcore import (TAG_COLLISION, TAG_MONTE_CARLO, check_seed, cyclic_simplex_mask,
                       preference_matrix_from_profile, profile_from_rows, sample_simplex6_batch,
                       substream)
from .tournament import digraph_from_matrix, find_condorcet_cycle, find_condorcet_winner

CSV_FIELDS = ("m", "n", "trials", "cycle_hits", "winner_hits",
              "p_cycle", "se_cycle", "p_winner", "se_winner")
DEFAULT_GRID = tuple(16 * 2**k for k in range(9))  # 16 .. 4096
MIN_FIT_HITS = 100
# doubles drawn per batch; bounds memory at roughly 32 MB per worker
BATCH_DOUBLES = 1 << 22


def _se(p: float, trials: int) -> float:
    return math.sqrt(p * (1.0 - p) / trials)


@dataclass(frozen=True)
class EstimateRow:
    m: int
    n: int
    trials: int
    cycle_hits: int
    winner_hits: int
    # trials with neither a winner nor a cycle; zero whenever m is odd
    acyclic_without_winner: int = 0

    @property
    def p_cycle(self) -> float:
        return self.cycle_hits / self.trials

    @property
    def p_winner(self) -> float:
        return self.winner_hits / self.trials

    @property
    def se_cycle(self) -> float:
        return _se(self.p_cycle, self.trials)

    @property
    def se_winner(self) -> float:
        return _se(self.p_winner, self.trials)

    def csv_values(self) -> list:
        return [self.m, self.n, self.trials, self.cycle_hits, self.winner_hits,
                repr(self.p_cycle), repr(self.se_cycle), repr(self.p_winner), repr(self.se_winner)]

    def to_json(self) -> dict:
        d = asdict(self)
        d.update(p_cycle=self.p_cycle, se_cycle=self.se_cycle,
                 p_winner=self.p_winner, se_winner=self.se_winner)
        return d


@dataclass(frozen=True)
class RateFit:
    m: int
    slope: float
    intercept: float
    residual: float
    expected: float
    rows: list = field(default_factory=list)
    used: tuple = ()

    def to_json(self) -> dict:
        return {"m": self.m, "slope": self.slope, "intercept": self.intercept,
                "residual": self.residual, "expected": self.expected,
                "used_n": list(self.used), "rows": [r.to_json() for r in self.rows]}


def expected_winner_exponent(m: int) -> float:
    return 1.0 - m / math.ceil(m / 2)


def _validate(m, n, trials, threads):
    for name, v, lo in (("m", m, 1), ("n", n, 2), ("trials", trials, 1), ("threads", threads, 1)):
        if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or v < lo:
            raise InputError(f"{name} must be an integer >= {lo}, got {v!r}")


def _trial_scores(seed, m, n, start, count, stride):
    """Scores for trials ``start .. start+count-1`` as a ``(count, m, n)`` array."""
    seq = np.random.SeedSequence(seed, spawn_key=(TAG_MONTE_CARLO, m, n))
    bitgen = np.random.Philox(seq)
    # Philox advances in blocks of four doubles; each trial owns `stride` blocks
    bitgen.advance(start * stride)
    raw = np.random.Generator(bitgen).random((count, 4 * stride))
    scores = raw[:, :m * n].reshape(count, m, n)

    srt = np.sort(scores, axis=2)
    clash = np.any(srt[:, :, 1:] == srt[:, :, :-1], axis=(1, 2))
    for t in np.flatnonzero(clash):
        rng = substream(seed, TAG_COLLISION, m, n, start + int(t))
        for row in scores[t]:
            while True:
                order = np.argsort(row, kind="stable")
                dup = np.flatnonzero(row[order][1:] == row[order][:-1])
                if dup.size == 0:
                    break
                row[order[dup + 1]] = rng.random(dup.size)
    return scores


def _run_batch(args):
    seed, m, n, start, count, stride = args
    scores = _trial_scores(seed, m, n, start, count, stride)
    cyc = np.zeros(count, dtype=np.bool_)
    win = np.zeros(count, dtype=np.bool_)
    _kernels.classify_block(scores, cyc, win)
    return int(cyc.sum()), int(win.sum()), int(np.sum(~cyc & ~win))


def estimate_cycle_and_winner(m: int, n: int, trials: int, seed: int, threads: int = 1) -> EstimateRow:
    _validate(m, n, trials, threads)
    seed = check_seed(seed)
    stride = -(-(m * n) // 4)
    per_batch = max(1, BATCH_DOUBLES // (4 * stride))
    jobs = [(seed, m, n, s, min(per_batch, trials - s), stride) for s in range(0, trials, per_batch)]
    if threads == 1:
        results = list(map(_run_batch, jobs))
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_batch, jobs))
    cycles = sum(r[0] for r in results)
    winners = sum(r[1] for r in results)
    neither = sum(r[2] for r in results)
    return EstimateRow(m=m, n=n, trials=trials, cycle_hits=cycles, winner_hits=winners,
                       acyclic_without_winner=neither)


def fit_winner_rate(m: int, rows, min_hits: int = MIN_FIT_HITS) -> RateFit:
    """Least-squares slope of ``log p_winner`` against ``log n``."""
    used = [r for r in rows if r.winner_hits >= min_hits]
    if len(used) < 2:
        starved = [r.n for r in rows if r.winner_hits < min_hits]
        raise FitError(f"fewer than two rows with >= {min_hits} winner hits; starved n: {starved}",
                       starved=starved)
    x = np.log([r.n for r in used])
    y = np.log([r.p_winner for r in used])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return RateFit(m=m, slope=float(slope), intercept=float(intercept),
                   residual=float(np.sqrt(np.mean(resid**2))), expected=expected_winner_exponent(m),
                   rows=list(rows), used=tuple(r.n for r in used))


def estimate_winner_rate(m: int, n_grid=DEFAULT_GRID, trials: int = 100_000, seed: int = 0,
                         threads: int = 1, min_hits: int = MIN_FIT_HITS) -> RateFit:
    if not isinstance(m, (int, np.integer)) or m < 3:
        raise InputError("the winner-rate fit needs m >= 3")
    grid = [int(v) for v in n_grid]
    if len(grid) < 4 or any(b <= a for a, b in zip(grid, grid[1:])):
        raise InputError("n_grid must be strictly increasing with at least four points")
    rows = [estimate_cycle_and_winner(m, n, trials, seed, threads) for n in grid]
    return fit_winner_rate(m, rows, min_hits)


def estimate_simplex_cyclic(trials: int, seed: int) -> tuple[float, float]:
    """Share of uniform simplex points whose majority relation is cyclic, with its SE."""
    if not isinstance(trials, (int, np.integer)) or trials < 1:
        raise InputError("trials must be a positive integer")
    alpha = sample_simplex6_batch(trials, seed)
    p = float(np.mean(cyclic_simplex_mask(alpha)))
    return p, _se(p, trials)


def exact_cycle_winner_probability(m: int, n: int, limit: int = 10**6) -> tuple[Fraction, Fraction]:
    """Exact probabilities by enumerating all ``(n!)**m`` equiprobable profiles."""
    perms = list(itertools.permutations(range(n)))
    total = len(perms) ** m
    if total > limit:
        raise InputError(f"{total} profiles exceed the enumeration limit {limit}")
    cycles = winners = 0
    for rows in itertools.product(perms, repeat=m):
        g = digraph_from_matrix(preference_matrix_from_profile(profile_from_rows(rows)))
        cycles += find_condorcet_cycle(g) is not None
        winners += find_condorcet_winner(g) is not None
    return Fraction(cycles, total), Fraction(winners, total)


def random_tournament_cycle_probability(n: int) -> float:
    """Probability that a uniformly random tournament on ``n`` vertices has a cycle.

    Acyclic tournaments correspond one-to-one with the ``n!`` orderings.
    This is not the many-labeler limit under impartial culture, where
    pairwise majorities stay correlated; see
    :func:`many_labeler_cycle_probability_n3`.
    """
    return 1.0 - math.factorial(n) / 2.0 ** math.comb(n, 2)


def many_labeler_cycle_probability_n3() -> float:
    """Limit of the three-response cycle probability as odd ``m`` grows (Guilbaud's formula)."""
    return 0.25 - 1.5 / math.pi * math.asin(1.0 / 3.0)


def cycle_lower_bound_m3(n: int) -> float:
    """Disjoint-triples bound: ``1 - (17/18) ** floor(n / 3)`` for three labelers."""
    return 1.0 - (17.0 / 18.0) ** (n // 3)

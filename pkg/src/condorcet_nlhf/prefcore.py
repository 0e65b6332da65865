"""Preference data model: ranking profiles, preference matrices, generators.

Responses are abstract indices ``0..n-1``.  A ranking lists indices from
best to worst.  ``p[i, j]`` is the fraction of labelers (or the model
probability) preferring response ``i`` over response ``j``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import expit

from .errors import ConvergenceError, InputError

COMPLEMENT_TOL = 1e-9
SEED_LIMIT = 2**64

# spawn-key tags keeping the random streams of different samplers disjoint
TAG_PERMUTATION = 1
TAG_SCORES = 2
TAG_SIMPLEX = 3
TAG_PLACKETT_LUCE = 4
TAG_MONTE_CARLO = 5
TAG_COLLISION = 6
TAG_RANDOM_MATRIX = 7
TAG_REJECTION = 8
TAG_TRAINING = 9


def check_seed(seed) -> int:
    if isinstance(seed, (bool, np.bool_)) or not isinstance(seed, (int, np.integer)):
        raise InputError(f"seed must be an integer, got {seed!r}")
    seed = int(seed)
    if not 0 <= seed < SEED_LIMIT:
        raise InputError(f"seed must lie in [0, 2**64), got {seed}")
    return seed


def substream(seed: int, *path: int) -> np.random.Generator:
    """Counter-based Philox generator keyed by ``seed`` and a spawn path.

    Distinct paths give statistically independent streams; the same
    ``(seed, path)`` always replays the same stream.
    """
    seq = np.random.SeedSequence(check_seed(seed), spawn_key=tuple(int(k) for k in path))
    return np.random.Generator(np.random.Philox(seq))


def _check_mn(m, n):
    if not isinstance(m, (int, np.integer)) or not isinstance(n, (int, np.integer)):
        raise InputError("m and n must be integers")
    if m < 1:
        raise InputError(f"need at least one labeler, got m={m}")
    if n < 2:
        raise InputError(f"need at least two responses, got n={n}")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class RankingProfile:
    """``m`` full rankings of ``n`` responses, each listed best to worst."""

    rankings: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rankings)
        if r.ndim != 2 or r.shape[0] < 1 or r.shape[1] < 2:
            raise InputError(f"rankings must be an m x n array with m >= 1, n >= 2; got shape {r.shape}")
        if not np.issubdtype(r.dtype, np.integer):
            if not np.all(np.equal(np.mod(r, 1), 0)):
                raise InputError("rankings must contain integer response indices")
        r = r.astype(np.int64)
        n = r.shape[1]
        expected = np.arange(n)
        bad = [k for k, row in enumerate(r) if not np.array_equal(np.sort(row), expected)]
        if bad:
            raise InputError(f"rankings {bad[:5]} are not permutations of 0..{n - 1}")
        object.__setattr__(self, "rankings", _frozen(r))

    @property
    def m(self) -> int:
        return self.rankings.shape[0]

    @property
    def n(self) -> int:
        return self.rankings.shape[1]

    def positions(self) -> np.ndarray:
        """``pos[l, y]`` is the place (0 = best) labeler ``l`` gives response ``y``."""
        pos = np.empty_like(self.rankings)
        rows = np.arange(self.m)[:, None]
        pos[rows, self.rankings] = np.arange(self.n)[None, :]
        return pos

    def win_counts(self) -> np.ndarray:
        """Integer matrix ``W[i, j]`` = number of labelers ranking ``i`` above ``j``."""
        pos = self.positions()
        return (pos[:, :, None] < pos[:, None, :]).sum(axis=0).astype(np.int64)

    def to_json(self) -> dict:
        return {"m": self.m, "n": self.n, "rankings": self.rankings.tolist()}

    @classmethod
    def from_json(cls, data) -> "RankingProfile":
        try:
            m, n, rankings = int(data["m"]), int(data["n"]), data["rankings"]
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed ranking profile: {exc}") from exc
        if len(rankings) != m or any(len(row) != n for row in rankings):
            raise InputError("ranking profile dimensions disagree with m and n")
        if any(not isinstance(v, int) or isinstance(v, bool) for row in rankings for v in row):
            raise InputError("rankings must contain integers")
        return cls(np.array(rankings, dtype=np.int64).reshape(m, n))


@dataclass(frozen=True)
class PreferenceMatrix:
    """Pairwise preference probabilities with ``p[i, j] + p[j, i] = 1``.

    ``counts``/``m`` are kept when the matrix comes from a ranking profile
    so ties ``2 * W[i, j] == m`` can be detected exactly.
    """

    p: np.ndarray
    counts: Optional[np.ndarray] = field(default=None, compare=False)
    m: Optional[int] = field(default=None, compare=False)

    def __post_init__(self):
        p = np.array(self.p, dtype=float)
        if p.ndim != 2 or p.shape[0] != p.shape[1] or p.shape[0] < 1:
            raise InputError(f"preference matrix must be square, got shape {p.shape}")
        if not np.all(np.isfinite(p)):
            raise InputError("preference matrix has non-finite entries")
        if np.any(p < -COMPLEMENT_TOL) or np.any(p > 1 + COMPLEMENT_TOL):
            raise InputError("preference matrix entries must lie in [0, 1]")
        dev = np.abs(p + p.T - 1.0)
        np.fill_diagonal(dev, 0.0)
        if dev.max(initial=0.0) > COMPLEMENT_TOL:
            i, j = np.unravel_index(np.argmax(dev), dev.shape)
            raise InputError(f"complementarity violated at ({i}, {j}): {p[i, j]} + {p[j, i]} != 1")
        if np.any(np.abs(np.diag(p) - 0.5) > COMPLEMENT_TOL):
            raise InputError("diagonal of a preference matrix must be 1/2")
        np.fill_diagonal(p, 0.5)
        object.__setattr__(self, "p", _frozen(np.clip(p, 0.0, 1.0)))
        if self.counts is not None:
            object.__setattr__(self, "counts", _frozen(np.asarray(self.counts, dtype=np.int64)))

    @property
    def n(self) -> int:
        return self.p.shape[0]

    def to_json(self) -> dict:
        return {"n": self.n, "p": self.p.tolist()}

    @classmethod
    def from_json(cls, data) -> "PreferenceMatrix":
        try:
            n, rows = int(data["n"]), data["p"]
            p = np.array(rows, dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed preference matrix: {exc}") from exc
        if p.shape != (n, n):
            raise InputError(f"matrix shape {p.shape} does not match n={n}")
        return cls(p)


@dataclass(frozen=True)
class ScoreMatrix:
    """Uniform scores, one row per labeler; rows have no repeated values."""

    scores: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=float)
        if s.ndim != 2:
            raise InputError("scores must be a 2-d array")
        srt = np.sort(s, axis=1)
        if np.any(srt[:, 1:] == srt[:, :-1]):
            raise InputError("scores within a labeler's row must be distinct")
        object.__setattr__(self, "scores", _frozen(s))

    def ranking_profile(self) -> RankingProfile:
        # stable descending order; rows are distinct so stability never matters
        return RankingProfile(np.argsort(-self.scores, axis=1, kind="stable"))


@dataclass(frozen=True)
class SimplexPoint6:
    """Population shares of the six rankings of three responses.

    Index order: 0:(1>2>3) 1:(2>3>1) 2:(3>1>2) 3:(2>1>3) 4:(3>2>1) 5:(1>3>2).
    """

    alpha: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=float)
        if a.shape != (6,):
            raise InputError("a simplex point has exactly six coordinates")
        if np.any(a < 0) or abs(a.sum() - 1.0) > 1e-12:
            raise InputError("simplex coordinates must be nonnegative and sum to 1")
        object.__setattr__(self, "alpha", _frozen(a))


# rankings of (y1, y2, y3) matching the SimplexPoint6 coordinate order
SIMPLEX6_RANKINGS = ((0, 1, 2), (1, 2, 0), (2, 0, 1), (1, 0, 2), (2, 1, 0), (0, 2, 1))


@dataclass(frozen=True)
class BtlFit:
    rewards: np.ndarray
    iterations: int
    degenerate: bool = False


# --------------------------------------------------------------------------
# samplers


def profile_from_permutation_sampler(m: int, n: int, seed: int) -> RankingProfile:
    """Impartial-culture profile: each labeler draws a uniform permutation."""
    _check_mn(m, n)
    seed = check_seed(seed)
    rows = [substream(seed, TAG_PERMUTATION, k).permutation(n) for k in range(m)]
    return RankingProfile(np.array(rows, dtype=np.int64))


def _distinct_uniform_row(rng: np.random.Generator, n: int) -> np.ndarray:
    row = rng.random(n)
    while True:
        order = np.argsort(row, kind="stable")
        dup = np.flatnonzero(row[order][1:] == row[order][:-1])
        if dup.size == 0:
            return row
        row[order[dup + 1]] = rng.random(dup.size)


def profile_from_score_sampler(m: int, n: int, seed: int) -> tuple[RankingProfile, ScoreMatrix]:
    """Profile induced by i.i.d. uniform scores; each labeler ranks by descending score."""
    _check_mn(m, n)
    seed = check_seed(seed)
    scores = np.array([_distinct_uniform_row(substream(seed, TAG_SCORES, k), n) for k in range(m)])
    sm = ScoreMatrix(scores)
    return sm.ranking_profile(), sm


def profile_from_plackett_luce(rewards, m: int, seed: int) -> RankingProfile:
    """Rankings whose pairwise marginals follow the BTL model of ``rewards``.

    Uses the Gumbel-max construction of the Plackett-Luce model.
    """
    r = np.asarray(rewards, dtype=float)
    _check_mn(m, r.size)
    rng = substream(check_seed(seed), TAG_PLACKETT_LUCE)
    keys = r[None, :] + rng.gumbel(size=(m, r.size))
    return RankingProfile(np.argsort(-keys, axis=1, kind="stable"))


def sample_simplex6(seed: int) -> SimplexPoint6:
    return SimplexPoint6(sample_simplex6_batch(1, seed)[0])


def sample_simplex6_batch(count: int, seed: int) -> np.ndarray:
    """``count`` uniform points of the 5-simplex as a ``(count, 6)`` array."""
    if count < 1:
        raise InputError("count must be positive")
    e = substream(check_seed(seed), TAG_SIMPLEX).standard_exponential((count, 6))
    return e / e.sum(axis=1, keepdims=True)


def cyclic_simplex_mask(alpha: np.ndarray) -> np.ndarray:
    """Vectorised cycle test over rows of an ``(k, 6)`` array."""
    a = np.atleast_2d(alpha)
    # shares preferring y2>y3, y3>y1, y1>y2
    s = np.stack([a[:, 0] + a[:, 1] + a[:, 3],
                  a[:, 1] + a[:, 2] + a[:, 4],
                  a[:, 2] + a[:, 0] + a[:, 5]], axis=1)
    return np.all(s > 0.5, axis=1) | np.all(s < 0.5, axis=1)


def is_cyclic_simplex_point(alpha: SimplexPoint6) -> bool:
    return bool(cyclic_simplex_mask(alpha.alpha)[0])


def simplex_point_from_profile(profile: RankingProfile) -> SimplexPoint6:
    """Shares of each of the six rankings in a three-response profile."""
    if profile.n != 3:
        raise InputError("simplex coordinates only exist for n = 3")
    index = {r: k for k, r in enumerate(SIMPLEX6_RANKINGS)}
    counts = np.zeros(6)
    for row in profile.rankings:
        counts[index[tuple(int(v) for v in row)]] += 1
    return SimplexPoint6(counts / profile.m)


# --------------------------------------------------------------------------
# matrices


def preference_matrix_from_profile(profile: RankingProfile) -> PreferenceMatrix:
    w = profile.win_counts()
    p = w / profile.m
    np.fill_diagonal(p, 0.5)
    return PreferenceMatrix(p, counts=w, m=profile.m)


def preference_matrix_from_btl(rewards) -> PreferenceMatrix:
    r = np.asarray(rewards, dtype=float)
    if r.ndim != 1 or not np.all(np.isfinite(r)):
        raise InputError("rewards must be a finite vector")
    p = expit(r[:, None] - r[None, :])
    np.fill_diagonal(p, 0.5)
    return PreferenceMatrix(p)


def random_preference_matrix(n: int, seed: int, no_tie: bool = True) -> PreferenceMatrix:
    """Upper triangle i.i.d. uniform on (0, 1); entries equal to 1/2 are redrawn."""
    if n < 1:
        raise InputError("n must be positive")
    rng = substream(check_seed(seed), TAG_RANDOM_MATRIX, n)
    p = np.full((n, n), 0.5)
    iu = np.triu_indices(n, 1)
    vals = rng.random(iu[0].size)
    if no_tie:
        while np.any(vals == 0.5):
            vals[vals == 0.5] = rng.random(int(np.sum(vals == 0.5)))
    p[iu] = vals
    p[(iu[1], iu[0])] = 1.0 - vals
    return PreferenceMatrix(p)


def borda_scores(profile: RankingProfile) -> np.ndarray:
    """Number of responses ranked below each response, summed over labelers."""
    return (profile.n - 1 - profile.positions()).sum(axis=0)


# --------------------------------------------------------------------------
# BTL fitting


def fit_btl_mle(profile: RankingProfile, iterations: int = 10_000,
                tolerance: float = 1e-10, clamp: float = 20.0,
                pseudo_count: float = 0.01) -> BtlFit:
    """Maximum-likelihood BTL rewards from the pairwise outcomes of ``profile``.

    Minorization-maximization updates (Hunter, 2004) on strengths
    ``exp(r)``; rewards are reported with mean zero.  When some response
    wins all or none of its comparisons the MLE does not exist; a small
    pseudo-count is then added to every compared pair, the result is
    clamped to ``[-clamp, clamp]`` and flagged ``degenerate``.
    """
    w = profile.win_counts().astype(float)
    n = profile.n
    comparisons = w + w.T
    wins = w.sum(axis=1)
    losses = w.sum(axis=0)
    degenerate = bool(np.any(wins == 0) or np.any(losses == 0))
    if degenerate:
        w = w + pseudo_count * (comparisons > 0)
        comparisons = w + w.T
        wins = w.sum(axis=1)

    strength = np.ones(n)
    r = np.zeros(n)
    for it in range(1, iterations + 1):
        denom = comparisons / (strength[:, None] + strength[None, :])
        np.fill_diagonal(denom, 0.0)
        strength = wins / denom.sum(axis=1)
        strength /= math.exp(np.mean(np.log(strength)))
        r_new = np.log(strength)
        if np.max(np.abs(r_new - r)) < tolerance:
            r = r_new
            break
        r = r_new
    else:
        raise ConvergenceError(f"BTL fit did not converge in {iterations} iterations",
                               last=r - r.mean(), iterations=iterations)
    r = r - r.mean()
    if degenerate:
        r = np.clip(r, -clamp, clamp)
    return BtlFit(rewards=r, iterations=it, degenerate=degenerate)


def all_permutations(n: int) -> list[tuple[int, ...]]:
    return list(itertools.permutations(range(n)))


def profile_from_rows(rows: Sequence[Sequence[int]]) -> RankingProfile:
    return RankingProfile(np.array(rows, dtype=np.int64))

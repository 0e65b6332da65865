import itertools
import json
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from condorcet_nlhf.errors import ConvergenceError, InputError
from condorcet_nlhf.prefcore import (
    SIMPLEX6_RANKINGS, PreferenceMatrix, RankingProfile, ScoreMatrix, SimplexPoint6, all_permutations,
    borda_scores, check_seed, cyclic_simplex_mask, fit_btl_mle, is_cyclic_simplex_point,
    preference_matrix_from_btl, preference_matrix_from_profile, profile_from_permutation_sampler,
    profile_from_plackett_luce, profile_from_rows, profile_from_score_sampler, random_preference_matrix,
    sample_simplex6, sample_simplex6_batch, simplex_point_from_profile, substream)
from condorcet_nlhf.tournament import digraph_from_matrix, find_condorcet_cycle

from conftest import PARADOX_ROWS


# --- validation ------------------------------------------------------------

@pytest.mark.parametrize("rows", [[[0, 0, 1]], [[0, 1, 3]], [[0]], [], [[0.5, 1]]])
def test_profile_rejects_invalid_rankings(rows):
    with pytest.raises(InputError):
        RankingProfile(np.array(rows))


@pytest.mark.parametrize("p", [
    [[0.5, 0.7], [0.7, 0.5]],
    [[0.4, 0.6], [0.4, 0.5]],
    [[0.5, 1.2], [-0.2, 0.5]],
    [[0.5, np.nan], [0.5, 0.5]],
    [[0.5, 0.5, 0.5]],
])
def test_matrix_rejects_invalid(p):
    with pytest.raises(InputError):
        PreferenceMatrix(np.array(p, dtype=float))


def test_matrix_json_roundtrip_and_schema():
    pm = random_preference_matrix(5, seed=3)
    again = PreferenceMatrix.from_json(json.loads(json.dumps(pm.to_json())))
    assert np.array_equal(again.p, pm.p)
    with pytest.raises(InputError):
        PreferenceMatrix.from_json({"n": 3, "p": [[0.5, 0.5], [0.5, 0.5]]})
    with pytest.raises(InputError):
        PreferenceMatrix.from_json({"p": [[0.5]]})


def test_profile_json_roundtrip_and_schema():
    prof = profile_from_permutation_sampler(4, 5, seed=9)
    assert RankingProfile.from_json(prof.to_json()).rankings.tolist() == prof.rankings.tolist()
    with pytest.raises(InputError):
        RankingProfile.from_json({"m": 2, "n": 3, "rankings": [[0, 1, 2]]})
    with pytest.raises(InputError):
        RankingProfile.from_json({"m": 1, "n": 2, "rankings": [[0, 0]]})


@pytest.mark.parametrize("seed", [-1, 2**64, 1.5, True, "3"])
def test_bad_seeds(seed):
    with pytest.raises(InputError):
        check_seed(seed)


def test_score_matrix_requires_distinct_rows():
    with pytest.raises(InputError):
        ScoreMatrix(np.array([[0.2, 0.2, 0.3]]))


def test_simplex_point_validation():
    with pytest.raises(InputError):
        SimplexPoint6(np.array([0.5, 0.5, 0.1, 0, 0, 0]))
    with pytest.raises(InputError):
        SimplexPoint6(np.array([1.5, -0.5, 0, 0, 0, 0]))


# --- samplers --------------------------------------------------------------

@pytest.mark.parametrize("m,n", [(0, 3), (2, 1), (2.0, 3)])
def test_samplers_reject_bad_sizes(m, n):
    with pytest.raises(InputError):
        profile_from_permutation_sampler(m, n, 0)
    with pytest.raises(InputError):
        profile_from_score_sampler(m, n, 0)


def test_single_labeler_two_responses():
    for seed in range(20):
        prof = profile_from_permutation_sampler(1, 2, seed)
        assert prof.rankings.tolist() in ([[0, 1]], [[1, 0]])


def test_permutation_sampler_replays():
    a = profile_from_permutation_sampler(3, 3, seed=1234)
    b = profile_from_permutation_sampler(3, 3, seed=1234)
    assert np.array_equal(a.rankings, b.rankings)


def test_score_sampler_replays():
    a, sa = profile_from_score_sampler(2, 4, seed=77)
    b, sb = profile_from_score_sampler(2, 4, seed=77)
    assert np.array_equal(a.rankings, b.rankings)
    assert np.array_equal(sa.scores, sb.scores)


def test_score_sampler_ranks_by_descending_score():
    for seed in range(30):
        prof, scores = profile_from_score_sampler(1, 2, seed)
        s = scores.scores[0]
        assert prof.rankings[0].tolist() == ([0, 1] if s[0] > s[1] else [1, 0])
    prof, scores = profile_from_score_sampler(5, 6, 3)
    for row, s in zip(prof.rankings, scores.scores):
        assert np.all(np.diff(s[row]) < 0)


def test_permutation_sampler_uniform_over_s3():
    prof = profile_from_permutation_sampler(120_000, 3, seed=2024)
    counts = Counter(tuple(r) for r in prof.rankings.tolist())
    assert set(counts) == set(all_permutations(3))
    freqs = np.array([counts[p] for p in all_permutations(3)]) / 120_000
    assert np.all(np.abs(freqs - 1 / 6) < 0.01)
    assert stats.chisquare(freqs * 120_000).pvalue > 0.001


@pytest.mark.parametrize("n", [3, 4])
def test_samplers_are_equivalent(n):
    m = 100_000
    perms = all_permutations(n)
    a = Counter(tuple(r) for r in profile_from_permutation_sampler(m, n, seed=5).rankings.tolist())
    b = Counter(tuple(r) for r in profile_from_score_sampler(m, n, seed=6)[0].rankings.tolist())
    table = np.array([[a[p] for p in perms], [b[p] for p in perms]])
    assert stats.chi2_contingency(table).pvalue > 0.001


def test_plackett_luce_marginals_follow_btl():
    r = np.array([1.0, 0.0, -1.0])
    prof = profile_from_plackett_luce(r, 20_000, seed=4)
    emp = preference_matrix_from_profile(prof).p
    assert np.max(np.abs(emp - preference_matrix_from_btl(r).p)) < 0.02


def test_substreams_are_independent_and_replay():
    a = substream(1, 2, 3).random(5)
    assert np.array_equal(a, substream(1, 2, 3).random(5))
    assert not np.array_equal(a, substream(1, 2, 4).random(5))


# --- matrices --------------------------------------------------------------

def test_paradox_matrix():
    pm = preference_matrix_from_profile(profile_from_rows(PARADOX_ROWS))
    assert pm.p[0, 1] == pm.p[1, 2] == pm.p[2, 0] == pytest.approx(2 / 3)


def test_majority_flip_matrix(majority_flip_profile):
    p = preference_matrix_from_profile(majority_flip_profile).p
    assert p[0, 1] == 1.0
    assert p[2, 0] == pytest.approx(3 / 5)
    assert p[2, 1] == pytest.approx(3 / 5)


def test_unanimous_matrix():
    p = preference_matrix_from_profile(profile_from_rows([[0, 1, 2]])).p
    assert p[0, 1] == p[0, 2] == p[1, 2] == 1.0


def test_profile_matrix_keeps_exact_counts():
    pm = preference_matrix_from_profile(profile_from_rows([[0, 1], [1, 0]]))
    assert pm.m == 2 and pm.counts[0, 1] == 1
    assert pm.p[0, 1] == 0.5


@given(st.integers(1, 30), st.integers(2, 7), st.integers(0, 2**32))
@settings(max_examples=60, deadline=None)
def test_profile_matrix_complementarity(m, n, seed):
    p = preference_matrix_from_profile(profile_from_permutation_sampler(m, n, seed)).p
    assert np.all(np.abs(p + p.T - 1) < 1e-12)
    assert np.all(np.diag(p) == 0.5)


def test_btl_examples():
    assert preference_matrix_from_btl([0, 0]).p[0, 1] == 0.5
    assert preference_matrix_from_btl([np.log(2), 0]).p[0, 1] == pytest.approx(2 / 3, abs=1e-15)
    p = preference_matrix_from_btl([3.0, 1.0, 0.5, -2.0]).p
    iu = np.triu_indices(4, 1)
    assert np.all(p[iu] > 0.5)


def test_btl_stable_for_extreme_rewards():
    p = preference_matrix_from_btl([800.0, -800.0]).p
    assert p[0, 1] == 1.0 and p[1, 0] == 0.0


@given(st.lists(st.floats(-30, 30), min_size=2, max_size=8))
@settings(max_examples=100, deadline=None)
def test_btl_complementarity(r):
    p = preference_matrix_from_btl(r).p
    assert np.all(np.abs(p + p.T - 1) < 1e-9)


def test_btl_matrices_are_transitive():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        r = rng.normal(size=int(rng.integers(2, 11)))
        g = digraph_from_matrix(preference_matrix_from_btl(r))
        assert find_condorcet_cycle(g) is None


def test_random_matrix_has_no_ties():
    for seed in range(50):
        pm = random_preference_matrix(6, seed)
        off = pm.p[~np.eye(6, dtype=bool)]
        assert np.all(off != 0.5)


# --- simplex ---------------------------------------------------------------

def test_simplex_sample_normalized_and_replays():
    a = sample_simplex6(42)
    assert abs(a.alpha.sum() - 1) < 1e-12 and np.all(a.alpha >= 0)
    assert np.array_equal(a.alpha, sample_simplex6(42).alpha)


def test_simplex_marginal_means():
    alpha = sample_simplex6_batch(1_000_000, seed=8)
    assert np.all(np.abs(alpha.sum(axis=1) - 1) < 1e-12)
    assert np.all(np.abs(alpha.mean(axis=0) - 1 / 6) < 0.002)


def test_simplex_cycle_condition_examples():
    assert is_cyclic_simplex_point(SimplexPoint6(np.array([1 / 3, 1 / 3, 1 / 3, 0, 0, 0])))
    assert not is_cyclic_simplex_point(SimplexPoint6(np.array([1.0, 0, 0, 0, 0, 0])))


def test_simplex_cycle_matches_majority_digraph():
    # with an odd number of labelers the simplex test and the digraph agree exactly
    rng = np.random.default_rng(0)
    rows = [list(r) for r in SIMPLEX6_RANKINGS]
    for _ in range(500):
        picks = rng.integers(0, 6, size=int(rng.choice([1, 3, 5, 7, 9, 11])))
        prof = profile_from_rows([rows[k] for k in picks])
        alpha = simplex_point_from_profile(prof)
        cyclic = find_condorcet_cycle(digraph_from_matrix(preference_matrix_from_profile(prof))) is not None
        assert is_cyclic_simplex_point(alpha) == cyclic


def test_cyclic_mask_vectorised():
    pts = np.array([[1 / 3, 1 / 3, 1 / 3, 0, 0, 0], [1, 0, 0, 0, 0, 0], [0, 0, 0, 1 / 3, 1 / 3, 1 / 3]])
    assert cyclic_simplex_mask(pts).tolist() == [True, False, True]


# --- BTL fitting and Borda -------------------------------------------------

def test_btl_fit_recovers_generating_rewards():
    r = np.array([1.0, 0.0, -1.0])
    fit = fit_btl_mle(profile_from_plackett_luce(r, 10_000, seed=21))
    assert not fit.degenerate
    assert np.all(np.abs(fit.rewards - r) < 0.1)
    assert abs(fit.rewards.mean()) < 1e-12


def test_btl_fit_symmetric_profile():
    prof = profile_from_rows([list(p) for p in itertools.permutations(range(3))])
    assert np.all(np.abs(fit_btl_mle(prof).rewards) < 1e-8)


def test_btl_fit_prefers_average_rank(majority_flip_profile):
    fit = fit_btl_mle(majority_flip_profile)
    assert int(np.argmax(fit.rewards)) == 0
    assert int(np.argmax(borda_scores(majority_flip_profile))) == 0


def test_btl_fit_degenerate_is_flagged_and_clamped():
    fit = fit_btl_mle(profile_from_rows([[0, 1, 2], [0, 2, 1]]), clamp=5.0)
    assert fit.degenerate
    assert np.all(np.abs(fit.rewards) <= 5.0)
    assert int(np.argmax(fit.rewards)) == 0


def test_btl_fit_nonconvergence_carries_last_iterate():
    prof = profile_from_plackett_luce([2.0, 0.0, -2.0, 1.0], 200, seed=1)
    with pytest.raises(ConvergenceError) as info:
        fit_btl_mle(prof, iterations=2, tolerance=1e-15)
    assert info.value.last is not None and info.value.last.shape == (4,)


def test_borda_scores():
    prof = profile_from_rows([[0, 1, 2], [2, 0, 1]])
    assert borda_scores(prof).tolist() == [3, 1, 2]

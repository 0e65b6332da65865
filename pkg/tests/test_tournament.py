import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from condorcet_nlhf.errors import InputError
from condorcet_nlhf.prefcore import (preference_matrix_from_btl, preference_matrix_from_profile,
                                     profile_from_rows, random_preference_matrix)
from condorcet_nlhf.tournament import (
    BEATS, LOSES, TIE, MajorityDigraph, brute_force_decomposition, construct_reward,
    decomposition_is_valid, dfs_cycle, digraph_from_matrix, find_condorcet_cycle,
    find_condorcet_winner, find_triangle, hamiltonian_path, has_hamiltonian_cycle,
    is_hamiltonian_path, random_tournament, reward_is_consistent, shortest_cycle,
    winning_set_decomposition)

from conftest import half_matrix


def tournaments(max_n=10):
    @st.composite
    def build(draw):
        n = draw(st.integers(1, max_n))
        bits = draw(st.lists(st.booleans(), min_size=n * (n - 1) // 2, max_size=n * (n - 1) // 2))
        beats = np.zeros((n, n), dtype=bool)
        for (i, j), b in zip(itertools.combinations(range(n), 2), bits):
            beats[i, j] = b
            beats[j, i] = not b
        return MajorityDigraph.from_beats(beats)
    return build()


def exhaustive_cycle(g):
    """Reference: a relation is acyclic iff some ordering has every strict edge pointing forward."""
    for order in itertools.permutations(range(g.n)):
        pos = {v: k for k, v in enumerate(order)}
        if all(pos[i] < pos[j] for i in range(g.n) for j in range(g.n) if g.beats[i, j]):
            return False
    return True


def is_cycle(g, cyc):
    return len(cyc) >= 3 and all(g.beats[cyc[k], cyc[(k + 1) % len(cyc)]] for k in range(len(cyc)))


# --- construction ----------------------------------------------------------

def test_paradox_digraph(paradox):
    g = digraph_from_matrix(paradox)
    assert g.is_tournament
    assert g.beats[0, 1] and g.beats[1, 2] and g.beats[2, 0]


def test_half_matrix_is_all_ties():
    g = digraph_from_matrix(half_matrix(4))
    assert not g.is_tournament
    assert np.all(g.rel == TIE)


def test_table2_winner_row(table2):
    g = digraph_from_matrix(table2)
    assert all(g.beats[3, j] for j in range(3))


def test_tie_tolerance():
    p = np.array([[0.5, 0.505], [0.495, 0.5]])
    from condorcet_nlhf.prefcore import PreferenceMatrix
    assert digraph_from_matrix(PreferenceMatrix(p)).beats[0, 1]
    assert digraph_from_matrix(PreferenceMatrix(p), tie_tolerance=0.01).rel[0, 1] == TIE
    with pytest.raises(InputError):
        digraph_from_matrix(PreferenceMatrix(p), tie_tolerance=-1)


def test_even_m_tie_is_exact():
    pm = preference_matrix_from_profile(profile_from_rows([[0, 1, 2], [2, 1, 0]]))
    g = digraph_from_matrix(pm)
    assert g.rel[0, 2] == TIE and not g.is_tournament


@given(tournaments())
@settings(max_examples=200, deadline=None)
def test_relation_is_antisymmetric(g):
    assert np.array_equal(g.rel, -g.rel.T)
    assert np.all(np.diag(g.rel) == TIE)


def test_digraph_rejects_inconsistent_relation():
    with pytest.raises(InputError):
        MajorityDigraph(np.array([[0, 1], [1, 0]]))


# --- cycles and winners ----------------------------------------------------

def test_paradox_cycle_and_no_winner(paradox):
    g = digraph_from_matrix(paradox)
    assert find_condorcet_cycle(g) == (0, 1, 2)
    assert find_condorcet_winner(g) is None


def test_unanimous_has_no_cycle():
    g = digraph_from_matrix(preference_matrix_from_profile(profile_from_rows([[2, 0, 1, 3]])))
    assert find_condorcet_cycle(g) is None
    assert find_condorcet_winner(g) == 2


def test_table2_winner(table2):
    g = digraph_from_matrix(table2)
    assert find_condorcet_winner(g) == 3
    assert find_condorcet_cycle(g) == (0, 1, 2)


def test_majority_flip_winner(majority_flip_profile):
    g = digraph_from_matrix(preference_matrix_from_profile(majority_flip_profile))
    assert find_condorcet_winner(g) == 2


def test_cycle_detection_agrees_with_triangle_scan():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        g = random_tournament(int(rng.integers(1, 13)), rng)
        tri, dfs = find_triangle(g), dfs_cycle(g)
        assert (tri is None) == (dfs is None)
        if tri is not None:
            assert len(tri) == 3 and is_cycle(g, tri)
            assert is_cycle(g, dfs)


@given(tournaments(7))
@settings(max_examples=150, deadline=None)
def test_cycle_detection_matches_exhaustive(g):
    found = find_condorcet_cycle(g)
    assert (found is not None) == exhaustive_cycle(g)
    if found is not None:
        assert is_cycle(g, found)


def test_cycles_on_non_tournaments():
    rng = np.random.default_rng(5)
    for _ in range(300):
        n = int(rng.integers(2, 8))
        rel = np.triu(rng.integers(-1, 2, size=(n, n)), 1)
        g = MajorityDigraph(rel - rel.T)
        found = find_condorcet_cycle(g)
        assert (found is not None) == exhaustive_cycle(g)
        if found is not None:
            assert is_cycle(g, found)
            assert is_cycle(g, shortest_cycle(g))


@given(tournaments())
@settings(max_examples=200, deadline=None)
def test_winner_properties(g):
    w = find_condorcet_winner(g)
    beats_all = [v for v in range(g.n) if all(g.beats[v, u] for u in range(g.n) if u != v)]
    assert len(beats_all) <= 1
    assert w == (beats_all[0] if beats_all else None)
    if w is None and g.n > 1:
        assert find_condorcet_cycle(g) is not None


# --- rewards ---------------------------------------------------------------

def test_reward_for_total_order():
    g = digraph_from_matrix(preference_matrix_from_profile(profile_from_rows([[2, 0, 1]])))
    built = construct_reward(g)
    assert built.ok and built.reward.tolist() == [1.0, 0.0, 2.0]
    assert reward_is_consistent(g, built.reward)


def test_reward_refused_with_witness(paradox):
    built = construct_reward(digraph_from_matrix(paradox))
    assert not built.ok and built.cycle == (0, 1, 2)


def test_reward_requires_tournament():
    with pytest.raises(InputError):
        construct_reward(digraph_from_matrix(half_matrix(3)))


def test_btl_reward_order_is_preserved():
    rng = np.random.default_rng(3)
    for _ in range(100):
        r = rng.normal(size=int(rng.integers(2, 10)))
        built = construct_reward(digraph_from_matrix(preference_matrix_from_btl(r)))
        assert built.ok
        assert np.array_equal(np.argsort(-built.reward), np.argsort(-r))


@given(tournaments())
@settings(max_examples=200, deadline=None)
def test_reward_iff_acyclic_iff_outdegree_permutation(g):
    built = construct_reward(g)
    acyclic = find_condorcet_cycle(g) is None
    assert built.ok == acyclic
    assert acyclic == (sorted(g.out_degree().tolist()) == list(range(g.n)))
    if built.ok:
        assert reward_is_consistent(g, built.reward)
        assert sorted(built.reward.tolist()) == list(range(g.n))


# --- Hamiltonian paths and cycles -----------------------------------------

def test_hamiltonian_path_base_case():
    beats = np.zeros((3, 3), dtype=bool)
    beats[0, 1] = beats[1, 2] = beats[0, 2] = True
    assert hamiltonian_path(MajorityDigraph.from_beats(beats)) == [0, 1, 2]


def test_hamiltonian_path_through_cycle(paradox):
    g = digraph_from_matrix(paradox)
    assert is_hamiltonian_path(g, hamiltonian_path(g))


@given(tournaments())
@settings(max_examples=300, deadline=None)
def test_hamiltonian_path_always_valid(g):
    path = hamiltonian_path(g)
    assert sorted(path) == list(range(g.n))
    assert is_hamiltonian_path(g, path)


def test_hamiltonian_path_requires_tournament():
    with pytest.raises(InputError):
        hamiltonian_path(digraph_from_matrix(half_matrix(3)))


@given(tournaments(6))
@settings(max_examples=100, deadline=None)
def test_hamiltonian_cycle_matches_permutation_search(g):
    expect = g.n >= 3 and any(
        all(g.beats[c[k], c[(k + 1) % g.n]] for k in range(g.n))
        for c in ((0,) + rest for rest in itertools.permutations(range(1, g.n))))
    assert has_hamiltonian_cycle(g) == expect


# --- decomposition ---------------------------------------------------------

def test_table2_decomposition(table2):
    g = digraph_from_matrix(table2)
    assert winning_set_decomposition(g) == [[3], [0, 1, 2]]
    assert brute_force_decomposition(g) == [[3], [0, 1, 2]]


def test_unanimous_decomposition_is_ranking():
    g = digraph_from_matrix(preference_matrix_from_profile(profile_from_rows([[3, 1, 0, 2]])))
    assert winning_set_decomposition(g) == [[3], [1], [0], [2]]


def test_table4_single_block(table4):
    g = digraph_from_matrix(table4)
    assert winning_set_decomposition(g) == [[0, 1, 2, 3]]


def test_paradox_brute_force_single_block(paradox):
    assert brute_force_decomposition(digraph_from_matrix(paradox)) == [[0, 1, 2]]


def test_single_vertex():
    g = MajorityDigraph(np.zeros((1, 1), dtype=np.int8))
    assert brute_force_decomposition(g) == [[0]]
    assert winning_set_decomposition(g) == [[0]]


def test_decomposition_limits():
    with pytest.raises(InputError):
        brute_force_decomposition(random_tournament(13, np.random.default_rng(0)))
    with pytest.raises(InputError):
        winning_set_decomposition(digraph_from_matrix(half_matrix(3)))


def test_decomposition_matches_oracle_on_random_tournaments():
    rng = np.random.default_rng(17)
    for _ in range(1000):
        g = random_tournament(int(rng.integers(1, 11)), rng)
        fast = winning_set_decomposition(g)
        assert fast == brute_force_decomposition(g)
        assert decomposition_is_valid(g, fast)
        assert (len(fast[0]) == 1) == (find_condorcet_winner(g) is not None)


@given(tournaments())
@settings(max_examples=200, deadline=None)
def test_decomposition_invariants(g):
    blocks = winning_set_decomposition(g)
    assert decomposition_is_valid(g, blocks)
    for a, b in itertools.combinations(range(len(blocks)), 2):
        assert all(g.rel[i, j] == BEATS and g.rel[j, i] == LOSES for i in blocks[a] for j in blocks[b])


def test_random_matrices_decompose():
    for seed in range(200):
        g = digraph_from_matrix(random_preference_matrix(7, seed))
        assert decomposition_is_valid(g, winning_set_decomposition(g))

import numpy as np
import pytest

from condorcet_nlhf.prefcore import PreferenceMatrix, preference_matrix_from_profile, profile_from_rows

TABLE2 = np.array([[0.50, 0.51, 0.46, 0.47],
                   [0.49, 0.50, 0.51, 0.48],
                   [0.54, 0.49, 0.50, 0.49],
                   [0.53, 0.52, 0.51, 0.50]])

TABLE4 = np.array([[0.5, 2 / 3, 1 / 3, 1 / 3],
                   [1 / 3, 0.5, 2 / 3, 2 / 3],
                   [2 / 3, 1 / 3, 0.5, 2 / 3],
                   [2 / 3, 1 / 3, 1 / 3, 0.5]])

PARADOX_ROWS = [[0, 1, 2], [1, 2, 0], [2, 0, 1]]
# two labelers rank y1 > y2 > y3, three rank y3 > y1 > y2
MAJORITY_FLIP_ROWS = [[0, 1, 2]] * 2 + [[2, 0, 1]] * 3


@pytest.fixture
def table2():
    return PreferenceMatrix(TABLE2)


@pytest.fixture
def table4():
    return PreferenceMatrix(TABLE4)


@pytest.fixture
def paradox():
    return preference_matrix_from_profile(profile_from_rows(PARADOX_ROWS))


@pytest.fixture
def majority_flip_profile():
    return profile_from_rows(MAJORITY_FLIP_ROWS)


def half_matrix(n):
    return PreferenceMatrix(np.full((n, n), 0.5))

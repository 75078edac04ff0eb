import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ltearp import analytic as an
from ltearp import oracles
from ltearp.harness import markov_max_error

GRID = (0.0, 0.3, 0.9)
probs = st.floats(0.0, 1.0)


def test_off_only_when_no_arrivals():
    st_ = an.markov_steady_state(0.2, 0.1, 0.0, 2, 4)
    assert st_.b_off == 1.0
    assert st_.total() == 1.0


def test_failure_free_chain():
    s = an.markov_steady_state(0.0, 0.0, 0.4, 3, 5)
    assert s.b_drop == 0.0
    assert s.b_connect == pytest.approx(0.4 * s.b_off)
    assert s.b_backoff.sum() == 0.0


def test_reference_vector_against_numeric_solve():
    assert markov_max_error(0.2, 0.1, 0.3, 2, 4) <= 1e-10


@pytest.mark.parametrize("m", [0, 2, 9])
@pytest.mark.parametrize("w_c", [4, 20])
def test_grid_against_numeric(m, w_c):
    worst = max(markov_max_error(pc, pe, pon, m, w_c) for pc, pe, pon in itertools.product(GRID, GRID, (0.05, 0.5, 1.0)))
    assert worst <= 1e-10


@given(probs, probs, st.floats(0.0, 1.0), st.integers(0, 12), st.integers(1, 30))
def test_normalization(pc, pe, pon, m, w_c):
    assert an.markov_steady_state(pc, pe, pon, m, w_c).total() == pytest.approx(1.0, abs=1e-12)


@given(probs, probs, st.floats(1e-3, 1.0), st.integers(0, 12), st.integers(1, 30))
def test_outage_identity(pc, pe, pon, m, w_c):
    s = an.markov_steady_state(pc, pe, pon, m, w_c)
    expected = an.one_shot_failure(pc, pe) ** (m + 1)
    assert abs(s.outage - expected) <= 1e-12


def test_certain_collision_drops_everything():
    s = an.markov_steady_state(1.0, 0.0, 0.5, 3, 4)
    assert s.outage == 1.0
    num = oracles.markov_numeric(1.0, 0.0, 0.5, 3, 4)
    assert num["drop"] / (num["drop"] + num["connect"]) == pytest.approx(1.0)


def test_numeric_vector_sums_to_one():
    num = oracles.markov_numeric(0.2, 0.1, 0.3, 2, 4)
    assert sum(num.values()) == pytest.approx(1.0, abs=1e-12)


def test_numeric_p_on_zero():
    num = oracles.markov_numeric(0.3, 0.3, 0.0, 2, 4)
    assert num["off"] == pytest.approx(1.0, abs=1e-12)


def test_transition_matrix_is_stochastic():
    P = oracles.markov_transition_matrix(0.3, 0.2, 0.4, 3, 5)
    assert np.allclose(P.sum(axis=1), 1.0)

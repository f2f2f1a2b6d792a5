from fractions import Fraction as Fr

import pytest
from hypothesis import given, settings, strategies as st

from radialmp.exponents import (
    ProblemParams,
    WindowError,
    admissible_pair,
    alpha_star,
    alpha_star_branches,
    casewise_decay_exponent,
    decay_rate,
    decay_rate_origin,
    exponent_window,
    q_star,
    sobolev_exponents,
)
from radialmp.potentials import parse_potential
from radialmp.exponents import derive_infinity_pair, derive_origin_pair

EX1 = ProblemParams(4, 2, Fr(3, 2), Fr(1, 2), Fr(1, 2), 0, Fr(3, 2), 0)
EX2 = ProblemParams(4, Fr(3, 2), -2, -1, 0, 0, 0, Fr(1, 2))


def test_ex1_windows_exact():
    w = exponent_window(EX1)
    assert (w.q1Lo, w.q1Hi, w.q2Lo) == (1, Fr(18, 7), Fr(22, 5))
    assert w.existence_window(2) == (2, Fr(18, 7), Fr(22, 5))


def test_ex2_values():
    w = exponent_window(EX2)
    p, N = Fr(3, 2), 4
    assert w.q1Hi == p * N / (N - p - 2) == 12
    assert w.q2Lo == p * (2 * N - p - 1) / (2 * (N - p - 1)) == Fr(11, 4)
    assert sobolev_exponents(EX2)[1] == p * N / (N - p - 1) == 4


def test_admissible_examples():
    assert admissible_pair(EX2, 2, 4)
    assert not admissible_pair(EX1, Fr(18, 7), 5)
    assert not admissible_pair(EX1, 2, 5)  # q1 = p fails existence
    assert admissible_pair(EX1, Fr(5, 2), 5, existence=False)


def test_decay_rate_outside_window():
    with pytest.raises(WindowError):
        decay_rate_origin(EX1, 3)


def test_invalid_params():
    with pytest.raises(ValueError):
        ProblemParams(4, 2, 3, 0)
    with pytest.raises(ValueError):
        ProblemParams(2, 2, 0, 0)


tuples = st.tuples(st.integers(3, 8), st.fractions(1, 8, max_denominator=50),
                   st.fractions(0, 1, max_denominator=50), st.fractions(0, 1, max_denominator=50))


def _unpack(t):
    N, p, u, beta = t
    p = min(max(p, Fr(101, 100)), N - Fr(1, 100))
    a = p - N * (1 - u) if u < 1 else p
    if a <= p - N:
        a = p - N + Fr(1, 100)
    return a, beta, p, N


@settings(max_examples=300, deadline=None)
@given(tuples)
def test_identity_exact(t):
    a, beta, p, N = _unpack(t)
    first, second = alpha_star_branches(a, 1 / p, p, N)
    assert first == second
    assert q_star(a, alpha_star(a, beta, p, N), beta, p, N) == max(1, p * beta)


@settings(max_examples=300, deadline=None)
@given(tuples, st.fractions(-4, 4, max_denominator=20), st.fractions(1, 10, max_denominator=20))
def test_casewise_exponent_matches_closed_form(t, alpha, q):
    a, beta, p, N = _unpack(t)
    assert casewise_decay_exponent(a, alpha, beta, p, N, q) == decay_rate(a, alpha, beta, p, N, q)


def test_derivation_ex1():
    K = parse_potential("max(r^(1/2), r^(3/2))", positive=True)
    V = parse_potential("min(1, r^(-3/2))")
    o = derive_origin_pair(K, V, Fr(3, 2), 2, 4)
    assert (o.alpha, o.beta) == (Fr(1, 2), 0)
    i = derive_infinity_pair(K, V, Fr(1, 2), 2, 4)
    assert i.bound == Fr(22, 5) and (i.alpha, i.beta) == (Fr(3, 2), 0)

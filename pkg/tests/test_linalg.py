import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spaceable import linalg
from spaceable import sequences as sq
from spaceable.linalg import BudgetExceeded, HeadMatrix, Independence
from spaceable.partition import BlockPartition

import oracles

entries = st.fractions(min_value=F(-4), max_value=F(4), max_denominator=3)


def test_rank_examples():
    assert linalg.exact_rank([[1, 0, 0], [0, 1, 0], [0, 0, 1]]) == 3
    assert linalg.exact_rank([[1, 2], [2, 4]]) == 1


def test_random_5x8_matches_minor_expansion():
    rng = random.Random(5)
    for _ in range(20):
        M = [[F(rng.randint(-2, 2), rng.randint(1, 2)) for _ in range(8)] for _ in range(5)]
        if rng.random() < 0.4:
            M[4] = [a + 2 * b for a, b in zip(M[0], M[1])]
        assert linalg.exact_rank(M) == oracles.brute_rank(M)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.lists(entries, min_size=4, max_size=4), min_size=1, max_size=4))
def test_rank_property(M):
    assert linalg.exact_rank(M) == oracles.brute_rank(M)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.lists(entries, min_size=3, max_size=3), min_size=3, max_size=3))
def test_det_matches_leibniz(M):
    assert linalg.exact_det(M) == oracles._det(M)


def test_certified_independence_examples():
    e1, e2 = sq.unit_vector(1, 1), sq.unit_vector(2, 1)
    assert linalg.certified_independent(HeadMatrix.of([e1, e2], 2)) is Independence.INDEPENDENT
    dup = HeadMatrix.of([sq.witness_vector(1), sq.witness_vector(1)], 6)
    assert linalg.certified_independent(dup) is Independence.INCONCLUSIVE


def test_witness_blocks_on_first_support_columns():
    part = BlockPartition(first_block=2)
    b2, b3 = sq.scaled_block(1, 2, partition=part), sq.scaled_block(1, 3, partition=part)
    cols = [part.position(2, 1), part.position(3, 1)]
    H = HeadMatrix(tuple(tuple(s.coordinate(j) for j in cols) for s in (b2, b3)))
    assert linalg.certified_independent(H) is Independence.INDEPENDENT


def test_irrational_heads_certify_by_enclosure():
    y = sq.witness_vector(1)
    z = sq.witness_vector(1, BlockPartition(scheme="dyadic", first_block=2))
    H = HeadMatrix.of([y, z], 6)
    assert not H.is_exact()
    assert linalg.certified_independent(H) is Independence.INDEPENDENT


def test_find_n0_examples():
    es = [sq.unit_vector(j, 1) for j in (1, 2, 3)]
    assert linalg.find_n0(es) == 3
    a = sq.finite_sequence({1: 1}, 1)
    b = sq.finite_sequence({1: 1, 2: 1}, 1)
    assert linalg.find_n0([a, b]) == 2


def test_dependent_rows_exhaust_budget():
    x = sq.witness_vector(1)
    y = sq.witness_vector(1, BlockPartition(first_block=2, offset=1))
    with pytest.raises(BudgetExceeded) as info:
        linalg.find_n0([x, sq.linear_combination([2], [x]), y], max_n=12)
    assert info.value.diagnostics["max_n"] == 12


def random_heads(rng, n=3, length=20):
    rows = []
    for _ in range(n):
        row = [F(0)] * length
        for j in rng.sample(range(length), rng.randint(1, 5)):
            row[j] = F(rng.randint(-5, 5), rng.randint(1, 3))
        rows.append(row)
    return rows


def test_find_n0_matches_brute_force_on_random_triples():
    rng = random.Random(11)
    checked = 0
    while checked < 25:
        rows = random_heads(rng)
        expected = oracles.brute_min_prefix(rows, 20)
        if expected is None:
            continue
        seqs = [sq.finite_sequence({j + 1: v for j, v in enumerate(r) if v}, 1) for r in rows]
        assert linalg.find_n0(seqs, max_n=20) == expected
        checked += 1

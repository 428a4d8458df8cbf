from hypothesis import given, settings
from hypothesis import strategies as st

from spaceable.partition import (
    BlockPartition,
    SubPartition,
    block_count_upto,
    cantor_pair,
    cantor_unpair,
    dyadic_pair,
    dyadic_unpair,
    levels_disjoint,
    partition_from_json,
)

nat = st.integers(min_value=0, max_value=10**6)

partitions = st.builds(
    lambda scheme, first, offset, stride, res: BlockPartition(scheme, first, offset, stride, res % stride + 1),
    st.sampled_from(["diagonal", "dyadic"]),
    st.integers(1, 4),
    st.integers(0, 5),
    st.integers(1, 4),
    st.integers(0, 3),
)


@given(nat, nat)
def test_pairings_invert(a, b):
    assert cantor_unpair(cantor_pair(a, b)) == (a, b)
    assert dyadic_unpair(dyadic_pair(a % 64, b)) == (a % 64, b)


def test_pairings_are_bijections_on_an_initial_segment():
    assert sorted(cantor_pair(*cantor_unpair(z)) for z in range(5000)) == list(range(5000))
    assert sorted(dyadic_pair(*dyadic_unpair(z)) for z in range(5000)) == list(range(5000))


@settings(max_examples=60)
@given(partitions, st.integers(0, 6), st.integers(1, 200))
def test_position_locate_round_trip(part, dk, r):
    k = part.first_block + dk
    j = part.position(k, r)
    assert part.locate(j) == (k, r)
    assert part.position(k, r + 1) > j


@settings(max_examples=30)
@given(partitions)
def test_blocks_cover_the_lattice(part):
    offset, stride, start = part.lattice()
    for j in range(1, 400):
        loc = part.locate(j)
        on_lattice = j >= start and (j - start) % stride == 0
        assert (loc is not None) == on_lattice


@settings(max_examples=30)
@given(partitions, st.integers(0, 4), st.integers(1, 3000))
def test_block_count_upto(part, dk, N):
    k = part.first_block + dk
    brute = sum(1 for j in range(1, N + 1) if part.locate(j) is not None and part.locate(j)[0] == k)
    assert block_count_upto(part, k, N) == brute


def test_subpartition_stays_in_its_block():
    outer = BlockPartition(first_block=1, offset=1)
    sub = SubPartition(outer, 3, BlockPartition(first_block=2))
    for k in range(2, 6):
        for r in range(1, 30):
            j = sub.position(k, r)
            assert outer.locate(j)[0] == 3
            assert sub.locate(j) == (k, r)


def test_levels_disjoint_matches_brute_force():
    a = BlockPartition(stride=3, residue=1)
    b = BlockPartition(stride=3, residue=2)
    c = BlockPartition(stride=2, residue=1)
    assert levels_disjoint(a.levels(1), b.levels(1))
    # strides 3 and 2 meet; the check must not claim disjointness
    assert not levels_disjoint(a.levels(1), c.levels(1))
    d = BlockPartition()
    assert levels_disjoint(d.levels(1), d.levels(2))
    assert not levels_disjoint(d.levels(2), d.levels(2))


def test_json_round_trip():
    outer = BlockPartition("dyadic", 2, 3, 2, 2)
    sub = SubPartition(outer, 4, BlockPartition(first_block=3))
    for part in (outer, sub):
        assert partition_from_json(part.to_json()) == part

"""Splittings of the positive integers into infinitely many infinite blocks.

A partition maps a pair (block k, rank r) to a position j and back.  Positions
inside a block are strictly increasing in r.  Blocks are numbered from
``first_block`` so that witness constructions can start at the first index where
their exponents make sense.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gcd, isqrt


def cantor_pair(a: int, b: int) -> int:
    s = a + b
    return s * (s + 1) // 2 + b


def cantor_unpair(z: int) -> tuple[int, int]:
    w = (isqrt(8 * z + 1) - 1) // 2
    b = z - w * (w + 1) // 2
    return w - b, b


def dyadic_pair(a: int, b: int) -> int:
    return (1 << a) * (2 * b + 1) - 1


def dyadic_unpair(z: int) -> tuple[int, int]:
    z += 1
    a = (z & -z).bit_length() - 1
    return a, ((z >> a) - 1) // 2


_SCHEMES = {
    "diagonal": (cantor_pair, cantor_unpair),
    "dyadic": (dyadic_pair, dyadic_unpair),
}

ALL_BLOCKS = None


@dataclass(frozen=True)
class BlockPartition:
    """Blocks of the lattice {offset + residue + stride*m : m >= 0}.

    With the defaults the lattice is all of N; ``offset`` excludes head indices
    1..offset and ``stride``/``residue`` carve out a congruence class so that
    several partitions can live side by side with disjoint supports.
    """

    scheme: str = "diagonal"
    first_block: int = 1
    offset: int = 0
    stride: int = 1
    residue: int = 1

    def __post_init__(self):
        if self.scheme not in _SCHEMES:
            raise ValueError(f"unknown pairing scheme {self.scheme!r}")
        if self.first_block < 1 or self.offset < 0 or self.stride < 1:
            raise ValueError("invalid partition parameters")
        if not 1 <= self.residue <= self.stride:
            raise ValueError("residue must lie in 1..stride")

    def position(self, k: int, r: int) -> int:
        if k < self.first_block or r < 1:
            raise ValueError(f"no element ({k}, {r}) in this partition")
        pair, _ = _SCHEMES[self.scheme]
        m = pair(k - self.first_block, r - 1)
        return self.offset + self.residue + self.stride * m

    def locate(self, j: int) -> tuple[int, int] | None:
        z = j - self.offset - self.residue
        if z < 0 or z % self.stride:
            return None
        _, unpair = _SCHEMES[self.scheme]
        a, b = unpair(z // self.stride)
        return a + self.first_block, b + 1

    def lattice(self) -> tuple[int, int, int]:
        return self.offset, self.stride, self.offset + self.residue

    def levels(self, k) -> tuple:
        return ((self, k),)

    def to_json(self) -> dict:
        return {
            "kind": "block",
            "scheme": self.scheme,
            "first_block": self.first_block,
            "offset": self.offset,
            "stride": self.stride,
            "residue": self.residue,
        }


@dataclass(frozen=True)
class SubPartition:
    """Partition of one block of ``outer`` by ``inner`` (inner indexes the block's ranks)."""

    outer: "Partition"
    block: int
    inner: BlockPartition

    @property
    def first_block(self) -> int:
        return self.inner.first_block

    def position(self, k: int, r: int) -> int:
        return self.outer.position(self.block, self.inner.position(k, r))

    def locate(self, j: int) -> tuple[int, int] | None:
        loc = self.outer.locate(j)
        if loc is None or loc[0] != self.block:
            return None
        return self.inner.locate(loc[1])

    def levels(self, k) -> tuple:
        return self.outer.levels(self.block) + ((self.inner, k),)

    def to_json(self) -> dict:
        return {
            "kind": "sub",
            "outer": self.outer.to_json(),
            "block": self.block,
            "inner": self.inner.to_json(),
        }


Partition = BlockPartition | SubPartition


def partition_from_json(obj: dict) -> Partition:
    kind = obj.get("kind")
    if kind == "block":
        return BlockPartition(
            scheme=obj["scheme"],
            first_block=int(obj["first_block"]),
            offset=int(obj["offset"]),
            stride=int(obj["stride"]),
            residue=int(obj["residue"]),
        )
    if kind == "sub":
        return SubPartition(
            partition_from_json(obj["outer"]), int(obj["block"]), partition_from_json(obj["inner"])
        )
    raise ValueError(f"unknown partition kind {kind!r}")


def block_count_upto(partition: Partition, k: int, N: int) -> int:
    """Number of elements of block k at positions <= N."""
    if N < partition.position(k, 1):
        return 0
    lo, hi = 1, 2
    while partition.position(k, hi) <= N:
        lo, hi = hi, hi * 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if partition.position(k, mid) <= N:
            lo = mid
        else:
            hi = mid
    return lo


def _lattices_disjoint(a: BlockPartition, b: BlockPartition) -> bool:
    _, sa, ra = a.lattice()
    _, sb, rb = b.lattice()
    g = gcd(sa, sb)
    return (ra - rb) % g != 0


def levels_disjoint(la: tuple, lb: tuple) -> bool:
    """Decide (soundly, possibly pessimistically) whether two block supports are disjoint.

    ``la``/``lb`` are chains of (partition, block) from outermost to innermost;
    a block of ``ALL_BLOCKS`` stands for the union of all blocks of that level.
    """
    for (pa, ka), (pb, kb) in zip(la, lb):
        if pa == pb:
            if ka is ALL_BLOCKS or kb is ALL_BLOCKS:
                return False
            if ka != kb:
                return True
            continue
        if isinstance(pa, BlockPartition) and isinstance(pb, BlockPartition):
            return _lattices_disjoint(pa, pb)
        return False
    return False

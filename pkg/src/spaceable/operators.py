"""Non-injective bounded operators l_p -> l_q and the masked embedding Psi.

Only two finitely describable operator classes are modelled: diagonal operators
and finite matrix blocks (zero outside the block).  Both admit exact coordinate
evaluation, exact collision checks and simple norm bounds.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from . import numerics as nx
from . import sequences as sq
from .linalg import HeadMatrix, Independence, certified_independent
from .numerics import RealExpr, as_fraction, format_rational
from .partition import BlockPartition, Partition, partition_from_json
from .sequences import Converges, SymbolicSequence


class MissingWitness(ValueError):
    pass


class InconclusiveProbe(ArithmeticError):
    pass


Vector = Mapping[int, Fraction]  # finitely supported, 1-based


def _vec(v) -> dict:
    if isinstance(v, SymbolicSequence):
        raise TypeError("operators act on finitely supported vectors here")
    return {int(j): as_fraction(c) for j, c in dict(v).items() if as_fraction(c) != 0}


def _vec_json(v: Vector) -> dict:
    return {str(j): format_rational(c) for j, c in sorted(v.items())}


def _vec_from_json(obj: dict) -> dict:
    return {int(j): nx.parse_rational(c) for j, c in obj.items()}


class SequenceOperator:
    p: Fraction
    q: Fraction
    witness: tuple | None

    def image(self, v: Vector, j: int) -> RealExpr:
        raise NotImplementedError

    def norm_bound(self) -> RealExpr:
        raise NotImplementedError

    def image_head(self, v: Vector, N: int) -> list:
        return [self.image(v, j) for j in range(1, N + 1)]


@dataclass(frozen=True)
class Diagonal(SequenceOperator):
    """(T v)_j = (base + d_j) v_j."""

    d: SymbolicSequence
    p: Fraction
    q: Fraction
    base: Fraction = Fraction(0)
    witness: tuple | None = None

    def __post_init__(self):
        if self.q < self.p and self.base != 0:
            raise ValueError("a diagonal l_p -> l_q operator with q < p needs entries in l_s")

    def entry(self, j: int) -> RealExpr:
        return nx.add(self.base, self.d.coordinate(j))

    def image(self, v, j):
        c = _vec(v).get(j, Fraction(0))
        return nx.ZERO if c == 0 else nx.mul(c, self.entry(j))

    def norm_bound(self):
        if self.q >= self.p:
            return nx.add(abs(self.base), sq.sup_bound(self.d))
        s = 1 / (1 / self.q - 1 / self.p)
        v = sq.lq_membership(self.d, s)
        if not isinstance(v, Converges):
            raise ValueError("diagonal is not certified in l_s")
        return nx.power(v.bound, 1 / s)

    def to_json(self):
        out = {
            "type": "diagonal",
            "p": format_rational(self.p),
            "q": format_rational(self.q),
            "base": format_rational(self.base),
            "d": self.d.to_json(),
        }
        if self.witness is not None:
            out["witness"] = [_vec_json(w) for w in self.witness]
        return out


@dataclass(frozen=True)
class ColumnFinite(SequenceOperator):
    """(T v)_i = sum_j M[i][j] v_j for i, j <= n; zero elsewhere."""

    matrix: tuple  # n x n tuple of Fraction rows
    p: Fraction
    q: Fraction
    witness: tuple | None = None

    @classmethod
    def of(cls, rows, p, q, witness=None):
        M = tuple(tuple(as_fraction(v) for v in row) for row in rows)
        if any(len(r) != len(M) for r in M):
            raise ValueError("active block must be square")
        w = None if witness is None else tuple(_vec(x) for x in witness)
        return cls(M, as_fraction(p), as_fraction(q), w)

    @property
    def n(self) -> int:
        return len(self.matrix)

    def image(self, v, j):
        if j > self.n:
            return nx.ZERO
        v = _vec(v)
        return nx.const(sum((self.matrix[j - 1][k - 1] * c for k, c in v.items() if k <= self.n), Fraction(0)))

    def norm_bound(self):
        # ||Mv||_q <= n^(1/q) max_i |(Mv)_i| <= n^(1/q) C sum_j |v_j| <= n^(1/q + max(0, 1 - 1/p)) C ||v||_p
        C = max((abs(x) for row in self.matrix for x in row), default=Fraction(0))
        e = 1 / self.q + max(Fraction(0), 1 - 1 / self.p)
        return nx.mul(C, nx.power(self.n, e)) if self.n else nx.ZERO

    def to_json(self):
        out = {
            "type": "column_finite",
            "p": format_rational(self.p),
            "q": format_rational(self.q),
            "matrix": [[format_rational(x) for x in row] for row in self.matrix],
        }
        if self.witness is not None:
            out["witness"] = [_vec_json(w) for w in self.witness]
        return out


@dataclass(frozen=True)
class MaskedOperator(SequenceOperator):
    """(T_k v)_j = (T v)_j on block k of the partition, 0 elsewhere."""

    base: SequenceOperator
    partition: Partition
    k: int

    @property
    def p(self):
        return self.base.p

    @property
    def q(self):
        return self.base.q

    @property
    def witness(self):
        return self.base.witness

    def in_block(self, j: int) -> bool:
        loc = self.partition.locate(j)
        return loc is not None and loc[0] == self.k

    def image(self, v, j):
        return self.base.image(v, j) if self.in_block(j) else nx.ZERO

    def norm_bound(self):
        # the image is a coordinate restriction of T v
        return self.base.norm_bound()


@dataclass(frozen=True)
class RowScaled(SequenceOperator):
    """(S v)_j = c_j (T v)_j with c_j = default off the partition blocks, block_coeffs[k] + default on block k."""

    base: SequenceOperator
    partition: Partition
    default: Fraction
    block_coeffs: tuple  # sorted (k, a) pairs

    @property
    def p(self):
        return self.base.p

    @property
    def q(self):
        return self.base.q

    @property
    def witness(self):
        return self.base.witness

    def factor(self, j: int) -> Fraction:
        loc = self.partition.locate(j)
        extra = dict(self.block_coeffs).get(loc[0], Fraction(0)) if loc else Fraction(0)
        return self.default + extra

    def image(self, v, j):
        c = self.factor(j)
        return nx.ZERO if c == 0 else nx.mul(c, self.base.image(v, j))

    def max_factor(self) -> Fraction:
        vals = [abs(self.default)] + [abs(self.default + a) for _, a in self.block_coeffs]
        return max(vals)

    def norm_bound(self):
        return nx.mul(self.max_factor(), self.base.norm_bound())


def mask_operator(T: SequenceOperator, k: int, partition: Partition, j0: int | None = None) -> MaskedOperator:
    if j0 is not None:
        loc = partition.locate(j0)
        if loc is not None and loc[0] == k:
            raise ValueError(f"j0 = {j0} lies in block {k}")
    return MaskedOperator(T, partition, k)


def psi(a: Sequence, T: SequenceOperator, partition: Partition) -> RowScaled:
    """a_1 T + sum_{j >= 2} a_j T_{j-1}; masks come from blocks of one partition."""
    a = [as_fraction(x) for x in a]
    if not a:
        a = [Fraction(0)]
    first = partition.first_block
    blocks = tuple((first + j - 1, c) for j, c in enumerate(a[1:], start=1) if c != 0)
    return RowScaled(T, partition, a[0], blocks)


def psi_norm_check(a: Sequence, T: SequenceOperator, partition: Partition) -> bool:
    """Certify ||Psi(a)|| <= ||a||_1 ||T||."""
    op = psi(a, T, partition)
    l1 = sum((abs(as_fraction(x)) for x in a), Fraction(0))
    return nx.certify_le(op.norm_bound(), nx.mul(l1, T.norm_bound()))


def _diff_vanishes(op: SequenceOperator, x: Vector, y: Vector, j: int) -> bool:
    d = nx.add(op.image(x, j), nx.mul(-1, op.image(y, j)))
    return d.is_zero()


def verify_noninjective(op: SequenceOperator, N: int, witness: tuple | None = None) -> bool:
    w = witness if witness is not None else op.witness
    if w is None:
        raise MissingWitness("no collision witness attached")
    x, y = (_vec(v) for v in w)
    differs = any(x.get(j, 0) != y.get(j, 0) for j in range(1, N + 1))
    return differs and all(_diff_vanishes(op, x, y, j) for j in range(1, N + 1))


def collision_holds(op: SequenceOperator, N: int) -> bool:
    """op(x) == op(y) exactly on coordinates 1..N for the attached pair."""
    x, y = (_vec(v) for v in op.witness)
    return all(_diff_vanishes(op, x, y, j) for j in range(1, N + 1))


def _nonzero(e: RealExpr) -> bool:
    if e.is_exact():
        return e.value != 0
    return nx.compare_strict(nx.abs_(e), 0, Fraction(1, 2**80)) is nx.Comparison.GREATER


def independence_j0_check(
    T: SequenceOperator, masks: Sequence[MaskedOperator], z: Vector, j0: int, search: int = 64
) -> bool:
    """Certify that {T, T_1, ..., T_k} is linearly independent by probing T z.

    Column j0 isolates T (no mask reaches j0); for each mask one coordinate of
    its block where (T z) is nonzero isolates that mask.
    """
    z = _vec(z)
    if not _nonzero(T.image(z, j0)):
        raise InconclusiveProbe(f"(T z)_{j0} is not certified nonzero")
    cols = [j0]
    for M in masks:
        if M.in_block(j0):
            return False
        chosen = None
        for r in range(1, search + 1):
            j = M.partition.position(M.k, r)
            if _nonzero(T.image(z, j)):
                chosen = j
                break
        if chosen is None:
            return False
        cols.append(chosen)
    ops = [T, *masks]
    H = HeadMatrix(tuple(tuple(op.image(z, j) for j in cols) for op in ops))
    return certified_independent(H) is Independence.INDEPENDENT


# ---------------------------------------------------------------------------
# the demo operator


def demo_operator(p, q) -> tuple[Diagonal, BlockPartition, int]:
    """Diagonal T with d_1 = 0 (so T e_1 = T(2 e_1)), j0 = 2, masks on blocks avoiding 1 and 2."""
    p, q = as_fraction(p), as_fraction(q)
    # entries bounded when q >= p, in l_s (1/s = 1/q - 1/p) otherwise
    r = p if q >= p else 1 / (1 / q - 1 / p)
    k0 = sq.first_block_index(r)
    d = sq.witness_vector(r, BlockPartition(first_block=k0, offset=1))
    d = SymbolicSequence(p, d.components)
    T = Diagonal(d, p, q, Fraction(0), ({1: Fraction(1)}, {1: Fraction(2)}))
    masks_partition = BlockPartition(first_block=1, offset=2)
    return T, masks_partition, 2


def ones(n: int) -> dict:
    return {j: Fraction(1) for j in range(1, n + 1)}


def operator_from_json(obj: dict) -> SequenceOperator:
    t = obj.get("type")
    witness = obj.get("witness")
    w = None if witness is None else tuple(_vec_from_json(x) for x in witness)
    if t == "diagonal":
        return Diagonal(
            sq.sequence_from_json(obj["d"]),
            nx.parse_rational(obj["p"]),
            nx.parse_rational(obj["q"]),
            nx.parse_rational(obj["base"]),
            w,
        )
    if t == "column_finite":
        return ColumnFinite.of(
            [[nx.parse_rational(x) for x in row] for row in obj["matrix"]],
            nx.parse_rational(obj["p"]),
            nx.parse_rational(obj["q"]),
            w,
        )
    raise ValueError(f"unknown operator type {t!r}")

"""Extending a finite-dimensional subspace of l_p minus the smaller l_q spaces.

Given n independent sequences, the operator T sends a finitely supported
coefficient vector (a_0, a_1, ...) to

    a_0 b_0 + ... + a_{n-1} b_{n-1} + sum_{i >= n} a_i eps_i,

where eps_i carries the first basis vector's coordinates off a sparse index set
O onto the i-th slice O_i of O.  Also here: the two obstructions (countable
dimension, and the finite-dimensional set that is not extendable).
"""

from __future__ import annotations

import threading
from bisect import bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from . import numerics as nx
from . import sequences as sq
from .linalg import HeadMatrix, Independence, certified_independent, find_n0
from .numerics import Comparison, as_fraction, format_rational
from .partition import BlockPartition, SubPartition, cantor_pair, cantor_unpair
from .sequences import (
    Converges,
    DivergenceCertificate,
    Diverges,
    Enumeration,
    NumericEvidence,
    RelocatedTail,
    SymbolicSequence,
)


class SelectionStalled(RuntimeError):
    pass


class PreconditionError(ValueError):
    pass


class InconclusiveCoordinate(ArithmeticError):
    pass


# ---------------------------------------------------------------------------
# cardinal tags for reports


@dataclass(frozen=True)
class Finite:
    n: int

    def to_json(self):
        return {"finite": self.n}


@dataclass(frozen=True)
class Aleph0:
    def to_json(self):
        return "aleph0"


@dataclass(frozen=True)
class Continuum:
    def to_json(self):
        return "continuum"


# ---------------------------------------------------------------------------
# index selection


@dataclass(frozen=True)
class SelectionCheck:
    level: int
    index: int
    bounds: tuple  # rational upper bounds on |b_t(index)|, one per basis vector

    def holds(self) -> bool:
        return all(b < Fraction(1, 2**self.level) for b in self.bounds)

    def to_json(self):
        return {
            "level": self.level,
            "index": self.index,
            "bounds": [format_rational(b) for b in self.bounds],
        }


class IndexSelection:
    """Greedy alpha_1 < alpha_2 < ... with every |b_t(alpha_l)| < 2**-l certified.

    ``eps_floor`` is relative: level l refines comparisons down to 2**-l * eps_floor.

    Materialised lazily and append-only; extension is guarded by a lock so
    concurrent readers see a consistent prefix.
    """

    _registry: dict = {}
    _registry_lock = threading.Lock()

    def __init__(self, seqs: tuple, n0: int, max_scan: int, eps_floor: Fraction):
        self.seqs = seqs
        self.n0 = n0
        self.max_scan = max_scan
        self.eps_floor = eps_floor
        self._alphas: list[int] = []
        self._checks: list[SelectionCheck] = []
        self.skips: list[tuple[int, int]] = []  # (level, index) left undecided
        self._lock = threading.Lock()

    @classmethod
    def get(cls, seqs, n0: int, max_scan: int = 200000, eps_floor=Fraction(1, 2**60)):
        key = (tuple(seqs), n0, max_scan, as_fraction(eps_floor))
        with cls._registry_lock:
            sel = cls._registry.get(key)
            if sel is None:
                sel = cls(*key)
                cls._registry[key] = sel
            return sel

    def config(self) -> dict:
        return {
            "n0": self.n0,
            "max_scan": self.max_scan,
            "eps_floor": format_rational(self.eps_floor),
        }

    def _eligible(self, j: int, level: int):
        bound = Fraction(1, 2**level)
        highs = []
        for s in self.seqs:
            c = nx.abs_(s.coordinate(j))
            if c.is_zero():
                highs.append(Fraction(0))
                continue
            # the floor is relative to the level bound, so deep levels stay decidable
            verdict = nx.compare_strict(c, bound, bound * self.eps_floor)
            if verdict is Comparison.GREATER:
                return None
            if verdict is Comparison.INCONCLUSIVE:
                self.skips.append((level, j))
                return None
            iv = nx.enclose(c, bound / 2**20)
            if iv.hi >= bound:
                # compare_strict already separated; tighten until the archive shows it
                iv = nx.enclose(c, (bound - iv.lo) / 2)
            highs.append(iv.hi)
        return SelectionCheck(level, j, tuple(highs))

    def _extend_to(self, count: int) -> None:
        while len(self._alphas) < count:
            level = len(self._alphas) + 1
            j = self._alphas[-1] + 1 if self._alphas else self.n0 + 1
            for _ in range(self.max_scan):
                check = self._eligible(j, level)
                if check is not None:
                    self._alphas.append(j)
                    self._checks.append(check)
                    break
                j += 1
            else:
                raise SelectionStalled(
                    f"no eligible index for level {level} within {self.max_scan} candidates"
                )

    def materialize(self, count: int) -> None:
        if len(self._alphas) >= count:
            return
        with self._lock:
            self._extend_to(count)

    def alpha(self, l: int) -> int:
        """The l-th selected index (1-based)."""
        self.materialize(l)
        return self._alphas[l - 1]

    def alphas(self, count: int) -> list[int]:
        self.materialize(count)
        return self._alphas[:count]

    def checks(self, count: int) -> list[SelectionCheck]:
        self.materialize(count)
        return self._checks[:count]

    def _cover(self, position: int) -> None:
        # materialise until the last alpha is >= position
        while not self._alphas or self._alphas[-1] < position:
            self.materialize(len(self._alphas) + 1)

    def rank(self, position: int) -> int | None:
        """l with alpha_l == position, else None."""
        self._cover(position)
        l = bisect_right(self._alphas, position)
        return l if l and self._alphas[l - 1] == position else None

    def count_upto(self, position: int) -> int:
        self._cover(position)
        return bisect_right(self._alphas, position)


@dataclass(frozen=True, eq=False)
class SliceEnumeration(Enumeration):
    """O_i: the elements of O whose O-rank t has cantor_unpair(t - 1) = (i - first, j - 1)."""

    selection: IndexSelection
    i: int
    first: int

    def at(self, m):
        return self.selection.alpha(cantor_pair(self.i - self.first, m - 1) + 1)

    def rank(self, position):
        t = self.selection.rank(position)
        if t is None:
            return None
        a, b = cantor_unpair(t - 1)
        return b + 1 if a == self.i - self.first else None

    def support_key(self):
        return (id(self.selection), self.i)

    def disjoint_from(self, other) -> bool:
        return (
            isinstance(other, SliceEnumeration)
            and other.selection is self.selection
            and other.first == self.first
            and other.i != self.i
        )

    def __eq__(self, other):
        return (
            isinstance(other, SliceEnumeration)
            and other.selection is self.selection
            and (other.i, other.first) == (self.i, self.first)
        )

    def __hash__(self):
        return hash((id(self.selection), self.i, self.first))

    def to_json(self):
        return {"kind": "slice", "i": self.i, "first": self.first}


@dataclass(frozen=True, eq=False)
class ComplementEnumeration(Enumeration):
    """f: the increasing enumeration of N \\ O."""

    selection: IndexSelection

    def at(self, m):
        # the m-th integer not in O: m plus the number of alphas below it
        pos = m
        while True:
            k = self.selection.count_upto(pos)
            if m + k == pos and self.selection.rank(pos) is None:
                return pos
            pos = m + k

    def rank(self, position):
        if self.selection.rank(position) is not None:
            return None
        return position - self.selection.count_upto(position)

    def excluded_positions(self):
        return tuple(self.selection._alphas)

    def excluded_power_bound(self, source, q):
        # every basis coordinate at alpha_l is below 2**-l
        if source not in self.selection.seqs:
            return None
        return nx.power(nx.add(nx.power(2, q), -1), -1)

    def __eq__(self, other):
        return isinstance(other, ComplementEnumeration) and other.selection is self.selection

    def __hash__(self):
        return hash(("complement", id(self.selection)))

    def to_json(self):
        return {"kind": "complement"}


def select_indices(seqs: Sequence[SymbolicSequence], n0: int, depth: int, **kw) -> IndexSelection:
    sel = IndexSelection.get(tuple(seqs), n0, **kw)
    sel.materialize(depth)
    return sel


# ---------------------------------------------------------------------------
# the operator


def p_tilde(p: Fraction) -> Fraction:
    return min(as_fraction(p), Fraction(1))


def default_q_grid(p: Fraction) -> list[Fraction]:
    return [p / 4, p / 2, 3 * p / 4]


@dataclass
class SubspaceOperator:
    basis: tuple
    n0: int
    selection: IndexSelection
    q_grid: tuple = ()
    _eps_cache: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return len(self.basis)

    @property
    def p(self) -> Fraction:
        return self.basis[0].p

    @property
    def p_tilde(self) -> Fraction:
        return p_tilde(self.p)

    @property
    def complement(self) -> ComplementEnumeration:
        return ComplementEnumeration(self.selection)

    def slice(self, i: int) -> SliceEnumeration:
        if i < self.n:
            raise ValueError(f"tail slots start at {self.n}")
        return SliceEnumeration(self.selection, i, self.n)

    def epsilon(self, i: int) -> SymbolicSequence:
        if i not in self._eps_cache:
            comp = RelocatedTail(self.basis[0], self.complement, self.slice(i))
            self._eps_cache[i] = SymbolicSequence(self.p, (comp,))
        return self._eps_cache[i]

    def basis_mass(self) -> nx.RealExpr:
        """Largest p-th power norm among the basis vectors (certified bound)."""
        masses = []
        for b in self.basis:
            v = sq.lq_membership(b, self.p)
            if not isinstance(v, Converges):
                raise PreconditionError("basis vector without a certified l_p bound")
            masses.append(v.bound)
        best = masses[0]
        for m in masses[1:]:
            if not nx.certify_le(m, best):
                best = m if nx.certify_le(best, m) else nx.add(best, m)
        return best

    def to_json(self) -> dict:
        return {
            "type": "operator",
            "basis": [b.to_json() for b in self.basis],
            "selection": self.selection.config(),
            "q_grid": [format_rational(q) for q in self.q_grid],
        }


def epsilon_vector(op: SubspaceOperator, i: int) -> SymbolicSequence:
    return op.epsilon(i)


def _gate_basis(seqs, q_grid) -> None:
    for idx, s in enumerate(seqs):
        if s.is_zero():
            raise PreconditionError(f"basis vector {idx} is zero")
        top = sq.lq_membership(s, s.p)
        if not isinstance(top, Converges):
            raise PreconditionError(f"basis vector {idx} has no certified l_p bound")
        for q in q_grid:
            if isinstance(sq.lq_membership(s, q), Converges):
                raise PreconditionError(
                    f"basis vector {idx} lies in l_q for q = {format_rational(q)}"
                )


def build_operator(
    seqs: Sequence[SymbolicSequence],
    max_n: int = 64,
    depth: int = 16,
    q_grid: Sequence | None = None,
    max_scan: int = 200000,
) -> SubspaceOperator:
    seqs = tuple(seqs)
    if not seqs:
        raise PreconditionError("need at least one basis sequence")
    p = seqs[0].p
    if any(s.p != p for s in seqs):
        raise PreconditionError("basis sequences live in different l_p spaces")
    grid = tuple(as_fraction(q) for q in (q_grid if q_grid is not None else default_q_grid(p)))
    if any(not 0 < q < p for q in grid):
        raise PreconditionError("grid exponents must lie in (0, p)")
    _gate_basis(seqs, grid)
    n0 = find_n0(seqs, max_n)
    sel = select_indices(seqs, n0, depth, max_scan=max_scan)
    return SubspaceOperator(seqs, n0, sel, grid)


def operator_from_json(obj: dict) -> SubspaceOperator:
    if obj.get("type") != "operator":
        raise ValueError("not an operator descriptor")
    basis = tuple(sq.sequence_from_json(b) for b in obj["basis"])
    cfg = obj["selection"]
    sel = IndexSelection.get(basis, int(cfg["n0"]), int(cfg["max_scan"]), nx.parse_rational(cfg["eps_floor"]))
    grid = tuple(nx.parse_rational(q) for q in obj.get("q_grid", []))
    return SubspaceOperator(basis, int(cfg["n0"]), sel, grid)


def _split(op: SubspaceOperator, coeffs):
    coeffs = [as_fraction(c) for c in coeffs]
    head = coeffs[: op.n] + [Fraction(0)] * max(0, op.n - len(coeffs))
    tail = {i: c for i, c in enumerate(coeffs) if i >= op.n and c != 0}
    return head, tail


def head_combination(op: SubspaceOperator, coeffs) -> SymbolicSequence:
    head, _ = _split(op, coeffs)
    return sq.linear_combination(head, op.basis)


def apply_operator(op: SubspaceOperator, coeffs) -> SymbolicSequence:
    head, tail = _split(op, coeffs)
    comps = list(sq.linear_combination(head, op.basis).components)
    for i, c in sorted(tail.items()):
        comps.extend(comp.scaled(c) for comp in op.epsilon(i).components)
    return sq.sequence(op.p, comps)


def certify_outside(op: SubspaceOperator, coeffs, q, budget: sq.Budget | None = None):
    """Membership verdict for T(a) in l_q, q < p."""
    q = as_fraction(q)
    if not 0 < q < op.p:
        raise ValueError("q must lie in (0, p)")
    head, tail = _split(op, coeffs)
    if not any(head) and not tail:
        raise PreconditionError("coefficient vector is zero")
    budget = budget or sq.Budget()
    image = apply_operator(op, coeffs)
    if not any(head):
        # disjoint slices: the first nonzero eps term alone already diverges
        i0 = min(tail)
        v = sq.lq_membership(sq.linear_combination([tail[i0]], [op.epsilon(i0)]), q, budget)
        if isinstance(v, Diverges):
            return v
        return sq.power_sum_evidence(image, q, _tail_positions(op, i0), budget)
    h = sq.linear_combination(head, op.basis)
    v = sq.lq_membership(h, q, budget) if not h.mixed else None
    if isinstance(v, Diverges):
        # on N \ O the image equals h; the part of h on O has mass below
        # (sum |a_t|)^q / (2^q - 1)
        cert = v.certificate
        removed = nx.mul(
            nx.power(sum(abs(a) for a in head), q),
            nx.power(nx.add(nx.power(2, q), -1), -1),
        )
        if cert.excluded_bound is not None:
            removed = nx.add(removed, cert.excluded_bound)
        return Diverges(
            DivergenceCertificate(
                "complement", cert.block, cert.exponent, cert.constant, cert.partition, removed
            )
        )
    return sq.power_sum_evidence(image, q, _complement_positions(op), budget)


def _complement_positions(op: SubspaceOperator):
    m = 1
    f = op.complement
    while True:
        yield f.at(m)
        m += 1


def _tail_positions(op: SubspaceOperator, i: int):
    m = 1
    s = op.slice(i)
    while True:
        yield s.at(m)
        m += 1


def injectivity_probe(op: SubspaceOperator, m: int) -> HeadMatrix:
    """Rows T(e_slot) for slots 0..m, columns 1..n0 and the first element of each O_i."""
    cols = list(range(1, op.n0 + 1)) + [op.slice(i).at(1) for i in range(op.n, m + 1)]
    rows = []
    for slot in range(m + 1):
        unit = [0] * (m + 1)
        unit[slot] = 1
        img = apply_operator(op, unit)
        rows.append(tuple(img.coordinate(j) for j in cols))
    return HeadMatrix(tuple(rows))


def injective_on_probe(op: SubspaceOperator, m: int) -> bool:
    return certified_independent(injectivity_probe(op, m)) is Independence.INDEPENDENT


def norm_bound_check(op: SubspaceOperator, coeffs, N: int = 64) -> bool:
    """Certify ||T(a)||_p^pt <= M^(pt/p) * sum |a_i|^pt, M the largest basis p-mass."""
    p, pt = op.p, op.p_tilde
    coeffs = [as_fraction(c) for c in coeffs]
    nonzero = [(i, c) for i, c in enumerate(coeffs) if c != 0]
    M = op.basis_mass()
    if not nonzero:
        return True
    if len(nonzero) == 1:
        i, _ = nonzero[0]
        vec = op.basis[i] if i < op.n else op.epsilon(i)
        v = sq.lq_membership(vec, p)
        # the common factor |a|^pt cancels
        return isinstance(v, Converges) and nx.certify_le(v.bound, M)
    rhs = nx.mul(nx.power(M, pt / p), nx.add(*(nx.power(abs(c), pt) for _, c in nonzero)))
    image = apply_operator(op, coeffs)
    if not image.mixed:
        v = sq.lq_membership(image, p)
        if isinstance(v, Converges) and nx.certify_le(nx.power(v.bound, pt / p), rhs):
            return True
    # explicit head plus tail bound; sharper when the symbolic bound is not strict
    hi = sq.power_sum_upper(image, p, N)
    if hi is None:
        return False
    return nx.certify_le(nx.power(hi, pt / p), rhs)


# ---------------------------------------------------------------------------
# obstructions


@dataclass
class ObstructionReport:
    kind: str
    vectors: dict
    ladder: list = field(default_factory=list)
    certificates: list = field(default_factory=list)
    violation: dict | None = None
    conclusion: str = ""

    def to_json(self) -> dict:
        out = {
            "kind": self.kind,
            "vectors": {k: v.to_json() for k, v in self.vectors.items()},
            "ladder": [format_rational(x) for x in self.ladder],
            "certificates": self.certificates,
            "conclusion": self.conclusion,
        }
        if self.violation is not None:
            out["violation"] = self.violation
        return out


def aleph0_tail(p, k: int) -> SymbolicSequence:
    """Tail supported on block k of N \\ {1}, p-norm exactly 2**-k, in no smaller l_q."""
    p = as_fraction(p)
    k0 = sq.first_block_index(p)
    outer = BlockPartition(first_block=1, offset=1)
    part = SubPartition(outer, k, BlockPartition(first_block=k0))
    # blocks m >= k0 with p-th power masses lam_p 2**-m summing to 2**(-k p)
    lam_p = nx.mul(nx.power(2, -k * p), 2 ** (k0 - 1))
    fam = sq.GeometricBlockFamily(part, p, lam_p, nx.const(Fraction(1, 2)))
    return SymbolicSequence(p, (fam,))


def aleph0_vector(p, k: int) -> SymbolicSequence:
    p = as_fraction(p)
    return sq.sequence(p, [sq.FiniteSupport.of({1: 1})] + list(aleph0_tail(p, k).components))


def pnorm_exact(s: SymbolicSequence) -> nx.RealExpr:
    v = sq.lq_membership(s, s.p)
    if not (isinstance(v, Converges) and v.exact):
        raise ValueError("no exact p-norm available")
    return nx.power(v.bound, 1 / s.p)


def aleph0_obstruction(p, depth: int = 10, combos: Sequence | None = None) -> ObstructionReport:
    p = as_fraction(p)
    if p <= 0:
        raise ValueError("p must be positive")
    if depth < 1:
        raise ValueError("depth must be at least 1")
    e1 = sq.unit_vector(1, p)
    xs = {k: aleph0_vector(p, k) for k in range(1, depth + 1)}
    ladder = []
    for k, x in xs.items():
        d = pnorm_exact(sq.linear_combination([1, -1], [x, e1]))
        if not d.is_exact():
            raise ArithmeticError(f"distance for k = {k} did not reduce to a rational")
        ladder.append(d.value)
    q_grid = [p / 4, p / 2, 3 * p / 4]
    certs = []
    for q in q_grid:
        v = sq.lq_membership(e1, q)
        certs.append({"vector": "e1", "q": format_rational(q), **v.to_json()})
    combos = combos if combos is not None else [{1: 1, 2: -1}, {1: 1}, {2: 3, 5: -2}]
    for combo in combos:
        s = sq.linear_combination(list(combo.values()), [xs[k] if k in xs else aleph0_vector(p, k) for k in combo])
        name = " + ".join(f"{format_rational(c)}*x{k}" for k, c in combo.items())
        for q in q_grid:
            v = sq.lq_membership(s, q)
            certs.append({"vector": name, "q": format_rational(q), **v.to_json()})
    return ObstructionReport(
        kind="aleph0",
        vectors={"e1": e1, **{f"x{k}": x for k, x in xs.items()}},
        ladder=ladder,
        certificates=certs,
        conclusion=(
            "x^(k) -> e1 in l_p with ||x^(k) - e1||_p = 2^-k, and e1 lies in every l_q; "
            "any closed subspace containing all x^(k) contains e1"
        ),
    )


def _nonzero(e: nx.RealExpr, eps_floor=Fraction(1, 2**80)) -> bool:
    if e.is_exact():
        return e.value != 0
    verdict = nx.compare_strict(nx.abs_(e), 0, eps_floor)
    if verdict is Comparison.GREATER:
        return True
    raise InconclusiveCoordinate(f"cannot decide whether {e!r} vanishes")


def example12_membership(v: SymbolicSequence, n: int) -> bool:
    """Membership in span{e_1..e_n} union {x : x_1 = ... = x_n = 0}."""
    head_zero = not any(_nonzero(v.coordinate(j)) for j in range(1, n + 1))
    return head_zero or not sq.support_exceeds(v, n)


def example12_obstruction(n: int, tail: SymbolicSequence) -> ObstructionReport:
    if tail.is_zero():
        raise PreconditionError("tail must be nonzero")
    if not sq.support_exceeds(tail, n):
        raise PreconditionError(f"tail must have support beyond index {n}")
    w = sq.linear_combination([1, 1], [sq.unit_vector(1, tail.p), tail])
    member = example12_membership(w, n)
    return ObstructionReport(
        kind="example12",
        vectors={"tail": tail, "w": w},
        violation={
            "n": n,
            "w_member": member,
            "tail_member": example12_membership(tail, n),
            "e1_member": True,
        },
        conclusion=(
            "w = e1 + tail lies in the span of e1 and the tail but not in the set, "
            "so the span is not contained in it"
        ),
    )


def witness_basis(p, n: int) -> tuple:
    """n witness vectors on the residue classes mod n (pairwise disjoint supports)."""
    p = as_fraction(p)
    k0 = sq.first_block_index(p)
    return tuple(
        sq.witness_vector(p, BlockPartition(first_block=k0, stride=n, residue=r))
        for r in range(1, n + 1)
    )


def generic_basis(p, n: int) -> tuple:
    """n witness vectors on overlapping partitions; their combinations are mixed."""
    p = as_fraction(p)
    k0 = sq.first_block_index(p)
    parts = [
        BlockPartition(first_block=k0),
        BlockPartition(scheme="dyadic", first_block=k0),
        BlockPartition(first_block=k0, offset=1),
        BlockPartition(scheme="dyadic", first_block=k0, offset=2),
    ]
    if n > len(parts):
        raise ValueError(f"at most {len(parts)} generic basis vectors")
    return tuple(sq.witness_vector(p, part) for part in parts[:n])

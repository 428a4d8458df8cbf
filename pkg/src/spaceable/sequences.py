"""Finitely described infinite sequences and certified l_q membership.

A :class:`SymbolicSequence` is a finite list of components, each an exactly
evaluable piece: a finite support part, a single power-law block, a whole family
of normalised power-law blocks (the witness construction), or a relocated copy of
another sequence's sub-tail.  When the components have provably disjoint
supports, ``sum |s_j|**q`` splits componentwise and every membership question has
an exact answer with a certificate.  Otherwise the sequence is flagged ``mixed``
and membership queries degrade to partial-sum evidence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Iterator, Sequence

from . import numerics as nx
from .numerics import Interval, RealExpr, as_fraction, format_rational
from .partition import (
    ALL_BLOCKS,
    BlockPartition,
    Partition,
    block_count_upto,
    levels_disjoint,
    partition_from_json,
)

DEFAULT_THRESHOLD = 1000
TERM_EPS = Fraction(1, 2**40)


def first_block_index(p) -> int:
    """Smallest k with p - 1/k > 0."""
    p = as_fraction(p)
    if p <= 0:
        raise ValueError("p must be positive")
    return math.floor(1 / p) + 1


def block_exponent(p: Fraction, k: int) -> Fraction:
    """Decay exponent 1/(p - 1/k) of the k-th witness block."""
    d = p - Fraction(1, k)
    if d <= 0:
        raise ValueError(f"block {k} undefined for p = {p}")
    return 1 / d


def zeta_tail(s: Fraction, R: int) -> RealExpr:
    """Exact value of sum_{r>R} r**-s.

    The integral-test bound R**(1-s)/(s-1) is far too loose when s is close to 1,
    so tails are kept as zeta(s) minus the explicit head.
    """
    return nx.add(nx.zeta(s), *(nx.mul(-1, nx.power(r, -s)) for r in range(1, R + 1)))


# ---------------------------------------------------------------------------
# certificates and verdicts


@dataclass(frozen=True)
class DivergenceCertificate:
    """Terms on a block dominate ``constant * r**-exponent`` with exponent <= 1.

    ``kind == "harmonic"``: the comparison holds on block ``block`` of ``partition``
    directly.  ``kind == "complement"``: the comparison holds on a block of the
    source sequence, from which a set of positions with total q-th power mass at
    most ``excluded_bound`` has been removed; what is left still diverges.
    """

    kind: str
    block: int
    exponent: Fraction
    constant: RealExpr
    partition: Partition | None = None
    excluded_bound: RealExpr | None = None

    def validate(self, eps_floor=Fraction(1, 2**80)) -> bool:
        if self.exponent > 1 or self.exponent <= 0:
            return False
        if nx.compare_strict(self.constant, 0, eps_floor) is not nx.Comparison.GREATER:
            return False
        if self.kind == "complement" and self.excluded_bound is None:
            return False
        return self.kind in ("harmonic", "complement")

    def predicted_truncation(self, threshold) -> int:
        """Block rank R by which the dominating partial sum exceeds ``threshold``.

        Uses the integral-test lower bound sum_{r<=R} r**-e >= int_1^{R+1} x**-e dx,
        rounded conservatively.
        """
        target = as_fraction(threshold)
        if self.excluded_bound is not None:
            target += nx.enclose(self.excluded_bound, Fraction(1, 2**20)).hi
        c_lo = nx.enclose(self.constant, self.constant_eps()).lo
        if c_lo <= 0:
            raise nx.PrecisionError("dominating constant not separated from zero")
        X = target / c_lo
        e = self.exponent
        if e == 1:
            steps = math.ceil(X / _LN2_LOWER)
            return (1 << steps) - 1
        y = 1 + X * (1 - e)
        hi = nx._root_bounds(y, 1 / (1 - e), 8)[1]
        return max(1, math.ceil(hi) - 1)

    def constant_eps(self) -> Fraction:
        iv = nx.enclose(self.constant, Fraction(1, 2**24))
        return max(iv.hi / 2**20, Fraction(1, 2**200))

    def predicted_position(self, threshold) -> int | None:
        if self.kind != "harmonic" or self.partition is None:
            return None
        return self.partition.position(self.block, self.predicted_truncation(threshold))

    def to_json(self) -> dict:
        out = {
            "kind": self.kind,
            "block": self.block,
            "exponent": format_rational(self.exponent),
            "constant": nx.expr_to_json(self.constant),
        }
        if self.partition is not None:
            out["partition"] = self.partition.to_json()
        if self.excluded_bound is not None:
            out["excluded_bound"] = nx.expr_to_json(self.excluded_bound)
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "DivergenceCertificate":
        return cls(
            kind=obj["kind"],
            block=int(obj["block"]),
            exponent=nx.parse_rational(obj["exponent"]),
            constant=nx.expr_from_json(obj["constant"]),
            partition=partition_from_json(obj["partition"]) if "partition" in obj else None,
            excluded_bound=(
                nx.expr_from_json(obj["excluded_bound"]) if "excluded_bound" in obj else None
            ),
        )


def _ln2_lower() -> Fraction:
    # ln 2 = sum 1/(k 2^k); any partial sum is a lower bound
    return sum((Fraction(1, k * 2**k) for k in range(1, 40)), Fraction(0))


_LN2_LOWER = _ln2_lower()


@dataclass(frozen=True)
class Converges:
    bound: RealExpr
    exact: bool = False
    kind: str = field(default="converges", init=False)

    def to_json(self) -> dict:
        out = {"verdict": "converges", "bound": nx.expr_to_json(self.bound), "exact": self.exact}
        if not self.bound.is_exact():
            out["bound_enclosure"] = nx.enclose(self.bound, Fraction(1, 2**64)).to_json()
        return out


@dataclass(frozen=True)
class Diverges:
    certificate: DivergenceCertificate
    kind: str = field(default="diverges", init=False)

    def to_json(self) -> dict:
        return {"verdict": "diverges", "certificate": self.certificate.to_json()}


@dataclass(frozen=True)
class NumericEvidence:
    """Partial sums of |s_j|**q at checkpoints; explicitly non-conclusive."""

    checkpoints: tuple
    threshold: Fraction
    threshold_reached: bool
    kind: str = field(default="numeric_evidence", init=False)

    @property
    def last(self) -> Interval:
        return self.checkpoints[-1][1]

    def to_json(self) -> dict:
        return {
            "verdict": "numeric_evidence",
            "threshold": format_rational(self.threshold),
            "threshold_reached": self.threshold_reached,
            "partial_sums": [[n, iv.to_json()] for n, iv in self.checkpoints],
        }


MembershipVerdict = Converges | Diverges | NumericEvidence


@dataclass(frozen=True)
class Budget:
    max_terms: int = 20000
    threshold: Fraction = Fraction(DEFAULT_THRESHOLD)
    eps: Fraction = TERM_EPS
    # "first": earliest divergent block; "fastest": block whose comparison sum passes the threshold soonest
    block_choice: str = "first"


# ---------------------------------------------------------------------------
# enumerations used by relocated tails


class Enumeration:
    """Strictly increasing enumeration of an infinite set of positions."""

    def at(self, m: int) -> int:
        raise NotImplementedError

    def rank(self, position: int) -> int | None:
        raise NotImplementedError

    def excluded_power_bound(self, source: "SymbolicSequence", q: Fraction) -> RealExpr | None:
        """Upper bound on the q-power mass of ``source`` outside this set, if known."""
        return None

    def excluded_positions(self) -> Sequence[int]:
        """Positions already known to lie outside this set."""
        return ()

    def support_key(self):
        return self

    def to_json(self) -> dict:
        raise NotImplementedError


ENUMERATION_DECODERS: dict = {}


def enumeration_from_json(obj: dict) -> Enumeration:
    try:
        decode = ENUMERATION_DECODERS[obj["kind"]]
    except KeyError:
        raise ValueError(f"unknown enumeration kind {obj.get('kind')!r}") from None
    return decode(obj)


# ---------------------------------------------------------------------------
# components


class Component:
    def coordinate(self, j: int) -> RealExpr:
        raise NotImplementedError

    def scaled(self, c: Fraction) -> "Component":
        raise NotImplementedError

    def merge_key(self):
        raise NotImplementedError

    def merged(self, other: "Component") -> "Component":
        raise NotImplementedError

    def levels(self):
        """Support chain for disjointness tests, or None when not partition based."""
        return None

    def contains(self, j: int) -> bool:
        return not self.coordinate(j).is_zero()

    def is_zero(self) -> bool:
        return False

    def verdict(self, q: Fraction, budget=None) -> MembershipVerdict:
        raise NotImplementedError

    def sup_bound(self) -> RealExpr:
        raise NotImplementedError

    def tail_power_bound(self, q: Fraction, N: int) -> RealExpr | None:
        """Upper bound on sum_{j>N} |s_j|**q (None means infinite or unknown)."""
        raise NotImplementedError


@dataclass(frozen=True)
class FiniteSupport(Component):
    entries: tuple  # sorted (index, Fraction) pairs, no zeros

    @classmethod
    def of(cls, mapping) -> "FiniteSupport":
        items = sorted((int(j), as_fraction(v)) for j, v in dict(mapping).items())
        if any(j < 1 for j, _ in items):
            raise ValueError("indices start at 1")
        return cls(tuple((j, v) for j, v in items if v != 0))

    def coordinate(self, j):
        for i, v in self.entries:
            if i == j:
                return nx.Const(v)
        return nx.ZERO

    def contains(self, j):
        return any(i == j for i, _ in self.entries)

    def is_zero(self):
        return not self.entries

    def scaled(self, c):
        return FiniteSupport(tuple((j, v * c) for j, v in self.entries)) if c else FiniteSupport(())

    def merge_key(self):
        return ("finite",)

    def merged(self, other):
        acc = dict(self.entries)
        for j, v in other.entries:
            acc[j] = acc.get(j, 0) + v
        return FiniteSupport.of(acc)

    def indices(self):
        return [j for j, _ in self.entries]

    def verdict(self, q, budget=None):
        total = nx.add(*(nx.power(abs(v), q) for _, v in self.entries))
        return Converges(total, exact=True)

    def sup_bound(self):
        return nx.Const(max((abs(v) for _, v in self.entries), default=Fraction(0)))

    def tail_power_bound(self, q, N):
        return nx.add(*(nx.power(abs(v), q) for j, v in self.entries if j > N))

    def to_json(self):
        return {
            "type": "finite",
            "entries": [[j, format_rational(v)] for j, v in self.entries],
        }


@dataclass(frozen=True)
class ScaledBlock(Component):
    """``scale * r**-exponent`` at the r-th element of block ``k``."""

    partition: Partition
    k: int
    exponent: Fraction
    scale: RealExpr

    def coordinate(self, j):
        loc = self.partition.locate(j)
        if loc is None or loc[0] != self.k:
            return nx.ZERO
        return nx.mul(self.scale, nx.power(loc[1], -self.exponent))

    def contains(self, j):
        loc = self.partition.locate(j)
        return loc is not None and loc[0] == self.k and not self.scale.is_zero()

    def is_zero(self):
        return self.scale.is_zero()

    def scaled(self, c):
        return ScaledBlock(self.partition, self.k, self.exponent, nx.mul(c, self.scale))

    def merge_key(self):
        return ("block", self.partition, self.k, self.exponent)

    def merged(self, other):
        return ScaledBlock(self.partition, self.k, self.exponent, nx.add(self.scale, other.scale))

    def levels(self):
        return self.partition.levels(self.k)

    def verdict(self, q, budget=None):
        s = self.exponent * q
        c = nx.power(nx.abs_(self.scale), q)
        if s > 1:
            return Converges(nx.mul(c, nx.zeta(s)), exact=True)
        return Diverges(DivergenceCertificate("harmonic", self.k, s, c, self.partition))

    def sup_bound(self):
        return nx.abs_(self.scale)

    def tail_power_bound(self, q, N):
        s = self.exponent * q
        if s <= 1:
            return None
        c = nx.power(nx.abs_(self.scale), q)
        R = block_count_upto(self.partition, self.k, N)
        return nx.mul(c, zeta_tail(s, R))

    def to_json(self):
        return {
            "type": "block",
            "partition": self.partition.to_json(),
            "k": self.k,
            "exponent": format_rational(self.exponent),
            "scale": nx.expr_to_json(self.scale),
        }


@dataclass(frozen=True)
class GeometricBlockFamily(Component):
    """All blocks k >= partition.first_block, block k rescaled to p-norm lam * beta**k.

    Block k is the power law r**-e_k with e_k = 1/(p - 1/k); the family stores
    the p-th powers ``lam_p = lam**p`` and ``beta_p = beta**p`` so totals stay in
    closed form.  The plain witness has lam_p = 1 and beta_p = 2**-p.
    """

    partition: Partition
    p: Fraction
    lam_p: RealExpr
    beta_p: RealExpr
    coeff: Fraction = Fraction(1)

    def __post_init__(self):
        block_exponent(self.p, self.partition.first_block)

    @property
    def k0(self) -> int:
        return self.partition.first_block

    def block_norm(self, k: int) -> RealExpr:
        return nx.power(nx.mul(self.lam_p, nx.power(self.beta_p, k)), 1 / self.p)

    def block_scale(self, k: int) -> RealExpr:
        """Coordinate multiplier of block k (before the signed coefficient)."""
        e = block_exponent(self.p, k)
        return nx.mul(self.block_norm(k), nx.power(nx.zeta(e * self.p), -1 / self.p))

    def coordinate(self, j):
        loc = self.partition.locate(j)
        if loc is None:
            return nx.ZERO
        k, r = loc
        e = block_exponent(self.p, k)
        return nx.mul(self.coeff, self.block_scale(k), nx.power(r, -e))

    def contains(self, j):
        return self.coeff != 0 and self.partition.locate(j) is not None

    def is_zero(self):
        return self.coeff == 0

    def scaled(self, c):
        return GeometricBlockFamily(self.partition, self.p, self.lam_p, self.beta_p, self.coeff * c)

    def merge_key(self):
        return ("family", self.partition, self.p, self.lam_p, self.beta_p)

    def merged(self, other):
        return GeometricBlockFamily(
            self.partition, self.p, self.lam_p, self.beta_p, self.coeff + other.coeff
        )

    def levels(self):
        return self.partition.levels(ALL_BLOCKS)

    def _geometric_total(self, q: Fraction, k_from: int) -> RealExpr:
        # sum_{k>=k_from} (lam beta^k)^q
        ratio = nx.power(self.beta_p, q / self.p)
        return nx.mul(
            nx.power(self.lam_p, q / self.p),
            nx.power(ratio, k_from),
            nx.power(nx.add(1, nx.mul(-1, ratio)), -1),
        )

    def divergent_block(self, q: Fraction) -> int:
        """First block whose q-th power series diverges (requires q < p)."""
        return max(self.k0, math.ceil(1 / (self.p - q)))

    @cached_property
    def _float_params(self) -> tuple[float, float]:
        return nx.approx(self.lam_p, 8), nx.approx(self.beta_p, 8)

    def certificate_block(self, q: Fraction, threshold=DEFAULT_THRESHOLD, span: int = 48) -> int:
        """Divergent block whose comparison series passes ``threshold`` soonest.

        Every block from ``divergent_block(q)`` on diverges; later blocks have
        smaller comparison exponents but smaller constants.  Floats are used only
        to rank candidates, never in the certificate itself.
        """
        lam, beta = self._float_params
        p, qf = float(self.p), float(q)
        best, best_log = None, math.inf
        k_first = self.divergent_block(q)
        for k in range(k_first, k_first + span):
            e_k = 1 / (p - 1 / k)
            s = e_k * p
            zeta_approx = 1 / (s - 1) + 0.5772156649 + 1e-12
            log_c = (qf / p) * (math.log(lam) + k * math.log(beta) - math.log(zeta_approx))
            X = math.exp(math.log(float(threshold)) - log_c)
            e = e_k * qf
            if k == k_first and Fraction(1, 1) == block_exponent(self.p, k) * q:
                log_r = X
            else:
                log_r = math.log1p(X * (1 - e)) / (1 - e)
            if log_r < best_log:
                best, best_log = k, log_r
        return best

    def verdict(self, q, budget=None):
        weight = nx.power(abs(self.coeff), q)
        if q == self.p:
            return Converges(nx.mul(weight, self._geometric_total(q, self.k0)), exact=True)
        if q > self.p:
            # the q-norm of each block is at most its p-norm lam beta^k
            return Converges(nx.mul(weight, self._geometric_total(q, self.k0)), exact=False)
        if budget is not None and budget.block_choice == "fastest":
            k = self.certificate_block(q, budget.threshold)
        else:
            k = self.divergent_block(q)
        e = block_exponent(self.p, k)
        c = nx.mul(weight, nx.power(self.block_scale(k), q))
        return Diverges(DivergenceCertificate("harmonic", k, e * q, c, self.partition))

    def sup_bound(self):
        return nx.mul(abs(self.coeff), self.block_norm(self.k0))

    def tail_power_bound(self, q, N):
        if q < self.p:
            return None
        weight = nx.power(abs(self.coeff), q)
        parts = []
        k = self.k0
        while self.partition.position(k, 1) <= N:
            e = block_exponent(self.p, k)
            R = block_count_upto(self.partition, k, N)
            parts.append(nx.mul(nx.power(self.block_scale(k), q), zeta_tail(e * q, R)))
            k += 1
        parts.append(self._geometric_total(q, k))
        return nx.mul(weight, nx.add(*parts))

    def to_json(self):
        return {
            "type": "family",
            "partition": self.partition.to_json(),
            "p": format_rational(self.p),
            "lam_p": nx.expr_to_json(self.lam_p),
            "beta_p": nx.expr_to_json(self.beta_p),
            "coeff": format_rational(self.coeff),
        }


@dataclass(frozen=True)
class RelocatedTail(Component):
    """coeff * source[source_enum.at(m)] placed at target_enum.at(m), zero elsewhere."""

    source: "SymbolicSequence"
    source_enum: Enumeration
    target_enum: Enumeration
    coeff: Fraction = Fraction(1)

    def coordinate(self, j):
        m = self.target_enum.rank(j)
        if m is None or self.coeff == 0:
            return nx.ZERO
        return nx.mul(self.coeff, self.source.coordinate(self.source_enum.at(m)))

    def contains(self, j):
        return self.coeff != 0 and self.target_enum.rank(j) is not None

    def is_zero(self):
        return self.coeff == 0

    def scaled(self, c):
        return RelocatedTail(self.source, self.source_enum, self.target_enum, self.coeff * c)

    def merge_key(self):
        return ("relocated", self.source, self.source_enum, self.target_enum)

    def merged(self, other):
        return RelocatedTail(
            self.source, self.source_enum, self.target_enum, self.coeff + other.coeff
        )

    def verdict(self, q, budget=None):
        inner = lq_membership(self.source, q)
        weight = nx.power(abs(self.coeff), q)
        if isinstance(inner, Converges):
            # a sub-multiset of the source's terms
            return Converges(nx.mul(weight, inner.bound), exact=False)
        if isinstance(inner, Diverges):
            cert = inner.certificate
            removed = self.source_enum.excluded_power_bound(self.source, q)
            if removed is None:
                return None
            if cert.excluded_bound is not None:
                removed = nx.add(removed, cert.excluded_bound)
            return Diverges(
                DivergenceCertificate(
                    "complement",
                    cert.block,
                    cert.exponent,
                    nx.mul(weight, cert.constant),
                    cert.partition,
                    nx.mul(weight, removed),
                )
            )
        return None

    def sup_bound(self):
        return nx.mul(abs(self.coeff), sup_bound(self.source))

    def tail_power_bound(self, q, N):
        inner = lq_membership(self.source, q)
        if not isinstance(inner, Converges):
            return None
        weight = nx.power(abs(self.coeff), q)
        # drop the source terms already placed at positions <= N, and the excluded ones
        known = Fraction(0)
        m = 1
        while self.target_enum.at(m) <= N:
            known += _term_interval(self.source, self.source_enum.at(m), q).lo
            m += 1
        for t in self.source_enum.excluded_positions():
            known += _term_interval(self.source, t, q).lo
        return nx.mul(weight, nx.add(inner.bound, -known))

    def to_json(self):
        return {
            "type": "relocated",
            "source": self.source.to_json(),
            "source_enum": self.source_enum.to_json(),
            "target_enum": self.target_enum.to_json(),
            "coeff": format_rational(self.coeff),
        }


def _components_disjoint(a: Component, b: Component) -> bool:
    if isinstance(a, FiniteSupport):
        return not any(b.contains(j) for j in a.indices())
    if isinstance(b, FiniteSupport):
        return _components_disjoint(b, a)
    la, lb = a.levels(), b.levels()
    if la is not None and lb is not None:
        return levels_disjoint(la, lb)
    if isinstance(a, RelocatedTail) and isinstance(b, RelocatedTail):
        ka, kb = a.target_enum.support_key(), b.target_enum.support_key()
        return ka != kb and getattr(a.target_enum, "disjoint_from", lambda o: False)(b.target_enum)
    return False


# ---------------------------------------------------------------------------
# sequences


@dataclass(frozen=True)
class SymbolicSequence:
    p: Fraction
    components: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "p", as_fraction(self.p))

    @cached_property
    def mixed(self) -> bool:
        comps = self.components
        for i in range(len(comps)):
            for j in range(i + 1, len(comps)):
                if not _components_disjoint(comps[i], comps[j]):
                    return True
        return False

    def coordinate(self, j: int) -> RealExpr:
        if j < 1:
            raise ValueError("positions start at 1")
        return nx.add(*(c.coordinate(j) for c in self.components))

    def coordinates(self, start: int = 1) -> Iterator[RealExpr]:
        j = start
        while True:
            yield self.coordinate(j)
            j += 1

    def head(self, m: int) -> list:
        return [self.coordinate(j) for j in range(1, m + 1)]

    def is_zero(self) -> bool:
        return not self.components

    def to_json(self) -> dict:
        return {
            "type": "sequence",
            "p": format_rational(self.p),
            "components": [c.to_json() for c in self.components],
        }


def _normalise(p: Fraction, comps: Iterable[Component]) -> SymbolicSequence:
    merged: dict = {}
    for c in comps:
        key = c.merge_key()
        merged[key] = merged[key].merged(c) if key in merged else c
    kept = tuple(c for c in merged.values() if not c.is_zero())
    return SymbolicSequence(p, kept)


def sequence(p, components: Iterable[Component]) -> SymbolicSequence:
    return _normalise(as_fraction(p), components)


def zero_sequence(p) -> SymbolicSequence:
    return SymbolicSequence(as_fraction(p), ())


def unit_vector(j: int, p) -> SymbolicSequence:
    return sequence(p, [FiniteSupport.of({j: 1})])


def finite_sequence(mapping, p) -> SymbolicSequence:
    return sequence(p, [FiniteSupport.of(mapping)])


def coordinate(s: SymbolicSequence, j: int) -> RealExpr:
    return s.coordinate(j)


def linear_combination(coeffs, seqs) -> SymbolicSequence:
    """Exact coordinatewise combination; like components are merged."""
    coeffs = [as_fraction(c) for c in coeffs]
    seqs = list(seqs)
    if len(coeffs) != len(seqs):
        raise ValueError("coefficient count does not match sequence count")
    if not seqs:
        raise ValueError("empty combination")
    p = seqs[0].p
    if any(s.p != p for s in seqs):
        raise ValueError("sequences live in different l_p spaces")
    comps = []
    for c, s in zip(coeffs, seqs):
        if c != 0:
            comps.extend(comp.scaled(c) for comp in s.components)
    return _normalise(p, comps)


def witness_vector(p, partition: Partition | None = None) -> SymbolicSequence:
    """An explicit element of l_p that lies in no l_q with q < p.

    Block k (k >= k0) carries r**(-1/(p - 1/k)) rescaled to p-norm 2**-k.
    """
    p = as_fraction(p)
    k0 = first_block_index(p)
    if partition is None:
        partition = BlockPartition(first_block=k0)
    elif partition.first_block < k0:
        raise ValueError(f"blocks must start at k >= {k0} for p = {p}")
    fam = GeometricBlockFamily(partition, p, nx.ONE, nx.power(2, -p))
    return SymbolicSequence(p, (fam,))


def scaled_block(p, k: int, scale=1, partition: Partition | None = None) -> SymbolicSequence:
    """The single block x^(k): r**(-1/(p - 1/k)) on block k, times ``scale``."""
    p = as_fraction(p)
    if partition is None:
        partition = BlockPartition(first_block=min(k, first_block_index(p)))
    blk = ScaledBlock(partition, k, block_exponent(p, k), nx.lift(scale))
    return SymbolicSequence(p, (blk,))


# ---------------------------------------------------------------------------
# membership


def _term_interval(s: SymbolicSequence, j: int, q: Fraction, eps=TERM_EPS) -> Interval:
    return nx.enclose(nx.power(nx.abs_(s.coordinate(j)), q), eps)


def lq_membership(s: SymbolicSequence, q, budget: Budget | None = None) -> MembershipVerdict:
    """Decide whether ``sum |s_j|**q`` is finite, with a certificate when possible."""
    q = as_fraction(q)
    if q <= 0:
        raise ValueError("q must be positive")
    if s.is_zero():
        return Converges(nx.ZERO, exact=True)
    if not s.mixed:
        verdicts = [c.verdict(q, budget) for c in s.components]
        if all(v is not None for v in verdicts):
            for v in verdicts:
                if isinstance(v, Diverges):
                    return v
            if all(isinstance(v, Converges) for v in verdicts):
                return Converges(
                    nx.add(*(v.bound for v in verdicts)), exact=all(v.exact for v in verdicts)
                )
    return power_sum_evidence(s, q, range(1, (budget or Budget()).max_terms + 1), budget)


def power_sum_evidence(
    s: SymbolicSequence, q, positions: Iterable[int], budget: Budget | None = None
) -> NumericEvidence:
    """Running enclosures of sum |s_j|**q over ``positions`` at power-of-two checkpoints."""
    budget = budget or Budget()
    q = as_fraction(q)
    lo = hi = Fraction(0)
    checkpoints = []
    reached = False
    n = 0
    next_mark = 16
    for j in positions:
        iv = _term_interval(s, j, q, budget.eps)
        lo += iv.lo
        hi += iv.hi
        n += 1
        if lo > budget.threshold:
            reached = True
        if n == next_mark or reached:
            checkpoints.append((n, Interval(lo, hi)))
            next_mark *= 2
        if reached or n >= budget.max_terms:
            break
    if not checkpoints or checkpoints[-1][0] != n:
        checkpoints.append((n, Interval(lo, hi)))
    return NumericEvidence(tuple(checkpoints), budget.threshold, reached)


def partial_pnorm(s: SymbolicSequence, q, N: int, eps=Fraction(1, 2**30)) -> Interval:
    """Enclosure of sum_{j<=N} |s_j|**q of width at most ``eps``."""
    if N < 1:
        raise ValueError("N must be at least 1")
    q = as_fraction(q)
    terms = [nx.power(nx.abs_(s.coordinate(j)), q) for j in range(1, N + 1)]
    return nx.enclose(nx.add(*terms), eps)


def sup_bound(s: SymbolicSequence) -> RealExpr:
    """Upper bound on sup_j |s_j|."""
    bounds = [c.sup_bound() for c in s.components]
    if not bounds:
        return nx.ZERO
    if s.mixed:
        return nx.add(*bounds)
    best = bounds[0]
    for b in bounds[1:]:
        if nx.certify_le(best, b):
            best = b
        elif not nx.certify_le(b, best):
            best = nx.add(best, b)
    return best


def tail_power_bound(s: SymbolicSequence, q, N: int) -> RealExpr | None:
    """Upper bound on sum_{j>N} |s_j|**q, or None when none is available."""
    q = as_fraction(q)
    parts = [c.tail_power_bound(q, N) for c in s.components]
    if any(t is None for t in parts):
        return None
    if not parts:
        return nx.ZERO
    if not s.mixed or q <= 1:
        # disjoint supports add; for q <= 1 |a+b|^q <= |a|^q + |b|^q
        return nx.add(*parts)
    return nx.power(nx.add(*(nx.power(t, 1 / q) for t in parts)), q)


def power_sum_upper(s: SymbolicSequence, q, N: int, eps=Fraction(1, 2**40)) -> Fraction | None:
    """Rational upper bound on sum_j |s_j|**q from exact partial sums plus a tail bound."""
    tail = tail_power_bound(s, q, N)
    if tail is None:
        return None
    head = partial_pnorm(s, q, N, eps)
    return head.hi + nx.enclose(tail, eps).hi


def support_exceeds(s: SymbolicSequence, n: int) -> bool:
    """True if some component can be nonzero beyond index n."""
    for c in s.components:
        if isinstance(c, FiniteSupport):
            if any(j > n for j in c.indices()):
                return True
        elif not c.is_zero():
            return True
    return False


# ---------------------------------------------------------------------------
# JSON


def component_from_json(obj: dict) -> Component:
    t = obj.get("type")
    if t == "finite":
        return FiniteSupport.of({int(j): nx.parse_rational(v) for j, v in obj["entries"]})
    if t == "block":
        return ScaledBlock(
            partition_from_json(obj["partition"]),
            int(obj["k"]),
            nx.parse_rational(obj["exponent"]),
            nx.expr_from_json(obj["scale"]),
        )
    if t == "family":
        return GeometricBlockFamily(
            partition_from_json(obj["partition"]),
            nx.parse_rational(obj["p"]),
            nx.expr_from_json(obj["lam_p"]),
            nx.expr_from_json(obj["beta_p"]),
            nx.parse_rational(obj["coeff"]),
        )
    if t == "relocated":
        return RelocatedTail(
            sequence_from_json(obj["source"]),
            enumeration_from_json(obj["source_enum"]),
            enumeration_from_json(obj["target_enum"]),
            nx.parse_rational(obj["coeff"]),
        )
    raise ValueError(f"unknown component type {t!r}")


def sequence_from_json(obj: dict) -> SymbolicSequence:
    if obj.get("type") != "sequence":
        raise ValueError("not a sequence descriptor")
    p = nx.parse_rational(obj["p"])
    if p <= 0:
        raise ValueError("p must be positive")
    comps = [component_from_json(c) for c in obj["components"]]
    return sequence(p, comps)


def verdict_from_json(obj: dict) -> MembershipVerdict:
    v = obj["verdict"]
    if v == "converges":
        return Converges(nx.expr_from_json(obj["bound"]), bool(obj["exact"]))
    if v == "diverges":
        return Diverges(DivergenceCertificate.from_json(obj["certificate"]))
    if v == "numeric_evidence":
        cps = tuple(
            (int(n), Interval(nx.parse_rational(a), nx.parse_rational(b)))
            for n, (a, b) in obj["partial_sums"]
        )
        return NumericEvidence(cps, nx.parse_rational(obj["threshold"]), bool(obj["threshold_reached"]))
    raise ValueError(f"unknown verdict {v!r}")

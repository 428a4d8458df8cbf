"""Piecewise power functions on [0, 1] and the L_p spaceability operator.

A piece is ``scale * ((x - anchor) / width) ** -gamma`` on ``[lo, hi)`` with
``anchor <= lo``; it is singular only when ``anchor == lo`` and ``gamma > 0``.
A witness family is the infinite collection of pieces on the dyadic blocks
J_k = [2^-k-1, 2^-k), affinely transported.  Integrals of |piece|^q have closed
forms, so membership in L_q is decided exactly whenever the parts have disjoint
supports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterator, Sequence

from . import numerics as nx
from . import sequences as sq
from .numerics import Interval, RealExpr, as_fraction, format_rational
from .sequences import Converges, Diverges, NumericEvidence

HALF = Fraction(1, 2)


def p_tilde(p) -> Fraction:
    return min(as_fraction(p), Fraction(1))


@dataclass(frozen=True)
class FnDivergenceCertificate:
    """int_lo^hi c * ((x - lo)/w)^(-s) dx = infinity because s >= 1."""

    lo: Fraction
    hi: Fraction
    exponent: Fraction
    constant: RealExpr

    def validate(self, eps_floor=Fraction(1, 2**80)) -> bool:
        if self.exponent < 1 or not self.lo < self.hi:
            return False
        return nx.compare_strict(self.constant, 0, eps_floor) is nx.Comparison.GREATER

    def to_json(self) -> dict:
        return {
            "kind": "singularity",
            "interval": [format_rational(self.lo), format_rational(self.hi)],
            "exponent": format_rational(self.exponent),
            "constant": nx.expr_to_json(self.constant),
        }

    @classmethod
    def from_json(cls, obj) -> "FnDivergenceCertificate":
        lo, hi = obj["interval"]
        return cls(
            nx.parse_rational(lo),
            nx.parse_rational(hi),
            nx.parse_rational(obj["exponent"]),
            nx.expr_from_json(obj["constant"]),
        )


def _u_power(u: Fraction, e: Fraction) -> RealExpr:
    return nx.ZERO if u == 0 else nx.power(u, e)


@dataclass(frozen=True)
class Piece:
    lo: Fraction
    hi: Fraction
    anchor: Fraction
    width: Fraction
    gamma: Fraction
    scale: RealExpr

    def __post_init__(self):
        if not (0 <= self.lo < self.hi <= 1):
            raise ValueError("piece interval must satisfy 0 <= lo < hi <= 1")
        if self.anchor > self.lo or self.width <= 0 or self.gamma < 0:
            raise ValueError("invalid piece parameters")

    @property
    def support(self) -> tuple[Fraction, Fraction]:
        return self.lo, self.hi

    def contains(self, x: Fraction) -> bool:
        return self.lo <= x < self.hi

    def value(self, x: Fraction) -> RealExpr:
        if not self.contains(x):
            return nx.ZERO
        if self.gamma == 0:
            return self.scale
        u = (x - self.anchor) / self.width
        if u == 0:
            raise ZeroDivisionError("evaluation at the singular endpoint")
        return nx.mul(self.scale, nx.power(u, -self.gamma))

    def scaled(self, c) -> "Piece":
        return Piece(self.lo, self.hi, self.anchor, self.width, self.gamma, nx.mul(c, self.scale))

    def transported(self, c: Fraction, m: Fraction) -> "Piece":
        """Image under x -> c + m x."""
        return Piece(
            c + m * self.lo, c + m * self.hi, c + m * self.anchor, m * self.width, self.gamma, self.scale
        )

    def clipped(self, lo: Fraction, hi: Fraction) -> "Piece | None":
        a, b = max(lo, self.lo), min(hi, self.hi)
        if a >= b:
            return None
        return Piece(a, b, self.anchor, self.width, self.gamma, self.scale)

    def is_zero(self) -> bool:
        return self.scale.is_zero()

    def power_integral(self, q: Fraction):
        """Converges(expr, exact) or Diverges for int |piece|^q."""
        c = nx.power(nx.abs_(self.scale), q)
        s = q * self.gamma
        u0 = (self.lo - self.anchor) / self.width
        u1 = (self.hi - self.anchor) / self.width
        if s == 0:
            return Converges(nx.mul(c, self.hi - self.lo), exact=True)
        if u0 == 0 and s >= 1:
            return Diverges(FnDivergenceCertificate(self.lo, self.hi, s, c))
        if s == 1:
            # logarithm; bound by the length times the value at the left end
            return Converges(nx.mul(c, self.hi - self.lo, nx.power(u0, -s)), exact=False)
        # w * (u1^(1-s) - u0^(1-s)) / (1 - s)
        diff = nx.add(_u_power(u1, 1 - s), nx.mul(-1, _u_power(u0, 1 - s)))
        return Converges(nx.mul(c, self.width / (1 - s), diff), exact=True)

    def _value_raw(self, x: Fraction) -> RealExpr:
        if self.gamma == 0:
            return self.scale
        return nx.mul(self.scale, nx.power((x - self.anchor) / self.width, -self.gamma))

    def to_json(self) -> dict:
        return {
            "type": "piece",
            "interval": [format_rational(self.lo), format_rational(self.hi)],
            "anchor": format_rational(self.anchor),
            "width": format_rational(self.width),
            "gamma": format_rational(self.gamma),
            "scale_expr": nx.expr_to_json(self.scale),
        }


def witness_gamma(p: Fraction, k: int) -> Fraction:
    return 1 / (p + Fraction(1, k))


def witness_scale(p: Fraction, k: int) -> RealExpr:
    """c_k with c_k^p * |J_k| / (1 - p gamma_k) = 2^(-k p); note 1 - p gamma_k = 1/(k p + 1)."""
    mass = nx.mul(nx.power(2, -k * p), Fraction(2 ** (k + 1)) / (k * p + 1))
    return nx.power(mass, 1 / p)


@dataclass(frozen=True)
class WitnessFamily:
    """sum_{k >= k_start} coeff * c_k ((x - a_k)/|J_k|)^(-gamma_k) on J_k, moved by x -> shift + factor x."""

    p: Fraction
    shift: Fraction = Fraction(0)
    factor: Fraction = Fraction(1)
    coeff: Fraction = Fraction(1)
    k_start: int = 1

    @property
    def support(self) -> tuple[Fraction, Fraction]:
        return self.shift, self.shift + self.factor * Fraction(1, 2**self.k_start)

    def piece(self, k: int) -> Piece:
        if k < self.k_start:
            raise ValueError("block below the family start")
        lo, hi = Fraction(1, 2 ** (k + 1)), Fraction(1, 2**k)
        base = Piece(lo, hi, lo, hi - lo, witness_gamma(self.p, k), nx.mul(self.coeff, witness_scale(self.p, k)))
        return base.transported(self.shift, self.factor)

    def block_of(self, x: Fraction) -> int | None:
        a, b = self.support
        if not a <= x < b or x == self.shift:
            return None
        t = (x - self.shift) / self.factor
        # t in [2^-k-1, 2^-k)  <=>  2^k < 1/t <= 2^(k+1)
        inv = 1 / t
        k = inv.numerator.bit_length() - inv.denominator.bit_length()
        while Fraction(2) ** k >= inv:
            k -= 1
        while Fraction(2) ** (k + 1) < inv:
            k += 1
        return k if k >= self.k_start else None

    def contains(self, x: Fraction) -> bool:
        return self.block_of(x) is not None

    def value(self, x: Fraction) -> RealExpr:
        k = self.block_of(x)
        return nx.ZERO if k is None else self.piece(k).value(x)

    def scaled(self, c) -> "WitnessFamily":
        return WitnessFamily(self.p, self.shift, self.factor, self.coeff * as_fraction(c), self.k_start)

    def transported(self, c: Fraction, m: Fraction) -> "WitnessFamily":
        return WitnessFamily(self.p, c + m * self.shift, m * self.factor, self.coeff, self.k_start)

    def is_zero(self) -> bool:
        return self.coeff == 0

    def pmass(self) -> RealExpr:
        # factor * sum_{k >= k_start} 2^(-k p)
        r = nx.power(2, -self.p)
        return nx.mul(
            self.factor, nx.power(r, self.k_start), nx.power(nx.add(1, nx.mul(-1, r)), -1)
        )

    def power_integral(self, q: Fraction):
        weight = nx.power(abs(self.coeff), q)
        if q == self.p:
            return Converges(nx.mul(weight, self.pmass()), exact=True)
        if q < self.p:
            # Hoelder on a support of length L: int |g|^q <= L^(1 - q/p) (int |g|^p)^(q/p)
            a, b = self.support
            bound = nx.mul(weight, nx.power(b - a, 1 - q / self.p), nx.power(self.pmass(), q / self.p))
            return Converges(bound, exact=False)
        k = max(self.k_start, math.ceil(1 / (q - self.p)))
        return self.piece(k).power_integral(q)

    def to_json(self) -> dict:
        return {
            "type": "witness_family",
            "p": format_rational(self.p),
            "shift": format_rational(self.shift),
            "factor": format_rational(self.factor),
            "coeff": format_rational(self.coeff),
            "k_start": self.k_start,
        }


Part = Piece | WitnessFamily


def _overlap(a: tuple, b: tuple) -> bool:
    return max(a[0], b[0]) < min(a[1], b[1])


@dataclass(frozen=True)
class PiecewisePowerFunction:
    p: Fraction
    parts: tuple = ()

    @cached_property
    def mixed(self) -> bool:
        sups = [part.support for part in self.parts]
        return any(_overlap(sups[i], sups[j]) for i in range(len(sups)) for j in range(i + 1, len(sups)))

    def value(self, x) -> RealExpr:
        x = as_fraction(x)
        return nx.add(*(part.value(x) for part in self.parts))

    def is_zero(self) -> bool:
        return not self.parts

    def to_json(self) -> dict:
        return {
            "type": "function",
            "p": format_rational(self.p),
            "pieces": [part.to_json() for part in self.parts],
        }


def function(p, parts) -> PiecewisePowerFunction:
    kept = tuple(part for part in parts if not part.is_zero())
    return PiecewisePowerFunction(as_fraction(p), kept)


def constant_function(p, c=1, lo=0, hi=1) -> PiecewisePowerFunction:
    lo, hi = as_fraction(lo), as_fraction(hi)
    return function(p, [Piece(lo, hi, lo, hi - lo, Fraction(0), nx.lift(c))])


def power_piece(p, gamma, c=1, lo=0, hi=1) -> PiecewisePowerFunction:
    lo, hi = as_fraction(lo), as_fraction(hi)
    return function(p, [Piece(lo, hi, lo, hi - lo, as_fraction(gamma), nx.lift(c))])


def fn_witness(p) -> PiecewisePowerFunction:
    """Element of L_p outside every L_q, q > p, supported in [0, 1/2)."""
    p = as_fraction(p)
    if p <= 0:
        raise ValueError("p must be positive")
    return function(p, [WitnessFamily(p)])


def scale_function(f: PiecewisePowerFunction, c) -> PiecewisePowerFunction:
    c = as_fraction(c)
    if c == 0:
        return PiecewisePowerFunction(f.p, ())
    return function(f.p, [part.scaled(c) for part in f.parts])


def add_functions(*fs: PiecewisePowerFunction) -> PiecewisePowerFunction:
    p = fs[0].p
    if any(f.p != p for f in fs):
        raise ValueError("functions live in different L_p spaces")
    return function(p, [part for f in fs for part in f.parts])


def restrict(f: PiecewisePowerFunction, lo, hi) -> PiecewisePowerFunction:
    """f times the indicator of [lo, hi)."""
    lo, hi = as_fraction(lo), as_fraction(hi)
    out = []
    for part in f.parts:
        a, b = part.support
        if b <= lo or a >= hi:
            continue
        if lo <= a and b <= hi:
            out.append(part)
            continue
        if isinstance(part, Piece):
            out.append(part.clipped(lo, hi))
            continue
        # split the family: blocks entirely inside stay a family, the rest are clipped pieces
        k = part.k_start
        while k < part.k_start + 4096:
            pc = part.piece(k)
            if lo <= pc.lo and pc.hi <= hi and lo <= part.shift:
                out.append(WitnessFamily(part.p, part.shift, part.factor, part.coeff, k))
                break
            clipped = pc.clipped(lo, hi)
            if clipped is not None:
                out.append(clipped)
            k += 1
        else:
            raise ValueError("restriction cuts through the singular end of a family")
    return function(f.p, out)


def dyadic_interval(n: int) -> tuple[Fraction, Fraction]:
    """I_n = [1 - 2^-n, 1 - 2^-(n+1))."""
    if n < 1:
        raise ValueError("n starts at 1")
    return 1 - Fraction(1, 2**n), 1 - Fraction(1, 2 ** (n + 1))


def rescale_to_interval(f: PiecewisePowerFunction, interval) -> PiecewisePowerFunction:
    """f_n(x) = f(t) where x = (1 - t) c + t d."""
    c, d = (as_fraction(v) for v in interval)
    if not (HALF <= c < d <= 1):
        raise ValueError("target interval must lie in [1/2, 1)")
    return function(f.p, [part.transported(c, d - c) for part in f.parts])


# ---------------------------------------------------------------------------
# membership


def lq_fn_membership(f: PiecewisePowerFunction, q, budget: sq.Budget | None = None):
    q = as_fraction(q)
    if q <= 0:
        raise ValueError("q must be positive")
    if f.is_zero():
        return Converges(nx.ZERO, exact=True)
    if f.mixed:
        return lower_sum_evidence(f, q, budget)
    verdicts = [part.power_integral(q) for part in f.parts]
    for v in verdicts:
        if isinstance(v, Diverges):
            return v
    return Converges(nx.add(*(v.bound for v in verdicts)), exact=all(v.exact for v in verdicts))


def _materialized_pieces(f: PiecewisePowerFunction, depth: int) -> list[Piece]:
    out = []
    for part in f.parts:
        if isinstance(part, Piece):
            out.append(part)
        else:
            out.extend(part.piece(k) for k in range(part.k_start, part.k_start + depth))
    return out


def _known_region(f: PiecewisePowerFunction, depth: int) -> list[tuple[Fraction, Fraction]]:
    """Maximal intervals on which every family contribution is one of its first ``depth`` pieces."""
    holes = []
    for part in f.parts:
        if isinstance(part, WitnessFamily):
            a = part.shift
            holes.append((a, a + part.factor * Fraction(1, 2 ** (part.k_start + depth))))
    points = {Fraction(0), Fraction(1)}
    for pc in _materialized_pieces(f, depth):
        points.update((pc.lo, pc.hi))
    for a, b in holes:
        points.update((a, b))
    pts = sorted(points)
    cells = []
    for a, b in zip(pts, pts[1:]):
        if not any(_overlap((a, b), h) for h in holes):
            cells.append((a, b))
    return cells


def lower_sum_evidence(
    f: PiecewisePowerFunction, q, budget: sq.Budget | None = None, depth: int = 24, levels: int = 60
) -> NumericEvidence:
    """Rigorous lower bounds on int |f|^q from geometric sub-grids of each elementary cell.

    On a cell every piece is monotone, so each piece's values on a sub-interval
    lie between its endpoint values; where the summed enclosure excludes 0 the
    sub-interval contributes length * min|f|^q.
    """
    budget = budget or sq.Budget()
    q = as_fraction(q)
    pieces = _materialized_pieces(f, depth)
    total = Fraction(0)
    checkpoints = []
    count = 0
    reached = False
    for a, b in _known_region(f, depth):
        active = [pc for pc in pieces if pc.lo <= a and b <= pc.hi]
        if not active:
            continue
        cuts = [a + (b - a) / 2**i for i in range(levels, -1, -1)]
        for u, v in zip(cuts, cuts[1:]):
            lo_sum = hi_sum = Fraction(0)
            for pc in active:
                ends = [nx.enclose(pc._value_raw(x), budget.eps) for x in (u, v)]
                lo_sum += min(e.lo for e in ends)
                hi_sum += max(e.hi for e in ends)
            m = lo_sum if lo_sum > 0 else (-hi_sum if hi_sum < 0 else Fraction(0))
            if m > 0:
                total += (v - u) * nx.enclose(nx.power(m, q), budget.eps).lo
            count += 1
            if total > budget.threshold:
                reached = True
                break
        checkpoints.append((count, Interval(total, total)))
        if reached:
            break
    if not checkpoints:
        checkpoints.append((0, Interval(Fraction(0), Fraction(0))))
    return NumericEvidence(tuple(checkpoints), budget.threshold, reached)


# ---------------------------------------------------------------------------
# operator


@dataclass(frozen=True)
class FnOperator:
    f: PiecewisePowerFunction
    f_tilde: PiecewisePowerFunction

    @property
    def p(self) -> Fraction:
        return self.f.p

    def component(self, n: int) -> PiecewisePowerFunction:
        return rescale_to_interval(self.f_tilde, dyadic_interval(n))

    def apply(self, coeffs) -> PiecewisePowerFunction:
        coeffs = [as_fraction(c) for c in coeffs]
        parts = []
        if coeffs and coeffs[0]:
            parts.append(scale_function(self.f, coeffs[0]))
        for n, c in enumerate(coeffs[1:], start=1):
            if c:
                parts.append(scale_function(self.component(n), c))
        return add_functions(*parts) if parts else PiecewisePowerFunction(self.p, ())

    def to_json(self) -> dict:
        return {"type": "fn_operator", "f": self.f.to_json()}


def _pmass(f: PiecewisePowerFunction) -> RealExpr:
    v = lq_fn_membership(f, f.p)
    if not isinstance(v, Converges):
        raise ValueError("function without a certified L_p bound")
    return v.bound


def build_fn_operator(f: PiecewisePowerFunction, q_grid: Sequence | None = None) -> FnOperator:
    if not isinstance(lq_fn_membership(f, f.p), Converges):
        raise ValueError("f is not certified in L_p")
    grid = q_grid if q_grid is not None else [f.p + Fraction(1, 2), f.p + 1, 2 * f.p + 1]
    for q in grid:
        if isinstance(lq_fn_membership(f, q), Converges):
            raise ValueError(f"f lies in L_q for q = {format_rational(as_fraction(q))}")
    f_tilde = restrict(f, 0, HALF)
    if f_tilde.is_zero():
        raise ValueError("f vanishes on [0, 1/2]")
    return FnOperator(f, f_tilde)


def apply_fn_operator(op: FnOperator, coeffs) -> PiecewisePowerFunction:
    return op.apply(coeffs)


def certify_fn_outside(op: FnOperator, coeffs, q, budget: sq.Budget | None = None):
    q = as_fraction(q)
    if q <= op.p:
        raise ValueError("q must exceed p")
    coeffs = [as_fraction(c) for c in coeffs]
    if not any(coeffs):
        raise ValueError("coefficient vector is zero")
    if coeffs[0]:
        # on [0, 1/2] the image is a_0 f~
        v = lq_fn_membership(scale_function(op.f_tilde, coeffs[0]), q, budget)
    else:
        r = next(i for i, c in enumerate(coeffs) if c)
        # on I_r the image is a_r f_r
        v = lq_fn_membership(scale_function(op.component(r), coeffs[r]), q, budget)
    if isinstance(v, Diverges):
        return v
    return lq_fn_membership(op.apply(coeffs), q, budget)


def fn_norm_bound_check(op: FnOperator, coeffs) -> bool:
    """||T(a)||_p^pt <= M^(pt/p) sum |a_i|^pt with M = max(||f||_p^p, ||f~||_p^p)."""
    p = op.p
    pt = p_tilde(p)
    coeffs = [as_fraction(c) for c in coeffs]
    if not any(coeffs):
        return True
    Mf, Mt = _pmass(op.f), _pmass(op.f_tilde)
    M = Mf if nx.certify_le(Mt, Mf) else (Mt if nx.certify_le(Mf, Mt) else nx.add(Mf, Mt))
    nonzero = [(i, c) for i, c in enumerate(coeffs) if c]
    if len(nonzero) == 1:
        i, _ = nonzero[0]
        mass = Mf if i == 0 else _pmass(op.component(i))
        return nx.certify_le(mass, M)
    image = op.apply(coeffs)
    v = lq_fn_membership(image, p)
    if not isinstance(v, Converges):
        return False
    rhs = nx.mul(nx.power(M, pt / p), nx.add(*(nx.power(abs(c), pt) for _, c in nonzero)))
    return nx.certify_le(nx.power(v.bound, pt / p), rhs)


def injective_on_half(op: FnOperator, coeffs, samples: int = 8) -> bool:
    """If T(a) vanishes on [0, 1/2] then a_0 = 0: f~ is nonzero at some sampled point."""
    a, b = op.f_tilde.parts[0].support
    # odd-thirds sample points never land on a dyadic block anchor
    for i in range(1, samples + 1):
        x = a + (b - a) * Fraction(3 * i - 1, 3 * samples)
        val = op.f_tilde.value(x)
        if not val.is_zero() and nx.compare_strict(nx.abs_(val), 0, Fraction(1, 2**60)) is nx.Comparison.GREATER:
            return True
    return False


# ---------------------------------------------------------------------------
# JSON


def part_from_json(obj: dict) -> Part:
    t = obj.get("type")
    if t == "piece":
        lo, hi = obj["interval"]
        return Piece(
            nx.parse_rational(lo),
            nx.parse_rational(hi),
            nx.parse_rational(obj["anchor"]),
            nx.parse_rational(obj["width"]),
            nx.parse_rational(obj["gamma"]),
            nx.expr_from_json(obj["scale_expr"]),
        )
    if t == "witness_family":
        return WitnessFamily(
            nx.parse_rational(obj["p"]),
            nx.parse_rational(obj["shift"]),
            nx.parse_rational(obj["factor"]),
            nx.parse_rational(obj["coeff"]),
            int(obj["k_start"]),
        )
    raise ValueError(f"unknown piece type {t!r}")


def function_from_json(obj: dict) -> PiecewisePowerFunction:
    if obj.get("type") != "function":
        raise ValueError("not a function descriptor")
    p = nx.parse_rational(obj["p"])
    if p <= 0:
        raise ValueError("p must be positive")
    return function(p, [part_from_json(x) for x in obj["pieces"]])


def verdict_from_json(obj: dict) -> sq.MembershipVerdict:
    """Like the sequence parser, but singularity certificates are read as function certificates."""
    if obj.get("verdict") == "diverges" and obj["certificate"].get("kind") == "singularity":
        return Diverges(FnDivergenceCertificate.from_json(obj["certificate"]))
    return sq.verdict_from_json(obj)


def iter_pieces(f: PiecewisePowerFunction, depth: int) -> Iterator[Piece]:
    yield from _materialized_pieces(f, depth)

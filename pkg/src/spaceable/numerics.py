"""Exact positive real expressions and certified rational interval enclosures.

Every value that shows up in a norm computation is kept as a small expression
tree over rationals: rational powers, finite sums and products, absolute values
and p-series values ``zeta(s) = sum_{r>=1} r**-s`` with rational ``s > 1``.
Nothing here ever touches a float.  Enclosures are computed on a fixed,
deterministic precision schedule and intersected level by level, so asking for a
tighter enclosure can only ever shrink the interval returned.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb
from typing import Iterable, Union

import gmpy2

Number = Union[int, Fraction]

# bits of absolute precision used on successive refinement levels
BIT_SCHEDULE = tuple(24 * 2**i for i in range(9))


class PrecisionError(ArithmeticError):
    """Raised when the precision schedule is exhausted before a target is met."""


class _NeedMorePrecision(Exception):
    pass


def as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return parse_rational(x)
    raise TypeError(f"not an exact rational: {x!r}")


def parse_rational(text: str) -> Fraction:
    """Parse a ``"num/den"`` (or bare integer) string; floats are refused."""
    s = text.strip()
    if not s or any(ch in s for ch in ".eE "):
        raise ValueError(f"malformed rational {text!r}")
    num, _, den = s.partition("/")
    try:
        n = int(num)
        d = int(den) if den else 1
    except ValueError:
        raise ValueError(f"malformed rational {text!r}") from None
    if d <= 0:
        raise ValueError(f"malformed rational {text!r}: denominator must be positive")
    return Fraction(n, d)


def format_rational(x: Number) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


# ---------------------------------------------------------------------------
# expression nodes


class RealExpr:
    """Base class; build instances through the module-level constructors."""

    __slots__ = ()

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, mul(-1, other))

    def __rsub__(self, other):
        return add(other, mul(-1, self))

    def __neg__(self):
        return mul(-1, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return mul(self, power(other, -1))

    def __pow__(self, exponent):
        return power(self, exponent)

    def is_zero(self) -> bool:
        return isinstance(self, Const) and self.value == 0

    def is_exact(self) -> bool:
        return isinstance(self, Const)


@dataclass(frozen=True)
class Const(RealExpr):
    value: Fraction

    def __repr__(self):
        return f"Const({self.value})"


@dataclass(frozen=True)
class Sum(RealExpr):
    # (coefficient, atom) pairs; atoms are never Const or Sum
    terms: tuple
    const: Fraction


@dataclass(frozen=True)
class Prod(RealExpr):
    factors: tuple


@dataclass(frozen=True)
class Pow(RealExpr):
    base: RealExpr
    exp: Fraction


@dataclass(frozen=True)
class Zeta(RealExpr):
    """The p-series value sum_{r>=1} r**(-s)."""

    s: Fraction


@dataclass(frozen=True)
class Abs(RealExpr):
    arg: RealExpr


ZERO = Const(Fraction(0))
ONE = Const(Fraction(1))


def const(x: Number) -> Const:
    return Const(as_fraction(x))


def lift(x) -> RealExpr:
    if isinstance(x, RealExpr):
        return x
    return Const(as_fraction(x))


def _split_scale(e: RealExpr) -> tuple[Fraction, RealExpr | None]:
    """Write ``e`` as ``c * atom``; atom is None for constants."""
    if isinstance(e, Const):
        return e.value, None
    if isinstance(e, Sum) and len(e.terms) == 1 and e.const == 0:
        c, atom = e.terms[0]
        return c, atom
    return Fraction(1), e


def _scaled(c: Fraction, atom: RealExpr | None) -> RealExpr:
    if atom is None or c == 0:
        return Const(c if atom is None else Fraction(0))
    if c == 1:
        return atom
    return Sum(((c, atom),), Fraction(0))


def add(*items) -> RealExpr:
    total = Fraction(0)
    coeffs: dict = {}
    for item in items:
        e = lift(item)
        if isinstance(e, Const):
            total += e.value
        elif isinstance(e, Sum):
            total += e.const
            for c, atom in e.terms:
                coeffs[atom] = coeffs.get(atom, 0) + c
        else:
            coeffs[e] = coeffs.get(e, 0) + 1
    terms = tuple((Fraction(c), a) for a, c in coeffs.items() if c != 0)
    if not terms:
        return Const(total)
    if len(terms) == 1 and total == 0:
        return _scaled(*terms[0])
    return Sum(terms, total)


def mul(*items) -> RealExpr:
    scale = Fraction(1)
    bases: dict = {}
    for item in items:
        c, atom = _split_scale(lift(item))
        scale *= c
        if scale == 0:
            return ZERO
        if atom is None:
            continue
        parts = atom.factors if isinstance(atom, Prod) else (atom,)
        for f in parts:
            if isinstance(f, Pow):
                bases[f.base] = bases.get(f.base, 0) + f.exp
            else:
                bases[f] = bases.get(f, 0) + 1
    factors = []
    for base, ex in bases.items():
        if ex == 0:
            continue
        f = power(base, ex)
        c, atom = _split_scale(f)
        scale *= c
        if atom is not None:
            factors.extend(atom.factors if isinstance(atom, Prod) else (atom,))
    if not factors:
        return Const(scale)
    if len(factors) == 1:
        return _scaled(scale, factors[0])
    return _scaled(scale, Prod(tuple(factors)))


def _exact_root(x: Fraction, b: Fraction) -> Fraction | None:
    """x**b when it is rational (x > 0), else None."""
    m, d = b.numerator, b.denominator
    y = x**m
    rn, exact_n = gmpy2.iroot(gmpy2.mpz(y.numerator), d)
    if not exact_n:
        return None
    rd, exact_d = gmpy2.iroot(gmpy2.mpz(y.denominator), d)
    if not exact_d:
        return None
    return Fraction(int(rn), int(rd))


def power(e, exponent) -> RealExpr:
    b = as_fraction(exponent)
    e = lift(e)
    if b == 0:
        return ONE
    if b == 1:
        return e
    if isinstance(e, Const):
        v = e.value
        if v == 0:
            if b < 0:
                raise ZeroDivisionError("zero to a negative power")
            return ZERO
        if b.denominator == 1:
            return Const(v ** b.numerator)
        if v < 0:
            raise ValueError("fractional power of a negative rational")
        r = _exact_root(v, b)
        return Const(r) if r is not None else Pow(e, b)
    if isinstance(e, Pow):
        return power(e.base, e.exp * b)
    c, atom = _split_scale(e)
    if atom is not None and c != 1:
        if c > 0:
            return mul(power(Const(c), b), power(atom, b))
        if b.denominator == 1:
            return mul(Const(c**b.numerator), power(atom, b))
    if isinstance(e, Prod):
        return mul(*(power(f, b) for f in e.factors))
    return Pow(e, b)


def zeta(s) -> RealExpr:
    s = as_fraction(s)
    if s <= 1:
        raise ValueError(f"p-series with exponent {s} <= 1 diverges; no enclosure exists")
    return Zeta(s)


def is_nonnegative(e: RealExpr) -> bool:
    """Structural (sufficient) test for e >= 0."""
    if isinstance(e, Const):
        return e.value >= 0
    if isinstance(e, (Pow, Zeta, Abs)):
        return True
    if isinstance(e, Prod):
        return all(is_nonnegative(f) for f in e.factors)
    if isinstance(e, Sum):
        return e.const >= 0 and all(c >= 0 and is_nonnegative(a) for c, a in e.terms)
    return False


def abs_(e) -> RealExpr:
    e = lift(e)
    if isinstance(e, Const):
        return Const(abs(e.value))
    if is_nonnegative(e):
        return e
    c, atom = _split_scale(e)
    if atom is not None and is_nonnegative(atom):
        return _scaled(abs(c), atom)
    return Abs(e)


def pseries_tail_bound(s, N: int) -> RealExpr:
    """Integral-test bound ``N**(1-s)/(s-1)`` for ``sum_{r>N} r**(-s)``."""
    s = as_fraction(s)
    if s <= 1:
        raise ValueError(f"tail of a p-series with exponent {s} <= 1 is infinite")
    if N < 1:
        raise ValueError("N must be a positive integer")
    return mul(Fraction(1) / (s - 1), power(N, 1 - s))


# ---------------------------------------------------------------------------
# interval evaluation


@dataclass(frozen=True)
class Interval:
    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    def contains(self, x) -> bool:
        if isinstance(x, Interval):
            return self.lo <= x.lo and x.hi <= self.hi
        x = as_fraction(x)
        return self.lo <= x <= self.hi

    def __add__(self, other: "Interval") -> "Interval":
        return Interval(self.lo + other.lo, self.hi + other.hi)

    def intersect(self, other: "Interval") -> "Interval":
        return Interval(max(self.lo, other.lo), min(self.hi, other.hi))

    def to_json(self) -> list:
        return [format_rational(self.lo), format_rational(self.hi)]


def _floor_dyadic(x: Fraction, bits: int) -> Fraction:
    return Fraction((x.numerator << bits) // x.denominator, 1 << bits)


def _ceil_dyadic(x: Fraction, bits: int) -> Fraction:
    return Fraction(-((-x.numerator << bits) // x.denominator), 1 << bits)


def _tidy(lo: Fraction, hi: Fraction, bits: int) -> tuple[Fraction, Fraction]:
    # outward rounding keeps denominators from exploding
    limit = bits + 16
    if lo.denominator.bit_length() > limit:
        lo = _floor_dyadic(lo, limit)
    if hi.denominator.bit_length() > limit:
        hi = _ceil_dyadic(hi, limit)
    return lo, hi


@lru_cache(maxsize=1 << 16)
def _root_bounds(x: Fraction, b: Fraction, bits: int) -> tuple[Fraction, Fraction]:
    """Dyadic bracket of x**b (x > 0) with width 2**-bits, exact integers only."""
    r = _exact_root(x, b)
    if r is not None:
        return r, r
    m, d = b.numerator, b.denominator
    y = x**m
    scaled = (gmpy2.mpz(y.numerator) << (bits * d)) // gmpy2.mpz(y.denominator)
    low, _ = gmpy2.iroot(scaled, d)
    low = int(low)
    return Fraction(low, 1 << bits), Fraction(low + 1, 1 << bits)


def _pow_interval(lo: Fraction, hi: Fraction, b: Fraction, bits: int, nonneg: bool):
    if b.denominator == 1:
        n = b.numerator
        if n < 0 and lo <= 0 <= hi:
            raise _NeedMorePrecision
        cands = [lo**n, hi**n]
        if n > 0 and n % 2 == 0 and lo < 0 < hi:
            cands.append(Fraction(0))
        return min(cands), max(cands)
    if lo < 0:
        if hi <= 0 and not nonneg:
            raise ValueError("fractional power of a negative quantity")
        lo = Fraction(0)
    if lo == 0 and b < 0:
        raise _NeedMorePrecision
    if b > 0:
        low = _root_bounds(lo, b, bits)[0] if lo > 0 else Fraction(0)
        high = _root_bounds(hi, b, bits)[1] if hi > 0 else Fraction(0)
    else:
        low = _root_bounds(hi, b, bits)[0]
        high = _root_bounds(lo, b, bits)[1]
    return low, high


@lru_cache(maxsize=None)
def _bernoulli_even(j: int) -> Fraction:
    """B_{2j} by the standard recurrence."""
    return _bernoulli_table(2 * j)[2 * j]


@lru_cache(maxsize=8)
def _bernoulli_table(n: int) -> tuple:
    B = [Fraction(1)]
    for m in range(1, n + 1):
        B.append(-sum(comb(m + 1, k) * B[k] for k in range(m)) / (m + 1))
    return tuple(B)


@lru_cache(maxsize=4096)
def _zeta_interval(s: Fraction, bits: int) -> tuple[Fraction, Fraction]:
    # Euler-Maclaurin from N on; x**-s is completely monotone, so the remainder
    # after m correction terms lies between 0 and the (m+1)-th term.
    N = max(8, bits // 2)
    guard = bits + N.bit_length() + 8
    lo = hi = Fraction(0)
    for r in range(2, N):
        a, b = _root_bounds(Fraction(r), -s, guard)
        lo += a
        hi += b
    lo += 1
    hi += 1
    pl, ph = _root_bounds(Fraction(N), -s, guard)
    main = Fraction(N) / (s - 1) + Fraction(1, 2)
    rising = s  # (s)_{2j-1}
    j = 1
    limit = Fraction(1, 1 << (bits + 4))
    while True:
        coef = _bernoulli_even(j) / _factorial(2 * j) * rising * Fraction(1, N ** (2 * j - 1))
        if abs(coef) < limit or j > 3 * N:
            remainder = coef
            break
        main += coef
        rising *= (s + 2 * j - 1) * (s + 2 * j)
        j += 1
    lo += pl * (main + min(Fraction(0), remainder))
    hi += ph * (main + max(Fraction(0), remainder))
    return _tidy(lo, hi, bits)


@lru_cache(maxsize=None)
def _factorial(n: int) -> int:
    return 1 if n < 2 else n * _factorial(n - 1)


def _interval(e: RealExpr, bits: int) -> tuple[Fraction, Fraction]:
    if isinstance(e, Const):
        return e.value, e.value
    if isinstance(e, Sum):
        lo = hi = e.const
        for c, atom in e.terms:
            a, b = _interval(atom, bits)
            if c >= 0:
                lo += c * a
                hi += c * b
            else:
                lo += c * b
                hi += c * a
        return _tidy(lo, hi, bits)
    if isinstance(e, Prod):
        lo, hi = _interval(e.factors[0], bits)
        for f in e.factors[1:]:
            a, b = _interval(f, bits)
            cands = (lo * a, lo * b, hi * a, hi * b)
            lo, hi = min(cands), max(cands)
        return _tidy(lo, hi, bits)
    if isinstance(e, Pow):
        a, b = _interval(e.base, bits)
        return _tidy(*_pow_interval(a, b, e.exp, bits, is_nonnegative(e.base)), bits)
    if isinstance(e, Zeta):
        return _zeta_interval(e.s, bits)
    if isinstance(e, Abs):
        a, b = _interval(e.arg, bits)
        if a >= 0:
            return a, b
        if b <= 0:
            return -b, -a
        return Fraction(0), max(-a, b)
    raise TypeError(f"unknown expression node {e!r}")


def _levels(e: RealExpr):
    """Yield the nested enclosures of ``e`` along the precision schedule."""
    current = None
    for bits in BIT_SCHEDULE:
        try:
            lo, hi = _interval(e, bits)
        except _NeedMorePrecision:
            continue
        current = Interval(lo, hi) if current is None else current.intersect(Interval(lo, hi))
        yield current
        if current.width == 0:
            return


def enclose(e, eps) -> Interval:
    """Rational interval containing the value of ``e`` with width at most ``eps``."""
    eps = as_fraction(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    e = lift(e)
    last = None
    for last in _levels(e):
        if last.width <= eps:
            return last
    raise PrecisionError(f"could not enclose {e!r} to width {eps}")


class Comparison(enum.Enum):
    LESS = "less"
    GREATER = "greater"
    INCONCLUSIVE = "inconclusive"


def compare_strict(e, c, eps_floor) -> Comparison:
    """Decide e < c or e > c by refinement; never claims equality."""
    e = lift(e)
    c = as_fraction(c)
    eps_floor = as_fraction(eps_floor)
    for iv in _levels(e):
        if iv.hi < c:
            return Comparison.LESS
        if iv.lo > c:
            return Comparison.GREATER
        if iv.width <= eps_floor:
            break
    return Comparison.INCONCLUSIVE


_EXPAND_LIMIT = 4096


def _small_factor(n: int, limit: int = 1 << 16) -> dict:
    """Prime factorisation by trial division; an unfactored cofactor is kept as one base."""
    out: dict = {}
    d = 2
    while d * d <= n and d <= limit:
        while n % d == 0:
            out[d] = out.get(d, 0) + 1
            n //= d
        d += 1
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


def _monomial(factors: dict) -> tuple[Fraction, tuple]:
    """Normalise {base: exponent}: rational bases split into primes, integer parts moved out."""
    coef = Fraction(1)
    exps: dict = {}
    for base, e in factors.items():
        if isinstance(base, Const):
            v = base.value
            if v <= 0:
                exps[base] = exps.get(base, Fraction(0)) + e
                continue
            for part, sign in ((v.numerator, 1), (v.denominator, -1)):
                for prime, m in _small_factor(part).items():
                    key = Const(Fraction(prime))
                    exps[key] = exps.get(key, Fraction(0)) + sign * m * e
        else:
            exps[base] = exps.get(base, Fraction(0)) + e
    key = []
    for base, e in exps.items():
        if isinstance(base, Const) and base.value > 0:
            whole = e.numerator // e.denominator
            coef *= base.value**whole
            e -= whole
        if e:
            key.append((base, e))
    return coef, tuple(sorted(key, key=repr))


def _expand(e: RealExpr) -> dict | None:
    """Distribute products over sums: {monomial key: coefficient}, or None if too large."""
    if isinstance(e, Const):
        return {(): e.value} if e.value else {}
    if isinstance(e, Sum):
        out = {(): e.const} if e.const else {}
        for c, t in e.terms:
            sub = _expand(t)
            if sub is None:
                return None
            for k, v in sub.items():
                out[k] = out.get(k, Fraction(0)) + c * v
        return {k: v for k, v in out.items() if v}
    if isinstance(e, Prod):
        out = {(): Fraction(1)}
        for f in e.factors:
            sub = _expand(f)
            if sub is None or len(out) * len(sub) > _EXPAND_LIMIT:
                return None
            nxt: dict = {}
            for k1, v1 in out.items():
                for k2, v2 in sub.items():
                    merged: dict = {}
                    for base, x in k1 + k2:
                        merged[base] = merged.get(base, Fraction(0)) + x
                    c, k = _monomial(merged)
                    nxt[k] = nxt.get(k, Fraction(0)) + v1 * v2 * c
            out = {k: v for k, v in nxt.items() if v}
        return out
    if isinstance(e, Pow):
        c, k = _monomial({e.base: e.exp})
    else:
        c, k = _monomial({e: Fraction(1)})
    return {k: c}


def expands_to_zero(e) -> bool:
    """Exact zero test after distributing products over sums."""
    e = lift(e)
    if isinstance(e, Const):
        return e.value == 0
    terms = _expand(e)
    return terms is not None and not terms


def certify_le(a, b, eps_floor=Fraction(1, 2**60)) -> bool:
    """True when a <= b is certified: equal after expansion, or b - a > 0 by enclosure."""
    a, b = lift(a), lift(b)
    if a == b:
        return True
    diff = add(b, mul(-1, a))
    if isinstance(diff, Const):
        return diff.value >= 0
    if expands_to_zero(diff):
        return True
    return compare_strict(diff, 0, eps_floor) is Comparison.GREATER


def approx(e, digits: int = 12) -> float:
    """Float approximation for display only."""
    iv = enclose(e, Fraction(1, 10**digits))
    return float((iv.lo + iv.hi) / 2)


# ---------------------------------------------------------------------------
# JSON


def expr_to_json(e: RealExpr):
    if isinstance(e, Const):
        return format_rational(e.value)
    if isinstance(e, Sum):
        return {
            "sum": [[format_rational(c), expr_to_json(a)] for c, a in e.terms],
            "const": format_rational(e.const),
        }
    if isinstance(e, Prod):
        return {"prod": [expr_to_json(f) for f in e.factors]}
    if isinstance(e, Pow):
        return {"pow": [expr_to_json(e.base), format_rational(e.exp)]}
    if isinstance(e, Zeta):
        return {"zeta": format_rational(e.s)}
    if isinstance(e, Abs):
        return {"abs": expr_to_json(e.arg)}
    raise TypeError(f"unknown expression node {e!r}")


def expr_from_json(obj) -> RealExpr:
    if isinstance(obj, str):
        return Const(parse_rational(obj))
    if not isinstance(obj, dict) or len(obj) == 0:
        raise ValueError(f"malformed expression {obj!r}")
    if "sum" in obj:
        terms = [mul(parse_rational(c), expr_from_json(a)) for c, a in obj["sum"]]
        return add(parse_rational(obj.get("const", "0/1")), *terms)
    if "prod" in obj:
        return mul(*(expr_from_json(f) for f in obj["prod"]))
    if "pow" in obj:
        base, ex = obj["pow"]
        return power(expr_from_json(base), parse_rational(ex))
    if "zeta" in obj:
        return zeta(parse_rational(obj["zeta"]))
    if "abs" in obj:
        return abs_(expr_from_json(obj["abs"]))
    raise ValueError(f"malformed expression {obj!r}")


def sum_exprs(items: Iterable) -> RealExpr:
    return add(*items)

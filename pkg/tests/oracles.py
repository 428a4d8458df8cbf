"""Independent reference computations used only by the tests."""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations, permutations

import mpmath
import numpy as np
from scipy import integrate

mpmath.mp.dps = 50


def mpf(x) -> mpmath.mpf:
    x = Fraction(x)
    return mpmath.mpf(x.numerator) / x.denominator


def zeta(s) -> mpmath.mpf:
    return mpmath.zeta(mpf(s))


def zeta_integral_bracket(s, N: int) -> tuple:
    """Integral-test bracket for zeta(s): partial sum to N plus [int_{N+1}, int_N] of x^-s."""
    s = mpf(s)
    head = mpmath.fsum(mpmath.mpf(r) ** -s for r in range(1, N + 1))
    lo = head + mpmath.mpf(N + 1) ** (1 - s) / (s - 1)
    hi = head + mpmath.mpf(N) ** (1 - s) / (s - 1)
    return lo, hi


def first_block(p) -> int:
    p = Fraction(p)
    return p.denominator // p.numerator + 1


def witness_term(p, k: int, r: int) -> mpmath.mpf:
    """Coordinate of the sequence witness at rank r of block k."""
    p = Fraction(p)
    e = 1 / (p - Fraction(1, k))
    return mpmath.mpf(2) ** -k * mpmath.mpf(r) ** -mpf(e) / zeta(e * p) ** (1 / mpf(p))


def witness_block_constant(p, k: int, q) -> float:
    """(2^-k / zeta(s_k)^(1/p))^q as a float."""
    p, q = Fraction(p), Fraction(q)
    e = 1 / (p - Fraction(1, k))
    return float((mpmath.mpf(2) ** -k / zeta(e * p) ** (1 / mpf(p))) ** mpf(q))


def block_power_sum(c: float, e: Fraction, R: int) -> float:
    """Brute-force sum_{r<=R} c r^-e in float64 (relative error far below 1e-9)."""
    r = np.arange(1, R + 1, dtype=np.float64)
    return float(np.sum(c * r ** (-float(e))))


def _det(M) -> Fraction:
    """Leibniz expansion; only for tiny matrices."""
    n = len(M)
    total = Fraction(0)
    for perm in permutations(range(n)):
        sign = 1
        for i in range(n):
            for j in range(i + 1, n):
                if perm[i] > perm[j]:
                    sign = -sign
        term = Fraction(sign)
        for i in range(n):
            term *= M[i][perm[i]]
            if term == 0:
                break
        total += term
    return total


def brute_rank(M) -> int:
    """Largest k with a nonzero k x k minor."""
    M = [[Fraction(x) for x in row] for row in M]
    if not M:
        return 0
    rows, cols = len(M), len(M[0])
    for k in range(min(rows, cols), 0, -1):
        for ri in combinations(range(rows), k):
            for ci in combinations(range(cols), k):
                if _det([[M[i][j] for j in ci] for i in ri]) != 0:
                    return k
    return 0


def brute_min_prefix(heads, max_n: int) -> int | None:
    """Smallest m with the first m columns of full row rank."""
    n = len(heads)
    for m in range(n, max_n + 1):
        cols = [[row[j] if j < len(row) else Fraction(0) for j in range(m)] for row in heads]
        if brute_rank(cols) == n:
            return m
    return None


def piece_integral(lo, hi, anchor, width, gamma, scale: float, q) -> float:
    """int_lo^hi |scale ((x - anchor)/width)^-gamma|^q dx by algebraic-weight quadrature."""
    lo, hi, anchor, width = (float(Fraction(v)) for v in (lo, hi, anchor, width))
    s = float(Fraction(q) * Fraction(gamma))
    c = abs(scale) ** float(q) * width**s
    if anchor == lo:
        val, _ = integrate.quad(lambda x: 1.0, lo, hi, weight="alg", wvar=(-s, 0.0), epsabs=0, epsrel=1e-12)
        return c * val
    val, _ = integrate.quad(lambda x: (x - anchor) ** -s, lo, hi, epsabs=0, epsrel=1e-12)
    return c * val

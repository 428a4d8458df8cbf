"""Exact rank and certified independence of head coordinates."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from math import prod
from typing import Sequence

import gmpy2

from . import numerics as nx
from .numerics import RealExpr, as_fraction
from .sequences import SymbolicSequence


class BudgetExceeded(RuntimeError):
    """No prefix length within the budget certified independence."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class Independence(enum.Enum):
    INDEPENDENT = "independent"
    INCONCLUSIVE = "inconclusive"


def _reduce(rows: list[list[Fraction]]) -> tuple[int, list[int]]:
    """Row-echelon in place; returns the rank and the pivot columns."""
    r = 0
    pivots = []
    n_cols = len(rows[0]) if rows else 0
    for c in range(n_cols):
        piv = next((i for i in range(r, len(rows)) if rows[i][c] != 0), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        lead = rows[r][c]
        for i in range(r + 1, len(rows)):
            if rows[i][c] != 0:
                f = rows[i][c] / lead
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
        if r == len(rows):
            break
    return r, pivots


def exact_rank(M: Sequence[Sequence]) -> int:
    rows = [[as_fraction(v) for v in row] for row in M]
    if not rows:
        return 0
    return _reduce(rows)[0]


def exact_det(M: Sequence[Sequence]) -> Fraction:
    rows = [[as_fraction(v) for v in row] for row in M]
    n = len(rows)
    det = Fraction(1)
    for c in range(n):
        piv = next((i for i in range(c, n) if rows[i][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            rows[c], rows[piv] = rows[piv], rows[c]
            det = -det
        det *= rows[c][c]
        for i in range(c + 1, n):
            if rows[i][c] != 0:
                f = rows[i][c] / rows[c][c]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[c])]
    return det


def _norm_upper(v: Sequence[Fraction]) -> Fraction:
    # rational upper bound on the Euclidean norm
    s = sum(x * x for x in v)
    if s == 0:
        return Fraction(0)
    num = int(gmpy2.isqrt(s.numerator * s.denominator)) + 1
    return Fraction(num, s.denominator)


def _det_enclosure(mid: list[list[Fraction]], rad: list[list[Fraction]]) -> tuple[Fraction, Fraction]:
    """Interval for det(A) over all A with |A - mid| <= rad entrywise.

    Hadamard: |det(M + E) - det(M)| <= prod(|m_i| + |e_i|) - prod(|m_i|), row norms.
    """
    d = exact_det(mid)
    m_norms = [_norm_upper(row) for row in mid]
    e_norms = [_norm_upper(row) for row in rad]
    slack = prod(a + b for a, b in zip(m_norms, e_norms)) - prod(m_norms)
    return d - slack, d + slack


@dataclass(frozen=True)
class HeadMatrix:
    """Rows are sequences, columns coordinates 1..m."""

    entries: tuple  # tuple of tuples of RealExpr

    @classmethod
    def of(cls, seqs: Sequence[SymbolicSequence], m: int) -> "HeadMatrix":
        return cls(tuple(tuple(s.head(m)) for s in seqs))

    @classmethod
    def rational(cls, M: Sequence[Sequence]) -> "HeadMatrix":
        return cls(tuple(tuple(nx.lift(v) for v in row) for row in M))

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.entries), len(self.entries[0]) if self.entries else 0

    def is_exact(self) -> bool:
        return all(e.is_exact() for row in self.entries for e in row)

    def exact(self) -> list[list[Fraction]]:
        return [[e.value for e in row] for row in self.entries]

    def enclosures(self, eps: Fraction) -> tuple[list[list[Fraction]], list[list[Fraction]]]:
        mids, rads = [], []
        for row in self.entries:
            mrow, rrow = [], []
            for e in row:
                iv = nx.enclose(e, eps)
                mrow.append((iv.lo + iv.hi) / 2)
                rrow.append((iv.hi - iv.lo) / 2)
            mids.append(mrow)
            rads.append(rrow)
        return mids, rads


def _candidate_columns(mid: list[list[Fraction]], n_rows: int) -> list[tuple[int, ...]]:
    """Pivot columns of the midpoint matrix first, then all other square selections."""
    _, pivots = _reduce([list(r) for r in mid])
    first = [tuple(pivots)] if len(pivots) == n_rows else []
    n_cols = len(mid[0])
    if n_cols <= 12:
        rest = [c for c in combinations(range(n_cols), n_rows) if c not in first]
    else:
        rest = []
    return first + rest


def certified_independent(
    M: HeadMatrix, eps_floor=Fraction(1, 2**60), eps_start=Fraction(1, 2**20)
) -> Independence:
    """INDEPENDENT only when some maximal minor's determinant enclosure excludes 0.

    Precision is refined in steps of 2^-10 down to ``eps_floor``.
    """
    n_rows, n_cols = M.shape
    if n_rows == 0:
        return Independence.INDEPENDENT
    if n_rows > n_cols:
        return Independence.INCONCLUSIVE
    if M.is_exact():
        ok = exact_rank(M.exact()) == n_rows
        return Independence.INDEPENDENT if ok else Independence.INCONCLUSIVE
    eps = as_fraction(eps_start)
    eps_floor = as_fraction(eps_floor)
    while True:
        mid, rad = M.enclosures(eps)
        for cols in _candidate_columns(mid, n_rows):
            sub_mid = [[row[c] for c in cols] for row in mid]
            sub_rad = [[row[c] for c in cols] for row in rad]
            lo, hi = _det_enclosure(sub_mid, sub_rad)
            if lo > 0 or hi < 0:
                return Independence.INDEPENDENT
        if eps <= eps_floor:
            return Independence.INCONCLUSIVE
        eps = max(eps / 2**10, eps_floor)


def find_n0(
    seqs: Sequence[SymbolicSequence], max_n: int = 64, eps_floor=Fraction(1, 2**60)
) -> int:
    """Smallest m <= max_n whose head columns 1..m certify linear independence."""
    seqs = list(seqs)
    if not seqs:
        raise ValueError("need at least one sequence")
    tried = []
    for m in range(len(seqs), max_n + 1):
        H = HeadMatrix.of(seqs, m)
        if certified_independent(H, eps_floor) is Independence.INDEPENDENT:
            return m
        tried.append(m)
    raise BudgetExceeded(
        f"no prefix of length <= {max_n} certified independent",
        {"max_n": max_n, "rows": len(seqs), "tried": len(tried), "eps_floor": str(eps_floor)},
    )


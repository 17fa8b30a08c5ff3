"""Exact rational linear programming over fractions.Fraction.

Two-phase primal simplex on standard form

    maximize c.x   subject to  A x = b,  x >= 0,

with Bland's anti-cycling rule.  Everything stays in exact rationals: the
classification code needs boundary-vs-interior answers that no floating
point solver can give reliably.  Problem sizes here are tiny (tens of
variables), so the dense tableau is the right tool.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

_ZERO = Fraction(0)
_ONE = Fraction(1)


def _pivot(T: list[list[Fraction]], obj: list[Fraction], basis: list[int], row: int, col: int) -> None:
    piv = T[row][col]
    inv = _ONE / piv
    T[row] = [a * inv for a in T[row]]
    prow = T[row]
    for i, r in enumerate(T):
        if i != row and r[col] != 0:
            f = r[col]
            T[i] = [a - f * p for a, p in zip(r, prow)]
    if obj[col] != 0:
        f = obj[col]
        obj[:] = [a - f * p for a, p in zip(obj, prow)]
    basis[row] = col


def _simplex(T: list[list[Fraction]], obj: list[Fraction], basis: list[int]) -> str:
    """Run simplex to optimality on a tableau with a feasible basis.

    obj holds reduced costs (improvement direction); entering column is the
    lowest index with obj > 0, leaving row by minimum ratio with lowest
    basis index as tie-break (Bland).
    """
    n = len(obj) - 1
    while True:
        col = next((j for j in range(n) if obj[j] > 0), None)
        if col is None:
            return OPTIMAL
        row = None
        best = None
        for i, r in enumerate(T):
            if r[col] > 0:
                ratio = r[-1] / r[col]
                if best is None or ratio < best or (ratio == best and basis[i] < basis[row]):
                    best = ratio
                    row = i
        if row is None:
            return UNBOUNDED
        _pivot(T, obj, basis, row, col)


def solve_lp(
    A: Sequence[Sequence[Fraction]],
    b: Sequence[Fraction],
    c: Sequence[Fraction],
) -> tuple[str, list[Fraction] | None, Fraction | None]:
    """Maximize c.x subject to A x = b, x >= 0 (all entries rational).

    Returns (status, x, value); x and value are None unless status is
    OPTIMAL.  Deterministic for fixed input.
    """
    m = len(A)
    n = len(c)
    A = [[Fraction(a) for a in row] for row in A]
    b = [Fraction(x) for x in b]
    c = [Fraction(x) for x in c]
    for i in range(m):
        if b[i] < 0:
            A[i] = [-a for a in A[i]]
            b[i] = -b[i]

    # Phase 1: artificial variable per row, minimize their sum.
    T = [A[i] + [_ONE if j == i else _ZERO for j in range(m)] + [b[i]] for i in range(m)]
    basis = [n + i for i in range(m)]
    # reduced costs of "maximize -(sum of artificials)" after pricing out
    obj = [_ZERO] * (n + m + 1)
    for j in range(n):
        obj[j] = sum(T[i][j] for i in range(m))
    obj[-1] = sum(b)
    status = _simplex(T, obj, basis)
    assert status == OPTIMAL  # phase 1 is bounded below by 0
    if obj[-1] != 0:
        return INFEASIBLE, None, None

    # Drive remaining artificials out of the basis; drop redundant rows.
    for i in range(m - 1, -1, -1):
        if basis[i] >= n:
            col = next((j for j in range(n) if T[i][j] != 0), None)
            if col is None:
                del T[i]
                del basis[i]
            else:
                _pivot(T, obj, basis, i, col)
    T = [row[:n] + [row[-1]] for row in T]

    # Phase 2: price out the real objective over the current basis.
    obj = c + [_ZERO]
    for i, bi in enumerate(basis):
        if obj[bi] != 0:
            f = obj[bi]
            obj = [a - f * t for a, t in zip(obj, T[i])]
    status = _simplex(T, obj, basis)
    if status == UNBOUNDED:
        return UNBOUNDED, None, None
    x = [_ZERO] * n
    for i, bi in enumerate(basis):
        x[bi] = T[i][-1]
    value = sum(ci * xi for ci, xi in zip(c, x))
    return OPTIMAL, x, value


def feasible_point(
    A: Sequence[Sequence[Fraction]], b: Sequence[Fraction]
) -> list[Fraction] | None:
    """A vertex of {x >= 0 : A x = b}, or None if the system is infeasible."""
    status, x, _ = solve_lp(A, b, [_ZERO] * len(A[0]))
    return x if status == OPTIMAL else None

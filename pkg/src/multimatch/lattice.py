"""Integer lattice algebra over the family types.

The rows of V span a lattice L in Z^q and a non-negative span L+; a vector
x is matchable exactly when x is in L+.  This module provides the Hermite
normal form basis of L, Smith normal form invariant factors of the finite
quotient Z^q/L, lattice membership, the matchability witness search, and
the kernel-lattice constant used to certify that deep-in-the-cone lattice
vectors are matchable.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

from .rules import FamilyType, MatchingRule

Matrix = tuple[tuple[int, ...], ...]


class RankDeficient(ValueError):
    """The lattice does not have full rank q, so Z^q/L is infinite."""


def _as_type_matrix(V) -> Matrix:
    if isinstance(V, MatchingRule):
        return V.V
    return tuple(tuple(int(c) for c in row) for row in V)


@dataclass(frozen=True)
class LatticeBasis:
    """Row-style Hermite normal form of the lattice spanned by V's rows.

    H has `rank` rows with pivots in strictly increasing columns, positive
    pivots, and entries above each pivot reduced to [0, pivot).  transform
    is the unimodular k x k matrix with transform @ V = [H; 0]; its rows
    below `rank` are a basis of the kernel lattice {b in Z^k : b V = 0}.
    """

    H: Matrix
    rank: int
    transform: Matrix
    pivots: tuple[int, ...]
    V: Matrix

    def kernel_basis(self) -> Matrix:
        return self.transform[self.rank:]


def _row_hnf(rows: list[list[int]], track: list[list[int]] | None = None) -> tuple[int, list[int]]:
    """In-place row HNF; returns (rank, pivot columns).

    track, when given, receives the same row operations (use the identity
    to recover the unimodular transform).
    """
    k = len(rows)
    q = len(rows[0]) if rows else 0
    ops = [rows] if track is None else [rows, track]

    def addmul(dst: int, src: int, f: int) -> None:
        for m in ops:
            m[dst] = [a + f * b for a, b in zip(m[dst], m[src])]

    def swap(i: int, j: int) -> None:
        for m in ops:
            m[i], m[j] = m[j], m[i]

    def negate(i: int) -> None:
        for m in ops:
            m[i] = [-a for a in m[i]]

    r = 0
    pivots = []
    for col in range(q):
        while True:
            nz = [i for i in range(r, k) if rows[i][col] != 0]
            if not nz:
                break
            i0 = min(nz, key=lambda i: (abs(rows[i][col]), i))
            if i0 != r:
                swap(r, i0)
            if rows[r][col] < 0:
                negate(r)
            clean = True
            for i in range(r + 1, k):
                if rows[i][col] != 0:
                    addmul(i, r, -(rows[i][col] // rows[r][col]))
                    if rows[i][col] != 0:
                        clean = False
            if clean:
                break
        if r < k and rows[r][col] != 0:
            for i in range(r):
                f = rows[i][col] // rows[r][col]
                if f != 0:
                    addmul(i, r, -f)
            pivots.append(col)
            r += 1
            if r == k:
                break
    return r, pivots


@lru_cache(maxsize=256)
def _hermite_cached(V: Matrix) -> LatticeBasis:
    k = len(V)
    rows = [list(r) for r in V]
    track = [[1 if i == j else 0 for j in range(k)] for i in range(k)]
    rank, pivots = _row_hnf(rows, track)
    return LatticeBasis(
        H=tuple(tuple(r) for r in rows[:rank]),
        rank=rank,
        transform=tuple(tuple(r) for r in track),
        pivots=tuple(pivots),
        V=V,
    )


def hermite_basis(V) -> LatticeBasis:
    return _hermite_cached(_as_type_matrix(V))


def is_full_lattice(V) -> bool:
    """True iff the rows of V span all of Z^q (the HNF is the identity)."""
    basis = hermite_basis(V)
    q = len(basis.V[0])
    if basis.rank != q:
        return False
    return all(
        basis.H[i][j] == (1 if i == j else 0) for i in range(q) for j in range(q)
    )


def in_lattice(x: Sequence[int], V) -> bool:
    """Whether x is an integer combination of the rows of V."""
    basis = hermite_basis(V)
    rem = [int(c) for c in x]
    if len(rem) != len(basis.V[0]):
        raise ValueError("dimension mismatch")
    for row, pc in zip(basis.H, basis.pivots):
        if rem[pc] % row[pc] != 0:
            return False
        f = rem[pc] // row[pc]
        if f != 0:
            rem = [a - f * b for a, b in zip(rem, row)]
    return all(a == 0 for a in rem)


@dataclass(frozen=True)
class QuotientGroup:
    """The finite group Z^q/L in Smith normal form coordinates.

    factors are the invariant factors d_1 | d_2 | ... | d_q; the coset of x
    is the tuple ((x W)_i mod d_i) where W is the recorded unimodular
    column transform, so cosets add componentwise modulo the factors.
    """

    factors: tuple[int, ...]
    order: int
    W: Matrix

    @property
    def identity(self) -> tuple[int, ...]:
        return (0,) * len(self.factors)

    def coset(self, x: Sequence[int]) -> tuple[int, ...]:
        q = len(self.factors)
        return tuple(
            sum(int(x[i]) * self.W[i][j] for i in range(q)) % self.factors[j]
            for j in range(q)
        )

    def add(self, a: Sequence[int], b: Sequence[int]) -> tuple[int, ...]:
        return tuple((u + v) % d for u, v, d in zip(a, b, self.factors))


def _smith_diagonal(V: Matrix) -> tuple[list[int], list[list[int]]]:
    """Diagonal of the Smith normal form of V plus the column transform W."""
    A = [list(r) for r in V]
    k = len(A)
    q = len(A[0])
    W = [[1 if i == j else 0 for j in range(q)] for i in range(q)]

    def col_add(dst: int, src: int, f: int) -> None:
        for i in range(k):
            A[i][dst] += f * A[i][src]
        for i in range(q):
            W[i][dst] += f * W[i][src]

    def col_swap(i: int, j: int) -> None:
        for row in A:
            row[i], row[j] = row[j], row[i]
        for row in W:
            row[i], row[j] = row[j], row[i]

    def col_neg(j: int) -> None:
        for row in A:
            row[j] = -row[j]
        for row in W:
            row[j] = -row[j]

    def row_add(dst: int, src: int, f: int) -> None:
        A[dst] = [a + f * b for a, b in zip(A[dst], A[src])]

    def row_swap(i: int, j: int) -> None:
        A[i], A[j] = A[j], A[i]

    t = 0
    while t < min(k, q):
        # pick the smallest nonzero entry of the trailing block as pivot
        entries = [
            (abs(A[i][j]), i, j)
            for i in range(t, k)
            for j in range(t, q)
            if A[i][j] != 0
        ]
        if not entries:
            break
        _, pi, pj = min(entries)
        if pi != t:
            row_swap(t, pi)
        if pj != t:
            col_swap(t, pj)
        if A[t][t] < 0:
            col_neg(t)
        dirty = False
        for i in range(t + 1, k):
            if A[i][t] != 0:
                row_add(i, t, -(A[i][t] // A[t][t]))
                if A[i][t] != 0:
                    dirty = True
        for j in range(t + 1, q):
            if A[t][j] != 0:
                col_add(j, t, -(A[t][j] // A[t][t]))
                if A[t][j] != 0:
                    dirty = True
        if dirty:
            continue
        # enforce divisibility of the trailing block by the pivot
        bad = next(
            (
                (i, j)
                for i in range(t + 1, k)
                for j in range(t + 1, q)
                if A[i][j] % A[t][t] != 0
            ),
            None,
        )
        if bad is not None:
            row_add(t, bad[0], 1)
            continue
        t += 1
    return [A[i][i] for i in range(min(k, q))], W


@lru_cache(maxsize=256)
def _quotient_cached(V: Matrix) -> QuotientGroup:
    q = len(V[0])
    basis = _hermite_cached(V)
    if basis.rank != q:
        raise RankDeficient(
            f"lattice rank {basis.rank} < q={q}: the quotient group is infinite"
        )
    diag, W = _smith_diagonal(V)
    factors = tuple(diag[:q])
    order = 1
    for d in factors:
        order *= d
    return QuotientGroup(factors=factors, order=order, W=tuple(tuple(r) for r in W))


def quotient_group(V) -> QuotientGroup:
    return _quotient_cached(_as_type_matrix(V))


@dataclass(frozen=True)
class MatchabilityWitness:
    """Non-negative integer coefficients n with n V = x."""

    n: tuple[int, ...]


class Matchability:
    """Per-rule memoized search for non-negative integer representations.

    The schemes query this on a hot path with slowly growing vectors, so
    results are retained for the lifetime of the instance.  The witness is
    the lexicographically smallest coefficient vector, which makes every
    matching built on top of it reproducible.

    Thread-safety: the memo tables are plain dicts with insert-only usage;
    concurrent readers observe consistent values under the GIL.  For
    multi-process workers each process builds its own instance.
    """

    def __init__(self, V):
        self.V = _as_type_matrix(V)
        self.k = len(self.V)
        self.q = len(self.V[0])
        self._solvable: dict[tuple[int, tuple[int, ...]], bool] = {}
        self._witness: dict[tuple[int, ...], tuple[int, ...] | None] = {}

    def _bound(self, t: int, x: tuple[int, ...]) -> int:
        b = None
        for j, vj in enumerate(self.V[t]):
            if vj > 0:
                c = x[j] // vj
                b = c if b is None else min(b, c)
        return 0 if b is None else b

    def _can(self, t: int, x: tuple[int, ...]) -> bool:
        if all(c == 0 for c in x):
            return True
        if t == self.k:
            return False
        key = (t, x)
        hit = self._solvable.get(key)
        if hit is not None:
            return hit
        vt = self.V[t]
        cur = x
        ok = False
        for _ in range(self._bound(t, x) + 1):
            if self._can(t + 1, cur):
                ok = True
                break
            cur = tuple(a - b for a, b in zip(cur, vt))
        self._solvable[key] = ok
        return ok

    def matchable(self, x: Sequence[int]) -> bool:
        return self._can(0, tuple(int(c) for c in x))

    def witness(self, x: Sequence[int]) -> tuple[int, ...] | None:
        """Lexicographically smallest n >= 0 with n V = x, or None."""
        xt = tuple(int(c) for c in x)
        if xt in self._witness:
            return self._witness[xt]
        if not self._can(0, xt):
            self._witness[xt] = None
            return None
        n = []
        cur = xt
        for t in range(self.k):
            vt = self.V[t]
            c = 0
            while not self._can(t + 1, cur):
                cur = tuple(a - b for a, b in zip(cur, vt))
                c += 1
            n.append(c)
        out = tuple(n)
        self._witness[xt] = out
        return out


@lru_cache(maxsize=64)
def _matchability_cached(V: Matrix) -> Matchability:
    return Matchability(V)


def matchability(V) -> Matchability:
    """The shared memoized matchability solver for this set of types."""
    return _matchability_cached(_as_type_matrix(V))


def matchable(x: Sequence[int], V) -> MatchabilityWitness | None:
    """A witness that x is a non-negative integer combination of V's rows."""
    n = matchability(V).witness(x)
    return None if n is None else MatchabilityWitness(n=n)


def dual_alpha(V) -> int:
    """Sum of l1 norms of a canonical kernel-lattice basis.

    Any lattice vector that admits a real representation with all
    coefficients at least this value is matchable: rounding the coefficient
    vector to the nearest kernel-lattice translate moves each coordinate by
    at most the basis-norm sum (l1 dominates the Euclidean norm).  Returns
    0 when V's rows are independent, in which case any positive threshold
    works.
    """
    basis = hermite_basis(V)
    kernel = [list(r) for r in basis.kernel_basis()]
    if not kernel:
        return 0
    _row_hnf(kernel)
    return sum(sum(abs(a) for a in row) for row in kernel)

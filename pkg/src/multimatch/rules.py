"""Matching rules: the allowed family types V, colour count q and intensities.

A rule says how points of q colours may be grouped into families: each
family's per-colour count vector must be one of the allowed types.  All
intensities are exact rationals; classification elsewhere depends on
boundary-vs-interior distinctions that floating point would corrupt.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

FamilyType = tuple[int, ...]


class RuleError(ValueError):
    """Invalid matching rule."""


class ZeroFamilyType(RuleError):
    """A family type with no points at all."""


class AllUnitVectors(RuleError):
    """Every unit vector allowed: the all-singletons matching is trivial."""


class NonPositiveIntensity(RuleError):
    pass


class DimensionMismatch(RuleError):
    pass


class EmptyGraph(RuleError):
    pass


@dataclass(frozen=True)
class MatchingRule:
    """A validated matching rule.

    V is an ordered tuple of k distinct family types (each a length-q tuple
    of naturals); lam holds the q positive rational intensities.  Instances
    are immutable and hashable, so they can key caches and be shared across
    workers.
    """

    q: int
    V: tuple[FamilyType, ...]
    lam: tuple[Fraction, ...]

    @property
    def k(self) -> int:
        return len(self.V)

    @property
    def total_intensity(self) -> Fraction:
        return sum(self.lam, Fraction(0))

    def as_json_dict(self) -> dict:
        return {
            "q": self.q,
            "V": [list(v) for v in self.V],
            "lambda": [str(x) for x in self.lam],
        }

    def to_json(self) -> str:
        return json.dumps(self.as_json_dict())


def _as_fraction(x) -> Fraction:
    # "3/4" strings, ints, and decimal literals all parse exactly;
    # Fraction(str(float)) keeps the printed decimal, not the binary float.
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(str(x))
    if isinstance(x, str):
        return Fraction(x)
    raise NonPositiveIntensity(f"cannot interpret intensity {x!r}")


def validate_rule(q: int, V_raw: Iterable[Sequence[int]], lam_raw: Iterable) -> MatchingRule:
    """Validate and normalize a rule; duplicates in V are dropped, order kept.

    Raises ZeroFamilyType, AllUnitVectors, NonPositiveIntensity or
    DimensionMismatch.  Validating an already-valid rule returns an equal
    rule (idempotent).
    """
    if q < 1:
        raise DimensionMismatch(f"need at least one colour, got q={q}")
    lam = tuple(_as_fraction(x) for x in lam_raw)
    if len(lam) != q:
        raise DimensionMismatch(f"lambda has length {len(lam)}, expected q={q}")
    if any(x <= 0 for x in lam):
        raise NonPositiveIntensity(f"intensities must be positive, got {lam}")

    types: list[FamilyType] = []
    seen = set()
    for v in V_raw:
        t = tuple(int(c) for c in v)
        if len(t) != q:
            raise DimensionMismatch(f"family type {t} has length {len(t)}, expected q={q}")
        if any(c < 0 for c in t):
            raise DimensionMismatch(f"family type {t} has negative counts")
        if all(c == 0 for c in t):
            raise ZeroFamilyType("the empty family type is not allowed")
        if t not in seen:
            seen.add(t)
            types.append(t)
    if not types:
        raise ZeroFamilyType("V is empty")

    units = {tuple(1 if j == i else 0 for j in range(q)) for i in range(q)}
    if units <= seen:
        raise AllUnitVectors("all unit vectors allowed: matching into singletons is trivial")

    return MatchingRule(q=q, V=tuple(types), lam=lam)


def rule_from_json(text_or_dict) -> MatchingRule:
    d = json.loads(text_or_dict) if isinstance(text_or_dict, str) else text_or_dict
    return validate_rule(d["q"], d["V"], d["lambda"])


@dataclass(frozen=True)
class PairGraph:
    """Colour graph for pair-only rules: an edge means that pair is allowed.

    adjacency is a symmetric q x q boolean matrix; self-loops allowed.
    """

    q: int
    adjacency: tuple[tuple[bool, ...], ...]

    def __post_init__(self):
        if len(self.adjacency) != self.q or any(len(r) != self.q for r in self.adjacency):
            raise DimensionMismatch("adjacency must be q x q")
        for i in range(self.q):
            for j in range(self.q):
                if self.adjacency[i][j] != self.adjacency[j][i]:
                    raise DimensionMismatch("adjacency must be symmetric")

    @staticmethod
    def from_edges(q: int, edges: Iterable[tuple[int, int]]) -> "PairGraph":
        adj = [[False] * q for _ in range(q)]
        for i, j in edges:
            adj[i][j] = adj[j][i] = True
        return PairGraph(q, tuple(tuple(r) for r in adj))

    def edges(self) -> list[tuple[int, int]]:
        """Unordered edges (i, j) with i <= j, loops included."""
        return [
            (i, j)
            for i in range(self.q)
            for j in range(i, self.q)
            if self.adjacency[i][j]
        ]

    def neighbours(self, s: frozenset[int] | set[int]) -> frozenset[int]:
        return frozenset(
            j for j in range(self.q) if any(self.adjacency[i][j] for i in s)
        )


def pair_rule_to_V(g: PairGraph) -> list[FamilyType]:
    """Family types of a pair graph: e_i + e_j for every edge, each once."""
    out: list[FamilyType] = []
    for i, j in g.edges():
        t = [0] * g.q
        t[i] += 1
        t[j] += 1
        out.append(tuple(t))
    if not out:
        raise EmptyGraph("pair graph has no edges")
    return out

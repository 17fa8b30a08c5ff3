"""Exact cone geometry for matching rules.

Whether an intensity vector can be matched at all, and with what optimal
tail, is decided by its position relative to the cone spanned by the
family types: outside, on the boundary, or interior.  All decisions here
are made by exact rational LPs; every certificate re-verifies by direct
substitution.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from . import lattice, ratlp
from .rules import MatchingRule

UNSATISFIABLE = "unsatisfiable"
CRITICAL = "critical"
UNDERCONSTRAINED = "underconstrained"

_ZERO = Fraction(0)
_ONE = Fraction(1)


class NotInCone(ValueError):
    pass


class InCone(ValueError):
    pass


class NotOnBoundary(ValueError):
    pass


@dataclass(frozen=True)
class ConeWitness:
    """Non-negative rational coefficients a with a V = lambda."""

    a: tuple[Fraction, ...]


@dataclass(frozen=True)
class Classification:
    """Verdict plus its certificate.

    - unsatisfiable: charge with charge.lam > 0 and charge.v <= 0 for all v.
    - critical: non-zero charge with charge.lam = 0 >= charge.v, plus a
      cone witness.
    - underconstrained: witness with every coefficient >= margin > 0.
    """

    kind: str
    charge: tuple[Fraction, ...] | None = None
    witness: ConeWitness | None = None
    margin: Fraction | None = None

    def as_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "charge": None if self.charge is None else [str(x) for x in self.charge],
            "witness": None if self.witness is None else [str(x) for x in self.witness.a],
            "margin": None if self.margin is None else str(self.margin),
        }


def _membership_system(rule: MatchingRule) -> tuple[list[list[Fraction]], list[Fraction]]:
    # q equations  sum_i a_i * V[i][j] = lam_j  in the k unknowns a.
    A = [[Fraction(rule.V[i][j]) for i in range(rule.k)] for j in range(rule.q)]
    return A, list(rule.lam)


def cone_membership(rule: MatchingRule) -> ConeWitness | None:
    """A representation of lambda as a non-negative combination of V, if any."""
    A, b = _membership_system(rule)
    x = ratlp.feasible_point(A, b)
    return None if x is None else ConeWitness(a=tuple(x))


def cone_decomposition(rule: MatchingRule) -> ConeWitness:
    """Like cone_membership but required to exist."""
    w = cone_membership(rule)
    if w is None:
        raise NotInCone("lambda is not in the cone of V")
    return w


def _margin_lp(rule: MatchingRule) -> tuple[Fraction, tuple[Fraction, ...]]:
    # Variables a_1..a_k, alpha, s_1..s_k (slack of a_i - alpha >= 0), all >= 0.
    # maximize alpha  s.t.  V^T a = lam  and  a_i - alpha - s_i = 0.
    k, q = rule.k, rule.q
    n = 2 * k + 1
    A: list[list[Fraction]] = []
    b: list[Fraction] = []
    for j in range(q):
        row = [Fraction(rule.V[i][j]) for i in range(k)] + [_ZERO] * (k + 1)
        A.append(row)
        b.append(rule.lam[j])
    for i in range(k):
        row = [_ZERO] * n
        row[i] = _ONE
        row[k] = -_ONE
        row[k + 1 + i] = -_ONE
        A.append(row)
        b.append(_ZERO)
    c = [_ZERO] * n
    c[k] = _ONE
    status, x, value = ratlp.solve_lp(A, b, c)
    if status != ratlp.OPTIMAL:
        raise NotInCone("lambda is not in the cone of V")
    return value, tuple(x[:k])


def interior_margin(rule: MatchingRule) -> Fraction:
    """Largest alpha with lambda = a V, every a_i >= alpha; 0 on the boundary.

    The LP alone detects the relative interior, so a rank-deficient V
    (cone with empty interior in R^q) forces the reported margin to 0.
    """
    value, _ = _margin_lp(rule)
    if lattice.hermite_basis(rule.V).rank < rule.q:
        return _ZERO
    return value


def _charge_lp(
    rule: MatchingRule,
    objective: list[Fraction],
    require_zero_on_lam: bool,
) -> tuple[Fraction, tuple[Fraction, ...]]:
    """Maximize objective.(p - m) over box-bounded charges with eta.v <= 0.

    Variables: p, m (eta = p - m), one slack per family type, two box
    slacks per colour; optionally the equality eta.lam = 0.
    """
    k, q = rule.k, rule.q
    n = 2 * q + k + 2 * q
    A: list[list[Fraction]] = []
    b: list[Fraction] = []
    for i, v in enumerate(rule.V):
        row = [_ZERO] * n
        for j in range(q):
            row[j] = Fraction(v[j])
            row[q + j] = -Fraction(v[j])
        row[2 * q + i] = _ONE
        A.append(row)
        b.append(_ZERO)
    for j in range(q):
        row = [_ZERO] * n
        row[j] = _ONE
        row[2 * q + k + j] = _ONE
        A.append(row)
        b.append(_ONE)
        row = [_ZERO] * n
        row[q + j] = _ONE
        row[2 * q + k + q + j] = _ONE
        A.append(row)
        b.append(_ONE)
    if require_zero_on_lam:
        row = [_ZERO] * n
        for j in range(q):
            row[j] = rule.lam[j]
            row[q + j] = -rule.lam[j]
        A.append(row)
        b.append(_ZERO)
    c = [_ZERO] * n
    for j in range(q):
        c[j] = objective[j]
        c[q + j] = -objective[j]
    status, x, value = ratlp.solve_lp(A, b, c)
    assert status == ratlp.OPTIMAL  # box constraints keep the LP bounded
    eta = tuple(x[j] - x[q + j] for j in range(q))
    return value, eta


def separating_charge(rule: MatchingRule) -> tuple[Fraction, ...]:
    """A charge eta with eta.lam > 0 and eta.v <= 0 for every family type."""
    value, eta = _charge_lp(rule, list(rule.lam), require_zero_on_lam=False)
    if value <= 0:
        raise InCone("lambda lies in the cone of V; no separating charge exists")
    return eta


def supporting_charge(rule: MatchingRule) -> tuple[Fraction, ...]:
    """A non-zero charge with eta.lam = 0 and eta.v <= 0 for every type.

    Sweeps the 2q coordinate objectives over the polytope of admissible
    charges; any positive optimum yields a non-zero vertex.  If all optima
    vanish the polytope is {0} and lambda is not on the boundary.
    """
    for j in range(rule.q):
        for sign in (_ONE, -_ONE):
            objective = [_ZERO] * rule.q
            objective[j] = sign
            value, eta = _charge_lp(rule, objective, require_zero_on_lam=True)
            if value > 0:
                return eta
    raise NotOnBoundary("lambda is not on the boundary of the cone")


@lru_cache(maxsize=256)
def classify(rule: MatchingRule) -> Classification:
    """Trichotomy for lambda against cone(V), with certificate attached.

    Exactly one of the three kinds holds: the cone of a finite V is closed,
    so outside / boundary / interior cover all intensity vectors.
    """
    witness = cone_membership(rule)
    if witness is None:
        return Classification(kind=UNSATISFIABLE, charge=separating_charge(rule))
    margin, a = _margin_lp(rule)
    if margin > 0 and lattice.hermite_basis(rule.V).rank == rule.q:
        return Classification(
            kind=UNDERCONSTRAINED, witness=ConeWitness(a=a), margin=margin
        )
    return Classification(
        kind=CRITICAL,
        charge=supporting_charge(rule),
        witness=witness,
        margin=_ZERO,
    )

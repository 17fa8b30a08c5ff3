"""Matching constructions on finite windows.

All doubly-infinite constructions are realized on [-B-M, B+M] with burn-in
margins; statistics downstream only count the core [-B, B].  Points left
unmatched by a window truncation are legal output: for the exponential
schemes they stay in the margins with overwhelming probability, for the
critical and staged schemes they are the points whose true family extends
past the window edge, and the statistics treat them as censored.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import geometry, lattice
from .pointproc import (
    DiscreteConfiguration,
    PointConfiguration,
    discretize,
    epsilon_log2,
    eps_bits,
    geometric_stage,
    zeta_bits,
)
from .rules import MatchingRule


class NotMatchable(ValueError):
    pass


class WrongClassification(ValueError):
    pass


class LatticeNotFull(ValueError):
    pass


class WrongRule(ValueError):
    pass


@dataclass
class Matching:
    """Families as an assignment array.

    family_of[i] is the family id of point i, or -1 if the point is
    unmatched; family_types[f] indexes the rule's type list.  info carries
    per-run scheme diagnostics (block closes, stage activity, overflow).
    """

    family_of: np.ndarray
    family_types: np.ndarray
    info: dict = field(default_factory=dict)

    @property
    def n_families(self) -> int:
        return len(self.family_types)

    def unmatched_indices(self) -> np.ndarray:
        return np.nonzero(self.family_of < 0)[0]

    def families(self):
        """Yield (member point indices, type index) per family."""
        order = np.argsort(self.family_of, kind="stable")
        order = order[self.family_of[order] >= 0]
        fams = self.family_of[order]
        starts = np.flatnonzero(np.r_[True, fams[1:] != fams[:-1]])
        bounds = np.r_[starts, len(fams)]
        for a, b in zip(bounds[:-1], bounds[1:]):
            yield order[a:b], int(self.family_types[fams[a]])


class _Builder:
    """Accumulates families while a scheme scans the window."""

    def __init__(self, n: int):
        self.family_of = np.full(n, -1, dtype=np.int64)
        self.types: list[int] = []

    def add(self, members, type_index: int) -> None:
        fid = len(self.types)
        self.types.append(type_index)
        self.family_of[members] = fid

    def build(self, info: dict | None = None) -> Matching:
        return Matching(
            family_of=self.family_of,
            family_types=np.asarray(self.types, dtype=np.int64),
            info=info or {},
        )


def match_block(indices, colours, rule: MatchingRule) -> list[tuple[list[int], int]]:
    """Deterministically partition one block into families.

    Takes the lexicographically smallest witness, fills families in type
    order, and inside each family fills colour slots in colour order with
    the leftmost unused points of that colour.
    """
    q = rule.q
    x = [0] * q
    queues: list[list[int]] = [[] for _ in range(q)]
    for i, c in zip(indices, colours):
        x[c] += 1
        queues[c].append(i)
    witness = lattice.matchability(rule.V).witness(tuple(x))
    if witness is None:
        raise NotMatchable(f"block vector {tuple(x)} has no family decomposition")
    ptr = [0] * q
    out: list[tuple[list[int], int]] = []
    for t, count in enumerate(witness):
        v = rule.V[t]
        for _ in range(count):
            members: list[int] = []
            for j in range(q):
                take = v[j]
                if take:
                    members.extend(queues[j][ptr[j]:ptr[j] + take])
                    ptr[j] += take
            out.append((members, t))
    return out


def greedy_blocks_1d(config: PointConfiguration, rule: MatchingRule) -> Matching:
    """Left-to-right greedy block matching for interior intensity vectors.

    Accumulate the colour-count vector; each time it becomes matchable
    (it is non-zero by construction) close the block, partition it, and
    reset.  The final unclosed block stays unmatched.
    """
    if config.dimension != 1:
        raise WrongRule("greedy blocks are one-dimensional")
    colours = config.colours.tolist()
    builder = _Builder(len(colours))
    can = lattice.matchability(rule.V)
    cache: dict[tuple[int, ...], bool] = {}
    x = [0] * rule.q
    block: list[int] = []
    closes: list[int] = []
    for i, c in enumerate(colours):
        x[c] += 1
        block.append(i)
        key = tuple(x)
        hit = cache.get(key)
        if hit is None:
            hit = cache[key] = can.matchable(key)
        if hit:
            for members, t in match_block(block, [colours[j] for j in block], rule):
                builder.add(members, t)
            closes.append(i)
            x = [0] * rule.q
            block = []
    return builder.build({"closes": np.asarray(closes), "unmatched_tail": len(block)})


def factor_exp_1d(
    discrete: DiscreteConfiguration,
    rule: MatchingRule,
    eps: np.ndarray | None = None,
    start: int = 0,
) -> Matching:
    """Coin-gated good-block factor matching; needs the full lattice.

    Runs the unmatched-count chain from zero at `start` (an index into the
    site sequence); a block closes when the post-increment state is
    matchable and the site's coin is 1.  Sites before `start` stay
    unmatched, which only matters inside the burn-in margin: chains from
    different starts coalesce, which is what makes the window construction
    approximate the unique doubly-infinite one.
    """
    if not lattice.is_full_lattice(rule.V):
        raise LatticeNotFull("the staged construction is required when L != Z^q")
    if geometry.classify(rule).kind != geometry.UNDERCONSTRAINED:
        raise WrongClassification("factor blocks need an interior intensity vector")
    if eps is None:
        eps = epsilon_log2(discrete)
    colours = discrete.colours.tolist()
    coin = eps.tolist()
    builder = _Builder(len(colours))
    can = lattice.matchability(rule.V)
    cache: dict[tuple[int, ...], bool] = {}
    x = [0] * rule.q
    block: list[int] = []
    closes: list[int] = []
    for i in range(start, len(colours)):
        c = colours[i]
        x[c] += 1
        block.append(i)
        if coin[i]:
            key = tuple(x)
            hit = cache.get(key)
            if hit is None:
                hit = cache[key] = can.matchable(key)
            if hit:
                for members, t in match_block(block, [colours[j] for j in block], rule):
                    builder.add(members, t)
                closes.append(i)
                x = [0] * rule.q
                block = []
    return builder.build(
        {"closes": np.asarray(closes), "unmatched_tail": len(block), "start": start}
    )


class StageMarks:
    """Stage/coin marks for the staged scheme, derived from the u values.

    Tests may substitute fixed arrays to pin the construction down.
    """

    def __init__(self, u: np.ndarray):
        self.u = np.asarray(u)

    def stages(self) -> np.ndarray:
        return geometric_stage(self.u)

    def eps(self, s: int, sites: np.ndarray) -> np.ndarray:
        return eps_bits(self.u[sites], s)

    def zeta(self, s: int, sites: np.ndarray) -> np.ndarray:
        return zeta_bits(self.u[sites], s)


class FixedMarks(StageMarks):
    def __init__(self, stages: np.ndarray, eps: np.ndarray, zeta: np.ndarray):
        self._stages = np.asarray(stages)
        self._eps = np.asarray(eps)
        self._zeta = np.asarray(zeta)

    def stages(self) -> np.ndarray:
        return self._stages

    def eps(self, s: int, sites: np.ndarray) -> np.ndarray:
        return self._eps[sites]

    def zeta(self, s: int, sites: np.ndarray) -> np.ndarray:
        return self._zeta[sites]


def factor_staged_1d(
    discrete: DiscreteConfiguration,
    rule: MatchingRule,
    s_max: int = 40,
    marks: StageMarks | None = None,
    start: int = 0,
) -> Matching:
    """Multi-stage skipping factor matching; works whether or not L = Z^q.

    Stage s acts on the points skipped at stage s-1 plus those whose
    geometric stage variable equals s.  The chain skips a point when the
    quotient-group coset is at the identity and the skip coin is 0 (those
    points wait for the next stage); otherwise it accumulates the point and
    closes a good block when the state is matchable and the closing coin
    is 1.  Unskipped points of each good block are matched; blocks cut off
    by the window end stay unmatched.
    """
    group = lattice.quotient_group(rule.V)  # raises RankDeficient if L is thin
    if geometry.classify(rule).kind != geometry.UNDERCONSTRAINED:
        raise WrongClassification("staged factor blocks need an interior intensity vector")
    if marks is None:
        marks = StageMarks(discrete.u)
    colours = discrete.colours.tolist()
    n = len(colours)
    core_mask = discrete.core_site_mask()
    builder = _Builder(n)
    can = lattice.matchability(rule.V)
    cache: dict[tuple[int, ...], bool] = {}
    q = rule.q
    zero_state = (0,) * q
    unit = [tuple(1 if j == c else 0 for j in range(q)) for c in range(q)]
    incr = [group.coset(unit[c]) for c in range(q)]
    zero_coset = group.identity
    factors = group.factors

    G = marks.stages()
    active = np.nonzero((G == 1) & (np.arange(n) >= start))[0]
    stage_log: list[dict] = []
    s = 1
    while len(active) and s <= s_max:
        eps_s = marks.eps(s, active).tolist()
        zeta_s = marks.zeta(s, active).tolist()
        act_list = active.tolist()
        skipped: list[int] = []
        x = zero_state
        y = zero_coset
        block: list[int] = []
        n_skip_core = 0
        for pos, i in enumerate(act_list):
            c = colours[i]
            if y == zero_coset and not zeta_s[pos]:
                skipped.append(i)
                if core_mask[i]:
                    n_skip_core += 1
                continue
            x = tuple(a + b for a, b in zip(x, unit[c]))
            g = incr[c]
            y = tuple((a + b) % d for a, b, d in zip(y, g, factors))
            block.append(i)
            if eps_s[pos]:
                hit = cache.get(x)
                if hit is None:
                    hit = cache[x] = can.matchable(x)
                if hit:
                    for members, t in match_block(
                        block, [colours[j] for j in block], rule
                    ):
                        builder.add(members, t)
                    x = zero_state
                    y = zero_coset  # a matchable state lies in L, so its coset is 0
                    block = []
        stage_log.append(
            {
                "stage": s,
                "active": len(act_list),
                "active_core": int(core_mask[active].sum()),
                "skipped": len(skipped),
                "skipped_core": n_skip_core,
                "cut_off": len(block),
            }
        )
        if s + 1 <= s_max:
            fresh = np.nonzero((G == s + 1) & (np.arange(n) >= start))[0]
            active = np.sort(np.concatenate([np.asarray(skipped, dtype=np.int64), fresh]))
        else:
            active = np.asarray(skipped, dtype=np.int64)
        s += 1
    overflow = int(len(active))
    return builder.build(
        {"stages": stage_log, "stage_overflow": overflow, "start": start}
    )


def _stack_pair_partners(is_open: np.ndarray) -> np.ndarray:
    """Partner positions for the nested open/close pairing, -1 if unmatched.

    An opener matches the next closer at the same nesting boundary; within
    one boundary the crossings strictly alternate, so sorting by (boundary,
    position) makes partners adjacent.
    """
    n = len(is_open)
    partner = np.full(n, -1, dtype=np.int64)
    if n == 0:
        return partner
    sign = np.where(is_open, 1, -1)
    depth_after = np.cumsum(sign)
    boundary = np.where(is_open, depth_after, depth_after + 1)
    order = np.lexsort((np.arange(n), boundary))
    b_sorted = boundary[order]
    open_sorted = is_open[order]
    group_start = np.r_[True, b_sorted[1:] != b_sorted[:-1]]
    group_id = np.cumsum(group_start) - 1
    start_pos = np.flatnonzero(group_start)
    first_is_close = ~open_sorted[start_pos]
    pos_in_group = np.arange(n) - start_pos[group_id]
    adj = pos_in_group - first_is_close[group_id].astype(np.int64)
    counts = np.bincount(group_id)
    n_eff = counts - first_is_close.astype(np.int64)
    paired = (adj >= 0) & (adj < 2 * (n_eff // 2)[group_id])
    left = paired & (adj % 2 == 0)
    partner[order[left]] = order[np.flatnonzero(left) + 1]
    right = paired & (adj % 2 == 1)
    partner[order[right]] = order[np.flatnonzero(right) - 1]
    return partner


def two_colour_stack_1d(config: PointConfiguration) -> Matching:
    """Each colour-0 point matches the nearest unmatched colour-1 point to
    its right, recursively; the fixed point is the nested pairing.

    Unmatched residue (points whose partner falls outside the window) is
    legal output at the critical fluctuation scale.
    """
    if config.dimension != 1:
        raise WrongRule("the stack matching is one-dimensional")
    if config.q != 2:
        raise WrongRule("the stack matching needs exactly two colours")
    is_open = config.colours == 0
    partner = _stack_pair_partners(is_open)
    builder = _Builder(config.n)
    opens = np.flatnonzero(is_open & (partner >= 0))
    if len(opens):
        ids = np.arange(len(opens))
        builder.family_of[opens] = ids
        builder.family_of[partner[opens]] = ids
        builder.types = [0] * len(opens)
    return builder.build({"unmatched": int((partner < 0).sum())})


def critical_reduction_1d(config: PointConfiguration, rule: MatchingRule) -> Matching:
    """Reduce a critical rule to two-colour stack matchings.

    Split each colour into per-(type, slot) streams using exact rational
    thinning thresholds on the u marks; within each family type, stack-match
    the anchor stream against every other slot; an anchor's partners across
    those matchings form one family.  Streams of types with zero
    decomposition weight are simply never populated.
    """
    cls = geometry.classify(rule)
    if cls.kind != geometry.CRITICAL:
        raise WrongClassification("the reduction applies to critical rules only")
    a = geometry.cone_decomposition(rule).a
    disc = discretize(config)
    u = disc.u
    n = config.n
    builder = _Builder(n)
    type_sizes = [sum(v) for v in rule.V]

    # streams[j] lists, per slot of type j, the colour of that slot
    slot_colour: list[list[int]] = [
        [j_col for j_col in range(rule.q) for _ in range(rule.V[t][j_col])]
        for t in range(rule.k)
    ]
    # stream membership per point, chosen by u against exact thresholds
    stream_of = np.full(n, -1, dtype=np.int64)  # flat stream id
    slot_of = np.full(n, -1, dtype=np.int64)
    flat_ids: dict[tuple[int, int], int] = {}
    next_flat = 0
    for t in range(rule.k):
        for s in range(type_sizes[t]):
            flat_ids[(t, s)] = next_flat
            next_flat += 1
    for col in range(rule.q):
        pts = np.flatnonzero(config.colours == col)
        if len(pts) == 0:
            continue
        streams = [
            (t, s)
            for t in range(rule.k)
            if a[t] > 0
            for s in range(type_sizes[t])
            if slot_colour[t][s] == col
        ]
        probs = [a[t] / rule.lam[col] for t, _ in streams]
        assert sum(probs) == 1  # guaranteed by the exact decomposition
        cum = np.cumsum([float(p) for p in probs])
        cum[-1] = 1.0 + 1e-12
        choice = np.searchsorted(cum, u[pts], side="right")
        choice = np.minimum(choice, len(streams) - 1)
        for idx, (t, s) in enumerate(streams):
            sel = pts[choice == idx]
            stream_of[sel] = flat_ids[(t, s)]
            slot_of[sel] = s

    for t in range(rule.k):
        if not a[t] > 0:
            continue
        size = type_sizes[t]
        anchor = np.flatnonzero(stream_of == flat_ids[(t, 0)])
        if size == 1:
            for i in anchor:
                builder.add([int(i)], t)
            continue
        partners = []
        for s in range(1, size):
            other = np.flatnonzero(stream_of == flat_ids[(t, s)])
            merged = np.concatenate([anchor, other])
            openflag = np.zeros(len(merged), dtype=bool)
            openflag[: len(anchor)] = True
            order = np.argsort(merged, kind="stable")
            partner_pos = _stack_pair_partners(openflag[order])
            inv = merged[order]
            part = np.full(n, -1, dtype=np.int64)
            has = partner_pos >= 0
            part[inv[has]] = inv[partner_pos[has]]
            partners.append(part[anchor])
        partners = np.stack(partners, axis=1) if partners else np.empty((len(anchor), 0), np.int64)
        ok = (partners >= 0).all(axis=1)
        members = np.concatenate([anchor[ok, None], partners[ok]], axis=1)
        base = len(builder.types)
        builder.types.extend([t] * len(members))
        ids = np.arange(base, base + len(members))
        builder.family_of[members] = ids[:, None]
    info = {"unmatched": int((builder.family_of < 0).sum())}
    return builder.build(info)


@dataclass
class Violation:
    code: str
    detail: str
    count: int = 1


@dataclass
class ValidationReport:
    violations: list[Violation]
    n_unmatched_core: int
    used_types: tuple[int, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_matching(
    matching: Matching,
    config: PointConfiguration,
    rule: MatchingRule,
    require_full_core: bool = True,
) -> ValidationReport:
    """Structural checks: partition exactness, type correctness, core
    coverage, and zero family charge under the supporting charge when the
    rule is critical.  Returns findings, never raises.
    """
    violations: list[Violation] = []
    fam = matching.family_of
    F = matching.n_families
    if len(fam) != config.n:
        violations.append(Violation("size-mismatch", "assignment length != point count"))
    matched = fam >= 0
    if F:
        if matched.any() and fam[matched].max() >= F:
            violations.append(Violation("bad-family-id", "family id out of range"))
        sizes = np.bincount(fam[matched], minlength=F)
        if (sizes == 0).any():
            violations.append(
                Violation("empty-family", "family with no members", int((sizes == 0).sum()))
            )
        counts = np.zeros((F, rule.q), dtype=np.int64)
        np.add.at(counts, (fam[matched], config.colours[matched]), 1)
        want = np.asarray(rule.V, dtype=np.int64)[matching.family_types]
        bad = np.nonzero((counts != want).any(axis=1))[0]
        if len(bad):
            violations.append(
                Violation(
                    "type-violation",
                    f"family counts differ from declared type, first at family {bad[0]}",
                    len(bad),
                )
            )
        if matching.family_types.size and (
            (matching.family_types < 0).any() or (matching.family_types >= rule.k).any()
        ):
            violations.append(Violation("bad-type-index", "type index out of range"))
    core = config.core_selector()
    unmatched_core = int((~matched & core).sum())
    if require_full_core and unmatched_core:
        violations.append(
            Violation("unmatched-core", "core-window point left unmatched", unmatched_core)
        )
    used = tuple(sorted(set(int(t) for t in matching.family_types)))
    cls = geometry.classify(rule)
    if cls.kind == geometry.CRITICAL and cls.charge is not None:
        for t in used:
            total = sum(
                (e * Fraction(c) for e, c in zip(cls.charge, rule.V[t])), Fraction(0)
            )
            if total != 0:
                violations.append(
                    Violation("charge-violation", f"type {rule.V[t]} has non-zero charge")
                )
    return ValidationReport(
        violations=violations, n_unmatched_core=unmatched_core, used_types=used
    )


def write_matching_csv(matching: Matching, config: PointConfiguration, path) -> None:
    """Dump as family_id, type_index, position columns, colour."""
    d = config.dimension
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["family_id", "type_index"]
            + [f"position_{i}" for i in range(d)]
            + ["colour"]
        )
        pos = config.positions if d > 1 else config.positions[:, None]
        for i in range(config.n):
            fid = int(matching.family_of[i])
            t = int(matching.family_types[fid]) if fid >= 0 else -1
            w.writerow([fid, t] + [f"{x:.9g}" for x in pos[i]] + [int(config.colours[i])])

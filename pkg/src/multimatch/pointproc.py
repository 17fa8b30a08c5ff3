"""Multicolour Poisson sampling and the gap discretization with marks.

The factor constructions need auxiliary i.i.d. randomness that is a
deterministic function of the points.  Rounding each inter-point gap up to
an integer leaves a fractional part that is uniform and independent of
everything else; hashing those bits gives every point a geometric stage
variable and unlimited Bernoulli streams, all reproducible from the point
positions alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .rules import MatchingRule

LOG2 = math.log(2.0)

_PHI64 = np.uint64(0x9E3779B97F4A7C15)


class EmptyConfiguration(ValueError):
    pass


@dataclass
class PointConfiguration:
    """A finite window of coloured points; sorted by position when d = 1.

    positions has shape (n,) in one dimension and (n, d) otherwise; colours
    take values 0..q-1.  core marks the inner region that statistics count,
    either as an interval (d = 1) or as an explicit point mask (lifted
    configurations).  total_intensity records the generating intensity so
    the discretization can rescale gaps to Exp(1).  Treat instances as
    immutable.
    """

    dimension: int
    window: tuple[tuple[float, float], ...]
    positions: np.ndarray
    colours: np.ndarray
    q: int
    core: tuple[float, float] | None = None
    core_mask: np.ndarray | None = None
    total_intensity: float = 1.0

    @property
    def n(self) -> int:
        return len(self.colours)

    def core_selector(self) -> np.ndarray:
        """Boolean mask of the points that count for statistics."""
        if self.core_mask is not None:
            return self.core_mask
        if self.dimension == 1 and self.core is not None:
            lo, hi = self.core
            return (self.positions >= lo) & (self.positions <= hi)
        return np.ones(self.n, dtype=bool)

    def translated(self, shift: float) -> "PointConfiguration":
        if self.dimension != 1:
            raise ValueError("translated() supports d = 1 only")
        (lo, hi), = self.window
        return PointConfiguration(
            dimension=1,
            window=((lo + shift, hi + shift),),
            positions=self.positions + shift,
            colours=self.colours,
            q=self.q,
            core=None if self.core is None else (self.core[0] + shift, self.core[1] + shift),
            total_intensity=self.total_intensity,
        )


def default_margin(B: float) -> float:
    return max(100.0, B / 10.0)


def _colour_probs(rule: MatchingRule) -> np.ndarray:
    total = float(rule.total_intensity)
    p = np.array([float(x) / total for x in rule.lam])
    p[-1] = 1.0 - p[:-1].sum()  # exact simplex closure despite rounding
    return p


def sample_poisson_1d(rule: MatchingRule, B: float, margin: float | None = None, seed=0) -> PointConfiguration:
    """Superposed homogeneous process on [-B-margin, B+margin].

    Gaps are exponential at the total intensity and colours i.i.d. with
    probabilities lam_i / sum(lam); identical seeds give identical output.
    Statistics downstream only count points in the core [-B, B].
    """
    if margin is None:
        margin = default_margin(B)
    if B <= 0 or margin <= 0:
        raise ValueError("window and margin must be positive")
    lo, hi = -B - margin, B + margin
    rate = float(rule.total_intensity)
    rng = np.random.default_rng(seed)
    expect = rate * (hi - lo)
    chunks = []
    pos = lo
    while True:
        want = expect - (pos - lo) * rate
        block = max(1024, int(want + 6.0 * math.sqrt(max(want, 1.0)) + 16))
        pts = pos + np.cumsum(rng.exponential(1.0 / rate, size=block))
        inside = pts[pts <= hi]
        chunks.append(inside)
        if len(inside) < len(pts):
            break
        pos = pts[-1]
    positions = np.concatenate(chunks)
    colours = rng.choice(rule.q, size=len(positions), p=_colour_probs(rule))
    return PointConfiguration(
        dimension=1,
        window=((lo, hi),),
        positions=positions,
        colours=colours.astype(np.int64),
        q=rule.q,
        core=(-B, B),
        total_intensity=rate,
    )


def sample_poisson_box(rule: MatchingRule, box: Sequence[tuple[float, float]], seed=0) -> PointConfiguration:
    """Homogeneous d-dimensional sample on a box; deterministic given seed."""
    box = tuple((float(a), float(b)) for a, b in box)
    vol = 1.0
    for a, b in box:
        if b < a:
            raise ValueError("box sides must be non-empty")
        vol *= b - a
    rate = float(rule.total_intensity)
    rng = np.random.default_rng(seed)
    n = rng.poisson(rate * vol) if vol > 0 else 0
    d = len(box)
    lows = np.array([a for a, _ in box])
    spans = np.array([b - a for a, b in box])
    positions = lows + rng.random((n, d)) * spans
    colours = rng.choice(rule.q, size=n, p=_colour_probs(rule))
    return PointConfiguration(
        dimension=d,
        window=box,
        positions=positions,
        colours=colours.astype(np.int64),
        q=rule.q,
        total_intensity=rate,
    )


@dataclass
class DiscreteConfiguration:
    """Gap-ceiling discretization of a 1-d configuration.

    Time is rescaled by the total intensity first, so gaps are Exp(1).  The
    leftmost point sits at site 0 and every later site advances by the
    ceiling of the rescaled gap; u is the ceiling minus the gap, uniform on
    [0, 1) and independent of the integer parts.  The first point's gap is
    measured from the window's left edge (memorylessness makes it Exp(1)
    too).  Original positions ride along so diameters are reported in
    original units.
    """

    indices: np.ndarray
    colours: np.ndarray
    u: np.ndarray
    gaps: np.ndarray
    positions: np.ndarray
    origin_offset: float
    rescale: float
    q: int
    window: tuple[float, float]
    core: tuple[float, float] | None

    @property
    def n(self) -> int:
        return len(self.indices)

    def core_site_mask(self) -> np.ndarray:
        if self.core is None:
            return np.ones(self.n, dtype=bool)
        lo, hi = self.core
        return (self.positions >= lo) & (self.positions <= hi)


def discretize(config: PointConfiguration) -> DiscreteConfiguration:
    if config.dimension != 1:
        raise ValueError("discretization is defined for d = 1")
    if config.n == 0:
        raise EmptyConfiguration("no points to discretize")
    (lo, _), = config.window
    scaled = config.positions * config.total_intensity
    gaps = np.diff(scaled, prepend=lo * config.total_intensity)
    int_gaps = np.ceil(gaps).astype(np.int64)
    # a gap that is exactly integral (measure zero, but floats) still needs
    # a strictly positive site step
    int_gaps = np.maximum(int_gaps, 1)
    u = int_gaps - gaps
    u = np.where((u < 0.0) | (u >= 1.0), 0.0, u)
    indices = np.cumsum(int_gaps)
    indices -= indices[0]
    return DiscreteConfiguration(
        indices=indices,
        colours=config.colours,
        u=u,
        gaps=gaps,
        positions=config.positions,
        origin_offset=float(config.positions[0]),
        rescale=config.total_intensity,
        q=config.q,
        window=(lo, config.window[0][1]),
        core=config.core,
    )


def epsilon_log2(discrete: DiscreteConfiguration) -> np.ndarray:
    """Coin per site: 1 iff the rescaled gap to the previous point >= log 2.

    For Exp(1) gaps both outcomes have probability exactly 1/2, so this is
    a fair coin extracted from the point locations themselves.
    """
    return (discrete.gaps >= LOG2).astype(np.uint8)


# --- deterministic bit streams hashed from the fractional parts ---------


def _mix64(x: np.ndarray) -> np.ndarray:
    z = x + _PHI64
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def _u_bits(u: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(u, dtype=np.float64)).view(np.uint64)


def _substream_word(u_bits: np.ndarray, substream: int) -> np.ndarray:
    offset = np.uint64((substream * 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF)
    return _mix64(u_bits + offset)


def geometric_stage(u: np.ndarray) -> np.ndarray:
    """Geom(1/2) stage per site, from substream 0 of the u-value bits.

    The stage is one plus the number of trailing zero bits in the hashed
    word: P(G = s) = 2^-s for s = 1..64.
    """
    w = _substream_word(_u_bits(u), 0)
    lsb = w & (~w + np.uint64(1))
    g = np.frexp(lsb.astype(np.float64))[1].astype(np.int64)
    return np.where(g == 0, 65, g)


def eps_bits(u: np.ndarray, stage: int) -> np.ndarray:
    """Stage-s block-closing coins (substream 2s - 1), one bit per site."""
    return (_substream_word(_u_bits(u), 2 * stage - 1) & np.uint64(1)).astype(np.uint8)


def zeta_bits(u: np.ndarray, stage: int) -> np.ndarray:
    """Stage-s skip coins (substream 2s), one bit per site."""
    return (_substream_word(_u_bits(u), 2 * stage) & np.uint64(1)).astype(np.uint8)


@dataclass(frozen=True)
class MarkStreams:
    """Per-site marks derived deterministically from one uniform u value."""

    u: float

    @property
    def g(self) -> int:
        return int(geometric_stage(np.array([self.u]))[0])

    def eps(self, stage: int) -> int:
        return int(eps_bits(np.array([self.u]), stage)[0])

    def zeta(self, stage: int) -> int:
        return int(zeta_bits(np.array([self.u]), stage)[0])


def derive_marks(u: float) -> MarkStreams:
    if not 0.0 <= u < 1.0:
        raise ValueError("u must lie in [0, 1)")
    return MarkStreams(u=u)

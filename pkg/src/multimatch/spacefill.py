"""Hilbert curve paths on Z^d and the lift of 1-d matchings to d dimensions.

A finite-order Hilbert curve visits every cell of a 2^order cube exactly
once by nearest-neighbour steps, and the Euclidean displacement between
two cells is bounded by a constant times the d-th root of the path
distance.  Mapping 1-d integer positions to path cells therefore converts
a 1-d diameter tail in r into a d-dimensional tail in r^(1/d).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .pointproc import PointConfiguration
from .schemes import Matching

_MAX_ORDER = {2: 12, 3: 8}


class UnsupportedDimension(ValueError):
    pass


class RangeOverflow(ValueError):
    pass


def _index_bits_to_transpose(h: np.ndarray, d: int, order: int) -> np.ndarray:
    """De-interleave index bits, axis 0 owning the most significant bit."""
    n_bits = d * order
    X = np.zeros((len(h), d), dtype=np.uint64)
    one = np.uint64(1)
    for i in range(n_bits):
        bit = (h >> np.uint64(n_bits - 1 - i)) & one
        X[:, i % d] = (X[:, i % d] << one) | bit
    return X


def _transpose_to_axes(X: np.ndarray, d: int, order: int) -> np.ndarray:
    # Gray-code undo and the orientation exchanges (Skilling's method).
    one = np.uint64(1)
    N = np.uint64(1) << np.uint64(order)
    t = X[:, d - 1] >> one
    for i in range(d - 1, 0, -1):
        X[:, i] ^= X[:, i - 1]
    X[:, 0] ^= t
    Q = np.uint64(2)
    while Q != N:
        P = Q - one
        for i in range(d - 1, -1, -1):
            mask = (X[:, i] & Q) != 0
            X[mask, 0] ^= P
            other = ~mask
            tt = (X[other, 0] ^ X[other, i]) & P
            X[other, 0] ^= tt
            X[other, i] ^= tt
        Q <<= one
    return X


def _axes_to_transpose(X: np.ndarray, d: int, order: int) -> np.ndarray:
    one = np.uint64(1)
    M = np.uint64(1) << np.uint64(order - 1)
    Q = M
    while Q > one:
        P = Q - one
        for i in range(d):
            mask = (X[:, i] & Q) != 0
            X[mask, 0] ^= P
            other = ~mask
            tt = (X[other, 0] ^ X[other, i]) & P
            X[other, 0] ^= tt
            X[other, i] ^= tt
        Q >>= one
    for i in range(1, d):
        X[:, i] ^= X[:, i - 1]
    t = np.zeros(len(X), dtype=np.uint64)
    Q = M
    while Q > one:
        mask = (X[:, d - 1] & Q) != 0
        t[mask] ^= Q - one
        Q >>= one
    for i in range(d):
        X[:, i] ^= t
    return X


def indices_to_cells(h: Sequence[int], d: int, order: int) -> np.ndarray:
    """Path positions -> lattice cells, vectorized."""
    h = np.asarray(h, dtype=np.uint64)
    if order == 0:
        return np.zeros((len(h), d), dtype=np.int64)
    X = _index_bits_to_transpose(h, d, order)
    return _transpose_to_axes(X, d, order).astype(np.int64)


def cells_to_indices(cells: np.ndarray, d: int, order: int) -> np.ndarray:
    """Lattice cells -> path positions, the exact inverse."""
    cells = np.asarray(cells)
    if order == 0:
        return np.zeros(len(cells), dtype=np.int64)
    X = _axes_to_transpose(cells.astype(np.uint64).copy(), d, order)
    one = np.uint64(1)
    h = np.zeros(len(X), dtype=np.uint64)
    for i in range(order - 1, -1, -1):
        for j in range(d):
            h = (h << one) | ((X[:, j] >> np.uint64(i)) & one)
    return h.astype(np.int64)


@dataclass
class CurvePath:
    """A finite Hilbert path over the cube [0, 2^order)^d.

    Orientation is pinned by the bit-interleaving order (axis 0 owns the
    most significant index bit), so the cell sequence is reproducible.
    """

    d: int
    order: int
    _cells: np.ndarray | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return 1 << (self.d * self.order)

    @property
    def cells(self) -> np.ndarray:
        if self._cells is None:
            self._cells = indices_to_cells(np.arange(len(self)), self.d, self.order)
        return self._cells

    def index_of(self, cells: np.ndarray) -> np.ndarray:
        return cells_to_indices(np.atleast_2d(cells), self.d, self.order)

    def cell_of(self, indices: Sequence[int]) -> np.ndarray:
        return indices_to_cells(indices, self.d, self.order)


def hilbert_path(d: int, order: int) -> CurvePath:
    if d not in _MAX_ORDER:
        raise UnsupportedDimension(f"paths are built for d in {{2, 3}}, got d={d}")
    if not 0 <= order <= _MAX_ORDER[d]:
        raise UnsupportedDimension(
            f"order {order} out of range for d={d} (max {_MAX_ORDER[d]})"
        )
    return CurvePath(d=d, order=order)


def curve_distortion(path: CurvePath, sample_pairs: int = 2_000_000, seed: int = 0) -> float:
    """Empirical max of |cell_i - cell_j|^d / |i - j| over path positions.

    Exhaustive for order <= 6 (d=2) or <= 4 (d=3); random pairs above.  The
    true supremum is finite, so the estimate stabilizes in the order.
    """
    n = len(path)
    if n <= 1:
        return 0.0
    cells = path.cells.astype(np.float64)
    exhaustive = n * n <= 20_000_000
    best = 0.0
    if exhaustive:
        for i in range(n - 1):
            diff = cells[i + 1:] - cells[i]
            dist_pow = (diff * diff).sum(axis=1) ** (path.d / 2.0)
            ratio = dist_pow / np.arange(1, n - i)
            m = ratio.max()
            if m > best:
                best = float(m)
    else:
        rng = np.random.default_rng(seed)
        ii = rng.integers(0, n, size=sample_pairs)
        jj = rng.integers(0, n, size=sample_pairs)
        keep = ii != jj
        ii, jj = ii[keep], jj[keep]
        diff = cells[ii] - cells[jj]
        dist_pow = (diff * diff).sum(axis=1) ** (path.d / 2.0)
        best = float((dist_pow / np.abs(ii - jj)).max())
    return best


def lift_matching(
    matching: Matching,
    config: PointConfiguration,
    path: CurvePath,
    seed=0,
) -> tuple[PointConfiguration, Matching]:
    """Transport a 1-d matching to R^d along the path.

    A point at position x lands uniformly in the unit cube at the path
    cell of floor(x), recentred so that 1-d position 0 sits near the middle
    of the path; the whole picture gets a random sub-quarter path offset
    and a uniform unit-cube shift, which keeps the law translation-friendly
    without ever touching the path's endpoints.  Families carry over
    unchanged, and the resulting point marginal is d-dimensional Poisson of
    the same total intensity.
    """
    if config.dimension != 1:
        raise ValueError("only 1-d matchings lift")
    rng = np.random.default_rng(seed)
    n = len(path)
    quarter = max(n // 4, 1)
    offset = n // 2 + int(rng.integers(-(quarter // 2), quarter // 2 + 1))
    m = np.floor(config.positions).astype(np.int64) + offset
    if m.min() < 0 or m.max() >= n:
        raise RangeOverflow(
            f"window maps to path positions [{m.min()}, {m.max()}] outside [0, {n})"
        )
    cells = path.cell_of(m)
    jitter = rng.random((config.n, path.d))
    shift = rng.random(path.d)
    positions = cells.astype(np.float64) + jitter + shift
    side = float(1 << path.order)
    window = tuple((float(shift[i]), side + float(shift[i])) for i in range(path.d))
    lifted = PointConfiguration(
        dimension=path.d,
        window=window,
        positions=positions,
        colours=config.colours,
        q=config.q,
        core_mask=config.core_selector(),
        total_intensity=config.total_intensity,
    )
    carried = Matching(
        family_of=matching.family_of.copy(),
        family_types=matching.family_types.copy(),
        info=dict(matching.info),
    )
    return lifted, carried

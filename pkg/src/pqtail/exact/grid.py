"""
The truncated joint stationary distribution p(m, n) on 0..N1 x 0..N2 and everything read off it: marginals, the
joint tail H(x, y), the bivariate generating function, and the CSV / PQGRID1 exports.
"""


from __future__ import annotations

import logging
import struct

import numpy as np

from typing import TYPE_CHECKING
from pathlib import Path
from attrs import define, field
from pqtail.utils import write_csv

if TYPE_CHECKING:
    from typing import Tuple
    from numpy.typing import NDArray


log = logging.getLogger(__name__)


SNAPSHOT_MAGIC = b'PQGRID1'

# magic, N1, N2, deficit, iterations, residual; little-endian, no padding.
_SNAPSHOT_HEADER = struct.Struct('<7sQQdQd')


def _grid_converter(p: NDArray) -> NDArray[np.float64]:
    arr = np.array(p, dtype=np.float64)

    if arr.ndim != 2:
        raise ValueError(f'Expected a 2D grid, received shape {arr.shape}')

    return arr


@define(eq=False)
class TruncatedGrid:
    """
    Probabilities p(m, n) for m <= N1, n <= N2.

    `deficit` bounds the probability mass the grid misses: beyond the truncation edge for a solved grid, or pushed out
    by the last kernel application for a single transition;
    `iterations` and `residual` (L1 change of the last sweep) describe how the grid was obtained.
    """
    p: NDArray[np.float64] = field(converter=_grid_converter)
    deficit: float = 0.0
    iterations: int = 0
    residual: float = 0.0

    @property
    def N1(self) -> int:
        return self.p.shape[0] - 1

    @property
    def N2(self) -> int:
        return self.p.shape[1] - 1

    @classmethod
    def point_mass(cls, N1: int, N2: int, at: Tuple[int, int] = (0, 0)) -> TruncatedGrid:
        p = np.zeros((N1 + 1, N2 + 1))
        p[at] = 1.0
        return cls(p)

    @classmethod
    def uniform(cls, N1: int, N2: int) -> TruncatedGrid:
        return cls(np.full((N1 + 1, N2 + 1), 1.0 / ((N1 + 1) * (N2 + 1))))

    def total(self) -> float:
        return float(self.p.sum())


def marginals(grid: TruncatedGrid) -> Tuple[NDArray[np.float64], NDArray[np.float64]]:
    """
    (P(Q^1 = m))_m and (P(Q^2 = n))_n.
    """
    return grid.p.sum(axis=1), grid.p.sum(axis=0)


def marginal_tails(grid: TruncatedGrid) -> Tuple[NDArray[np.float64], NDArray[np.float64]]:
    """
    (P(Q^1 > x))_x and (P(Q^2 > y))_y for x <= N1, y <= N2.
    """
    p1, p2 = marginals(grid)
    return _strict_tail(p1), _strict_tail(p2)


def _strict_tail(p: NDArray[np.float64]) -> NDArray[np.float64]:
    # tail[k] = sum of p[j] for j > k, summed from the top.
    return np.append(np.cumsum(p[::-1])[::-1][1:], 0.0)


def joint_tail_matrix(grid: TruncatedGrid) -> NDArray[np.float64]:
    """
    H(x, y) for every x <= N1, y <= N2 at once.
    """
    upper = grid.p[::-1, ::-1].cumsum(axis=0).cumsum(axis=1)[::-1, ::-1]
    padded = np.zeros((grid.N1 + 2, grid.N2 + 2))
    padded[:-1, :-1] = upper

    return padded[1:, 1:]


def H_from_grid(grid: TruncatedGrid, x: int, y: int) -> float:
    """
    H(x, y) = sum of p(m, n) over m > x, n > y.

    Args:
        grid (TruncatedGrid): the solved grid.
        x (int): level of queue 1.
        y (int): level of queue 2.

    Returns:
        float: H(x, y) on the grid; a lower bound that is 0 when (x, y) is outside the grid.
    """
    if x < 0 or y < 0:
        raise ValueError(f'Expected nonnegative levels, received: ({x}, {y})')

    return float(grid.p[x + 1:, y + 1:].sum())


def tail_bounds(grid: TruncatedGrid, x: int, y: int) -> Tuple[float, float, bool]:
    """
    H(x, y) paired with the upper bound H + deficit, and whether (x, y) lies beyond the grid. The truncated iteration
    loses mass near the edge, so H on the grid sits below the true tail and the deficit covers the gap.

    Returns:
        Tuple[float, float, bool]: (lower, upper, truncated).
    """
    value = H_from_grid(grid, x, y)
    truncated = x >= grid.N1 or y >= grid.N2

    if truncated:
        log.warning(f'H({x}, {y}) queried outside the {grid.N1}x{grid.N2} grid; only the lower bound is meaningful')

    return value, value + grid.deficit, truncated


def pgf_eval(grid: TruncatedGrid, z: complex, w: complex) -> complex | float:
    """
    The bivariate generating function sum of z^m w^n p(m, n) over the grid; its error is bounded by the deficit.

    Args:
        grid (TruncatedGrid): the solved grid.
        z (complex): first argument, |z| <= 1.
        w (complex): second argument, |w| <= 1.

    Returns:
        complex | float: the value; a float when both arguments are real.
    """
    if abs(z) > 1.0 or abs(w) > 1.0:
        raise ValueError(f'Generating function arguments must lie in the closed unit disk, received: ({z}, {w})')

    zs = np.power(z, np.arange(grid.N1 + 1))
    ws = np.power(w, np.arange(grid.N2 + 1))
    value = zs @ grid.p @ ws

    if np.iscomplexobj(value):
        return complex(value)

    return float(value)


def write_grid_csv(grid: TruncatedGrid, path: str | Path) -> int:
    """
    Write every cell as a `m,n,p` row.
    """
    rows = (
        (m, n, float(grid.p[m, n])) for m in range(grid.N1 + 1) for n in range(grid.N2 + 1)
    )

    return write_csv(('m', 'n', 'p'), rows, path)


def write_snapshot(grid: TruncatedGrid, path: str | Path) -> None:
    """
    Write the binary PQGRID1 snapshot: header, then (N1+1)(N2+1) little-endian doubles in row-major order.
    """
    with open(path, 'wb') as f:
        f.write(_SNAPSHOT_HEADER.pack(SNAPSHOT_MAGIC, grid.N1, grid.N2, grid.deficit, grid.iterations, grid.residual))
        f.write(np.ascontiguousarray(grid.p, dtype='<f8').tobytes(order='C'))

    log.debug(f'Wrote {grid.N1}x{grid.N2} grid snapshot to {path}')


def read_snapshot(path: str | Path) -> TruncatedGrid:
    """
    Read a PQGRID1 snapshot.

    Raises:
        ValueError: If the file is not a PQGRID1 snapshot or is truncated.
    """
    data = Path(path).read_bytes()

    if len(data) < _SNAPSHOT_HEADER.size:
        raise ValueError(f'{path} is too short to be a grid snapshot')

    magic, n1, n2, deficit, iterations, residual = _SNAPSHOT_HEADER.unpack_from(data)

    if magic != SNAPSHOT_MAGIC:
        raise ValueError(f'{path} is not a grid snapshot (magic {magic!r})')

    expected = (n1 + 1) * (n2 + 1) * 8

    if len(data) - _SNAPSHOT_HEADER.size != expected:
        raise ValueError(f'{path} holds {len(data) - _SNAPSHOT_HEADER.size} data bytes, expected {expected}')

    p = np.frombuffer(data, dtype='<f8', offset=_SNAPSHOT_HEADER.size).reshape(n1 + 1, n2 + 1)

    return TruncatedGrid(p.astype(np.float64), deficit=deficit, iterations=iterations, residual=residual)

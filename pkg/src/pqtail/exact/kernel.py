"""
Matrix-free transition kernel of (Q^1, Q^2) on a truncated grid.

Conditioned on the common arrival a, both coordinates shift by a; each then loses an independent service and is
clamped at zero. A slot is therefore

    p_out = D1 (sum_a P(A = a) shift_a(p)) D2^T

with D_i[j, u] = P(S^i = u - j) for j >= 1 and D_i[0, u] = P(S^i >= u). Services enter exactly through their pmf and
tail, so only the arrival law is truncated (at tail < 1e-14); mass that lands beyond (N1, N2) is discarded.
"""


from __future__ import annotations

import logging

import numpy as np

from typing import TYPE_CHECKING
from attrs import define, field
from pqtail.errors import PreconditionFailed

if TYPE_CHECKING:
    from typing import Tuple
    from numpy.typing import NDArray
    from pqtail.dist import Pmf
    from pqtail.model import ParallelQueueModel


log = logging.getLogger(__name__)


ARRIVAL_TAIL_EPS = 1e-14

# Arrival supports beyond this make the shifted grid too large to hold in memory.
MAX_ARRIVAL_SUPPORT = 4096


def service_matrix(service: Pmf, rows: int, cols: int) -> NDArray[np.float64]:
    """
    D[j, u] = P((u - S)_+ = j) for j < rows, u < cols.

    Args:
        service (Pmf): the service law.
        rows (int): number of destination levels (N + 1).
        cols (int): number of source levels.

    Returns:
        NDArray[np.float64]: the matrix.
    """
    j = np.arange(rows)[:, None]
    u = np.arange(cols)[None, :]

    matrix = np.asarray(service.pmf(u - j), dtype=np.float64)
    matrix[0, :] = service.tail(np.arange(cols) - 1)

    return matrix


@define(eq=False)
class Kernel:
    """
    The kernel of a model on a fixed grid, with its service matrices built once.
    """
    N1: int
    N2: int
    arrival_weights: NDArray[np.float64]
    arrival_dropped: float
    d1: NDArray[np.float64] = field(repr=False)
    d2: NDArray[np.float64] = field(repr=False)

    @classmethod
    def build(cls, model: ParallelQueueModel, N1: int, N2: int, arrival_eps: float = ARRIVAL_TAIL_EPS) -> Kernel:
        weights, dropped = model.arrival.finitize(arrival_eps)
        amax = weights.size - 1

        if amax > MAX_ARRIVAL_SUPPORT:
            raise PreconditionFailed(f'Arrival law {model.arrival} needs {amax} support points for tail < {arrival_eps:.0e}; the grid solver is limited to {MAX_ARRIVAL_SUPPORT}')

        log.debug(f'Kernel on {N1}x{N2}: arrivals truncated at {amax} (dropped mass {dropped:.3e})')

        return cls(
            N1=N1,
            N2=N2,
            arrival_weights=weights,
            arrival_dropped=dropped,
            d1=service_matrix(model.service1, N1 + 1, N1 + amax + 1),
            d2=service_matrix(model.service2, N2 + 1, N2 + amax + 1)
        )

    @property
    def amax(self) -> int:
        return self.arrival_weights.size - 1

    def apply(self, p: NDArray[np.float64]) -> Tuple[NDArray[np.float64], float]:
        """
        One slot applied to p.

        Args:
            p (NDArray[np.float64]): probabilities on the grid.

        Returns:
            Tuple[NDArray[np.float64], float]: the new probabilities and the mass discarded in this slot.
        """
        shifted = np.zeros((self.N1 + self.amax + 1, self.N2 + self.amax + 1))

        # Fixed order over a, so the accumulation is reproducible.
        for a, weight in enumerate(self.arrival_weights):
            if weight > 0.0:
                shifted[a:a + self.N1 + 1, a:a + self.N2 + 1] += weight * p

        out = self.d1 @ shifted @ self.d2.T

        return out, float(p.sum() - out.sum())


@define(eq=False)
class Kernel1D:
    """
    The kernel of a single Lindley queue q' = (q + A - S)_+ on 0..N.
    """
    N: int
    arrival_weights: NDArray[np.float64]
    d: NDArray[np.float64] = field(repr=False)

    @classmethod
    def build(cls, arrival: Pmf, service: Pmf, N: int, arrival_eps: float = ARRIVAL_TAIL_EPS) -> Kernel1D:
        weights, _ = arrival.finitize(arrival_eps)
        return cls(N=N, arrival_weights=weights, d=service_matrix(service, N + 1, N + weights.size))

    def apply(self, v: NDArray[np.float64]) -> Tuple[NDArray[np.float64], float]:
        amax = self.arrival_weights.size - 1
        shifted = np.zeros(self.N + amax + 1)

        for a, weight in enumerate(self.arrival_weights):
            if weight > 0.0:
                shifted[a:a + self.N + 1] += weight * v

        out = self.d @ shifted

        return out, float(v.sum() - out.sum())

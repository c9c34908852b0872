"""
Truncated power iteration for the stationary distribution of (Q^1, Q^2), its balance residual, and the
single-queue oracle used to check the marginals.
"""


from __future__ import annotations

import logging
import math

import numpy as np

from typing import TYPE_CHECKING
from time import perf_counter
from pqtail.errors import NoConvergence, NoLundbergRoot, PreconditionFailed
from pqtail.exact.grid import TruncatedGrid
from pqtail.exact.kernel import Kernel, Kernel1D

if TYPE_CHECKING:
    from typing import Tuple
    from numpy.typing import NDArray
    from pqtail.dist import Pmf
    from pqtail.model import ParallelQueueModel


log = logging.getLogger(__name__)


DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 200_000
DEFAULT_EPS_TRUNC = 1e-9
MAX_GRID_SIZE = 2048

# Interior cells for the balance residual stay this far (at most) from the truncation edge.
_SERVICE_MARGIN_EPS = 1e-14


def transition_apply(grid: TruncatedGrid, model: ParallelQueueModel) -> TruncatedGrid:
    """
    One application of the transition kernel.

    Args:
        grid (TruncatedGrid): probabilities before the slot.
        model (ParallelQueueModel): the model.

    Returns:
        TruncatedGrid: probabilities after the slot; `deficit` is the mass discarded in this slot, so that
            sum(out) + deficit = sum(in).
    """
    kernel = Kernel.build(model, grid.N1, grid.N2)
    out, discarded = kernel.apply(grid.p)

    return TruncatedGrid(out, deficit=discarded, iterations=grid.iterations + 1, residual=float(np.abs(out - grid.p).sum()))


def default_truncation(model: ParallelQueueModel, target: float = 1e-10, fallback: int = 256) -> Tuple[int, int]:
    """
    Grid sizes with each single-queue tail below `target` at the edge, from the Lundberg bound P(Q^i > N) <= e^{-γ_i N}.

    Args:
        model (ParallelQueueModel): the model.
        target (float): tail budget at the truncation edge. (default: 1e-10)
        fallback (int): size used for a queue without a Lundberg exponent. (default: 256)

    Returns:
        Tuple[int, int]: (N1, N2).
    """
    from pqtail.asympt.lundberg import lundberg_1d

    if model.arrival.support_max == 0:
        return 1, 1

    sizes = []

    for i, service in enumerate((model.service1, model.service2), start=1):
        try:
            gamma = lundberg_1d(model.arrival, service)
            sizes.append(max(8, math.ceil(math.log(1.0 / target) / gamma)))
        except NoLundbergRoot:
            log.warning(f'No Lundberg exponent for queue {i}; falling back to N{i}={fallback}')
            sizes.append(fallback)

    return sizes[0], sizes[1]


def truncation_bound(model: ParallelQueueModel, N1: int, N2: int) -> Tuple[float, float]:
    """
    Per-queue bounds on how far the renormalized N1 x N2 iteration can move H from the stationary tail.

    Kingman's inequality gives P(Q^i > N) <= e^{-γ_i (N + 1)} for the mass beyond the edge. Renormalizing each
    sweep also under-weights every level below the edge by about that much, so queue i contributes
    (N_i + 2) e^{-γ_i (N_i + 1)}.
    A queue without a Lundberg exponent contributes 0 and is left to the escape mass.

    Raises:
        PreconditionFailed: If a queue is unstable.
    """
    from pqtail.asympt.lundberg import lundberg_1d

    if model.arrival.support_max == 0:
        return 0.0, 0.0

    bounds = []

    for i, (service, size) in enumerate(((model.service1, N1), (model.service2, N2)), start=1):
        try:
            bounds.append((size + 2) * math.exp(-lundberg_1d(model.arrival, service) * (size + 1)))
        except NoLundbergRoot:
            log.debug(f'No Lundberg exponent for queue {i}; its truncation error is covered by the escape mass only')
            bounds.append(0.0)

    return bounds[0], bounds[1]


def _iterate(kernel: Kernel, p: NDArray[np.float64], tol: float, max_iter: int,
             done: int) -> Tuple[NDArray[np.float64], float, int, float]:
    change = math.inf
    discarded = 0.0

    for iteration in range(1, max_iter + 1):
        out, discarded = kernel.apply(p)
        total = out.sum()

        if total <= 0.0:
            raise NoConvergence('All probability mass left the grid; increase N1, N2', iterations=done + iteration,
                                residual=change)

        out /= total
        change = float(np.abs(out - p).sum())
        p = out

        if change < tol:
            return p, discarded, iteration, change

    raise NoConvergence(f'Stationary iteration on {kernel.N1}x{kernel.N2} did not reach tol={tol}',
                        iterations=done + max_iter, residual=change)


def stationary(model: ParallelQueueModel, N1: int, N2: int, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
               eps_trunc: float = DEFAULT_EPS_TRUNC, max_size: int = MAX_GRID_SIZE) -> TruncatedGrid:
    """
    Iterate the kernel from the point mass at (0, 0), renormalizing after every slot, until the L1 change between two
    sweeps drops below `tol`.

    The deficit is the larger of the mass the final sweep discarded and `truncation_bound`, which covers the mass beyond
    the grid and the bias renormalization leaves below the edge. While it exceeds `eps_trunc`, the offending grid bound
    is doubled and the iteration restarts from the previous grid, so the returned grid may be larger than N1 x N2.

    Args:
        model (ParallelQueueModel): a stable model.
        N1 (int): initial grid bound for queue 1.
        N2 (int): initial grid bound for queue 2.
        tol (float): L1 stopping tolerance. (default: 1e-12)
        max_iter (int): iteration limit for each grid size. (default: 200000)
        eps_trunc (float): deficit budget. (default: 1e-9)
        max_size (int): largest bound the grid is grown to. (default: 2048)

    Returns:
        TruncatedGrid: the normalized grid with deficit <= eps_trunc; `iterations` counts sweeps over all sizes.

    Raises:
        NoConvergence: If `max_iter` sweeps do not reach `tol`, or the deficit still exceeds `eps_trunc` at `max_size`.
        PreconditionFailed: If a queue is unstable or the arrival law is too heavy for the grid.
    """
    if tol <= 0.0:
        raise ValueError(f'Expected tol > 0, received: {tol}')

    if eps_trunc <= 0.0:
        raise ValueError(f'Expected eps_trunc > 0, received: {eps_trunc}')

    _start = perf_counter()

    p = TruncatedGrid.point_mass(N1, N2).p
    iterations = 0

    while True:
        kernel = Kernel.build(model, N1, N2)
        p, discarded, sweeps, change = _iterate(kernel, p, tol, max_iter, iterations)
        iterations += sweeps

        tail1, tail2 = truncation_bound(model, N1, N2)
        deficit = max(discarded, tail1 + tail2, 0.0)

        if deficit <= eps_trunc:
            break

        grow1 = tail1 > eps_trunc / 2.0 or discarded > tail1 + tail2
        grow2 = tail2 > eps_trunc / 2.0 or discarded > tail1 + tail2
        M1 = min(max(2 * N1, 8), max_size) if grow1 else N1
        M2 = min(max(2 * N2, 8), max_size) if grow2 else N2

        if (M1, M2) == (N1, N2):
            raise NoConvergence(f'Truncation deficit {deficit:.3e} exceeds eps_trunc={eps_trunc:.3e} on the largest '
                                f'{N1}x{N2} grid', iterations=iterations, residual=change)

        log.info(f'Truncation deficit {deficit:.3e} exceeds eps_trunc={eps_trunc:.3e}; '
                 f'growing the grid from {N1}x{N2} to {M1}x{M2}')

        grown = np.zeros((M1 + 1, M2 + 1))
        grown[: N1 + 1, : N2 + 1] = p
        p, N1, N2 = grown, M1, M2

    log.debug(f'Stationary grid {N1}x{N2}: {iterations} sweeps, change {change:.3e}, deficit {deficit:.3e}, '
              f'{perf_counter() - _start:.2f}s')

    return TruncatedGrid(p, deficit=deficit, iterations=iterations, residual=change)


def balance_residual(grid: TruncatedGrid, model: ParallelQueueModel) -> float:
    """
    max |p(m, n) - (Kp)(m, n)| over interior cells, i.e. how far the grid is from solving the balance equation.

    Cells whose inflow could come from beyond the truncation edge (within the essential service range, at most half
    the grid) are excluded.

    Args:
        grid (TruncatedGrid): a normalized grid.
        model (ParallelQueueModel): the model.

    Returns:
        float: the residual.
    """
    kernel = Kernel.build(model, grid.N1, grid.N2)
    image, _ = kernel.apply(grid.p)

    margin1 = min(model.service1.truncation_point(_SERVICE_MARGIN_EPS), grid.N1 // 2)
    margin2 = min(model.service2.truncation_point(_SERVICE_MARGIN_EPS), grid.N2 // 2)

    difference = np.abs(grid.p - image)[: grid.N1 + 1 - margin1, : grid.N2 + 1 - margin2]

    return float(difference.max()) if difference.size else 0.0


def marginal_stationary_1d(arrival: Pmf, service: Pmf, N: int, tol: float = DEFAULT_TOL,
                           max_iter: int = DEFAULT_MAX_ITER) -> NDArray[np.float64]:
    """
    Stationary law of the single queue q' = (q + A - S)_+ on 0..N by the same truncated power iteration; each queue of
    the parallel model on its own is such a queue, so this is the oracle for the grid marginals.

    Args:
        arrival (Pmf): arrival law.
        service (Pmf): service law.
        N (int): truncation bound.
        tol (float): L1 stopping tolerance. (default: 1e-12)
        max_iter (int): iteration limit. (default: 200000)

    Returns:
        NDArray[np.float64]: P(Q = q) for q = 0..N.

    Raises:
        PreconditionFailed: If E A >= E S.
        NoConvergence: If `max_iter` sweeps do not reach `tol`.
    """
    if not arrival.mean() < service.mean():
        raise PreconditionFailed(f'Single queue is unstable: E A = {arrival.mean()!r} >= E S = {service.mean()!r}')

    kernel = Kernel1D.build(arrival, service, N)
    v = np.zeros(N + 1)
    v[0] = 1.0
    change = math.inf

    for iteration in range(1, max_iter + 1):
        out, _ = kernel.apply(v)
        out /= out.sum()
        change = float(np.abs(out - v).sum())
        v = out

        if change < tol:
            log.debug(f'Single-queue oracle on 0..{N}: {iteration} sweeps, change {change:.3e}')
            return v

    raise NoConvergence(f'Single-queue iteration on 0..{N} did not reach tol={tol}', iterations=max_iter, residual=change)

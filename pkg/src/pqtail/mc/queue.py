"""
Ergodic-average estimator: run the coupled Lindley recursion from (0, 0) and count the slots after burn-in in which
both queues exceed their levels.
"""


from __future__ import annotations

import logging

import numpy as np

from typing import TYPE_CHECKING
from functools import partial
from time import perf_counter
from pqtail.dist import Rng
from pqtail.errors import PreconditionFailed
from pqtail.mc._pool import run_replications
from pqtail.mc.estimate import Estimate
from pqtail.model import QueueState, queue_path

if TYPE_CHECKING:
    from typing import Dict, List, Sequence, Tuple
    from numpy.typing import NDArray
    from pqtail.model import ParallelQueueModel


log = logging.getLogger(__name__)


CHUNK = 2 ** 16


def _queue_replication(model: ParallelQueueModel, points: Tuple[Tuple[int, int], ...], horizon: int, burnin: int,
                       seed: int, stream_id: int) -> NDArray[np.float64]:
    """
    One replication: fraction of slots n in (burnin, horizon] with Q^1_n > x and Q^2_n > y, per point.
    """
    rng = Rng(seed, stream_id)
    xs = np.array([p[0] for p in points], dtype=np.int64)[:, None]
    ys = np.array([p[1] for p in points], dtype=np.int64)[:, None]
    hits = np.zeros(len(points), dtype=np.int64)
    state = QueueState()
    done = 0

    while done < horizon:
        size = min(CHUNK, horizon - done)
        a, s1, s2 = model.sample_steps(rng, size)
        q1, q2 = queue_path(a, s1, s2, start=state)

        # q[k] is Q at slot done + k; only slots past the burn-in count.
        first = max(1, burnin - done + 1)

        if first <= size:
            window1, window2 = q1[first:][None, :], q2[first:][None, :]
            hits += ((window1 > xs) & (window2 > ys)).sum(axis=1)

        state = QueueState(int(q1[-1]), int(q2[-1]))
        done += size

    return hits / float(horizon - burnin)


def simulate_queue_tail(model: ParallelQueueModel, points: Sequence[Tuple[int, int]], horizon: int, burnin: int,
                        reps: int, seed: int, threads: int = 1) -> Dict[Tuple[int, int], Estimate]:
    """
    Estimate H(x, y) at every point by batch replications of the queue from empty.

    Args:
        model (ParallelQueueModel): a stable model.
        points (Sequence[Tuple[int, int]]): the (x, y) levels.
        horizon (int): slots per replication.
        burnin (int): leading slots discarded, < horizon.
        reps (int): number of replications.
        seed (int): the seed; replication r uses stream r.
        threads (int): worker processes. (default: 1)

    Returns:
        Dict[Tuple[int, int], Estimate]: one estimate per point.

    Raises:
        PreconditionFailed: If burnin >= horizon.
    """
    if not 0 <= burnin < horizon:
        raise PreconditionFailed(f'Queue simulation needs 0 <= burnin < horizon, received burnin={burnin}, horizon={horizon}')

    _start = perf_counter()
    levels = tuple((int(x), int(y)) for x, y in points)

    task = partial(_queue_replication, model, levels, horizon, burnin, seed)
    results: List[NDArray[np.float64]] = run_replications(task, reps, threads, title='pqtail-queue-mc')
    samples = np.vstack(results)

    wall_time = perf_counter() - _start
    log.info(f'Queue simulation: {reps} x {horizon} slots for {len(levels)} points in {wall_time:.2f}s')

    return {
        point: Estimate.from_samples(samples[:, i], seed=seed, wall_time=wall_time) for i, point in enumerate(levels)
    }

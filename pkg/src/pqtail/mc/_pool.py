"""
Fan replications out over worker processes. Replication r always runs on stream r and results come back in
replication order, so the worker count never changes a result.
"""


from __future__ import annotations

import logging

from typing import TYPE_CHECKING, TypeVar
from concurrent.futures import ProcessPoolExecutor
from setproctitle import setproctitle

if TYPE_CHECKING:
    from typing import Callable, List


log = logging.getLogger(__name__)


T = TypeVar('T')


def _name_worker(title: str) -> None:
    setproctitle(title)


def run_replications(task: Callable[[int], T], reps: int, threads: int = 1, title: str = 'pqtail-mc') -> List[T]:
    """
    Evaluate task(0), ..., task(reps - 1).

    Args:
        task (Callable[[int], T]): a picklable callable taking the stream id.
        reps (int): number of replications.
        threads (int): worker processes; 1 runs in the calling process. (default: 1)
        title (str): process title of the workers. (default: 'pqtail-mc')

    Returns:
        List[T]: results indexed by stream id.
    """
    if reps <= 0:
        raise ValueError(f'Expected reps > 0, received: {reps}')

    if threads <= 1 or reps == 1:
        return [task(stream_id) for stream_id in range(reps)]

    chunksize = max(1, reps // (4 * threads))

    log.debug(f'Running {reps} replications on {threads} workers in chunks of {chunksize}')

    with ProcessPoolExecutor(max_workers=threads, initializer=_name_worker, initargs=(title,)) as executor:
        # map() yields in submission order whatever order the workers finish in.
        return list(executor.map(task, range(reps), chunksize=chunksize))

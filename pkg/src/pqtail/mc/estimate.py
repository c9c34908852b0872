"""
Monte Carlo point estimates with their uncertainty, and the agreement verdict between two of them.
"""


from __future__ import annotations

import logging
import math

import numpy as np

from typing import TYPE_CHECKING
from attrs import define, field

if TYPE_CHECKING:
    from typing import Any, Dict, Sequence, Tuple


log = logging.getLogger(__name__)


ESTIMATE_CSV_HEADER = ('x', 'y', 'estimator', 'value', 'stderr', 'bias_budget', 'reps', 'seed')

AGREEMENT_SIGMAS = 3.0


@define(frozen=True)
class Estimate:
    """
    A point estimate of H(x, y).

    `bias_budget` is one-sided: the estimator can undershoot by at most this much from early stopping or truncation.
    `meta` carries the seed, the number of streams and the wall time; the wall time never reaches a report file.
    """
    value: float
    stderr: float
    reps: int
    bias_budget: float = 0.0
    meta: Dict[str, Any] = field(factory=dict, eq=False)

    def __attrs_post_init__(self) -> None:
        if not (self.stderr >= 0.0 and self.bias_budget >= 0.0):
            raise ValueError(f'Estimate needs stderr >= 0 and bias_budget >= 0, received {self.stderr!r}, {self.bias_budget!r}')

        if not 0.0 <= self.value <= 1.0 + self.bias_budget + 1e-12:
            log.warning(f'Estimate {self.value!r} lies outside [0, 1 + bias_budget]')

    @classmethod
    def from_samples(cls, samples: Sequence[float], bias_budget: float = 0.0, **meta: Any) -> Estimate:
        """
        Mean and standard error of per-replication samples, summed in replication order.

        Args:
            samples (Sequence[float]): one value per replication, indexed by stream id.
            bias_budget (float): one-sided bias bound. (default: 0.0)
            **meta (Any): metadata, e.g. seed and wall_time.

        Returns:
            Estimate: the estimate.
        """
        values = np.asarray(samples, dtype=np.float64)
        reps = values.size

        if reps == 0:
            raise ValueError('Estimate needs at least one replication')

        # numpy sums in a fixed pairwise tree over the index order, so equal samples give equal bits.
        mean = float(values.sum() / reps)
        stderr = float(math.sqrt(((values - mean) ** 2).sum() / (reps - 1) / reps)) if reps > 1 else 0.0

        meta.setdefault('stream_count', reps)

        return cls(value=mean, stderr=stderr, reps=reps, bias_budget=bias_budget, meta=meta)

    @property
    def seed(self) -> int | None:
        return self.meta.get('seed')

    def csv_row(self, x: int, y: int, estimator: str) -> Tuple[Any, ...]:
        """
        The `x,y,estimator,value,stderr,bias_budget,reps,seed` row.
        """
        return (x, y, estimator, self.value, self.stderr, self.bias_budget, self.reps, '' if self.seed is None else self.seed)

    def to_record(self) -> Dict[str, Any]:
        return {
            'value': self.value,
            'stderr': self.stderr,
            'bias_budget': self.bias_budget,
            'reps': self.reps,
            'seed': self.seed,
            'stream_count': self.meta.get('stream_count', self.reps)
        }

    def agrees_with(self, other: Estimate, sigmas: float = AGREEMENT_SIGMAS) -> bool:
        """
        |v1 - v2| <= sigmas (stderr1 + stderr2) + bias1 + bias2.
        """
        return abs(self.value - other.value) <= sigmas * (self.stderr + other.stderr) + self.bias_budget + other.bias_budget

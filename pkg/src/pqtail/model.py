"""
The parallel queue: one common batch arrival A_n feeds two queues served by independent batch services S_n^1, S_n^2.

Queue lengths are read after the service of the previous slot and before the arrival of the current one, and follow
the coupled Lindley recursion Q^i_{n+1} = (Q^i_n + A_n - S^i_n)_+. The stationary tail H(x, y) is the probability
that the random walk (𝒜_n - 𝒮^1_n, 𝒜_n - 𝒮^2_n) ever enters {w1 > x, w2 > y}.
"""


from __future__ import annotations

import logging
import math

import numpy as np

from typing import TYPE_CHECKING
from attrs import define, field
from pqtail.dist import Pmf, build_pmf
from pqtail.errors import ConfigError, WalkOverflowError

if TYPE_CHECKING:
    from typing import Any, Dict, Tuple
    from numpy.typing import NDArray
    from pqtail.dist import Rng


log = logging.getLogger(__name__)


# Walk coordinates beyond this are rejected rather than risk int64 wraparound.
WALK_LIMIT = 2 ** 61


@define(frozen=True)
class StabilityReport:
    """
    Outcome of the stability check E A < min(E S^1, E S^2).
    """
    stable: bool
    means: Tuple[float, float, float]

    def __str__(self) -> str:
        ea, es1, es2 = self.means
        return f'E A = {ea!r}, E S1 = {es1!r}, E S2 = {es2!r} ({"stable" if self.stable else "unstable"})'


def check_stability(model: ParallelQueueModel) -> StabilityReport:
    """
    Check E A < min(E S^1, E S^2).

    Args:
        model (ParallelQueueModel): the model (need not have passed its own constructor check).

    Returns:
        StabilityReport: the verdict and the three means.
    """
    means = (model.arrival.mean(), model.service1.mean(), model.service2.mean())
    return StabilityReport(stable=means[0] < min(means[1], means[2]), means=means)


@define(frozen=True)
class ParallelQueueModel:
    """
    The triple (A, S^1, S^2) of mutually independent laws. Construction rejects unstable triples unless `validate` is
    False, which the stability check, its tests and the tilted step laws use.
    """
    arrival: Pmf
    service1: Pmf
    service2: Pmf
    validate: bool = field(default=True, kw_only=True, eq=False, repr=False)

    def __attrs_post_init__(self) -> None:
        if self.validate and not (report := check_stability(self)).stable:
            raise ConfigError(f'Unstable model, need E A < min(E S1, E S2): {report}')

    @classmethod
    def from_record(cls, record: Dict[str, Any]) -> ParallelQueueModel:
        """
        Build a model from {"arrival": <law>, "service1": <law>, "service2": <law>}.

        Args:
            record (Dict[str, Any]): the model record.

        Returns:
            ParallelQueueModel: the model.

        Raises:
            ConfigError: If a law record is invalid or the model is unstable.
        """
        try:
            return cls(
                build_pmf(record['arrival']),
                build_pmf(record['service1']),
                build_pmf(record['service2'])
            )
        except (KeyError, ValueError, TypeError) as e:
            raise ConfigError(f'Invalid model record: {e}') from e

    def to_record(self) -> Dict[str, Any]:
        return {
            'arrival': self.arrival.to_record(),
            'service1': self.service1.to_record(),
            'service2': self.service2.to_record()
        }

    @property
    def symmetric(self) -> bool:
        """
        Whether both services have the same law.
        """
        return self.service1.to_record() == self.service2.to_record()

    def drift(self) -> Tuple[float, float]:
        """
        Mean walk increment (E A - E S^1, E A - E S^2).
        """
        ea = self.arrival.mean()
        return ea - self.service1.mean(), ea - self.service2.mean()

    def sample_steps(self, rng: Rng, size: int) -> Tuple[NDArray[np.int64], NDArray[np.int64], NDArray[np.int64]]:
        """
        Draw `size` slots. Arrivals are drawn first, then the first and the second service, each as one block.

        Args:
            rng (Rng): the random stream.
            size (int): number of slots.

        Returns:
            Tuple[NDArray[np.int64], NDArray[np.int64], NDArray[np.int64]]: (a, s1, s2).
        """
        return self.arrival.sample_many(rng, size), self.service1.sample_many(rng, size), self.service2.sample_many(rng, size)


@define(frozen=True)
class QueueState:
    """
    (Q^1_n, Q^2_n); both nonnegative.
    """
    q1: int = 0
    q2: int = 0

    def __attrs_post_init__(self) -> None:
        if self.q1 < 0 or self.q2 < 0:
            raise ValueError(f'Queue lengths must be nonnegative, received: ({self.q1}, {self.q2})')


@define(frozen=True)
class WalkState:
    """
    (𝒜_n - 𝒮^1_n, 𝒜_n - 𝒮^2_n) after n slots; the walk starts at the origin.
    """
    w1: int = 0
    w2: int = 0
    n: int = 0

    def __attrs_post_init__(self) -> None:
        if abs(self.w1) > WALK_LIMIT or abs(self.w2) > WALK_LIMIT:
            raise WalkOverflowError(f'Walk left |w| <= 2^61 at slot {self.n}: ({self.w1}, {self.w2})')


def step(state: QueueState, a: int, s1: int, s2: int) -> QueueState:
    """
    One slot of the coupled Lindley recursion; the same arrival a enters both queues.

    Args:
        state (QueueState): queue lengths before the arrival.
        a (int): arrivals in the slot.
        s1 (int): service capacity of server 1.
        s2 (int): service capacity of server 2.

    Returns:
        QueueState: ((q1 + a - s1)_+, (q2 + a - s2)_+).
    """
    return QueueState(max(state.q1 + a - s1, 0), max(state.q2 + a - s2, 0))


def walk_step(state: WalkState, a: int, s1: int, s2: int) -> WalkState:
    """
    One slot of the unreflected walk.

    Args:
        state (WalkState): the walk before the slot.
        a (int): arrivals in the slot.
        s1 (int): service capacity of server 1.
        s2 (int): service capacity of server 2.

    Returns:
        WalkState: (w1 + a - s1, w2 + a - s2, n + 1).
    """
    return WalkState(state.w1 + a - s1, state.w2 + a - s2, state.n + 1)


def walk_path(a: NDArray[np.int64], s1: NDArray[np.int64], s2: NDArray[np.int64],
              start: Tuple[int, int] = (0, 0)) -> Tuple[NDArray[np.int64], NDArray[np.int64]]:
    """
    Positions of the walk after each of the given slots (the start itself is not included).

    Raises:
        WalkOverflowError: If a coordinate leaves |w| <= 2^61.
    """
    if not a.size:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)

    largest_step = int(np.abs(a).max()) + max(int(np.abs(s1).max()), int(np.abs(s2).max()))
    reach = max(abs(int(start[0])), abs(int(start[1]))) + a.size * largest_step

    if reach <= WALK_LIMIT:
        return start[0] + np.cumsum(a - s1), start[1] + np.cumsum(a - s2)

    # int64 sums could wrap here; redo them in exact integers before checking the limit.
    exact = a.astype(object)
    w1 = int(start[0]) + np.cumsum(exact - s1.astype(object))
    w2 = int(start[1]) + np.cumsum(exact - s2.astype(object))

    if max(abs(w) for w in w1) > WALK_LIMIT or max(abs(w) for w in w2) > WALK_LIMIT:
        raise WalkOverflowError(f'Walk left |w| <= 2^61 within {a.size} slots')

    return w1.astype(np.int64), w2.astype(np.int64)


def queue_path(a: NDArray[np.int64], s1: NDArray[np.int64], s2: NDArray[np.int64],
               start: QueueState = QueueState()) -> Tuple[NDArray[np.int64], NDArray[np.int64]]:
    """
    Queue lengths Q_0 = start, Q_1, ..., Q_len from the given slots.

    The Lindley recursion has the closed form Q_n = W_n - min(-Q_0, W_1, ..., W_n) with W the walk and W_0 = 0, so an
    empty start gives Q_n = W_n - min_{k<=n} W_k.

    Returns:
        Tuple[NDArray[np.int64], NDArray[np.int64]]: both queue-length paths, of length len(a) + 1.
    """
    w1, w2 = walk_path(a, s1, s2)

    def reflect(w: NDArray[np.int64], q0: int) -> NDArray[np.int64]:
        floor = np.minimum.accumulate(np.concatenate(([-q0], w)))
        return np.concatenate(([0], w)) - floor

    return reflect(w1, start.q1), reflect(w2, start.q2)


def _factors(model: ParallelQueueModel, theta: Tuple[float, float]) -> Tuple[Tuple[float, float, float], ...]:
    t1, t2 = theta
    return (
        model.arrival.mgf_derivatives(t1 + t2),
        model.service1.mgf_derivatives(-t1),
        model.service2.mgf_derivatives(-t2)
    )


def increment_mgf(model: ParallelQueueModel, theta: Tuple[float, float]) -> float:
    """
    φ(ϑ) = E exp{ϑ1(A - S^1) + ϑ2(A - S^2)} = M_A(ϑ1 + ϑ2) M_{S1}(-ϑ1) M_{S2}(-ϑ2).

    Args:
        model (ParallelQueueModel): the model.
        theta (Tuple[float, float]): ϑ.

    Returns:
        float: φ(ϑ).

    Raises:
        DomainError: If any factor is evaluated outside its domain.
    """
    t1, t2 = theta
    return model.arrival.mgf(t1 + t2) * model.service1.mgf(-t1) * model.service2.mgf(-t2)


def log_increment_mgf(model: ParallelQueueModel, theta: Tuple[float, float]) -> float:
    """
    log φ(ϑ), summed factor by factor so large ϑ does not overflow.
    """
    t1, t2 = theta
    return model.arrival.log_mgf(t1 + t2) + model.service1.log_mgf(-t1) + model.service2.log_mgf(-t2)


def increment_mgf_gradient(model: ParallelQueueModel, theta: Tuple[float, float]) -> NDArray[np.float64]:
    """
    ∇φ(ϑ) by the product rule over the three factors.
    """
    (a0, a1, _), (b0, b1, _), (c0, c1, _) = _factors(model, theta)
    return np.array([a1 * b0 * c0 - a0 * b1 * c0, a1 * b0 * c0 - a0 * b0 * c1])


def increment_mgf_hessian(model: ParallelQueueModel, theta: Tuple[float, float]) -> NDArray[np.float64]:
    """
    The Hessian of φ at ϑ.
    """
    (a0, a1, a2), (b0, b1, b2), (c0, c1, c2) = _factors(model, theta)

    h11 = a2 * b0 * c0 - 2.0 * a1 * b1 * c0 + a0 * b2 * c0
    h22 = a2 * b0 * c0 - 2.0 * a1 * b0 * c1 + a0 * b0 * c2
    h12 = a2 * b0 * c0 - a1 * b0 * c1 - a1 * b1 * c0 + a0 * b1 * c1

    return np.array([[h11, h12], [h12, h22]])


def in_domain(model: ParallelQueueModel, theta: Tuple[float, float]) -> bool:
    """
    Whether φ is finite at ϑ.
    """
    t1, t2 = theta
    return (
        model.arrival.in_domain(t1 + t2)
        and model.service1.in_domain(-t1)
        and model.service2.in_domain(-t2)
        and all(math.isfinite(t) for t in theta)
    )

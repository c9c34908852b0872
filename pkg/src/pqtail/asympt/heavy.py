"""
Single-big-jump series for heavy-tailed arrivals:

    H(nη1, nη2) ≈ sum over k >= 0 of P(A > max{nη1 + k c1, nη2 + k c2}),

with c_i = E S^i ('service-mean') or c_i = E S^i - E A ('net-drift'). Since A is integer-valued, P(A > t) is
tail(A, floor(t)) for every real t.
"""


from __future__ import annotations

import logging
import math

import numpy as np

from typing import TYPE_CHECKING
from attrs import define
from pqtail.errors import NoLundbergRoot, PreconditionFailed

if TYPE_CHECKING:
    from typing import Any, Dict, Tuple
    from pqtail.dist import Pmf
    from pqtail.model import ParallelQueueModel


log = logging.getLogger(__name__)


CENTERINGS = ('service-mean', 'net-drift')

DEFAULT_REL_TOL = 1e-6

_INITIAL_TERMS = 64
_MAX_TERMS = 2 ** 26


@define(frozen=True)
class HeavySeries:
    """
    Partial sum over k = 0..k_used and a bound on the omitted remainder.
    """
    value: float
    truncation_bound: float
    k_used: int
    centering: str = 'service-mean'

    def to_record(self) -> Dict[str, Any]:
        return {
            'value': self.value,
            'truncation_bound': self.truncation_bound,
            'k_used': self.k_used,
            'centering': self.centering
        }


def _tails_at(arrival: Pmf, thresholds: np.ndarray) -> np.ndarray:
    return np.asarray(arrival.tail(np.floor(thresholds).astype(np.int64)), dtype=np.float64)


def _remainder_bound(arrival: Pmf, offsets: Tuple[float, float], rates: Tuple[float, float], K: int) -> float:
    """
    Bound on the sum over k > K, coordinate by coordinate: sum_{k>K} P(A > a + k c) <= E(A - floor(a + K c))_+ / c,
    and the max in the threshold makes the smaller of the two valid.
    """
    return min(
        arrival.excess_mean(math.floor(a + K * c)) / c for a, c in zip(offsets, rates)
    )


def big_jump_bound(arrival: Pmf, offsets: Tuple[float, float], rates: Tuple[float, float]) -> float:
    """
    Closed-form upper bound on the whole series, P(A > a) + E(A - floor(a))_+ / c for the better coordinate.

    Args:
        arrival (Pmf): arrival law.
        offsets (Tuple[float, float]): (a1, a2); may be negative.
        rates (Tuple[float, float]): (c1, c2), both positive.

    Returns:
        float: the bound.
    """
    return min(
        float(arrival.tail(math.floor(a))) + arrival.excess_mean(math.floor(a)) / c for a, c in zip(offsets, rates)
    )


def big_jump_sum(arrival: Pmf, offsets: Tuple[float, float], rates: Tuple[float, float],
                 rel_tol: float = DEFAULT_REL_TOL) -> Tuple[float, float, int]:
    """
    sum over k >= 0 of P(A > max{a1 + k c1, a2 + k c2}), doubling the number of terms until the remainder bound is
    below rel_tol times the partial sum.

    Args:
        arrival (Pmf): arrival law.
        offsets (Tuple[float, float]): (a1, a2).
        rates (Tuple[float, float]): (c1, c2), both positive.
        rel_tol (float): relative remainder budget. (default: 1e-6)

    Returns:
        Tuple[float, float, int]: the partial sum, the remainder bound and the last k included.
    """
    if min(rates) <= 0.0:
        raise PreconditionFailed(f'Big-jump series needs positive rates, received: {rates}')

    a = np.array(offsets, dtype=np.float64)[:, None]
    c = np.array(rates, dtype=np.float64)[:, None]

    if float(_tails_at(arrival, np.array([max(offsets)]))[0]) == 0.0:
        return 0.0, 0.0, 0

    K = _INITIAL_TERMS

    while True:
        k = np.arange(K + 1, dtype=np.float64)[None, :]
        value = float(_tails_at(arrival, (a + k * c).max(axis=0)).sum())
        bound = _remainder_bound(arrival, offsets, rates, K)

        if bound <= rel_tol * value or K >= _MAX_TERMS:
            break

        K *= 2

    if bound > rel_tol * value:
        log.warning(f'Big-jump remainder {bound:.3e} still above {rel_tol:.1e} x {value:.3e} after {K} terms')

    return value, bound, K


def heavy_series(model: ParallelQueueModel, eta: Tuple[float, float], n: int, rel_tol: float = DEFAULT_REL_TOL,
                 centering: str = 'service-mean') -> HeavySeries:
    """
    The single-big-jump approximation of H(nη1, nη2).

    Args:
        model (ParallelQueueModel): a stable model with heavy-tailed arrivals and services of at least 1.
        eta (Tuple[float, float]): the direction, both components positive.
        n (int): the scale, positive.
        rel_tol (float): relative remainder budget. (default: 1e-6)
        centering (str): 'service-mean' or 'net-drift'. (default: 'service-mean')

    Returns:
        HeavySeries: the value, the remainder bound and the number of terms.

    Raises:
        PreconditionFailed: If a service can be 0, or the arrival law has a Lundberg exponent.
    """
    from pqtail.asympt.lundberg import lundberg_1d

    if centering not in CENTERINGS:
        raise ValueError(f'Unknown centering {centering!r}, expected one of {CENTERINGS}')

    if eta[0] <= 0.0 or eta[1] <= 0.0 or n <= 0:
        raise PreconditionFailed(f'Big-jump series needs η > 0 and n > 0, received η={eta}, n={n}')

    for i, service in enumerate((model.service1, model.service2), start=1):
        if service.pmf(0) > 0.0:
            raise PreconditionFailed(f'Big-jump series needs S{i} >= 1, but P(S{i} = 0) = {service.pmf(0)!r}')

    offsets = (n * eta[0], n * eta[1])

    # A series whose first term vanishes is identically zero, whatever the tail class.
    if float(model.arrival.tail(math.floor(max(offsets)))) == 0.0:
        return HeavySeries(0.0, 0.0, 0, centering)

    if model.arrival.light_tailed:
        try:
            gamma = lundberg_1d(model.arrival, model.service1)
        except NoLundbergRoot:
            pass
        else:
            raise PreconditionFailed(f'Arrivals are light-tailed (Lundberg exponent {gamma!r}); use the Cramér asymptotics')

    ea = model.arrival.mean()
    means = (model.service1.mean(), model.service2.mean())
    rates = means if centering == 'service-mean' else (means[0] - ea, means[1] - ea)

    value, bound, k_used = big_jump_sum(model.arrival, offsets, rates, rel_tol)

    log.debug(f'Heavy series at n={n}, η={eta} ({centering}): {value!r} + <= {bound:.3e} with {k_used} terms')

    return HeavySeries(value, bound, k_used, centering)

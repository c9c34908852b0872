"""
Light-tail prediction C n^{-1/2} e^{-⟨γ, η⟩ n} and the empirical fit of log H(n) = log C + power log n - rate n.
"""


from __future__ import annotations

import logging
import math

import numpy as np

from typing import TYPE_CHECKING
from attrs import define
from pqtail.errors import DegenerateFit

if TYPE_CHECKING:
    from typing import Any, Dict, Sequence, Tuple
    from pqtail.asympt.cramer import CramerRoot


log = logging.getLogger(__name__)


MIN_FIT_POINTS = 5

# Fitted powers outside this band contradict the n^{-1/2} pre-factor.
PREFACTOR_BAND = (-1.5, 0.5)


@define(frozen=True)
class RateFit:
    """
    Least-squares coefficients of log H(n) = logC + power * log n - rate * n.
    """
    rate: float
    power: float
    logC: float
    r2: float
    points: int

    def to_record(self) -> Dict[str, Any]:
        return {
            'rate': self.rate,
            'power': self.power,
            'logC': self.logC,
            'r2': self.r2,
            'points': self.points
        }


def light_tail_prediction(root: CramerRoot, n: int, C: float, raw: bool = False) -> float:
    """
    C n^{-1/2} exp(-⟨γ, η⟩ n).

    Args:
        root (CramerRoot): the Cramér root.
        n (int): the scale, positive.
        C (float): the pre-factor constant.
        raw (bool): use the direction as given instead of the normalized one. (default: False)

    Returns:
        float: the prediction.
    """
    if n <= 0:
        raise ValueError(f'Expected n > 0, received: {n}')

    rate = root.rate_raw if raw else root.rate

    return C * math.exp(-0.5 * math.log(n) - rate * n)


def extract_rate(points: Sequence[Tuple[float, float]]) -> RateFit:
    """
    Fit log H(n) = logC + power log n - rate n by ordinary least squares.

    Args:
        points (Sequence[Tuple[float, float]]): (n, H(n)) pairs with H > 0 and n strictly increasing.

    Returns:
        RateFit: the coefficients and r².

    Raises:
        DegenerateFit: If fewer than 5 points are given or the design matrix is rank-deficient.
        ValueError: If a value is not positive or n is not strictly increasing.
    """
    if len(points) < MIN_FIT_POINTS:
        raise DegenerateFit(f'Rate fit needs at least {MIN_FIT_POINTS} points, received {len(points)}')

    n = np.array([p[0] for p in points], dtype=np.float64)
    values = np.array([p[1] for p in points], dtype=np.float64)

    if np.any(n <= 0.0):
        raise ValueError(f'Expected positive n, received: {n.tolist()}')

    if np.any(values <= 0.0):
        raise ValueError('Rate fit needs strictly positive H values; a zero usually means the grid is too small')

    design = np.column_stack((np.ones_like(n), np.log(n), -n))
    y = np.log(values)

    coef, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)

    if rank < design.shape[1]:
        raise DegenerateFit(f'Rate fit design matrix has rank {rank} < 3 for n = {n.tolist()}')

    if np.any(np.diff(n) <= 0.0):
        raise ValueError(f'Expected strictly increasing n, received: {n.tolist()}')

    fitted = design @ coef
    ss_res = float(((y - fitted) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())

    fit = RateFit(
        rate=float(coef[2]),
        power=float(coef[1]),
        logC=float(coef[0]),
        r2=1.0 - ss_res / ss_tot if ss_tot > 0.0 else 1.0,
        points=len(points)
    )

    log.debug(f'Rate fit over n={n.tolist()}: {fit}')

    return fit


def prefactor_warning(fit: RateFit, band: Tuple[float, float] = PREFACTOR_BAND) -> bool:
    """
    Warn when the fitted power rejects the n^{-1/2} pre-factor; in some directions the pre-factor differs.

    Returns:
        bool: True if the warning was issued.
    """
    if band[0] <= fit.power <= band[1]:
        return False

    log.warning(f'Fitted power {fit.power:.3f} is outside [{band[0]}, {band[1]}]; the polynomial pre-factor may not be n^(-1/2) in this direction')

    return True

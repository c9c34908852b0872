"""
Single-queue Lundberg exponents: the positive root of E exp{γ(A - S)} = 1.
"""


from __future__ import annotations

import logging
import math

from typing import TYPE_CHECKING
from scipy.optimize import brentq, minimize_scalar
from pqtail.errors import NoLundbergRoot, PreconditionFailed

if TYPE_CHECKING:
    from typing import Callable, Tuple
    from pqtail.dist import Pmf


log = logging.getLogger(__name__)


LUNDBERG_TOL = 1e-12

# Beyond this exponent e^γ overflows long before any root could be resolved.
_GAMMA_CAP = 700.0
_BRACKET_STEPS = 400


def _upper_bracket(f: Callable[[float], float], in_domain: Callable[[float], bool]) -> float:
    """
    Find h > 0 with f(h) > 0, doubling while inside the domain and halving towards the domain edge otherwise.

    Raises:
        NoLundbergRoot: If the domain edge or the exponent cap is reached without a sign change.
    """
    valid, ceiling, hi = 0.0, math.inf, 1.0

    for _ in range(_BRACKET_STEPS):
        if in_domain(hi):
            if f(hi) > 0.0:
                return hi
            valid = hi
        else:
            ceiling = hi

        if valid > _GAMMA_CAP:
            raise NoLundbergRoot(f'No sign change up to γ={valid:.1f}; the increment is nonpositive almost surely')

        if ceiling - valid < 1e-13 * (1.0 + valid):
            raise NoLundbergRoot(f'Generating function domain exhausted at γ={valid!r} before a sign change')

        hi = 2.0 * valid if math.isinf(ceiling) else 0.5 * (valid + ceiling)

    raise NoLundbergRoot(f'No bracket found after {_BRACKET_STEPS} steps')


def positive_root(f: Callable[[float], float], df: Callable[[float], float] | None,
                  in_domain: Callable[[float], bool], tol: float = LUNDBERG_TOL) -> Tuple[float, float]:
    """
    The positive root of a convex f with f(0) = 0 and f'(0) < 0: bracket, Brent, then a Newton polish.

    Args:
        f (Callable[[float], float]): the convex function, usually a log generating function.
        df (Callable[[float], float] | None): its derivative, for polishing; skipped when None.
        in_domain (Callable[[float], bool]): whether f is finite at a point.
        tol (float): target for |f(root)|. (default: 1e-12)

    Returns:
        Tuple[float, float]: the root and |f(root)|.

    Raises:
        NoLundbergRoot: If no positive root exists inside the domain.
    """
    hi = _upper_bracket(f, in_domain)

    # f is convex, so its minimum on [0, hi] is negative and a valid lower end for Brent.
    lowest = minimize_scalar(f, bounds=(0.0, hi), method='bounded', options={'xatol': 1e-12 * hi})

    if not lowest.fun < 0.0:
        raise NoLundbergRoot(f'Only the trivial root: min f = {lowest.fun!r} on (0, {hi!r}]')

    root = brentq(f, lowest.x, hi, xtol=1e-15, rtol=4.0 * 2.220446049250313e-16, maxiter=500)
    residual = abs(f(root))

    if df is not None:
        for _ in range(3):
            if residual <= tol * 1e-3:
                break

            slope = df(root)

            if slope <= 0.0:
                break

            candidate = root - f(root) / slope

            if not (candidate > 0.0 and in_domain(candidate)):
                break

            if (candidate_residual := abs(f(candidate))) >= residual:
                break

            root, residual = candidate, candidate_residual

    return root, residual


def lundberg_1d(arrival: Pmf, service: Pmf, tol: float = LUNDBERG_TOL) -> float:
    """
    The unique γ* > 0 with M_A(γ*) M_S(-γ*) = 1.

    Args:
        arrival (Pmf): arrival law.
        service (Pmf): service law.
        tol (float): target for |M_A(γ*) M_S(-γ*) - 1|. (default: 1e-12)

    Returns:
        float: γ*.

    Raises:
        PreconditionFailed: If E A >= E S.
        NoLundbergRoot: If the arrival generating function is infinite right of 0, or no sign change exists.
    """
    if not arrival.mean() < service.mean():
        raise PreconditionFailed(f'Lundberg exponent needs E A < E S, received {arrival.mean()!r} >= {service.mean()!r}')

    if not arrival.light_tailed:
        raise NoLundbergRoot(f'{arrival} has no finite generating function right of 0')

    def f(gamma: float) -> float:
        return arrival.log_mgf(gamma) + service.log_mgf(-gamma)

    def df(gamma: float) -> float:
        a0, a1, _ = arrival.mgf_derivatives(gamma)
        s0, s1, _ = service.mgf_derivatives(-gamma)
        return a1 / a0 - s1 / s0

    gamma, residual = positive_root(f, df, arrival.in_domain, tol)

    # The contract is on the product, not its log.
    product_residual = abs(arrival.mgf(gamma) * service.mgf(-gamma) - 1.0)

    if product_residual > tol:
        log.warning(f'Lundberg root {gamma!r} for {arrival} / {service} has residual {product_residual:.3e} > {tol:.1e}')

    log.debug(f'Lundberg exponent for {arrival} / {service}: {gamma!r} (log residual {residual:.3e})')

    return gamma

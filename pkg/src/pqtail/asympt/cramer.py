"""
The two-dimensional Cramér system

    φ(γ) = 1,    ∇φ(γ) = η s,    s > 0,

whose root γ fixes the conjectured decay rate ⟨γ, η⟩ of H(nη1, nη2). Geometrically γ is the point of the convex
curve {φ = 1} where the outward normal points along η, i.e. the maximizer of ⟨θ, η⟩ over {φ <= 1}.
"""


from __future__ import annotations

import logging
import math

import numpy as np

from typing import TYPE_CHECKING
from attrs import define, field
from pqtail.asympt.lundberg import positive_root
from pqtail.errors import DomainError, NoCramerRoot, NoLundbergRoot, PreconditionFailed
from pqtail.model import (
    in_domain,
    increment_mgf,
    increment_mgf_gradient,
    increment_mgf_hessian,
    log_increment_mgf
)

if TYPE_CHECKING:
    from typing import Any, Dict, Tuple
    from numpy.typing import NDArray
    from pqtail.model import ParallelQueueModel


log = logging.getLogger(__name__)


CRAMER_TOL = 1e-12

# Roots closer than this to the origin are the trivial solution of φ = 1.
_TRIVIAL_RADIUS = 1e-8
_NEWTON_STEPS = 100
_BACKTRACK_STEPS = 60
_RAY_COUNT = 720


@define(frozen=True)
class CramerRoot:
    """
    A root (γ, s) of the Cramér system for a direction η.

    `eta` is normalized to η1 + η2 = 1 and pairs with `s_normalized`; `eta_raw` is the direction as given and pairs with
    `s`, so that ∇φ(γ) = eta_raw * s = eta * s_normalized. `residuals` holds |φ(γ) - 1| and max_i |∂_i φ(γ) - η_i s|.
    """
    gamma: Tuple[float, float]
    s: float
    eta: Tuple[float, float]
    eta_raw: Tuple[float, float]
    s_normalized: float
    residuals: Tuple[float, float]
    iterations: int = field(default=0, eq=False)

    @property
    def rate(self) -> float:
        """
        ⟨γ, η⟩ with the normalized direction.
        """
        return self.gamma[0] * self.eta[0] + self.gamma[1] * self.eta[1]

    @property
    def rate_raw(self) -> float:
        """
        ⟨γ, η⟩ with the direction as given.
        """
        return self.gamma[0] * self.eta_raw[0] + self.gamma[1] * self.eta_raw[1]

    def to_record(self) -> Dict[str, Any]:
        return {
            'gamma': list(self.gamma),
            's': self.s,
            'eta': list(self.eta),
            'residuals': list(self.residuals),
            'eta_raw': list(self.eta_raw),
            's_normalized': self.s_normalized,
            'rate': self.rate,
            'rate_raw': self.rate_raw
        }


def _system(model: ParallelQueueModel, gamma: NDArray[np.float64], s: float, eta: NDArray[np.float64]) -> NDArray[np.float64]:
    theta = (float(gamma[0]), float(gamma[1]))
    grad = increment_mgf_gradient(model, theta)

    return np.array([increment_mgf(model, theta) - 1.0, grad[0] - eta[0] * s, grad[1] - eta[1] * s])


def _jacobian(model: ParallelQueueModel, gamma: NDArray[np.float64], eta: NDArray[np.float64]) -> NDArray[np.float64]:
    theta = (float(gamma[0]), float(gamma[1]))
    grad = increment_mgf_gradient(model, theta)
    hess = increment_mgf_hessian(model, theta)

    return np.array([
        [grad[0], grad[1], 0.0],
        [hess[0, 0], hess[0, 1], -eta[0]],
        [hess[1, 0], hess[1, 1], -eta[1]]
    ])


def _newton(model: ParallelQueueModel, gamma: NDArray[np.float64], s: float, eta: NDArray[np.float64],
            tol: float) -> Tuple[NDArray[np.float64], float, int]:
    """
    Damped Newton on the system, backtracking out of the generating function domain and whenever s would turn
    nonpositive or the residual would not decrease.

    Raises:
        NoCramerRoot: If a step cannot be taken or the iteration limit is hit.
    """
    residual = _system(model, gamma, s, eta)
    norm = float(np.abs(residual).max())

    for iteration in range(1, _NEWTON_STEPS + 1):
        if norm < tol:
            return gamma, s, iteration - 1

        try:
            step = np.linalg.solve(_jacobian(model, gamma, eta), -residual)
        except np.linalg.LinAlgError as e:
            raise NoCramerRoot(f'Singular Jacobian at γ={gamma.tolist()}', reason='no-convergence') from e

        t = 1.0

        for _ in range(_BACKTRACK_STEPS):
            candidate_gamma = gamma + t * step[:2]
            candidate_s = s + t * step[2]

            if candidate_s > 0.0 and in_domain(model, (float(candidate_gamma[0]), float(candidate_gamma[1]))):
                try:
                    candidate = _system(model, candidate_gamma, candidate_s, eta)
                except DomainError:
                    candidate = None

                if candidate is not None and np.all(np.isfinite(candidate)) \
                        and float(np.abs(candidate).max()) < (1.0 - 1e-4 * t) * norm:
                    break

            t *= 0.5
        else:
            raise NoCramerRoot(f'Line search failed at γ={gamma.tolist()}, s={s!r}, residual {norm:.3e}', reason='no-convergence')

        gamma, s, residual = candidate_gamma, candidate_s, candidate
        norm = float(np.abs(residual).max())

        log.debug(f'Cramér Newton step {iteration}: γ={gamma.tolist()}, s={s!r}, residual {norm:.3e}, damping {t}')

    if norm < tol:
        return gamma, s, _NEWTON_STEPS

    raise NoCramerRoot(f'Newton did not reach {tol:.1e} in {_NEWTON_STEPS} steps (residual {norm:.3e})', reason='no-convergence')


def _lundberg_seed(model: ParallelQueueModel, eta: NDArray[np.float64]) -> Tuple[NDArray[np.float64], float]:
    """
    γ⁰ = (γ1* η1, γ2* η2) / (η1 + η2) from the single-queue exponents, s⁰ = |∇φ(γ⁰)| / |η|.
    """
    from pqtail.asympt.lundberg import lundberg_1d

    g1 = lundberg_1d(model.arrival, model.service1)
    g2 = lundberg_1d(model.arrival, model.service2)
    gamma = np.array([g1 * eta[0], g2 * eta[1]]) / eta.sum()

    return gamma, _seed_multiplier(model, gamma, eta)


def _seed_multiplier(model: ParallelQueueModel, gamma: NDArray[np.float64], eta: NDArray[np.float64]) -> float:
    grad = increment_mgf_gradient(model, (float(gamma[0]), float(gamma[1])))
    return max(float(np.linalg.norm(grad) / np.linalg.norm(eta)), 1e-6)


def _ray_seed(model: ParallelQueueModel, eta: NDArray[np.float64]) -> Tuple[NDArray[np.float64], float]:
    """
    Scan rays from the origin, find where each leaves {φ <= 1}, and keep the exit point that maximizes ⟨θ, η⟩.

    Raises:
        NoCramerRoot: If no ray with ⟨u, η⟩ > 0 leaves the region inside the domain.
    """
    drift = np.array(model.drift())
    best: NDArray[np.float64] | None = None
    best_value = -math.inf

    for angle in np.linspace(-math.pi, math.pi, _RAY_COUNT, endpoint=False):
        u = np.array([math.cos(angle), math.sin(angle)])

        if u @ eta <= 0.0 or u @ drift >= 0.0:
            continue

        def along(r: float, u: NDArray[np.float64] = u) -> float:
            return log_increment_mgf(model, (r * u[0], r * u[1]))

        def inside(r: float, u: NDArray[np.float64] = u) -> bool:
            return in_domain(model, (r * u[0], r * u[1]))

        try:
            r, _ = positive_root(along, None, inside)
        except NoLundbergRoot:
            continue

        if (value := r * float(u @ eta)) > best_value:
            best, best_value = r * u, value

    if best is None:
        raise NoCramerRoot('No ray towards η leaves {φ <= 1} inside the generating function domain', reason='domain-exhausted')

    log.debug(f'Ray-search seed γ={best.tolist()} with ⟨γ, η⟩={best_value!r}')

    return best, _seed_multiplier(model, best, eta)


def _accept(gamma: NDArray[np.float64], s: float, eta: NDArray[np.float64]) -> bool:
    return bool(np.linalg.norm(gamma) > _TRIVIAL_RADIUS and gamma @ eta > 0.0 and s > 0.0)


def solve_cramer(model: ParallelQueueModel, eta: Tuple[float, float], tol: float = CRAMER_TOL) -> CramerRoot:
    """
    Solve φ(γ) = 1, ∇φ(γ) = η s for (γ, s) with s > 0 and ⟨γ, η⟩ > 0.

    Newton starts from the single-queue exponents; if that fails or lands on the trivial root it restarts from a
    ray-search seed.

    Args:
        model (ParallelQueueModel): a stable model with light-tailed arrivals.
        eta (Tuple[float, float]): the direction, both components positive.
        tol (float): max-norm tolerance on the system. (default: 1e-12)

    Returns:
        CramerRoot: the root.

    Raises:
        PreconditionFailed: If a component of η is not positive.
        NoCramerRoot: With reason 'domain-exhausted', 'no-convergence' or 'trivial-root-only'.
    """
    eta_raw = (float(eta[0]), float(eta[1]))

    if not (eta_raw[0] > 0.0 and eta_raw[1] > 0.0):
        raise PreconditionFailed(f'Cramér direction needs η1, η2 > 0, received: {eta_raw}')

    if not model.arrival.light_tailed:
        raise NoCramerRoot(f'{model.arrival} has no finite generating function right of 0', reason='domain-exhausted')

    direction = np.array(eta_raw) / sum(eta_raw)
    found: Tuple[NDArray[np.float64], float, int] | None = None
    trivial = False

    try:
        gamma0, s0 = _lundberg_seed(model, direction)
        found = _newton(model, gamma0, s0, direction, tol)

        if not _accept(found[0], found[1], direction):
            trivial = True
            found = None
    except (NoLundbergRoot, NoCramerRoot, PreconditionFailed) as e:
        log.info(f'Newton from the single-queue seed failed ({e}); restarting from a ray-search seed')

    if found is None:
        gamma0, s0 = _ray_seed(model, direction)

        try:
            found = _newton(model, gamma0, s0, direction, tol)
        except NoCramerRoot:
            if trivial:
                raise NoCramerRoot('Newton only reached the trivial root', reason='trivial-root-only')
            raise

        if not _accept(found[0], found[1], direction):
            raise NoCramerRoot(f'Newton only reached the trivial root γ={found[0].tolist()}', reason='trivial-root-only')

    gamma, s_normalized, iterations = found
    theta = (float(gamma[0]), float(gamma[1]))
    grad = increment_mgf_gradient(model, theta)
    residuals = (
        abs(increment_mgf(model, theta) - 1.0),
        float(np.abs(grad - direction * s_normalized).max())
    )

    root = CramerRoot(
        gamma=theta,
        s=s_normalized / sum(eta_raw),
        eta=(float(direction[0]), float(direction[1])),
        eta_raw=eta_raw,
        s_normalized=s_normalized,
        residuals=residuals,
        iterations=iterations
    )

    log.debug(f'Cramér root for η={eta_raw}: γ={root.gamma}, s={root.s!r}, residuals {residuals}')

    return root

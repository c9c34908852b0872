"""
First-passage estimators of H(x, y): the probability that the walk W_n = (𝒜_n - 𝒮^1_n, 𝒜_n - 𝒮^2_n) ever enters
{w1 > x, w2 > y}.

- `first_passage_prob` stops a failing path once the single-queue Lundberg bounds certify that the remaining chance
  of success is below eps_stop.
- `first_passage_tilted` samples under the exponential tilt at the Cramér root and weights successes by the
  likelihood ratio.
- `heavy_first_passage` runs to a horizon cap and charges a single-big-jump remainder for unfinished paths.
"""


from __future__ import annotations

import logging
import math

import numpy as np

from typing import TYPE_CHECKING
from functools import partial
from time import perf_counter
from pqtail.asympt.cramer import solve_cramer
from pqtail.asympt.heavy import big_jump_bound
from pqtail.asympt.lundberg import lundberg_1d
from pqtail.dist import Rng
from pqtail.errors import PreconditionFailed
from pqtail.mc._pool import run_replications
from pqtail.mc.estimate import Estimate
from pqtail.model import ParallelQueueModel, walk_path

if TYPE_CHECKING:
    from typing import List, Tuple
    from numpy.typing import NDArray


log = logging.getLogger(__name__)


PASSAGE_CHUNK = 256
HEAVY_CHUNK = 4096

DEFAULT_STEP_CAP = 10 ** 6
DEFAULT_HORIZON_CAP = 10 ** 6

# Unfinished heavy-tail paths are charged this multiple of the big-jump bound.
HEAVY_SAFETY_FACTOR = 2.0


def _first_entry(w1: NDArray[np.int64], w2: NDArray[np.int64], x: int, y: int) -> int:
    """
    Index of the first position inside {w1 > x, w2 > y}, or -1.
    """
    inside = np.flatnonzero((w1 > x) & (w2 > y))
    return int(inside[0]) if inside.size else -1


def _check_walk_identity(w1: NDArray[np.int64], w2: NDArray[np.int64], s1_total: NDArray[np.int64],
                         s2_total: NDArray[np.int64]) -> None:
    # Common arrivals cancel in the difference of the coordinates.
    if not np.array_equal(w1 - w2, s2_total - s1_total):
        raise AssertionError('Walk identity w1 - w2 = S2 - S1 violated')


def _plain_replication(model: ParallelQueueModel, x: int, y: int, gammas: Tuple[float, float], log_stop: float,
                       seed: int, stream_id: int) -> int:
    """
    One path of the untilted walk: 1 on entry into the quadrant, 0 once max(γ1 (x - w1), γ2 (y - w2)) > log(1/eps_stop).
    """
    rng = Rng(seed, stream_id)
    g1, g2 = gammas
    debug = log.isEnabledFor(logging.DEBUG)
    w1 = w2 = 0
    s1_sum = s2_sum = 0

    if max(g1 * x, g2 * y) > log_stop:
        return 0

    while True:
        a, s1, s2 = model.sample_steps(rng, PASSAGE_CHUNK)
        p1, p2 = walk_path(a, s1, s2, start=(w1, w2))

        if debug:
            _check_walk_identity(p1, p2, s1_sum + np.cumsum(s1), s2_sum + np.cumsum(s2))
            s1_sum += int(s1.sum())
            s2_sum += int(s2.sum())

        entry = _first_entry(p1, p2, x, y)
        stopped = np.flatnonzero(np.maximum(g1 * (x - p1), g2 * (y - p2)) > log_stop)
        stop = int(stopped[0]) if stopped.size else -1

        if entry >= 0 and (stop < 0 or entry < stop):
            return 1

        if stop >= 0:
            return 0

        w1, w2 = int(p1[-1]), int(p2[-1])


def first_passage_prob(model: ParallelQueueModel, x: int, y: int, reps: int, seed: int, eps_stop: float = 1e-9,
                       threads: int = 1) -> Estimate:
    """
    Plain first-passage estimate with certified early stopping.

    A path is stopped as a failure once min(e^{-γ1* (x - w1)}, e^{-γ2* (y - w2)}) < eps_stop; entering the quadrant
    needs crossing both half-planes, so this bounds its remaining success probability. Each stopped path may thus be
    off by at most eps_stop, which is the bias budget.

    Args:
        model (ParallelQueueModel): a stable model, light-tailed in both single-queue projections.
        x (int): level of queue 1.
        y (int): level of queue 2.
        reps (int): number of paths.
        seed (int): the seed; path r uses stream r.
        eps_stop (float): certified stopping threshold. (default: 1e-9)
        threads (int): worker processes. (default: 1)

    Returns:
        Estimate: the success fraction with its binomial standard error.

    Raises:
        NoLundbergRoot: If a single-queue projection has no Lundberg exponent.
    """
    if not eps_stop > 0.0:
        raise PreconditionFailed(f'First-passage simulation needs eps_stop > 0, received: {eps_stop}')

    _start = perf_counter()

    gammas = (lundberg_1d(model.arrival, model.service1), lundberg_1d(model.arrival, model.service2))
    task = partial(_plain_replication, model, x, y, gammas, math.log(1.0 / eps_stop), seed)
    hits: List[int] = run_replications(task, reps, threads, title='pqtail-passage-mc')

    failures = reps - sum(hits)
    wall_time = perf_counter() - _start
    log.info(f'First passage at ({x}, {y}): {sum(hits)}/{reps} entries in {wall_time:.2f}s')

    estimate = Estimate.from_samples(hits, bias_budget=eps_stop * failures / reps, seed=seed, wall_time=wall_time)
    p = estimate.value

    # Binomial standard error of the success fraction.
    return Estimate(
        value=p,
        stderr=math.sqrt(p * (1.0 - p) / reps),
        reps=reps,
        bias_budget=estimate.bias_budget,
        meta=estimate.meta
    )


def tilted_model(model: ParallelQueueModel, gamma: Tuple[float, float]) -> Tuple[ParallelQueueModel, float]:
    """
    The step law reweighted by e^{γ1 (a - s1) + γ2 (a - s2)}. It factorizes: A tilted by γ1 + γ2, S^i tilted by -γ_i.

    Args:
        model (ParallelQueueModel): the model.
        gamma (Tuple[float, float]): the tilt.

    Returns:
        Tuple[ParallelQueueModel, float]: the tilted model (drifting into the quadrant at a Cramér root, so not
            stable) and the normalization φ(γ), which is 1 at a root.
    """
    g1, g2 = gamma
    tilted = ParallelQueueModel(
        model.arrival.tilt(g1 + g2),
        model.service1.tilt(-g1),
        model.service2.tilt(-g2),
        validate=False
    )
    normalization = model.arrival.mgf(g1 + g2) * model.service1.mgf(-g1) * model.service2.mgf(-g2)

    return tilted, normalization


def _tilted_replication(tilted: ParallelQueueModel, x: int, y: int, gamma: Tuple[float, float], log_phi: float,
                        step_cap: int, seed: int, stream_id: int) -> Tuple[float, bool]:
    """
    One path under the tilted law: (likelihood ratio at entry, False), or (0, True) when the step cap is hit first.
    """
    rng = Rng(seed, stream_id)
    w1 = w2 = 0
    steps = 0

    while steps < step_cap:
        size = min(PASSAGE_CHUNK, step_cap - steps)
        a, s1, s2 = tilted.sample_steps(rng, size)
        p1, p2 = walk_path(a, s1, s2, start=(w1, w2))
        entry = _first_entry(p1, p2, x, y)

        if entry >= 0:
            tau = steps + entry + 1
            # Per step the original and tilted pmfs differ by φ(γ) e^{-⟨γ, step⟩}.
            return math.exp(tau * log_phi - gamma[0] * int(p1[entry]) - gamma[1] * int(p2[entry])), False

        steps += size
        w1, w2 = int(p1[-1]), int(p2[-1])

    return 0.0, True


def first_passage_tilted(model: ParallelQueueModel, x: int, y: int, eta: Tuple[float, float], reps: int, seed: int,
                         step_cap: int = DEFAULT_STEP_CAP, threads: int = 1) -> Estimate:
    """
    Importance-sampling estimate under the exponential tilt at the Cramér root for direction η.

    Under the tilt the walk drifts along η s into the quadrant, so almost every path enters; the estimate is the mean
    likelihood ratio φ(γ)^τ e^{-⟨γ, W_τ⟩}. Paths that reach `step_cap` first count as 0, and each adds the largest
    weight it could have carried to the bias budget.

    Unlike `first_passage_prob` this takes no `eps_stop`. The tilted walk drifts into the quadrant, so there is no
    escape certificate to stop on; a hard step cap plays that role, and its cost is reported in `bias_budget` for the
    caller to hold against its own tolerance.

    Args:
        model (ParallelQueueModel): a stable model with light-tailed arrivals.
        x (int): level of queue 1.
        y (int): level of queue 2.
        eta (Tuple[float, float]): direction for the Cramér root, roughly (x, y).
        reps (int): number of paths.
        seed (int): the seed; path r uses stream r.
        step_cap (int): steps after which a path is abandoned. (default: 10^6)
        threads (int): worker processes. (default: 1)

    Returns:
        Estimate: the estimate; `meta` also records the root and the largest weight.

    Raises:
        NoCramerRoot: If the Cramér system has no usable root.
    """
    _start = perf_counter()

    root = solve_cramer(model, eta)
    tilted, normalization = tilted_model(model, root.gamma)

    if abs(normalization - 1.0) > 1e-10:
        log.warning(f'Tilted step law normalization {normalization!r} differs from 1 by more than 1e-10')

    task = partial(_tilted_replication, tilted, x, y, root.gamma, math.log(normalization), step_cap, seed)
    results: List[Tuple[float, bool]] = run_replications(task, reps, threads, title='pqtail-tilted-mc')

    weights = [w for w, _ in results]
    capped = sum(1 for _, c in results if c)
    g1, g2 = root.gamma

    if capped == 0:
        bias = 0.0
    elif g1 >= 0.0 and g2 >= 0.0:
        # Entry means W_τ >= (x + 1, y + 1), so no weight can exceed this.
        bias = capped / reps * math.exp(-g1 * (x + 1) - g2 * (y + 1))
    else:
        log.warning(f'{capped} tilted paths hit the step cap and γ={root.gamma} has a negative component; their weight is unbounded')
        bias = math.inf

    if capped:
        log.warning(f'{capped}/{reps} tilted paths hit the step cap of {step_cap}')

    wall_time = perf_counter() - _start
    log.info(f'Tilted first passage at ({x}, {y}): {reps} paths in {wall_time:.2f}s')

    return Estimate.from_samples(
        weights,
        bias_budget=bias,
        seed=seed,
        wall_time=wall_time,
        gamma=list(root.gamma),
        max_weight=max(weights),
        normalization=normalization
    )


def _heavy_replication(model: ParallelQueueModel, x: int, y: int, drifts: Tuple[float, float], horizon_cap: int,
                       eps_stop: float | None, seed: int, stream_id: int) -> Tuple[int, float]:
    """
    One path of the untilted walk up to `horizon_cap` steps: (1, 0) on entry, else (0, charged remainder).
    """
    rng = Rng(seed, stream_id)
    w1 = w2 = 0
    steps = 0

    while steps < horizon_cap:
        size = min(HEAVY_CHUNK, horizon_cap - steps)
        a, s1, s2 = model.sample_steps(rng, size)
        p1, p2 = walk_path(a, s1, s2, start=(w1, w2))

        if _first_entry(p1, p2, x, y) >= 0:
            return 1, 0.0

        steps += size
        w1, w2 = int(p1[-1]), int(p2[-1])

        if eps_stop is not None and steps < horizon_cap:
            remainder = HEAVY_SAFETY_FACTOR * big_jump_bound(model.arrival, (x - w1, y - w2), drifts)

            if remainder < eps_stop:
                return 0, remainder

    return 0, min(1.0, HEAVY_SAFETY_FACTOR * big_jump_bound(model.arrival, (x - w1, y - w2), drifts))


def heavy_first_passage(model: ParallelQueueModel, x: int, y: int, reps: int, horizon_cap: int, seed: int,
                        eps_stop: float | None = None, threads: int = 1) -> Estimate:
    """
    Bounded-horizon first-passage estimate for heavy-tailed arrivals, where no Lundberg certificate exists.

    A path still outside the quadrant at the cap (or, with `eps_stop`, earlier once its remainder is below eps_stop)
    counts as a failure and is charged twice the single-big-jump bound from its position, with the walk's own drift
    E S^i - E A as centering. This remainder is a heuristic, not a certificate.

    Args:
        model (ParallelQueueModel): a stable model whose services are at least 1.
        x (int): level of queue 1.
        y (int): level of queue 2.
        reps (int): number of paths.
        horizon_cap (int): steps per path.
        seed (int): the seed; path r uses stream r.
        eps_stop (float | None): heuristic early stop; ignored for light-tailed arrivals. (default: None)
        threads (int): worker processes. (default: 1)

    Returns:
        Estimate: the success fraction; the bias budget is the mean charged remainder.

    Raises:
        PreconditionFailed: If P(S^i = 0) > 0 for a service.
    """
    for i, service in enumerate((model.service1, model.service2), start=1):
        if service.pmf(0) > 0.0:
            raise PreconditionFailed(f'Heavy first passage needs S{i} >= 1, but P(S{i} = 0) = {service.pmf(0)!r}')

    if horizon_cap <= 0:
        raise PreconditionFailed(f'Heavy first passage needs horizon_cap > 0, received: {horizon_cap}')

    if eps_stop is not None and model.arrival.light_tailed:
        log.warning('Heuristic early stop only applies to heavy-tailed arrivals; running every path to the horizon cap')
        eps_stop = None

    _start = perf_counter()

    ea = model.arrival.mean()
    drifts = (model.service1.mean() - ea, model.service2.mean() - ea)
    task = partial(_heavy_replication, model, x, y, drifts, horizon_cap, eps_stop, seed)
    results: List[Tuple[int, float]] = run_replications(task, reps, threads, title='pqtail-heavy-mc')

    hits = [h for h, _ in results]
    charged = np.array([r for _, r in results], dtype=np.float64)
    wall_time = perf_counter() - _start

    log.info(f'Heavy first passage at ({x}, {y}): {sum(hits)}/{reps} entries in {wall_time:.2f}s')

    estimate = Estimate.from_samples(hits, bias_budget=float(charged.sum() / reps), seed=seed, wall_time=wall_time)
    p = estimate.value

    return Estimate(
        value=p,
        stderr=math.sqrt(p * (1.0 - p) / reps),
        reps=reps,
        bias_budget=estimate.bias_budget,
        meta=estimate.meta
    )

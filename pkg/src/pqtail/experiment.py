"""
Run a configured experiment: solve, simulate and evaluate the asymptotics a subcommand asks for, cross-check every
pair of estimates and write the report files.
"""


from __future__ import annotations

import logging
import math

from typing import TYPE_CHECKING, Tuple
from itertools import combinations
from pathlib import Path
from time import perf_counter
from attrs import define
from setproctitle import setproctitle
from pqtail.asympt import CENTERINGS, extract_rate, heavy_series, prefactor_warning, solve_cramer
from pqtail.config.v1alpha1 import ESTIMATORS
from pqtail.dist import strong_subexp_diagnostic
from pqtail.exact import (
    H_from_grid,
    balance_residual,
    default_truncation,
    stationary,
    write_grid_csv,
    write_snapshot
)
from pqtail.mc import (
    ESTIMATE_CSV_HEADER,
    Estimate,
    first_passage_prob,
    first_passage_tilted,
    heavy_first_passage,
    simulate_queue_tail
)
from pqtail.model import check_stability
from pqtail.utils import ensure_dir, write_csv, write_json

if TYPE_CHECKING:
    from typing import Any, Dict, List
    from pqtail.asympt import CramerRoot, RateFit
    from pqtail.config.v1alpha1 import Config
    from pqtail.exact import TruncatedGrid
    from pqtail.model import ParallelQueueModel


log = logging.getLogger(__name__)


SUBCOMMANDS = ('exact', 'simulate', 'cramer', 'heavy', 'compare')

MC_ESTIMATORS = ('queue-mc', 'first-passage', 'tilted', 'heavy-mc')

RATE_FIT_TOLERANCE = 0.10

HEAVY_RATIO_BAND = (0.5, 2.0)

DIAGNOSTIC_N_MAX = 1000

NOTES = [
    'phi(g) is the moment generating function of one walk increment, E exp(g1 (A - S1) + g2 (A - S2)).',
    'In the heavy-tail series, E S_1 and E S_2 are the means of the two service laws.',
    'Direction levels are (floor(n eta1), floor(n eta2)); the fitted rate is compared with <gamma, eta> for eta as given.'
]


Point = Tuple[int, int]


@define(frozen=True)
class Verdict:
    """
    One PASS/FAIL cross-check.
    """
    check: str
    subject: str
    passed: bool
    detail: Dict[str, Any]

    def to_record(self) -> Dict[str, Any]:
        return {
            'check': self.check,
            'subject': self.subject,
            'verdict': 'PASS' if self.passed else 'FAIL',
            **self.detail
        }


def select(command: str, config: Config) -> Tuple[List[str], List[str]]:
    """
    The estimators and asymptotics a subcommand runs, in canonical order.

    `compare` runs everything configured; `simulate` runs the configured Monte Carlo estimators (queue-mc when none
    is configured) with the exact solver as oracle when it is configured; `cramer` and `heavy` pair their asymptotics
    with the estimator they are checked against.
    """
    estimators = set(config.experiment.estimators)
    asymptotics = set(config.experiment.asymptotics)

    match command:
        case 'exact':
            estimators, asymptotics = {'exact'}, set()
        case 'simulate':
            mc = estimators & set(MC_ESTIMATORS) or {'queue-mc'}
            estimators, asymptotics = mc | (estimators & {'exact'}), set()
        case 'cramer':
            estimators, asymptotics = {'exact'}, {'cramer'}
        case 'heavy':
            estimators, asymptotics = {'heavy-mc'}, {'heavy-series'}
        case 'compare':
            pass
        case _:
            raise ValueError(f'Unknown subcommand: {command}')

    return [e for e in ESTIMATORS if e in estimators], [a for a in ('cramer', 'heavy-series') if a in asymptotics]


def grid_size(model: ParallelQueueModel, config: Config, points: List[Point]) -> Tuple[int, int]:
    """
    The Lundberg-based truncation (or the configured override), grown so every level sits well inside the grid.
    """
    N1, N2 = default_truncation(model)
    N1 = config.exact.n1 or N1
    N2 = config.exact.n2 or N2

    return max(N1, 2 * max(x for x, _ in points) + 2), max(N2, 2 * max(y for _, y in points) + 2)


def tilt_direction(point: Point, config: Config) -> Tuple[float, float]:
    """
    The direction whose Cramér root tilts the walk towards (x, y).
    """
    x, y = point

    if x > 0 and y > 0:
        return float(x), float(y)

    if config.experiment.direction is not None:
        return tuple(config.experiment.direction.eta)  # type: ignore[return-value]

    return 1.0, 1.0


def run_exact(model: ParallelQueueModel, config: Config, points: List[Point]) -> Tuple[TruncatedGrid, Dict[Point, Estimate], Dict[str, Any]]:
    """
    Solve the truncated balance equations and read H off the grid at every point.
    """
    N1, N2 = grid_size(model, config, points)

    log.info(f'Solving the {N1}x{N2} grid')

    grid = stationary(model, N1, N2, tol=config.exact.tol, max_iter=config.exact.maxIter, eps_trunc=config.exact.epsTrunc)

    # Exact values have no sampling error; the truncation deficit is their only bias.
    estimates = {
        (x, y): Estimate(value=H_from_grid(grid, x, y), stderr=0.0, reps=0, bias_budget=grid.deficit) for x, y in points
    }

    stats = {
        'N1': grid.N1,
        'N2': grid.N2,
        'deficit': grid.deficit,
        'iterations': grid.iterations,
        'residual': grid.residual,
        'balance_residual': balance_residual(grid, model)
    }

    return grid, estimates, stats


def run_estimator(estimator: str, model: ParallelQueueModel, config: Config, points: List[Point],
                  threads: int) -> Dict[Point, Estimate]:
    """
    Run one Monte Carlo estimator at every point.
    """
    sim = config.simulation

    match estimator:
        case 'queue-mc':
            return simulate_queue_tail(model, points, sim.horizon, sim.burnin, sim.reps, sim.seed, threads=threads)
        case 'first-passage':
            return {
                (x, y): first_passage_prob(model, x, y, sim.passageReps, sim.seed, eps_stop=sim.epsStop, threads=threads)
                for x, y in points
            }
        case 'tilted':
            return {
                (x, y): first_passage_tilted(model, x, y, tilt_direction((x, y), config), sim.passageReps, sim.seed,
                                             step_cap=sim.stepCap, threads=threads)
                for x, y in points
            }
        case 'heavy-mc':
            return {
                (x, y): heavy_first_passage(model, x, y, sim.heavyReps, sim.heavyHorizonCap, sim.seed,
                                            eps_stop=sim.heavyEpsStop, threads=threads)
                for x, y in points
            }
        case _:
            raise ValueError(f'Unknown estimator: {estimator}')


def agreement_verdicts(points: List[Point], estimates: Dict[str, Dict[Point, Estimate]]) -> List[Verdict]:
    """
    PASS/FAIL for every pair of estimators at every point, at 3 sigma plus both bias budgets.
    """
    verdicts = []

    for x, y in points:
        for first, second in combinations(estimates, 2):
            a, b = estimates[first][(x, y)], estimates[second][(x, y)]
            verdicts.append(
                Verdict(
                    check='agreement',
                    subject=f'{first} vs {second}',
                    passed=a.agrees_with(b),
                    detail={'x': x, 'y': y, 'difference': abs(a.value - b.value)}
                )
            )

    return verdicts


def run_rate_fit(root: CramerRoot, config: Config, exact: Dict[Point, Estimate]) -> Tuple[RateFit, Verdict] | None:
    """
    Fit log H(n) along the configured direction and compare the rate with ⟨γ, η⟩.
    """
    direction = config.experiment.direction

    if direction is None:
        log.warning('No direction configured; skipping the rate fit')
        return None

    samples = [(float(n), exact[point].value) for n, point in zip(direction.nValues, direction.points())]
    samples = [(n, h) for n, h in samples if h > 0.0]

    if len(samples) < 5:
        log.warning(f'Rate fit needs 5 positive exact values along the direction, found {len(samples)}; skipping')
        return None

    fit = extract_rate(samples)
    error = abs(fit.rate - root.rate_raw) / root.rate_raw

    verdict = Verdict(
        check='rate-fit',
        subject=f'eta={list(direction.eta)}',
        passed=error < RATE_FIT_TOLERANCE,
        detail={
            'rate': fit.rate,
            'predicted': root.rate_raw,
            'relative_error': error,
            'prefactor_warning': prefactor_warning(fit)
        }
    )

    return fit, verdict


def series_targets(config: Config, points: List[Point]) -> List[Tuple[int, Tuple[float, float], Point]]:
    """
    (n, η, level) triples: the direction's, or else n = 1 with η = (x, y) for every point inside the open quadrant.
    """
    direction = config.experiment.direction

    if direction is not None:
        eta = (float(direction.eta[0]), float(direction.eta[1]))
        return [(n, eta, point) for n, point in zip(direction.nValues, direction.points())]

    return [(1, (float(x), float(y)), (x, y)) for x, y in points if x > 0 and y > 0]


def run_heavy_series(model: ParallelQueueModel, config: Config, points: List[Point],
                     heavy_mc: Dict[Point, Estimate] | None) -> Tuple[List[Dict[str, Any]], List[Verdict]]:
    """
    Evaluate the single-big-jump series under both centerings and compare the configured one with heavy-mc.
    """
    records, verdicts = [], []

    for n, eta, point in series_targets(config, points):
        series = {c: heavy_series(model, eta, n, rel_tol=config.heavy.relTol, centering=c) for c in CENTERINGS}
        records.append({
            'n': n,
            'eta': list(eta),
            'point': list(point),
            **{c: s.to_record() for c, s in series.items()}
        })

        primary = series[config.heavy.centering]

        if heavy_mc is None or point not in heavy_mc or primary.value == 0.0:
            continue

        ratio = heavy_mc[point].value / primary.value

        verdicts.append(
            Verdict(
                check='heavy-ratio',
                subject=f'n={n}',
                passed=HEAVY_RATIO_BAND[0] <= ratio <= HEAVY_RATIO_BAND[1],
                detail={'x': point[0], 'y': point[1], 'ratio': ratio, 'centering': config.heavy.centering}
            )
        )

    return records, verdicts


def run(config: Config, command: str, out_dir: str | Path, threads: int = 1) -> int:
    """
    Run an experiment and write estimates.csv, summary.json and, with the exact solver, grid.pqgrid and grid.csv.

    Args:
        config (Config): the parsed experiment config.
        command (str): the subcommand, one of SUBCOMMANDS.
        out_dir (str | Path): report directory, created if missing.
        threads (int): Monte Carlo worker processes; never changes a result. (default: 1)

    Returns:
        int: 0 if every verdict passed, 1 otherwise.

    Raises:
        ConfigError: If the model is invalid or unstable.
        PqtailError: Whatever a solver or estimator raises, unchanged.
    """
    _start = perf_counter()

    setproctitle(f'pqtail {command}')

    model = config.experiment.build_model()
    stability = check_stability(model)
    points = config.experiment.all_points()
    estimators, asymptotics = select(command, config)

    log.info(f'Running {command} for {config.experiment.name}: estimators {estimators}, asymptotics {asymptotics}, '
             f'{len(points)} points; {stability}')

    out = ensure_dir(out_dir)
    estimates: Dict[str, Dict[Point, Estimate]] = {}
    summary: Dict[str, Any] = {}
    verdicts: List[Verdict] = []

    if 'exact' in estimators:
        grid, estimates['exact'], summary['exact'] = run_exact(model, config, points)
        write_snapshot(grid, out / 'grid.pqgrid')
        write_grid_csv(grid, out / 'grid.csv')

    for estimator in estimators:
        if estimator != 'exact':
            log.info(f'Running {estimator}')
            estimates[estimator] = run_estimator(estimator, model, config, points, threads)

    verdicts += agreement_verdicts(points, estimates)

    if 'cramer' in asymptotics:
        direction = config.experiment.direction
        eta = (float(direction.eta[0]), float(direction.eta[1])) if direction is not None else (1.0, 1.0)
        root = solve_cramer(model, eta)
        summary['cramer'] = root.to_record()

        if 'exact' in estimates and (result := run_rate_fit(root, config, estimates['exact'])) is not None:
            fit, verdict = result
            summary['rate_fit'] = {**fit.to_record(), **verdict.detail}
            verdicts.append(verdict)

    if 'heavy-series' in asymptotics:
        summary['heavy_series'], heavy_verdicts = run_heavy_series(model, config, points, estimates.get('heavy-mc'))
        summary['arrival_diagnostic'] = strong_subexp_diagnostic(model.arrival, DIAGNOSTIC_N_MAX).summary()
        verdicts += heavy_verdicts

    rows = [est[point].csv_row(point[0], point[1], name) for point in points for name, est in estimates.items()]
    write_csv(ESTIMATE_CSV_HEADER, rows, out / 'estimates.csv')

    passed = all(v.passed for v in verdicts)

    resolved = config.to_dict()
    resolved['experiment'].pop('outDir', None)

    write_json(
        {
            'command': command,
            'config': resolved,
            'model': model.to_record(),
            'stability': {'stable': stability.stable, 'means': list(stability.means)},
            'points': [list(p) for p in points],
            'estimators': estimators,
            'asymptotics': asymptotics,
            **summary,
            'estimates': [
                {'x': x, 'y': y, 'estimator': name, **est[(x, y)].to_record()}
                for x, y in points for name, est in estimates.items()
            ],
            'verdicts': [v.to_record() for v in verdicts],
            'passed': passed,
            'notes': NOTES
        },
        out / 'summary.json'
    )

    failed = [v for v in verdicts if not v.passed]

    for v in failed:
        log.warning(f'FAIL {v.check} {v.subject}: {v.detail}')

    log.info(f'{len(verdicts) - len(failed)}/{len(verdicts)} verdicts passed; reports in {out} '
             f'({perf_counter() - _start:.1f}s)')

    if not math.isfinite(sum(e.bias_budget for est in estimates.values() for e in est.values())):
        log.warning('Some estimate has an unbounded bias budget; its agreement verdicts always pass')

    return 0 if passed else 1

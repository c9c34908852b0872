"""
Parse v1alpha1 experiment configuration files into a Config object with attrs and cattrs.
"""


from __future__ import annotations

import logging
import os

from attrs import define, field
from attr import ib
from cattrs import structure, unstructure
from cattrs.errors import BaseValidationError
from pqtail.dist import Bernoulli, DiscretePareto, Geometric
from pqtail.errors import ConfigError
from pqtail.model import ParallelQueueModel

# In this particular module, cattrs requires these types during runtime to unpack,
# so we skip the TYPE_CHECKING check wrapping these imports.
from typing import Any, Dict, List, Tuple


log = logging.getLogger(__name__)


ESTIMATORS = ('exact', 'queue-mc', 'first-passage', 'tilted', 'heavy-mc')

ASYMPTOTICS = ('cramer', 'heavy-series')

CENTERINGS = ('service-mean', 'net-drift')


# Named problem cases. Parameter values satisfy the stability condition of their case.
PRESETS: Dict[str, Dict[str, Dict[str, Any]]] = {
    'bernoulli-case': {
        'arrival': {'kind': 'bernoulli', 'p': 0.3},
        'service1': {'kind': 'bernoulli', 'p': 0.5},
        'service2': {'kind': 'bernoulli', 'p': 0.6}
    },
    'geometric-case': {
        'arrival': {'kind': 'geometric', 'alpha': 0.5},
        'service1': {'kind': 'geometric', 'alpha': 0.25},
        'service2': {'kind': 'geometric', 'alpha': 0.3}
    },
    'heavy-case': {
        'arrival': {'kind': 'pareto', 'delta': 2.5},
        'service1': {'kind': 'deterministic', 'value': 2},
        'service2': {'kind': 'deterministic', 'value': 3}
    }
}


def check_case(preset: str, model: ParallelQueueModel) -> None:
    """
    Check that a model belongs to the family of a named case and meets that case's condition.

    Args:
        preset (str): the case name.
        model (ParallelQueueModel): the model.

    Raises:
        ConfigError: If the model does not fit the case.
    """
    arrival, service1, service2 = model.arrival, model.service1, model.service2

    match preset:
        case 'bernoulli-case':
            if not all(isinstance(d, Bernoulli) for d in (arrival, service1, service2)):
                raise ConfigError('bernoulli-case needs Bernoulli arrivals and services')

            if not arrival.p < min(service1.p, service2.p):
                raise ConfigError(
                    f'bernoulli-case needs P(A=1) < min(P(S1=1), P(S2=1)), received {arrival.p} and '
                    f'{service1.p}, {service2.p}'
                )
        case 'geometric-case':
            if not all(isinstance(d, Geometric) for d in (arrival, service1, service2)):
                raise ConfigError('geometric-case needs geometric arrivals and services')

            ratios = [(1.0 - d.alpha) / d.alpha for d in (arrival, service1, service2)]

            if not ratios[0] < min(ratios[1], ratios[2]):
                raise ConfigError(
                    f'geometric-case needs (1 - a)/a < min((1 - b_i)/b_i), received {ratios[0]!r} and '
                    f'{ratios[1]!r}, {ratios[2]!r}'
                )
        case 'heavy-case':
            if not isinstance(arrival, DiscretePareto):
                raise ConfigError('heavy-case needs discrete Pareto arrivals')

            if service1.pmf(0) > 0 or service2.pmf(0) > 0:
                raise ConfigError('heavy-case needs services that are at least 1 in every slot')
        case _:
            raise ConfigError(f'Unknown preset: {preset}')


@define
class Direction:
    """
    A ray of levels (floor(n eta1), floor(n eta2)) for n in nValues.
    """
    eta: Tuple[float, float]
    nValues: List[int]

    def points(self) -> List[Tuple[int, int]]:
        # Q is integer-valued, so Q > n eta holds iff Q > floor(n eta).
        return [(int(n * self.eta[0] // 1), int(n * self.eta[1] // 1)) for n in self.nValues]


@define
class Experiment:
    """
    What to compute: the model, the levels and the estimators and asymptotics to run.
    """
    name: str
    estimators: List[str] = ib(factory=list)
    asymptotics: List[str] = ib(factory=list)
    points: List[Tuple[int, int]] = ib(factory=list)
    preset: str | None = ib(default=None)
    model: Dict[str, Dict[str, Any]] | None = ib(default=None)
    direction: Direction | None = ib(default=None)
    outDir: str | None = ib(default=None)

    def __attrs_post_init__(self):
        """
        Post-initialization method to expand environment variables.
        """
        self.expand()

    def expand(self):
        """
        Expand environment variables in the output directory.
        """
        if self.outDir is not None:
            self.outDir = os.path.expandvars(self.outDir)

    def model_record(self) -> Dict[str, Any]:
        """
        The model record: the explicit model if given, otherwise the preset's.
        """
        if self.model is not None:
            return self.model

        if self.preset is None:
            raise ConfigError('An experiment needs a preset or a model')

        if self.preset not in PRESETS:
            raise ConfigError(f'Unknown preset: {self.preset}')

        return PRESETS[self.preset]

    def build_model(self) -> ParallelQueueModel:
        """
        Build and check the model.

        Returns:
            ParallelQueueModel: a stable model.

        Raises:
            ConfigError: If the model record is invalid, unstable, or does not fit the named preset.
        """
        model = ParallelQueueModel.from_record(self.model_record())

        if self.preset is not None:
            check_case(self.preset, model)

        return model

    def all_points(self) -> List[Tuple[int, int]]:
        """
        The explicit points followed by the direction points, without repeats.
        """
        levels = [(int(x), int(y)) for x, y in self.points]

        if self.direction is not None:
            levels += self.direction.points()

        return list(dict.fromkeys(levels))


@define
class Exact:
    """
    Truncated grid solver options. n1 and n2 override the Lundberg-based truncation.
    """
    tol: float = 1e-12
    maxIter: int = 200_000
    epsTrunc: float = 1e-9
    n1: int | None = ib(default=None)
    n2: int | None = ib(default=None)


@define
class Simulation:
    """
    Monte Carlo options.
    """
    seed: int = 0
    reps: int = 32
    horizon: int = 1_000_000
    burnin: int = 10_000
    passageReps: int = 10_000
    epsStop: float = 1e-9
    stepCap: int = 1_000_000
    heavyReps: int = 100_000
    heavyHorizonCap: int = 1_000_000
    heavyEpsStop: float | None = ib(default=None)


@define
class Heavy:
    """
    Single-big-jump series options.
    """
    relTol: float = 1e-6
    centering: str = 'service-mean'


@define
class Config:
    """
    Parse config files of version v1alpha1.
    """
    version: str
    experiment: Experiment
    exact: Exact = field(factory=Exact)
    simulation: Simulation = field(factory=Simulation)
    heavy: Heavy = field(factory=Heavy)

    @classmethod
    def from_dict(cls, config: dict) -> Config:
        """
        Create a Config object from a dictionary and check it.

        Args:
            config (dict): The config dictionary.

        Returns:
            Config: The Config object.

        Raises:
            ConfigError: If the dictionary does not structure or the experiment it describes is invalid.
        """
        try:
            _config = structure(
                config,
                cls
            )
        except (BaseValidationError, TypeError, ValueError) as e:
            raise ConfigError(f'Could not structure config: {e}') from e

        _config.check()

        return _config

    def to_dict(self) -> Dict[str, Any]:
        return unstructure(self)

    def check(self) -> None:
        """
        Checks that need more than one field.

        Raises:
            ConfigError: On the first problem found.
        """
        experiment = self.experiment

        if unknown := set(experiment.estimators) - set(ESTIMATORS):
            raise ConfigError(f'Unknown estimators: {sorted(unknown)}')

        if unknown := set(experiment.asymptotics) - set(ASYMPTOTICS):
            raise ConfigError(f'Unknown asymptotics: {sorted(unknown)}')

        if self.heavy.centering not in CENTERINGS:
            raise ConfigError(f'Unknown centering: {self.heavy.centering}')

        if experiment.direction is not None and not min(experiment.direction.eta) > 0:
            raise ConfigError(f'A direction needs eta1, eta2 > 0, received {experiment.direction.eta}')

        if not experiment.all_points():
            raise ConfigError('An experiment needs at least one point or a direction')

        if any(x < 0 or y < 0 for x, y in experiment.all_points()):
            raise ConfigError('Levels must be nonnegative')

        if not self.exact.tol > 0 or not self.exact.epsTrunc > 0 or not self.heavy.relTol > 0:
            raise ConfigError(f'Tolerances must be positive, received exact.tol={self.exact.tol}, '
                              f'exact.epsTrunc={self.exact.epsTrunc}, heavy.relTol={self.heavy.relTol}')

        if not 0 <= self.simulation.burnin < self.simulation.horizon:
            raise ConfigError(
                f'Need 0 <= burnin < horizon, received burnin={self.simulation.burnin}, horizon={self.simulation.horizon}'
            )

        model = experiment.build_model()

        if 'heavy-mc' in experiment.estimators and (model.service1.pmf(0) > 0 or model.service2.pmf(0) > 0):
            raise ConfigError('heavy-mc needs services that are at least 1 in every slot')

        log.debug(f'Experiment {experiment.name}: {model}')

"""
The coupled Lindley recursion, the walk, stability and the increment mgf.
"""

import math

import numpy as np
import pytest

from pqtail.dist import Bernoulli, DiscretePareto, Finite, Geometric, Rng
from pqtail.errors import ConfigError, DomainError, WalkOverflowError
from pqtail.model import (
    WALK_LIMIT,
    ParallelQueueModel,
    QueueState,
    WalkState,
    check_stability,
    in_domain,
    increment_mgf,
    increment_mgf_gradient,
    increment_mgf_hessian,
    log_increment_mgf,
    queue_path,
    step,
    walk_path,
    walk_step
)


@pytest.fixture
def bernoulli_model() -> ParallelQueueModel:
    return ParallelQueueModel(Bernoulli(0.3), Bernoulli(0.5), Bernoulli(0.6))


@pytest.fixture
def geometric_model() -> ParallelQueueModel:
    return ParallelQueueModel(Geometric(0.5), Geometric(0.25), Geometric(0.3))


def test_step_applies_common_arrival():
    assert step(QueueState(0, 0), 2, 1, 3) == QueueState(1, 0)
    assert step(QueueState(4, 1), 0, 2, 2) == QueueState(2, 0)
    assert step(QueueState(0, 5), 3, 3, 0) == QueueState(0, 8)


def test_walk_step():
    state = walk_step(WalkState(), 2, 1, 3)

    assert state == WalkState(1, -1, 1)
    assert walk_step(state, 0, 2, 0) == WalkState(-1, -1, 2)


def test_negative_queue_lengths_rejected():
    with pytest.raises(ValueError):
        QueueState(-1, 0)


def test_walk_overflow():
    with pytest.raises(WalkOverflowError):
        WalkState(WALK_LIMIT + 1, 0)

    a = np.array([WALK_LIMIT, WALK_LIMIT], dtype=np.int64)
    zeros = np.zeros(2, dtype=np.int64)

    with pytest.raises(WalkOverflowError):
        walk_path(a, zeros, zeros)

    # 2^62 + 2^62 wraps to -2^63 in int64.
    huge = np.full(3, 2 ** 62, dtype=np.int64)
    zeros = np.zeros(3, dtype=np.int64)

    with pytest.raises(WalkOverflowError):
        walk_path(huge, zeros, zeros)

    with pytest.raises(WalkOverflowError):
        walk_path(zeros, huge, zeros)


def test_wide_steps_that_stay_in_range():
    a = np.array([2 ** 60, 0, 0], dtype=np.int64)
    s1 = np.array([0, 2 ** 60, 0], dtype=np.int64)
    s2 = np.zeros(3, dtype=np.int64)

    w1, w2 = walk_path(a, s1, s2, start=(-5, 5))

    assert w1.tolist() == [2 ** 60 - 5, -5, -5]
    assert w2.tolist() == [2 ** 60 + 5] * 3
    assert w1.dtype == np.int64 and w2.dtype == np.int64


def _loop_paths(a, s1, s2, start=QueueState()):
    state = start
    q1, q2 = [state.q1], [state.q2]

    for k in range(a.size):
        state = step(state, int(a[k]), int(s1[k]), int(s2[k]))
        q1.append(state.q1)
        q2.append(state.q2)

    return np.array(q1), np.array(q2)


def test_queue_path_matches_slot_by_slot_recursion(geometric_model):
    a, s1, s2 = geometric_model.sample_steps(Rng(11), 5000)

    for start in (QueueState(), QueueState(7, 2)):
        q1, q2 = queue_path(a, s1, s2, start)
        l1, l2 = _loop_paths(a, s1, s2, start)

        assert np.array_equal(q1, l1)
        assert np.array_equal(q2, l2)


def test_queue_path_on_random_models():
    rng = np.random.default_rng(2024)

    for seed in range(100):
        laws = []

        for size in rng.integers(2, 6, size=3):
            weights = rng.random(size)
            laws.append(Finite(weights / weights.sum()))

        model = ParallelQueueModel(*laws, validate=False)
        a, s1, s2 = model.sample_steps(Rng(seed), 200)

        q1, q2 = queue_path(a, s1, s2)
        l1, l2 = _loop_paths(a, s1, s2)

        assert np.array_equal(q1, l1)
        assert np.array_equal(q2, l2)
        assert q1.min() >= 0 and q2.min() >= 0


def test_walk_path_matches_walk_steps(bernoulli_model):
    a, s1, s2 = bernoulli_model.sample_steps(Rng(3), 300)
    w1, w2 = walk_path(a, s1, s2)

    state = WalkState()

    for k in range(a.size):
        state = walk_step(state, int(a[k]), int(s1[k]), int(s2[k]))

    assert (state.w1, state.w2, state.n) == (w1[-1], w2[-1], 300)


def test_queue_is_walk_above_its_running_minimum(bernoulli_model):
    a, s1, s2 = bernoulli_model.sample_steps(Rng(5), 1000)
    w1, _ = walk_path(a, s1, s2)
    q1, _ = queue_path(a, s1, s2)

    walk = np.concatenate(([0], w1))

    assert np.array_equal(q1, walk - np.minimum.accumulate(walk))


def test_step_is_monotone_in_the_start_state(geometric_model):
    rng = np.random.default_rng(7)
    a, s1, s2 = geometric_model.sample_steps(Rng(8), 500)

    for k in range(a.size):
        q1, q2, d1, d2 = (int(v) for v in rng.integers(0, 10, size=4))
        low = step(QueueState(q1, q2), int(a[k]), int(s1[k]), int(s2[k]))
        high = step(QueueState(q1 + d1, q2 + d2), int(a[k]), int(s1[k]), int(s2[k]))

        assert low.q1 <= high.q1 and low.q2 <= high.q2


def test_common_arrivals_cancel_in_the_walk_difference(geometric_model):
    a, s1, s2 = geometric_model.sample_steps(Rng(9), 2000)
    w1, w2 = walk_path(a, s1, s2)

    assert np.array_equal(w1 - w2, np.cumsum(s2) - np.cumsum(s1))


def test_sample_steps_is_reproducible(geometric_model):
    first = geometric_model.sample_steps(Rng(1, 4), 100)
    again = geometric_model.sample_steps(Rng(1, 4), 100)

    for x, y in zip(first, again):
        assert np.array_equal(x, y)


class TestStability:

    def test_stable_report(self, bernoulli_model):
        report = check_stability(bernoulli_model)

        assert report.stable
        assert report.means == pytest.approx((0.3, 0.5, 0.6))
        assert bernoulli_model.drift() == pytest.approx((-0.2, -0.3))

    def test_unstable_model_is_rejected_with_its_means(self):
        with pytest.raises(ConfigError) as e:
            ParallelQueueModel(Bernoulli(0.5), Bernoulli(0.5), Bernoulli(0.6))

        assert 'E A = 0.5' in str(e.value)
        assert 'E S1 = 0.5' in str(e.value)

    def test_unstable_model_without_validation(self):
        model = ParallelQueueModel(Bernoulli(0.5), Bernoulli(0.5), Bernoulli(0.6), validate=False)

        assert not check_stability(model).stable
        assert 'unstable' in str(check_stability(model))


class TestRecords:

    def test_round_trip(self, geometric_model):
        assert ParallelQueueModel.from_record(geometric_model.to_record()) == geometric_model

    def test_invalid_records(self):
        with pytest.raises(ConfigError):
            ParallelQueueModel.from_record({'arrival': {'kind': 'bernoulli', 'p': 0.3}})

        with pytest.raises(ConfigError):
            ParallelQueueModel.from_record({
                'arrival': {'kind': 'bernoulli', 'p': 0.3},
                'service1': {'kind': 'binomial', 'n': 2},
                'service2': {'kind': 'bernoulli', 'p': 0.6}
            })

    def test_symmetric(self, bernoulli_model):
        assert not bernoulli_model.symmetric
        assert ParallelQueueModel(Bernoulli(0.3), Bernoulli(0.5), Bernoulli(0.5)).symmetric


class TestIncrementMgf:

    def test_value_at_origin(self, geometric_model):
        assert increment_mgf(geometric_model, (0.0, 0.0)) == 1.0
        assert log_increment_mgf(geometric_model, (0.0, 0.0)) == pytest.approx(0.0, abs=1e-15)

    def test_gradient_at_origin_is_drift(self, bernoulli_model):
        assert increment_mgf_gradient(bernoulli_model, (0.0, 0.0)) == pytest.approx(np.array(bernoulli_model.drift()))

    def test_bernoulli_closed_form(self, bernoulli_model):
        t1, t2 = 0.4, 0.7
        expected = (0.7 + 0.3 * math.exp(t1 + t2)) * (0.5 + 0.5 * math.exp(-t1)) * (0.4 + 0.6 * math.exp(-t2))

        assert increment_mgf(bernoulli_model, (t1, t2)) == pytest.approx(expected, rel=1e-14)
        assert log_increment_mgf(bernoulli_model, (t1, t2)) == pytest.approx(math.log(expected), rel=1e-12)

    @pytest.mark.parametrize('theta', [(0.1, 0.2), (0.3, -0.1), (-0.2, 0.25)])
    def test_derivatives_match_finite_differences(self, geometric_model, theta):
        h = 1e-5
        t1, t2 = theta

        def phi(x, y):
            return increment_mgf(geometric_model, (x, y))

        grad = increment_mgf_gradient(geometric_model, theta)
        hess = increment_mgf_hessian(geometric_model, theta)

        fd_grad = np.array([
            (phi(t1 + h, t2) - phi(t1 - h, t2)) / (2 * h),
            (phi(t1, t2 + h) - phi(t1, t2 - h)) / (2 * h)
        ])
        fd_h11 = (phi(t1 + h, t2) - 2 * phi(t1, t2) + phi(t1 - h, t2)) / h ** 2
        fd_h22 = (phi(t1, t2 + h) - 2 * phi(t1, t2) + phi(t1, t2 - h)) / h ** 2
        fd_h12 = (phi(t1 + h, t2 + h) - phi(t1 + h, t2 - h) - phi(t1 - h, t2 + h) + phi(t1 - h, t2 - h)) / (4 * h ** 2)

        assert grad == pytest.approx(fd_grad, rel=1e-6)
        assert hess[0, 0] == pytest.approx(fd_h11, rel=1e-4)
        assert hess[1, 1] == pytest.approx(fd_h22, rel=1e-4)
        assert hess[0, 1] == pytest.approx(fd_h12, rel=1e-4)
        assert hess[0, 1] == hess[1, 0]

    def test_domain(self, geometric_model):
        # M_A is finite below log 2; the services allow every positive ϑ.
        assert in_domain(geometric_model, (0.3, 0.3))
        assert not in_domain(geometric_model, (0.4, 0.3))
        assert not in_domain(geometric_model, (math.inf, 0.0))

        with pytest.raises(DomainError):
            increment_mgf(geometric_model, (0.4, 0.3))

    def test_heavy_arrivals_have_no_positive_domain(self):
        model = ParallelQueueModel(DiscretePareto(2.5), Finite.point_mass(2), Finite.point_mass(3))

        assert in_domain(model, (-0.1, 0.05))
        assert not in_domain(model, (0.05, 0.05))

    def test_bernoulli_lundberg_point(self, bernoulli_model):
        # (0.7 + 0.3 * 7/3) (0.5 + 0.5 * 3/7) = 1.4 * 5/7 = 1.
        assert increment_mgf(bernoulli_model, (math.log(7.0 / 3.0), 0.0)) == pytest.approx(1.0, rel=1e-14)
        assert increment_mgf(bernoulli_model, (0.0, math.log(3.5))) == pytest.approx(1.0, rel=1e-14)

    @pytest.mark.parametrize('theta', [(0.2, 0.1), (-0.1, 0.25), (0.15, 0.15)])
    def test_agrees_with_sampled_average(self, geometric_model, theta):
        a, s1, s2 = geometric_model.sample_steps(Rng(21), 100_000)
        samples = np.exp(theta[0] * (a - s1) + theta[1] * (a - s2))
        stderr = samples.std(ddof=1) / math.sqrt(samples.size)

        assert abs(samples.mean() - increment_mgf(geometric_model, theta)) <= 3.0 * stderr

    @pytest.mark.parametrize('direction', [(1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, -0.5)])
    def test_convex_along_lines(self, geometric_model, direction):
        ts = np.linspace(-0.25, 0.25, 21)
        values = np.array([increment_mgf(geometric_model, (t * direction[0], t * direction[1])) for t in ts])

        assert np.all(values[:-2] - 2.0 * values[1:-1] + values[2:] >= -1e-14)

        # Along a line the second derivative is the Hessian quadratic form.
        hess = increment_mgf_hessian(geometric_model, (0.1 * direction[0], 0.1 * direction[1]))
        assert np.asarray(direction) @ hess @ np.asarray(direction) > 0.0

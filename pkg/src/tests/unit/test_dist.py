"""
Laws of arrivals and services: point probabilities, tails, generating functions, tilting, sampling and the
subexponential diagnostic.
"""

import math

import numpy as np
import pytest

from scipy.special import zeta
from scipy.stats import chisquare
from pqtail.dist import (
    Bernoulli,
    DiscretePareto,
    Finite,
    Geometric,
    Rng,
    build_pmf,
    strong_subexp_diagnostic
)
from pqtail.errors import DomainError


LAWS = [
    Bernoulli(0.3),
    Geometric(0.25),
    DiscretePareto(2.5),
    Finite([0.5, 0.3, 0.2])
]


@pytest.mark.parametrize('law', LAWS, ids=repr)
def test_tail_is_complement_of_cumulative_pmf(law):
    ks = np.arange(0, 40)
    cumulative = np.cumsum(law.pmf_array(39))

    assert np.allclose(law.tail(ks), 1.0 - cumulative, atol=1e-12)
    assert law.tail(-1) == 1.0
    assert law.pmf(-3) == 0.0


@pytest.mark.parametrize('law', LAWS, ids=repr)
def test_mgf_at_zero_is_exactly_one(law):
    assert law.mgf(0.0) == 1.0
    assert law.log_mgf(0.0) == pytest.approx(0.0, abs=1e-15)


def test_means():
    assert Bernoulli(0.3).mean() == pytest.approx(0.3)
    assert Geometric(0.25).mean() == pytest.approx(3.0)
    assert DiscretePareto(2.5).mean() == pytest.approx(float(zeta(2.5, 1.0)), rel=1e-12)
    assert Finite([0.5, 0.3, 0.2]).mean() == pytest.approx(0.7)
    assert Finite.point_mass(3).mean() == 3.0


@pytest.mark.parametrize('law, thetas', [
    (Bernoulli(0.3), (-1.0, 0.2, 1.5)),
    (Geometric(0.25), (-0.5, 0.0, 0.25)),
    (DiscretePareto(2.5), (-2.0, -0.7, -0.1)),
    (Finite([0.5, 0.3, 0.2]), (-0.8, 0.1, 0.9))
], ids=repr)
def test_mgf_is_convex(law, thetas):
    a, b, c = thetas
    weight = (c - b) / (c - a)

    assert law.mgf(b) <= weight * law.mgf(a) + (1.0 - weight) * law.mgf(c)


@pytest.mark.parametrize('law', [Bernoulli(0.3), Geometric(0.25), Finite([0.5, 0.3, 0.2])], ids=repr)
def test_mgf_slope_at_zero_is_the_mean(law):
    h = 1e-5

    assert (law.mgf(h) - law.mgf(-h)) / (2 * h) == pytest.approx(law.mean(), rel=1e-8)


def test_bernoulli_mgf_closed_form():
    assert Bernoulli(0.3).mgf(math.log(2.0)) == pytest.approx(0.7 + 0.6)


def test_geometric_mgf_domain():
    law = Geometric(0.5)

    assert law.in_domain(math.log(2.0) - 1e-9)
    assert not law.in_domain(math.log(2.0))

    with pytest.raises(DomainError):
        law.mgf(math.log(2.0))


def test_pareto_is_heavy_tailed():
    law = DiscretePareto(2.5)

    assert not law.light_tailed
    assert law.mgf(-1.0) < 1.0

    with pytest.raises(DomainError):
        law.mgf(0.1)


@pytest.mark.parametrize('law, theta', [
    (Bernoulli(0.3), 0.4),
    (Geometric(0.25), 0.2),
    (Geometric(0.5), -0.3),
    (Finite([0.5, 0.3, 0.2]), 0.7),
    (DiscretePareto(2.5), -0.5)
], ids=repr)
def test_mgf_derivatives_match_finite_differences(law, theta):
    h = 1e-5
    m0, m1, m2 = law.mgf_derivatives(theta)

    assert m0 == pytest.approx(law.mgf(theta), rel=1e-12)
    assert m1 == pytest.approx((law.mgf(theta + h) - law.mgf(theta - h)) / (2 * h), rel=1e-6)
    assert m2 == pytest.approx((law.mgf(theta + h) - 2 * m0 + law.mgf(theta - h)) / h ** 2, rel=1e-4)


def test_excess_mean_matches_tail_sums():
    geometric = Geometric(0.5)

    assert geometric.excess_mean(3) == pytest.approx(0.125)
    assert geometric.excess_mean(3) == pytest.approx(geometric.tail(np.arange(3, 200)).sum(), rel=1e-12)

    pareto = DiscretePareto(2.5)
    direct = pareto.tail(np.arange(10, 2_000_000)).sum()

    # The omitted tail beyond 2 * 10^6 is below 10^-9.
    assert pareto.excess_mean(10) == pytest.approx(direct, rel=1e-6)


@pytest.mark.parametrize('law', LAWS, ids=repr)
def test_excess_mean_below_zero_adds_the_offset(law):
    assert law.excess_mean(-2) == pytest.approx(law.mean() + 2.0, rel=1e-12)


def test_tilted_laws_have_tilted_means():
    for law, theta in [(Bernoulli(0.3), 0.5), (Geometric(0.25), 0.2), (Finite([0.5, 0.3, 0.2]), -0.4)]:
        m0, m1, _ = law.mgf_derivatives(theta)
        tilted = law.tilt(theta)

        assert tilted.mean() == pytest.approx(m1 / m0, rel=1e-10)


def test_tilted_families():
    assert isinstance(Bernoulli(0.3).tilt(0.5), Bernoulli)
    assert isinstance(Geometric(0.25).tilt(0.2), Geometric)

    tilted = DiscretePareto(2.5).tilt(-0.5)
    m0, m1, _ = DiscretePareto(2.5).mgf_derivatives(-0.5)

    assert isinstance(tilted, Finite)
    assert tilted.pmf(0) == 0.0
    assert tilted.mean() == pytest.approx(m1 / m0, rel=1e-9)


def test_truncation_point_and_finitize():
    law = Geometric(0.5)

    # P(X > 9) = 2^-10 < 1e-3 <= P(X > 8).
    assert law.truncation_point(1e-3) == 9

    weights, dropped = law.finitize(1e-3)

    assert weights.size == 10
    assert weights.sum() + dropped == pytest.approx(1.0, abs=1e-15)

    with pytest.raises(ValueError):
        law.truncation_point(0.0)


def test_truncated_geometric_as_finite_law():
    geometric = Geometric(0.5)
    weights, dropped = geometric.finitize(1e-13)
    finite = Finite(weights / weights.sum())
    ks = np.arange(weights.size)

    assert dropped <= 1e-13
    assert np.allclose(finite.pmf(ks), geometric.pmf(ks), rtol=0.0, atol=1e-12)
    assert np.allclose(finite.tail(ks), geometric.tail(ks), rtol=0.0, atol=1e-12)
    assert finite.mean() == pytest.approx(geometric.mean(), abs=1e-10)
    assert finite.mgf(-0.5) == pytest.approx(geometric.mgf(-0.5), rel=1e-12)

    again, rest = finite.finitize(1e-13)

    assert rest <= 1e-13
    assert np.allclose(again, finite.weights[: again.size], rtol=0.0, atol=0.0)


@pytest.mark.parametrize('law, upto', [
    (Bernoulli(0.3), 1),
    (Geometric(0.25), 15),
    (DiscretePareto(2.5), 12),
    (Finite([0.5, 0.3, 0.2]), 2)
], ids=repr)
def test_sampling_passes_chi_square(law, upto):
    n = 100_000
    draws = law.sample_many(Rng(13), n)

    # Cells 0..upto, and one cell for everything above.
    probs = np.append(law.pmf_array(upto), law.tail(upto))
    observed = np.bincount(np.minimum(draws, upto + 1), minlength=upto + 2)
    keep = probs > 0.0

    assert observed[~keep].sum() == 0
    assert chisquare(observed[keep], n * probs[keep]).pvalue > 1e-4


def test_sample_frequencies():
    rng = Rng(7)

    assert Bernoulli(0.3).sample_many(rng, 200_000).mean() == pytest.approx(0.3, abs=0.01)
    assert Geometric(0.25).sample_many(rng, 200_000).mean() == pytest.approx(3.0, abs=0.05)

    draws = DiscretePareto(2.5).sample_many(rng, 200_000)

    assert draws.min() >= 1
    assert (draws == 1).mean() == pytest.approx(1.0 - 2.0 ** -2.5, abs=0.01)

    finite = Finite([0.5, 0.3, 0.2]).sample_many(rng, 200_000)

    assert np.bincount(finite, minlength=3) / finite.size == pytest.approx(np.array([0.5, 0.3, 0.2]), abs=0.01)


def test_streams_are_reproducible_and_distinct():
    law = Geometric(0.25)

    first = law.sample_many(Rng(3, 5), 1000)
    again = law.sample_many(Rng(3, 5), 1000)
    other = law.sample_many(Rng(3, 6), 1000)

    assert np.array_equal(first, again)
    assert not np.array_equal(first, other)
    assert isinstance(law.sample(Rng(3)), int)


def test_rng_rejects_negative_seeds():
    with pytest.raises(ValueError):
        Rng(-1)


def test_stream_ids_are_seed_sequence_children():
    # Worker streams coincide with numpy's own spawned children of the seed.
    child = np.random.SeedSequence(3).spawn(6)[5]

    assert np.array_equal(Rng(3, 5).uniform(4), np.random.Generator(np.random.PCG64(child)).random(4))


@pytest.mark.parametrize('record, expected', [
    ({'kind': 'bernoulli', 'p': 0.3}, Bernoulli(0.3)),
    ({'kind': 'geometric', 'alpha': 0.25}, Geometric(0.25)),
    ({'kind': 'pareto', 'delta': 2.5}, DiscretePareto(2.5)),
    ({'kind': 'finite', 'weights': [0.5, 0.5]}, Finite([0.5, 0.5])),
    ({'kind': 'deterministic', 'value': 2}, Finite([0.0, 0.0, 1.0]))
])
def test_build_pmf(record, expected):
    law = build_pmf(record)

    assert law == expected
    assert build_pmf(law.to_record()) == law


@pytest.mark.parametrize('record', [
    {'kind': 'poisson', 'lam': 1.0},
    {'kind': 'geometric'},
    {'kind': 'bernoulli', 'p': 1.5},
    {'kind': 'geometric', 'alpha': 0.0},
    {'kind': 'pareto', 'delta': 1.0},
    {'kind': 'finite', 'weights': [0.5, 0.4]}
])
def test_build_pmf_rejects_invalid_records(record):
    with pytest.raises(ValueError):
        build_pmf(record)


class TestSubexpDiagnostic:
    """
    Ratio sequences of the strongly subexponential check.
    """

    def test_pareto_converges(self):
        report = strong_subexp_diagnostic(DiscretePareto(2.5), 2000)

        assert report.ratio1[-1] == pytest.approx(2.0, abs=0.05)
        assert report.ratio2[-1] == pytest.approx(1.0, abs=0.05)
        assert report.converging
        assert not report.tail_exhausted
        assert report.deficit == 0.0

    def test_geometric_does_not_converge(self):
        report = strong_subexp_diagnostic(Geometric(0.5), 200)

        assert report.ratio1[-1] > 3.0
        assert not report.converging

    def test_bounded_support_exhausts(self):
        report = strong_subexp_diagnostic(Bernoulli(0.3), 10)

        assert report.tail_exhausted_from == 1
        assert np.isnan(report.ratio1[5])
        assert report.summary()['ratio1'] is None

    def test_rejects_negative_n_max(self):
        with pytest.raises(ValueError):
            strong_subexp_diagnostic(Geometric(0.5), -1)

import math

import numpy as np
import pytest
from scipy import integrate
from scipy import stats

from semicross.v1.distributions import DomainError
from semicross.v1.distributions import JumpLaw
from semicross.v1.distributions import LawFamily
from semicross.v1.rng import replication_stream

CONTINUOUS_LAWS = [
    JumpLaw.weibull(0.2),
    JumpLaw.weibull(1.0),
    JumpLaw.weibull(2.5),
    JumpLaw.pareto(0.5),
    JumpLaw.pareto(5.0),
    JumpLaw.truncated_weibull(0.5, 10.0),
    JumpLaw.pareto(1.0, upper=50.0),
]


def test_weibull_tail_and_density_closed_forms():
    law = JumpLaw.weibull(0.5)
    assert law.tail(4.0) == pytest.approx(math.exp(-2.0))
    assert law.density(4.0) == pytest.approx(0.5 * 4.0**-0.5 * math.exp(-2.0))
    assert law.log_tail(1e15) == pytest.approx(-(1e15**0.5))


def test_pareto_tail_and_support():
    law = JumpLaw.pareto(2.0)
    assert law.tail(10.0) == pytest.approx(0.01)
    assert law.tail(0.5) == 1.0
    assert law.density(0.5) == 0.0
    assert law.support_min == 1.0


@pytest.mark.parametrize("law", CONTINUOUS_LAWS, ids=lambda law: f"{law.family.value}-{law.alpha}-{law.upper}")
def test_density_matches_cdf_between_quantiles(law):
    lo, hi = float(law.quantile(0.01)), float(law.quantile(0.99))

    def integrand(s):
        x = math.exp(s)
        return float(law.density(x)) * x

    value, _ = integrate.quad(integrand, math.log(lo), math.log(hi), limit=400)
    assert value == pytest.approx(0.98, rel=1e-6)


@pytest.mark.parametrize("law", CONTINUOUS_LAWS, ids=lambda law: f"{law.family.value}-{law.alpha}-{law.upper}")
def test_quantile_inverts_cdf(law):
    u = np.array([1e-9, 0.1, 0.5, 0.9, 1.0 - 1e-9])
    assert np.asarray(law.cdf(law.quantile(u))) == pytest.approx(u, rel=1e-6, abs=1e-12)


def test_truncated_tail_stays_finite_far_out():
    law = JumpLaw.weibull(0.1).truncated(1e10)
    below = law.log_tail(1e10 * (1.0 - 1e-6))
    assert np.isfinite(below)
    assert law.log_tail(1e10) == -np.inf


def test_interval_sampling_examples():
    assert JumpLaw.weibull(1.0).sample_truncated_interval(0.0, math.log(2.0), 0.5) == pytest.approx(0.287682, rel=1e-5)
    assert JumpLaw.pareto(2.0).sample_truncated_interval(1.0, 2.0, 1.0 - 1e-15) == pytest.approx(2.0)


def test_truncated_above_sampling_respects_cut():
    law = JumpLaw.weibull(0.3)
    rng = replication_stream(1, "test", 0)
    c = np.full(1000, 50.0)
    draws = law.sample_truncated_above(c, rng.random(1000) * 0.999 + 0.0005)
    assert np.all(draws >= 50.0)


def test_truncated_above_matches_conditional_law():
    law = JumpLaw.weibull(0.5)
    rng = replication_stream(2, "test", 0)
    draws = np.asarray(law.sample_truncated_above(np.full(5000, 9.0), rng.random(5000) * 0.9998 + 0.0001))

    def conditional_cdf(x):
        return 1.0 - np.exp(np.asarray(law.log_tail(x)) - float(law.log_tail(9.0)))

    assert stats.kstest(draws, conditional_cdf).pvalue > 0.001


def test_empty_interval_is_a_domain_error():
    with pytest.raises(DomainError):
        JumpLaw.weibull(1.0).sample_truncated_interval(2.0, 1.0, 0.5)


@pytest.mark.parametrize("u", [0.0, 1.0, -0.1, 1.5])
def test_quantile_rejects_closed_unit_interval(u):
    with pytest.raises(DomainError):
        JumpLaw.weibull(1.0).quantile(u)


def test_geometric_law():
    law = JumpLaw.geometric(0.5)
    assert law.quantile(0.6) == 2.0
    assert JumpLaw.geometric(0.2).tail(3.0) == pytest.approx(0.512)
    assert law.density(3.0) == pytest.approx(0.125)
    assert law.mean() == 2.0


def test_geometric_interval_sampling_stays_inside():
    law = JumpLaw.geometric(0.3)
    u = np.linspace(0.001, 0.999, 200)
    draws = np.asarray(law.sample_truncated_interval(np.full(200, 2.0), np.full(200, 6.0), u))
    assert draws.min() >= 3.0
    assert draws.max() <= 5.0
    assert np.all(draws == np.floor(draws))


def test_invalid_parameters_raise():
    with pytest.raises(DomainError):
        JumpLaw.weibull(0.0)
    with pytest.raises(DomainError):
        JumpLaw.geometric(1.5)
    with pytest.raises(DomainError):
        JumpLaw.pareto(1.0, upper=0.5)
    with pytest.raises(DomainError):
        JumpLaw("lognormal")


def test_means():
    assert JumpLaw.weibull(1.0).mean() == pytest.approx(1.0)
    assert JumpLaw.pareto(2.0).mean() == pytest.approx(2.0)
    assert JumpLaw.pareto(0.5).mean() == math.inf
    truncated = JumpLaw.truncated_weibull(1.0, 1.0)
    assert truncated.mean() == pytest.approx((1.0 - 2.0 / math.e) / (1.0 - 1.0 / math.e))


def test_sample_matches_law():
    law = JumpLaw.pareto(3.0)
    draws = law.sample(replication_stream(0, "test", 0), 4000)
    assert stats.kstest(draws, lambda x: np.asarray(law.cdf(x))).pvalue > 0.001


def test_pairs_codec():
    law = JumpLaw.pareto(1.5, upper=20.0)
    assert JumpLaw.from_pairs(law.to_pairs()) == law
    assert JumpLaw.from_pairs({"family": "weibull", "alpha": "0.5"}).family is LawFamily.WEIBULL
    with pytest.raises(DomainError):
        JumpLaw.from_pairs({"alpha": "1"})
    with pytest.raises(DomainError):
        JumpLaw.from_pairs({"family": "weibull", "alpha": "abc"})

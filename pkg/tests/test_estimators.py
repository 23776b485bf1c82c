import math

import pytest
from scipy import special

from semicross.v1.distributions import DomainError
from semicross.v1.distributions import JumpLaw
from semicross.v1.estimators import EstimateReport
from semicross.v1.estimators import Method
from semicross.v1.estimators import ak_estimate
from semicross.v1.estimators import compare
from semicross.v1.estimators import crude_mc
from semicross.v1.estimators import dominant_term
from semicross.v1.estimators import dominant_term_estimate
from semicross.v1.estimators import estimate_method
from semicross.v1.estimators import make_report
from semicross.v1.estimators import method_problems
from semicross.v1.estimators import parametric_ce_estimate
from semicross.v1.estimators import semiparam_is_estimate
from semicross.v1.estimators import semiparametric_pipeline
from semicross.v1.marginal_mixture import build_product_density
from semicross.v1.zero_variance_mcmc import ChainTarget
from semicross.v1.zero_variance_mcmc import RareEventModel
from semicross.v1.zero_variance_mcmc import run_chain


def exponential_model(d, gamma):
    return RareEventModel.fixed_sum(JumpLaw.weibull(1.0), d, gamma)


def within(report, exact, sigmas=4.0):
    return abs(report.estimate - exact) <= sigmas * report.std_error


def test_erlang_oracle_value():
    assert special.gammaincc(2, 10.0) == pytest.approx(11.0 * math.exp(-10.0))


@pytest.mark.parametrize("d,gamma", [(2, 10.0), (5, 20.0)])
def test_semiparametric_matches_erlang_tail(d, gamma):
    report = semiparametric_pipeline(exponential_model(d, gamma), n=500, m=20_000, seed=0)
    exact = special.gammaincc(d, gamma)
    assert report.method == "semiparametric"
    assert report.n == 500
    assert report.rel_error < 0.05
    assert within(report, exact)


@pytest.mark.slow
@pytest.mark.parametrize("d,gamma", [(2, 10.0), (5, 20.0), (10, 30.0)])
def test_semiparametric_covers_erlang_tail_across_seeds(d, gamma):
    exact = special.gammaincc(d, gamma)
    misses = 0
    for seed in range(20):
        report = semiparametric_pipeline(exponential_model(d, gamma), n=1000, m=100_000, seed=seed)
        misses += not within(report, exact, sigmas=3.0)
    assert misses <= 1


def test_semiparametric_is_exact_for_one_jump():
    model = RareEventModel.fixed_sum(JumpLaw.weibull(0.5), 1, 25.0)
    chain = run_chain(model, 50, seed=0)
    for report in (
        semiparam_is_estimate(model, build_product_density(chain), m=100, seed=0),
        semiparametric_pipeline(model, n=50, m=100, seed=0),
    ):
        assert report.estimate == pytest.approx(math.exp(-5.0))
        assert report.std_error == 0.0
        assert report.rel_error == 0.0
        assert report.method == "semiparametric"


def test_ak_matches_erlang_tail():
    report = ak_estimate(exponential_model(3, 15.0), m=20_000, seed=1)
    assert within(report, special.gammaincc(3, 15.0))


def test_ak_is_exact_for_one_jump():
    law = JumpLaw.pareto(2.0)
    report = ak_estimate(RareEventModel.fixed_sum(law, 1, 10.0), m=100, seed=0)
    assert report.estimate == pytest.approx(0.01)
    assert report.std_error == 0.0


def test_crude_certain_event():
    report = crude_mc(exponential_model(3, 0.0), m=1000, seed=0)
    assert report.estimate == 1.0
    assert report.rel_error == 0.0


def test_crude_matches_erlang_tail_for_moderate_event():
    report = crude_mc(exponential_model(2, 3.0), m=50_000, seed=2)
    assert within(report, special.gammaincc(2, 3.0))


def test_parametric_ce_for_exponential_jumps():
    model = exponential_model(3, 15.0)
    chain = run_chain(model, 500, seed=0)
    report = parametric_ce_estimate(model, chain, m=20_000, seed=0)
    assert within(report, special.gammaincc(3, 15.0))
    assert report.wall_seconds >= chain.wall_seconds


def test_parametric_ce_rejects_other_laws():
    model = RareEventModel.fixed_sum(JumpLaw.pareto(1.0), 2, 10.0)
    chain = run_chain(model, 20, seed=0)
    with pytest.raises(DomainError):
        parametric_ce_estimate(model, chain, m=100, seed=0)


def test_semiparam_is_rejects_residual_density():
    model = RareEventModel.fixed_sum(JumpLaw.weibull(0.5), 3, 30.0)
    chain = run_chain(model, 50, seed=0, target=ChainTarget.RESIDUAL_MAX_LAST)
    with pytest.raises(DomainError):
        semiparam_is_estimate(model, build_product_density(chain), m=100, seed=0)


def test_dominant_term_closed_form():
    model = RareEventModel.fixed_sum(JumpLaw.pareto(1.0), 10, 10_010.0)
    assert dominant_term(model) == pytest.approx(1.0 - (1.0 - 1.0 / 10_010.0) ** 10, rel=1e-12)


def test_dominant_term_estimate_pareto_cell():
    model = RareEventModel.fixed_sum(JumpLaw.pareto(1.0), 10, 10_010.0)
    report = dominant_term_estimate(model, n=1000, m=10_000, seed=0)
    assert report.estimate >= dominant_term(model)
    assert report.estimate == pytest.approx(1.00e-3, rel=0.05)


def test_dominant_term_estimate_weibull_heavy_cell():
    model = RareEventModel.fixed_sum(JumpLaw.weibull(0.1), 10, 1e10)
    report = dominant_term_estimate(model, n=1000, m=10_000, seed=0)
    assert report.estimate == pytest.approx(4.54e-4, rel=2e-3)
    assert report.rel_error < 1e-3


def test_dominant_term_estimate_exact_for_one_jump():
    model = RareEventModel.fixed_sum(JumpLaw.weibull(0.5), 1, 25.0)
    report = dominant_term_estimate(model, n=10, m=10, seed=0)
    assert report.estimate == pytest.approx(math.exp(-5.0))
    assert report.std_error == 0.0


@pytest.mark.slow
def test_dominant_term_beats_ak_on_weibull_cell():
    model = RareEventModel.fixed_sum(JumpLaw.weibull(0.9), 10, 50.0)
    wins = 0
    for seed in range(20):
        ours = dominant_term_estimate(model, n=1000, m=10_000, seed=seed)
        baseline = ak_estimate(model, m=10_000, seed=seed)
        wins += ours.rel_error < baseline.rel_error
    assert wins >= 18


@pytest.mark.slow
@pytest.mark.parametrize("gamma,published", [(20.0, 2.58e-4), (110.0, 1.06e-9)])
def test_dominant_term_estimate_light_pareto_cells(gamma, published):
    model = RareEventModel.fixed_sum(JumpLaw.pareto(5.0), 10, gamma)
    ours = dominant_term_estimate(model, n=1000, m=20_000, seed=0)
    baseline = ak_estimate(model, m=200_000, seed=0)
    assert abs(ours.estimate - published) <= 4.0 * ours.std_error + 0.005 * published
    assert abs(ours.estimate - baseline.estimate) <= 4.0 * math.hypot(ours.std_error, baseline.std_error)


def test_estimates_are_deterministic_and_worker_invariant():
    model = RareEventModel.fixed_sum(JumpLaw.weibull(0.5), 3, 40.0)
    single = semiparametric_pipeline(model, n=200, m=20_000, seed=4, workers=1)
    again = semiparametric_pipeline(model, n=200, m=20_000, seed=4, workers=1)
    threaded = semiparametric_pipeline(model, n=200, m=20_000, seed=4, workers=3)
    assert single.estimate == again.estimate
    assert single.estimate == threaded.estimate
    assert single.rel_error == threaded.rel_error


def test_compare_ratio_and_rtvp():
    baseline = make_report(Method.AK, 1e-3, 1e-4, 100, 2.0, 0)
    candidate = make_report(Method.DOMINANT_TERM, 1e-3, 1e-5, 100, 4.0, 0)
    comparison = compare(baseline, candidate)
    assert comparison.ratio == pytest.approx(10.0)
    assert comparison.rtvp == pytest.approx(50.0)
    assert comparison.to_dict()["candidate"]["method"] == "dominant"


def test_compare_with_exact_candidate():
    baseline = make_report(Method.AK, 1e-3, 1e-4, 100, 1.0, 0)
    exact = make_report(Method.DOMINANT_TERM, 1e-3, 0.0, 100, 1.0, 0)
    assert compare(baseline, exact).ratio == math.inf
    assert compare(exact, exact).ratio == 1.0


def test_report_relative_error_edge_cases():
    assert make_report(Method.CRUDE, 0.0, 0.0, 10, 0.1, 0).rel_error == 0.0
    assert make_report(Method.CRUDE, 0.0, 0.1, 10, 0.1, 0).rel_error == math.inf
    assert isinstance(make_report("ak", 0.5, 0.1, 10, 0.1, 0), EstimateReport)


def test_method_problems():
    pareto = RareEventModel.fixed_sum(JumpLaw.pareto(1.0), 2, 10.0)
    compound = RareEventModel.compound(JumpLaw.weibull(0.5), 0.2, 10.0)
    assert method_problems(pareto, Method.AK) == []
    assert method_problems(pareto, "ce") == ["method ce needs family=weibull with alpha=1"]
    assert method_problems(pareto, "compound")
    assert method_problems(compound, "ak")
    assert method_problems(compound, "compound_ak") == []
    assert method_problems(pareto, "magic") == ["unknown method 'magic'"]


def test_estimate_method_dispatch():
    model = exponential_model(2, 5.0)
    report = estimate_method(model, "crude", n=10, m=1000, seed=0)
    assert report.method == "crude"
    with pytest.raises(DomainError):
        estimate_method(model, "compound_ak", n=10, m=10, seed=0)

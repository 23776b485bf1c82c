import math

import numpy as np
import pytest

from semicross.v1.compound import build_compound_density
from semicross.v1.compound import compound_ak_estimate
from semicross.v1.compound import compound_crude_mc
from semicross.v1.compound import compound_dominant_term
from semicross.v1.compound import compound_estimate
from semicross.v1.compound import compound_model
from semicross.v1.compound import compound_residual_coefficient
from semicross.v1.distributions import DomainError
from semicross.v1.distributions import JumpLaw
from semicross.v1.rng import replication_stream
from semicross.v1.zero_variance_mcmc import RareEventModel
from semicross.v1.zero_variance_mcmc import run_chain


def agree(first, second, sigmas=4.0):
    spread = math.hypot(first.std_error, second.std_error)
    return abs(first.estimate - second.estimate) <= sigmas * spread


def test_decomposition_coefficients():
    model = compound_model(1.0, 0.25, 2.0)
    tail = math.exp(-2.0)
    tilted = tail + 0.25 * (1.0 - tail)
    assert compound_dominant_term(model) == pytest.approx(tail / tilted)
    assert compound_residual_coefficient(model) == pytest.approx(0.25 * 0.75 * (1.0 - tail) ** 2 / tilted)


def test_fixed_sum_models_are_rejected():
    model = RareEventModel.fixed_sum(JumpLaw.weibull(1.0), 2, 5.0)
    with pytest.raises(DomainError):
        compound_dominant_term(model)
    with pytest.raises(DomainError):
        compound_ak_estimate(model, m=10, seed=0)


def test_single_jump_compound_is_exact():
    model = compound_model(0.5, 1.0, 9.0)
    report = compound_estimate(model, n=10, m=10, seed=0)
    assert report.estimate == pytest.approx(math.exp(-3.0))
    assert report.std_error == 0.0


def test_length_masses_sum_to_one():
    model = compound_model(0.75, 0.5, 8.0)
    g = build_compound_density(run_chain(model, 300, seed=0))
    extra_jumps = np.arange(1, g.length_cap + 1)
    total = np.exp(g.length_log_mass(extra_jumps)).sum()
    assert total == pytest.approx(1.0, abs=1e-9)


def test_compound_density_sample_and_reevaluation_agree():
    model = compound_model(0.75, 0.3, 15.0)
    g = build_compound_density(run_chain(model, 300, seed=1))
    lengths, jumps, log_g = g.sample(replication_stream(0, "test", 0), 300)
    assert lengths.min() >= 2
    assert np.all(np.nansum(jumps, axis=1) > 15.0)
    assert np.all(np.isfinite(log_g))
    assert g.log_density(lengths, jumps) == pytest.approx(log_g, rel=1e-10, abs=1e-10)


def test_compound_estimators_agree_with_crude_mc():
    model = compound_model(0.75, 0.5, 8.0)
    crude = compound_crude_mc(model, m=200_000, seed=0)
    ours = compound_estimate(model, n=500, m=20_000, seed=0)
    baseline = compound_ak_estimate(model, m=50_000, seed=0)
    assert crude.estimate > 0.0
    assert agree(ours, crude)
    assert agree(baseline, crude)


def test_published_compound_value():
    model = compound_model(0.75, 0.15, 63.361)
    report = compound_estimate(model, n=2000, m=20_000, seed=0)
    assert report.estimate == pytest.approx(5.38e-4, rel=0.1)
    assert report.method == "compound"


def test_compound_ak_is_worker_invariant():
    model = compound_model(0.5, 0.2, 50.0)
    single = compound_ak_estimate(model, m=20_000, seed=3, workers=1)
    threaded = compound_ak_estimate(model, m=20_000, seed=3, workers=2)
    assert single.estimate == threaded.estimate


def _log_target(model, lengths, jumps):
    present = ~np.isnan(jumps)
    logs = np.asarray(model.jump_law.log_density(np.where(present, jumps, 1.0)))
    return np.asarray(model.length_law.log_density(lengths - 1)) + np.where(present, logs, 0.0).sum(axis=1)


def test_jump_mixtures_cover_every_chain_state():
    model = compound_model(0.75, 0.3, 15.0)
    chain = run_chain(model, 300, seed=1)
    g = build_compound_density(chain)
    assert len(g.jump_marginals) == int(chain.lengths.max())
    for position, mix in enumerate(g.jump_marginals):
        assert mix.n == chain.n
        short = int(np.count_nonzero(chain.lengths <= position))
        assert int(np.count_nonzero(mix.thresholds == 0.0)) >= short


def test_density_is_positive_where_the_target_has_mass():
    model = compound_model(0.75, 0.3, 15.0)
    g = build_compound_density(run_chain(model, 300, seed=1))
    lengths = np.array([2, 3, 2])
    jumps = np.array(
        [
            [0.01, 14.995, np.nan],
            [0.01, 0.01, 14.99],
            [7.6, 7.6, np.nan],
        ]
    )
    log_g = g.log_density(lengths, jumps)
    assert np.all(np.isfinite(log_g))
    assert np.all(_log_target(model, lengths, jumps) - log_g <= -math.log(g.defensive_weight) + 1e-9)


def test_importance_weights_are_bounded():
    model = compound_model(0.5, 0.1, 60.0)
    g = build_compound_density(run_chain(model, 500, seed=2))
    lengths, jumps, log_g = g.sample(replication_stream(4, "test", 0), 5000)
    weights = np.exp(_log_target(model, lengths, jumps) - log_g)
    assert weights.max() <= (1.0 + 1e-9) / g.defensive_weight


def test_defensive_weight_must_lie_in_unit_interval():
    chain = run_chain(compound_model(0.75, 0.5, 8.0), 100, seed=0)
    with pytest.raises(DomainError):
        build_compound_density(chain, defensive_weight=1.0)
    plain = build_compound_density(chain, defensive_weight=0.0)
    lengths, jumps, log_g = plain.sample(replication_stream(0, "test", 1), 200)
    assert plain.chain_log_density(lengths, jumps) == pytest.approx(log_g)


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(5))
def test_heavy_tailed_compound_cell_matches_conditional_baseline(seed):
    model = compound_model(0.5, 0.1, 500.0)
    ours = compound_estimate(model, n=10_000, m=20_000, seed=seed)
    baseline = compound_ak_estimate(model, m=400_000, seed=seed)
    assert agree(ours, baseline)
    assert abs(ours.estimate - 1.17e-8) <= 4.0 * ours.std_error + 0.03 * 1.17e-8


@pytest.mark.slow
def test_light_geometric_compound_cell():
    model = compound_model(0.8, 1.0 / 3.0, 90.0)
    ours = compound_estimate(model, n=10_000, m=20_000, seed=0)
    assert abs(ours.estimate - 6.29e-11) <= 4.0 * ours.std_error + 0.03 * 6.29e-11

import math

import numpy as np
import pytest
from scipy import special
from scipy import stats

from semicross.v1.distributions import DomainError
from semicross.v1.distributions import JumpLaw
from semicross.v1.rng import replication_stream
from semicross.v1.zero_variance_mcmc import ChainTarget
from semicross.v1.zero_variance_mcmc import RareEventModel
from semicross.v1.zero_variance_mcmc import gibbs_sweep
from semicross.v1.zero_variance_mcmc import initial_state
from semicross.v1.zero_variance_mcmc import run_chain


def test_model_validation():
    with pytest.raises(DomainError):
        RareEventModel.fixed_sum(JumpLaw.weibull(1.0), 0, 5.0)
    with pytest.raises(DomainError):
        RareEventModel.fixed_sum(JumpLaw.geometric(0.5), 2, 5.0)
    with pytest.raises(DomainError):
        RareEventModel.compound(JumpLaw.pareto(1.0), 0.5, 5.0)
    with pytest.raises(DomainError):
        RareEventModel.compound(JumpLaw.weibull(0.5), 0.0, 5.0)
    with pytest.raises(DomainError):
        RareEventModel.fixed_sum(JumpLaw.weibull(1.0), 2, math.inf)


def test_event_is_certain():
    assert RareEventModel.fixed_sum(JumpLaw.weibull(1.0), 3, 0.0).event_is_certain
    assert RareEventModel.fixed_sum(JumpLaw.pareto(1.0), 3, 3.0).event_is_certain
    assert not RareEventModel.fixed_sum(JumpLaw.pareto(1.0), 3, 3.5).event_is_certain


def test_compound_tilted_quantities():
    model = RareEventModel.compound(JumpLaw.weibull(1.0), 0.25, 2.0)
    tail = math.exp(-2.0)
    assert model.tilted_success == pytest.approx(tail + 0.25 * (1.0 - tail))
    assert model.length_law.rho == pytest.approx(model.tilted_success)
    assert model.jump_law.upper == 2.0
    assert model.max_length >= 2


@pytest.mark.parametrize(
    "law,d,gamma",
    [
        (JumpLaw.weibull(1.0), 3, 20.0),
        (JumpLaw.weibull(0.2), 10, 1e6),
        (JumpLaw.pareto(1.0), 4, 1e4),
    ],
)
def test_chain_stays_inside_event(law, d, gamma):
    chain = run_chain(RareEventModel.fixed_sum(law, d, gamma), 300, burn_in=50, seed=1)
    assert chain.states.shape == (300, d)
    assert all(math.fsum(row) > gamma for row in chain.states)
    assert np.all(chain.states >= law.support_min)


def test_initial_state_parks_largest_jump_last():
    model = RareEventModel.fixed_sum(JumpLaw.weibull(0.5), 5, 40.0)
    state = initial_state(model, replication_stream(0, "test", 0))
    assert math.fsum(state) > 40.0
    assert state[-1] == state.max()


def test_initial_state_fallback_when_rejection_fails():
    model = RareEventModel.fixed_sum(JumpLaw.weibull(1.0), 2, 200.0)
    state = initial_state(model, replication_stream(0, "test", 0), max_attempts=10)
    assert math.fsum(state) > 200.0


def test_residual_chain_keeps_max_below_gamma_and_last():
    gamma = 50.0
    model = RareEventModel.fixed_sum(JumpLaw.weibull(0.9), 10, gamma)
    chain = run_chain(model, 200, burn_in=50, seed=4, target=ChainTarget.RESIDUAL_MAX_LAST)
    assert all(math.fsum(row) > gamma for row in chain.states)
    assert np.all(chain.states < gamma)
    assert np.all(chain.states[:, -1] >= chain.states.max(axis=1))


def test_residual_target_needs_two_jumps():
    model = RareEventModel.fixed_sum(JumpLaw.weibull(1.0), 1, 5.0)
    with pytest.raises(DomainError):
        run_chain(model, 10, target=ChainTarget.RESIDUAL_MAX_LAST)


def test_gibbs_sweep_preserves_event_from_boundary():
    model = RareEventModel.fixed_sum(JumpLaw.weibull(1.0), 2, 10.0)
    x = np.array([5.0, np.nextafter(5.0, 6.0)])
    rng = replication_stream(0, "test", 0)
    for _ in range(50):
        x = gibbs_sweep(model, x, rng)
        assert math.fsum(x) > 10.0


def test_exponential_chain_sum_matches_conditional_law():
    # S is Erlang(2); under π it is Erlang(2) conditioned on S > γ
    gamma = 8.0
    chain = run_chain(RareEventModel.fixed_sum(JumpLaw.weibull(1.0), 2, gamma), 4000, burn_in=200, seed=5)
    sums = chain.sums()[::4]

    def conditional_cdf(s):
        return 1.0 - special.gammaincc(2, s) / special.gammaincc(2, gamma)

    assert stats.kstest(sums, conditional_cdf).pvalue > 0.001


def test_chain_is_deterministic_per_seed():
    model = RareEventModel.fixed_sum(JumpLaw.pareto(2.0), 3, 100.0)
    first = run_chain(model, 50, seed=9)
    second = run_chain(model, 50, seed=9)
    assert np.array_equal(first.states, second.states)
    assert first.burn_in == 100


def test_compound_chain_states():
    model = RareEventModel.compound(JumpLaw.weibull(0.75), 0.15, 20.0)
    chain = run_chain(model, 400, burn_in=100, seed=2)
    assert chain.lengths is not None
    assert chain.lengths.min() >= 2
    assert chain.lengths.max() <= model.max_length
    for k in range(chain.n):
        state = chain.state(k)
        assert state.size == chain.lengths[k]
        assert math.fsum(state) > 20.0
        assert np.all(state < 20.0)
    padded = chain.states[np.arange(chain.n), chain.lengths - 1]
    assert not np.any(np.isnan(padded))


def test_thresholds_helper():
    model = RareEventModel.fixed_sum(JumpLaw.weibull(1.0), 3, 12.0)
    chain = run_chain(model, 100, seed=0)
    rest = chain.states[:, 1] + chain.states[:, 2]
    assert chain.thresholds(0) == pytest.approx(np.maximum(12.0 - rest, 0.0))

import numpy as np
import pytest

from ncsq.dictionary import make_rng
from ncsq.errors import ConfigInvalid, DimensionTooLarge, Reducible
from ncsq.experiments import REF_P
from ncsq.network import (IIDDropout, TwoStateDropout, mss_spectral_radius, simulate_channel,
                          stationary_distribution, step_channel)
from ncsq.plant import spectral_radius


def test_iid_zero_probability_never_drops():
    rng = make_rng(1)
    _, d = simulate_channel(IIDDropout(0.0), 1000, rng)
    assert not d.any()
    assert step_channel(IIDDropout(0.0), 1, rng) == (1, 0)


def test_absorbing_bad_state():
    model = TwoStateDropout(np.eye(2), 0.0, 1.0)
    rng = make_rng(2)
    xi, d = simulate_channel(model, 500, rng, start=2)
    assert (xi == 2).all() and (d == 1).all()
    state = 2
    for _ in range(50):
        state, drop = step_channel(model, state, rng)
        assert (state, drop) == (2, 1)


def test_stationary_distribution_cases():
    assert stationary_distribution([[0.5, 0.5], [0.5, 0.5]]) == (0.5, 0.5)
    pi = stationary_distribution(REF_P)
    assert pi[0] == pytest.approx(5 / 6, abs=1e-12)
    assert pi[1] == pytest.approx(1 / 6, abs=1e-12)
    eps = 1e-9
    assert stationary_distribution([[1 - eps, eps], [eps, 1 - eps]]) == pytest.approx((0.5, 0.5))
    P = np.array(REF_P)
    np.testing.assert_allclose(np.array(pi) @ P, pi, atol=1e-15)
    with pytest.raises(Reducible):
        stationary_distribution(np.eye(2))


def test_channel_validation():
    with pytest.raises(ConfigInvalid):
        IIDDropout(1.5)
    with pytest.raises(ConfigInvalid):
        TwoStateDropout([[0.9, 0.2], [0.5, 0.5]], 0.1, 0.2)


def test_vectorized_channel_matches_stepwise(ref_two_state):
    xi_v, d_v = simulate_channel(ref_two_state, 2000, make_rng(5))
    rng = make_rng(5)
    state = 1 if rng.random() < 5 / 6 else 2
    for k in range(2000):
        assert xi_v[k] == state
        state, d = step_channel(ref_two_state, state, rng)
        assert d == d_v[k]


def test_replay_is_deterministic(ref_two_state):
    a = simulate_channel(ref_two_state, 5000, make_rng(9))
    b = simulate_channel(ref_two_state, 5000, make_rng(9))
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])


def test_long_run_occupancy_and_dropout_rate(ref_two_state):
    n = 10 ** 6
    xi, d = simulate_channel(ref_two_state, n, make_rng(2024))
    assert abs(np.mean(xi == 1) - 5 / 6) <= 0.01
    p = ref_two_state.mean_dropout_rate
    assert p == pytest.approx(5 / 6 * 0.05 + 1 / 6 * 0.15)
    # binomial band is too narrow for a correlated chain; widen by the integrated autocorrelation
    lam = 1 - 0.05 - 0.25
    var = p * (1 - p) + 2 * (0.15 - 0.05) ** 2 * (5 / 36) * lam / (1 - lam)
    assert abs(d.mean() - p) <= 3 * np.sqrt(var / n)


def test_mss_radius_limits(ref_model):
    A0, A1 = ref_model.Abar0, ref_model.Abar1
    assert mss_spectral_radius(A0, A1, 0.0) == pytest.approx(spectral_radius(A0) ** 2, rel=1e-9)
    r1 = mss_spectral_radius(A0, A1, 1.0)
    assert r1 == pytest.approx(spectral_radius(A1) ** 2, rel=1e-9)
    assert np.sqrt(r1) == pytest.approx(1.659, abs=1e-3)
    assert r1 > 1
    assert mss_spectral_radius(A0, A1, 0.10) < 1


def test_mss_dimension_cap():
    with pytest.raises(DimensionTooLarge):
        mss_spectral_radius(np.eye(41), np.eye(41), 0.1)

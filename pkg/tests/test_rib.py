import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _util import small_rib_setup
from sfdma import nn
from sfdma.channel import ChannelRealization
from sfdma.errors import InvalidInputError
from sfdma.rib import (
    UserModel,
    bernoulli_from_features,
    cross_entropy_term,
    entropy_y_given_s,
    entropy_y_given_x,
    gaussian_entropy,
    mixture_entropy,
    mixture_entropy_mc,
    rib_loss,
    sign_mixture,
)

TWO_PI_E = 2 * np.pi * np.e


def test_bernoulli_examples():
    np.testing.assert_allclose(bernoulli_from_features([0.0]), [0.5])
    np.testing.assert_allclose(bernoulli_from_features([0.8]), [0.9])
    assert bernoulli_from_features([1 - 1e-15])[0] == pytest.approx(1.0)
    with pytest.raises(InvalidInputError):
        bernoulli_from_features([1.2])


def test_cross_entropy_examples():
    assert cross_entropy_term(np.full(10, 0.1), 7) == pytest.approx(np.log(10))
    assert cross_entropy_term([0.0, 1.0], 1) == 0.0
    assert cross_entropy_term([0.7, 0.2, 0.1], 0) == pytest.approx(-np.log(0.7), rel=1e-15)
    assert cross_entropy_term([0.0, 1.0], 0) == pytest.approx(-np.log(1e-12))
    with pytest.raises(InvalidInputError):
        cross_entropy_term([0.5, 0.6], 0)


def test_no_interferers_is_gaussian():
    assert entropy_y_given_x([], [], 1.0, 1.0 / TWO_PI_E) == pytest.approx(0.0, abs=1e-12)
    assert entropy_y_given_x([], [], 2.0, 0.3) == pytest.approx(0.5 * np.log(TWO_PI_E * 0.3))


def test_well_separated_mixture_adds_log_k():
    # four equiprobable components, separation 50 sigma
    h = entropy_y_given_x([np.array([0.5]), np.array([0.5])], [1.0, 100.0], 1.0, 0.01, dim=0)
    assert h == pytest.approx(gaussian_entropy(0.01) + np.log(4), abs=1e-3)


def test_given_s_collapse_and_binary_limit():
    hx = entropy_y_given_x([], [], 4.0, 0.2)
    hs = entropy_y_given_s(np.array([1.0]), [], [], 4.0, 0.2, dim=0)
    assert hs == pytest.approx(hx, abs=1e-9)
    hs = entropy_y_given_s(np.array([0.5]), [], [], 400.0, 0.2, dim=0)
    assert hs == pytest.approx(gaussian_entropy(0.2) + np.log(2), abs=1e-3)


def test_entropy_matches_monte_carlo_two_interferers():
    rng = np.random.default_rng(17)
    probs = [np.array([0.3]), np.array([0.8])]
    powers = [0.7, 1.9]
    var = 0.4
    h = entropy_y_given_x(probs, powers, 1.0, var, dim=0)
    means, w, _ = sign_mixture(np.sqrt(powers), probs)
    est, se = mixture_entropy_mc(means + 1.0, w[0], var, 10**6, rng)
    assert abs(h - est) < 3 * se

    hs = entropy_y_given_s(np.array([0.35]), probs, powers, 1.0, var, dim=0)
    means, w, _ = sign_mixture(np.sqrt([1.0] + powers), [np.array([0.35])] + probs)
    est, se = mixture_entropy_mc(means, w[0], var, 10**6, rng)
    assert abs(hs - est) < 3 * se


@st.composite
def mixture_case(draw):
    n_int = draw(st.integers(0, 3))
    probs = [np.array([draw(st.floats(0.0, 1.0))]) for _ in range(n_int)]
    powers = [draw(st.floats(0.01, 10.0)) for _ in range(n_int)]
    own_p = draw(st.floats(0.0, 1.0))
    own_power = draw(st.floats(0.01, 10.0))
    var = draw(st.floats(0.01, 5.0))
    return probs, powers, own_p, own_power, var


@given(mixture_case())
@settings(max_examples=60, deadline=None)
def test_entropy_ordering_and_bounds(case):
    probs, powers, own_p, own_power, var = case
    h_noise = gaussian_entropy(var)
    hx = entropy_y_given_x(probs, powers, own_power, var, dim=0)
    hs = entropy_y_given_s(np.array([own_p]), probs, powers, own_power, var, dim=0)
    assert h_noise - 1e-6 <= hx <= h_noise + len(probs) * np.log(2) + 1e-6
    assert h_noise - 1e-6 <= hs <= h_noise + (len(probs) + 1) * np.log(2) + 1e-6
    assert hs >= hx - 2e-6


@given(mixture_case())
@settings(max_examples=30, deadline=None)
def test_resolution_invariance(case):
    probs, powers, own_p, own_power, var = case
    a = entropy_y_given_s(np.array([own_p]), probs, powers, own_power, var, dim=0)
    b = entropy_y_given_s(np.array([own_p]), probs, powers, own_power, var, dim=0, resolution=2)
    assert abs(a - b) < 2e-6


def test_dimension_factorization():
    rng = np.random.default_rng(3)
    d = 6
    probs = [rng.uniform(size=d), rng.uniform(size=d)]
    per_dim = entropy_y_given_x(probs, [0.5, 2.0], 1.0, 0.3)
    singles = [entropy_y_given_x(probs, [0.5, 2.0], 1.0, 0.3, dim=j) for j in range(d)]
    assert per_dim.shape == (d,)
    assert np.sum(per_dim) == pytest.approx(np.sum(singles), abs=1e-9)


def test_own_symbol_shift_invariance():
    probs = [np.array([0.3])]
    a = entropy_y_given_x(probs, [1.0], 0.5, 0.2, dim=0)
    b = entropy_y_given_x(probs, [1.0], 5.0, 0.2, dim=0)
    assert a == pytest.approx(b, abs=1e-9)


def test_mixture_entropy_weight_gradient():
    rng = np.random.default_rng(5)
    means = np.array([-1.0, 0.2, 1.5])
    w = rng.dirichlet(np.ones(3))
    _, g = mixture_entropy(means, w, 0.3, tol=1e-10, return_grad=True)
    h = 1e-6
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        fd = (mixture_entropy(means, w + e, 0.3, tol=1e-10) - mixture_entropy(means, w - e, 0.3, tol=1e-10)) / (2 * h)
        assert g[k] == pytest.approx(fd, rel=1e-5, abs=1e-8)


def test_entropy_input_validation():
    with pytest.raises(InvalidInputError):
        entropy_y_given_x([np.array([1.5])], [1.0], 1.0, 0.5)
    with pytest.raises(InvalidInputError):
        entropy_y_given_x([np.array([0.5])], [1.0], 1.0, 0.0)
    with pytest.raises(InvalidInputError):
        entropy_y_given_x([np.array([0.5])], [1.0, 2.0], 1.0, 0.5)


def _models(rng, n, input_dim=4, code_dim=6, n_classes=3):
    return [UserModel(nn.make_encoder(input_dim, code_dim, rng), nn.make_decoder(code_dim, 8, n_classes, rng))
            for _ in range(n)]


def test_zero_omega_is_pure_cross_entropy():
    rng = np.random.default_rng(6)
    models = _models(rng, 2)
    inputs = [rng.normal(size=(5, 4)) for _ in range(2)]
    labels = [rng.integers(3, size=5) for _ in range(2)]
    real = ChannelRealization([1.0, 0.8], [0.5, 0.5], [1.0, 1.0])
    noise = rng.standard_normal((1, 2, 5, 6))
    res = rib_loss(inputs, labels, models, 0.0, real, noise=noise)
    # independent evaluation of the decoders' cross-entropy
    codes = np.stack([np.where(nn.predict(m.encoder, s) >= 0, 1.0, -1.0) for m, s in zip(models, inputs)])
    sent = codes.sum(axis=0)
    total = 0.0
    for i, m in enumerate(models):
        y = sent + np.sqrt(0.5) / real.gains[i] * noise[0, i]
        p = nn.predict(m.decoder, y)
        total += np.mean([cross_entropy_term(p[r], labels[i][r]) for r in range(5)])
    assert res.loss == pytest.approx(total, rel=1e-12)


def test_single_user_deterministic_symbols_cancel():
    rng = np.random.default_rng(7)
    enc = nn.MlpParams([3, 4], [np.zeros((4, 3))], [np.full(4, 50.0)], ["tanh"])  # tanh -> exactly 1.0
    model = UserModel(enc, nn.make_decoder(4, 6, 2, rng))
    real = ChannelRealization([1.0], [0.5], [1.0])
    res = rib_loss([rng.normal(size=(3, 3))], [np.array([0, 1, 0])], [model], 0.7, real, rng=1)
    assert res.entropy_x[0] == pytest.approx(res.entropy_s[0], abs=1e-9)
    assert res.loss == pytest.approx(res.cross_entropy[0], abs=1e-8)


def test_rib_loss_gradient_surrogate():
    models, arrays, loss_fn, _ = small_rib_setup(seed=1)
    assert nn.grad_check(lambda a: loss_fn(), arrays, h=1e-5, n_probe=120, rng=3) < 1e-4


def test_rib_loss_entropy_gradient_alone():
    # omega large relative to CE: the entropy part dominates the checked gradient
    models, arrays, loss_fn, _ = small_rib_setup(seed=2, omega=5.0, warm_steps=3)
    assert nn.grad_check(lambda a: loss_fn(), arrays, h=1e-5, n_probe=80, rng=4) < 1e-4


def test_rib_loss_validation():
    rng = np.random.default_rng(8)
    models = _models(rng, 2)
    real = ChannelRealization([1.0, 1.0], [1.0, 1.0], [1.0, 1.0])
    inputs = [rng.normal(size=(4, 4))] * 2
    labels = [np.zeros(4, dtype=int)] * 2
    with pytest.raises(InvalidInputError):
        rib_loss(inputs, labels, models, 0.1, real, mc_samples=0)
    with pytest.raises(InvalidInputError):
        rib_loss([np.zeros((0, 4))] * 2, [np.zeros(0, dtype=int)] * 2, models, 0.1, real)
    with pytest.raises(InvalidInputError):
        rib_loss(inputs, labels, models, 0.1, real, noise=np.zeros((1, 2, 4, 5)))
    with pytest.raises(InvalidInputError):
        rib_loss(inputs[:1], labels[:1], models, 0.1, real)

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from taco.policy import (
    CheckpointError,
    CriticNet,
    PolicyNet,
    lipschitz_bound,
    load_policy,
    max_singular_value,
    save_policy,
    spectral_project,
)


@pytest.fixture
def net():
    return PolicyNet.create(hidden=(16, 16, 16), k_lip=1.5, seed=3)


# --- forward -------------------------------------------------------------------


def test_zero_net_outputs_action_center():
    net = PolicyNet.create(hidden=(8, 8, 8), k_lip=None, seed=0)
    for w in net.mlp.weights:
        w[...] = 0.0
    for b in net.mlp.biases:
        b[...] = 0.0
    a = net.forward(np.random.default_rng(0).normal(size=26))
    assert np.allclose(a, [500.0, 0.0, 0.0, 0.0])


def test_single_layer_hand_forward():
    # one affine layer + tanh, weights small and known
    net = PolicyNet.create(hidden=(), k_lip=None, seed=0)
    net.mlp.weights[0][...] = 0.0
    net.mlp.biases[0][...] = 0.0
    net.mlp.weights[0][0, 0] = 0.01
    net.mlp.weights[0][1, 5] = -0.02
    obs = np.zeros(26)
    obs[0] = 2.0   # scaled by 1/5 -> 0.4
    obs[5] = 1.0   # rotation entry, scale 1
    a = net.forward(obs)
    x0, x5 = 2.0 / 5.0, 1.0
    expected = np.array(
        [500 + 500 * np.tanh(0.01 * x0), 20 * np.tanh(-0.02 * x5), 0.0, 0.0]
    )
    assert np.allclose(a, expected, atol=1e-12)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_actions_always_bounded(seed):
    net = PolicyNet.create(hidden=(12, 12, 12), k_lip=None, seed=1)
    rng = np.random.default_rng(seed)
    obs = rng.normal(scale=50.0, size=(8, 26))
    a = net.forward(obs)
    assert np.all(a[:, 0] >= 0.0) and np.all(a[:, 0] <= 1000.0)
    assert np.all(np.abs(a[:, 1:]) <= 20.0)


def test_dimension_mismatch_rejected(net):
    with pytest.raises(ValueError):
        net.forward(np.zeros(21))


# --- spectral machinery ------------------------------------------------------------


def test_max_singular_value_diagonal():
    sigma, _, _ = max_singular_value(np.diag([2.0, 0.5]))
    assert sigma == pytest.approx(2.0, rel=1e-6)


def test_max_singular_value_orthogonal():
    rng = np.random.default_rng(0)
    q, _ = np.linalg.qr(rng.normal(size=(8, 8)))
    sigma, _, _ = max_singular_value(q, tol=1e-10, iters=200)
    assert sigma == pytest.approx(1.0, abs=1e-4)


def test_max_singular_value_matches_svd():
    rng = np.random.default_rng(1)
    for _ in range(10):
        w = rng.normal(size=(8, 8))
        sigma, _, _ = max_singular_value(w, tol=1e-9, iters=300)
        assert sigma == pytest.approx(np.linalg.svd(w, compute_uv=False)[0], rel=1e-3)


def test_max_singular_value_zero_matrix():
    sigma, _, _ = max_singular_value(np.zeros((4, 4)))
    assert sigma == 0.0


def test_projection_scales_diagonal():
    net = PolicyNet.create(hidden=(2,), k_lip=1.5, seed=0)
    net.mlp.weights[0] = np.zeros((2, 26))
    net.mlp.weights[0][:, :2] = np.diag([2.0, 0.5])
    net.mlp.weights[1] = np.eye(4, 2)
    spectral_project(net)
    assert np.allclose(net.mlp.weights[0][:, :2], np.diag([1.5, 0.375]))
    # already within budget: unchanged
    assert np.allclose(net.mlp.weights[1], np.eye(4, 2))


@given(st.integers(0, 10_000))
@settings(max_examples=20, deadline=None)
def test_projection_satisfies_svd_certificate(seed):
    rng = np.random.default_rng(seed)
    net = PolicyNet.create(hidden=(10, 10), k_lip=1.2, seed=0)
    for w in net.mlp.weights:
        w += rng.normal(scale=0.5, size=w.shape)
    spectral_project(net)
    for w in net.mlp.weights:
        assert np.linalg.svd(w, compute_uv=False)[0] <= 1.2 + 1e-6


def test_biases_untouched_by_projection():
    net = PolicyNet.create(hidden=(8, 8), k_lip=0.5, seed=0)
    for b in net.mlp.biases:
        b[...] = 7.0
    for w in net.mlp.weights:
        w *= 10.0
    spectral_project(net)
    for b in net.mlp.biases:
        assert np.all(b == 7.0)


# --- Lipschitz bound ------------------------------------------------------------------


def test_bound_formula_unit_scalings():
    net = PolicyNet.create(hidden=(16, 16, 16), k_lip=1.5, seed=0)
    net.k_in = np.ones(26)
    net.k_out = np.ones(4)
    assert lipschitz_bound(net) == pytest.approx(1.5**4)


def test_bound_k_one_is_scaling_product():
    net = PolicyNet.create(hidden=(16, 16, 16), k_lip=1.0, seed=0)
    spectral_project(net)
    expected = np.max(np.abs(net.k_in)) * np.max(np.abs(net.k_out))
    assert lipschitz_bound(net) == pytest.approx(expected)


def test_unconstrained_bound_uses_measured_norms():
    net = PolicyNet.create(hidden=(8, 8), k_lip=None, seed=2)
    prod = 1.0
    for w in net.mlp.weights:
        prod *= np.linalg.svd(w, compute_uv=False)[0]
    expected = prod * np.max(np.abs(net.k_in)) * np.max(np.abs(net.k_out))
    assert lipschitz_bound(net) == pytest.approx(expected, rel=1e-3)


def test_sampled_quotients_never_exceed_bound(net):
    bound = lipschitz_bound(net)
    rng = np.random.default_rng(0)
    s1 = rng.normal(scale=3, size=(2000, 26))
    s2 = rng.normal(scale=3, size=(2000, 26))
    q = np.linalg.norm(net.forward(s1) - net.forward(s2), axis=1) / np.linalg.norm(
        s1 - s2, axis=1
    )
    assert np.max(q) <= bound


# --- Gaussian head ---------------------------------------------------------------------


def test_sample_log_prob_round_trip(net):
    rng = np.random.default_rng(0)
    obs = rng.normal(size=(32, 26))
    action, logp, u = net.sample(obs, rng)
    again = net.log_prob(obs, action)
    assert np.allclose(again, logp, atol=1e-9)


def test_tiny_std_sample_equals_mean(net):
    net.log_std[...] = -20.0
    rng = np.random.default_rng(0)
    obs = rng.normal(size=(4, 26))
    action, _, _ = net.sample(obs, rng)
    assert np.allclose(action, net.forward(obs), atol=1e-6)


def test_monte_carlo_mean_matches_forward(net):
    rng = np.random.default_rng(1)
    obs = np.tile(rng.normal(size=26), (100_000, 1))
    action, _, _ = net.sample(obs, rng)
    mean = net.forward(obs[0])
    std = np.exp(net.log_std) * np.abs(net.k_out)
    tol = 3.0 * std / np.sqrt(len(obs))
    assert np.all(np.abs(action.mean(axis=0) - mean) < tol + 1e-9)


def test_entropy_closed_form(net):
    net.log_std[...] = np.array([-1.0, -0.5, 0.0, 0.5])
    expected = float(np.sum(net.log_std) + 2.0 * (1.0 + np.log(2 * np.pi)))
    assert net.entropy() == pytest.approx(expected)


# --- persistence -------------------------------------------------------------------------


def test_save_load_byte_identical(tmp_path, net):
    p1, p2 = str(tmp_path / "a.json"), str(tmp_path / "b.json")
    save_policy(net, p1)
    save_policy(load_policy(p1), p2)
    assert open(p1, "rb").read() == open(p2, "rb").read()


def test_forward_identical_after_round_trip(tmp_path, net):
    path = str(tmp_path / "net.json")
    save_policy(net, path)
    loaded = load_policy(path)
    obs = np.random.default_rng(2).normal(size=(100, 26))
    assert np.array_equal(net.forward(obs), loaded.forward(obs))


def test_quat_checkpoint_rejected_in_mat_pipeline(tmp_path):
    net = PolicyNet.create(obs_mode="quat", hidden=(8, 8), k_lip=1.0, seed=0)
    path = str(tmp_path / "quat.json")
    save_policy(net, path)
    with pytest.raises(CheckpointError):
        load_policy(path, expect_mode="mat")
    loaded = load_policy(path, expect_mode="quat")
    assert loaded.obs_dim == 21


def test_corrupt_checkpoint_rejected(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{\"format\": \"something-else\"}")
    with pytest.raises(CheckpointError):
        load_policy(str(path))
    with pytest.raises(CheckpointError):
        load_policy(str(tmp_path / "missing.json"))


# --- gradients ------------------------------------------------------------------------------


def test_manual_gradient_matches_finite_differences():
    rng = np.random.default_rng(5)
    net = PolicyNet.create(hidden=(10, 10, 10), k_lip=None, seed=4)
    obs = rng.normal(size=(6, 26))
    weights = rng.normal(size=(6, 4))

    def loss():
        return float(np.sum(net.mean_norm(obs) * weights))

    cache = []
    net.mean_norm(obs, cache)
    grads = net.backward(cache, weights)
    eps = 1e-6
    checked = 0
    for li, (dw, db) in enumerate(grads):
        for arr, g in ((net.mlp.weights[li], dw), (net.mlp.biases[li], db)):
            for _ in range(3):
                idx = tuple(rng.integers(0, s) for s in arr.shape)
                old = arr[idx]
                arr[idx] = old + eps
                lp = loss()
                arr[idx] = old - eps
                lm = loss()
                arr[idx] = old
                fd = (lp - lm) / (2 * eps)
                if abs(fd) > 1e-7:   # skip dead rectifier paths
                    assert g[idx] == pytest.approx(fd, rel=1e-4)
                    checked += 1
    assert checked > 10


def test_critic_value_and_gradient():
    rng = np.random.default_rng(6)
    critic = CriticNet.create(hidden=(10, 10), seed=0)
    obs = rng.normal(size=(5, 30))
    cache = []
    v = critic.value(obs, cache)
    assert v.shape == (5,)
    grads = critic.backward(cache, np.ones(5))
    eps = 1e-6
    w = critic.mlp.weights[0]
    idx = (2, 3)
    old = w[idx]
    w[idx] = old + eps
    vp = critic.value(obs).sum()
    w[idx] = old - eps
    vm = critic.value(obs).sum()
    w[idx] = old
    assert grads[0][0][idx] == pytest.approx((vp - vm) / (2 * eps), rel=1e-5)

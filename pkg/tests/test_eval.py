import time

import numpy as np
import pytest

from taco.evals import (
    CertificateReport,
    SweepResult,
    _sweep_metrics,
    flip_scorecard,
    hover_env,
    lipschitz_certificate,
    simulate,
    temporal_smoothness,
    tracking_mse,
    yaw_sweep_policy,
    yaw_sweep_se3,
)
from taco.params import MavParams
from taco.policy import PolicyNet, lipschitz_bound
from taco.rotations import exp_so3


@pytest.fixture
def params():
    return MavParams()


# --- sweep metrics -----------------------------------------------------------------


def test_se3_sweep_reference_signature(params):
    sw = yaw_sweep_se3(params)
    assert sw.independence == 0.0
    assert sw.symmetry < 1e-12
    assert abs(sw.actions[0, 3]) < 1e-9 and abs(sw.actions[-1, 3]) < 1e-9


def test_sweep_metrics_of_odd_function():
    grid = np.linspace(-np.pi, np.pi, 201)
    acts = np.zeros((201, 4))
    acts[:, 3] = np.sin(grid) * 3.0
    m = _sweep_metrics(grid, acts, "odd")
    assert m.symmetry < 1e-12
    assert m.independence == 0.0
    assert m.spatial_slope == pytest.approx(3.0, rel=0.01)


def test_policy_sweep_runs_and_saves(tmp_path, params):
    net = PolicyNet.create(hidden=(8, 8), k_lip=1.0, seed=0)
    sw = yaw_sweep_policy(net, params, n_grid=41, label="tiny")
    path = sw.save(str(tmp_path))
    text = open(path).read().splitlines()
    assert text[0] == "yaw,throttle,wx,wy,wz"
    assert len(text) == 42


def test_sweep_deterministic_bytes(tmp_path, params):
    net = PolicyNet.create(hidden=(8, 8), k_lip=1.0, seed=0)
    a = yaw_sweep_policy(net, params, n_grid=41, label="x")
    b = yaw_sweep_policy(net, params, n_grid=41, label="x")
    pa = a.save(str(tmp_path / "a"))
    pb = b.save(str(tmp_path / "b"))
    assert open(pa, "rb").read() == open(pb, "rb").read()


# --- temporal smoothness --------------------------------------------------------------


def test_smoothness_constant_zero():
    assert temporal_smoothness(np.full(100, 7.0)) == 0.0


def test_smoothness_alternating():
    series = np.array([2.0, -2.0] * 50)
    assert temporal_smoothness(series) == pytest.approx(4 * 2.0**2)


def test_smoothness_short_series_rejected():
    with pytest.raises(ValueError):
        temporal_smoothness(np.array([1.0]))


# --- tracking mse -----------------------------------------------------------------------


def _circle_log(radius, speed, seconds=30.0):
    t = np.arange(0, seconds, 0.01)
    w = speed / radius
    return {
        "t": t,
        "px": radius * np.cos(w * t),
        "py": radius * np.sin(w * t),
        "vx": -speed * np.sin(w * t),
        "vy": speed * np.cos(w * t),
    }


def test_tracking_mse_perfect_circle():
    r_mse, v_mse = tracking_mse(_circle_log(1.2, 5.0), 1.2, 5.0)
    assert r_mse < 1e-12 and v_mse < 1e-12


def test_tracking_mse_radius_offset():
    log = _circle_log(1.3, 5.0)
    r_mse, _ = tracking_mse(log, 1.2, 5.0)
    assert r_mse == pytest.approx(0.01, rel=1e-9)


def test_tracking_mse_window_validated():
    with pytest.raises(ValueError):
        tracking_mse(_circle_log(1.2, 5.0, seconds=10.0), 1.2, 5.0, window=(5.0, 25.0))


def test_tracking_mse_negative_speed_sign():
    log = _circle_log(1.2, -3.0)
    _, v_mse = tracking_mse(log, 1.2, -3.0)
    assert v_mse < 1e-12


# --- flip scorecard ----------------------------------------------------------------------


def _flip_log(n_flips, rate=12.0, dt=0.01):
    total = n_flips * 2 * np.pi
    t = np.arange(0, total / rate + 0.5, dt)
    rolls = np.clip(rate * t, 0, total)
    log = {
        "t": t,
        "px": 0.02 * np.sin(3 * t),
        "pz": 3.0 + 0.05 * np.cos(2 * t),
    }
    rots = np.array([exp_so3(np.array([r, 0, 0])) for r in rolls])
    for i in range(3):
        for j in range(3):
            log[f"r{i}{j}"] = rots[:, i, j]
    return log


def test_flip_scorecard_counts_and_durations():
    rep = flip_scorecard(_flip_log(3))
    assert rep.flips == 3
    assert len(rep.durations) == 3
    for d in rep.durations:
        assert d == pytest.approx(2 * np.pi / 12.0, abs=0.02)
    assert rep.tiltage.min() == pytest.approx(-1.0, abs=1e-2)   # grid skims past pi
    assert rep.tiltage.max() == pytest.approx(1.0, abs=1e-9)
    assert rep.out_of_plane < 0.05
    assert rep.altitude_dev < 0.11


def test_flip_scorecard_upright_hover():
    t = np.arange(0, 1, 0.01)
    log = {"t": t, "px": np.zeros_like(t), "pz": np.full_like(t, 3.0)}
    eye = np.eye(3)
    for i in range(3):
        for j in range(3):
            log[f"r{i}{j}"] = np.full_like(t, eye[i, j])
    rep = flip_scorecard(log)
    assert rep.flips == 0
    assert np.all(rep.tiltage == 1.0)


# --- certificate -------------------------------------------------------------------------


def test_certificate_unit_scalings_bound_one():
    net = PolicyNet.create(hidden=(12, 12, 12), k_lip=1.0, seed=0)
    net.k_in = np.ones(26)
    net.in_shift = np.zeros(26)
    net.k_out = np.ones(4)
    net.out_shift = np.zeros(4)
    rep = lipschitz_certificate(net, pairs=2000, seed=0)
    assert rep.bound == pytest.approx(1.0)
    assert rep.passed
    assert rep.max_quotient <= 1.0


def test_certificate_trained_scalings(params):
    net = PolicyNet.create(hidden=(16, 16, 16), k_lip=1.5, seed=1)
    rep = lipschitz_certificate(net, pairs=5000, seed=1)
    assert rep.bound == pytest.approx(1.5**4 * 1.0 * 500.0)
    assert rep.passed


def test_certificate_unconstrained_fallback():
    net = PolicyNet.create(hidden=(8, 8), k_lip=None, seed=3)
    rep = lipschitz_certificate(net, pairs=1000, seed=0)
    assert rep.bound > 0
    assert rep.passed


def test_certificate_runtime_budget():
    net = PolicyNet.create(k_lip=1.5, seed=0)   # full-size 3x128 net
    t0 = time.perf_counter()
    lipschitz_certificate(net, pairs=10_000, seed=0)
    assert time.perf_counter() - t0 < 5.0


# --- simulate harness ----------------------------------------------------------------------


def test_simulate_logs_and_replays(tmp_path, params):
    from taco.controllers import Se3TaskController
    from taco.logs import read_trajectory

    env = hover_env("pos", params=params, seed=0)
    ctl = Se3TaskController(params)
    path = str(tmp_path / "traj.csv")
    out = simulate(ctl, env, 50, log_path=path)
    log = read_trajectory(path)
    assert len(log["t"]) == 50
    assert np.allclose(log["px"], out["p"][:, 0], atol=1e-9)
    assert np.allclose(log["reward"], out["reward"], atol=1e-12)

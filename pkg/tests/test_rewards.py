import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial.transform import Rotation

from taco.rewards import (
    ATT_LAMBDA,
    RewardConfig,
    RewardTerm,
    max_reward,
    reward_circle,
    reward_flip,
    reward_pos,
    sub_reward,
)
from taco.rotations import exp_so3, random_rotation, rotation_angle, yaw_rotation


def test_sub_reward_at_zero_is_n():
    term = RewardTerm((0.3, 7.0, 55.0))
    assert sub_reward(np.zeros(3), term) == pytest.approx(3.0)
    assert sub_reward(0.0, term) == pytest.approx(3.0)


def test_sub_reward_unit_point():
    assert sub_reward(1.0, RewardTerm((1.0,))) == pytest.approx(0.5)


def test_sub_reward_two_scale_value():
    # lambda = [1, 100], n = 2, ||x|| = 0.1
    val = sub_reward(0.1, RewardTerm((1.0, 100.0)))
    assert val == pytest.approx(1.0 / 1.01 + 0.5, abs=1e-9)
    assert val == pytest.approx(1.490099, abs=1e-6)


def test_sub_reward_rejects_bad_coefficients():
    with pytest.raises(ValueError):
        RewardTerm(())
    with pytest.raises(ValueError):
        RewardTerm((1.0, -2.0))


@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3))
@settings(max_examples=40)
def test_sub_reward_rotation_invariant(x):
    term = RewardTerm((2.0, 30.0))
    rng = np.random.default_rng(abs(hash(tuple(x))) % 2**32)
    r = random_rotation(rng)
    assert sub_reward(np.array(x), term) == pytest.approx(
        sub_reward(r @ np.array(x), term), rel=1e-11
    )


@given(st.floats(0.01, 10.0), st.floats(1.01, 3.0))
@settings(max_examples=30)
def test_sub_reward_strictly_decreasing(norm, factor):
    term = RewardTerm((1.0, 100.0))
    assert sub_reward(norm * factor, term) < sub_reward(norm, term)


def test_pos_reward_maximal_at_target():
    cfg = RewardConfig()
    top = reward_pos(np.zeros(3), 0.0, cfg)
    assert top == pytest.approx(max_reward(0.0, cfg))
    assert reward_pos(np.array([0.1, 0, 0]), 0.0, cfg) < top
    assert reward_pos(np.zeros(3), 0.3, cfg) < top


def test_pos_angle_from_trace_matches_quaternion_oracle():
    rng = np.random.default_rng(7)
    for _ in range(25):
        r = random_rotation(rng)
        ang = rotation_angle(r)
        # oracle: quaternion scalar part
        q = Rotation.from_matrix(r).as_quat()
        expected = 2.0 * np.arccos(np.clip(abs(q[3]), 0, 1))
        assert ang == pytest.approx(expected, abs=1e-9)
    assert rotation_angle(yaw_rotation(np.pi)) == pytest.approx(np.pi)


def test_circle_reward_all_factors_max_on_manifold():
    cfg = RewardConfig()
    # on the ring at radius r*, same altitude, moving tangentially at v*,
    # nose to the center
    r_star, v_star = 1.2, 3.0
    p_rel = np.array([-r_star, 0.0, 0.0])        # center minus vehicle
    v = np.array([0.0, v_star, 0.0])             # CCW tangent at (r, 0)
    body_x = np.array([-1.0, 0.0, 0.0])          # toward center
    total, terms = reward_circle(p_rel, v, body_x, r_star, v_star, cfg)
    assert total == pytest.approx(max_reward(1.0, cfg))
    for key in ("altitude", "radius", "speed", "heading"):
        assert terms[key] == pytest.approx(
            getattr(cfg, key).n if key != "heading" else cfg.heading.n
        )


def test_circle_reward_altitude_term_only():
    cfg = RewardConfig()
    p_rel = np.array([-1.2, 0.0, 1.0])           # vehicle 1 m below the center
    v = np.array([0.0, 3.0, 0.0])
    body_x = np.array([-1.0, 0.0, 0.0])
    total, terms = reward_circle(p_rel, v, body_x, 1.2, 3.0, cfg)
    assert terms["altitude"] == pytest.approx(sub_reward(1.0, cfg.altitude))
    assert terms["radius"] == pytest.approx(cfg.radius.n)
    assert terms["speed"] == pytest.approx(cfg.speed.n)


def test_circle_reward_radius_argument():
    cfg = RewardConfig()
    # horizontal distance 1.5 against r* = 1.2: the radius factor sees 0.3
    p_rel = np.array([-1.5, 0.0, 0.0])
    v = np.array([0.0, 3.0, 0.0])
    body_x = np.array([-1.0, 0.0, 0.0])
    _, terms = reward_circle(p_rel, v, body_x, 1.2, 3.0, cfg)
    assert terms["radius"] == pytest.approx(sub_reward(0.3, cfg.radius))


def test_circle_velocity_sign_convention():
    cfg = RewardConfig()
    p_rel = np.array([-1.2, 0.0, 0.0])
    body_x = np.array([-1.0, 0.0, 0.0])
    ccw = np.array([0.0, 2.0, 0.0])
    _, terms = reward_circle(p_rel, ccw, body_x, 1.2, -2.0, cfg)
    assert terms["v_perp"] == pytest.approx(2.0)
    # a negative command matches clockwise motion
    _, terms = reward_circle(p_rel, -ccw, body_x, 1.2, -2.0, cfg)
    assert terms["v_perp"] == pytest.approx(-2.0)
    assert terms["speed"] == pytest.approx(cfg.speed.n)


def test_circle_degenerate_center_uses_memory():
    cfg = RewardConfig()
    p_rel = np.array([0.001, 0.002, 0.0])   # under 1 cm from the axis
    v = np.array([0.0, 2.0, 0.0])
    body_x = np.array([1.0, 0.0, 0.0])
    total, terms = reward_circle(
        p_rel, v, body_x, 1.2, 2.0, cfg, tangent_memory=np.array([1.0, 0.0])
    )
    assert np.isfinite(total)
    assert terms["v_perp"] == pytest.approx(2.0)


def test_flip_reward_hover_max_and_midflip():
    cfg = RewardConfig()
    top = reward_flip(np.zeros(3), np.array([1.0, 0, 0]), np.array([1.0, 0, 0]), 0.0, cfg)
    assert top == pytest.approx(max_reward(-1.0, cfg))
    # rolled 90 degrees about x: the x axes stay aligned
    r = exp_so3(np.array([np.pi / 2, 0, 0]))
    mid = reward_flip(np.zeros(3), r[:, 0], np.array([1.0, 0, 0]), np.pi, cfg)
    assert mid == pytest.approx(
        cfg.position.n * cfg.attitude.n * sub_reward(np.pi, cfg.flip_left)
    )


def test_flip_remaining_two_pi_value():
    cfg = RewardConfig()
    val = reward_flip(np.zeros(3), np.array([1.0, 0, 0]), np.array([1.0, 0, 0]), 2 * np.pi, cfg)
    expected = cfg.position.n * cfg.attitude.n * sum(
        1.0 / (1.0 + l * (2 * np.pi) ** 2) for l in cfg.flip_left.lams
    )
    assert val == pytest.approx(expected, rel=1e-12)


def test_reward_bounds():
    cfg = RewardConfig()
    rng = np.random.default_rng(11)
    for _ in range(50):
        p = rng.normal(0, 3, 3)
        ang = rng.uniform(0, np.pi)
        val = reward_pos(p, ang, cfg)
        assert 0.0 < val <= max_reward(0.0, cfg)

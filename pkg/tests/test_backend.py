"""The three stepping implementations (scalar reference, vectorized numpy,
compiled kernel) must agree; each backend must be bit-deterministic."""

import numpy as np
import pytest

from taco.backend import HAVE_COMPILED, VecParams, VecState, select_backend, step_envs
from taco.dynamics import Action, hover_state, step_with_action
from taco.params import MavParams

BACKENDS = ["numpy"] + (["compiled"] if HAVE_COMPILED else [])


def _seeded_state(n, params, seed=0):
    rng = np.random.default_rng(seed)
    st = VecState.zeros(n)
    st.p[:] = rng.normal([0, 0, 5.0], 1.0, (n, 3))
    st.v[:] = rng.normal(0, 1.0, (n, 3))
    st.w[:] = rng.normal(0, 2.0, (n, 3))
    st.motor[:] = rng.uniform(800, 2000, (n, 4))
    st.voltage[:] = params.v_nominal
    from taco.rotations import exp_so3_batch

    st.r[:] = exp_so3_batch(rng.normal(0, 0.8, (n, 3)))
    return st


@pytest.mark.parametrize("backend", BACKENDS)
def test_backend_matches_scalar_reference(backend):
    params = MavParams()
    s = hover_state(params)
    s.v = np.array([0.5, -0.3, 0.2])
    s.w = np.array([0.4, -0.2, 0.1])
    st = VecState.zeros(1)
    st.p[0], st.v[0], st.r[0], st.w[0] = s.p, s.v, s.r, s.w
    st.motor[0], st.voltage[0] = s.motor, s.voltage
    vp = VecParams.nominal(params, 1)
    action = Action(throttle=320.0, rates=np.array([1.0, -2.0, 0.5]))
    ref = s.copy()
    for _ in range(20):
        ref, _ = step_with_action(ref, action, params)
        step_envs(st, action.as_array()[None, :], vp, backend=backend)
    for got, want in [
        (st.p[0], ref.p), (st.v[0], ref.v), (st.r[0], ref.r),
        (st.w[0], ref.w), (st.motor[0], ref.motor),
    ]:
        assert np.allclose(got, want, rtol=1e-9, atol=1e-10)
    assert st.voltage[0] == pytest.approx(ref.voltage, abs=1e-12)


@pytest.mark.skipif(not HAVE_COMPILED, reason="extension not built")
def test_numpy_and_compiled_agree():
    params = MavParams()
    vp = VecParams.nominal(params, 16)
    a = _seeded_state(16, params)
    b = _seeded_state(16, params)
    rng = np.random.default_rng(5)
    for _ in range(40):
        act = rng.uniform([0, -15, -15, -15], [1000, 15, 15, 15], (16, 4))
        step_envs(a, act.copy(), vp, backend="numpy")
        step_envs(b, act.copy(), vp, backend="compiled")
    assert np.allclose(a.p, b.p, atol=1e-10)
    assert np.allclose(a.r, b.r, atol=1e-11)
    assert np.allclose(a.motor, b.motor, rtol=1e-11)


@pytest.mark.parametrize("backend", BACKENDS)
def test_backend_bit_deterministic(backend):
    params = MavParams()
    vp = VecParams.nominal(params, 8)
    runs = []
    for _ in range(2):
        st = _seeded_state(8, params, seed=3)
        for k in range(30):
            act = np.tile([400.0, 1.0, -0.5, 2.0], (8, 1))
            step_envs(st, act, vp, backend=backend)
        runs.append((st.p.copy(), st.r.copy(), st.motor.copy(), st.voltage.copy()))
    for x, y in zip(*runs):
        assert np.array_equal(x, y)


@pytest.mark.parametrize("backend", BACKENDS)
def test_fault_flag_on_nonfinite(backend):
    params = MavParams()
    vp = VecParams.nominal(params, 2)
    st = _seeded_state(2, params)
    st.p[1, 2] = np.nan
    _, _, fault = step_envs(st, np.zeros((2, 4)), vp, backend=backend)
    assert not fault[0]
    assert fault[1]


def test_env_override_selects_backend(monkeypatch):
    monkeypatch.setenv("TACO_BACKEND", "numpy")
    assert select_backend() == "numpy"
    monkeypatch.delenv("TACO_BACKEND")
    if HAVE_COMPILED:
        assert select_backend() == "compiled"


@pytest.mark.skipif(not HAVE_COMPILED, reason="extension not built")
def test_compiled_meets_step_budget():
    # 2048 envs x 10 inner steps in < 50 ms
    import time

    params = MavParams()
    vp = VecParams.nominal(params, 2048)
    st = _seeded_state(2048, params)
    act = np.tile([244.0, 0.2, -0.1, 0.05], (2048, 1))
    step_envs(st, act, vp, backend="compiled")  # warm
    t0 = time.perf_counter()
    reps = 5
    for _ in range(reps):
        step_envs(st, act, vp, backend="compiled")
    assert (time.perf_counter() - t0) / reps < 0.050

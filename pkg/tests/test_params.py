import json

import numpy as np
import pytest

from taco.params import MavParams


def test_defaults_match_airframe():
    p = MavParams()
    assert p.mass == pytest.approx(0.46)
    # motor-to-motor diagonal distance
    assert np.linalg.norm(p.arms[0] - p.arms[2]) == pytest.approx(0.149)
    assert p.hover_thrust == pytest.approx(0.46 * 9.81)
    # full throttle at nominal voltage delivers the 4.1 thrust-to-weight ratio
    full = 4.0 * p.k_force * p.max_motor_speed(p.v_nominal) ** 2
    assert full == pytest.approx(4.1 * p.mass * 9.81, rel=1e-9)


def test_invariants_enforced():
    with pytest.raises(ValueError):
        MavParams(mass=-1.0)
    with pytest.raises(ValueError):
        MavParams(spin=np.array([1.0, 1.0, -1.0, -1.0]) * 2)
    with pytest.raises(ValueError):
        MavParams(inertia=np.diag([1e-3, 1e-3, -1e-3]))
    bad_arms = MavParams().arms.copy()
    bad_arms[0] += 0.01
    with pytest.raises(ValueError):
        MavParams(arms=bad_arms)


def test_spin_signs_balanced():
    p = MavParams()
    assert p.spin.sum() == 0
    assert sorted(p.spin) == [-1, -1, 1, 1]


def test_dump_load_round_trip(tmp_path):
    p = MavParams(mass=0.5, k_motor=0.02)
    path = tmp_path / "params.json"
    p.dump(str(path))
    q = MavParams.from_file(str(path))
    assert q.mass == p.mass
    assert q.k_motor == p.k_motor
    assert np.allclose(q.inertia, p.inertia)
    # dump is valid JSON with every field present
    doc = json.loads(p.dump())
    assert {"mass", "inertia", "k_force", "arms", "spin"} <= set(doc)


def test_allocation_matrix_invertible():
    p = MavParams()
    b = p.allocation_matrix()
    assert np.linalg.cond(b) < 1e6
    ident = b @ np.linalg.inv(b)
    assert np.allclose(ident, np.eye(4), atol=1e-10)

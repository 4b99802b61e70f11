import math
from dataclasses import replace

import numpy as np
import pytest

from haptica_codex.categories import Category
from haptica_codex.errors import UnstableIntegration
from haptica_engine.contact_sim import SimScenario, simulate
from haptica_engine.dataset import DatasetSpec, nominal_scenario, parse_condition


def test_scenario_validation():
    with pytest.raises(ValueError):
        SimScenario(mu_s=0.2, mu_k=0.4)
    with pytest.raises(ValueError):
        SimScenario(x0_obj=0.03)
    with pytest.raises(ValueError):
        SimScenario(m_arm=0.0)


def test_free_arm_settles_at_goal():
    sc = SimScenario(x0_obj=5.0, duration=3.0, eq_velocity=math.inf)
    traj = simulate(sc)
    assert traj.x_arm[-1] == pytest.approx(sc.x_eq_goal, abs=1e-4)
    assert np.all(traj.F_surf == 0.0)
    assert traj.contact_onset_time is None


@pytest.mark.parametrize("k_act", [16.4, 200.0, 2000.0])
def test_undamped_free_spring_conserves_energy(k_act):
    sc = SimScenario(
        k_act=k_act, b_arm=0.0, mu_s=0.0, mu_k=0.0, x0_obj=5.0, eq_velocity=math.inf, duration=1.0
    )
    energy = simulate(sc).energy(sc)
    assert np.max(np.abs(energy - energy[0])) / energy[0] < 1e-3


def test_rigid_fixed_reaches_series_spring_force():
    sc = SimScenario(duration=6.0)
    traj = simulate(sc)
    penetration = sc.x_eq_goal - sc.contact_position
    expected = sc.series_stiffness * penetration
    assert traj.F_surf[-1] == pytest.approx(expected, rel=0.01)


@pytest.mark.parametrize("category", list(Category))
@pytest.mark.parametrize("condition", ["nominal:nominal", "low:low", "high:low"])
def test_halving_step_barely_moves_final_state(category, condition):
    spec = DatasetSpec(duration=2.0)
    coarse = nominal_scenario(category, parse_condition(condition), spec)
    fine = replace(coarse, dt=coarse.dt / 2)
    assert simulate(fine).x_arm[-1] == pytest.approx(simulate(coarse).x_arm[-1], rel=0.005)


def test_contact_force_is_compression_only():
    traj = simulate(SimScenario(fixed=False, m_obj=0.02, k_obj=50.0, mu_s=0.5, mu_k=0.3))
    assert np.all(traj.F_surf >= 0.0)
    separated = (traj.x_obj - traj.x_arm) >= 0.05
    assert np.all(traj.F_surf[separated] == 0.0)


def test_fixed_object_never_moves():
    traj = simulate(SimScenario(fixed=True))
    assert np.all(traj.x_obj == traj.x_obj[0])


def test_movable_object_sticks_until_breakaway():
    sc = SimScenario(fixed=False, duration=2.0)
    traj = simulate(sc)
    moved = np.flatnonzero(traj.x_obj != sc.x0_obj)
    assert moved.size > 0
    first_motion = moved[0]
    # The step that first exceeds the static limit releases the object.
    assert np.all(traj.F_surf[: first_motion - 1] <= sc.static_limit)
    assert traj.F_surf[first_motion - 1] > sc.static_limit


def test_sliding_object_plateaus_near_kinetic_friction():
    sc = SimScenario(fixed=False, m_obj=0.02, k_obj=50.0, mu_s=0.5, mu_k=0.3, duration=2.5)
    traj = simulate(sc)
    # Stick-slip: averaged over the slide the push balances friction.
    tail = traj.F_surf[-5000:]
    assert 0.2 * sc.kinetic_force < np.mean(tail) <= sc.static_limit
    assert np.max(traj.F_surf) < 10 * sc.static_limit


def _first_above(traj, force):
    return int(np.argmax(traj.F_surf > force))


def test_rigid_fixed_force_exceeds_soft_fixed():
    rigid = simulate(SimScenario(duration=2.5))
    soft = simulate(SimScenario(k_obj=50.0, m_obj=0.02, mu_s=0.5, mu_k=0.3, duration=2.5))
    assert rigid.F_surf.max() > soft.F_surf.max()
    assert _first_above(rigid, 5.0) < _first_above(soft, 5.0)


def test_oversized_step_is_reported():
    with pytest.raises(UnstableIntegration):
        simulate(SimScenario(k_obj=5e6, dt=1e-2, duration=5.0))

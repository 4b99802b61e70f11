import numpy as np
import pytest

from haptica_codex.categories import Category, Condition
from haptica_codex.errors import ConfigError, UnstableIntegration
from haptica_codex.features import extract_features
from haptica_codex.formats import read_manifest
from haptica_engine import dataset
from haptica_engine.contact_sim import SimTrajectory, simulate
from haptica_engine.dataset import (
    STIFFNESS_SETTINGS,
    VELOCITY_SETTINGS,
    DatasetSpec,
    TrialJob,
    generate_dataset,
    load_dataset,
    nominal_scenario,
    parse_condition,
    simulate_trial,
    trial_seed,
)
from haptica_engine.rendering import RenderParams, render_taxels


def _constant_trajectory(force, n_steps=1001, dt=1e-3):
    t = np.arange(n_steps) * dt
    zeros = np.zeros(n_steps)
    return SimTrajectory(
        t, zeros, zeros + 0.06, zeros, zeros, zeros, np.full(n_steps, force), zeros, None, dt
    )


def test_zero_force_renders_empty_trial():
    trial = render_taxels(_constant_trajectory(0.0), RenderParams(), 100.0)
    assert len(trial) == 101
    assert trial.stacked().sum() == 0.0


def test_force_is_split_evenly_over_the_patch():
    params = RenderParams(area_gain=1.0)
    trial = render_taxels(_constant_trajectory(4.0), params, 100.0)
    frame = trial.frames[10].forces
    assert np.count_nonzero(frame) == 4
    np.testing.assert_allclose(frame[frame > 0], 1.0)
    assert frame.sum() == pytest.approx(4.0)


def test_render_carries_arm_position_and_labels():
    trial = render_taxels(
        _constant_trajectory(1.0), RenderParams(), 100.0, 0.3, Category.SM, Condition("low", "low")
    )
    assert trial.label is Category.SM
    assert trial.condition == Condition("low", "low")
    assert trial.contact_threshold == 0.3
    assert trial.arm_position.shape == (101,)


def test_soft_gain_gives_larger_area():
    traj = _constant_trajectory(3.0)
    rigid = extract_features(render_taxels(traj, RenderParams(area_gain=0.2), 100.0, 0.1), 0.5)
    soft = extract_features(render_taxels(traj, RenderParams(area_gain=8.0), 100.0, 0.1), 0.5)
    assert soft.area.min() > rigid.area.max()


def test_noise_is_non_negative_and_seeded():
    params = RenderParams(noise_std=0.05, seed=3)
    first = render_taxels(_constant_trajectory(2.0), params, 100.0).stacked()
    second = render_taxels(_constant_trajectory(2.0), params, 100.0).stacked()
    assert first.min() >= 0.0
    np.testing.assert_array_equal(first, second)


def test_footprint_must_fit_the_grid():
    with pytest.raises(ValueError):
        RenderParams(contact_center=(1.0, 1.0), max_radius=5.0)
    with pytest.raises(ValueError):
        RenderParams(noise_std=-1.0)


def test_sample_rate_cannot_exceed_integration_rate():
    with pytest.raises(ValueError):
        render_taxels(_constant_trajectory(1.0), RenderParams(), 2000.0)


def test_joint_settings_map_through_the_lever():
    assert VELOCITY_SETTINGS["low"] == pytest.approx(0.0305, abs=1e-4)
    assert VELOCITY_SETTINGS["high"] == pytest.approx(0.122, abs=1e-3)
    assert STIFFNESS_SETTINGS["low"] == pytest.approx(16.4, abs=0.05)
    assert STIFFNESS_SETTINGS["high"] == pytest.approx(164.0, abs=0.5)


def test_parse_condition():
    assert parse_condition("low:high") == Condition("low", "high")
    with pytest.raises(ValueError):
        parse_condition("slow:high")


def test_presets():
    assert DatasetSpec.preset("stereotyped").n_trials == 80
    assert DatasetSpec.preset("conditions").n_trials == 240
    with pytest.raises(ConfigError):
        DatasetSpec.preset("nope")


def test_spec_validation():
    with pytest.raises(ConfigError):
        DatasetSpec(trials_per_cell=0)
    with pytest.raises(ConfigError):
        DatasetSpec(categories=["XX"])


def test_trial_seeds_differ_per_cell():
    seeds = {trial_seed(0, c, k, t) for c in range(4) for k in range(4) for t in range(4)}
    assert len(seeds) == 64
    assert trial_seed(1, 0, 0, 0) != trial_seed(0, 0, 0, 0)


def _small_spec():
    return DatasetSpec(
        conditions=["low:low", "low:high", "high:low", "high:high"],
        trials_per_cell=4,
        duration=1.5,
    )


def test_generate_counts_trials(tmp_path):
    result = generate_dataset(_small_spec(), tmp_path, seed=5)
    assert result.failures == []
    assert len(result.entries) == 64
    assert len(list(tmp_path.glob("trial_*.csv"))) == 64
    manifest = read_manifest(tmp_path / "manifest.csv")
    assert len(manifest) == 64
    assert {entry.label for entry in manifest} == {"RF", "RM", "SF", "SM"}
    assert (tmp_path / "dataset.yaml").exists()


def test_generation_is_reproducible(tmp_path):
    spec = DatasetSpec(trials_per_cell=2, duration=1.0)
    generate_dataset(spec, tmp_path / "a", seed=9)
    generate_dataset(spec, tmp_path / "b", seed=9, jobs=2)
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert names == sorted(p.name for p in (tmp_path / "b").iterdir())
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_loaded_dataset_matches_manifest(tmp_path):
    generate_dataset(DatasetSpec(trials_per_cell=2, duration=1.0), tmp_path, seed=1)
    trials = load_dataset(tmp_path)
    assert [t.label for t in trials] == [c for c in Category for _ in range(2)]
    assert all(t.arm_position is not None for t in trials)


def test_fixed_categories_move_less():
    spec = DatasetSpec(trials_per_cell=1, duration=2.5)
    displacement = {}
    for category in Category:
        trial = simulate_trial(TrialJob(0, category, Condition(), trial_seed(0, category.order), spec))
        displacement[category] = extract_features(trial).d.max()
    assert displacement[Category.RM] > displacement[Category.RF]
    assert displacement[Category.SM] > displacement[Category.SF]


def test_failed_trial_aborts_its_cell(tmp_path, monkeypatch):
    calls = []

    def flaky(scenario):
        calls.append(scenario)
        # Second trial of the rigid-movable cell.
        if len(calls) == 4:
            raise UnstableIntegration("state left the bound")
        return simulate(scenario)

    monkeypatch.setattr(dataset, "simulate", flaky)
    result = generate_dataset(DatasetSpec(trials_per_cell=2, duration=1.0), tmp_path, seed=4)
    assert result.failures == [(3, "state left the bound")]
    assert result.aborted_cells == [(Category.RM, Condition())]
    manifest = read_manifest(tmp_path / "manifest.csv")
    assert [entry.label for entry in manifest] == ["RF", "RF", "SF", "SF", "SM", "SM"]
    assert not (tmp_path / "trial_0002.csv").exists()


def test_contact_location_shifts_the_lever_arm():
    spec = DatasetSpec()
    near = nominal_scenario(Category.RF, Condition(), spec, lever=0.3)
    nominal = nominal_scenario(Category.RF, Condition(), spec)
    assert nominal.k_act == pytest.approx(200.0)
    assert nominal.eq_velocity == pytest.approx(VELOCITY_SETTINGS["nominal"])
    assert near.k_act > nominal.k_act
    assert near.eq_velocity < nominal.eq_velocity
    with pytest.raises(ConfigError):
        DatasetSpec(contact_span=8.0)

"""
Labelled synthetic dataset generation from the lumped contact model.

Robot settings are given in joint space (deg/s, Nm/rad) and converted to the
1-DOF model through a 0.35 m lever arm. Each trial touches the forearm at a
different point along the skin, which shifts the lever arm and with it the
linear stiffness and speed the object sees.
"""

import math
from concurrent import futures
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np
import structlog
import yaml

from haptica_codex.categories import CATEGORY_ORDER, Category, Condition, format_label
from haptica_codex.config import load_flat_config
from haptica_codex.errors import ConfigError, HapticaError, TrialFormatError
from haptica_codex.formats import ManifestEntry, read_manifest, read_trial, write_manifest, write_trial
from haptica_codex.taxels import DEFAULT_COLS, DEFAULT_PITCH, DEFAULT_ROWS, TaxelTrial

from .contact_sim import SimScenario, simulate
from .rendering import RenderParams, render_taxels


logger = structlog.get_logger()

LEVER_ARM = 0.35  # m
MANIFEST_NAME = "manifest.csv"


def joint_velocity_to_linear(deg_per_s: float) -> float:
    return math.radians(deg_per_s) * LEVER_ARM


def joint_stiffness_to_linear(nm_per_rad: float) -> float:
    return nm_per_rad / (LEVER_ARM * LEVER_ARM)


# Equilibrium-point speed (m/s) and actuator stiffness (N/m) per setting.
VELOCITY_SETTINGS: Dict[str, float] = {
    "low": joint_velocity_to_linear(5.0),
    "high": joint_velocity_to_linear(20.0),
    "nominal": joint_velocity_to_linear(20.0),
}
STIFFNESS_SETTINGS: Dict[str, float] = {
    "low": joint_stiffness_to_linear(2.01),
    "high": joint_stiffness_to_linear(20.1),
    "nominal": 200.0,
}


@dataclass(frozen=True)
class MaterialPreset:
    """Nominal object parameters before per-trial jitter."""

    k_obj: float
    m_obj: float
    mu_s: float
    mu_k: float
    area_gain: float  # taxels per N


RIGID = MaterialPreset(k_obj=5000.0, m_obj=1.5, mu_s=0.4, mu_k=0.2, area_gain=0.2)
SOFT = MaterialPreset(k_obj=50.0, m_obj=0.02, mu_s=0.5, mu_k=0.3, area_gain=8.0)


def material_for(category: Category) -> MaterialPreset:
    return RIGID if category.rigid else SOFT


def parse_condition(text: str) -> Condition:
    """Parse 'velocity:stiffness', e.g. 'low:high'."""
    parts = text.split(":")
    if len(parts) != 2:
        raise ValueError(f"condition must look like 'velocity:stiffness', got '{text}'")
    velocity, stiffness = (part.strip() for part in parts)
    if velocity not in VELOCITY_SETTINGS:
        raise ValueError(f"unknown velocity setting '{velocity}'")
    if stiffness not in STIFFNESS_SETTINGS:
        raise ValueError(f"unknown stiffness setting '{stiffness}'")
    return Condition(velocity, stiffness)


@dataclass
class DatasetSpec:
    """Categories x conditions x trials-per-cell and the shared simulation settings."""

    categories: List[str] = field(default_factory=lambda: [c.value for c in CATEGORY_ORDER])
    conditions: List[str] = field(default_factory=lambda: ["nominal:nominal"])
    trials_per_cell: int = 20

    # Simulation
    duration: float = 2.5
    dt: float = 1e-4
    m_arm: float = 0.5
    rest_length: float = 0.05
    contact_gap: float = 0.01
    x_eq_goal: float = 0.5
    jitter: float = 0.2
    # Contacts land up to this many taxel rows either side of the sensor centre.
    contact_span: float = 6.0

    # Rendering
    sample_rate: float = 100.0
    contact_threshold: float = 0.02
    noise_std: float = 0.002
    max_radius: float = 5.0
    center_jitter: float = 1.0

    def __post_init__(self):
        if self.trials_per_cell < 1:
            raise ConfigError("must be >= 1", field="trials_per_cell")
        if not self.categories:
            raise ConfigError("must list at least one category", field="categories")
        for name in self.categories:
            try:
                Category(name)
            except ValueError:
                raise ConfigError(f"unknown category '{name}'", field="categories") from None
        if not self.conditions:
            raise ConfigError("must list at least one condition", field="conditions")
        for text in self.conditions:
            try:
                parse_condition(text)
            except ValueError as e:
                raise ConfigError(str(e), field="conditions") from None
        if not 0 <= self.jitter < 1:
            raise ConfigError("must be in [0, 1)", field="jitter")
        if self.contact_span < 0 or self.contact_span + self.max_radius > (DEFAULT_ROWS - 1) / 2:
            raise ConfigError("contact patch would leave the sensor rows", field="contact_span")
        if self.center_jitter < 0 or self.center_jitter + self.max_radius > (DEFAULT_COLS - 1) / 2:
            raise ConfigError("contact patch would leave the sensor columns", field="center_jitter")

    @property
    def category_list(self) -> List[Category]:
        return [Category(name) for name in self.categories]

    @property
    def condition_list(self) -> List[Condition]:
        return [parse_condition(text) for text in self.conditions]

    @property
    def n_trials(self) -> int:
        return len(self.categories) * len(self.conditions) * self.trials_per_cell

    @classmethod
    def preset(cls, name: str) -> "DatasetSpec":
        if name not in DATASET_PRESETS:
            raise ConfigError(
                f"unknown preset '{name}', expected one of {', '.join(DATASET_PRESETS)}",
                field="generate",
            )
        return DATASET_PRESETS[name]()

    @classmethod
    def load(cls, config_file: Path) -> "DatasetSpec":
        return load_flat_config(Path(config_file), cls)

    def save(self, config_file: Path):
        with open(config_file, "w") as f:
            yaml.dump(asdict(self), f, default_flow_style=False, sort_keys=False)


DATASET_PRESETS = {
    # Stereotyped reaching motion at the nominal robot setting.
    "stereotyped": lambda: DatasetSpec(conditions=["nominal:nominal"], trials_per_cell=20),
    # Two velocities x two stiffnesses, 240 trials in total.
    "conditions": lambda: DatasetSpec(
        conditions=["low:low", "low:high", "high:low", "high:high"], trials_per_cell=15
    ),
}


@dataclass(frozen=True)
class TrialJob:
    """Everything needed to simulate and render one trial in a worker."""

    index: int
    category: Category
    condition: Condition
    seed: int
    spec: DatasetSpec


@dataclass
class DatasetResult:
    entries: List[ManifestEntry] = field(default_factory=list)
    failures: List[Tuple[int, str]] = field(default_factory=list)
    # (category, condition) cells left out because one of their trials failed.
    aborted_cells: List[Tuple[Category, Condition]] = field(default_factory=list)


def trial_seed(master_seed: int, *cell: int) -> int:
    """Per-trial seed derived from the master seed and the cell indices."""
    return int(np.random.SeedSequence([master_seed, *cell]).generate_state(1)[0])


def nominal_scenario(
    category: Category, condition: Condition, spec: DatasetSpec, lever: float = LEVER_ARM
) -> SimScenario:
    """Scenario with the material's nominal parameters for a contact at the given lever arm.

    The condition tables hold linear values at LEVER_ARM; a contact nearer the
    joint sees a stiffer, slower arm.
    """
    material = material_for(category)
    ratio = lever / LEVER_ARM
    return SimScenario(
        m_arm=spec.m_arm,
        m_obj=material.m_obj,
        k_act=STIFFNESS_SETTINGS[condition.stiffness] / (ratio * ratio),
        k_obj=material.k_obj,
        mu_s=material.mu_s,
        mu_k=material.mu_k,
        L0=spec.rest_length,
        x0_arm=0.0,
        x0_obj=spec.rest_length + spec.contact_gap,
        x_eq_goal=spec.x_eq_goal,
        eq_velocity=VELOCITY_SETTINGS[condition.velocity] * ratio,
        fixed=category.fixed,
        duration=spec.duration,
        dt=spec.dt,
    )


def build_scenario(job: TrialJob, rng: np.random.Generator) -> Tuple[SimScenario, RenderParams]:
    """Jittered physical parameters and render settings for one trial."""
    spec = job.spec
    material = material_for(job.category)

    def jittered(value: float) -> float:
        return value * rng.uniform(1.0 - spec.jitter, 1.0 + spec.jitter)

    k_obj = jittered(material.k_obj)
    m_obj = jittered(material.m_obj)
    mu_s = jittered(material.mu_s)
    mu_k = min(jittered(material.mu_k), mu_s)
    row_offset = rng.uniform(-spec.contact_span, spec.contact_span)
    col_offset = rng.uniform(-spec.center_jitter, spec.center_jitter)

    lever = LEVER_ARM + row_offset * DEFAULT_PITCH
    scenario = replace(
        nominal_scenario(job.category, job.condition, spec, lever),
        k_obj=k_obj,
        m_obj=m_obj,
        mu_s=mu_s,
        mu_k=mu_k,
    )
    defaults = RenderParams()
    render = replace(
        defaults,
        contact_center=(
            defaults.contact_center[0] + row_offset,
            defaults.contact_center[1] + col_offset,
        ),
        area_gain=material.area_gain,
        max_radius=spec.max_radius,
        noise_std=spec.noise_std,
        seed=job.seed,
    )
    return scenario, render


def simulate_trial(job: TrialJob) -> TaxelTrial:
    rng = np.random.default_rng(job.seed)
    scenario, render = build_scenario(job, rng)
    trajectory = simulate(scenario)
    return render_taxels(
        trajectory,
        render,
        job.spec.sample_rate,
        contact_threshold=job.spec.contact_threshold,
        label=job.category,
        condition=job.condition,
    )


def _run_job(job: TrialJob):
    try:
        return simulate_trial(job), None
    except HapticaError as e:
        return None, str(e)


def plan_jobs(spec: DatasetSpec, seed: int) -> List[TrialJob]:
    jobs = []
    for cat_index, category in enumerate(spec.category_list):
        for cond_index, condition in enumerate(spec.condition_list):
            for trial in range(spec.trials_per_cell):
                jobs.append(
                    TrialJob(
                        index=len(jobs),
                        category=category,
                        condition=condition,
                        seed=trial_seed(seed, cat_index, cond_index, trial),
                        spec=spec,
                    )
                )
    return jobs


def generate_dataset(spec: DatasetSpec, out_dir: Path, seed: int = 0, jobs: int = 1) -> DatasetResult:
    """Simulate, render and write every trial plus a manifest.

    A failed simulation aborts its whole (category, condition) cell: none of
    the cell's trials are written, so the remaining cells stay balanced.
    Serial and parallel runs write identical files.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    planned = plan_jobs(spec, seed)
    logger.info("generating_dataset", trials=len(planned), out=str(out_dir), seed=seed, jobs=jobs)

    result = DatasetResult()
    if jobs > 1 and len(planned) > 1:
        with futures.ProcessPoolExecutor(max_workers=jobs) as executor:
            outcomes = list(executor.map(_run_job, planned, chunksize=4))
    else:
        outcomes = [_run_job(job) for job in planned]

    for job, (_, error) in zip(planned, outcomes):
        if error is None:
            continue
        logger.error(
            "trial_generation_failed",
            index=job.index,
            category=job.category.value,
            condition=str(job.condition),
            error=error,
        )
        result.failures.append((job.index, error))
        cell = (job.category, job.condition)
        if cell not in result.aborted_cells:
            result.aborted_cells.append(cell)
            logger.error(
                "cell_generation_aborted",
                category=job.category.value,
                condition=str(job.condition),
                trials=spec.trials_per_cell,
            )

    for job, (trial, _) in zip(planned, outcomes):
        if (job.category, job.condition) in result.aborted_cells:
            continue
        name = f"trial_{job.index:04d}.csv"
        write_trial(out_dir / name, trial)
        result.entries.append(
            ManifestEntry(
                name,
                format_label(job.category),
                job.condition.velocity,
                job.condition.stiffness,
                job.seed,
            )
        )

    write_manifest(out_dir / MANIFEST_NAME, result.entries)
    spec.save(out_dir / "dataset.yaml")
    logger.info(
        "dataset_generated",
        trials=len(result.entries),
        failures=len(result.failures),
        aborted_cells=len(result.aborted_cells),
        out=str(out_dir),
    )
    return result


def load_dataset(directory: Path) -> List[TaxelTrial]:
    """Read every trial listed in a dataset manifest, in manifest order."""
    directory = Path(directory)
    manifest = directory / MANIFEST_NAME
    if not manifest.exists():
        raise TrialFormatError(f"{directory} has no {MANIFEST_NAME}")
    trials = []
    for entry in read_manifest(manifest):
        trial = read_trial(directory / entry.file)
        if format_label(trial.label) != entry.label:
            raise TrialFormatError(f"{entry.file}: label disagrees with the manifest")
        trials.append(trial)
    logger.info("dataset_loaded", trials=len(trials), path=str(directory))
    return trials

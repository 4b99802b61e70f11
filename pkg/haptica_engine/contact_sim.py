"""
One-degree-of-freedom lumped model of an arm pushing into an object.

The arm is driven through a spring toward a moving equilibrium point. The
object is a compression-only spring of rest length L0 sitting on a surface
with static and kinetic friction; fixed objects never move.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import structlog

from haptica_codex.errors import UnstableIntegration


logger = structlog.get_logger()

GRAVITY = 9.81  # m/s^2
POSITION_BOUND = 10.0  # m


@dataclass(frozen=True)
class SimScenario:
    """Physical parameters and integration settings of one simulated contact."""

    m_arm: float = 0.5
    m_obj: float = 1.5
    k_act: float = 200.0
    k_obj: float = 5000.0
    mu_s: float = 0.4
    mu_k: float = 0.2
    L0: float = 0.05
    x0_arm: float = 0.0
    x0_obj: float = 0.06
    x_eq_goal: float = 0.5
    # math.inf places the equilibrium point at the goal from t = 0.
    eq_velocity: float = 0.122
    # None selects critical damping 2*sqrt(k_act*m_arm).
    b_arm: Optional[float] = None
    g: float = GRAVITY
    fixed: bool = True
    duration: float = 1.0
    dt: float = 1e-4

    def __post_init__(self):
        for name in ("m_arm", "m_obj", "k_act", "k_obj", "duration", "dt"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0 <= self.mu_k <= self.mu_s:
            raise ValueError(f"need 0 <= mu_k <= mu_s, got mu_k={self.mu_k}, mu_s={self.mu_s}")
        if self.x0_obj - self.x0_arm < self.L0:
            raise ValueError("object starts inside the contact spring's rest length")
        if self.b_arm is not None and self.b_arm < 0:
            raise ValueError(f"b_arm must be >= 0, got {self.b_arm}")
        if not self.eq_velocity > 0:
            raise ValueError(f"eq_velocity must be positive, got {self.eq_velocity}")

    @property
    def damping(self) -> float:
        if self.b_arm is None:
            return 2.0 * math.sqrt(self.k_act * self.m_arm)
        return self.b_arm

    @property
    def contact_position(self) -> float:
        """Arm position at which the object spring starts to compress."""
        return self.x0_obj - self.L0

    @property
    def static_limit(self) -> float:
        return self.mu_s * self.m_obj * self.g

    @property
    def kinetic_force(self) -> float:
        return self.mu_k * self.m_obj * self.g

    @property
    def series_stiffness(self) -> float:
        return self.k_act * self.k_obj / (self.k_act + self.k_obj)

    def equilibrium(self, t: float) -> float:
        """Equilibrium point: a constant-rate ramp from x0_arm saturating at the goal."""
        span = self.x_eq_goal - self.x0_arm
        if math.isinf(self.eq_velocity):
            return self.x_eq_goal
        travel = self.eq_velocity * t
        if span >= 0:
            return self.x0_arm + min(travel, span)
        return self.x0_arm - min(travel, -span)


@dataclass(frozen=True)
class SimTrajectory:
    """State and force history at every integration step."""

    t: np.ndarray
    x_arm: np.ndarray
    x_obj: np.ndarray
    v_arm: np.ndarray
    v_obj: np.ndarray
    F_act: np.ndarray
    F_surf: np.ndarray
    F_fr: np.ndarray
    contact_onset_time: Optional[float] = None
    dt: float = field(default=1e-4)

    def __len__(self) -> int:
        return len(self.t)

    def energy(self, scenario: SimScenario) -> np.ndarray:
        """Kinetic energy of the arm plus the actuator spring's potential energy.

        Stored velocities lag the positions by half a step, so the kinetic
        term uses the mean of the velocities before and after each sample.
        """
        x_eq = np.array([scenario.equilibrium(t) for t in self.t])
        accel = (self.F_act - self.F_surf - scenario.damping * self.v_arm) / scenario.m_arm
        v_mid = self.v_arm + 0.5 * self.dt * accel
        return 0.5 * scenario.m_arm * v_mid**2 + 0.5 * scenario.k_act * (x_eq - self.x_arm) ** 2


def simulate(sc: SimScenario) -> SimTrajectory:
    """Integrate the lumped model with semi-implicit Euler at step sc.dt.

    The object sticks until the contact force exceeds the static friction
    limit, then slides against kinetic friction; it re-sticks when its
    velocity reaches zero while the contact force is inside the static limit.

    Raises:
        UnstableIntegration: a position left the +-10 m sanity bound.
    """
    n_steps = int(round(sc.duration / sc.dt))
    dt = sc.dt
    damping = sc.damping
    static_limit = sc.static_limit
    kinetic = sc.kinetic_force

    x_arm, v_arm = sc.x0_arm, 0.0
    x_obj, v_obj = sc.x0_obj, 0.0
    stuck = True
    onset = None
    history = {name: [] for name in ("t", "x_arm", "x_obj", "v_arm", "v_obj", "F_act", "F_surf", "F_fr")}

    for step in range(n_steps + 1):
        t = step * dt
        f_act = sc.k_act * (sc.equilibrium(t) - x_arm)
        gap = x_obj - x_arm
        f_surf = sc.k_obj * (sc.L0 - gap) if gap < sc.L0 else 0.0
        if f_surf > 0.0 and onset is None:
            onset = t

        a_obj = 0.0
        if sc.fixed:
            f_fr = f_surf
        elif stuck and f_surf <= static_limit:
            f_fr = f_surf
        else:
            stuck = False
            f_fr = kinetic
            a_obj = (f_surf - f_fr) / sc.m_obj

        history["t"].append(t)
        history["x_arm"].append(x_arm)
        history["x_obj"].append(x_obj)
        history["v_arm"].append(v_arm)
        history["v_obj"].append(v_obj)
        history["F_act"].append(f_act)
        history["F_surf"].append(f_surf)
        history["F_fr"].append(f_fr)
        if step == n_steps:
            break

        f_arm = f_act - f_surf - damping * v_arm
        v_arm += f_arm / sc.m_arm * dt
        x_arm += v_arm * dt
        if not sc.fixed and not stuck:
            v_next = v_obj + a_obj * dt
            if v_next <= 0.0:
                v_obj = 0.0
                stuck = f_surf <= static_limit
            else:
                v_obj = v_next
            x_obj += v_obj * dt

        if not (abs(x_arm) <= POSITION_BOUND and abs(x_obj) <= POSITION_BOUND):
            logger.error("simulation_unstable", t=t, x_arm=x_arm, x_obj=x_obj, dt=dt)
            raise UnstableIntegration(
                f"state left the {POSITION_BOUND} m bound at t={t:.4f} s; reduce dt below {dt}"
            )

    return SimTrajectory(
        **{name: np.array(values) for name, values in history.items()},
        contact_onset_time=onset,
        dt=dt,
    )

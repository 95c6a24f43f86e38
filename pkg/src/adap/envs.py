"""Analytic task environments: plan in, table-plane landing point out.

A 4-joint desk-scale arm (yaw + three pitches) executes the plan; the
task dynamics decide what happens to the launched object:

* projectile -- object released at peak tool speed, ballistic flight;
* sliding    -- object pushed out at peak horizontal tool speed, friction stop;
* pendulum   -- weight on a string driven by the tool tip, lands when the
  string first goes slack (free flight) or hangs below the tip at the end.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .domain import ActionPlan, validate_plan

GRAVITY = 9.81
DEGENERATE_SPEED = 0.05  # m/s; slower peaks launch nothing meaningful


class NoImpactError(ValueError):
    """Ballistic trajectory never crosses the table plane."""


class DegenerateMotionError(ValueError):
    """Peak tool speed too low for a meaningful launch."""


@dataclass(frozen=True)
class ArmModel:
    """Desk-scale 4-DOF arm: base yaw, then shoulder/elbow/wrist pitches."""

    link_lengths: tuple = (0.33, 0.33, 0.20)
    tool_offset: float = 0.10
    base_height: float = 0.30
    joint_limits: tuple = ((-2.9, 2.9), (-1.7, 1.7), (-2.6, 2.6), (-2.8, 2.8))

    def __post_init__(self):
        if any(l <= 0 for l in self.link_lengths) or self.tool_offset <= 0:
            raise ValueError("link lengths and tool offset must be positive")
        if any(lo >= hi for lo, hi in self.joint_limits):
            raise ValueError("joint limits must satisfy lower < upper")

    @property
    def joint_count(self) -> int:
        return len(self.joint_limits)

    def limits_array(self) -> np.ndarray:
        return np.asarray(self.joint_limits, dtype=float)


def forward_kinematics(joints, arm: ArmModel) -> np.ndarray:
    """Tool position (m, world frame) for one joint configuration.

    Pitch zero points the links along +x; positive pitch lifts them.  The
    base yaw rotates the whole arm plane about z.
    """
    q = np.asarray(joints, dtype=float)
    if q.shape[-1] != arm.joint_count:
        raise ValueError(f"expected {arm.joint_count} joints, got {q.shape[-1]}")
    yaw = q[..., 0]
    phi1 = q[..., 1]
    phi2 = phi1 + q[..., 2]
    phi3 = phi2 + q[..., 3]
    l1, l2, l3 = arm.link_lengths
    l3 = l3 + arm.tool_offset
    radial = l1 * np.cos(phi1) + l2 * np.cos(phi2) + l3 * np.cos(phi3)
    z = arm.base_height + l1 * np.sin(phi1) + l2 * np.sin(phi2) + l3 * np.sin(phi3)
    return np.stack([radial * np.cos(yaw), radial * np.sin(yaw), z], axis=-1)


def finite_difference(values: np.ndarray, dt: float) -> np.ndarray:
    """Central differences along axis 0, one-sided at both ends."""
    v = np.empty_like(values)
    v[1:-1] = (values[2:] - values[:-2]) / (2.0 * dt)
    v[0] = (values[1] - values[0]) / dt
    v[-1] = (values[-1] - values[-2]) / dt
    return v


def tool_trajectory(plan: ActionPlan, arm: ArmModel):
    """Tool positions and finite-difference velocities over all frames."""
    pos = forward_kinematics(plan.frames, arm)
    vel = finite_difference(pos, plan.dt)
    return pos, vel


def ballistic_landing(p0, v0, g: float = GRAVITY, z_table: float = 0.0) -> np.ndarray:
    """Closed-form landing (x, y) of a point mass released at p0 with v0."""
    p0 = np.asarray(p0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    disc = v0[2] ** 2 + 2.0 * g * (p0[2] - z_table)
    if disc < 0.0:
        raise NoImpactError(
            f"trajectory from z={p0[2]:.3f} with vz={v0[2]:.3f} never reaches z={z_table:.3f}"
        )
    t_star = (v0[2] + np.sqrt(disc)) / g
    return np.array([p0[0] + v0[0] * t_star, p0[1] + v0[1] * t_star])


def sliding_stop(p0, v0, mu: float, g: float = GRAVITY) -> np.ndarray:
    """Stop point of an object decelerating under Coulomb friction."""
    if mu <= 0:
        raise ValueError("friction coefficient must be positive")
    p0 = np.asarray(p0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    speed = float(np.linalg.norm(v0))
    if speed == 0.0:
        return p0.copy()
    return p0 + (v0 / speed) * (speed**2 / (2.0 * mu * g))


@dataclass
class PendulumTrace:
    weight_pos: np.ndarray  # n_sub x 3
    weight_vel: np.ndarray  # n_sub x 3
    went_slack: bool
    slack_step: int | None


def pendulum_rollout(tip: np.ndarray, dt: float, string_length: float,
                     g: float = GRAVITY, dt_sub: float = 0.002,
                     z_table: float = 0.0, trace: bool = False):
    """Point mass on an inextensible string driven by the tool tip.

    The taut phase integrates the angular state (string direction u, angular
    velocity w) with semi-implicit Euler at ``dt_sub``, tip state linearly
    interpolated between frames.  Tension per unit mass is
    ``(g_vec - a_tip) . u + L |w|^2``; the first non-positive value starts
    free flight and the ballistic landing is the result.  A string that
    stays taut leaves the weight hanging below the final tip position.
    """
    tip = np.asarray(tip, dtype=float)
    if tip.ndim != 2 or tip.shape[1] != 3:
        raise ValueError(f"tip trajectory must be n x 3, got {tip.shape}")
    if not np.all(np.isfinite(tip)):
        raise ValueError("tip trajectory contains non-finite values")
    L = string_length
    tip_vel = finite_difference(tip, dt)
    tip_acc = finite_difference(tip_vel, dt)

    n_sub = max(1, int(round(dt / dt_sub)))
    h = dt / n_sub
    g_vec = np.array([0.0, 0.0, -g])

    u = np.array([0.0, 0.0, -1.0])  # weight hangs at rest below the tip
    w = np.zeros(3)

    positions, velocities = [], []
    step = 0
    for seg in range(len(tip) - 1):
        for k in range(n_sub):
            f = k / n_sub
            q = tip[seg] * (1 - f) + tip[seg + 1] * f
            qd = tip_vel[seg] * (1 - f) + tip_vel[seg + 1] * f
            qa = tip_acc[seg] * (1 - f) + tip_acc[seg + 1] * f
            g_eff = g_vec - qa

            tension = np.dot(g_eff, u) + L * np.dot(w, w)
            if tension <= 0.0:
                p = q + L * u
                v = qd + L * np.cross(w, u)
                if p[2] <= z_table:
                    landing = p[:2].copy()
                else:
                    landing = ballistic_landing(p, v, g=g, z_table=z_table)
                if trace:
                    return landing, PendulumTrace(
                        np.array(positions), np.array(velocities), True, step)
                return landing

            w = w + h * np.cross(u, g_eff) / L
            u = u + h * np.cross(w, u)
            u = u / np.linalg.norm(u)
            w = w - np.dot(w, u) * u
            if trace:
                positions.append(q + L * u)
                velocities.append(qd + L * np.cross(w, u))
            step += 1

    landing = tip[-1, :2].copy()
    if trace:
        return landing, PendulumTrace(np.array(positions), np.array(velocities), False, None)
    return landing


@dataclass(frozen=True)
class ProjectileEnv:
    arm: ArmModel = ArmModel()
    gravity: float = GRAVITY
    table_height: float = 0.0

    def __post_init__(self):
        if self.gravity <= 0:
            raise ValueError("gravity must be positive")

    def rollout(self, plan: ActionPlan) -> np.ndarray:
        validate_plan(plan, self.arm.limits_array())
        pos, vel = tool_trajectory(plan, self.arm)
        speeds = np.linalg.norm(vel, axis=1)
        release = int(np.argmax(speeds))
        if speeds[release] < DEGENERATE_SPEED:
            raise DegenerateMotionError(
                f"peak tool speed {speeds[release]:.3f} m/s below {DEGENERATE_SPEED} m/s")
        p, v = pos[release], vel[release]
        if p[2] < self.table_height and v[2] ** 2 < 2 * self.gravity * (self.table_height - p[2]):
            # released at/below the plane without the speed to clear it:
            # the object is already down, so it stays where it was let go
            return p[:2].copy()
        return ballistic_landing(p, v, g=self.gravity, z_table=self.table_height)

    def perturbed(self, scale: float, rng: np.random.Generator) -> "ProjectileEnv":
        return replace(self, arm=_perturb_arm(self.arm, scale, rng))


@dataclass(frozen=True)
class SlidingEnv:
    arm: ArmModel = ArmModel()
    mu: float = 0.20
    gravity: float = GRAVITY

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError("friction coefficient must be positive")

    def rollout(self, plan: ActionPlan) -> np.ndarray:
        validate_plan(plan, self.arm.limits_array())
        pos, vel = tool_trajectory(plan, self.arm)
        hspeed = np.linalg.norm(vel[:, :2], axis=1)
        launch = int(np.argmax(hspeed))
        if hspeed[launch] < DEGENERATE_SPEED:
            raise DegenerateMotionError(
                f"peak horizontal tool speed {hspeed[launch]:.3f} m/s below {DEGENERATE_SPEED} m/s")
        yaw = plan.frames[launch, 0]
        heading = np.array([np.cos(yaw), np.sin(yaw)])
        v0 = hspeed[launch] * heading
        return sliding_stop(pos[launch, :2], v0, mu=self.mu, g=self.gravity)

    def perturbed(self, scale: float, rng: np.random.Generator) -> "SlidingEnv":
        factor = 1.0 + rng.uniform(-scale, scale)
        return replace(self, arm=_perturb_arm(self.arm, scale, rng), mu=self.mu * factor)


@dataclass(frozen=True)
class PendulumEnv:
    arm: ArmModel = ArmModel()
    string_length: float = 0.40
    mass: float = 0.01
    dt_sub: float = 0.002
    gravity: float = GRAVITY
    table_height: float = 0.0

    def __post_init__(self):
        if self.string_length <= 0 or self.mass <= 0 or self.dt_sub <= 0:
            raise ValueError("string length, mass and dt_sub must be positive")

    def rollout(self, plan: ActionPlan) -> np.ndarray:
        validate_plan(plan, self.arm.limits_array())
        pos, vel = tool_trajectory(plan, self.arm)
        speeds = np.linalg.norm(vel, axis=1)
        if speeds.max() < DEGENERATE_SPEED:
            raise DegenerateMotionError(
                f"peak tool speed {speeds.max():.3f} m/s below {DEGENERATE_SPEED} m/s")
        return pendulum_rollout(pos, plan.dt, self.string_length,
                                g=self.gravity, dt_sub=self.dt_sub,
                                z_table=self.table_height)

    def perturbed(self, scale: float, rng: np.random.Generator) -> "PendulumEnv":
        factor = 1.0 + rng.uniform(-scale, scale)
        return replace(self, arm=_perturb_arm(self.arm, scale, rng),
                       string_length=self.string_length * factor)


def _perturb_arm(arm: ArmModel, scale: float, rng: np.random.Generator) -> ArmModel:
    links = tuple(l * (1.0 + rng.uniform(-scale, scale)) for l in arm.link_lengths)
    tool = arm.tool_offset * (1.0 + rng.uniform(-scale, scale))
    return replace(arm, link_lengths=links, tool_offset=tool)


TASK_ENVS = {"basketball": ProjectileEnv, "curling": SlidingEnv, "fishing": PendulumEnv}


def make_env(task: str, arm: ArmModel | None = None, **params):
    """Build the environment for a task name (basketball|curling|fishing)."""
    if task not in TASK_ENVS:
        raise ValueError(f"unknown task {task!r}, expected one of {sorted(TASK_ENVS)}")
    kwargs = dict(params)
    if arm is not None:
        kwargs["arm"] = arm
    return TASK_ENVS[task](**kwargs)


def rollout(env, plan: ActionPlan) -> np.ndarray:
    """Execute a complete plan and read off its table-plane result."""
    return env.rollout(plan)

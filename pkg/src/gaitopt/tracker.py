"""Simplified task-space tracking of a planned trajectory on the reduced model.

Stance legs apply the planned feedforward force plus a PD wrench on the
base pose/twist distributed through the contact grasp map, then projected
onto the friction pyramid so the applied forces are feasible by
construction.  Swing legs are velocity-servoed onto their quintic spline;
stance feet are pinned (zero commanded velocity).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constraints import FrictionModel, tangent_basis
from .dynamics import (
    NU,
    NUM_LEGS,
    P,
    PD,
    TH,
    W,
    RobotParams,
    foot_slice,
    force_slice,
    rk4_step_batch,
    velocity_slice,
)


@dataclass(frozen=True)
class TrackerGains:
    """Task-space stiffness/damping for the base and swing feet."""

    kp_position: float = 300.0
    kd_position: float = 130.0
    kp_orientation: float = 80.0
    kd_orientation: float = 15.0
    kp_swing_foot: float = 60.0

    def __post_init__(self):
        for name in (
            "kp_position",
            "kd_position",
            "kp_orientation",
            "kd_orientation",
            "kp_swing_foot",
        ):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @classmethod
    def zero(cls) -> "TrackerGains":
        return cls(0.0, 0.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_dict(cls, raw: dict) -> "TrackerGains":
        return cls(**{k: float(v) for k, v in raw.items()})


def project_to_pyramid(
    lam: np.ndarray, normal: np.ndarray, friction: FrictionModel
) -> np.ndarray:
    """Clip a force into the inscribed pyramid and the normal-force box."""
    n = np.asarray(normal, dtype=float)
    fn = float(np.clip(lam @ n, 0.0, friction.lambda_z_max))
    ft = lam - (lam @ n) * n
    if fn == 0.0:
        return np.zeros(3)
    t1, t2 = tangent_basis(n)
    m = friction.face_count
    angles = 2.0 * np.pi * np.arange(m) / m
    dirs = np.outer(np.cos(angles), t1) + np.outer(np.sin(angles), t2)
    limit = friction.mu * np.cos(np.pi / m) * fn
    face_vals = dirs @ ft
    worst = face_vals.max()
    if worst > limit:
        ft = ft * (limit / worst)
    return fn * n + ft


def distribute_wrench(wrench: np.ndarray, arms: np.ndarray) -> np.ndarray:
    """Least-squares split of a base wrench over the stance-foot forces.

    arms: (k, 3) vectors from the base to each stance foot (world frame).
    Returns (k, 3) force corrections with sum F = wrench[:3] and
    sum arm x F = wrench[3:] in the least-squares sense.
    """
    k = arms.shape[0]
    if k == 0:
        return np.zeros((0, 3))
    G = np.zeros((6, 3 * k))
    for i in range(k):
        G[0:3, 3 * i : 3 * i + 3] = np.eye(3)
        a = arms[i]
        G[3:6, 3 * i : 3 * i + 3] = np.array(
            [[0, -a[2], a[1]], [a[2], 0, -a[0]], [-a[1], a[0], 0]]
        )
    sol, *_ = np.linalg.lstsq(G, wrench, rcond=None)
    return sol.reshape(k, 3)


def track_interval(
    plan,
    plant_state: np.ndarray,
    t: float,
    gains: TrackerGains,
    params: RobotParams,
    friction: FrictionModel,
    dt_control: float,
):
    """One control tick: command forces/foot velocities and integrate the plant.

    plan must provide stage_flags_at(t), reference_state(t), feedforward(t),
    swing_target(t, leg) and plane_normal(leg).  Returns the next plant
    state and the applied per-leg forces.
    """
    x = np.asarray(plant_state, dtype=float)
    flags = plan.stage_flags_at(t)
    x_ref = plan.reference_state(t)
    u_ff = plan.feedforward(t)

    u = np.zeros(NU)
    stance_legs = [leg for leg in range(NUM_LEGS) if flags[leg]]

    # base PD wrench distributed over the stance legs
    lam = np.zeros((NUM_LEGS, 3))
    for leg in stance_legs:
        lam[leg] = u_ff[force_slice(leg)]
    if stance_legs:
        wrench = np.concatenate(
            [
                gains.kp_position * (x_ref[P] - x[P])
                + gains.kd_position * (x_ref[PD] - x[PD]),
                gains.kp_orientation * (x_ref[TH] - x[TH])
                + gains.kd_orientation * (x_ref[W] - x[W]),
            ]
        )
        if np.any(wrench):
            arms = np.array([x[foot_slice(leg)] - x[P] for leg in stance_legs])
            corrections = distribute_wrench(wrench, arms)
            for i, leg in enumerate(stance_legs):
                lam[leg] = lam[leg] + corrections[i]
    for leg in stance_legs:
        lam[leg] = project_to_pyramid(lam[leg], plan.plane_normal(t, leg), friction)
        u[force_slice(leg)] = lam[leg]

    # swing feet ride the quintic spline; stance feet are pinned
    for leg in range(NUM_LEGS):
        if flags[leg]:
            continue
        target = plan.swing_target(t, leg)
        if target is None:
            u[velocity_slice(leg)] = u_ff[velocity_slice(leg)]
        else:
            pos_des, vel_des = target
            u[velocity_slice(leg)] = vel_des + gains.kp_swing_foot * (
                pos_des - x[foot_slice(leg)]
            )

    x_next = rk4_step_batch(x[None, :], u[None, :], params, dt_control)[0]
    return x_next, lam, u

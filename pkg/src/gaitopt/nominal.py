"""Nominal base/footstep sequence generation.

Footholds advance by one step length along the heading per swing phase,
get projected vertically onto the walkable surface, shifted inward to
respect clearance margins, and bumped across gap volumes by the coverage
rule (more than half covered: forward to the far plane, otherwise back to
the near plane).  The base advances by half the step displacement per
swing phase and rides at the desired height above the least-squares plane
of the four assigned footholds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import NUM_LEGS, NX, P, RobotState, foot_slice
from .gait import GaitSchedule
from .terrain import GapVolume, Terrain

DEFAULT_CLEARANCE_MARGIN = 0.03  # m, distance kept to bounded plane edges


class InGapSignal(Exception):
    """Foothold projects into a gap volume; carries the gap."""

    def __init__(self, gap: GapVolume):
        super().__init__("foothold over a gap volume")
        self.gap = gap


class NoValidPlaneError(ValueError):
    """Foothold and both gap-shift directions failed to land on a plane."""


@dataclass(frozen=True)
class TaskGoal:
    """Walking direction and step geometry."""

    heading: np.ndarray  # unit 2-vector
    step_length: float
    desired_height: float

    def __post_init__(self):
        h = np.asarray(self.heading, dtype=float)[:2]
        norm = np.linalg.norm(h)
        if norm <= 0:
            raise ValueError("heading must be a nonzero 2-vector")
        object.__setattr__(self, "heading", h / norm)
        if self.step_length <= 0:
            raise ValueError("step length must be positive")
        if self.desired_height <= 0:
            raise ValueError("desired height must be positive")

    @property
    def heading3(self) -> np.ndarray:
        return np.array([self.heading[0], self.heading[1], 0.0])


@dataclass
class NominalSequence:
    """Per-phase nominal states and the plane assigned to each foot."""

    states: list  # per phase: (NX,) nominal state vector
    planes: list  # per phase: list of 4 ContactPlane
    goal: TaskGoal

    def __post_init__(self):
        for k, (x, planes) in enumerate(zip(self.states, self.planes)):
            for leg in range(NUM_LEGS):
                res = planes[leg].evaluate(x[foot_slice(leg)])
                if abs(res) > 1e-9:
                    raise ValueError(
                        f"phase {k} leg {leg} foothold misses its plane by {res:.2e}"
                    )
        steps = np.diff([x[P][:2] for x in self.states], axis=0)
        if steps.size and np.linalg.norm(steps, axis=1).max() > self.goal.step_length + 1e-9:
            raise ValueError("nominal base displacement exceeds the step length")

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def footholds(self, phase: int) -> np.ndarray:
        return self.states[phase][12:].reshape(NUM_LEGS, 3)


def project_to_surface(
    foothold: np.ndarray,
    terrain: Terrain,
    margin: float = DEFAULT_CLEARANCE_MARGIN,
):
    """Vertically project a foothold onto the walkable surface.

    Returns (foothold', plane).  x, y are preserved except for the inward
    shift that keeps at least `margin` to the plane's bound edges.  Raises
    InGapSignal over gap volumes.
    """
    foothold = np.asarray(foothold, dtype=float)
    x, y = foothold[0], foothold[1]
    gap = terrain.gap_at(x, y)
    if gap is not None:
        raise InGapSignal(gap)
    plane = terrain.surface_plane_at(x, y)
    if plane.bounds is not None:
        xmin, xmax, ymin, ymax = plane.bounds
        if xmax - xmin < 2 * margin or ymax - ymin < 2 * margin:
            raise NoValidPlaneError("plane too small for the clearance margin")
        x = np.clip(x, xmin + margin, xmax - margin)
        y = np.clip(y, ymin + margin, ymax - margin)
    return np.array([x, y, plane.height_at(x, y)]), plane


def resolve_gap(
    foothold: np.ndarray,
    step_vector: np.ndarray,
    gap: GapVolume,
    margin: float = DEFAULT_CLEARANCE_MARGIN,
) -> np.ndarray:
    """Shift a foothold out of a gap volume by the coverage rule.

    Coverage is the fraction of the gap already traversed along the step
    direction; more than half shifts forward past the far edge, half or
    less (tie-break: conservative) shifts back before the near edge.
    Only the in-plane coordinates change; the caller re-projects z.
    """
    foothold = np.asarray(foothold, dtype=float).copy()
    step = np.asarray(step_vector, dtype=float)
    axis = 0 if abs(step[0]) >= abs(step[1]) else 1
    forward = step[axis] >= 0
    lo, hi = gap.bounds[2 * axis], gap.bounds[2 * axis + 1]
    entry, exit_ = (lo, hi) if forward else (hi, lo)
    coverage = (foothold[axis] - entry) / (exit_ - entry)
    if coverage > 0.5:
        foothold[axis] = exit_ + (margin if forward else -margin)
    else:
        foothold[axis] = entry - (margin if forward else -margin)
    return foothold


def generate_nominal_sequence(
    x0: RobotState,
    goal: TaskGoal,
    schedule: GaitSchedule,
    terrain: Terrain,
    margin: float = DEFAULT_CLEARANCE_MARGIN,
    initial_planes: list | None = None,
) -> NominalSequence:
    """Geometric waypoint sequence guiding the optimizer toward the goal."""
    from .constraints import assign_contact_plane

    feet = np.asarray(x0.foot_positions, dtype=float).copy()
    if initial_planes is not None:
        planes = list(initial_planes)
    else:
        planes = [assign_contact_plane(feet[leg], terrain) for leg in range(NUM_LEGS)]
    # start from re-anchored planes so the invariant holds exactly
    for leg in range(NUM_LEGS):
        if abs(planes[leg].evaluate(feet[leg])) > 1e-12:
            planes[leg] = planes[leg].anchored_at(feet[leg])

    base_xy = np.asarray(x0.base_position[:2], dtype=float).copy()
    step3 = goal.step_length * goal.heading3

    states, phase_planes = [], []
    for phase in schedule.phases:
        leg = phase.swing_leg
        if leg is not None:
            target = feet[leg] + step3
            try:
                foothold, plane = project_to_surface(target, terrain, margin)
            except InGapSignal as sig:
                shifted = resolve_gap(target, step3, sig.gap, margin)
                try:
                    foothold, plane = project_to_surface(shifted, terrain, margin)
                except InGapSignal as exc:
                    raise NoValidPlaneError(
                        "gap-shifted foothold still lands in a gap"
                    ) from exc
            feet[leg] = foothold
            planes[leg] = plane
            base_xy = base_xy + 0.5 * goal.step_length * goal.heading

        x = np.zeros(NX)
        x[0:2] = base_xy
        x[2] = _support_plane_height(feet, base_xy) + goal.desired_height
        for i in range(NUM_LEGS):
            x[foot_slice(i)] = feet[i]
        states.append(x)
        phase_planes.append(list(planes))
    return NominalSequence(states=states, planes=phase_planes, goal=goal)


def _support_plane_height(feet: np.ndarray, base_xy: np.ndarray) -> float:
    """Height of the least-squares plane of the footholds at the base xy."""
    A = np.column_stack([np.ones(NUM_LEGS), feet[:, 0], feet[:, 1]])
    coef, *_ = np.linalg.lstsq(A, feet[:, 2], rcond=None)
    return float(coef[0] + coef[1] * base_xy[0] + coef[2] * base_xy[1])

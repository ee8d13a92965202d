"""Gait phase sequences and their projection onto the sampling grid.

A phase is a stance configuration: one named swing leg, or F for a
four-feet stance.  Phase boundaries snap to the nearest grid node
(round-half-even); a node at a snapped boundary belongs to the phase it
closes, so the node at a touchdown instant is the last node of its swing
phase and carries the swing flag.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import LEG_NAMES, NUM_LEGS

PHASE_CONFIGS = LEG_NAMES + ("F",)


class PhaseTooShortError(ValueError):
    """A phase shorter than the sampling interval cannot be represented."""


@dataclass(frozen=True)
class GaitPhase:
    """One stance configuration and how long it lasts."""

    config: str
    duration: float

    def __post_init__(self):
        if self.config not in PHASE_CONFIGS:
            raise ValueError(f"unknown stance configuration {self.config!r}")
        if self.duration <= 0:
            raise ValueError("phase duration must be positive")

    @property
    def swing_leg(self) -> int | None:
        """Index of the swing leg, None for a four-feet stance."""
        if self.config == "F":
            return None
        return LEG_NAMES.index(self.config)

    def contact_flags(self) -> np.ndarray:
        flags = np.ones(NUM_LEGS, dtype=bool)
        if self.swing_leg is not None:
            flags[self.swing_leg] = False
        return flags


@dataclass
class NodeGrid:
    """Per-node view of a schedule on the sampling grid."""

    times: np.ndarray  # (N+1,)
    contact_flags: np.ndarray  # (N+1, 4) bool, True = stance
    phase_index: np.ndarray  # (N+1,)
    phase_boundaries: np.ndarray  # node index of each phase end

    @property
    def node_count(self) -> int:
        return len(self.times)

    @property
    def stage_count(self) -> int:
        return len(self.times) - 1

    def stage_in_contact(self) -> np.ndarray:
        """Contact flags governing each input interval [t_n, t_n+1)."""
        return self.contact_flags[1:]

    def touchdown_nodes(self) -> list:
        """(node, leg) pairs at touchdown instants (last swing node)."""
        out = []
        flags = self.contact_flags
        for n in range(self.node_count - 1):
            for leg in range(NUM_LEGS):
                if not flags[n, leg] and flags[n + 1, leg]:
                    out.append((n, leg))
        return out

    def liftoff_nodes(self) -> list:
        """(node, leg) pairs at lift-off instants (last stance node)."""
        out = []
        flags = self.contact_flags
        for n in range(self.node_count - 1):
            for leg in range(NUM_LEGS):
                if flags[n, leg] and not flags[n + 1, leg]:
                    out.append((n, leg))
        return out


@dataclass
class GaitSchedule:
    """Phase configuration/duration sequences over one planning horizon."""

    phases: list  # list of GaitPhase
    dt: float

    def __post_init__(self):
        if not self.phases:
            raise ValueError("schedule needs at least one phase")
        if self.dt <= 0:
            raise ValueError("sampling time must be positive")

    @property
    def configs(self) -> list:
        return [p.config for p in self.phases]

    @property
    def durations(self) -> np.ndarray:
        return np.array([p.duration for p in self.phases])

    @property
    def total_duration(self) -> float:
        return float(self.durations.sum())

    @property
    def horizon(self) -> int:
        return len(self.phases)

    def swing_phases(self) -> list:
        """(phase index, leg) for each swing phase in order."""
        return [
            (k, p.swing_leg) for k, p in enumerate(self.phases) if p.swing_leg is not None
        ]

    @classmethod
    def from_pairs(cls, pairs, dt: float) -> "GaitSchedule":
        return cls(phases=[GaitPhase(c, float(d)) for c, d in pairs], dt=dt)


def build_node_grid(schedule: GaitSchedule) -> NodeGrid:
    """Snap phase boundaries to the grid and stamp per-node contact flags."""
    cum = np.cumsum(schedule.durations)
    # round-half-even on the snapped ratio; the 9-digit pre-round removes
    # float noise so exact half-interval boundaries tie-break consistently
    boundaries = np.array(
        [round(round(c / schedule.dt, 9)) for c in cum], dtype=int
    )
    starts = np.concatenate([[0], boundaries[:-1]])
    if np.any(boundaries - starts < 1):
        k = int(np.argmax(boundaries - starts < 1))
        raise PhaseTooShortError(
            f"phase {k} ({schedule.phases[k].config}) snaps to zero grid intervals"
        )
    n_nodes = int(boundaries[-1]) + 1
    times = np.arange(n_nodes) * schedule.dt
    phase_index = np.zeros(n_nodes, dtype=int)
    for k, (s, e) in enumerate(zip(starts, boundaries)):
        phase_index[s + 1 : e + 1] = k
    contact_flags = np.ones((n_nodes, NUM_LEGS), dtype=bool)
    for k, phase in enumerate(schedule.phases):
        if phase.swing_leg is not None:
            contact_flags[phase_index == k, phase.swing_leg] = False
    # node 0 always belongs to phase 0
    contact_flags[0] = schedule.phases[0].contact_flags()
    return NodeGrid(
        times=times,
        contact_flags=contact_flags,
        phase_index=phase_index,
        phase_boundaries=boundaries,
    )


def advance_horizon(schedule: GaitSchedule, cyclic_pattern) -> GaitSchedule:
    """Receding-horizon shift at a touchdown: drop the two completed phases,
    append the next two from the cyclic pattern.

    The pattern is a cyclic (config, duration) list alternating swing and F
    phases; the continuation point is found from the schedule's last swing
    config (swing configs are unique within one cycle of the shipped gaits).
    """
    pattern = [p if isinstance(p, GaitPhase) else GaitPhase(p[0], float(p[1])) for p in cyclic_pattern]
    if not pattern:
        raise ValueError("cyclic pattern must be nonempty")
    last_swing = next(
        (p.config for p in reversed(schedule.phases) if p.config != "F"), None
    )
    if last_swing is None:
        start = 0
    else:
        matches = [i for i, p in enumerate(pattern) if p.config == last_swing]
        if not matches:
            raise ValueError(f"schedule config {last_swing!r} not in cyclic pattern")
        # skip the pattern F that the schedule already contains after the swing
        start = matches[-1] + 1
        if start < len(pattern) and pattern[start % len(pattern)].config == "F":
            start += 1
    appended = [pattern[(start + i) % len(pattern)] for i in range(2)]
    return GaitSchedule(phases=schedule.phases[2:] + appended, dt=schedule.dt)

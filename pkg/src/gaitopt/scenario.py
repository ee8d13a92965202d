"""Declarative scenario configuration: terrain, gait, task, weights, events."""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field

import numpy as np
import yaml

from .constraints import FrictionModel
from .costs import CostWeights, ReachabilityParams
from .dynamics import NUM_LEGS, RobotParams, RobotState, foot_slice
from .gait import GaitSchedule
from .nominal import NominalSequence, TaskGoal
from .ocp import SolverSettings
from .qp import IpmSettings
from .terrain import Terrain
from .tracker import TrackerGains


@dataclass(frozen=True)
class NoiseSettings:
    """State-estimate perturbation applied to the planner's view only."""

    sigma_position: float = 0.0  # m, base position
    sigma_orientation: float = 0.0  # rad, base Euler angles

    def __post_init__(self):
        if self.sigma_position < 0 or self.sigma_orientation < 0:
            raise ValueError("noise deviations must be non-negative")


@dataclass(frozen=True)
class ScenarioEvent:
    """Scripted change applied at a simulation time."""

    time: float
    kind: str  # relocate | set_heading
    payload: dict

    def __post_init__(self):
        if self.kind not in ("relocate", "set_heading"):
            raise ValueError(f"unknown event kind {self.kind!r}")
        if self.time < 0:
            raise ValueError("event time must be non-negative")


@dataclass
class ScenarioConfig:
    name: str
    terrain: Terrain
    goal: TaskGoal
    initial_phases: list  # (config, duration) pairs
    cycle: list  # cyclic (config, duration) pattern
    weights: CostWeights
    reach: ReachabilityParams
    robot: RobotParams = field(default_factory=RobotParams)
    friction: FrictionModel = field(default_factory=FrictionModel)
    solver: SolverSettings = field(default_factory=SolverSettings)
    gains: TrackerGains = field(default_factory=TrackerGains)
    noise: NoiseSettings = field(default_factory=NoiseSettings)
    events: list = field(default_factory=list)
    steps: int = 4  # touchdown replans to execute
    dt: float = 0.02
    control_dt: float = 0.0025
    planner_latency: float | None = 0.06  # None: use measured solve time
    apex_height: float = 0.07
    start_base_xy: tuple = (0.0, 0.0)
    start_heading_offset: float = 0.0
    nominal_pinch: float = 0.0  # lateral foothold pinch (infeasible nominals)
    on_solver_failure: str = "halt"  # halt | continue
    log_decimation: int = 8
    feedforward_only: bool = False

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("need at least one step")
        if self.dt <= 0 or self.control_dt <= 0:
            raise ValueError("durations must be positive")
        if round(self.dt / self.control_dt) * self.control_dt != self.dt:
            raise ValueError("control_dt must divide the planning dt")
        if self.on_solver_failure not in ("halt", "continue"):
            raise ValueError("on_solver_failure must be halt or continue")
        if not (0.0 <= self.nominal_pinch < 1.0):
            raise ValueError("nominal_pinch must lie in [0, 1)")
        if self.planner_latency is not None and self.planner_latency < 0:
            raise ValueError("planner latency must be non-negative")
        GaitSchedule.from_pairs(self.initial_phases, self.dt)  # validates configs
        for pair in self.cycle:
            GaitSchedule.from_pairs([pair], self.dt)
        for ev in self.events:
            if ev.kind == "relocate":
                self.terrain.find_obstacle(ev.payload["id"])  # resolvable

    def schedule(self) -> GaitSchedule:
        return GaitSchedule.from_pairs(self.initial_phases, self.dt)

    def initial_state(self) -> RobotState:
        """Standing on the terrain at the start position."""
        base_xy = np.asarray(self.start_base_xy, dtype=float)
        feet = self.robot.nominal_stance.copy()
        feet[:, 0] += base_xy[0]
        feet[:, 1] += base_xy[1]
        heights = []
        for leg in range(NUM_LEGS):
            plane = self.terrain.surface_plane_at(feet[leg, 0], feet[leg, 1])
            feet[leg, 2] = plane.height_at(feet[leg, 0], feet[leg, 1])
            heights.append(feet[leg, 2])
        return RobotState(
            base_position=np.array(
                [base_xy[0], base_xy[1], float(np.mean(heights)) + self.goal.desired_height]
            ),
            base_orientation=np.zeros(3),
            base_linear_velocity=np.zeros(3),
            base_angular_velocity=np.zeros(3),
            foot_positions=feet,
        )

    # -- serialization -------------------------------------------------------

    @classmethod
    def from_dict(cls, raw: dict) -> "ScenarioConfig":
        terrain = Terrain.from_dict(raw.get("terrain", {"planes": [{"normal": [0, 0, 1], "offset": 0.0}]}))
        goal_raw = raw["goal"]
        goal = TaskGoal(
            heading=np.asarray(goal_raw.get("heading", [1.0, 0.0]), dtype=float),
            step_length=float(goal_raw["step_length"]),
            desired_height=float(goal_raw["desired_height"]),
        )
        gait = raw["gait"]
        weights = CostWeights.from_dict(raw["weights"])
        reach_raw = raw.get("reachability", {})
        reach = ReachabilityParams(
            nominal_height=float(reach_raw.get("nominal_height", goal.desired_height)),
            altered_height=float(reach_raw.get("altered_height", 0.25)),
            foot_distance_x=float(reach_raw.get("foot_distance_x", 0.6)),
            foot_distance_y=float(reach_raw.get("foot_distance_y", 0.4)),
        )
        robot = RobotParams.from_dict(raw["robot"]) if "robot" in raw else RobotParams()
        fr = raw.get("friction", {})
        friction = FrictionModel(
            mu=float(fr.get("mu", 0.7)),
            face_count=int(fr.get("face_count", 4)),
            lambda_z_max=float(
                fr.get("lambda_z_max", 2.0 * robot.mass * np.linalg.norm(robot.gravity))
            ),
        )
        solver = _solver_from_dict(raw.get("solver", {}))
        gains = TrackerGains.from_dict(raw.get("tracker", {}))
        noise_raw = raw.get("noise", {})
        noise = NoiseSettings(
            sigma_position=float(noise_raw.get("sigma_position", 0.0)),
            sigma_orientation=float(noise_raw.get("sigma_orientation", 0.0)),
        )
        events = [
            ScenarioEvent(
                time=float(ev["time"]),
                kind=ev["kind"],
                payload={k: v for k, v in ev.items() if k not in ("time", "kind")},
            )
            for ev in raw.get("events", [])
        ]
        sim = raw.get("simulation", {})
        return cls(
            name=raw.get("name", "scenario"),
            terrain=terrain,
            goal=goal,
            initial_phases=[(p["config"], float(p["duration"])) for p in gait["initial"]],
            cycle=[(p["config"], float(p["duration"])) for p in gait["cycle"]],
            weights=weights,
            reach=reach,
            robot=robot,
            friction=friction,
            solver=solver,
            gains=gains,
            noise=noise,
            events=events,
            steps=int(sim.get("steps", 4)),
            dt=float(gait.get("dt", 0.02)),
            control_dt=float(sim.get("control_dt", 0.0025)),
            planner_latency=(
                None if sim.get("planner_latency", 0.06) is None
                else float(sim.get("planner_latency", 0.06))
            ),
            apex_height=float(sim.get("apex_height", 0.07)),
            start_base_xy=tuple(sim.get("start_base_xy", (0.0, 0.0))),
            nominal_pinch=float(sim.get("nominal_pinch", 0.0)),
            on_solver_failure=sim.get("on_solver_failure", "halt"),
            log_decimation=int(sim.get("log_decimation", 8)),
            feedforward_only=bool(sim.get("feedforward_only", False)),
        )

    @classmethod
    def from_file(cls, path) -> "ScenarioConfig":
        with open(path) as f:
            return cls.from_dict(yaml.safe_load(f))

    @classmethod
    def shipped(cls, name: str) -> "ScenarioConfig":
        """Load one of the packaged scenario files by bare name."""
        ref = importlib.resources.files("gaitopt") / "configs" / f"{name}.yaml"
        return cls.from_dict(yaml.safe_load(ref.read_text()))


SHIPPED_SCENARIOS = (
    "flat_walk",
    "relocated_box",
    "gap_crossing",
    "footstep_discovery",
    "stairs",
)


def _solver_from_dict(raw: dict) -> SolverSettings:
    ipm_raw = raw.get("ipm", {})
    ipm = IpmSettings(
        max_iterations=int(ipm_raw.get("max_iterations", 50)),
        tolerance=float(ipm_raw.get("tolerance", 1e-9)),
        gap_tolerance=float(ipm_raw.get("gap_tolerance", 1e-9)),
        barrier_reduction=float(ipm_raw.get("barrier_reduction", 0.2)),
        mehrotra=bool(ipm_raw.get("mehrotra", True)),
    )
    return SolverSettings(
        max_iterations=int(raw.get("max_iterations", 30)),
        cost_tolerance=float(raw.get("cost_tolerance", 1e-6)),
        constraint_tolerance=float(raw.get("constraint_tolerance", 1e-6)),
        defect_tolerance=float(raw.get("defect_tolerance", 1e-6)),
        backtracking_factor=float(raw.get("backtracking_factor", 0.5)),
        min_step=float(raw.get("min_step", 1e-6)),
        ipm=ipm,
    )


def pinch_nominal_footholds(nominal: NominalSequence, pinch: float) -> NominalSequence:
    """Collapse nominal footholds laterally toward the base track.

    Produces kinematically poor (reachability-violating) foothold references
    while keeping them on their contact planes; used by the footstep
    discovery scenario, where the base task dominates.
    """
    if pinch == 0.0:
        return nominal
    states = []
    for x in nominal.states:
        x = x.copy()
        base_y = x[1]
        for leg in range(NUM_LEGS):
            fs = foot_slice(leg)
            x[fs.start + 1] = base_y + (x[fs.start + 1] - base_y) * (1.0 - pinch)
        states.append(x)
    planes = [list(p) for p in nominal.planes]
    # re-anchor so the plane invariant survives on non-horizontal planes
    for k, x in enumerate(states):
        for leg in range(NUM_LEGS):
            res = planes[k][leg].evaluate(x[foot_slice(leg)])
            if abs(res) > 1e-12:
                planes[k][leg] = planes[k][leg].anchored_at(x[foot_slice(leg)])
    return NominalSequence(states=states, planes=planes, goal=nominal.goal)

"""Closed-loop scenario simulation with replanning at every touchdown.

The plant is the reduced model itself, integrated at the control rate; a
task-space tracker follows the newest activated plan.  At each touchdown
the horizon advances, the nominal sequence is regenerated from the latest
(optionally noise-perturbed) state estimate, and a fresh plan is solved
cold.  A new plan takes effect only after the configured planner latency,
so the tracker briefly follows the old plan's second step, as on the real
system.  Obstacle relocations are serialized through the simulation loop
and take effect at the next replan.
"""

from __future__ import annotations

import json
import time
from collections import deque
from dataclasses import replace

import numpy as np

from .dynamics import NUM_LEGS, P, TH, RobotState, foot_slice, force_slice
from .gait import advance_horizon
from .nominal import generate_nominal_sequence
from .ocp import build_locomotion_problem
from .scenario import ScenarioConfig, pinch_nominal_footholds
from .slq import solve
from .swing import build_swing
from .tracker import track_interval

_TIME_EPS = 1e-9


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


class SimulationLog:
    """Ordered, typed record stream; one JSON object per line on disk."""

    KINDS = ("state", "plan", "replan", "event", "diagnostics")

    def __init__(self):
        self.records = []
        self.listeners = []

    def add(self, kind: str, t: float, **payload):
        if kind not in self.KINDS:
            raise ValueError(f"unknown record kind {kind!r}")
        record = {"kind": kind, "t": round(float(t), 9)}
        record.update(_jsonable(payload))
        self.records.append(record)
        for listener in self.listeners:
            listener(record)
        return record

    def query(self, kind: str) -> list:
        return [r for r in self.records if r["kind"] == kind]

    def dump_jsonl(self, path):
        with open(path, "w") as f:
            for record in self.records:
                f.write(json.dumps(record) + "\n")

    @classmethod
    def load_jsonl(cls, path) -> "SimulationLog":
        log = cls()
        with open(path) as f:
            for line in f:
                line = line.strip()
                if line:
                    log.records.append(json.loads(line))
        return log


class ActivePlan:
    """A solved trajectory bound to absolute simulation time, with the
    executed swing splines and the per-node contact planes."""

    def __init__(self, solution, grid, schedule, node_planes, t_start,
                 activation_time, apex_height):
        self.solution = solution
        self.grid = grid
        self.schedule = schedule
        self.node_planes = node_planes
        self.t_start = float(t_start)
        self.activation_time = float(activation_time)
        self.apex_height = float(apex_height)
        self._dt = grid.times[1] - grid.times[0]
        self._stage_flags = grid.stage_in_contact()
        self._touchdowns = grid.touchdown_nodes()

        self.splines = {leg: [] for leg in range(NUM_LEGS)}
        boundaries = np.concatenate([[0], grid.phase_boundaries])
        for k, phase in enumerate(schedule.phases):
            leg = phase.swing_leg
            if leg is None:
                continue
            lift, touch = int(boundaries[k]), int(boundaries[k + 1])
            p0 = solution.states[lift][foot_slice(leg)]
            p1 = solution.states[touch][foot_slice(leg)]
            duration = grid.times[touch] - grid.times[lift]
            self.splines[leg].append(
                (grid.times[lift], duration, build_swing(p0, p1, duration, self.apex_height))
            )

    # -- tracker interface ----------------------------------------------

    def _local(self, t: float) -> float:
        return float(np.clip(t - self.t_start, 0.0, self.grid.times[-1]))

    def stage_flags_at(self, t: float):
        n = int(np.clip(self._local(t) / self._dt, 0, len(self._stage_flags) - 1))
        return self._stage_flags[n]

    def reference_state(self, t: float):
        return self.solution.state_at(self._local(t))

    def feedforward(self, t: float):
        return self.solution.input_at(self._local(t))

    def swing_target(self, t: float, leg: int):
        local = self._local(t)
        for t0, duration, spline in self.splines[leg]:
            if t0 - _TIME_EPS <= local <= t0 + duration + _TIME_EPS:
                pos, vel, _ = spline.evaluate(np.clip(local - t0, 0.0, duration))
                return pos, vel
        return None

    def plane_normal(self, t: float, leg: int):
        local = self._local(t)
        n = int(np.clip(local / self._dt, 0, len(self._stage_flags) - 1))
        node = min(n + 1, len(self.node_planes) - 1)
        plane = self.node_planes[node][leg]
        if plane is None:
            plane = next((p[leg] for p in self.node_planes[node:] if p[leg]), None)
        return plane.normal if plane is not None else np.array([0.0, 0.0, 1.0])

    # -- bookkeeping ------------------------------------------------------

    def touchdown_times(self) -> list:
        return [
            (self.t_start + self.grid.times[node], leg)
            for node, leg in self._touchdowns
        ]

    def segments(self):
        """Split at the first touchdown: the tracked first step and the
        attractor second step."""
        split = self._touchdowns[0][0] if self._touchdowns else len(self.grid.times) - 1

        def pack(sl):
            states = self.solution.states[sl]
            return {
                "t": (self.t_start + self.grid.times[sl]),
                "base": states[:, 0:3],
                "orientation": states[:, 3:6],
                "feet": states[:, 12:].reshape(len(states), NUM_LEGS, 3),
            }

        return pack(slice(0, split + 1)), pack(slice(split, len(self.grid.times)))


class SolverFailure(RuntimeError):
    pass


class Simulation:
    """Scenario event loop: three logical roles (plant, planner, API feed)
    serialized through the tick to keep runs reproducible."""

    def __init__(self, config: ScenarioConfig, seed: int = 0):
        self.config = config
        self.seed = int(seed)
        self.rng = np.random.default_rng(self.seed)
        self.terrain = config.terrain.copy()
        self.goal = config.goal
        self.schedule = config.schedule()
        self.state = config.initial_state().to_vector()
        self.t = 0.0
        self.tick_index = 0
        self.plans = []
        self.log = SimulationLog()
        self.steps_done = 0
        self.finished = False
        self.command_queue = deque()
        self._events = sorted(config.events, key=lambda e: e.time)
        self._event_idx = 0
        self._next_replan_t = 0.0
        self.solve_stats = []  # wall-clock diagnostics, never logged
        self.log.add(
            "event", 0.0, event="scenario_start", name=config.name, seed=self.seed,
            terrain=self.terrain.to_dict(), steps=config.steps,
            heading=list(self.goal.heading),
        )

    # -- external surface --------------------------------------------------

    def relocate_obstacle(self, obstacle_id: str, new_center, source="api"):
        """Move a declared obstacle; applied between control ticks."""
        self.terrain.relocate(obstacle_id, np.asarray(new_center, dtype=float))
        self.log.add(
            "event",
            self.t,
            event="relocate",
            id=obstacle_id,
            center=list(np.asarray(new_center, dtype=float)),
            source=source,
        )

    def set_heading(self, heading, source="api"):
        self.goal = replace(self.goal, heading=np.asarray(heading, dtype=float))
        self.log.add("event", self.t, event="set_heading",
                     heading=list(self.goal.heading), source=source)

    def queue_command(self, command: dict):
        """Thread-safe enough for one producer: processed at the next tick."""
        self.command_queue.append(command)

    def active_plan(self) -> ActivePlan | None:
        current = None
        for plan in self.plans:
            if plan.activation_time <= self.t + _TIME_EPS:
                current = plan
        return current

    # -- internals ----------------------------------------------------------

    def _apply_command(self, cmd: dict):
        kind = cmd.get("command")
        if kind == "relocate":
            self.relocate_obstacle(cmd["id"], cmd["center"], source=cmd.get("source", "api"))
        elif kind == "set_heading":
            self.set_heading(cmd["heading"], source=cmd.get("source", "api"))
        else:
            raise ValueError(f"unknown command {kind!r}")

    def _planner_state(self) -> RobotState:
        x = self.state.copy()
        noise = self.config.noise
        if noise.sigma_position > 0:
            x[P] = x[P] + self.rng.normal(0.0, noise.sigma_position, 3)
        if noise.sigma_orientation > 0:
            x[TH] = x[TH] + self.rng.normal(0.0, noise.sigma_orientation, 3)
        return RobotState.from_vector(x)

    def _replan(self, advance: bool):
        if advance:
            self.schedule = advance_horizon(self.schedule, self.config.cycle)
        est = self._planner_state()
        cfg = self.config
        try:
            nominal = generate_nominal_sequence(est, self.goal, self.schedule, self.terrain)
            nominal = pinch_nominal_footholds(nominal, cfg.nominal_pinch)
            lp = build_locomotion_problem(
                est, self.schedule, nominal, self.terrain,
                cfg.weights, cfg.reach, cfg.friction, cfg.robot,
            )
            tic = time.perf_counter()
            solution = solve(lp.ocp, cfg.solver)
            wall = time.perf_counter() - tic
            if not solution.converged:
                raise SolverFailure(f"solver did not converge: {solution.status}")
        except Exception as exc:  # failure policy decides
            self.log.add("event", self.t, event="solver_failure", error=str(exc))
            if cfg.on_solver_failure == "halt":
                self.finished = True
                return
            active = self.active_plan()
            tds = active.touchdown_times() if active else []
            later = [t for t, _ in tds if t > self._next_replan_t + _TIME_EPS]
            if later:
                self._next_replan_t = later[0]
            else:
                self.finished = True
            return

        if cfg.planner_latency is not None:
            latency = cfg.planner_latency
        else:
            latency = np.ceil(wall / cfg.control_dt) * cfg.control_dt
        activation = self.t + (latency if self.plans else 0.0)
        plan = ActivePlan(
            solution, lp.grid, self.schedule, lp.planes,
            t_start=self.t, activation_time=activation,
            apex_height=cfg.apex_height,
        )
        self.plans.append(plan)
        self.solve_stats.append(
            {"t": self.t, "wall_s": wall,
             "per_iteration_ms": list(solution.iteration_times_ms),
             "iterations": solution.iterations}
        )

        X0, _ = lp.ocp.initial_guess()
        base_cost_guess = _base_task_cost(X0, lp.refs, cfg.weights)
        base_cost_solution = _base_task_cost(solution.states, lp.refs, cfg.weights)
        touchdowns = [
            {"leg": leg, "t": round(t_td, 9),
             "position": self._planned_touchdown(plan, t_td, leg)}
            for t_td, leg in plan.touchdown_times()
        ]
        self.log.add(
            "replan", self.t,
            iterations=solution.iterations,
            converged=solution.converged,
            cost=solution.cost,
            eq_residual=solution.max_equality_residual,
            ineq_violation=solution.max_inequality_violation,
            defect=solution.max_defect,
            qp_iterations=solution.qp_iterations,
            gait=self.schedule.configs,
            activation=activation,
            touchdowns=touchdowns,
            base_cost_solution=base_cost_solution,
            base_cost_guess=base_cost_guess,
        )
        first, second = plan.segments()
        self.log.add("plan", self.t, activation=activation,
                     t_start=plan.t_start, first=first, second=second)
        self.log.add(
            "diagnostics", self.t,
            cost_history=solution.cost_history,
            qp_iterations=solution.qp_iterations,
            status=solution.status,
        )
        self._next_replan_t = plan.touchdown_times()[0][0] if plan.touchdown_times() else np.inf

    @staticmethod
    def _planned_touchdown(plan, t_td, leg):
        node = int(round((t_td - plan.t_start) / (plan.grid.times[1] - plan.grid.times[0])))
        return plan.solution.states[node][foot_slice(leg)]

    def tick(self):
        """One control period: commands, events, replanning, tracking."""
        if self.finished:
            return
        while self.command_queue:
            cmd = self.command_queue.popleft()
            try:
                self._apply_command(cmd)
            except (KeyError, ValueError) as exc:
                self.log.add("event", self.t, event="command_error",
                             command=cmd.get("command"), error=str(exc))
        while (
            self._event_idx < len(self._events)
            and self._events[self._event_idx].time <= self.t + _TIME_EPS
        ):
            ev = self._events[self._event_idx]
            self._event_idx += 1
            if ev.kind == "relocate":
                self.relocate_obstacle(ev.payload["id"], ev.payload["center"], source="scripted")
            elif ev.kind == "set_heading":
                self.set_heading(ev.payload["heading"], source="scripted")

        if self.t >= self._next_replan_t - _TIME_EPS:
            if not self.plans:
                self._replan(advance=False)
            else:
                self.steps_done += 1
                self.log.add("event", self.t, event="touchdown", step=self.steps_done)
                if self.steps_done >= self.config.steps:
                    self.finished = True
                else:
                    self._replan(advance=True)
            if self.finished:
                return

        plan = self.active_plan()
        if plan is None:
            self.finished = True
            return
        cfg = self.config
        gains = cfg.gains if not cfg.feedforward_only else cfg.gains.zero()
        self.state, forces, _ = track_interval(
            plan, self.state, self.t, gains, cfg.robot, cfg.friction, cfg.control_dt
        )
        if self.tick_index % cfg.log_decimation == 0:
            u_ff = plan.feedforward(self.t)
            planned_fz = [float(u_ff[force_slice(leg)][2]) for leg in range(NUM_LEGS)]
            self.log.add(
                "state", self.t,
                base=self.state[0:3],
                orientation=self.state[3:6],
                velocity=self.state[6:9],
                omega=self.state[9:12],
                feet=self.state[12:].reshape(NUM_LEGS, 3),
                forces=forces,
                planned_fz=planned_fz,
            )
        self.tick_index += 1
        self.t = self.tick_index * cfg.control_dt

    def run(self) -> SimulationLog:
        while not self.finished:
            self.tick()
        self.log.add("event", self.t, event="scenario_end",
                     steps=self.steps_done,
                     final_base=self.state[0:3],
                     final_feet=self.state[12:].reshape(NUM_LEGS, 3))
        return self.log


def _base_task_cost(states, refs, weights) -> float:
    """Base-pose/twist tracking portion of the objective along a trajectory."""
    qb = weights.q_base
    err = refs.x_d[None, :12] - states[:-1, :12]
    running = float(np.einsum("ni,i,ni->", err, qb, err))
    err_f = refs.x_df[:12] - states[-1, :12]
    return running + float(err_f @ (weights.q_final[:12] * err_f))


def run_scenario(config: ScenarioConfig, seed: int = 0) -> SimulationLog:
    """Execute a scenario headless and return its log."""
    return Simulation(config, seed=seed).run()

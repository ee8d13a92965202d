"""Optimal control problem container and the locomotion problem assembly.

The container is generic: dynamics and cost objects are duck-typed so the
solver runs unit problems (double integrators, toy LQs) unchanged.  The
assembly function builds the full quadruped problem for one planning
horizon: node grid from the gait, phase-switched constraint sets with the
contact planes taken from the nominal sequence, tracking + reachability
costs, and the gravity-distributing cold-start guess.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constraints import FrictionModel, PhaseConstraintSet
from .costs import (
    CostWeights,
    QuadraticCostModel,
    ReachabilityParams,
    ReferenceStates,
    build_reachability,
)
from .dynamics import (
    NU,
    NX,
    NUM_LEGS,
    RobotParams,
    RobotState,
    discrete_jacobians_batch,
    foot_slice,
    force_slice,
    rk4_step_batch,
)
from .gait import GaitSchedule, NodeGrid, build_node_grid
from .nominal import NominalSequence
from .qp import IpmSettings
from .terrain import Terrain


class RigidBodyDynamics:
    """Batched shooting interface over the reduced momentum model."""

    def __init__(self, params: RobotParams):
        self.params = params

    def step_batch(self, X, U, dt):
        return rk4_step_batch(X, U, self.params, dt)

    def discrete_jacobians(self, X, U, dt):
        return discrete_jacobians_batch(X, U, self.params, dt)


@dataclass
class SolverSettings:
    """Outer-loop and subproblem tolerances."""

    max_iterations: int = 30
    cost_tolerance: float = 1e-6  # relative cost decrease
    constraint_tolerance: float = 1e-6
    defect_tolerance: float = 1e-6
    backtracking_factor: float = 0.5
    min_step: float = 1e-6
    merit_penalty: float = 10.0
    regularization_init: float = 1e-6
    regularization_factor: float = 10.0
    regularization_retries: int = 6
    ipm: IpmSettings = field(default_factory=lambda: IpmSettings(tolerance=1e-9, gap_tolerance=1e-9))

    def __post_init__(self):
        if not (0 < self.backtracking_factor < 1):
            raise ValueError("backtracking factor must lie in (0, 1)")
        for name in ("cost_tolerance", "constraint_tolerance", "defect_tolerance", "min_step"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class OptimalControlProblem:
    """Node grid, dynamics, per-node constraint sets, costs, initial state."""

    times: np.ndarray
    x0: np.ndarray
    dynamics: object  # step_batch / discrete_jacobians
    cost: object  # stage_costs / stage_gradients / hess_x / hess_u / final / final_quadratic
    constraints: list  # per node: PhaseConstraintSet-like or None
    guess: tuple | None = None  # optional (X, U) cold-start override
    nu: int = NU

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.x0 = np.asarray(self.x0, dtype=float)
        if len(self.times) < 2:
            raise ValueError("need at least two nodes")
        if not np.all(np.isfinite(self.x0)):
            raise ValueError("initial state must be finite")
        if len(self.constraints) != len(self.times):
            raise ValueError("need one constraint set (or None) per node")

    @property
    def node_count(self) -> int:
        return len(self.times)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def nx(self) -> int:
        return len(self.x0)

    def initial_guess(self):
        if self.guess is not None:
            X, U = self.guess
            return X.copy(), U.copy()
        N = self.node_count - 1
        return np.tile(self.x0, (N + 1, 1)), np.zeros((N, self.nu))


@dataclass
class TrajectorySolution:
    """Optimized trajectories plus per-node residuals and diagnostics."""

    times: np.ndarray
    states: np.ndarray  # (N+1, nx)
    inputs: np.ndarray  # (N, nu)
    eq_residuals: list  # per node arrays (from the stored trajectories)
    ineq_residuals: list  # per node arrays, satisfied iff >= 0
    defects: np.ndarray  # (N, nx)
    cost: float
    cost_history: list
    iterations: int
    iteration_times_ms: list
    status: str  # converged | max_iterations | stalled
    qp_iterations: list = field(default_factory=list)
    merit_history: list = field(default_factory=list)  # (before, after) per accepted step

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    @property
    def max_equality_residual(self) -> float:
        vals = [np.abs(r).max() for r in self.eq_residuals if r.size]
        return float(max(vals)) if vals else 0.0

    @property
    def max_inequality_violation(self) -> float:
        vals = [np.maximum(0.0, -r).max() for r in self.ineq_residuals if r.size]
        return float(max(vals)) if vals else 0.0

    @property
    def max_defect(self) -> float:
        return float(np.abs(self.defects).max()) if self.defects.size else 0.0

    def state_at(self, t: float) -> np.ndarray:
        """Linear interpolation of the state trajectory."""
        t = float(np.clip(t, self.times[0], self.times[-1]))
        n = int(np.clip(np.searchsorted(self.times, t, side="right") - 1,
                        0, len(self.times) - 2))
        span = self.times[n + 1] - self.times[n]
        w = (t - self.times[n]) / span if span > 0 else 0.0
        return (1.0 - w) * self.states[n] + w * self.states[n + 1]

    def input_at(self, t: float) -> np.ndarray:
        """Zero-order-hold input lookup."""
        n = int(np.clip(np.searchsorted(self.times, t, side="right") - 1,
                        0, len(self.inputs) - 1))
        return self.inputs[n]


@dataclass
class LocomotionProblem:
    """The assembled OCP plus the gait/nominal context the simulator needs."""

    ocp: OptimalControlProblem
    grid: NodeGrid
    schedule: GaitSchedule
    nominal: NominalSequence
    refs: ReferenceStates
    touchdowns: list  # (node, leg)
    planes: list  # per node, per leg (None for swing)


def build_locomotion_problem(
    x0: RobotState,
    schedule: GaitSchedule,
    nominal: NominalSequence,
    terrain: Terrain,
    weights: CostWeights,
    reach: ReachabilityParams,
    friction: FrictionModel,
    params: RobotParams,
) -> LocomotionProblem:
    """Assemble the switched-constraint tracking problem for one horizon."""
    grid = build_node_grid(schedule)
    n_nodes = grid.node_count
    touchdowns = grid.touchdown_nodes()
    touchdown_set = set(touchdowns)

    qh, xh = build_reachability(reach)
    refs = ReferenceStates(x_d=nominal.final_state, x_df=nominal.final_state, x_h=xh, q_h=qh)
    cost = QuadraticCostModel(weights, refs)

    obstacles = list(terrain.spheres)
    node_planes = []
    constraint_sets = []
    for n in range(n_nodes):
        phase = grid.phase_index[n]
        state_flags = grid.contact_flags[n]
        input_flags = grid.contact_flags[min(n + 1, n_nodes - 1)]
        planes = [
            nominal.planes[phase][leg]
            if (state_flags[leg] or input_flags[leg])
            else None
            for leg in range(NUM_LEGS)
        ]
        # a touchdown node takes the plane of the phase being entered
        for (td_node, leg) in touchdown_set:
            if td_node == n:
                next_phase = grid.phase_index[min(n + 1, n_nodes - 1)]
                planes[leg] = nominal.planes[next_phase][leg]
        plane_in_qp = np.array(
            [(n, leg) in touchdown_set for leg in range(NUM_LEGS)]
        )
        constraint_sets.append(
            PhaseConstraintSet(
                contact_flags=input_flags,
                friction=friction,
                planes=planes,
                obstacles=obstacles,
                plane_in_qp=plane_in_qp,
                state_contact_flags=state_flags,
            )
        )
        node_planes.append(planes)

    x0_vec = x0.to_vector()
    guess = _cold_start(x0_vec, nominal, grid, params)
    ocp = OptimalControlProblem(
        times=grid.times,
        x0=x0_vec,
        dynamics=RigidBodyDynamics(params),
        cost=cost,
        constraints=constraint_sets,
        guess=guess,
        nu=NU,
    )
    return LocomotionProblem(
        ocp=ocp,
        grid=grid,
        schedule=schedule,
        nominal=nominal,
        refs=refs,
        touchdowns=touchdowns,
        planes=node_planes,
    )


def _cold_start(x0: np.ndarray, nominal: NominalSequence, grid: NodeGrid, params: RobotParams):
    """Linear base interpolation toward the nominal final state, feet tracking
    their nominal footholds, inputs distributing gravity evenly over the
    stance legs; no warm start from previous solutions."""
    n_nodes = grid.node_count
    N = n_nodes - 1
    X = np.zeros((n_nodes, NX))
    xf = nominal.final_state
    alphas = np.linspace(0.0, 1.0, n_nodes)
    X[:, :12] = (1 - alphas)[:, None] * x0[None, :12] + alphas[:, None] * xf[None, :12]

    # feet: hold the current foothold, move linearly to the nominal target
    # across each swing phase
    for leg in range(NUM_LEGS):
        fs = foot_slice(leg)
        current = x0[fs].copy()
        n = 0
        while n < n_nodes:
            if grid.contact_flags[n, leg]:
                X[n, fs] = current
                n += 1
                continue
            swing_nodes = [n]
            while n + 1 < n_nodes and not grid.contact_flags[n + 1, leg]:
                n += 1
                swing_nodes.append(n)
            phase = grid.phase_index[swing_nodes[-1]]
            target = nominal.footholds(phase)[leg]
            k = len(swing_nodes)
            for j, m in enumerate(swing_nodes):
                w = (j + 1) / k
                X[m, fs] = (1 - w) * current + w * target
            current = target.copy()
            n += 1

    U = np.zeros((N, NU))
    stage_flags = grid.stage_in_contact()
    g_norm = float(np.linalg.norm(params.gravity))
    for n in range(N):
        stance = np.nonzero(stage_flags[n])[0]
        if stance.size:
            fz = params.mass * g_norm / stance.size
            for leg in stance:
                U[n, force_slice(leg)] = [0.0, 0.0, fz]
    return X, U

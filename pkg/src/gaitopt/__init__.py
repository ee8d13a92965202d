"""Online base and footstep trajectory optimization for quadruped locomotion."""

from .constraints import (
    FrictionModel,
    PhaseConstraintSet,
    assign_contact_plane,
    evaluate_node_constraints,
    friction_pyramid_matrix,
)
from .costs import (
    CostWeights,
    ReachabilityParams,
    ReferenceStates,
    build_reachability,
    final_cost,
    quadratize,
    running_cost,
)
from .dynamics import (
    ControlInput,
    RobotParams,
    RobotState,
    SingularOrientationError,
    euler_rate_matrix,
    euler_xyz_rotation,
    evaluate_dynamics,
    integrate_step,
    linearize,
)
from .gait import GaitPhase, GaitSchedule, advance_horizon, build_node_grid
from .nominal import (
    NominalSequence,
    TaskGoal,
    generate_nominal_sequence,
    project_to_surface,
    resolve_gap,
)
from .ocp import (
    OptimalControlProblem,
    SolverSettings,
    TrajectorySolution,
    build_locomotion_problem,
)
from .qp import IpmInfeasibleError, LqProblem, LqStage, NanDetectedError, solve_lq
from .scenario import ScenarioConfig, ScenarioEvent
from .sim import Simulation, SimulationLog, run_scenario
from .slq import compute_defects, line_search, solve
from .swing import SwingSpline, build_swing
from .terrain import (
    BoxObstacle,
    ContactPlane,
    GapVolume,
    SphereObstacle,
    Terrain,
)
from .tracker import TrackerGains, track_interval

__version__ = "0.1.0"

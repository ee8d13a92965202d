import numpy as np

from gaitopt.constraints import FrictionModel
from gaitopt.costs import CostWeights, ReachabilityParams
from gaitopt.dynamics import (
    NX,
    RobotParams,
    RobotState,
    foot_slice,
    force_slice,
)
from gaitopt.gait import GaitSchedule
from gaitopt.nominal import TaskGoal, generate_nominal_sequence
from gaitopt.ocp import (
    OptimalControlProblem,
    SolverSettings,
    build_locomotion_problem,
)
from gaitopt.slq import (
    build_subproblem,
    compute_defects,
    evaluate_trajectory,
    line_search,
    solve,
)
from gaitopt.terrain import ContactPlane, Terrain

PARAMS = RobotParams()
FRICTION = FrictionModel(mu=0.7, lambda_z_max=2 * 30.0 * 9.81)
REACH = ReachabilityParams(
    nominal_height=0.45, altered_height=0.25, foot_distance_x=0.6, foot_distance_y=0.4
)


def default_weights(r_contact=1e-5):
    return CostWeights(
        q_base=np.concatenate([np.full(3, 10.0), np.full(3, 5.0), np.full(6, 1.0)]),
        q_footstep=np.full(12, 50.0),
        q_final=10.0
        * np.concatenate([np.full(3, 10.0), np.full(3, 5.0), np.full(6, 1.0), np.full(12, 50.0)]),
        r_contact=np.full(12, r_contact),
        r_velocity=np.full(12, 1e-2),
        w_reach=1.0,
    )


def standing_state(base_xy=(0.0, 0.0)):
    feet = PARAMS.nominal_stance.copy()
    feet[:, 0] += base_xy[0]
    feet[:, 1] += base_xy[1]
    feet[:, 2] = 0.0
    return RobotState(
        base_position=np.array([base_xy[0], base_xy[1], 0.45]),
        base_orientation=np.zeros(3),
        base_linear_velocity=np.zeros(3),
        base_angular_velocity=np.zeros(3),
        foot_positions=feet,
    )


def locomotion_problem(
    pairs, base_xy=(0.0, 0.0), terrain=None, weights=None, step=0.15
):
    terrain = terrain or Terrain(planes=[ContactPlane(normal=[0, 0, 1], offset=0.0)])
    x0 = standing_state(base_xy)
    schedule = GaitSchedule.from_pairs(pairs, dt=0.02)
    goal = TaskGoal(heading=[1.0, 0.0], step_length=step, desired_height=0.45)
    nominal = generate_nominal_sequence(x0, goal, schedule, terrain)
    return build_locomotion_problem(
        x0, schedule, nominal, terrain, weights or default_weights(), REACH, FRICTION, PARAMS
    )


# ---------------------------------------------------------------------------
# toy model + quadratic cost used by the LQR oracle tests
# ---------------------------------------------------------------------------


class LinearModel:
    def __init__(self, A, B):
        self.A, self.B = A, B

    def step_batch(self, X, U, dt):
        return X @ self.A.T + U @ self.B.T

    def discrete_jacobians(self, X, U, dt):
        n = X.shape[0]
        return (
            np.broadcast_to(self.A, (n, *self.A.shape)).copy(),
            np.broadcast_to(self.B, (n, *self.B.shape)).copy(),
        )


class QuadCost:
    """sum x'Qx + u'Ru + terminal x'Qf x (no references)."""

    def __init__(self, Q, R, Qf):
        self.Q, self.R, self.Qf = Q, R, Qf
        self.hess_x = 2.0 * Q
        self.hess_u = 2.0 * R

    def total(self, X, U):
        stage = np.einsum("ni,ij,nj->", X[:-1], self.Q, X[:-1])
        stage += np.einsum("ni,ij,nj->", U, self.R, U)
        return float(stage + X[-1] @ self.Qf @ X[-1])

    def stage_gradients(self, X, U):
        return 2.0 * X @ self.Q.T, 2.0 * U @ self.R.T

    def final_quadratic(self, x):
        return 2.0 * self.Qf @ x, 2.0 * self.Qf


def lqr_oracle(A, B, Q, R, Qf, x0, N):
    """Textbook finite-horizon discrete LQR for sum x'Qx + u'Ru + x'Qf x."""
    P = Qf
    gains = []
    for _ in range(N):
        K = np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)
        P = Q + A.T @ P @ (A - B @ K)
        gains.append(K)
    gains.reverse()
    xs, us = [x0], []
    for n in range(N):
        u = -gains[n] @ xs[-1]
        us.append(u)
        xs.append(A @ xs[-1] + B @ u)
    return np.array(xs), np.array(us)


def double_integrator_problem(x0, N=40, dt=0.1):
    A = np.array([[1.0, dt], [0.0, 1.0]])
    B = np.array([[0.5 * dt**2], [dt]])
    Q = np.diag([1.0, 0.1])
    R = np.array([[0.01]])
    Qf = np.diag([100.0, 10.0])
    problem = OptimalControlProblem(
        times=np.arange(N + 1) * dt,
        x0=np.asarray(x0, dtype=float),
        dynamics=LinearModel(A, B),
        cost=QuadCost(Q, R, Qf),
        constraints=[None] * (N + 1),
        nu=1,
    )
    return problem, (A, B, Q, R, Qf)


class TestLqrOracle:
    def test_matches_analytic_lqr(self):
        x0 = np.array([1.0, -0.5])
        problem, (A, B, Q, R, Qf) = double_integrator_problem(x0)
        sol = solve(problem)
        assert sol.converged
        xs_ref, us_ref = lqr_oracle(A, B, Q, R, Qf, x0, 40)
        assert np.abs(sol.states - xs_ref).max() <= 1e-6
        assert np.abs(sol.inputs - us_ref).max() <= 1e-6

    def test_linear_quadratic_converges_in_one_iteration(self):
        problem, _ = double_integrator_problem([0.5, 0.2])
        sol = solve(problem)
        assert sol.iterations <= 2  # exact Newton step + convergence check


class TestComputeDefects:
    def test_pure_rollout_has_zero_defects(self):
        problem, _ = double_integrator_problem([1.0, 0.0], N=10)
        X, U = problem.initial_guess()
        rng = np.random.default_rng(0)
        U = rng.normal(size=U.shape)
        for n in range(10):
            X[n + 1] = problem.dynamics.step_batch(X[n : n + 1], U[n : n + 1], 0.1)[0]
        d = compute_defects(problem, X, U)
        assert np.abs(d).max() <= 1e-12

    def test_perturbation_shifts_one_defect_exactly(self):
        problem, _ = double_integrator_problem([1.0, 0.0], N=10)
        X, U = problem.initial_guess()
        d0 = compute_defects(problem, X, U)
        delta = np.array([0.3, -0.2])
        X2 = X.copy()
        X2[5] += delta
        d1 = compute_defects(problem, X2, U)
        assert np.allclose(d1[4] - d0[4], -delta, atol=1e-12)

    def test_quadruped_defect_convergence(self):
        lp = locomotion_problem([("F", 0.2), ("RH", 0.3), ("F", 0.2)])
        sol = solve(lp.ocp)
        assert sol.converged
        assert sol.max_defect <= 1e-6


class TestLineSearch:
    def setup_case(self):
        problem, _ = double_integrator_problem([1.0, 0.0], N=10)
        X, U = problem.initial_guess()
        ev = evaluate_trajectory(problem, X, U)
        A, B = problem.dynamics.discrete_jacobians(X[:-1], U, problem.dt)
        from gaitopt.qp import solve_lq

        lq = build_subproblem(problem, X, U, A, B, ev)
        qp = solve_lq(lq)
        dX, dU = np.vstack(qp.dx), np.vstack(qp.du)
        gx, gu = problem.cost.stage_gradients(X[:-1], U)
        gN, _ = problem.cost.final_quadratic(X[-1])
        gdot = float(np.sum(gx * dX[:-1]) + np.sum(gu * dU) + gN @ dX[-1])
        return problem, X, U, dX, dU, ev, gdot

    def test_full_step_on_quadratic_problem(self):
        problem, X, U, dX, dU, ev, gdot = self.setup_case()
        alpha, _ = line_search(problem, X, U, dX, dU, ev, 10.0, SolverSettings(), gdot)
        assert alpha == 1.0

    def test_inflated_direction_backtracks(self):
        problem, X, U, dX, dU, ev, gdot = self.setup_case()
        alpha, _ = line_search(
            problem, X, U, 10 * dX, 10 * dU, ev, 10.0, SolverSettings(), 10 * gdot
        )
        assert alpha < 1.0

    def test_zero_direction_full_step_no_change(self):
        problem, X, U, dX, dU, ev, _ = self.setup_case()
        alpha, evt = line_search(
            problem, X, U, 0.0 * dX, 0.0 * dU, ev, 10.0, SolverSettings(), 0.0
        )
        assert alpha == 1.0
        assert evt.cost == ev.cost


class TestDegenerateStance:
    def test_standing_at_reference_converges_immediately(self):
        # all-F stance, start at the reference, no force penalty: the
        # gravity-distributing guess is already optimal
        lp = locomotion_problem([("F", 0.04)], weights=default_weights(r_contact=0.0))
        sol = solve(lp.ocp)
        assert sol.converged
        assert sol.iterations == 1
        X0, U0 = lp.ocp.initial_guess()
        assert np.abs(sol.states - X0).max() <= 1e-9
        assert np.abs(sol.inputs - U0).max() <= 1e-9


class TestFlatWalk:
    def test_single_step_converges(self):
        lp = locomotion_problem([("F", 0.3), ("RH", 0.3), ("F", 0.3)])
        sol = solve(lp.ocp)
        assert sol.converged
        assert sol.iterations <= 10
        assert sol.max_equality_residual <= 1e-6
        assert sol.max_inequality_violation <= 1e-6
        assert sol.max_defect <= 1e-6
        # the swing foot lands on its touchdown plane
        td_node, td_leg = lp.touchdowns[0]
        foot = sol.states[td_node][foot_slice(td_leg)]
        assert abs(foot[2]) <= 1e-6

    def test_merit_non_increasing_across_accepted_iterations(self):
        lp = locomotion_problem([("F", 0.3), ("RH", 0.3), ("F", 0.3)])
        sol = solve(lp.ocp)
        assert sol.merit_history
        for before, after in sol.merit_history:
            assert after <= before + 1e-9 * max(1.0, abs(before))

    def test_swing_forces_are_zero(self):
        lp = locomotion_problem([("F", 0.3), ("RH", 0.3), ("F", 0.3)])
        sol = solve(lp.ocp)
        stage_flags = lp.grid.stage_in_contact()
        for n in range(len(sol.inputs)):
            for leg in range(4):
                if not stage_flags[n, leg]:
                    assert np.abs(sol.inputs[n][force_slice(leg)]).max() <= 1e-6

    def test_base_weight_dominance_is_monotone(self):
        # on the footstep-discovery setup (free footholds, pinched nominal
        # footsteps) raising Q_base relative to Q_footstep must not worsen
        # the final base pose error of the converged solution
        from gaitopt.scenario import pinch_nominal_footholds

        residuals = []
        for ratio in (0.2, 2.0, 20.0):
            w = CostWeights(
                q_base=ratio
                * np.concatenate([np.full(3, 10.0), np.full(3, 5.0), np.full(6, 1.0)]),
                q_footstep=np.full(12, 0.5),
                q_final=10.0
                * np.concatenate(
                    [
                        ratio * np.full(3, 10.0),
                        ratio * np.full(3, 5.0),
                        ratio * np.full(6, 1.0),
                        np.full(12, 0.5),
                    ]
                ),
                r_contact=np.full(12, 1e-5),
                r_velocity=np.full(12, 1e-2),
                w_reach=1.0,
            )
            terrain = Terrain(planes=[ContactPlane(normal=[0, 0, 1], offset=0.0)])
            x0 = standing_state()
            schedule = GaitSchedule.from_pairs(
                [("F", 0.3), ("RH", 0.3), ("F", 0.25), ("RF", 0.3), ("F", 0.3)], 0.02
            )
            goal = TaskGoal(heading=[1.0, 0.0], step_length=0.15, desired_height=0.45)
            nominal = pinch_nominal_footholds(
                generate_nominal_sequence(x0, goal, schedule, terrain), 0.5
            )
            lp = build_locomotion_problem(
                x0, schedule, nominal, terrain, w, REACH, FRICTION, PARAMS
            )
            sol = solve(lp.ocp)
            assert sol.converged
            err = lp.refs.x_df[:6] - sol.states[-1, :6]
            residuals.append(float(err @ err))
        assert residuals[0] >= residuals[1] >= residuals[2]

    def test_low_friction_cone_binds_and_stays_feasible(self):
        # mu = 0.15 forces the cone active while walking forward
        low_mu = FrictionModel(mu=0.15, lambda_z_max=2 * 30.0 * 9.81)
        terrain = Terrain(planes=[ContactPlane(normal=[0, 0, 1], offset=0.0)])
        x0 = standing_state()
        schedule = GaitSchedule.from_pairs(
            [("F", 0.3), ("RH", 0.3), ("F", 0.25), ("RF", 0.3), ("F", 0.3)], 0.02
        )
        goal = TaskGoal(heading=[1.0, 0.0], step_length=0.15, desired_height=0.45)
        nominal = generate_nominal_sequence(x0, goal, schedule, terrain)
        lp = build_locomotion_problem(
            x0, schedule, nominal, terrain, default_weights(), REACH, low_mu, PARAMS
        )
        sol = solve(lp.ocp)
        assert sol.converged
        assert sol.max_inequality_violation <= 1e-6
        from gaitopt.constraints import friction_pyramid_matrix

        U = friction_pyramid_matrix(low_mu, ContactPlane(normal=[0, 0, 1], offset=0.0))
        face_vals = [
            (U @ sol.inputs[n][force_slice(leg)]).max()
            for n in range(len(sol.inputs))
            for leg in range(4)
            if sol.inputs[n][force_slice(leg)][2] > 1.0
        ]
        assert max(face_vals) <= 1e-6  # never outside
        assert max(face_vals) > -1e-3  # and genuinely active somewhere

    def test_tight_force_bound_binds_and_stays_feasible(self):
        # b_u barely above the 3-leg share: the box constraint must clamp
        tight = FrictionModel(mu=0.7, lambda_z_max=30.0 * 9.81 / 2.6)
        terrain = Terrain(planes=[ContactPlane(normal=[0, 0, 1], offset=0.0)])
        x0 = standing_state()
        schedule = GaitSchedule.from_pairs(
            [("F", 0.3), ("RH", 0.3), ("F", 0.3)], 0.02
        )
        goal = TaskGoal(heading=[1.0, 0.0], step_length=0.15, desired_height=0.45)
        nominal = generate_nominal_sequence(x0, goal, schedule, terrain)
        lp = build_locomotion_problem(
            x0, schedule, nominal, terrain, default_weights(), REACH, tight, PARAMS
        )
        sol = solve(lp.ocp)
        assert sol.converged
        fz = np.array(
            [sol.inputs[n][force_slice(leg)][2] for n in range(len(sol.inputs))
             for leg in range(4)]
        )
        assert fz.max() <= tight.lambda_z_max + 1e-6
        assert fz.max() >= tight.lambda_z_max - 1e-2  # the bound clamps

    def test_translation_invariance(self):
        sol_a = solve(locomotion_problem([("F", 0.3), ("RH", 0.3), ("F", 0.3)]).ocp)
        sol_b = solve(
            locomotion_problem(
                [("F", 0.3), ("RH", 0.3), ("F", 0.3)], base_xy=(3.0, -2.0)
            ).ocp
        )
        shift = np.zeros(NX)
        shift[0], shift[1] = 3.0, -2.0
        for leg in range(4):
            shift[foot_slice(leg)] = [3.0, -2.0, 0.0]
        assert np.abs((sol_b.states - sol_a.states) - shift[None, :]).max() <= 1e-5
        assert np.abs(sol_b.inputs - sol_a.inputs).max() <= 1e-5

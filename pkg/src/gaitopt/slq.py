"""Sequential linear-quadratic solver with multiple shooting.

Each outer iteration linearizes the shooting map and the switched
constraints around the current trajectory, quadratizes the cost, solves
the structured interior-point subproblem for a primal step, and accepts a
step length by backtracking on an l1 exact-penalty merit function.

State-only equality rows (contact planes pinned at touchdown nodes) are
transferred one stage back through the linearized dynamics, where the
swing-foot velocity input is free; at the pinned initial node they are
constants and enter the residual report only.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .ocp import OptimalControlProblem, SolverSettings, TrajectorySolution
from .qp import (
    FactorizationError,
    IpmSettings,
    LqProblem,
    LqStage,
    NanDetectedError,
    solve_lq,
)

ARMIJO_C1 = 1e-4
ZERO_DIRECTION_TOL = 1e-13


class LineSearchStallError(RuntimeError):
    """Backtracking reached the minimum step without a merit decrease."""


@dataclass
class TrajectoryEval:
    """Cost, defects and constraint residuals of one candidate trajectory."""

    cost: float
    defects: np.ndarray
    node_evals: list  # per node ConstraintEval or None
    eq_max: float  # over optimizable rows
    viol_max: float
    defect_max: float
    residual_l1: float  # optimizable equalities + defects + violations


def compute_defects(problem: OptimalControlProblem, X: np.ndarray, U: np.ndarray) -> np.ndarray:
    """Per-interval shooting defects: integrate(x_n, u_n) - x_{n+1}."""
    rolled = problem.dynamics.step_batch(X[:-1], U, problem.dt)
    return rolled - X[1:]


def _state_only_rows(ev, which: str) -> np.ndarray:
    ju = ev.eq_jac_u if which == "eq" else ev.ineq_jac_u
    if ju.shape[0] == 0:
        return np.zeros(0, dtype=bool)
    return np.abs(ju).sum(axis=1) == 0.0


def evaluate_trajectory(problem: OptimalControlProblem, X, U) -> TrajectoryEval:
    defects = compute_defects(problem, X, U)
    cost = float(problem.cost.total(X, U))
    node_evals = []
    eq_max = viol_max = 0.0
    l1 = float(np.abs(defects).sum())
    n_last = problem.node_count - 1
    for n, cs in enumerate(problem.constraints):
        if cs is None:
            node_evals.append(None)
            continue
        ev = cs.evaluate(X[n], U[n] if n < n_last else None)
        node_evals.append(ev)
        eq_mask = np.ones(len(ev.eq), dtype=bool)
        in_mask = np.ones(len(ev.ineq), dtype=bool)
        if n == 0:
            # state-only rows at the pinned initial node are constants
            eq_mask &= ~_state_only_rows(ev, "eq")
            in_mask &= ~_state_only_rows(ev, "ineq")
        if np.any(eq_mask):
            eq_max = max(eq_max, float(np.abs(ev.eq[eq_mask]).max()))
            l1 += float(np.abs(ev.eq[eq_mask]).sum())
        if np.any(in_mask):
            viol = np.maximum(0.0, -ev.ineq[in_mask])
            viol_max = max(viol_max, float(viol.max()))
            l1 += float(viol.sum())
    return TrajectoryEval(
        cost=cost,
        defects=defects,
        node_evals=node_evals,
        eq_max=eq_max,
        viol_max=viol_max,
        defect_max=float(np.abs(defects).max()) if defects.size else 0.0,
        residual_l1=l1,
    )


def build_subproblem(
    problem: OptimalControlProblem,
    X: np.ndarray,
    U: np.ndarray,
    A: np.ndarray,
    B: np.ndarray,
    ev: TrajectoryEval,
) -> LqProblem:
    """Assemble the stagewise LQ subproblem around the current trajectory."""
    N = problem.node_count - 1
    nx, nu = problem.nx, problem.nu
    gx, gu = problem.cost.stage_gradients(X[:-1], U)
    hess_x, hess_u = problem.cost.hess_x, problem.cost.hess_u

    stage_eq = [[] for _ in range(N)]  # rows: (C, D, g)
    stage_in = [[] for _ in range(N)]
    terminal_in = []

    for n, cev in enumerate(ev.node_evals):
        if cev is None:
            continue
        if len(cev.eq):
            state_only = _state_only_rows(cev, "eq")
            for i in range(len(cev.eq)):
                if not cev.eq_in_qp[i]:
                    continue
                jx, ju, val = cev.eq_jac_x[i], cev.eq_jac_u[i], cev.eq[i]
                if not state_only[i] and n < N:
                    stage_eq[n].append((jx, ju, val))
                elif state_only[i] and n >= 1:
                    # pin through the previous stage's linearized dynamics
                    m = n - 1
                    stage_eq[m].append(
                        (jx @ A[m], jx @ B[m], val + jx @ ev.defects[m])
                    )
        if len(cev.ineq):
            state_only = _state_only_rows(cev, "ineq")
            for i in range(len(cev.ineq)):
                jx, ju, val = cev.ineq_jac_x[i], cev.ineq_jac_u[i], cev.ineq[i]
                if n < N:
                    stage_in[n].append((jx, ju, val))
                elif state_only[i]:
                    terminal_in.append((jx, val))
                # input rows cannot exist at the terminal node

    def stack_eq(rows):
        if not rows:
            return None, None, None
        C = np.vstack([r[0] for r in rows])
        D = np.vstack([r[1] for r in rows])
        g = np.array([r[2] for r in rows])
        return C, D, g

    stages = []
    for n in range(N):
        C, D, g = stack_eq(stage_eq[n])
        E = F = h = None
        rows_in = stage_in[n]
        if n == 0:
            # state-only rows at the pinned initial node are constants
            rows_in = [r for r in rows_in if np.abs(r[1]).sum() > 0]
        if rows_in:
            E = np.vstack([r[0] for r in rows_in])
            F = np.vstack([r[1] for r in rows_in])
            h = np.array([r[2] for r in rows_in])
        stages.append(
            LqStage(
                A=A[n], B=B[n], d=ev.defects[n],
                Q=hess_x, q=gx[n], R=hess_u, r=gu[n],
                C=C, D=D, g=g, E=E, F=F, h=h,
            )
        )
    qN, QN = problem.cost.final_quadratic(X[-1])
    EN = hN = None
    if terminal_in:
        EN = np.vstack([r[0] for r in terminal_in])
        hN = np.array([r[1] for r in terminal_in])
    return LqProblem(
        stages=stages, QN=QN, qN=qN, EN=EN, hN=hN, dx0=problem.x0 - X[0]
    )


def line_search(
    problem: OptimalControlProblem,
    X, U, dX, dU,
    ev0: TrajectoryEval,
    penalty: float,
    settings: SolverSettings,
    grad_dot_delta: float,
):
    """Backtrack on the l1 exact-penalty merit until it decreases.

    Each trial re-simulates every shooting interval (batched) to score the
    true nonlinear defects at the candidate point.
    """
    m0 = ev0.cost + penalty * ev0.residual_l1
    slope = grad_dot_delta - penalty * ev0.residual_l1
    if slope > 0:
        slope = 0.0
    alpha = 1.0
    while alpha >= settings.min_step:
        evt = evaluate_trajectory(problem, X + alpha * dX, U + alpha * dU)
        mt = evt.cost + penalty * evt.residual_l1
        if mt <= m0 + ARMIJO_C1 * alpha * slope + 1e-14 * max(1.0, abs(m0)):
            return alpha, evt
        alpha *= settings.backtracking_factor
    raise LineSearchStallError(f"no merit decrease above step {settings.min_step}")


def solve(
    problem: OptimalControlProblem,
    settings: SolverSettings | None = None,
    initial_guess: tuple | None = None,
) -> TrajectorySolution:
    """Solve the switched-constraint problem by SLQ with multiple shooting."""
    settings = settings or SolverSettings()
    if initial_guess is not None:
        X, U = initial_guess[0].copy(), initial_guess[1].copy()
    else:
        X, U = problem.initial_guess()

    ev = evaluate_trajectory(problem, X, U)
    cost_history = [ev.cost]
    iter_times, qp_iters, merit_history = [], [], []
    penalty = settings.merit_penalty
    status = "max_iterations"
    iterations = 0

    for iteration in range(1, settings.max_iterations + 1):
        tic = time.perf_counter()
        A, B = problem.dynamics.discrete_jacobians(X[:-1], U, problem.dt)
        lq = build_subproblem(problem, X, U, A, B, ev)

        # inexact subproblem solves far from the solution; the floor keeps
        # the final iterations well inside the outer constraint tolerance
        outer_res = max(ev.eq_max, ev.viol_max, ev.defect_max)
        floor = min(settings.ipm.tolerance, 1e-2 * settings.constraint_tolerance)
        sub_tol = float(np.clip(1e-2 * outer_res, floor, 1e-4))

        reg = 0.0
        qp_sol = None
        for attempt in range(settings.regularization_retries + 1):
            ipm = IpmSettings(
                max_iterations=settings.ipm.max_iterations,
                tolerance=sub_tol,
                gap_tolerance=max(sub_tol, settings.ipm.gap_tolerance),
                sigma_power=settings.ipm.sigma_power,
                barrier_reduction=settings.ipm.barrier_reduction,
                mehrotra=settings.ipm.mehrotra,
                regularization=reg,
            )
            try:
                qp_sol = solve_lq(lq, ipm)
                break
            except FactorizationError:
                reg = settings.regularization_init if reg == 0.0 else reg * settings.regularization_factor
        if qp_sol is None:
            raise FactorizationError("subproblem factorization failed at maximum regularization")
        qp_iters.append(qp_sol.iterations)

        dX = np.vstack(qp_sol.dx)
        dU = np.vstack(qp_sol.du) if len(qp_sol.du) else np.zeros_like(U)
        step_norm = max(np.abs(dX).max(), np.abs(dU).max() if dU.size else 0.0)
        penalty = max(penalty, 2.0 * qp_sol.max_dual + 1.0)

        merit_before = ev.cost + penalty * ev.residual_l1
        if step_norm <= ZERO_DIRECTION_TOL:
            alpha, evt = 1.0, ev
        else:
            gx, gu = problem.cost.stage_gradients(X[:-1], U)
            gN, _ = problem.cost.final_quadratic(X[-1])
            grad_dot = float(
                np.sum(gx * dX[:-1]) + np.sum(gu * dU) + gN @ dX[-1]
            )
            try:
                alpha, evt = line_search(
                    problem, X, U, dX, dU, ev, penalty, settings, grad_dot
                )
            except LineSearchStallError:
                status = "stalled"
                iterations = iteration
                iter_times.append(1e3 * (time.perf_counter() - tic))
                break
            X = X + alpha * dX
            U = U + alpha * dU
        if not np.all(np.isfinite(X)) or not np.all(np.isfinite(U)):
            raise NanDetectedError("non-finite trajectory after update")

        iter_times.append(1e3 * (time.perf_counter() - tic))
        iterations = iteration
        prev_cost = cost_history[-1]
        cost_history.append(evt.cost)
        merit_history.append((merit_before, evt.cost + penalty * evt.residual_l1))
        rel_decrease = abs(prev_cost - evt.cost) / max(1.0, abs(prev_cost))
        ev = evt
        if (
            rel_decrease < settings.cost_tolerance
            and ev.eq_max <= settings.constraint_tolerance
            and ev.viol_max <= settings.constraint_tolerance
            and ev.defect_max <= settings.defect_tolerance
        ):
            status = "converged"
            break

    return _package(problem, X, U, ev, cost_history, iterations, iter_times, status, qp_iters, merit_history)


def _package(problem, X, U, ev, cost_history, iterations, iter_times, status, qp_iters, merit_history):
    # the residual report comes from the stored trajectories; ev was already
    # evaluated at exactly (X, U) by the accepting line-search trial
    final = ev
    eq_res, in_res = [], []
    for n, cev in enumerate(final.node_evals):
        if cev is None:
            eq_res.append(np.zeros(0))
            in_res.append(np.zeros(0))
        else:
            eq_res.append(cev.eq.copy())
            in_res.append(cev.ineq.copy())
    return TrajectorySolution(
        times=problem.times.copy(),
        states=X.copy(),
        inputs=U.copy(),
        eq_residuals=eq_res,
        ineq_residuals=in_res,
        defects=final.defects.copy(),
        cost=final.cost,
        cost_history=cost_history,
        iterations=iterations,
        iteration_times_ms=iter_times,
        status=status,
        qp_iterations=qp_iters,
        merit_history=merit_history,
    )

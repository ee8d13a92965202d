"""Structured primal-dual interior-point solver for constrained LQ problems.

Stagewise quadratic program in state/input increments:

    min   sum_n 1/2 dx'Q dx + q'dx + 1/2 du'R du + r'du + dx'S du  + terminal
    s.t.  dx_{n+1} = A_n dx_n + B_n du_n + d_n          (shooting defects d)
          C_n dx_n + D_n du_n + g_n  = 0                (stage equalities)
          E_n dx_n + F_n du_n + h_n >= 0                (stage inequalities)
          dx_0 given

Equalities enter the per-stage KKT saddle system directly; inequalities go
through a Mehrotra predictor-corrector interior-point iteration.  Every
Newton system is solved with a Riccati-style backward factorization and
forward rollout, with the input and the stage equality multiplier
eliminated together per stage, so one iteration costs O(N (nx+nu+m)^3):
linear in the horizon length.

Stage equality rows must involve the input (D rows nonzero); state-only
equalities are the caller's job to transfer one stage back through the
dynamics (see slq).  Inequality rows may be state-only: they only augment
the state Hessian with barrier curvature.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

FRACTION_TO_BOUNDARY = 0.995
SINGULARITY_RATIO = 1e-13


class FactorizationError(RuntimeError):
    """A stage saddle system could not be factorized; retry with regularization."""


class IpmInfeasibleError(RuntimeError):
    """Stage constraints are locally inconsistent (least-squares certificate)."""


class NanDetectedError(RuntimeError):
    """Non-finite values appeared in the iterates."""


@dataclass
class LqStage:
    """One shooting interval of the subproblem."""

    A: np.ndarray
    B: np.ndarray
    d: np.ndarray
    Q: np.ndarray
    q: np.ndarray
    R: np.ndarray
    r: np.ndarray
    C: np.ndarray = None
    D: np.ndarray = None
    g: np.ndarray = None
    E: np.ndarray = None
    F: np.ndarray = None
    h: np.ndarray = None
    S: np.ndarray = None  # x-u cost cross term, optional

    def __post_init__(self):
        nx, nu = self.B.shape
        if self.C is None:
            self.C = np.zeros((0, nx))
            self.D = np.zeros((0, nu))
            self.g = np.zeros(0)
        if self.E is None:
            self.E = np.zeros((0, nx))
            self.F = np.zeros((0, nu))
            self.h = np.zeros(0)
        if self.S is None:
            self.S = np.zeros((nx, nu))

    @property
    def nx(self) -> int:
        return self.B.shape[0]

    @property
    def nu(self) -> int:
        return self.B.shape[1]

    @property
    def n_eq(self) -> int:
        return len(self.g)

    @property
    def n_ineq(self) -> int:
        return len(self.h)


@dataclass
class LqProblem:
    """Stages plus terminal cost and terminal state inequalities."""

    stages: list
    QN: np.ndarray
    qN: np.ndarray
    EN: np.ndarray = None
    hN: np.ndarray = None
    dx0: np.ndarray = None

    def __post_init__(self):
        nx = self.stages[0].nx
        if self.EN is None:
            self.EN = np.zeros((0, nx))
            self.hN = np.zeros(0)
        if self.dx0 is None:
            self.dx0 = np.zeros(nx)

    @property
    def horizon(self) -> int:
        return len(self.stages)


@dataclass
class IpmSettings:
    max_iterations: int = 50
    tolerance: float = 1e-9  # primal/dual residual infinity norms
    gap_tolerance: float = 1e-9  # duality measure s'z / m
    sigma_power: float = 3.0  # Mehrotra centering exponent
    barrier_reduction: float = 0.2  # fallback sigma when mehrotra disabled
    mehrotra: bool = True
    regularization: float = 0.0  # added to Q/R diagonals


@dataclass
class QpSolution:
    dx: list
    du: list
    eq_duals: list  # per stage
    dyn_duals: list  # per node 1..N (costates)
    ineq_duals: list  # per stage + terminal
    slacks: list
    iterations: int
    converged: bool
    mu_history: list = field(default_factory=list)
    residual_history: list = field(default_factory=list)

    @property
    def max_dual(self) -> float:
        vals = [0.0]
        for arr in self.eq_duals + self.ineq_duals + self.dyn_duals:
            if arr.size:
                vals.append(float(np.abs(arr).max()))
        return max(vals)


class _Iterate:
    """Primal-dual iterate with slack/dual boxes stacked per stage."""

    def __init__(self, problem: LqProblem):
        N = problem.horizon
        nx = problem.stages[0].nx
        self.dx = [problem.dx0.copy()] + [np.zeros(nx) for _ in range(N)]
        self.du = [np.zeros(s.nu) for s in problem.stages]
        self.nu = [np.zeros(s.n_eq) for s in problem.stages]
        self.pi = [np.zeros(nx) for _ in range(N + 1)]  # pi[0] unused
        ineq_dims = [s.n_ineq for s in problem.stages] + [len(problem.hN)]
        self.s = [np.ones(m) for m in ineq_dims]
        self.z = [np.ones(m) for m in ineq_dims]

    def init_slacks(self, problem: LqProblem):
        """Start slacks near the constraint values, duals on the central path."""
        for n, stage in enumerate(problem.stages):
            if stage.n_ineq:
                val = stage.E @ self.dx[n] + stage.F @ self.du[n] + stage.h
                self.s[n] = np.maximum(val, 0.1)
                self.z[n] = 1.0 / self.s[n]
        if len(problem.hN):
            val = problem.EN @ self.dx[-1] + problem.hN
            self.s[-1] = np.maximum(val, 0.1)
            self.z[-1] = 1.0 / self.s[-1]

    def total_ineq(self) -> int:
        return sum(len(s) for s in self.s)

    def mu(self) -> float:
        m = self.total_ineq()
        if m == 0:
            return 0.0
        return sum(float(s @ z) for s, z in zip(self.s, self.z)) / m

    def check_finite(self):
        for group in (self.dx, self.du, self.nu, self.pi, self.s, self.z):
            for arr in group:
                if arr.size and not np.all(np.isfinite(arr)):
                    raise NanDetectedError("non-finite value in interior-point iterate")


def _residuals(problem: LqProblem, it: _Iterate):
    """KKT residuals at the current iterate.

    r_dyn[n]: shooting row n; r_eq[n]: stage equalities; r_in[n]: inequality
    minus slack; r_u[n]: input stationarity; r_x[n]: state stationarity for
    n >= 1 (the pinned dx_0 row only defines the unused pi_0).
    """
    N = problem.horizon
    r_dyn, r_eq, r_in, r_u = [], [], [], []
    r_x = [np.zeros(0)] * (N + 1)
    for n, st in enumerate(problem.stages):
        r_dyn.append(st.A @ it.dx[n] + st.B @ it.du[n] + st.d - it.dx[n + 1])
        r_eq.append(st.C @ it.dx[n] + st.D @ it.du[n] + st.g)
        r_in.append(st.E @ it.dx[n] + st.F @ it.du[n] + st.h - it.s[n])
        ru = st.R @ it.du[n] + st.r + st.S.T @ it.dx[n] + st.B.T @ it.pi[n + 1]
        if st.n_eq:
            ru = ru + st.D.T @ it.nu[n]
        if st.n_ineq:
            ru = ru - st.F.T @ it.z[n]
        r_u.append(ru)
        if n >= 1:
            rx = st.Q @ it.dx[n] + st.q + st.S @ it.du[n] + st.A.T @ it.pi[n + 1] - it.pi[n]
            if st.n_eq:
                rx = rx + st.C.T @ it.nu[n]
            if st.n_ineq:
                rx = rx - st.E.T @ it.z[n]
            r_x[n] = rx
    rxN = problem.QN @ it.dx[N] + problem.qN - it.pi[N]
    if len(problem.hN):
        rxN = rxN - problem.EN.T @ it.z[-1]
    r_x[N] = rxN
    r_inN = (problem.EN @ it.dx[N] + problem.hN - it.s[-1]) if len(problem.hN) else np.zeros(0)
    return r_dyn, r_eq, r_in, r_inN, r_u, r_x


def _norm(arrs) -> float:
    vals = [np.abs(a).max() for a in arrs if a.size]
    return float(max(vals)) if vals else 0.0


class _Factorization:
    """Riccati backward factorization for one barrier weighting."""

    def __init__(self, problem: LqProblem, weights, weights_N, reg: float):
        N = problem.horizon
        self.problem = problem
        self.Ps = [None] * (N + 1)
        self.saddles = [None] * N
        self.U1 = [None] * N
        self.N1 = [None] * N
        self.Fus = [None] * N
        self.Fxus = [None] * N

        nxN = problem.stages[-1].nx
        PN = problem.QN.copy()
        if len(problem.hN):
            PN = PN + problem.EN.T @ (weights_N[:, None] * problem.EN)
        if reg:
            PN = PN + reg * np.eye(nxN)
        self.Ps[N] = 0.5 * (PN + PN.T)

        for n in reversed(range(N)):
            st = problem.stages[n]
            W = weights[n]
            if reg:
                Qb = st.Q + reg * np.eye(st.nx)
                Rb = st.R + reg * np.eye(st.nu)
            else:
                Qb, Rb = st.Q, st.R
            Sb = st.S
            if st.n_ineq:
                WE = W[:, None] * st.E
                WF = W[:, None] * st.F
                Qb = Qb + st.E.T @ WE
                Rb = Rb + st.F.T @ WF
                Sb = Sb + st.E.T @ WF
            Pn1 = self.Ps[n + 1]
            PA = Pn1 @ st.A
            PB = Pn1 @ st.B
            Fx = Qb + st.A.T @ PA
            Fu = Rb + st.B.T @ PB
            Fxu = Sb + st.A.T @ PB
            m = st.n_eq
            K = np.zeros((st.nu + m, st.nu + m))
            K[: st.nu, : st.nu] = Fu
            if m:
                K[: st.nu, st.nu :] = st.D.T
                K[st.nu :, : st.nu] = st.D
            lu, piv = self._factor_saddle(K, st, n)
            rhs = np.vstack([Fxu.T, st.C]) if m else Fxu.T
            sol = scipy.linalg.lu_solve((lu, piv), rhs, check_finite=False)
            U1 = sol[: st.nu]
            self.U1[n] = U1
            self.N1[n] = sol[st.nu :]
            self.saddles[n] = (lu, piv)
            self.Fus[n] = Fu
            self.Fxus[n] = Fxu
            P = Fx + U1.T @ Fu @ U1 - Fxu @ U1 - U1.T @ Fxu.T
            self.Ps[n] = 0.5 * (P + P.T)

    @staticmethod
    def _factor_saddle(K, stage, n):
        import warnings

        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
                lu, piv = scipy.linalg.lu_factor(K, check_finite=False)
        except (scipy.linalg.LinAlgError, ValueError) as exc:
            raise FactorizationError(f"stage {n}: saddle factorization failed") from exc
        diag = np.abs(np.diag(lu))
        if diag.size and diag.min() <= SINGULARITY_RATIO * max(diag.max(), 1.0):
            # distinguish an inconsistent constraint block from a mere
            # conditioning problem via a least-squares certificate on D
            if stage.n_eq:
                D = stage.D
                sol, res, rank, _ = np.linalg.lstsq(D, -stage.g, rcond=None)
                if rank < D.shape[0]:
                    residual = np.linalg.norm(D @ sol + stage.g)
                    if residual > 1e-8 * max(1.0, np.linalg.norm(stage.g)):
                        raise IpmInfeasibleError(
                            f"stage {n}: equality rows inconsistent "
                            f"(min-norm residual {residual:.3e})"
                        )
            raise FactorizationError(f"stage {n}: singular saddle system")
        return lu, piv

    def linear_pass(self, qhat, rhat, geq, ddyn, qhatN, dx0_delta):
        """Backward linear recursion + forward rollout for one RHS."""
        problem = self.problem
        N = problem.horizon
        ps = [None] * (N + 1)
        u0s = [None] * N
        n0s = [None] * N
        ps[N] = qhatN
        for n in reversed(range(N)):
            st = problem.stages[n]
            Pd_p = self.Ps[n + 1] @ ddyn[n] + ps[n + 1]
            fu = rhat[n] + st.B.T @ Pd_p
            fx = qhat[n] + st.A.T @ Pd_p
            rhs = np.concatenate([fu, geq[n]]) if st.n_eq else fu
            sol = scipy.linalg.lu_solve(self.saddles[n], rhs, check_finite=False)
            u0 = sol[: st.nu]
            u0s[n] = u0
            n0s[n] = sol[st.nu :]
            U1 = self.U1[n]
            ps[n] = fx + U1.T @ (self.Fus[n] @ u0) - U1.T @ fu - self.Fxus[n] @ u0
        ddx = [dx0_delta]
        ddu, dnu, dpi = [], [], [None] * (N + 1)
        for n, st in enumerate(problem.stages):
            du = -(self.U1[n] @ ddx[n] + u0s[n])
            ddu.append(du)
            dnu.append(-(self.N1[n] @ ddx[n] + n0s[n]))
            ddx.append(st.A @ ddx[n] + st.B @ du + ddyn[n])
            dpi[n + 1] = self.Ps[n + 1] @ ddx[n + 1] + ps[n + 1]
        return ddx, ddu, dnu, dpi


def _max_step(v, dv, tau):
    """Largest alpha in (0, 1] keeping v + alpha dv >= (1 - tau) v."""
    a = np.concatenate(v) if len(v) > 1 else v[0]
    da = np.concatenate(dv) if len(dv) > 1 else dv[0]
    if a.size == 0:
        return 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(da < 0, -tau * a / da, np.inf)
    return float(min(1.0, ratios.min()))


def _check_problem_finite(problem: LqProblem):
    arrays = [problem.QN, problem.qN, problem.EN, problem.hN, problem.dx0]
    for st in problem.stages:
        arrays += [st.A, st.B, st.d, st.Q, st.q, st.R, st.r, st.C, st.D, st.g,
                   st.E, st.F, st.h, st.S]
    for arr in arrays:
        if arr.size and not np.all(np.isfinite(arr)):
            raise NanDetectedError("non-finite value in subproblem data")


def solve_lq(problem: LqProblem, settings: IpmSettings | None = None) -> QpSolution:
    """Solve the constrained LQ subproblem to the requested KKT accuracy."""
    settings = settings or IpmSettings()
    _check_problem_finite(problem)
    it = _Iterate(problem)
    it.init_slacks(problem)
    N = problem.horizon
    reg = settings.regularization
    m_total = it.total_ineq()

    mu_history, residual_history = [], []
    converged = False
    iteration = 0
    for iteration in range(1, settings.max_iterations + 1):
        it.check_finite()
        r_dyn, r_eq, r_in, r_inN, r_u, r_x = _residuals(problem, it)
        mu = it.mu()
        res_eq = max(_norm(r_dyn), _norm(r_eq))
        res_in = max(_norm(r_in), _norm([r_inN]))
        res_stat = max(_norm(r_u), _norm(r_x[1:]))
        mu_history.append(mu)
        residual_history.append(max(res_eq, res_in, res_stat))
        if (
            res_eq <= settings.tolerance
            and res_in <= settings.tolerance
            and res_stat <= max(settings.tolerance, 1e-11 * _stat_scale(problem))
            and mu <= settings.gap_tolerance
        ):
            converged = True
            iteration -= 1
            break

        weights = [
            (it.z[n] / it.s[n]) if problem.stages[n].n_ineq else np.zeros(0)
            for n in range(N)
        ]
        weights_N = (it.z[-1] / it.s[-1]) if len(problem.hN) else np.zeros(0)
        factor = _Factorization(problem, weights, weights_N, reg)

        def rhs_for(r_comp, r_compN):
            qhat, rhat = [], []
            for n, st in enumerate(problem.stages):
                qh = r_x[n].copy() if n >= 1 else np.zeros(st.nx)
                rh = r_u[n].copy()
                if st.n_ineq:
                    coef = (r_comp[n] / it.s[n]) + weights[n] * r_in[n]
                    qh = qh + st.E.T @ coef
                    rh = rh + st.F.T @ coef
                qhat.append(qh)
                rhat.append(rh)
            qhN = r_x[N].copy()
            if len(problem.hN):
                qhN = qhN + problem.EN.T @ ((r_compN / it.s[-1]) + weights_N * r_inN)
            return qhat, rhat, qhN

        def expand(ddx, ddu):
            ds, dz = [], []
            for n, st in enumerate(problem.stages):
                if st.n_ineq:
                    step_s = st.E @ ddx[n] + st.F @ ddu[n] + r_in[n]
                    ds.append(step_s)
                else:
                    ds.append(np.zeros(0))
            if len(problem.hN):
                ds.append(problem.EN @ ddx[-1] + r_inN)
            else:
                ds.append(np.zeros(0))
            return ds

        dx0_delta = problem.dx0 - it.dx[0]

        if m_total == 0:
            qhat, rhat, qhN = rhs_for([np.zeros(0)] * N, np.zeros(0))
            ddx, ddu, dnu, dpi = factor.linear_pass(
                qhat, rhat, r_eq, r_dyn, qhN, dx0_delta
            )
            alpha = 1.0
            ds = [np.zeros(0)] * (N + 1)
            dz = [np.zeros(0)] * (N + 1)
        else:
            # affine (predictor) direction: sigma = 0
            r_comp_aff = [it.s[n] * it.z[n] for n in range(N)]
            r_compN_aff = it.s[-1] * it.z[-1]
            qhat, rhat, qhN = rhs_for(r_comp_aff, r_compN_aff)
            ddx, ddu, dnu, dpi = factor.linear_pass(
                qhat, rhat, r_eq, r_dyn, qhN, dx0_delta
            )
            ds = expand(ddx, ddu)
            dz = [
                -(r_comp_aff[n] / it.s[n]) - weights[n] * ds[n]
                if ds[n].size
                else np.zeros(0)
                for n in range(N)
            ]
            dz.append(
                -(r_compN_aff / it.s[-1]) - weights_N * ds[-1]
                if ds[-1].size
                else np.zeros(0)
            )
            if settings.mehrotra:
                a_aff = min(
                    _max_step(it.s, ds, 1.0), _max_step(it.z, dz, 1.0)
                )
                mu_aff = (
                    sum(
                        float((s + a_aff * d1) @ (z + a_aff * d2))
                        for s, d1, z, d2 in zip(it.s, ds, it.z, dz)
                    )
                    / m_total
                )
                sigma = min(1.0, max((mu_aff / mu) ** settings.sigma_power, 1e-12))
                r_comp = [
                    r_comp_aff[n] + ds[n] * dz[n] - sigma * mu
                    if ds[n].size
                    else np.zeros(0)
                    for n in range(N)
                ]
                r_compN = (
                    r_compN_aff + ds[-1] * dz[-1] - sigma * mu
                    if ds[-1].size
                    else np.zeros(0)
                )
                qhat, rhat, qhN = rhs_for(r_comp, r_compN)
                ddx, ddu, dnu, dpi = factor.linear_pass(
                    qhat, rhat, r_eq, r_dyn, qhN, dx0_delta
                )
                ds = expand(ddx, ddu)
                dz = [
                    -(r_comp[n] / it.s[n]) - weights[n] * ds[n]
                    if ds[n].size
                    else np.zeros(0)
                    for n in range(N)
                ]
                dz.append(
                    -(r_compN / it.s[-1]) - weights_N * ds[-1]
                    if ds[-1].size
                    else np.zeros(0)
                )
            alpha = min(
                _max_step(it.s, ds, FRACTION_TO_BOUNDARY),
                _max_step(it.z, dz, FRACTION_TO_BOUNDARY),
            )

        for n in range(N + 1):
            it.dx[n] = it.dx[n] + alpha * ddx[n]
            if n < N:
                it.du[n] = it.du[n] + alpha * ddu[n]
                it.nu[n] = it.nu[n] + alpha * dnu[n]
                it.pi[n + 1] = it.pi[n + 1] + alpha * dpi[n + 1]
        for n in range(len(it.s)):
            it.s[n] = it.s[n] + alpha * ds[n]
            it.z[n] = it.z[n] + alpha * dz[n]

    return QpSolution(
        dx=it.dx,
        du=it.du,
        eq_duals=it.nu,
        dyn_duals=it.pi[1:],
        ineq_duals=it.z,
        slacks=it.s,
        iterations=iteration,
        converged=converged,
        mu_history=mu_history,
        residual_history=residual_history,
    )


def _stat_scale(problem: LqProblem) -> float:
    scale = float(np.abs(problem.qN).max()) if problem.qN.size else 1.0
    for st in problem.stages:
        if st.q.size:
            scale = max(scale, float(np.abs(st.q).max()))
        if st.r.size:
            scale = max(scale, float(np.abs(st.r).max()))
    return max(scale, 1.0)

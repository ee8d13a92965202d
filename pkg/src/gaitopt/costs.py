"""Quadratic tracking costs and the analytic reachability cost.

Running cost   L = (x_d - x)^T Q_d (x_d - x)
                 + w (x_h - x)^T Q_h (x_h - x)
                 + u^T R u
Final cost     phi = (x_df - x)^T Q_f (x_df - x)

Q_d = diag(Q_base, Q_footstep) and R = diag(R_contact, R_velocity) are
diagonal; Q_h is the Gram matrix of a 6-row linear system interpolating
between the nominal and a tilted stance, the only non-diagonal weight.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import NX, P, foot_slice

# foot-height difference sign patterns in the canonical (LF, RF, LH, RH)
# leg order: hind-minus-front drives pitch and the x shift, right-minus-left
# drives roll and the y shift
_SIGNS_HIND_MINUS_FRONT = np.array([-1.0, -1.0, 1.0, 1.0])
_SIGNS_RIGHT_MINUS_LEFT = np.array([-1.0, 1.0, -1.0, 1.0])

PINV_RCOND = 1e-10


class InvalidGeometryError(ValueError):
    """Reachability geometry outside the arcsin domain."""


@dataclass(frozen=True)
class ReachabilityParams:
    """Geometry of the nominal-to-tilted stance interpolation."""

    nominal_height: float  # h_n
    altered_height: float  # h_c
    foot_distance_x: float  # w_x, front-to-hind
    foot_distance_y: float  # w_y, left-to-right

    def __post_init__(self):
        if self.nominal_height <= 0:
            raise InvalidGeometryError("nominal height must be positive")
        if not (0 < self.altered_height <= min(self.foot_distance_x, self.foot_distance_y)):
            raise InvalidGeometryError(
                "altered height must lie in (0, min(w_x, w_y)] for the arcsin terms"
            )

    @property
    def alpha_x(self) -> float:
        return float(np.arcsin(self.altered_height / self.foot_distance_x))

    @property
    def alpha_y(self) -> float:
        return float(np.arcsin(self.altered_height / self.foot_distance_y))

    @property
    def q_x(self) -> float:
        return float(np.tan(self.alpha_y) * self.nominal_height / self.altered_height)

    @property
    def q_y(self) -> float:
        return float(np.tan(self.alpha_x) * self.nominal_height / self.altered_height)

    # lever arms of the foot-height differences; taken as the half-distances
    @property
    def d_x(self) -> float:
        return self.foot_distance_x / 2.0

    @property
    def d_y(self) -> float:
        return self.foot_distance_y / 2.0

    # computed for completeness; they do not enter the linear system
    @property
    def r_x(self) -> float:
        return 0.5 * self.alpha_x / self.altered_height

    @property
    def r_y(self) -> float:
        return 0.5 * self.alpha_y / self.altered_height


def reachability_system(params: ReachabilityParams):
    """The 6-row linear system A x = b tying base pose to foot positions.

    Rows: base x, y, z follow the stance centroid (x, y shifted by the
    foot-height differences), roll/pitch follow the right-left and
    hind-front height differences, yaw is regularized to zero.
    """
    A = np.zeros((6, NX))
    b = np.zeros(6)

    A[0, 0] = 1.0
    A[1, 1] = 1.0
    A[2, 2] = 1.0
    A[3, 3] = 1.0
    A[4, 4] = 1.0
    A[5, 5] = 1.0

    for i in range(4):
        fx, fy, fz = foot_slice(i).start, foot_slice(i).start + 1, foot_slice(i).start + 2
        A[0, fx] = -0.25
        A[0, fz] = -0.5 * params.d_x * _SIGNS_HIND_MINUS_FRONT[i]
        A[1, fy] = -0.25
        A[1, fz] = -0.5 * params.d_y * _SIGNS_RIGHT_MINUS_LEFT[i]
        A[2, fz] = -0.25
        A[3, fz] = -params.q_x * _SIGNS_RIGHT_MINUS_LEFT[i]
        A[4, fz] = -params.q_y * _SIGNS_HIND_MINUS_FRONT[i]
    b[2] = params.nominal_height
    return A, b


def build_reachability(
    params: ReachabilityParams,
    nominal_base: np.ndarray | None = None,
    stance_geometry: np.ndarray | None = None,
):
    """Gram weight matrix Q_h = A^T A and reference x_h = Q_h^+ A^T b.

    nominal_base / stance_geometry are accepted for interface symmetry and
    sanity-checked when given (the nominal posture must have zero residual);
    the system itself only depends on the stance geometry through params.
    """
    A, b = reachability_system(params)
    Qh = A.T @ A
    xh = np.linalg.pinv(Qh, rcond=PINV_RCOND) @ (A.T @ b)
    if nominal_base is not None and stance_geometry is not None:
        x_nom = np.zeros(NX)
        x_nom[P] = np.asarray(nominal_base, dtype=float)
        for i in range(4):
            x_nom[foot_slice(i)] = np.asarray(stance_geometry, dtype=float)[i]
        residual = A @ x_nom - b
        if np.linalg.norm(residual) > 1e-6:
            raise InvalidGeometryError(
                f"nominal posture violates the reachability system by {np.linalg.norm(residual):.2e}"
            )
    return Qh, xh


@dataclass(frozen=True)
class CostWeights:
    """Diagonal weight entries, plus the reachability multiplier."""

    q_base: np.ndarray  # (12,) base pose + twist, running
    q_footstep: np.ndarray  # (12,) foot positions, running
    q_final: np.ndarray  # (NX,) full-state final weight
    r_contact: np.ndarray  # (12,)
    r_velocity: np.ndarray  # (12,)
    w_reach: float = 1.0

    def __post_init__(self):
        for name in ("q_base", "q_footstep", "q_final", "r_contact", "r_velocity"):
            arr = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, arr)
            if np.any(arr < 0):
                raise ValueError(f"{name} entries must be non-negative")
        if self.q_base.shape != (12,) or self.q_footstep.shape != (12,):
            raise ValueError("q_base and q_footstep need 12 entries each")
        if self.q_final.shape != (NX,):
            raise ValueError(f"q_final needs {NX} entries")
        if self.r_contact.shape != (12,) or self.r_velocity.shape != (12,):
            raise ValueError("input weights need 12 entries each")
        if np.any(self.q_final[6:12] <= 0):
            raise ValueError("final base-velocity weights must be positive (terminal attractor)")
        if self.w_reach < 0:
            raise ValueError("w_reach must be non-negative")

    @property
    def q_running(self) -> np.ndarray:
        return np.concatenate([self.q_base, self.q_footstep])

    @property
    def r_input(self) -> np.ndarray:
        return np.concatenate([self.r_contact, self.r_velocity])

    @classmethod
    def from_dict(cls, raw: dict) -> "CostWeights":
        def expand(val, n):
            arr = np.asarray(val, dtype=float)
            return np.full(n, float(val)) if arr.ndim == 0 else arr

        qb = raw["q_base"]
        if isinstance(qb, dict):
            q_base = np.concatenate(
                [
                    np.full(3, float(qb["position"])),
                    np.full(3, float(qb["orientation"])),
                    np.full(6, float(qb["velocity"])),
                ]
            )
        else:
            q_base = expand(qb, 12)
        q_footstep = expand(raw["q_footstep"], 12)
        if "q_final" in raw:
            q_final = expand(raw["q_final"], NX)
        else:
            q_final = float(raw.get("final_scale", 10.0)) * np.concatenate(
                [q_base, q_footstep]
            )
            q_final[6:12] = np.maximum(q_final[6:12], 1e-6)
        return cls(
            q_base=q_base,
            q_footstep=q_footstep,
            q_final=q_final,
            r_contact=expand(raw.get("r_contact", 1e-5), 12),
            r_velocity=expand(raw.get("r_velocity", 1e-2), 12),
            w_reach=float(raw.get("w_reach", 1.0)),
        )


@dataclass
class ReferenceStates:
    """Attractor states: running, final, and the reachability reference."""

    x_d: np.ndarray
    x_df: np.ndarray
    x_h: np.ndarray
    q_h: np.ndarray  # (NX, NX) reachability Gram matrix

    def __post_init__(self):
        self.x_d = np.asarray(self.x_d, dtype=float)
        self.x_df = np.asarray(self.x_df, dtype=float)
        self.x_h = np.asarray(self.x_h, dtype=float)
        self.q_h = np.asarray(self.q_h, dtype=float)


def running_cost(x, u, t, weights: CostWeights, refs: ReferenceStates) -> float:
    """Three-term quadratic stage cost; t kept for interface uniformity."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    xd = refs.x_d - x
    xh = refs.x_h - x
    return float(
        xd @ (weights.q_running * xd)
        + weights.w_reach * (xh @ refs.q_h @ xh)
        + u @ (weights.r_input * u)
    )


def final_cost(x_f, weights: CostWeights, refs: ReferenceStates) -> float:
    xf = refs.x_df - np.asarray(x_f, dtype=float)
    return float(xf @ (weights.q_final * xf))


@dataclass
class CostQuadratic:
    """Exact gradient and Hessian blocks of the stage cost at one point."""

    grad_x: np.ndarray
    grad_u: np.ndarray
    hess_x: np.ndarray
    hess_u: np.ndarray


def quadratize(x, u, t, weights: CostWeights, refs: ReferenceStates) -> CostQuadratic:
    """Closed-form derivatives; Hessians are constant across nodes."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    qh = weights.w_reach * refs.q_h
    grad_x = -2.0 * (weights.q_running * (refs.x_d - x)) - 2.0 * (qh @ (refs.x_h - x))
    grad_u = 2.0 * (weights.r_input * u)
    hess_x = 2.0 * (np.diag(weights.q_running) + qh)
    hess_u = 2.0 * np.diag(weights.r_input)
    return CostQuadratic(grad_x=grad_x, grad_u=grad_u, hess_x=hess_x, hess_u=hess_u)


def quadratize_final(x_f, weights: CostWeights, refs: ReferenceStates):
    x_f = np.asarray(x_f, dtype=float)
    grad = -2.0 * (weights.q_final * (refs.x_df - x_f))
    hess = 2.0 * np.diag(weights.q_final)
    return grad, hess


class QuadraticCostModel:
    """Weights + references packaged for the solver, with batched evaluation."""

    def __init__(self, weights: CostWeights, refs: ReferenceStates):
        self.weights = weights
        self.refs = refs
        self._qh = weights.w_reach * refs.q_h
        self._hess_x = 2.0 * (np.diag(weights.q_running) + self._qh)
        self._hess_u = 2.0 * np.diag(weights.r_input)

    def stage_costs(self, X: np.ndarray, U: np.ndarray) -> np.ndarray:
        xd = self.refs.x_d[None, :] - X
        xh = self.refs.x_h[None, :] - X
        return (
            np.einsum("ni,i,ni->n", xd, self.weights.q_running, xd)
            + np.einsum("ni,ij,nj->n", xh, self._qh, xh)
            + np.einsum("ni,i,ni->n", U, self.weights.r_input, U)
        )

    def final(self, x_f: np.ndarray) -> float:
        return final_cost(x_f, self.weights, self.refs)

    def total(self, X: np.ndarray, U: np.ndarray) -> float:
        return float(self.stage_costs(X[:-1], U).sum() + self.final(X[-1]))

    def stage_gradients(self, X: np.ndarray, U: np.ndarray):
        gx = -2.0 * (self.weights.q_running[None, :] * (self.refs.x_d[None, :] - X))
        gx -= 2.0 * (self.refs.x_h[None, :] - X) @ self._qh.T
        gu = 2.0 * (self.weights.r_input[None, :] * U)
        return gx, gu

    @property
    def hess_x(self) -> np.ndarray:
        return self._hess_x

    @property
    def hess_u(self) -> np.ndarray:
        return self._hess_u

    def final_quadratic(self, x_f):
        return quadratize_final(x_f, self.weights, self.refs)

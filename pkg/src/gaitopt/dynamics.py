"""Single-rigid-body momentum dynamics with point-foot contacts.

The robot is modelled as one rigid torso driven by contact forces applied at
the feet, with feet treated as first-order (velocity-controlled) points:

    m p''      = sum_i lambda_i + m g
    I_b w'     = R(theta)^T sum_i (r_i - p) x lambda_i  -  w x I_b w
    theta'     = E(theta) w
    r_i'       = v_i

State   x = [p, theta, p', w, r_0 .. r_k-1]          (12 + 3k)
Input   u = [lambda_0 .. lambda_k-1, v_0 .. v_k-1]   (6k)

p, p', r_i and lambda_i are world-frame; w and I_b are base-frame.  theta are
XYZ Euler angles with R(theta) = R_x(tx) R_y(ty) R_z(tz) mapping base to
world, and E(theta) is the corresponding kinematic map from base angular
velocity to Euler-angle rates (singular at |ty| = pi/2).

Foot positions are stored in the world frame: the contact torque
(r_i - p) x lambda_i is only dimensionally consistent with world-frame foot
positions, and the resulting world torque is rotated into the base frame
before applying the inertia tensor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import yaml

LEG_NAMES = ("LF", "RF", "LH", "RH")
NUM_LEGS = 4

# state vector slices
P = slice(0, 3)
TH = slice(3, 6)
PD = slice(6, 9)
W = slice(9, 12)
NX = 12 + 3 * NUM_LEGS
NU = 6 * NUM_LEGS

EULER_PITCH_MARGIN = 1e-6  # rad, guard band below the |ty| = pi/2 singularity


def foot_slice(i: int) -> slice:
    """State slice of foot i's world position."""
    return slice(12 + 3 * i, 15 + 3 * i)


def force_slice(i: int) -> slice:
    """Input slice of leg i's contact force."""
    return slice(3 * i, 3 * i + 3)


def velocity_slice(i: int) -> slice:
    """Input slice of leg i's foot velocity."""
    return slice(12 + 3 * i, 15 + 3 * i)


class SingularOrientationError(ValueError):
    """Pitch angle too close to the +-pi/2 Euler singularity."""


@dataclass(frozen=True)
class RobotParams:
    """Inertial and geometric parameters of the reduced model.

    Defaults are generic mid-size quadruped values used by the shipped
    scenario configs; every test passes them explicitly.
    """

    mass: float = 30.0
    inertia: np.ndarray = field(
        default_factory=lambda: np.diag([0.88, 1.42, 1.57])
    )
    gravity: np.ndarray = field(
        default_factory=lambda: np.array([0.0, 0.0, -9.81])
    )
    leg_count: int = NUM_LEGS
    # nominal foothold positions in the base frame, order LF, RF, LH, RH
    nominal_stance: np.ndarray = field(
        default_factory=lambda: np.array(
            [
                [0.3, 0.2, -0.45],
                [0.3, -0.2, -0.45],
                [-0.3, 0.2, -0.45],
                [-0.3, -0.2, -0.45],
            ]
        )
    )
    nominal_height: float = 0.45

    def __post_init__(self):
        object.__setattr__(self, "inertia", np.asarray(self.inertia, dtype=float))
        object.__setattr__(self, "gravity", np.asarray(self.gravity, dtype=float))
        object.__setattr__(
            self, "nominal_stance", np.asarray(self.nominal_stance, dtype=float)
        )
        if self.mass <= 0:
            raise ValueError("mass must be positive")
        if self.leg_count != NUM_LEGS:
            raise ValueError("model is fixed to four legs")
        if self.nominal_height <= 0:
            raise ValueError("nominal_height must be positive")
        I = self.inertia
        if I.shape != (3, 3) or not np.allclose(I, I.T, atol=1e-12):
            raise ValueError("inertia must be a symmetric 3x3 tensor")
        if np.any(np.linalg.eigvalsh(I) <= 0):
            raise ValueError("inertia must be positive definite")
        ns = self.nominal_stance
        if ns.shape != (NUM_LEGS, 3):
            raise ValueError("nominal_stance must be four 3-vectors")
        # stance must mirror about the base x and y axes
        mirror_x = ns.copy()
        mirror_x[:, 0] *= -1.0  # LF<->LH, RF<->RH
        if not np.allclose(mirror_x[[2, 3, 0, 1]], ns, atol=1e-9):
            raise ValueError("nominal_stance not symmetric about the base y axis")
        mirror_y = ns.copy()
        mirror_y[:, 1] *= -1.0  # LF<->RF, LH<->RH
        if not np.allclose(mirror_y[[1, 0, 3, 2]], ns, atol=1e-9):
            raise ValueError("nominal_stance not symmetric about the base x axis")

    @property
    def inertia_inv(self) -> np.ndarray:
        return np.linalg.inv(self.inertia)

    @classmethod
    def from_file(cls, path) -> "RobotParams":
        """Load parameters from a YAML key/value file (SI units)."""
        with open(path) as f:
            raw = yaml.safe_load(f)
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "RobotParams":
        kwargs = {}
        if "mass" in raw:
            kwargs["mass"] = float(raw["mass"])
        if "inertia_diagonal" in raw:
            kwargs["inertia"] = np.diag(np.asarray(raw["inertia_diagonal"], dtype=float))
        elif "inertia" in raw:
            kwargs["inertia"] = np.asarray(raw["inertia"], dtype=float)
        if "gravity" in raw:
            kwargs["gravity"] = np.asarray(raw["gravity"], dtype=float)
        if "nominal_stance" in raw:
            ns = raw["nominal_stance"]
            if isinstance(ns, dict):
                kwargs["nominal_stance"] = np.array([ns[name] for name in LEG_NAMES], dtype=float)
            else:
                kwargs["nominal_stance"] = np.asarray(ns, dtype=float)
        if "nominal_height" in raw:
            kwargs["nominal_height"] = float(raw["nominal_height"])
        return cls(**kwargs)


@dataclass
class RobotState:
    """Base pose/twist plus world-frame foot positions."""

    base_position: np.ndarray
    base_orientation: np.ndarray  # XYZ Euler angles, rad
    base_linear_velocity: np.ndarray  # world frame
    base_angular_velocity: np.ndarray  # base frame
    foot_positions: np.ndarray  # (4, 3), world frame

    def to_vector(self) -> np.ndarray:
        return np.concatenate(
            [
                np.asarray(self.base_position, dtype=float),
                np.asarray(self.base_orientation, dtype=float),
                np.asarray(self.base_linear_velocity, dtype=float),
                np.asarray(self.base_angular_velocity, dtype=float),
                np.asarray(self.foot_positions, dtype=float).reshape(-1),
            ]
        )

    @classmethod
    def from_vector(cls, x: np.ndarray) -> "RobotState":
        x = np.asarray(x, dtype=float)
        if x.shape != (NX,):
            raise ValueError(f"state vector must have length {NX}")
        return cls(
            base_position=x[P].copy(),
            base_orientation=x[TH].copy(),
            base_linear_velocity=x[PD].copy(),
            base_angular_velocity=x[W].copy(),
            foot_positions=x[12:].reshape(NUM_LEGS, 3).copy(),
        )


@dataclass
class ControlInput:
    """Per-leg world-frame contact forces and foot velocities."""

    contact_forces: np.ndarray  # (4, 3), N
    foot_velocities: np.ndarray  # (4, 3), m/s

    def to_vector(self) -> np.ndarray:
        return np.concatenate(
            [
                np.asarray(self.contact_forces, dtype=float).reshape(-1),
                np.asarray(self.foot_velocities, dtype=float).reshape(-1),
            ]
        )

    @classmethod
    def from_vector(cls, u: np.ndarray) -> "ControlInput":
        u = np.asarray(u, dtype=float)
        if u.shape != (NU,):
            raise ValueError(f"input vector must have length {NU}")
        return cls(
            contact_forces=u[:12].reshape(NUM_LEGS, 3).copy(),
            foot_velocities=u[12:].reshape(NUM_LEGS, 3).copy(),
        )


# ---------------------------------------------------------------------------
# rotation and Euler-rate kinematics
# ---------------------------------------------------------------------------

_EX = np.array([1.0, 0.0, 0.0])
_EY = np.array([0.0, 1.0, 0.0])
_EZ = np.array([0.0, 0.0, 1.0])


def _skew(v: np.ndarray) -> np.ndarray:
    """Cross-product matrices for a (..., 3) array of vectors."""
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 1] = -v[..., 2]
    out[..., 0, 2] = v[..., 1]
    out[..., 1, 0] = v[..., 2]
    out[..., 1, 2] = -v[..., 0]
    out[..., 2, 0] = -v[..., 1]
    out[..., 2, 1] = v[..., 0]
    return out


def _axis_rotations(thetas: np.ndarray):
    """Batched R_x, R_y, R_z factors for (n, 3) Euler angles."""
    thetas = np.asarray(thetas, dtype=float)
    n = thetas.shape[0]
    cx, sx = np.cos(thetas[:, 0]), np.sin(thetas[:, 0])
    cy, sy = np.cos(thetas[:, 1]), np.sin(thetas[:, 1])
    cz, sz = np.cos(thetas[:, 2]), np.sin(thetas[:, 2])
    Rx = np.zeros((n, 3, 3))
    Rx[:, 0, 0] = 1.0
    Rx[:, 1, 1] = cx
    Rx[:, 1, 2] = -sx
    Rx[:, 2, 1] = sx
    Rx[:, 2, 2] = cx
    Ry = np.zeros((n, 3, 3))
    Ry[:, 0, 0] = cy
    Ry[:, 0, 2] = sy
    Ry[:, 1, 1] = 1.0
    Ry[:, 2, 0] = -sy
    Ry[:, 2, 2] = cy
    Rz = np.zeros((n, 3, 3))
    Rz[:, 0, 0] = cz
    Rz[:, 0, 1] = -sz
    Rz[:, 1, 0] = sz
    Rz[:, 1, 1] = cz
    Rz[:, 2, 2] = 1.0
    return Rx, Ry, Rz


def euler_xyz_rotation(theta: np.ndarray) -> np.ndarray:
    """Base-to-world rotation matrix R_x(tx) @ R_y(ty) @ R_z(tz)."""
    Rx, Ry, Rz = _axis_rotations(np.asarray(theta, dtype=float)[None, :])
    return (Rx @ Ry @ Rz)[0]


def _check_pitch(thetas: np.ndarray) -> None:
    ty = np.atleast_2d(thetas)[:, 1]
    if np.any(np.abs(ty) >= np.pi / 2 - EULER_PITCH_MARGIN):
        raise SingularOrientationError(
            f"pitch {ty[np.argmax(np.abs(ty))]:.6f} rad is too close to +-pi/2"
        )


def _euler_rate_batch(thetas: np.ndarray):
    """Batched E(theta) with w = M theta', E = M^-1, plus M and dM/dtheta.

    M columns: [(Ry Rz)^T e_x, Rz^T e_y, e_z].
    """
    _check_pitch(thetas)
    n = thetas.shape[0]
    _, Ry, Rz = _axis_rotations(thetas)
    RzT = np.swapaxes(Rz, 1, 2)
    RyT = np.swapaxes(Ry, 1, 2)
    M = np.zeros((n, 3, 3))
    M[:, :, 0] = (RzT @ RyT @ _EX[None, :, None])[:, :, 0]
    M[:, :, 1] = (RzT @ _EY[None, :, None])[:, :, 0]
    M[:, :, 2] = _EZ
    E = np.linalg.inv(M)

    # dM[:, :, :, j] = dM/dtheta_j; only ty and tz enter M
    dM = np.zeros((n, 3, 3, 3))
    Sy, Sz = _skew(_EY), _skew(_EZ)
    dRyT = -RyT @ Sy  # d(Ry^T)/dty
    dRzT = -RzT @ Sz  # d(Rz^T)/dtz
    dM[:, :, 0, 1] = (RzT @ dRyT @ _EX[None, :, None])[:, :, 0]
    dM[:, :, 0, 2] = (dRzT @ RyT @ _EX[None, :, None])[:, :, 0]
    dM[:, :, 1, 2] = (dRzT @ _EY[None, :, None])[:, :, 0]
    return E, M, dM


def euler_rate_matrix(theta: np.ndarray) -> np.ndarray:
    """Map base angular velocity to XYZ Euler-angle rates: theta' = E(theta) w."""
    E, _, _ = _euler_rate_batch(np.asarray(theta, dtype=float)[None, :])
    return E[0]


def _rotation_batch(thetas: np.ndarray):
    """Batched R(theta) and partials dR[:, :, :, j] = dR/dtheta_j."""
    Rx, Ry, Rz = _axis_rotations(thetas)
    R = Rx @ Ry @ Rz
    Sx, Sy, Sz = _skew(_EX), _skew(_EY), _skew(_EZ)
    dR = np.zeros(R.shape + (3,))
    dR[..., 0] = Rx @ Sx @ Ry @ Rz
    dR[..., 1] = Rx @ Ry @ Sy @ Rz
    dR[..., 2] = R @ Sz
    return R, dR


# ---------------------------------------------------------------------------
# dynamics, Jacobians, integration (batched cores + single-point API)
# ---------------------------------------------------------------------------


def dynamics_batch(X: np.ndarray, U: np.ndarray, params: RobotParams) -> np.ndarray:
    """State derivatives for stacked states X (n, 24) and inputs U (n, 24)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    U = np.atleast_2d(np.asarray(U, dtype=float))
    _check_pitch(X[:, TH])
    n = X.shape[0]
    E, _, _ = _euler_rate_batch(X[:, TH])
    R, _ = _rotation_batch(X[:, TH])
    RT = np.swapaxes(R, 1, 2)

    lam = U[:, :12].reshape(n, NUM_LEGS, 3)
    arms = X[:, 12:].reshape(n, NUM_LEGS, 3) - X[:, None, P]
    torque_w = np.cross(arms, lam).sum(axis=1)

    w = X[:, W]
    Iw = w @ params.inertia.T
    gyro = np.cross(w, Iw)

    dx = np.empty_like(X)
    dx[:, P] = X[:, PD]
    dx[:, TH] = np.einsum("nij,nj->ni", E, w)
    dx[:, PD] = lam.sum(axis=1) / params.mass + params.gravity
    torque_b = np.einsum("nij,nj->ni", RT, torque_w)
    dx[:, W] = (torque_b - gyro) @ params.inertia_inv.T
    dx[:, 12:] = U[:, 12:]
    return dx


def jacobians_batch(X: np.ndarray, U: np.ndarray, params: RobotParams):
    """Analytic continuous-time Jacobians A (n,24,24), B (n,24,24)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    U = np.atleast_2d(np.asarray(U, dtype=float))
    n = X.shape[0]
    E, _, dM = _euler_rate_batch(X[:, TH])
    R, dR = _rotation_batch(X[:, TH])
    RT = np.swapaxes(R, 1, 2)
    Iinv = params.inertia_inv
    Ib = params.inertia

    lam = U[:, :12].reshape(n, NUM_LEGS, 3)
    arms = X[:, 12:].reshape(n, NUM_LEGS, 3) - X[:, None, P]
    torque_w = np.cross(arms, lam).sum(axis=1)
    w = X[:, W]

    A = np.zeros((n, NX, NX))
    B = np.zeros((n, NX, NU))
    eye3 = np.eye(3)

    A[:, P, PD] = eye3

    # theta' = E(theta) w:   d/dtheta_j (E w) = -E (dM_j) (E w)
    thdot = np.einsum("nij,nj->ni", E, w)
    dM_thdot = np.einsum("nabj,nb->naj", dM, thdot)
    A[:, TH, TH] = -np.einsum("nab,nbj->naj", E, dM_thdot)
    A[:, TH, W] = E

    # w' = Iinv (R^T tau_w - w x I w)
    skew_lam = _skew(lam)  # (n, 4, 3, 3)
    A[:, W, P] = np.einsum("ab,nbc,ncd->nad", Iinv, RT, skew_lam.sum(axis=1))
    dRT_tau = np.einsum("nbaj,nb->naj", dR, torque_w)
    A[:, W, TH] = np.einsum("ab,nbj->naj", Iinv, dRT_tau)
    Iw = w @ Ib.T
    A[:, W, W] = np.einsum("ab,nbc->nac", Iinv, _skew(Iw) - _skew(w) @ Ib)

    skew_arms = _skew(arms)
    for i in range(NUM_LEGS):
        A[:, W, foot_slice(i)] = np.einsum(
            "ab,nbc,ncd->nad", Iinv, RT, -skew_lam[:, i]
        )
        B[:, PD, force_slice(i)] = eye3 / params.mass
        B[:, W, force_slice(i)] = np.einsum(
            "ab,nbc,ncd->nad", Iinv, RT, skew_arms[:, i]
        )
        B[:, foot_slice(i), velocity_slice(i)] = eye3
    return A, B


def rk4_step_batch(
    X: np.ndarray, U: np.ndarray, params: RobotParams, dt: float
) -> np.ndarray:
    """One explicit RK4 step with zero-order-hold inputs, batched."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    U = np.atleast_2d(np.asarray(U, dtype=float))
    k1 = dynamics_batch(X, U, params)
    k2 = dynamics_batch(X + 0.5 * dt * k1, U, params)
    k3 = dynamics_batch(X + 0.5 * dt * k2, U, params)
    k4 = dynamics_batch(X + dt * k3, U, params)
    return X + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def discrete_jacobians_batch(
    X: np.ndarray, U: np.ndarray, params: RobotParams, dt: float
):
    """Exact Jacobians of rk4_step_batch via stagewise sensitivity propagation."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    U = np.atleast_2d(np.asarray(U, dtype=float))
    n = X.shape[0]
    eye = np.broadcast_to(np.eye(NX), (n, NX, NX))

    k1 = dynamics_batch(X, U, params)
    A1, B1 = jacobians_batch(X, U, params)
    x2 = X + 0.5 * dt * k1
    k2 = dynamics_batch(x2, U, params)
    A2, B2 = jacobians_batch(x2, U, params)
    x3 = X + 0.5 * dt * k2
    k3 = dynamics_batch(x3, U, params)
    A3, B3 = jacobians_batch(x3, U, params)
    x4 = X + dt * k3
    A4, B4 = jacobians_batch(x4, U, params)

    dk1x = A1
    dk2x = A2 @ (eye + 0.5 * dt * dk1x)
    dk3x = A3 @ (eye + 0.5 * dt * dk2x)
    dk4x = A4 @ (eye + dt * dk3x)
    Ad = eye + (dt / 6.0) * (dk1x + 2.0 * dk2x + 2.0 * dk3x + dk4x)

    dk1u = B1
    dk2u = A2 @ (0.5 * dt * dk1u) + B2
    dk3u = A3 @ (0.5 * dt * dk2u) + B3
    dk4u = A4 @ (dt * dk3u) + B4
    Bd = (dt / 6.0) * (dk1u + 2.0 * dk2u + 2.0 * dk3u + dk4u)
    return Ad, Bd


def evaluate_dynamics(
    x: RobotState, u: ControlInput, params: RobotParams
) -> np.ndarray:
    """Continuous-time state derivative, same layout as the state vector."""
    return dynamics_batch(x.to_vector()[None, :], u.to_vector()[None, :], params)[0]


def linearize(x: RobotState, u: ControlInput, params: RobotParams):
    """Continuous-time Jacobians (A, B) of evaluate_dynamics at (x, u)."""
    A, B = jacobians_batch(x.to_vector()[None, :], u.to_vector()[None, :], params)
    return A[0], B[0]


def integrate_step(
    x: RobotState, u: ControlInput, params: RobotParams, dt: float
) -> RobotState:
    """Propagate the state one RK4 step under a zero-order-hold input."""
    xn = rk4_step_batch(x.to_vector()[None, :], u.to_vector()[None, :], params, dt)
    return RobotState.from_vector(xn[0])

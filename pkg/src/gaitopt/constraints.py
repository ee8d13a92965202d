"""Phase-switched contact constraints with analytic Jacobians.

Per node and leg, active contacts contribute
    equality:    v_i = 0,   n.r_i + d = 0
    inequality:  0 <= n.lambda_i <= b_u,   U lambda_i <= 0
and swing legs contribute
    equality:    lambda_i = 0
    inequality:  ||r_i - c||^2 - R^2 >= 0   per sphere obstacle.

All inequalities are reported in h >= 0 form (violation = max(0, -h)).
The friction pyramid is the inscribed polyhedral cone about the contact
plane normal: conservative, never accepts a force the exact cone rejects.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import NU, NX, NUM_LEGS, foot_slice, force_slice, velocity_slice
from .terrain import ContactPlane, NoPlaneFoundError, Terrain

PLANE_REANCHOR_TOL = 1e-3  # m


@dataclass(frozen=True)
class FrictionModel:
    """Linearized friction cone parameters."""

    mu: float = 0.7
    face_count: int = 4
    lambda_z_max: float = 588.6  # ~ 2 m g for the default 30 kg robot

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError("friction coefficient must be positive")
        if self.face_count < 4:
            raise ValueError("pyramid needs at least 4 faces")
        if self.lambda_z_max <= 0:
            raise ValueError("normal force bound must be positive")


def tangent_basis(normal: np.ndarray):
    """Orthonormal (t1, t2) spanning the plane, t1 along the projected x axis."""
    n = np.asarray(normal, dtype=float)
    t1 = np.array([1.0, 0.0, 0.0]) - n[0] * n
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(n, t1)
    return t1, t2


def friction_pyramid_matrix(model: FrictionModel, plane: ContactPlane) -> np.ndarray:
    """Face matrix U with U @ lam <= 0 inside the inscribed pyramid.

    Row k is d_k - mu cos(pi/m) n with tangent directions d_k equally spaced;
    cos(pi/m) shrinks the polygon so its circumscribed radius equals mu.
    """
    t1, t2 = tangent_basis(plane.normal)
    m = model.face_count
    angles = 2.0 * np.pi * np.arange(m) / m
    dirs = np.outer(np.cos(angles), t1) + np.outer(np.sin(angles), t2)
    return dirs - model.mu * np.cos(np.pi / m) * plane.normal[None, :]


@dataclass
class ConstraintEval:
    """Stacked residuals and Jacobians for one node."""

    eq: np.ndarray  # (n_eq,)
    eq_jac_x: np.ndarray  # (n_eq, NX)
    eq_jac_u: np.ndarray  # (n_eq, NU)
    eq_kinds: list
    eq_legs: np.ndarray
    eq_in_qp: np.ndarray  # bool mask: rows the subproblem enforces
    ineq: np.ndarray  # (n_ineq,), satisfied iff >= 0
    ineq_jac_x: np.ndarray
    ineq_jac_u: np.ndarray
    ineq_kinds: list
    ineq_legs: np.ndarray

    @property
    def max_equality_residual(self) -> float:
        return float(np.abs(self.eq).max()) if self.eq.size else 0.0

    @property
    def max_inequality_violation(self) -> float:
        return float(np.maximum(0.0, -self.ineq).max()) if self.ineq.size else 0.0


@dataclass
class PhaseConstraintSet:
    """Constraint configuration of one node: who stands where, what to avoid.

    contact_flags governs the input-side rows (foot velocity, swing force,
    friction) of the interval the node starts; state_contact_flags governs
    the state-side rows (contact plane, obstacles) at the node itself.  The
    two differ only at snapped phase-boundary nodes: at a touchdown node the
    foot state still belongs to the swing (the obstacle rows apply and the
    plane row is pinned there) while the input interval is already stance.

    plane_in_qp marks the legs whose plane equality the subproblem enforces
    as a hard row at this node (touchdown nodes); the remaining stance nodes
    report the plane residual but rely on the foot-velocity equality to
    preserve it.
    """

    contact_flags: np.ndarray  # (4,) bool, input side
    friction: FrictionModel
    planes: list  # per leg: ContactPlane or None for always-swing legs
    obstacles: list = field(default_factory=list)  # SphereObstacle list
    plane_in_qp: np.ndarray | None = None  # (4,) bool
    state_contact_flags: np.ndarray | None = None  # (4,) bool, state side

    def __post_init__(self):
        self.contact_flags = np.asarray(self.contact_flags, dtype=bool)
        if self.contact_flags.shape != (NUM_LEGS,):
            raise ValueError("need one contact flag per leg")
        if self.state_contact_flags is None:
            self.state_contact_flags = self.contact_flags.copy()
        self.state_contact_flags = np.asarray(self.state_contact_flags, dtype=bool)
        if len(self.planes) != NUM_LEGS:
            raise ValueError("need one plane slot per leg")
        if self.plane_in_qp is None:
            self.plane_in_qp = self.state_contact_flags.copy()
        self.plane_in_qp = np.asarray(self.plane_in_qp, dtype=bool)
        for leg in range(NUM_LEGS):
            needs_plane = (
                self.contact_flags[leg]
                or self.state_contact_flags[leg]
                or self.plane_in_qp[leg]
            )
            if needs_plane and self.planes[leg] is None:
                raise ValueError(f"stance leg {leg} has no contact plane")
        self._pyramids = [
            friction_pyramid_matrix(self.friction, self.planes[leg])
            if self.contact_flags[leg]
            else None
            for leg in range(NUM_LEGS)
        ]

    def evaluate(self, x: np.ndarray, u: np.ndarray | None) -> ConstraintEval:
        """Residuals and Jacobians at a state/input pair (u None at the final node)."""
        x = np.asarray(x, dtype=float)
        if x.shape != (NX,):
            raise ValueError(f"state must have length {NX}")
        has_input = u is not None
        if has_input:
            u = np.asarray(u, dtype=float)
            if u.shape != (NU,):
                raise ValueError(f"input must have length {NU}")

        eq_rows, eq_jx, eq_ju, eq_kinds, eq_legs, eq_qp = [], [], [], [], [], []
        in_rows, in_jx, in_ju, in_kinds, in_legs = [], [], [], [], []

        def add_eq(vals, jx, ju, kind, leg, in_qp):
            eq_rows.append(np.atleast_1d(vals))
            eq_jx.append(np.atleast_2d(jx))
            eq_ju.append(np.atleast_2d(ju))
            k = len(np.atleast_1d(vals))
            eq_kinds.extend([kind] * k)
            eq_legs.extend([leg] * k)
            eq_qp.extend([in_qp] * k)

        def add_ineq(vals, jx, ju, kind, leg):
            in_rows.append(np.atleast_1d(vals))
            in_jx.append(np.atleast_2d(jx))
            in_ju.append(np.atleast_2d(ju))
            k = len(np.atleast_1d(vals))
            in_kinds.extend([kind] * k)
            in_legs.extend([leg] * k)

        for leg in range(NUM_LEGS):
            if has_input and self.contact_flags[leg]:
                plane = self.planes[leg]
                n = plane.normal
                # (stance) v_i = 0
                jx = np.zeros((3, NX))
                ju = np.zeros((3, NU))
                ju[:, velocity_slice(leg)] = np.eye(3)
                add_eq(u[velocity_slice(leg)], jx, ju,
                       "stance_foot_velocity", leg, True)
                # (stance) 0 <= n.lambda <= b_u
                lam = u[force_slice(leg)]
                fn = float(n @ lam)
                ju_n = np.zeros((1, NU))
                ju_n[0, force_slice(leg)] = n
                zx = np.zeros((1, NX))
                add_ineq(fn, zx, ju_n, "force_normal_lower", leg)
                add_ineq(self.friction.lambda_z_max - fn, zx, -ju_n,
                         "force_normal_upper", leg)
                # (stance) U lambda <= 0, reported as -U lambda >= 0
                U = self._pyramids[leg]
                ju_f = np.zeros((U.shape[0], NU))
                ju_f[:, force_slice(leg)] = -U
                add_ineq(-U @ lam, np.zeros((U.shape[0], NX)), ju_f,
                         "friction_pyramid", leg)
            elif has_input:
                # (swing) lambda_i = 0
                ju = np.zeros((3, NU))
                ju[:, force_slice(leg)] = np.eye(3)
                add_eq(u[force_slice(leg)], np.zeros((3, NX)), ju,
                       "swing_force", leg, True)

            # the plane row also applies at a touchdown node, where the foot
            # is still swing by the node-flag convention but must land on it
            if self.state_contact_flags[leg] or self.plane_in_qp[leg]:
                plane = self.planes[leg]
                jx = np.zeros((1, NX))
                jx[0, foot_slice(leg)] = plane.normal
                add_eq(plane.evaluate(x[foot_slice(leg)]), jx, np.zeros((1, NU)),
                       "contact_plane", leg, bool(self.plane_in_qp[leg]))
            if not self.state_contact_flags[leg]:
                # (swing) stay outside every sphere
                r = x[foot_slice(leg)]
                for obs in self.obstacles:
                    delta = r - obs.center
                    jx = np.zeros((1, NX))
                    jx[0, foot_slice(leg)] = 2.0 * delta
                    add_ineq(float(delta @ delta - obs.radius**2), jx,
                             np.zeros((1, NU)), "obstacle", leg)

        def stack(rows, jxs, jus, width_x, width_u):
            if rows:
                return (np.concatenate(rows), np.vstack(jxs), np.vstack(jus))
            return (np.zeros(0), np.zeros((0, width_x)), np.zeros((0, width_u)))

        eq, ejx, eju = stack(eq_rows, eq_jx, eq_ju, NX, NU)
        ih, ijx, iju = stack(in_rows, in_jx, in_ju, NX, NU)
        return ConstraintEval(
            eq=eq, eq_jac_x=ejx, eq_jac_u=eju, eq_kinds=eq_kinds,
            eq_legs=np.asarray(eq_legs, dtype=int), eq_in_qp=np.asarray(eq_qp, dtype=bool),
            ineq=ih, ineq_jac_x=ijx, ineq_jac_u=iju, ineq_kinds=in_kinds,
            ineq_legs=np.asarray(in_legs, dtype=int),
        )


def evaluate_node_constraints(x, u, constraint_set: PhaseConstraintSet) -> ConstraintEval:
    """Functional alias of PhaseConstraintSet.evaluate."""
    return constraint_set.evaluate(x, u)


def assign_contact_plane(
    foot_position: np.ndarray,
    terrain: Terrain,
    previous_plane: ContactPlane | None = None,
    tol: float = PLANE_REANCHOR_TOL,
) -> ContactPlane:
    """Bind a stance foot to a terrain plane, re-anchoring after slips.

    Takes the previously assigned plane when one is given, otherwise the
    plane whose vertical projection contains the foot.  If the foot misses
    the candidate plane's equation by more than tol, a plane with the same
    normal is re-fit through the foot so the contact equality is satisfiable
    at the start of the optimization.
    """
    foot = np.asarray(foot_position, dtype=float)
    if previous_plane is not None:
        candidate = previous_plane
    else:
        x, y = foot[0], foot[1]
        if terrain.gap_at(x, y) is not None:
            raise NoPlaneFoundError(f"foot ({x:.3f}, {y:.3f}) projects into a gap")
        candidates = terrain.planes_at(x, y)
        if not candidates:
            raise NoPlaneFoundError(f"no plane under foot ({x:.3f}, {y:.3f})")
        candidate = min(candidates, key=lambda p: abs(p.evaluate(foot)))
    if abs(candidate.evaluate(foot)) > tol:
        return candidate.anchored_at(foot)
    return candidate

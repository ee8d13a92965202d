import numpy as np
import pytest

from gaitopt.constraints import FrictionModel, friction_pyramid_matrix
from gaitopt.dynamics import NU, NX, RobotParams, foot_slice, force_slice
from gaitopt.terrain import ContactPlane
from gaitopt.tracker import (
    TrackerGains,
    distribute_wrench,
    project_to_pyramid,
    track_interval,
)

PARAMS = RobotParams()
FRICTION = FrictionModel(mu=0.7, lambda_z_max=600.0)
GROUND = ContactPlane(normal=[0, 0, 1], offset=0.0)


class StaticPlan:
    """Holds a fixed reference: the tracker should regulate to it."""

    def __init__(self, xref, uff):
        self.xref, self.uff = xref, uff

    def stage_flags_at(self, t):
        return np.array([True] * 4)

    def reference_state(self, t):
        return self.xref

    def feedforward(self, t):
        return self.uff

    def swing_target(self, t, leg):
        return None

    def plane_normal(self, t, leg):
        return np.array([0.0, 0.0, 1.0])


def standing_reference():
    xref = np.zeros(NX)
    xref[2] = 0.45
    feet = PARAMS.nominal_stance.copy()
    feet[:, 2] = 0.0
    for i in range(4):
        xref[foot_slice(i)] = feet[i]
    uff = np.zeros(NU)
    for i in range(4):
        uff[force_slice(i)] = [0.0, 0.0, PARAMS.mass * 9.81 / 4]
    return xref, uff


class TestProjection:
    def test_always_feasible(self):
        rng = np.random.default_rng(0)
        U = friction_pyramid_matrix(FRICTION, GROUND)
        for _ in range(500):
            lam = rng.normal(scale=400.0, size=3)
            out = project_to_pyramid(lam, GROUND.normal, FRICTION)
            fn = out @ GROUND.normal
            assert -1e-9 <= fn <= FRICTION.lambda_z_max + 1e-9
            assert np.all(U @ out <= 1e-9)

    def test_feasible_forces_unchanged(self):
        lam = np.array([10.0, -5.0, 100.0])
        out = project_to_pyramid(lam, GROUND.normal, FRICTION)
        assert np.allclose(out, lam, atol=1e-12)

    def test_pulling_force_zeroed(self):
        out = project_to_pyramid(np.array([5.0, 1.0, -50.0]), GROUND.normal, FRICTION)
        assert np.allclose(out, 0.0)


class TestWrenchDistribution:
    def test_exact_wrench(self):
        rng = np.random.default_rng(1)
        feet = PARAMS.nominal_stance.copy()
        feet[:, 2] = -0.45
        for _ in range(20):
            wrench = rng.normal(scale=30.0, size=6)
            forces = distribute_wrench(wrench, feet)
            total_f = forces.sum(axis=0)
            total_tau = sum(np.cross(feet[i], forces[i]) for i in range(4))
            assert np.allclose(total_f, wrench[:3], atol=1e-9)
            assert np.allclose(total_tau, wrench[3:], atol=1e-9)

    def test_empty_stance(self):
        assert distribute_wrench(np.ones(6), np.zeros((0, 3))).shape == (0, 3)


class TestRegulation:
    def test_pose_error_decays(self):
        xref, uff = standing_reference()
        plan = StaticPlan(xref, uff)
        x = xref.copy()
        x[2] -= 0.03
        x[4] += 0.10
        gains = TrackerGains()
        for _ in range(1600):  # 4 s
            x, _, _ = track_interval(plan, x, 0.0, gains, PARAMS, FRICTION, 0.0025)
        assert abs(x[2] - 0.45) < 2e-3
        assert abs(x[4]) < 2e-3

    def test_zero_gains_pure_feedforward(self):
        xref, uff = standing_reference()
        plan = StaticPlan(xref, uff)
        x = xref.copy()
        x_next, lam, u = track_interval(
            plan, x, 0.0, TrackerGains.zero(), PARAMS, FRICTION, 0.0025
        )
        for i in range(4):
            assert np.allclose(lam[i], uff[force_slice(i)])
        assert np.allclose(x_next, x, atol=1e-12)  # equilibrium playback

    def test_forces_always_feasible_under_large_errors(self):
        xref, uff = standing_reference()
        plan = StaticPlan(xref, uff)
        U = friction_pyramid_matrix(FRICTION, GROUND)
        x = xref.copy()
        x[0] += 0.12
        x[2] -= 0.06
        x[4] += 0.15
        for _ in range(200):
            x, lam, _ = track_interval(
                plan, x, 0.0, TrackerGains(), PARAMS, FRICTION, 0.0025
            )
            for i in range(4):
                assert lam[i] @ GROUND.normal <= FRICTION.lambda_z_max + 1e-9
                assert lam[i] @ GROUND.normal >= -1e-9
                assert np.all(U @ lam[i] <= 1e-9)

    def test_rejects_negative_gains(self):
        with pytest.raises(ValueError):
            TrackerGains(kp_position=-1.0)

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaitopt.constraints import (
    FrictionModel,
    PhaseConstraintSet,
    assign_contact_plane,
    evaluate_node_constraints,
    friction_pyramid_matrix,
    tangent_basis,
)
from gaitopt.dynamics import NU, NX, foot_slice, force_slice
from gaitopt.terrain import (
    BoxObstacle,
    ContactPlane,
    GapVolume,
    NoPlaneFoundError,
    SphereObstacle,
    Terrain,
)

GROUND = ContactPlane(normal=[0, 0, 1], offset=0.0)


def flat_terrain():
    return Terrain(planes=[GROUND])


def box_terrain():
    return Terrain(
        planes=[GROUND],
        boxes=[BoxObstacle("box", center=[1.2, 0.0], size=[0.8, 0.8], height=0.15)],
    )


def all_stance_set(friction=None, obstacles=()):
    return PhaseConstraintSet(
        contact_flags=[True] * 4,
        friction=friction or FrictionModel(mu=0.7, lambda_z_max=600.0),
        planes=[GROUND] * 4,
        obstacles=list(obstacles),
    )


def one_swing_set(swing_leg=0, obstacles=()):
    flags = [True] * 4
    flags[swing_leg] = False
    planes = [GROUND] * 4
    planes[swing_leg] = None
    return PhaseConstraintSet(
        contact_flags=flags,
        friction=FrictionModel(mu=0.7, lambda_z_max=600.0),
        planes=planes,
        obstacles=list(obstacles),
    )


def in_exact_cone(lam, n, mu):
    fn = lam @ n
    ft = np.linalg.norm(lam - fn * n)
    return fn >= 0 and ft <= mu * fn + 1e-12


class TestFrictionPyramid:
    def test_axial_force_strictly_inside(self):
        U = friction_pyramid_matrix(FrictionModel(mu=0.7), GROUND)
        res = U @ np.array([0.0, 0.0, 100.0])
        assert np.all(res < 0)

    def test_zero_force_on_boundary(self):
        U = friction_pyramid_matrix(FrictionModel(mu=0.7), GROUND)
        assert np.allclose(U @ np.zeros(3), 0.0)

    def test_exceeding_cone_is_rejected(self):
        U = friction_pyramid_matrix(FrictionModel(mu=0.7), GROUND)
        res = U @ np.array([71.0, 0.0, 100.0])
        assert np.any(res > 0)

    def test_inscribed_in_exact_cone(self):
        # pyramid acceptance must imply exact-cone acceptance (conservative)
        rng = np.random.default_rng(5)
        for faces in (4, 6, 8):
            model = FrictionModel(mu=0.6, face_count=faces)
            U = friction_pyramid_matrix(model, GROUND)
            for _ in range(300):
                lam = rng.normal(scale=50.0, size=3)
                lam[2] = abs(lam[2])
                if np.all(U @ lam <= 0):
                    assert in_exact_cone(lam, GROUND.normal, model.mu)

    def test_face_direction_forces_accepted_at_corrected_ratio(self):
        # a force along a face tangent at |f_t| = mu cos(pi/m) f_n sits on the boundary
        model = FrictionModel(mu=0.8, face_count=4)
        U = friction_pyramid_matrix(model, GROUND)
        t1, _ = tangent_basis(GROUND.normal)
        c = model.mu * np.cos(np.pi / 4)
        lam = 100.0 * (c * 0.999) * t1 + 100.0 * GROUND.normal
        assert np.all(U @ lam <= 1e-9)

    def test_tilted_plane_alignment(self):
        plane = ContactPlane(normal=[0.2, -0.1, 0.97], offset=0.0)
        U = friction_pyramid_matrix(FrictionModel(mu=0.5), plane)
        # force along the normal is strictly inside regardless of tilt
        assert np.all(U @ (90.0 * plane.normal) < 0)

    @given(
        st.floats(0.1, 0.6),
        st.floats(0.61, 1.5),
        st.integers(0, 10**6),
    )
    @settings(max_examples=60)
    def test_growing_mu_grows_feasible_set(self, mu_small, mu_big, seed):
        rng = np.random.default_rng(seed)
        U_small = friction_pyramid_matrix(FrictionModel(mu=mu_small), GROUND)
        U_big = friction_pyramid_matrix(FrictionModel(mu=mu_big), GROUND)
        lam = rng.normal(scale=40.0, size=3)
        lam[2] = abs(lam[2]) + 1.0
        if np.all(U_small @ lam <= 0):
            assert np.all(U_big @ lam <= 1e-12)

    def test_feasible_force_set_nonempty_convex_bounded(self):
        model = FrictionModel(mu=0.7, lambda_z_max=600.0)
        U = friction_pyramid_matrix(model, GROUND)

        def feasible(lam):
            fn = lam @ GROUND.normal
            return fn >= 0 and fn <= model.lambda_z_max and np.all(U @ lam <= 1e-12)

        center = 0.5 * model.lambda_z_max * GROUND.normal
        assert feasible(center)
        rng = np.random.default_rng(2)
        pts = []
        while len(pts) < 20:
            lam = rng.normal(scale=200.0, size=3)
            lam[2] = abs(lam[2])
            if feasible(lam):
                pts.append(lam)
                # boundedness: the whole set lives inside a ball
                assert np.linalg.norm(lam) <= model.lambda_z_max * (1 + model.mu)
        for _ in range(50):
            a, b = rng.integers(0, len(pts), 2)
            t = rng.uniform()
            assert feasible(t * pts[a] + (1 - t) * pts[b])


class TestNodeConstraints:
    def test_clean_stance_node(self):
        x = np.zeros(NX)
        for leg in range(4):
            x[foot_slice(leg)] = [0.3, 0.2, 0.0]
        u = np.zeros(NU)
        for leg in range(4):
            u[force_slice(leg)] = [0.0, 0.0, 80.0]
        ev = all_stance_set().evaluate(x, u)
        assert ev.max_equality_residual == 0.0
        assert ev.max_inequality_violation == 0.0

    def test_swing_force_residual(self):
        x = np.zeros(NX)
        u = np.zeros(NU)
        u[force_slice(0)] = [1.0, 0.0, 0.0]
        ev = one_swing_set(0).evaluate(x, u)
        swing_rows = [i for i, k in enumerate(ev.eq_kinds) if k == "swing_force"]
        assert np.allclose(ev.eq[swing_rows], [1.0, 0.0, 0.0])

    def test_obstacle_residual_arithmetic(self):
        # foot 0.04 m from a 0.05 m sphere center: residual 0.04^2 - 0.05^2
        obs = SphereObstacle(center=[0.5, 0.0, 0.0], radius=0.05)
        x = np.zeros(NX)
        x[foot_slice(0)] = [0.54, 0.0, 0.0]
        ev = one_swing_set(0, obstacles=[obs]).evaluate(x, np.zeros(NU))
        rows = [i for i, k in enumerate(ev.ineq_kinds) if k == "obstacle"]
        assert len(rows) == 1
        assert abs(ev.ineq[rows[0]] - (0.04**2 - 0.05**2)) < 1e-15
        assert ev.max_inequality_violation == pytest.approx(9e-4)

    def test_stance_and_swing_sets_mutually_exclusive(self):
        ev = one_swing_set(2).evaluate(np.zeros(NX), np.zeros(NU))
        for leg in range(4):
            kinds = {k for k, l in zip(ev.eq_kinds, ev.eq_legs) if l == leg}
            if leg == 2:
                assert kinds == {"swing_force"}
            else:
                assert kinds == {"stance_foot_velocity", "contact_plane"}

    def test_final_node_has_state_rows_only(self):
        obs = SphereObstacle(center=[0.0, 0.0, 0.0], radius=0.05)
        ev = one_swing_set(1, obstacles=[obs]).evaluate(np.zeros(NX), None)
        assert set(ev.eq_kinds) == {"contact_plane"}
        assert set(ev.ineq_kinds) == {"obstacle"}

    def test_jacobians_match_finite_differences(self):
        rng = np.random.default_rng(8)
        obs = SphereObstacle(center=[0.2, 0.1, 0.0], radius=0.08)
        cs = one_swing_set(3, obstacles=[obs])
        x = rng.normal(size=NX)
        u = rng.normal(scale=50.0, size=NU)
        ev = cs.evaluate(x, u)
        h = 1e-6
        for j in range(NX):
            dx = np.zeros(NX)
            dx[j] = h
            ep = cs.evaluate(x + dx, u)
            em = cs.evaluate(x - dx, u)
            assert np.allclose(ev.eq_jac_x[:, j], (ep.eq - em.eq) / (2 * h), atol=1e-6)
            assert np.allclose(
                ev.ineq_jac_x[:, j], (ep.ineq - em.ineq) / (2 * h), atol=1e-6
            )
        for j in range(NU):
            du = np.zeros(NU)
            du[j] = h
            ep = cs.evaluate(x, u + du)
            em = cs.evaluate(x, u - du)
            assert np.allclose(ev.eq_jac_u[:, j], (ep.eq - em.eq) / (2 * h), atol=1e-6)
            assert np.allclose(
                ev.ineq_jac_u[:, j], (ep.ineq - em.ineq) / (2 * h), atol=1e-6
            )

    def test_functional_alias(self):
        ev = evaluate_node_constraints(np.zeros(NX), np.zeros(NU), all_stance_set())
        assert ev.eq.size > 0

    def test_stance_without_plane_rejected(self):
        with pytest.raises(ValueError):
            PhaseConstraintSet(
                contact_flags=[True, False, False, False],
                friction=FrictionModel(),
                planes=[None, None, None, None],
            )


class TestAssignContactPlane:
    def test_flat_terrain(self):
        plane = assign_contact_plane(np.array([0.5, 0.1, 0.0]), flat_terrain())
        assert np.allclose(plane.normal, [0, 0, 1])
        assert plane.offset == 0.0

    def test_box_top(self):
        plane = assign_contact_plane(np.array([1.2, 0.1, 0.15]), box_terrain())
        assert plane.source == "box"
        assert abs(plane.evaluate(np.array([1.2, 0.1, 0.15]))) < 1e-12

    def test_reanchor_after_slip(self):
        foot = np.array([0.5, 0.0, 0.003])
        plane = assign_contact_plane(foot, flat_terrain(), previous_plane=GROUND)
        assert np.allclose(plane.normal, [0, 0, 1])
        assert plane.offset == pytest.approx(-0.003)
        assert abs(plane.evaluate(foot)) < 1e-12

    def test_previous_plane_kept_within_tolerance(self):
        foot = np.array([0.5, 0.0, 0.0005])
        plane = assign_contact_plane(foot, flat_terrain(), previous_plane=GROUND)
        assert plane is GROUND

    def test_gap_raises(self):
        terrain = Terrain(
            planes=[
                ContactPlane(normal=[0, 0, 1], offset=0.0, bounds=(-5, 1.0, -2, 2)),
                ContactPlane(normal=[0, 0, 1], offset=-0.1, bounds=(1.3, 5, -2, 2)),
            ],
            gaps=[GapVolume(bounds=(1.0, 1.3, -2, 2))],
        )
        with pytest.raises(NoPlaneFoundError):
            assign_contact_plane(np.array([1.15, 0.0, 0.0]), terrain)


class TestTerrain:
    def test_surface_plane_prefers_box_top(self):
        t = box_terrain()
        assert t.surface_plane_at(1.2, 0.0).source == "box"
        assert t.surface_plane_at(0.2, 0.0).source == ""

    def test_relocate_box(self):
        t = box_terrain()
        t.relocate("box", [2.0, 0.3])
        assert t.surface_plane_at(2.0, 0.3).source == "box"
        with pytest.raises(KeyError):
            t.relocate("nope", [0, 0])

    def test_round_trip(self, tmp_path):
        t = box_terrain()
        t.spheres.append(SphereObstacle(center=[1, 2, 0], radius=0.05, obstacle_id="s"))
        t.gaps.append(GapVolume(bounds=(3, 3.3, -1, 1)))
        path = tmp_path / "t.yaml"
        import yaml

        path.write_text(yaml.safe_dump(t.to_dict()))
        t2 = Terrain.from_file(path)
        assert len(t2.planes) == 1 and len(t2.boxes) == 1
        assert t2.boxes[0].height == 0.15
        assert t2.gaps[0].width_x == pytest.approx(0.3)

    def test_plane_validation(self):
        with pytest.raises(ValueError):
            ContactPlane(normal=[0, 0, -1], offset=0.0)
        with pytest.raises(ValueError):
            ContactPlane(normal=[0, 0, 1], offset=0.0, bounds=(1, 1, 0, 2))

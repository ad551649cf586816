import numpy as np
import pytest

from pdtune import trajectory as tj
from pdtune.plant import ArmModel, CartesianPoint, UnreachableTargetError, forward_kinematics
from pdtune.trajectory import TrajectoryGenerationError, Workspace


def default_model():
    return ArmModel(n_links=2, link_lengths=(1.0, 0.8), link_masses=(2.0, 1.5),
                    viscous_damping=(0.1, 0.1), torque_limits=(50.0, 50.0))


def default_workspace():
    return Workspace.from_model(default_model())


class TestWorkspace:
    def test_margins(self):
        ws = default_workspace()
        assert ws.r_max == pytest.approx(1.8 * 0.95)
        assert ws.r_min == pytest.approx(0.2 * 1.05)

    def test_contains(self):
        ws = default_workspace()
        assert ws.contains(np.array([1.0, 0.0]))
        assert not ws.contains(np.array([1.75, 0.0]))
        assert not ws.contains(np.array([0.1, 0.0]))


class TestSpiral:
    def make(self, duration=5.0, dt=0.002, turns=2.0):
        return tj.gen_spiral(CartesianPoint(0.95, 0.0), 0.15, 0.55, turns,
                             duration, dt, default_workspace())

    def test_first_point(self):
        traj = self.make()
        assert np.allclose(traj.points[0], [0.95 + 0.15, 0.0])

    def test_tick_count(self):
        assert self.make(duration=5.0, dt=0.002).ticks == 2501

    def test_last_point_radius(self):
        traj = self.make()
        r_end = np.hypot(traj.points[-1, 0] - 0.95, traj.points[-1, 1] - 0.0)
        assert abs(r_end - 0.55) < 1e-12

    def test_angle_sweep(self):
        traj = self.make(turns=1.5)
        # last point of a 1.5-turn spiral sits opposite the start direction
        assert traj.points[-1, 0] - 0.95 == pytest.approx(-0.55, abs=1e-9)

    def test_workspace_violation_names_tick(self):
        with pytest.raises(TrajectoryGenerationError, match="tick"):
            tj.gen_spiral(CartesianPoint(0.95, 0.0), 0.15, 1.0, 2.0, 1.0, 0.002,
                          default_workspace())

    def test_radius_ordering_validated(self):
        with pytest.raises(ValueError):
            tj.gen_spiral(CartesianPoint(0.95, 0.0), 0.5, 0.4, 1.0, 1.0, 0.002,
                          default_workspace())


class TestPyramid:
    def make(self, n_teeth=2, duration=5.0, dt=0.002):
        return tj.gen_pyramid(CartesianPoint(0.9, -0.3), 0.45, 0.5, n_teeth,
                              duration, dt, default_workspace())

    def test_single_tooth_vertices(self):
        traj = tj.gen_pyramid(CartesianPoint(0.9, -0.3), 0.45, 0.5, 1, 5.0, 0.002,
                              default_workspace())
        assert np.allclose(traj.points[0], [0.45, -0.3])
        assert np.allclose(traj.points[-1], [1.35, -0.3])
        apex = traj.points[np.argmax(traj.points[:, 1])]
        assert apex[1] == pytest.approx(-0.3 + 0.5)
        assert apex[0] == pytest.approx(0.9)

    def test_tick_count(self):
        assert self.make().ticks == 2501

    def test_segment_midpoints_collinear(self):
        traj = self.make(n_teeth=2, duration=5.0, dt=0.002)
        pts = traj.points
        # 4 equal segments, 2500 ticks -> 625 per segment
        for s in range(4):
            a, b = pts[625 * s], pts[625 * (s + 1)]
            mid = pts[625 * s + 312]
            u, v = b - a, mid - a
            d = (u[0] * v[1] - u[1] * v[0]) / np.linalg.norm(u)
            assert abs(d) < 1e-12

    def test_constant_speed_across_segments(self):
        traj = self.make(n_teeth=2, duration=5.0, dt=0.002)
        steps = np.diff(traj.points, axis=0)
        speeds = np.hypot(steps[:, 0], steps[:, 1]) / traj.dt
        assert speeds.max() - speeds.min() < 1e-9

    def test_arc_length_per_segment_time(self):
        # recompute arc length from emitted samples: length/time equal per segment
        traj = self.make(n_teeth=5, duration=5.0, dt=0.002)
        counts = 2500 // 10
        rates = []
        for s in range(10):
            seg = traj.points[counts * s:counts * (s + 1) + 1]
            length = np.sum(np.hypot(*np.diff(seg, axis=0).T))
            rates.append(length / (counts * traj.dt))
        assert max(rates) - min(rates) < 1e-9

    def test_too_few_ticks(self):
        with pytest.raises(TrajectoryGenerationError):
            self.make(n_teeth=5, duration=0.01, dt=0.002)

    def test_workspace_violation(self):
        with pytest.raises(TrajectoryGenerationError):
            tj.gen_pyramid(CartesianPoint(0.9, -0.3), 0.9, 0.8, 1, 5.0, 0.002,
                           default_workspace())


class TestRandom:
    def test_determinism(self):
        a = tj.gen_random(7, default_workspace(), 8, 2.0, 0.002)
        b = tj.gen_random(7, default_workspace(), 8, 2.0, 0.002)
        assert np.array_equal(a.points, b.points)

    def test_seeds_differ(self):
        a = tj.gen_random(7, default_workspace(), 8, 2.0, 0.002)
        b = tj.gen_random(8, default_workspace(), 8, 2.0, 0.002)
        assert not np.array_equal(a.points, b.points)

    def test_all_samples_in_workspace(self):
        ws = default_workspace()
        for seed in range(5):
            traj = tj.gen_random(seed, ws, 8, 2.0, 0.002)
            assert np.all(ws.contains(traj.points))

    def test_tick_count(self):
        assert tj.gen_random(3, default_workspace(), 6, 3.0, 0.002).ticks == 1501

    def test_waypoint_validation(self):
        with pytest.raises(ValueError):
            tj.gen_random(3, default_workspace(), 1, 3.0, 0.002)


class TestTickCountLaw:
    @pytest.mark.parametrize("duration,dt", [(5.0, 0.002), (3.0, 0.002), (1.0, 0.01), (0.5, 0.002)])
    def test_all_generators(self, duration, dt):
        ws = default_workspace()
        expected = round(duration / dt) + 1
        spiral = tj.gen_spiral(CartesianPoint(0.95, 0.0), 0.15, 0.55, 2.0, duration, dt, ws)
        pyramid = tj.gen_pyramid(CartesianPoint(0.9, -0.3), 0.45, 0.5, 2, duration, dt, ws)
        rand = tj.gen_random(11, ws, 8, duration, dt)
        assert spiral.ticks == pyramid.ticks == rand.ticks == expected


class TestJointSetpoints:
    def test_static_trajectory_zero_velocity(self):
        pts = np.tile([1.0, 0.5], (101, 1))
        traj = tj.CartesianTrajectory(dt=0.002, points=pts, kind="static", duration=0.2)
        jt = tj.to_joint_setpoints(default_model(), traj)
        assert np.allclose(jt.qd_des, 0.0)

    def test_fk_round_trip_all_ticks(self):
        model = default_model()
        traj = tj.gen_spiral(CartesianPoint(0.95, 0.0), 0.15, 0.55, 2.0, 1.0, 0.002,
                             default_workspace())
        jt = tj.to_joint_setpoints(model, traj)
        for i in range(0, jt.ticks, 50):
            p = forward_kinematics(model, jt.q_des[i])
            assert np.hypot(p.x - traj.points[i, 0], p.y - traj.points[i, 1]) < 1e-9

    def test_unwrapped_steps_small(self):
        model = default_model()
        traj = tj.gen_spiral(CartesianPoint(0.95, 0.0), 0.15, 0.55, 3.0, 2.0, 0.002,
                             default_workspace())
        jt = tj.to_joint_setpoints(model, traj)
        assert np.max(np.abs(np.diff(jt.q_des, axis=0))) < np.pi

    def test_reversal_negates_interior_velocities(self):
        model = default_model()
        traj = tj.gen_spiral(CartesianPoint(0.95, 0.0), 0.15, 0.55, 2.0, 1.0, 0.002,
                             default_workspace())
        rev = tj.CartesianTrajectory(dt=traj.dt, points=traj.points[::-1].copy(),
                                     kind=traj.kind, duration=traj.duration)
        fwd = tj.to_joint_setpoints(model, traj)
        bwd = tj.to_joint_setpoints(model, rev)
        assert np.allclose(fwd.qd_des[1:-1], -bwd.qd_des[::-1][1:-1], atol=1e-9)

    def test_unreachable_sample_reports_tick(self):
        pts = np.tile([1.0, 0.5], (101, 1))
        pts = pts.copy()
        pts[40] = [2.5, 0.0]
        traj = tj.CartesianTrajectory(dt=0.002, points=pts, kind="static", duration=0.2)
        with pytest.raises(UnreachableTargetError, match="tick 40"):
            tj.to_joint_setpoints(default_model(), traj)

    def test_branch_choice_respected(self):
        model = default_model()
        traj = tj.gen_spiral(CartesianPoint(0.95, 0.0), 0.15, 0.55, 2.0, 1.0, 0.002,
                             default_workspace())
        down = tj.to_joint_setpoints(model, traj, "down")
        up = tj.to_joint_setpoints(model, traj, "up")
        assert np.all(down.q_des[:, 1] >= -1e-12)
        assert np.all(up.q_des[:, 1] <= 1e-12)


class TestPurity:
    def test_repeated_generation_identical(self):
        ws = default_workspace()
        a = tj.gen_pyramid(CartesianPoint(0.9, -0.3), 0.45, 0.5, 3, 2.0, 0.002, ws)
        b = tj.gen_pyramid(CartesianPoint(0.9, -0.3), 0.45, 0.5, 3, 2.0, 0.002, ws)
        assert np.array_equal(a.points, b.points)

    def test_points_read_only(self):
        traj = tj.gen_spiral(CartesianPoint(0.95, 0.0), 0.15, 0.55, 2.0, 1.0, 0.002,
                             default_workspace())
        with pytest.raises(ValueError):
            traj.points[0, 0] = 99.0

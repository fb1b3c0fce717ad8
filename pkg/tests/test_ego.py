import math

import pytest

from dojo.ego import EgoState, get_preset, load_presets, step_kinematic_single_track, step_tps
from dojo.geometry import Pose2D

PARAMS = get_preset("bmw_320i")


def test_presets_load():
    presets = load_presets()
    assert set(presets) == {"ford_escort", "bmw_320i", "vw_vanagon"}
    for p in presets.values():
        assert p.wheelbase > 0 and p.accel_min < 0 < p.accel_max


class TestKinematic:
    def test_straight_coasting(self):
        s = EgoState(0, 0, 0, speed=10.0, steering=0.0)
        out = step_kinematic_single_track(s, 0.0, 0.0, PARAMS, 0.2)
        assert out.x == pytest.approx(2.0)
        assert out.y == pytest.approx(0.0)
        assert out.heading == 0.0
        assert out.speed == 10.0 and out.steering == 0.0

    def test_yaw_rate_matches_circle(self):
        params = get_preset("bmw_320i")
        # fixed steering: yaw rate = v * tan(delta) / wheelbase
        s = EgoState(0, 0, 0, speed=10.0, steering=0.1)
        expected_rate = 10.0 * math.tan(0.1) / params.wheelbase
        out = step_kinematic_single_track(s, 0.0, 0.0, params, 0.2)
        assert out.heading == pytest.approx(expected_rate * 0.2, rel=1e-9)

    def test_input_clamping(self):
        s = EgoState(0, 0, 0, speed=5.0, steering=0.0)
        at_limit = step_kinematic_single_track(s, PARAMS.steer_rate_max, 0.0, PARAMS, 0.2)
        beyond = step_kinematic_single_track(s, 10 * PARAMS.steer_rate_max, 0.0, PARAMS, 0.2)
        assert at_limit == beyond

    def test_conserves_speed_and_steering_without_input(self):
        s = EgoState(1, 2, 0.3, speed=17.2, steering=0.12)
        out = step_kinematic_single_track(s, 0.0, 0.0, PARAMS, 0.2)
        assert out.speed == s.speed
        assert out.steering == s.steering

    def test_rk4_accuracy_against_fine_steps(self):
        # 1 ms fine-step oracle, one 0.2 s step, worst-case speed/steering
        for v, delta in [(40.0, 0.3), (20.0, -0.3), (40.0, 0.0)]:
            s = EgoState(0, 0, 0, speed=v, steering=delta)
            coarse = step_kinematic_single_track(s, 0.1, 1.0, PARAMS, 0.2)
            fine = s
            for _ in range(200):
                fine = step_kinematic_single_track(fine, 0.1, 1.0, PARAMS, 0.001)
            err = math.hypot(coarse.x - fine.x, coarse.y - fine.y)
            assert err < 1e-3


class TestTPS:
    def test_at_waypoint_only_speed_changes(self):
        s = EgoState(5, 5, 1.0, speed=3.0, steering=0.0)
        out = step_tps(s, Pose2D(5, 5, 0), 7.0, 0.2)
        assert (out.x, out.y, out.heading) == (5, 5, 1.0)
        assert out.speed == 7.0

    def test_moves_exactly_speed_times_dt(self):
        s = EgoState(0, 0, 0, speed=10.0, steering=0.0)
        out = step_tps(s, Pose2D(10, 0, 0), 10.0, 0.2)
        assert out.x == pytest.approx(2.0)
        assert out.y == pytest.approx(0.0)

    def test_zero_target_speed_freezes_pose(self):
        s = EgoState(1, 2, 0.5, speed=4.0, steering=0.0)
        out = step_tps(s, Pose2D(10, 10, 0), 0.0, 0.2)
        assert (out.x, out.y, out.heading) == (1, 2, 0.5)
        assert out.speed == 0.0

    def test_never_overshoots(self):
        s = EgoState(0, 0, 0, speed=0.0, steering=0.0)
        out = step_tps(s, Pose2D(1.0, 0, 0), 30.0, 0.2)  # 6 m step vs 1 m away
        assert out.x == pytest.approx(1.0)
        again = step_tps(out, Pose2D(1.0, 0, 0), 30.0, 0.2)
        assert again.x == pytest.approx(1.0)

    def test_heading_interpolates_shortest_arc(self):
        s = EgoState(0, 0, math.pi - 0.1, speed=0.0, steering=0.0)
        # waypoint behind-left: direction -pi + 0.1, shortest arc crosses +-pi
        out = step_tps(s, Pose2D(-10, -1.0050041680558035 * 0, 0), 5.0, 0.2)
        assert abs(out.heading) > math.pi - 0.2

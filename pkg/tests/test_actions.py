import math

import numpy as np
import pytest

from dojo.actions import (
    DEFAULT_DELTA_V,
    FASTER,
    LANE_LEFT,
    LANE_RIGHT,
    NOOP,
    SEMANTIC_ACTIONS,
    SLOWER,
    ControlAction,
    SemanticState,
    StanleyGains,
    allowed_semantic_actions,
    apply_semantic,
    discretize_controls,
    set_waypoints,
    stanley_control,
    stanley_steering_angle,
)
from dojo.ego import EgoState, get_preset, step_kinematic_single_track, step_tps
from dojo.geometry import Polyline, Pose2D
from dojo.roadgen import generate_map

PARAMS = get_preset("bmw_320i")


def straight_path(length=200.0):
    xs = np.linspace(0, length, 21)
    return Polyline(xs, np.zeros(21), np.zeros(21))


class TestControlAction:
    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            ControlAction(1.5, 0.0)

    def test_physical_scaling(self):
        sv, a = ControlAction(1.0, -1.0).physical(PARAMS)
        assert sv == PARAMS.steer_rate_max
        assert a == PARAMS.accel_min
        sv, a = ControlAction(-0.5, 0.5).physical(PARAMS)
        assert sv == -0.5 * PARAMS.steer_rate_max
        assert a == 0.5 * PARAMS.accel_max


class TestDiscretize:
    def test_five_levels(self):
        table = discretize_controls(5)
        assert len(table) == 25
        values = sorted({a.pedal for a in table})
        assert values == [-1.0, -0.5, 0.0, 0.5, 1.0]

    def test_center_is_zero(self):
        table = discretize_controls(5)
        center = table[len(table) // 2]
        assert center == ControlAction(0.0, 0.0)

    def test_rejects_single_level(self):
        with pytest.raises(ValueError):
            discretize_controls(1)


class TestSemantic:
    def setup_method(self):
        self.net = generate_map("highway_drive", 1)
        # pick a multilane lane with a unique successor
        self.lane = next(
            l for l in self.net.lanes.values()
            if l.left_id is not None and len(l.successors) == 1
        )
        self.state = SemanticState(self.lane.id, 0, 20.0)

    def test_noop_identity(self):
        assert apply_semantic(NOOP, self.state, self.net) == self.state

    def test_faster_clamps_at_v_max(self):
        s = SemanticState(self.lane.id, 0, 36.111)
        out = apply_semantic(FASTER, s, self.net, v_max=36.111)
        assert out.target_speed == 36.111

    def test_faster_slower_step_by_delta_v(self):
        out = apply_semantic(FASTER, self.state, self.net)
        assert out.target_speed == 20.0 + DEFAULT_DELTA_V
        out = apply_semantic(SLOWER, self.state, self.net)
        assert out.target_speed == 20.0 - DEFAULT_DELTA_V

    def test_lane_left_moves_to_adjacent(self):
        out = apply_semantic(LANE_LEFT, self.state, self.net)
        assert out.lane_id == self.lane.left_id

    def test_lane_left_on_leftmost_is_noop(self):
        lane = self.net.lanes[self.lane.id]
        while lane.left_id is not None:
            lane = self.net.lanes[lane.left_id]
        s = SemanticState(lane.id, 0, 20.0)
        if len(lane.successors) <= 1:
            assert apply_semantic(LANE_LEFT, s, self.net) == s

    def test_branch_cycling_at_junction(self):
        net = generate_map("intersection", 0)
        lane = next(l for l in net.lanes.values() if len(l.successors) > 1)
        s = SemanticState(lane.id, 0, 10.0)
        n = len(lane.successors)
        out = apply_semantic(LANE_RIGHT, s, net)
        assert out.branch_idx == 1 % n
        back = apply_semantic(LANE_LEFT, out, net)
        assert back.branch_idx == 0

    def test_mask_matches_non_noop_actions(self):
        # allowed (beyond noop) must coincide with state-changing actions
        for net_name, seed in [("intersection", 1), ("highway_drive", 2), ("roundabout", 0)]:
            net = generate_map(net_name, seed)
            for lid in list(net.lanes)[::3]:
                for v in (0.0, 10.0, 36.111):
                    s = SemanticState(lid, 0, v)
                    mask = allowed_semantic_actions(s, net, 36.111)
                    assert mask[0] is True
                    for i, action in enumerate(SEMANTIC_ACTIONS[1:], start=1):
                        changes = apply_semantic(action, s, net, v_max=36.111) != s
                        assert mask[i] == changes, (lid, action, v)


class TestStanley:
    def test_zero_error_equilibrium(self):
        ego = EgoState(50.0, 0.0, 0.0, speed=10.0, steering=0.0)
        act = stanley_control(ego, straight_path(), 10.0, PARAMS)
        assert abs(act.steer_velocity) < 1e-6
        assert abs(act.pedal) < 1e-6

    def test_left_offset_steers_right(self):
        ego = EgoState(50.0, 2.0, 0.0, speed=10.0, steering=0.0)
        act = stanley_control(ego, straight_path(), 10.0, PARAMS)
        assert act.steer_velocity < 0.0

    def test_formula_magnitude(self):
        # explicit gains, scheduling disabled: magnitude atan(k*e/(v + v_soft))
        gains = StanleyGains(k=2.5, v_soft=1.0, v_sched=math.inf)
        ego = EgoState(50.0, 1.0, 0.0, speed=10.0, steering=0.0)
        delta = stanley_steering_angle(ego, straight_path(), gains)
        assert abs(delta) == pytest.approx(math.atan(2.5 / 11.0), abs=1e-6)

    def test_closed_loop_convergence(self):
        ego = EgoState(0.0, 2.0, 0.0, speed=10.0, steering=0.0)
        path = straight_path(800.0)
        errors = []
        for i in range(300):  # 60 s at 0.2 s
            act = stanley_control(ego, path, 10.0, PARAMS)
            sv, a = act.physical(PARAMS)
            ego = step_kinematic_single_track(ego, sv, a, PARAMS, 0.2)
            errors.append(abs(ego.y))
        assert min(errors[:50]) < 0.1  # within 10 s
        assert max(errors[50:]) < 0.3  # no divergence afterwards

    def test_closed_loop_stable_at_highway_speed(self):
        ego = EgoState(0.0, 2.0, 0.0, speed=30.0, steering=0.0)
        path = straight_path(3000.0)
        for _ in range(300):
            act = stanley_control(ego, path, 30.0, PARAMS)
            sv, a = act.physical(PARAMS)
            ego = step_kinematic_single_track(ego, sv, a, PARAMS, 0.2)
        assert abs(ego.y) < 0.3


class TestWaypoints:
    def test_requires_waypoints(self):
        with pytest.raises(ValueError):
            set_waypoints([], [])

    def test_tps_converges_on_single_waypoint(self):
        plan = set_waypoints([Pose2D(10.0, 5.0, 0.0)], [5.0])
        ego = EgoState(0.0, 0.0, 0.0, speed=0.0, steering=0.0)
        for _ in range(50):
            plan.advance(ego.x, ego.y)
            wp, v = plan.current()
            ego = step_tps(ego, wp, v, 0.2)
        assert math.hypot(ego.x - 10.0, ego.y - 5.0) < 1e-6

    def test_advance_skips_reached_waypoints(self):
        plan = set_waypoints(
            [Pose2D(1.0, 0, 0), Pose2D(5.0, 0, 0), Pose2D(9.0, 0, 0)], [5.0, 5.0, 5.0]
        )
        plan.advance(1.5, 0.0)
        assert plan.index == 1
        plan.advance(4.5, 0.0)
        assert plan.index == 2
        plan.advance(8.9, 0.0)
        assert plan.index == 3 and plan.exhausted

import math

import numpy as np
import pytest

from dojo.actions import SEMANTIC_ACTIONS, SemanticState, apply_semantic
from dojo.ego import EgoState, get_preset
from dojo.geometry import Polyline, Pose2D
from dojo.observers import (
    FrameStack,
    ObservationFragment,
    ObservationSpec,
    SceneView,
    VehicleView,
    merge_and_stack,
    obs_birds_eye,
    obs_ego_state,
    obs_navigation,
    obs_road_options,
    obs_road_shape,
    obs_traffic_light,
    obs_traffic_state,
)
from dojo.roadgen import Junction, Lane, RoadNetwork, generate_map

PARAMS = get_preset("bmw_320i")
V_MAX = 36.111


def straight_network(length=200.0, width=4.0, limit=13.889):
    n = max(2, int(length / 5) + 1)
    xs = np.linspace(0.0, length, n)
    line = Polyline(xs, np.zeros(n), np.zeros(n))
    lane = Lane("main", line, width, limit)
    return RoadNetwork("straight", {"main": lane}, {}, [], ["main"], ["main"])


def make_view(network=None, ego=None, vehicles=(), route=None, route_s=0.0,
              lane_id=None, signal=None):
    network = network or straight_network()
    lane_id = lane_id or next(iter(network.lanes))
    ego = ego or EgoState(50.0, 0.0, 0.0, speed=0.0, steering=0.0)
    route = route or network.lanes[lane_id].centerline
    return SceneView(
        network=network,
        ego=ego,
        params=PARAMS,
        v_max=V_MAX,
        semantic=SemanticState(lane_id, 0, ego.speed),
        vehicles=list(vehicles),
        route=route,
        route_s=route_s,
        signal=signal,
    )


class TestEgoState:
    def test_rest_centered_aligned_is_zero(self):
        vec = obs_ego_state(make_view())
        assert vec.shape == (6,)
        assert np.allclose(vec, 0.0, atol=1e-9)

    def test_v_max_first_entry_one(self):
        ego = EgoState(50.0, 0.0, 0.0, speed=V_MAX, steering=0.0)
        vec = obs_ego_state(make_view(ego=ego))
        assert vec[0] == pytest.approx(1.0)

    def test_left_offset_sign(self):
        ego = EgoState(50.0, 1.0, 0.0, speed=5.0, steering=0.0)
        vec = obs_ego_state(make_view(ego=ego))
        assert vec[4] == pytest.approx(1.0 / (4.0 / 2.0))

    def test_bounded(self):
        ego = EgoState(50.0, 30.0, 2.0, speed=80.0, steering=1.0, accel=20.0)
        vec = obs_ego_state(make_view(ego=ego))
        assert np.all(vec >= -1.0) and np.all(vec <= 1.0)


class TestTrafficState:
    def test_empty_is_zero_padding(self):
        vec = obs_traffic_state(make_view(), radius=50.0, n=4)
        assert vec.shape == (24,)
        assert np.allclose(vec, 0.0)

    def test_vehicle_dead_ahead(self):
        veh = VehicleView(Pose2D(70.0, 0.0, 0.0), 5.0, 4.5, 1.8)
        vec = obs_traffic_state(make_view(vehicles=[veh]), radius=50.0, n=2)
        assert vec[0] == pytest.approx(20.0 / 50.0)
        assert vec[1] == pytest.approx(0.0, abs=1e-9)
        assert np.allclose(vec[6:], 0.0)

    def test_ordering_matches_brute_force_sort(self):
        rng = np.random.default_rng(3)
        vehicles = [
            VehicleView(
                Pose2D(50.0 + rng.uniform(-45, 45), rng.uniform(-45, 45), rng.uniform(-3, 3)),
                rng.uniform(0, 20), 4.5, 1.8,
            )
            for _ in range(12)
        ]
        view = make_view(vehicles=vehicles)
        n, radius = 6, 40.0
        vec = obs_traffic_state(view, radius=radius, n=n)
        dists = sorted(
            math.hypot(v.pose.x - 50.0, v.pose.y) for v in vehicles
            if math.hypot(v.pose.x - 50.0, v.pose.y) <= radius
        )
        for i, d in enumerate(dists[:n]):
            block = vec[6 * i : 6 * i + 2] * radius
            assert math.hypot(*block) == pytest.approx(d, abs=1e-6)

    def test_outside_radius_ignored(self):
        veh = VehicleView(Pose2D(200.0, 0.0, 0.0), 5.0, 4.5, 1.8)
        vec = obs_traffic_state(make_view(vehicles=[veh]), radius=50.0, n=1)
        assert np.allclose(vec, 0.0)


class TestRoadShape:
    def test_length(self):
        vec = obs_road_shape(make_view(), n_rays=8, m_hits=2, max_range=50.0)
        assert vec.shape == (2 * 8 * 2,)

    def test_open_area_pads_at_max_range(self):
        # along-road rays on a long straight lane find no boundary in range
        view = make_view(network=straight_network(length=500.0),
                         ego=EgoState(250.0, 0.0, 0.0, speed=0.0, steering=0.0))
        vec = obs_road_shape(view, n_rays=4, m_hits=1, max_range=40.0)
        # rays at -pi (backward) and 0 (forward) pad at unit distance
        assert math.hypot(vec[0], vec[1]) == pytest.approx(1.0, abs=1e-9)
        assert math.hypot(vec[4], vec[5]) == pytest.approx(1.0, abs=1e-9)

    def test_corridor_half_width_each_side(self):
        width = 6.0
        view = make_view(network=straight_network(width=width),
                         ego=EgoState(100.0, 0.0, 0.0, speed=0.0, steering=0.0))
        vec = obs_road_shape(view, n_rays=4, m_hits=1, max_range=50.0)
        # ray order: -pi, -pi/2 (right), 0, +pi/2 (left)
        right = math.hypot(vec[2], vec[3]) * 50.0
        left = math.hypot(vec[6], vec[7]) * 50.0
        assert right == pytest.approx(width / 2.0, abs=0.2)
        assert left == pytest.approx(width / 2.0, abs=0.2)


class TestNavigation:
    def test_length_and_bounds(self):
        vec = obs_navigation(make_view(route_s=35.0), n=5)
        assert vec.shape == (20,)
        assert np.all(vec >= -1.0) and np.all(vec <= 1.0)

    def test_on_waypoint_block_is_zero(self):
        ego = EgoState(50.0, 0.0, 0.0, speed=5.0, steering=0.0)
        vec = obs_navigation(make_view(ego=ego, route_s=50.0), n=3)
        assert np.allclose(vec[:3], 0.0, atol=1e-9)

    def test_remaining_distance_non_increasing(self):
        ego = EgoState(42.0, 1.0, 0.1, speed=5.0, steering=0.0)
        vec = obs_navigation(make_view(ego=ego, route_s=42.0), n=6)
        remaining = vec[3::4]
        assert np.all(np.diff(remaining) <= 1e-12)

    def test_goal_repetition_near_end(self):
        ego = EgoState(195.0, 0.0, 0.0, speed=5.0, steering=0.0)
        vec = obs_navigation(make_view(ego=ego, route_s=195.0), n=4)
        assert np.allclose(vec[8:12], vec[12:16])
        assert vec[-1] == pytest.approx(0.0)  # goal block, zero remaining


class TestTrafficLight:
    def test_unsignalized_reads_green(self):
        assert obs_traffic_light(make_view()).tolist() == [0.0, 0.0, 1.0]

    def test_red_ahead(self):
        assert obs_traffic_light(make_view(signal="red")).tolist() == [1.0, 0.0, 0.0]

    def test_one_hot(self):
        for s in ("red", "yellow", "green"):
            assert obs_traffic_light(make_view(signal=s)).sum() == 1.0


class TestRoadOptions:
    def test_single_lane_mid_speed(self):
        ego = EgoState(50.0, 0.0, 0.0, speed=5.0, steering=0.0)
        vec = obs_road_options(make_view(ego=ego))
        assert vec.tolist() == [1.0, 1.0, 1.0, 0.0, 0.0]

    def test_agrees_with_apply_semantic(self):
        net = generate_map("highway_drive", 4)
        for lid in list(net.lanes)[::4]:
            for v in (0.0, 10.0, V_MAX):
                ego = EgoState(0.0, 0.0, 0.0, speed=v, steering=0.0)
                view = make_view(network=net, ego=ego, lane_id=lid)
                vec = obs_road_options(view)
                for i, action in enumerate(SEMANTIC_ACTIONS[1:], start=1):
                    changed = apply_semantic(action, view.semantic, net, v_max=V_MAX) != view.semantic
                    assert bool(vec[i]) == changed


class TestBirdsEye:
    def test_ego_footprint_at_center(self):
        img = obs_birds_eye(make_view(), h=32, w=32, scale=0.5)
        assert img.shape == (3, 32, 32)
        assert img[1, 16, 16] == 1.0 and img[1, 15, 15] == 1.0

    def test_drivable_band(self):
        img = obs_birds_eye(make_view(), h=32, w=32, scale=0.5)
        assert img[0, 16, 16] == 1.0  # on the lane
        assert img[0, 16, 0] == 0.0  # 8 m left of a 4 m lane

    def test_vehicle_at_known_pose(self):
        # 8 m ahead in a 0.5 m/px image: rows around 16 - 8/0.5 = 0, so use
        # a vehicle 5 m ahead instead: row center 16 - 10 = 6
        veh = VehicleView(Pose2D(55.0, 0.0, 0.0), 5.0, 4.0, 2.0)
        img = obs_birds_eye(make_view(vehicles=[veh]), h=32, w=32, scale=0.5)
        assert img[2, 6, 16] == 1.0
        # footprint is 4 m x 2 m -> 8 px x 4 px block around (6, 16)
        assert img[2, 3, 15] == 1.0 and img[2, 9, 16] == 1.0
        assert img[2, 16, 16] == 0.0  # not at the ego cell

    def test_values_binary(self):
        veh = VehicleView(Pose2D(55.0, 1.0, 0.3), 5.0, 4.0, 2.0)
        img = obs_birds_eye(make_view(vehicles=[veh]), h=16, w=16, scale=1.0)
        assert set(np.unique(img)).issubset({0.0, 1.0})


class TestSpecAndStacking:
    def test_table_sizes(self):
        spec = ObservationSpec(n_vehicles=4, n_rays=8, m_hits=2, n_waypoints=3)
        sizes = spec.fragment_sizes()
        assert sizes == {
            "ego_state": 6,
            "traffic_state": 24,
            "road_shape": 32,
            "navigation": 12,
            "traffic_light": 3,
            "road_options": 5,
        }
        assert spec.vector_size == 82

    def test_rejects_bad_config(self):
        with pytest.raises(ValueError):
            ObservationSpec(n_vehicles=0)
        with pytest.raises(ValueError):
            ObservationSpec(radius=-1.0)
        with pytest.raises(ValueError):
            ObservationSpec(observers=("lidar",))

    def test_single_fragment_k1_identity(self):
        frag = ObservationFragment("ego_state", np.arange(6.0), (6,))
        obs = merge_and_stack([[frag]], k=1)
        assert np.array_equal(obs.vector, np.arange(6.0))

    def test_ego_plus_navigation_stacked_length(self):
        spec = ObservationSpec(observers=("ego_state", "navigation"), n_waypoints=3)
        view = make_view()
        frames = [spec.fragments(view)]
        obs = merge_and_stack(frames, k=5)
        assert obs.vector.shape == (5 * (6 + 12),)

    def test_post_reset_stack_repeats_frame_zero(self):
        spec = ObservationSpec(observers=("ego_state",), stack=5)
        stack = FrameStack(spec)
        ego = EgoState(50.0, 0.5, 0.1, speed=7.0, steering=0.1)
        obs = stack.push(make_view(ego=ego))
        first = obs.vector[:6]
        for i in range(1, 5):
            assert np.array_equal(obs.vector[6 * i : 6 * i + 6], first)

    def test_stack_shifts(self):
        spec = ObservationSpec(observers=("ego_state",), stack=3)
        stack = FrameStack(spec)
        v0 = stack.push(make_view(ego=EgoState(50, 0, 0, speed=5.0, steering=0.0)))
        v1 = stack.push(make_view(ego=EgoState(50, 0, 0, speed=10.0, steering=0.0)))
        assert v1.vector[0] == v0.vector[0]  # oldest frame kept
        assert v1.vector[12] == pytest.approx(10.0 / V_MAX)

    def test_image_stacking(self):
        spec = ObservationSpec(
            observers=("ego_state", "birds_eye"), image_h=16, image_w=16, stack=2
        )
        stack = FrameStack(spec)
        obs = stack.push(make_view())
        assert obs.image.shape == (6, 16, 16)
        assert obs.vector.shape == (12,)

    def test_all_outputs_finite_and_bounded(self):
        net = generate_map("intersection", 2)
        spec = ObservationSpec()
        lid = next(l.id for l in net.lanes.values() if l.kind == "normal")
        lane = net.lanes[lid]
        start = lane.centerline.start()
        ego = EgoState(start.x, start.y, start.heading, speed=9.0, steering=0.05)
        view = make_view(network=net, ego=ego, lane_id=lid,
                         route=lane.centerline, route_s=0.0)
        for frag in spec.fragments(view):
            assert np.all(np.isfinite(frag.payload))
            assert np.all(frag.payload >= -1.0) and np.all(frag.payload <= 1.0)

    def test_observing_is_read_only(self):
        net = generate_map("roundabout", 1)
        lid = next(l.id for l in net.lanes.values() if l.kind == "normal")
        lane = net.lanes[lid]
        start = lane.centerline.start()
        ego = EgoState(start.x, start.y, start.heading, speed=5.0, steering=0.0)
        vehicles = [VehicleView(Pose2D(start.x + 10, start.y, 0.0), 3.0, 4.5, 1.8)]
        view = make_view(network=net, ego=ego, lane_id=lid, vehicles=vehicles,
                         route=lane.centerline)
        before = (repr(view.ego), repr(view.vehicles), len(net.lanes))
        spec = ObservationSpec(observers=(*spec_default(), "birds_eye"),
                               image_h=16, image_w=16)
        spec.fragments(view)
        assert (repr(view.ego), repr(view.vehicles), len(net.lanes)) == before

    def test_manifest_layout(self):
        spec = ObservationSpec(stack=5)
        m = spec.manifest()
        assert m["stacked_vector_size"] == 5 * spec.vector_size
        assert m["fragments"]["ego_state"] == 6


def spec_default():
    return ObservationSpec().observers

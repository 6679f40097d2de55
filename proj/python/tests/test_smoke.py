import numpy as np
import pytest

import xenav


def test_sampling_is_deterministic_and_valid():
    a = xenav.sample_embodiment(7)
    assert a == xenav.sample_embodiment(7)
    assert a != xenav.sample_embodiment(8)
    assert xenav.validate(a) == []
    assert len(xenav.config_vector(a)) == 24
    assert xenav.embodiment_distance(a, a) == 0.0


def test_narrowed_ranges_hold():
    ranges = xenav.filter_ranges("camera_height", 0.4, 0.8)
    for seed in range(200):
        for cam in xenav.sample_embodiment(seed, ranges)["cameras"]:
            assert 0.4 <= cam["pos_y"] <= 0.8
    with pytest.raises(xenav.LookupError):
        xenav.filter_ranges("wheel_count", 1, 2)
    with pytest.raises(xenav.Error):
        xenav.filter_ranges("camera_height", 0.8, 0.4)


def test_presets():
    assert len(xenav.PRESETS) == 6
    loco = xenav.preset_embodiment("locobot")
    assert len(loco["cameras"]) == 1
    with pytest.raises(xenav.LookupError):
        xenav.preset_embodiment("roomba")


def test_scene_round_trip():
    scene = xenav.generate_scene(3)
    again = xenav.Scene.deserialize(scene.serialize())
    assert again.serialize() == scene.serialize()
    x0, z0, x1, z1 = scene.bounds
    assert x1 > x0 and z1 > z0
    assert any(i["category"] == "wall" for i in scene.instances)


def test_expert_solves_an_episode_in_the_simulator():
    ep = xenav.make_episode(5, 0)
    plan = xenav.plan_episode(ep)
    assert plan["success"]
    sim = xenav.Simulator(ep, render_size=32)
    first = sim.reset()
    images = first["observation"]
    assert len(images) == 2
    assert images[0]["depth"].shape == (32, 32)
    assert images[0]["semantic"].dtype == np.uint16
    last = None
    for action in plan["actions"]:
        last = sim.step(action)
    assert last["terminal"] and last["success"]
    assert sim.steps == len(plan["actions"])
    with pytest.raises(xenav.StateError):
        sim.step("MoveAhead")
    fresh = xenav.Simulator(ep, render_size=16)
    with pytest.raises(xenav.StateError):
        fresh.step("MoveAhead")
    fresh.reset()
    with pytest.raises(xenav.ArgumentError):
        fresh.step("Jump")


def test_metrics_and_benchmark():
    summary = xenav.aggregate(
        [
            {"success": True, "steps": 10, "expert_steps": 10, "collisions": 0, "group": ""},
            {"success": True, "steps": 20, "expert_steps": 10, "collisions": 1, "group": ""},
            {"success": False, "steps": 600, "expert_steps": None, "collisions": 5, "group": ""},
            {"success": True, "steps": 12, "expert_steps": 12, "collisions": 3, "group": ""},
        ]
    )
    assert summary["sc"] == 0.4375
    assert summary["sel"] == 0.625

    suite = xenav.make_benchmark(11, 2)
    assert len(suite["episodes"]) == 2
    report = xenav.run_benchmark("expert", suite)
    assert report["summary"]["episodes"] == 2
    assert report["summary"]["success_rate"] == 1.0

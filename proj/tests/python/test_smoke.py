# SPDX-License-Identifier: Apache-2.0
import pytest

import robopilot


def test_spawn_scene_is_deterministic():
    a = robopilot.spawn_scene(3, 7)
    b = robopilot.spawn_scene(3, 7)
    assert a == b
    assert len(a["objects"]) == 6
    kinds = sorted(o["kind"] for o in a["objects"])
    assert kinds == ["block"] * 3 + ["bowl"] * 3


def test_catalog_lists_every_group():
    groups = {t["group"] for t in robopilot.list_tasks()}
    assert groups == {"SM", "SA", "SS", "PM", "SR", "CR", "SP", "FR", "LR", "ER"}


def test_solve_and_replay_round_trip():
    scene = robopilot.spawn_scene(3, 11)
    block = next(o for o in scene["objects"] if o["kind"] == "block")
    bowl = next(o for o in scene["objects"] if o["kind"] == "bowl" and o["color"] == block["color"])
    record = robopilot.solve(f"Put the {block['color']} block in the {bowl['color']} bowl.", scene)
    assert record["recognized"]
    assert record["evaluation"] == "pass"
    assert record["invocation_count"] <= 20
    assert robopilot.replay(record)["match"]


def test_loop_forever_exhausts_budget():
    scene = robopilot.spawn_scene(2, 3)
    record = robopilot.solve("Put each block in the bowl of the same color.", scene, backend="fault:loop_forever")
    assert record["invocation_count"] == 20
    assert record["evaluation"] == "fail"


def test_run_suite_summary():
    config = {"suite": "canonical", "master_seed": 42, "backend": "oracle",
              "overrides": {"scenarios": 2, "goals_per_scenario": 1, "tasks": ["sm_block_in_bowl"]}}
    summary, trials, report = robopilot.run_suite(config)
    assert summary.splitlines()[0] == robopilot.SUMMARY_HEADER
    assert len(trials) == 2
    assert all(t["evaluation"] == "pass" for t in trials)
    assert "Avg" in report


def test_malformed_inputs_raise():
    with pytest.raises(ValueError):
        robopilot.solve("Stack all the blocks.", "{not json")
    with pytest.raises(ValueError):
        robopilot.solve("Stack all the blocks.", robopilot.spawn_scene(2, 1), backend="fault:nonsense")


def test_unrecognized_instruction_is_not_judged_a_pass():
    record = robopilot.solve("Juggle the bowls.", robopilot.spawn_scene(2, 5))
    assert not record["recognized"]
    assert record["evaluation"] == "fail"

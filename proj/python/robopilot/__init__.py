# SPDX-License-Identifier: Apache-2.0
"""Dual-thinking closed-loop manipulation agent and benchmark."""

import json

from . import _core
from ._core import BackendInitError, SerializationError, WorldError, SUMMARY_HEADER

__all__ = [
    "BackendInitError",
    "SerializationError",
    "WorldError",
    "SUMMARY_HEADER",
    "spawn_scene",
    "list_tasks",
    "solve",
    "run_suite",
    "replay",
]


def spawn_scene(n_pairs, seed):
    return json.loads(_core.spawn_scene(n_pairs, seed))


def list_tasks():
    return json.loads(_core.list_tasks())


def solve(instruction, scene, backend="oracle", mode="auto", budget=20, closed_loop=True, drop_probability=0.0):
    scene_json = scene if isinstance(scene, str) else json.dumps(scene)
    return json.loads(_core.solve(instruction, scene_json, backend, mode, budget, closed_loop, drop_probability))


def run_suite(config):
    """Returns (summary_csv, list of trial dicts, group report text)."""
    config_json = config if isinstance(config, str) else json.dumps(config)
    summary, trials, report = _core.run_suite(config_json)
    return summary, [json.loads(line) for line in trials.splitlines() if line], report


def replay(trial):
    trial_json = trial if isinstance(trial, str) else json.dumps(trial)
    return json.loads(_core.replay(trial_json))

"""Active object tracking lab.

Thin Python front end over the C++ core: a first-person tracking
environment, checkpoint policies, A3C training and evaluation.
"""

import json as _json

from ._core import (
    ConfigError,
    Env,
    Error,
    Policy,
    classify_success,
    compute_reward,
    discounted_returns,
    evaluate,
    flip_action,
    preset_config,
    resolve_config,
    scenario_names,
    to_real,
    to_virtual,
    train,
)


def config(preset="desk", **overrides):
    """Validated run configuration as a dict; keyword blocks override the preset."""
    return _json.loads(resolve_config(preset, _json.dumps(overrides) if overrides else ""))


__all__ = [
    "ConfigError",
    "Env",
    "Error",
    "Policy",
    "classify_success",
    "compute_reward",
    "config",
    "discounted_returns",
    "evaluate",
    "flip_action",
    "preset_config",
    "resolve_config",
    "scenario_names",
    "to_real",
    "to_virtual",
    "train",
]

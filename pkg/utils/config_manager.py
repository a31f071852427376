# utils/config_manager.py
import json
import logging
import pathlib
import sys
import os
from typing import Any, Dict, Optional

logger = logging.getLogger(__name__)

_base_dir = getattr(sys, '_MEIPASS', None) or os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

# config.json at the repository root
CONFIG_FILE = pathlib.Path(_base_dir) / 'config.json'

# Defaults used when the JSON is missing or lacks a key
DEFAULTS: Dict[str, Any] = {
    "PENALTY_PROB":        0.10,
    "MOVE_WEIGHTS":        [0.4918, 0.4918, 0.0082, 0.0082],   # walk, traverse, hop, blow
    "WALK_PARAM":          1.5,
    "TRAVERSE_PARAM":      6.0,
    "COORD_UPDATE_TARGET": 4,
    "PENALTY_VARIANT":     "rejection",
    "PENALTY_SHAPE":       "flipped_t",
    "PENALTY_DF":          2.0,
    "PROPOSAL_FAMILY":     "student_t",
    "PROPOSAL_DF":         1.0,
    "KAPPA":               3.0,
    "MAX_TRIALS":          10000,
    "SCALE_FLOOR":         1e-12,
    "ITERS":               100000,
    "THIN":                1,
    "SEED":                0,
    "BURN_IN":             0,
    "KDE_BANDWIDTH":       "scott",
    "GRID_RESOLUTION":     100,
    "TABLE1_SAMPLES":      1000000,
    "TABLE1_DIMS":         [2, 4, 8, 16],
    "TABLE1_KAPPAS":       [2.0, 3.0, 4.0],
}


def _read(path: Optional[pathlib.Path] = None) -> Dict[str, Any]:
    path = path or CONFIG_FILE
    try:
        if path.exists():
            on_disk = json.loads(path.read_text())
            # disk overrides defaults
            return {**DEFAULTS, **on_disk}
    except Exception as e:
        logger.warning("ignoring unreadable settings file %s (%s)", path, e)
    return dict(DEFAULTS)


_cfg = _read()


def all() -> Dict[str, Any]:
    return dict(_cfg)


def reload(path: os.PathLike) -> Dict[str, Any]:
    """Swap in a user settings file, merged over config.json and DEFAULTS."""
    global _cfg
    path = pathlib.Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    try:
        on_disk = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ValueError(f"config file {path} is not valid JSON: {e}") from e
    unknown = sorted(set(on_disk) - set(DEFAULTS))
    if unknown:
        logger.warning("unknown settings in %s: %s", path, ", ".join(unknown))
    _cfg = {**_read(), **on_disk}
    return dict(_cfg)

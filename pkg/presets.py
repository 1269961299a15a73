"""
Named experiment settings
Table 1 and Table 3 protocols, the Figure 1 grid and the Figure 2 curves
"""

import copy
from typing import Any, Dict, List

from errors import ConfigurationError

EXPERIMENT_PRESETS: Dict[str, Dict[str, Any]] = {
    "gp7": {
        "name": "gp7",
        "function": "gp",
        "dim": 7,
        "theta": [1.0] * 7,
        "sigma2": 1.0,
        "beta": 0.0,
        "train": {"kind": "uniform", "n": 100},
        "test": {"kind": "uniform", "n": 2000},
        "fit": "mle",
        "replications": 20,
    },
    "piston14": {
        "name": "piston14",
        "function": "piston",
        "train": {"kind": "faure", "n": 14, "base": 7},
        "test": {"kind": "faure", "n": 2000, "base": 7},
        "fit": "mle",
        "replications": 20,
    },
    "borehole": {
        "name": "borehole",
        "function": "borehole",
        "train": {"kind": "uniform", "n": 32},
        "test": {"kind": "uniform", "n": 5000},
        "fit": "mle",
        "replications": 10,
    },
    "welch": {
        "name": "welch",
        "function": "welch",
        "train": {"kind": "uniform", "n": 320},
        "test": {"kind": "uniform", "n": 5000},
        "fit": "mle",
        "n_restarts": 4,
        "max_iter": 600,
        "warm_start": True,
        "replications": 10,
    },
    "piston": {
        "name": "piston",
        "function": "piston",
        "train": {"kind": "uniform", "n": 49},
        "test": {"kind": "uniform", "n": 5000},
        "fit": "mle",
        "replications": 10,
    },
    "friedman": {
        "name": "friedman",
        "function": "friedman",
        "train": {"kind": "uniform", "n": 50},
        "test": {"kind": "uniform", "n": 5000},
        "fit": "mle",
        "replications": 10,
    },
    "robotarm": {
        "name": "robotarm",
        "function": "robotarm",
        "train": {"kind": "uniform", "n": 512},
        "test": {"kind": "uniform", "n": 5000},
        "fit": "mle",
        "n_restarts": 4,
        "replications": 10,
        "slow": True,
    },
    "gp_blup": {
        "name": "gp_blup",
        "function": "gp",
        "dim": 3,
        "theta": [0.5] * 3,
        "sigma2": 2.0,
        "beta": 1.0,
        "train": {"kind": "uniform", "n": 40},
        "test": {"kind": "uniform", "n": 300},
        "fit": "fixed",
        "replications": 20,
    },
}

TABLES: Dict[str, List[str]] = {
    "1": ["gp7", "piston14"],
    "3": ["borehole", "welch", "piston", "friedman", "robotarm"],
}

FIGURE_SETTINGS: Dict[str, Dict[str, Any]] = {
    "fig1": {
        "function": "zakharov",
        "design_points": [[0.5, 0.0], [1.0, 0.5], [0.5, 1.0], [0.0, 0.5]],
        "thetas": [1.0, 0.05],
        "nu": 2.5,
        "grid": 41,
        "epsilon": 0.0,
    },
    "fig2": {
        "rho_grid": [round(0.01 * i, 2) for i in range(1, 101)],
        "M_grid": [0.5, 1.0, 1.5, 2.0, 2.5, 3.0],
    },
}


def list_presets() -> List[str]:
    return list(EXPERIMENT_PRESETS.keys())


def get_preset(name: str) -> Dict[str, Any]:
    """Copy of a named experiment configuration document"""
    if name not in EXPERIMENT_PRESETS:
        raise ConfigurationError(f"Unknown preset '{name}'. Available: {list_presets()}")
    return copy.deepcopy(EXPERIMENT_PRESETS[name])


def get_table(which: str) -> List[str]:
    """Preset names making up one results table"""
    which = str(which)
    if which not in TABLES:
        raise ConfigurationError(f"Unknown table '{which}'. Available: {list(TABLES)}")
    return list(TABLES[which])


def get_figure_settings(name: str) -> Dict[str, Any]:
    if name not in FIGURE_SETTINGS:
        raise ConfigurationError(f"Unknown figure '{name}'. Available: {list(FIGURE_SETTINGS)}")
    return copy.deepcopy(FIGURE_SETTINGS[name])

"""Built-in run configurations.

Each function returns a plain configuration dict suitable for
:func:`arrestflow.config.config_from_dict`.  The growth scenarios use
clockwise curves, so the normal points inward and ``c < 0`` moves the front
outward, and a positive (repulsive) nonlocal force opposes that growth.
"""

import copy

from .errors import BadParameter

_SOLVER_CSF = {"M": 256, "dt": 1e-3, "snapshot_every": 0.05}

# Annulus with a narrow slot: its realizing chord crosses the slot, outside the curve.
_SLOTTED = {"shape": "horseshoe", "outer": 1.6, "inner": 0.4, "gap": 0.1, "corner": 0.06,
            "orientation": "cw"}


def circle_csf(t_end=0.4):
    """Unit circle under pure curve shortening; radius follows ``sqrt(1 - 2t)``."""
    return {
        "interfaces": [{"initial": {"shape": "circle", "R": 1.0}, "c": 0.0}],
        "kernels": [[{"type": "zero"}]],
        "solver": dict(_SOLVER_CSF, t_end=t_end),
    }


def ellipse_csf(t_end=0.1, M=256, dt=1e-3):
    """2:1 ellipse under pure curve shortening."""
    return {
        "interfaces": [{"initial": {"shape": "ellipse", "a": 2.0, "b": 1.0}, "c": 0.0}],
        "kernels": [[{"type": "zero"}]],
        "solver": dict(_SOLVER_CSF, M=M, dt=dt, t_end=t_end, snapshot_every=t_end),
    }


def growth_without_repulsion(t_end=1.0):
    """Slotted annulus growing outward with no interaction.

    The slot walls run into each other, the curve crosses itself and the
    trapped loop then collapses.
    """
    return {
        "interfaces": [{"initial": dict(_SLOTTED), "c": -1.5}],
        "kernels": [[{"type": "zero"}]],
        "solver": {"M": 512, "dt": 5e-5, "t_end": t_end, "snapshot_every": 0.05,
                   "monitor_every": 0.01},
    }


def growth_with_repulsion(t_end=1.0, alpha=0.05, beta=1.0):
    """The same growth with gaussian self-repulsion in the arrested-front regime."""
    cfg = growth_without_repulsion(t_end)
    cfg["kernels"] = [[{"type": "gaussian", "alpha": alpha, "beta": beta}]]
    return cfg


SCENARIOS = {
    "circle-csf": circle_csf,
    "ellipse-csf": ellipse_csf,
    "slot-growth": growth_without_repulsion,
    "slot-growth-repelled": growth_with_repulsion,
}


def scenario(name, **overrides):
    """Configuration dict of a named built-in scenario (a fresh copy)."""
    try:
        make = SCENARIOS[name]
    except KeyError:
        raise BadParameter(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}") from None
    return copy.deepcopy(make(**overrides))

"""Run configuration: one JSON document, defaults filled in, unknown keys rejected."""

from __future__ import annotations

import copy
import json
from pathlib import Path

from .kernels import QuadratureConfig
from .model import MarketModel, OptionContract, VasicekParams
from .montecarlo import PathConfig
from .surface import Grid


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "model": {"kappa": 0.3, "theta": 0.05, "beta": 0.01, "sigma": 0.4, "rho": 0.5},
    "contract": {"strike": 100.0, "maturity": 1.0},
    "grid": {"n_t": 50, "n_r": 41, "r_min": -0.05, "r_max": 0.15, "last_gap": 1e-3},
    "solver": {"eps": 0.01, "max_iter": 200},
    "quadrature": {"outer_nodes": 64, "inner_nodes": 64, "inner_truncation": 8.0, "target_rel_tol": 1e-6},
    "mc": {"n_paths": 200000, "n_steps": 100, "seed": 20240601, "antithetic": True, "block_size": 8192},
    "point": {"t": 0.0, "r": 0.0478, "x": 82.11},
    "surface": None,
    "price": {"points": None, "solve": False},
    "sweep": {"axis": "rho", "values": [-0.8, 0.0, 0.8], "t": [0.0, 0.5, 0.9]},
    "validate": {"ls_paths": 100000, "ls_steps": 50, "premium_steps": 200},
    "hedge": {"n_paths": 10000, "rebalance_steps": [50, 100, 200]},
    "threads": 1,
}


def _merge(base: dict, over: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        where = f"{path}{k}"
        if k not in base:
            raise ConfigError(f"unknown config key: {where}")
        if isinstance(base[k], dict):
            if not isinstance(v, dict):
                raise ConfigError(f"config key {where} must be an object")
            out[k] = _merge(base[k], v, where + ".")
        else:
            out[k] = v
    return out


def load_config(path=None, overrides: dict | None = None) -> dict:
    """Defaults, then the JSON file, then ``overrides`` (same nesting)."""
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        cfg = _merge(cfg, doc)
    if overrides:
        cfg = _merge(cfg, overrides)
    build(cfg)  # validate every component
    return cfg


def build(cfg: dict) -> dict:
    """Typed objects for a resolved config; component errors become ConfigError."""
    try:
        m = cfg["model"]
        model = MarketModel(VasicekParams(m["kappa"], m["theta"], m["beta"]), m["sigma"], m["rho"])
        contract = OptionContract(float(cfg["contract"]["strike"]), float(cfg["contract"]["maturity"]))
        g = cfg["grid"]
        grid = Grid.default(contract.maturity, int(g["n_t"]), int(g["n_r"]), g["r_min"], g["r_max"], g["last_gap"])
        q = cfg["quadrature"]
        quad = QuadratureConfig(int(q["outer_nodes"]), int(q["inner_nodes"]), float(q["inner_truncation"]),
                                float(q["target_rel_tol"]))
        c = cfg["mc"]
        mc = PathConfig(int(c["n_paths"]), int(c["n_steps"]), int(c["seed"]), bool(c["antithetic"]),
                        int(c["block_size"]))
        s = cfg["solver"]
        if not s["eps"] > 0 or int(s["max_iter"]) < 1:
            raise ValueError("solver needs eps > 0 and max_iter >= 1")
        if int(cfg["threads"]) < 1:
            raise ValueError("threads must be >= 1")
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return {"model": model, "contract": contract, "grid": grid, "quad": quad, "mc": mc,
            "eps": float(s["eps"]), "max_iter": int(s["max_iter"]), "threads": int(cfg["threads"])}


def with_model(cfg: dict, **changes) -> dict:
    out = copy.deepcopy(cfg)
    out["model"].update(changes)
    return out

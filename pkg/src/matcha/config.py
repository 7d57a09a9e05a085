"""Experiment configuration: a single JSON document, validated on load.

Example::

    {
      "graph": {"generator": "erdos_renyi", "m": 8, "edge_prob": 0.5, "seed": 7},
      "budgets": [0.5],
      "policies": ["vanilla", "matcha"],
      "iterations": 5000,
      "lr": 0.05,
      "objective": {"kind": "quadratic", "dim": 10, "sigma": 1.0, "zeta": 1.0,
                    "hessian_spread": 0.5, "seed": 0},
      "comm": {"t_link": 1.0, "t_comp": 0.0},
      "seeds": [0, 1, 2],
      "out": "runs/er8",
      "log_interval": 50
    }

``graph`` is either ``{"file": path}`` or a generator spec
(``erdos_renyi`` with ``edge_prob``, ``geometric`` with ``radius``).
``lr`` may be the string ``"theory"`` for sqrt(m / K).
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field

from .errors import ConfigError
from .graph import Topology, generate_erdos_renyi, generate_geometric, read_graph
from .schedule import CommTimeModel, Policy

DEFAULTS = {
    "budgets": [0.5],
    "policies": ["vanilla", "matcha"],
    "iterations": 1000,
    "lr": 0.05,
    "objective": {"kind": "quadratic", "dim": 10},
    "comm": {"t_link": 1.0, "t_comp": 0.0},
    "seeds": [0],
    "out": "out",
    "log_interval": 10,
}


@dataclass
class ExperimentConfig:
    graph: dict
    budgets: list
    policies: list
    iterations: int
    lr: object
    objective: dict
    comm: CommTimeModel
    seeds: list
    out: str
    log_interval: int
    raw: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        cfg = copy.deepcopy(DEFAULTS)
        cfg.update(copy.deepcopy(data))
        if "graph" not in cfg:
            raise ConfigError("config needs a 'graph' section")
        budgets = cfg["budgets"]
        if not isinstance(budgets, list) or not budgets:
            raise ConfigError("'budgets' must be a non-empty list")
        for b in budgets:
            if isinstance(b, bool) or not isinstance(b, (int, float)) or not 0.0 < b <= 1.0:
                raise ConfigError(f"budget {b!r} is not in (0, 1]")
        try:
            policies = [Policy(p).value for p in cfg["policies"]]
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        K = cfg["iterations"]
        if not isinstance(K, int) or isinstance(K, bool) or K < 1:
            raise ConfigError("'iterations' must be a positive integer")
        lr = cfg["lr"]
        if lr != "theory" and (isinstance(lr, bool) or not isinstance(lr, (int, float)) or lr <= 0):
            raise ConfigError("'lr' must be a positive number or \"theory\"")
        seeds = cfg["seeds"]
        if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) for s in seeds):
            raise ConfigError("'seeds' must be a non-empty list of integers")
        li = cfg["log_interval"]
        if not isinstance(li, int) or li < 1:
            raise ConfigError("'log_interval' must be a positive integer")
        try:
            comm = CommTimeModel(**cfg["comm"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad 'comm' section: {exc}") from exc
        if not isinstance(cfg["objective"], dict):
            raise ConfigError("'objective' must be an object")
        return cls(cfg["graph"], [float(b) for b in budgets], policies, K, lr, cfg["objective"],
                   comm, seeds, str(cfg["out"]), li, cfg)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                return cls.from_dict(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc


def build_graph(spec: dict) -> Topology:
    """Materialise a graph section (file or generator)."""
    if not isinstance(spec, dict):
        raise ConfigError("'graph' must be an object")
    if "file" in spec:
        return read_graph(spec["file"])
    gen = spec.get("generator")
    try:
        m = int(spec["m"])
        seed = int(spec.get("seed", 0))
        connected = bool(spec.get("require_connected", True))
        if gen == "erdos_renyi":
            return generate_erdos_renyi(m, float(spec["edge_prob"]), seed, connected)
        if gen == "geometric":
            return generate_geometric(m, float(spec["radius"]), seed, connected)
    except KeyError as exc:
        raise ConfigError(f"graph generator spec is missing {exc}") from exc
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown graph generator {gen!r}")

"""JSON experiment configuration.

Top-level keys: ``problem`` (required), ``network``, ``training``,
``eval``.  Unknown keys anywhere are rejected, not ignored.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import ConfigError
from .geometry import BatchSizes
from .metrics import EvalGrid
from .network import CoupledArch
from .physics import ProblemSpec
from .problems import custom_problem, get_problem
from .training import TrainConfig


@dataclass
class ExperimentConfig:
    problem: ProblemSpec
    archs: CoupledArch
    train: TrainConfig
    grid: EvalGrid
    interface_points: int


def _require_keys(section: dict, allowed: set[str], where: str) -> None:
    extra = set(section) - allowed
    if extra:
        raise ConfigError(f"unknown {where} keys {sorted(extra)}; "
                          f"allowed: {sorted(allowed)}")


def _parse_problem(section) -> ProblemSpec:
    if isinstance(section, str):
        return get_problem(section)
    if not isinstance(section, dict) or "name" not in section:
        raise ConfigError("problem must be a name or a mapping with a name")
    if section["name"] == "custom" or len(section) > 1:
        return custom_problem(section)
    return get_problem(section["name"])


def _parse_network(section: dict, geometry) -> CoupledArch:
    _require_keys(section, {"hidden_layers", "width", "activation"}, "network")
    return CoupledArch.for_geometry(
        geometry,
        hidden_layers=int(section.get("hidden_layers", 3)),
        width=int(section.get("width", 16)),
        activation=section.get("activation", "tanh"))


def _parse_batch(section: dict) -> BatchSizes:
    _require_keys(section, {"interior", "boundary", "interface"}, "training.batch")
    interior = int(section.get("interior", 400))
    boundary = int(section.get("boundary", 100))
    return BatchSizes(interior_s=interior, interior_d=interior,
                      boundary_s=boundary, boundary_d=boundary,
                      interface=int(section.get("interface", 100))).validate()


def _parse_training(section: dict) -> TrainConfig:
    allowed = {"optimizer", "alpha", "beta1", "beta2", "eps", "iters", "batch",
               "weights", "seed", "log_every", "grad_norm_tol",
               "lr_decay_every", "lr_decay_factor"}
    _require_keys(section, allowed, "training")
    kwargs = {}
    if "optimizer" in section:
        kwargs["optimizer"] = section["optimizer"]
    if "alpha" in section:
        kwargs["learning_rate"] = float(section["alpha"])
    for key in ("beta1", "beta2", "eps", "grad_norm_tol", "lr_decay_factor"):
        if key in section:
            kwargs[key] = float(section[key])
    for key, attr in (("iters", "max_iters"), ("seed", "seed"),
                      ("log_every", "log_every"), ("lr_decay_every", "lr_decay_every")):
        if key in section:
            kwargs[attr] = int(section[key])
    if "weights" in section:
        kwargs["weights"] = section["weights"]
    kwargs["batch"] = _parse_batch(section.get("batch", {}))
    return TrainConfig(**kwargs).validate()


def _parse_eval(section: dict) -> tuple[EvalGrid, int]:
    _require_keys(section, {"grid", "interface_points"}, "eval")
    grid = section.get("grid", [101, 101])
    if isinstance(grid, int):
        grid = [grid, grid]
    if not (isinstance(grid, list) and len(grid) == 2):
        raise ConfigError("eval.grid must be an integer or [nx, ny]")
    return (EvalGrid(int(grid[0]), int(grid[1])).validate(),
            int(section.get("interface_points", 1001)))


def parse_config(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    _require_keys(raw, {"problem", "network", "training", "eval"}, "top-level")
    if "problem" not in raw:
        raise ConfigError("config needs a problem section")
    grid, iface_pts = _parse_eval(raw.get("eval", {}))
    problem = _parse_problem(raw["problem"])
    return ExperimentConfig(
        problem=problem,
        archs=_parse_network(raw.get("network", {}), problem.geometry),
        train=_parse_training(raw.get("training", {})),
        grid=grid,
        interface_points=iface_pts)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as err:
        raise ConfigError(f"invalid JSON in {path}: {err}") from err
    return parse_config(raw)

"""Run configuration: one JSON file, deep-merged over defaults.

Every command reads the sections it needs from a single config dict; unknown
keys are left in place (they are harmless and keep configs forward
compatible).  ``--set a.b.c=value`` overrides follow JSON value syntax with a
bare-string fallback, so ``--set training.steps=200`` and
``--set task.kind=streaks`` both do the obvious thing.

Per-task defaults: the mediator eta and the training objective follow the
task kind unless the config pins them explicitly (smooth-field runs the
maximally stochastic eta = 0 with noise prediction; the residual tasks run
eta = 10 with their weighted / direct objectives).
"""

from __future__ import annotations

import copy
import json
from pathlib import Path

from .bases import BasisSet, legendre_trig_basis, pixel_basis
from .fields import Rng
from .process import DiffusionProcess
from .schedules import Schedule, make_ddpm_schedule, make_vp_schedule
from .tasks import gen_residual_task, gen_smooth_field_task, task_residual_basis


class ConfigError(ValueError):
    """Bad config file, bad override, or a value the builders cannot use."""


DEFAULTS = {
    "seed": 0,
    "schedule": {"kind": "vp-continuous", "beta_min": 1.0e-4,
                 "beta_max": 0.02, "T": 100.0},
    "process": {"eta": None},
    "basis": {"kind": None, "n1": 3, "n2": 5},
    "task": {"kind": "smooth-field", "size": 16},
    "points": None,
    "network": {"hidden": [64, 64]},
    "training": {"steps": 2000, "batch": 4, "lr": 1.0e-3, "optimizer": "adam",
                 "beta1": 0.9, "beta2": 0.999, "eps": 1.0e-8,
                 "objective": None, "time_dist": "continuous", "seed": 1,
                 "lr_decay": 1.0, "lr_decay_every": 0, "ema_decay": 0.0},
    "sampling": {"steps": 5, "scheme": "uniform", "n_samples": 4,
                 "final_denoise": False},
    "simulate": {"n_paths": 1000, "n_steps": 256},
    "restore": {"denoiser": "train", "checkpoint": None},
    "case3": {"eta_grid": [0.0, 1.0, 10.0, 100.0, 1.0e9],
              "n_draws": 100000, "poisson_lambda": 4.0},
}

_TASK_ETA = {"smooth-field": 0.0, "streaks": 10.0, "shadow-box": 10.0}
_TASK_OBJECTIVE = {"smooth-field": "noise-pred",
                   "streaks": "weighted-noise-pred",
                   "shadow-box": "x0-pred"}


def _deep_merge(base: dict, update: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in update.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def load_config(path) -> dict:
    """Read one JSON config file and merge it over the defaults."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        with open(p) as fh:
            user = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {p} is not valid JSON: {exc}") from exc
    if not isinstance(user, dict):
        raise ConfigError(f"config file {p} must hold a JSON object")
    return _deep_merge(DEFAULTS, user)


def apply_overrides(cfg: dict, assignments) -> dict:
    """Apply dotted-path key=value overrides in order."""
    for item in assignments or ():
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"--set expects dotted.key=value, got {item!r}")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = cfg
        parts = key.split(".")
        for part in parts[:-1]:
            nxt = node.setdefault(part, {})
            if not isinstance(nxt, dict):
                raise ConfigError(f"--set path {key!r} crosses the scalar {part!r}")
            node = nxt
        node[parts[-1]] = value
    return cfg


def build_schedule(cfg: dict) -> Schedule:
    sc = cfg["schedule"]
    kind = sc.get("kind", "vp-continuous")
    if kind == "vp-continuous":
        return make_vp_schedule(sc["beta_min"], sc["beta_max"], sc["T"])
    if kind == "vp-ddpm":
        return make_ddpm_schedule(sc["beta_min"], sc["beta_max"], sc["T"])
    raise ConfigError(f"unknown schedule kind {kind!r}")


def build_fixed_basis(cfg: dict, shape, default_kind="legendre-trig") -> BasisSet:
    bc = cfg["basis"]
    kind = bc.get("kind") or default_kind
    if kind == "legendre-trig":
        return legendre_trig_basis(int(bc["n1"]), int(bc["n2"]), shape)
    if kind == "pixel":
        return pixel_basis(shape)
    raise ConfigError(f"unknown basis kind {kind!r}")


def build_task(cfg: dict):
    """(task, basis) from the task section; deterministic in cfg['seed']."""
    tc = cfg["task"]
    kind = tc.get("kind")
    size = int(tc.get("size", 16))
    rng = Rng(int(cfg["seed"]), 0)
    if kind == "smooth-field":
        basis = build_fixed_basis(cfg, (size, size))
        return gen_smooth_field_task((size, size), basis, rng), basis
    if kind in ("streaks", "shadow-box"):
        task = gen_residual_task((size, size), kind, rng)
        return task, task_residual_basis(task)
    raise ConfigError(f"unknown task kind {kind!r}")


def resolved_eta(cfg: dict) -> float:
    eta = cfg["process"].get("eta")
    if eta is None:
        eta = _TASK_ETA.get(cfg["task"].get("kind"), 0.0)
    eta = float(eta)
    if eta < 0:
        raise ConfigError("process.eta must be non-negative")
    return eta


def resolved_objective(cfg: dict) -> str:
    obj = cfg["training"].get("objective")
    if obj is None:
        obj = _TASK_OBJECTIVE.get(cfg["task"].get("kind"), "noise-pred")
    return obj


def build_process(cfg: dict, basis: BasisSet) -> DiffusionProcess:
    return DiffusionProcess(build_schedule(cfg), basis, resolved_eta(cfg))

"""JSON run configuration: defaults, overrides and validated parameter blocks."""

from __future__ import annotations

import copy
import dataclasses
import json
from importlib import resources

from .forces import ElectroParams, HeatParams, UnitedParams
from .levelset import GacParams
from .snakes import SnakeParams

FORCE_KINDS = ("electrostatic", "heat", "united")
SOLVER_KINDS = ("snakes", "gac")


class ConfigError(ValueError):
    """Invalid or incomplete configuration."""


def load_defaults() -> dict:
    text = resources.files("deformable").joinpath("defaults.json").read_text()
    return json.loads(text)


def deep_merge(base: dict, override: dict) -> dict:
    """Recursively merge ``override`` into a copy of ``base``."""
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def parse_assignment(text: str) -> tuple[str, object]:
    """Split ``a.b.c=value``; the value is parsed as JSON when possible."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    key = key.strip()
    if not key or any(not part for part in key.split(".")):
        raise ConfigError(f"bad override key {key!r}")
    try:
        val = json.loads(raw)
    except json.JSONDecodeError:
        val = raw
    return key, val


def set_dotted(cfg: dict, key: str, val) -> None:
    node = cfg
    parts = key.split(".")
    for part in parts[:-1]:
        nxt = node.get(part)
        if nxt is None:
            nxt = node[part] = {}
        if not isinstance(nxt, dict):
            raise ConfigError(f"cannot set {key!r}: {part!r} is not an object")
        node = nxt
    node[parts[-1]] = val


def load_config(path: str | None = None, overrides: list[str] = ()) -> dict:
    """Defaults, then the JSON file at ``path``, then ``key=value`` overrides.

    A ``force`` section given in the file replaces the default one as a
    whole, so a united force must spell out both of its sub-blocks.
    """
    cfg = load_defaults()
    if path is not None:
        with open(path) as fh:
            try:
                user = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from None
        if not isinstance(user, dict):
            raise ConfigError(f"{path}: top level must be an object")
        force = user.pop("force", None)
        cfg = deep_merge(cfg, user)
        if force is not None:
            cfg["force"] = force
    for item in overrides:
        set_dotted(cfg, *parse_assignment(item))
    return cfg


def make_params(cls, block, where: str):
    """Instantiate a parameter dataclass, turning bad keys/values into ConfigError."""
    if not isinstance(block, dict):
        raise ConfigError(f"{where} must be an object")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(block) - known)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    try:
        return cls(**block)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def force_params(force: dict) -> tuple[str, dict]:
    """Validate a force section; returns ``(kind, params)`` for build_force_source."""
    if not isinstance(force, dict):
        raise ConfigError("force must be an object")
    kind = force.get("kind")
    if kind not in FORCE_KINDS:
        raise ConfigError(f"force.kind must be one of {FORCE_KINDS}, got {kind!r}")
    needed = {"electrostatic": ["electrostatic"], "heat": ["heat"],
              "united": ["electrostatic", "heat", "united"]}[kind]
    missing = [name for name in needed if name not in force]
    if missing:
        raise ConfigError(f"{kind} force needs block(s) {missing}")
    classes = {"electrostatic": ElectroParams, "heat": HeatParams, "united": UnitedParams}
    out = {"normalize": bool(force.get("normalize", True))}
    for name in needed:
        key = "electro" if name == "electrostatic" else name
        out[key] = make_params(classes[name], force[name], f"force.{name}")
    return kind, out


def solver_params(solver: dict):
    if not isinstance(solver, dict):
        raise ConfigError("solver must be an object")
    kind = solver.get("kind")
    if kind not in SOLVER_KINDS:
        raise ConfigError(f"solver.kind must be one of {SOLVER_KINDS}, got {kind!r}")
    cls = SnakeParams if kind == "snakes" else GacParams
    return kind, make_params(cls, solver.get(kind, {}), f"solver.{kind}")


def edge_params(edge) -> dict:
    """Validate the ``edge`` block (keyword arguments of ``edge_map``)."""
    if not isinstance(edge, dict):
        raise ConfigError("edge must be an object")
    unknown = sorted(set(edge) - {"smooth_sigma", "threshold"})
    if unknown:
        raise ConfigError(f"edge: unknown keys {unknown}")
    try:
        sigma = float(edge.get("smooth_sigma", 1.0))
        threshold = float(edge.get("threshold", 0.0))
    except (TypeError, ValueError):
        raise ConfigError("edge values must be numbers") from None
    if sigma < 0:
        raise ConfigError("edge.smooth_sigma must be >= 0")
    if not 0.0 <= threshold <= 1.0:
        raise ConfigError("edge.threshold must lie in [0, 1]")
    return {"smooth_sigma": sigma, "threshold": threshold}

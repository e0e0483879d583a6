"""Scenario files: strict YAML schema, versioned with schema_version: 1.

Unknown keys are errors, every validation message names the offending key,
and a parsed Scenario is fully validated (the dataclass constructors run
their own invariant checks on top of the schema walk).  The sweep block
names a numeric field by dotted path with optional [i] indexing, e.g.
``sim.policy.thresholds[1]`` or ``sim.classes[0].arrival.rate``.
"""

from __future__ import annotations

import copy
import re
from dataclasses import dataclass

import yaml

from .aqm import AredParams, BlueParams, RedParams, RemParams
from .engine import (
    AimdConfig,
    BlueConfig,
    DecbitConfig,
    DropTailConfig,
    PbsConfig,
    RedConfig,
    RemConfig,
    SimConfig,
)
from .pbs import ClassTraffic, PbsThresholds
from .traffic import GEParams

__all__ = ["ConfigError", "Scenario", "SweepSpec", "parse_config", "apply_sweep_value"]

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Scenario file rejected: parse failure or schema violation."""


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    values: tuple


@dataclass(frozen=True)
class Scenario:
    name: str
    sim: SimConfig
    sweep: SweepSpec | None
    out: str | None
    raw: dict


def _require(mapping, key, path, typ=None):
    if key not in mapping:
        raise ConfigError(f"missing required key '{path}{key}'")
    val = mapping[key]
    if typ is not None and not isinstance(val, typ):
        raise ConfigError(f"key '{path}{key}' must be {typ}, got {type(val).__name__}")
    return val


def _check_keys(mapping, allowed, path):
    if not isinstance(mapping, dict):
        raise ConfigError(f"'{path.rstrip('.')}' must be a mapping")
    for key in mapping:
        if key not in allowed:
            raise ConfigError(
                f"unknown key '{path}{key}' (allowed: {', '.join(sorted(allowed))})"
            )


def _number(mapping, key, path, default=None, required=False):
    if key not in mapping:
        if required:
            raise ConfigError(f"missing required key '{path}{key}'")
        return default
    val = mapping[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"key '{path}{key}' must be numeric, got {val!r}")
    return val


def _flag(mapping, key, path, default=False):
    val = mapping.get(key, default)
    if not isinstance(val, bool):
        raise ConfigError(f"key '{path}{key}' must be true/false, got {val!r}")
    return val


def _ge_params(node, path):
    _check_keys(node, {"rate", "scv"}, path)
    rate = _number(node, "rate", path, required=True)
    scv = _number(node, "scv", path, default=1.0)
    try:
        return GEParams(rate=float(rate), scv=float(scv))
    except ValueError as exc:
        raise ConfigError(f"invalid GE parameters at '{path.rstrip('.')}': {exc}") from exc


def _policy(node, path, capacity):
    kind = _require(node, "kind", path, str)
    try:
        if kind == "droptail":
            _check_keys(node, {"kind"}, path)
            return DropTailConfig()
        if kind == "red":
            allowed = {"kind", "weight", "min_th", "max_th", "max_p", "gentle", "ecn",
                       "mean_tx_time", "ared"}
            _check_keys(node, allowed, path)
            params = RedParams(
                weight=float(_number(node, "weight", path, default=0.002)),
                min_th=float(_number(node, "min_th", path, default=5.0)),
                max_th=float(_number(node, "max_th", path, default=15.0)),
                max_p=float(_number(node, "max_p", path, default=0.1)),
                gentle=_flag(node, "gentle", path),
                ecn=_flag(node, "ecn", path),
                mean_tx_time=node.get("mean_tx_time"),
            )
            if params.max_th > capacity:
                raise ConfigError(
                    f"key '{path}max_th' ({params.max_th}) exceeds capacity ({capacity})"
                )
            ared = None
            if "ared" in node:
                anode = node["ared"]
                apath = path + "ared."
                _check_keys(anode, {"interval", "increment", "decrease_factor",
                                    "min_max_p", "max_max_p"}, apath)
                ared = AredParams(
                    interval=float(_number(anode, "interval", apath, default=0.5)),
                    increment=float(_number(anode, "increment", apath, default=0.02)),
                    decrease_factor=float(_number(anode, "decrease_factor", apath, default=0.9)),
                    min_max_p=float(_number(anode, "min_max_p", apath, default=0.01)),
                    max_max_p=float(_number(anode, "max_max_p", apath, default=0.5)),
                )
            return RedConfig(params=params, ared=ared)
        if kind == "blue":
            _check_keys(node, {"kind", "l_th", "r1", "r2", "freeze_time", "ecn"}, path)
            return BlueConfig(params=BlueParams(
                l_th=float(_number(node, "l_th", path, default=10.0)),
                r1=float(_number(node, "r1", path, default=0.0025)),
                r2=float(_number(node, "r2", path, default=0.00025)),
                freeze_time=float(_number(node, "freeze_time", path, default=0.1)),
                ecn=_flag(node, "ecn", path),
            ))
        if kind == "rem":
            _check_keys(node, {"kind", "gamma", "phi", "alpha", "target_backlog",
                               "update_interval", "ecn"}, path)
            return RemConfig(params=RemParams(
                gamma=float(_number(node, "gamma", path, default=0.001)),
                phi=float(_number(node, "phi", path, default=1.001)),
                alpha=float(_number(node, "alpha", path, default=0.1)),
                target_backlog=float(_number(node, "target_backlog", path, default=20.0)),
                update_interval=float(_number(node, "update_interval", path, default=0.01)),
                ecn=_flag(node, "ecn", path),
            ))
        if kind == "decbit":
            _check_keys(node, {"kind"}, path)
            return DecbitConfig()
        if kind == "pbs":
            _check_keys(node, {"kind", "thresholds"}, path)
            thr = _require(node, "thresholds", path, list)
            for i, t in enumerate(thr):
                if isinstance(t, bool) or not isinstance(t, int):
                    raise ConfigError(
                        f"key '{path}thresholds[{i}]' must be an integer, got {t!r}"
                    )
            return PbsConfig(thresholds=PbsThresholds(capacity=capacity, thresholds=tuple(thr)))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"invalid policy at '{path.rstrip('.')}': {exc}") from exc
    raise ConfigError(
        f"key '{path}kind' must be one of droptail/red/blue/rem/decbit/pbs, got {kind!r}"
    )


def _sim(node, path, seed, replications):
    allowed = {"capacity", "duration", "warmup", "policy", "classes", "aimd", "aimd_service"}
    _check_keys(node, allowed, path)
    capacity = _number(node, "capacity", path, required=True)
    if isinstance(capacity, bool) or not isinstance(capacity, int) or capacity < 1:
        raise ConfigError(f"key '{path}capacity' must be a positive integer")
    duration = float(_number(node, "duration", path, required=True))
    warmup = _number(node, "warmup", path)

    classes = []
    for i, cnode in enumerate(node.get("classes", []) or []):
        cpath = f"{path}classes[{i}]."
        _check_keys(cnode, {"arrival", "service"}, cpath)
        classes.append(ClassTraffic(
            arrival=_ge_params(_require(cnode, "arrival", cpath, dict), cpath + "arrival."),
            service=_ge_params(_require(cnode, "service", cpath, dict), cpath + "service."),
            priority=i + 1,
        ))

    aimd = []
    for i, anode in enumerate(node.get("aimd", []) or []):
        apath = f"{path}aimd[{i}]."
        _check_keys(anode, {"rtt", "cwnd0", "label"}, apath)
        label = anode.get("label")
        if label is not None and not isinstance(label, str):
            raise ConfigError(f"key '{apath}label' must be a string")
        try:
            aimd.append(AimdConfig(
                rtt=float(_number(anode, "rtt", apath, required=True)),
                cwnd0=float(_number(anode, "cwnd0", apath, default=1.0)),
                label=label,
            ))
        except ValueError as exc:
            raise ConfigError(f"invalid aimd source at '{apath.rstrip('.')}': {exc}") from exc

    aimd_service = None
    if "aimd_service" in node:
        aimd_service = _ge_params(node["aimd_service"], path + "aimd_service.")

    policy = _policy(_require(node, "policy", path, dict), path + "policy.", capacity)
    try:
        return SimConfig(
            capacity=capacity,
            policy=policy,
            classes=tuple(classes),
            aimd=tuple(aimd),
            aimd_service=aimd_service,
            duration=duration,
            warmup=None if warmup is None else float(warmup),
            seed=seed,
            replications=replications,
        )
    except ValueError as exc:
        raise ConfigError(f"invalid '{path.rstrip('.')}' block: {exc}") from exc


_PATH_RE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)((?:\[\d+\])*)$")


def _path_tokens(parameter):
    tokens = []
    for part in parameter.split("."):
        m = _PATH_RE.match(part)
        if m is None:
            raise ConfigError(f"malformed sweep parameter path segment {part!r}")
        tokens.append(m.group(1))
        for idx in re.findall(r"\[(\d+)\]", m.group(2)):
            tokens.append(int(idx))
    return tokens


def _resolve_parent(raw, parameter):
    tokens = _path_tokens(parameter)
    node = raw
    for tok in tokens[:-1]:
        try:
            node = node[tok]
        except (KeyError, IndexError, TypeError):
            raise ConfigError(f"sweep parameter '{parameter}' does not resolve "
                              f"(failed at segment {tok!r})") from None
    leaf = tokens[-1]
    try:
        current = node[leaf]
    except (KeyError, IndexError, TypeError):
        raise ConfigError(f"sweep parameter '{parameter}' does not resolve "
                          f"(failed at segment {leaf!r})") from None
    if isinstance(current, bool) or not isinstance(current, (int, float)):
        raise ConfigError(
            f"sweep parameter '{parameter}' must name a numeric field, found {current!r}"
        )
    return node, leaf, current


def apply_sweep_value(scenario: Scenario, value) -> Scenario:
    """Rebuild the scenario with the swept field set to `value` (re-validated)."""
    raw = copy.deepcopy(scenario.raw)
    node, leaf, current = _resolve_parent(raw, scenario.sweep.parameter)
    node[leaf] = int(value) if isinstance(current, int) and float(value).is_integer() else value
    return _build(raw)


def _build(raw: dict) -> Scenario:
    _check_keys(raw, {"schema_version", "name", "seed", "replications", "sim", "sweep", "out"}, "")
    version = _require(raw, "schema_version", "", int)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version}, expected {SCHEMA_VERSION}")
    name = _require(raw, "name", "", str)
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("key 'seed' must be a non-negative integer")
    replications = raw.get("replications", 1)
    if isinstance(replications, bool) or not isinstance(replications, int) or replications < 1:
        raise ConfigError("key 'replications' must be a positive integer")
    out = raw.get("out")
    if out is not None and not isinstance(out, str):
        raise ConfigError("key 'out' must be a string path")

    sim = _sim(_require(raw, "sim", "", dict), "sim.", seed, replications)

    sweep = None
    if "sweep" in raw:
        snode = raw["sweep"]
        _check_keys(snode, {"parameter", "values"}, "sweep.")
        parameter = _require(snode, "parameter", "sweep.", str)
        values = _require(snode, "values", "sweep.", list)
        if not values:
            raise ConfigError("key 'sweep.values' must be non-empty")
        for v in values:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"sweep values must be numeric, got {v!r}")
        diffs = [values[i + 1] - values[i] for i in range(len(values) - 1)]
        if diffs and not (all(d > 0 for d in diffs) or all(d < 0 for d in diffs)):
            raise ConfigError("key 'sweep.values' must be strictly monotone")
        _resolve_parent(raw, parameter)  # fail fast on bad paths
        sweep = SweepSpec(parameter=parameter, values=tuple(values))

    return Scenario(name=name, sim=sim, sweep=sweep, out=out, raw=raw)


def parse_config(text: str) -> Scenario:
    """Parse and validate one scenario document."""
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        if mark is not None:
            raise ConfigError(
                f"parse error at line {mark.line + 1}, column {mark.column + 1}: {exc}"
            ) from exc
        raise ConfigError(f"parse error: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping at top level")
    return _build(raw)

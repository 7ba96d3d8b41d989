"""Scenario files: JSON schema, validation and construction of the initial state."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import jsonschema

from .mission import MissionPlan, StageObjective
from .rng import Xoshiro256
from .security import DETECTION_DELAY, AttackEvent, SpoofSpec
from .spectral import Agent, LayeredNetwork
from .tactical import DEFAULT_DIRECTIONS, DEFAULT_EPS, DEFAULT_MAX_ROUNDS, Mode

SCHEMA_VERSION = "mosaic-scenario/1"

_vec2 = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_nonneg_int = {"type": "integer", "minimum": 0}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["schema", "network", "total_steps"],
    "properties": {
        "schema": {"const": SCHEMA_VERSION},
        "name": {"type": "string"},
        "description": {"type": "string"},
        "network": {
            "type": "object",
            "additionalProperties": False,
            "required": ["layer_count", "comm_radius", "decay", "agents"],
            "properties": {
                "layer_count": {"type": "integer", "minimum": 1},
                "comm_radius": {"type": "number", "exclusiveMinimum": 0},
                "decay": {"type": "number", "minimum": 0},
                "placement_box": {"type": "array", "items": {"type": "number"}, "minItems": 4, "maxItems": 4},
                "agents": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["id", "layer"],
                        "properties": {
                            "id": _nonneg_int,
                            "layer": _nonneg_int,
                            "position": _vec2,
                            "max_step": {"type": "number", "minimum": 0},
                        },
                    },
                },
            },
        },
        "attacks": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["kind", "start_step", "duration"],
                "properties": {
                    "kind": {"enum": ["jam", "spoof", "node_loss"]},
                    "start_step": _nonneg_int,
                    "duration": {"type": "integer", "minimum": 1},
                    "budget": {"type": "integer", "minimum": 1},
                    "target": _nonneg_int,
                    "spoof": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["entry_position"],
                        "properties": {
                            "entry_position": _vec2,
                            "layer": _nonneg_int,
                            "trajectory": {"enum": ["stationary", "drift"]},
                            "speed": {"type": "number", "minimum": 0},
                            "max_step": {"type": "number", "minimum": 0},
                            "id": _nonneg_int,
                        },
                    },
                },
            },
        },
        "mission": {
            "type": "object",
            "additionalProperties": False,
            "required": ["stages"],
            "properties": {
                "horizon": {"type": "integer", "minimum": 1},
                "stages": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["start_step", "end_step"],
                        "properties": {
                            "waypoints": {
                                "type": "object",
                                "patternProperties": {"^[0-9]+$": _vec2},
                                "additionalProperties": False,
                            },
                            "beta": {"type": "number", "minimum": 0},
                            "lambda_floor": {"type": "number", "minimum": 0},
                            "start_step": _nonneg_int,
                            "end_step": _nonneg_int,
                        },
                    },
                },
            },
        },
        "epsilon": {"type": "number", "exclusiveMinimum": 0},
        "max_rounds": {"type": "integer", "minimum": 1},
        "directions": {"type": "integer", "minimum": 1},
        "jam_defense_budget": {"type": "integer", "minimum": 1},
        "total_steps": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "mode": {"enum": ["nominal", "robust"]},
        "detection": {"type": "boolean"},
        "detection_delay": {"type": "integer", "minimum": 1},
        "plot_stride": {"type": "integer", "minimum": 1},
    },
}


class ScenarioError(ValueError):
    """Invalid scenario; ``field`` is a dotted path to the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class ScenarioConfig:
    network: LayeredNetwork
    total_steps: int
    attacks: tuple[AttackEvent, ...] = ()
    mission: Optional[MissionPlan] = None
    epsilon: float = DEFAULT_EPS
    max_rounds: int = DEFAULT_MAX_ROUNDS
    directions: int = DEFAULT_DIRECTIONS
    jam_defense_budget: int = 1
    seed: int = 0
    mode: str = "nominal"
    detection: bool = True
    detection_delay: int = DETECTION_DELAY
    plot_stride: int = 5
    name: str = "scenario"
    # agents whose position was not given; placed from ``seed`` by :func:`initial_network`
    unplaced: tuple[int, ...] = ()
    placement_box: tuple[float, float, float, float] = (0.0, 0.0, 10.0, 10.0)

    def __post_init__(self):
        _check_semantics(self)

    @property
    def tactical_mode(self) -> Mode:
        if self.mode == "robust":
            return Mode("robust", k=self.jam_defense_budget)
        return Mode("nominal")

    @property
    def plan(self) -> MissionPlan:
        if self.mission is not None:
            return self.mission
        return MissionPlan((StageObjective({}, 0.0, 0.0, 0, self.total_steps),), horizon=1)

    def with_overrides(self, seed: Optional[int] = None, mode: Optional[str] = None) -> "ScenarioConfig":
        return replace(
            self,
            seed=self.seed if seed is None else seed,
            mode=self.mode if mode is None else mode,
        )


def _check_semantics(cfg: ScenarioConfig):
    if cfg.total_steps < 1:
        raise ScenarioError("total_steps", "must be >= 1")
    if cfg.mode not in ("nominal", "robust"):
        raise ScenarioError("mode", f"unknown mode {cfg.mode!r}")
    ids = set(cfg.network.ids)
    for i, ev in enumerate(cfg.attacks):
        if ev.end_step > cfg.total_steps:
            raise ScenarioError(f"attacks[{i}]", "attack window must lie within [0, total_steps)")
        if ev.kind == "node_loss" and ev.target not in ids:
            raise ScenarioError(f"attacks[{i}].target", f"no agent with id {ev.target}")
        if ev.kind == "spoof":
            if ev.spoof_spec.layer >= cfg.network.layer_count:
                raise ScenarioError(f"attacks[{i}].spoof.layer", "layer does not exist")
            if ev.spoof_spec.agent_id is not None and ev.spoof_spec.agent_id in ids:
                raise ScenarioError(f"attacks[{i}].spoof.id", "collides with a real agent id")
    if cfg.mission is not None:
        for i, st in enumerate(cfg.mission.stages):
            for layer in st.waypoints:
                if layer >= cfg.network.layer_count:
                    raise ScenarioError(f"mission.stages[{i}].waypoints", f"layer {layer} does not exist")


def _path(err: jsonschema.ValidationError) -> str:
    out = ""
    for part in err.absolute_path:
        out += f"[{part}]" if isinstance(part, int) else (f".{part}" if out else str(part))
    return out or "<root>"


def parse_scenario(doc: dict) -> ScenarioConfig:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        raise ScenarioError(_path(errors[0]), errors[0].message)

    net = doc["network"]
    box = tuple(float(v) for v in net.get("placement_box", (0.0, 0.0, 10.0, 10.0)))
    if box[2] < box[0] or box[3] < box[1]:
        raise ScenarioError("network.placement_box", "expected [xmin, ymin, xmax, ymax]")
    agents, unplaced = [], []
    for i, a in enumerate(net["agents"]):
        if a["layer"] >= net["layer_count"]:
            raise ScenarioError(f"network.agents[{i}].layer", "layer does not exist")
        if "position" not in a:
            unplaced.append(a["id"])
        agents.append(Agent(id=a["id"], layer=a["layer"], position=tuple(a.get("position", (0.0, 0.0))),
                            max_step=a.get("max_step", 1.0)))
    try:
        network = LayeredNetwork(tuple(agents), net["layer_count"], net["comm_radius"], net["decay"])
    except ValueError as e:
        raise ScenarioError("network", str(e)) from None

    attacks = []
    for i, a in enumerate(doc.get("attacks", [])):
        spoof = None
        if "spoof" in a:
            s = a["spoof"]
            spoof = SpoofSpec(
                entry_position=tuple(s["entry_position"]),
                layer=s.get("layer", 0),
                trajectory=s.get("trajectory", "drift"),
                speed=s.get("speed", 1.0),
                max_step=s.get("max_step", 1.0),
                agent_id=s.get("id"),
            )
        try:
            attacks.append(AttackEvent(a["kind"], a["start_step"], a["duration"], a.get("budget", 1), spoof, a.get("target")))
        except ValueError as e:
            raise ScenarioError(f"attacks[{i}]", str(e)) from None

    mission = None
    if "mission" in doc:
        m = doc["mission"]
        stages = []
        for i, s in enumerate(m["stages"]):
            try:
                stages.append(StageObjective(
                    waypoints={int(k): tuple(v) for k, v in s.get("waypoints", {}).items()},
                    beta=s.get("beta", 0.0),
                    lambda_floor=s.get("lambda_floor", 0.0),
                    start_step=s["start_step"],
                    end_step=s["end_step"],
                ))
            except ValueError as e:
                raise ScenarioError(f"mission.stages[{i}]", str(e)) from None
        try:
            mission = MissionPlan(tuple(stages), m.get("horizon", 1))
        except ValueError as e:
            raise ScenarioError("mission.stages", str(e)) from None

    return ScenarioConfig(
        network=network,
        total_steps=doc["total_steps"],
        attacks=tuple(attacks),
        mission=mission,
        epsilon=doc.get("epsilon", DEFAULT_EPS),
        max_rounds=doc.get("max_rounds", DEFAULT_MAX_ROUNDS),
        directions=doc.get("directions", DEFAULT_DIRECTIONS),
        jam_defense_budget=doc.get("jam_defense_budget", 1),
        seed=doc.get("seed", 0),
        mode=doc.get("mode", "nominal"),
        detection=doc.get("detection", True),
        detection_delay=doc.get("detection_delay", DETECTION_DELAY),
        plot_stride=doc.get("plot_stride", 5),
        name=doc.get("name", "scenario"),
        unplaced=tuple(unplaced),
        placement_box=box,
    )


def load_scenario(path) -> ScenarioConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as e:
        raise ScenarioError("<file>", f"cannot read {path}: {e.strerror}") from None
    except json.JSONDecodeError as e:
        raise ScenarioError("<file>", f"{path}: invalid JSON ({e.msg} at line {e.lineno})") from None
    cfg = parse_scenario(doc)
    if "name" not in doc:
        cfg = replace(cfg, name=path.stem)
    return cfg


def initial_network(cfg: ScenarioConfig) -> LayeredNetwork:
    """The starting network, with unplaced agents drawn uniformly from the placement box."""
    if not cfg.unplaced:
        return cfg.network
    rng = Xoshiro256(cfg.seed)
    xmin, ymin, xmax, ymax = cfg.placement_box
    unplaced = set(cfg.unplaced)
    agents = []
    for a in cfg.network.agents:
        if a.id in unplaced:
            a = replace(a, position=(rng.uniform(xmin, xmax), rng.uniform(ymin, ymax)))
        agents.append(a)
    return cfg.network.with_agents(agents)

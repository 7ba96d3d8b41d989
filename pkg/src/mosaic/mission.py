"""Moving-horizon mission planning over staged objectives."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence

import numpy as np

from .spectral import LayeredNetwork, Status
from .tactical import (
    DEFAULT_DIRECTIONS,
    DEFAULT_EPS,
    DEFAULT_MAX_ROUNDS,
    ConnectivityObjective,
    GneResult,
    Mode,
    OperatorDecision,
    gne_iterate,
)


@dataclass(frozen=True)
class StageObjective:
    waypoints: Mapping[int, tuple[float, float]]
    beta: float = 0.0
    lambda_floor: float = 0.0
    start_step: int = 0
    end_step: int = 1

    def __post_init__(self):
        if self.end_step <= self.start_step:
            raise ValueError("stage end_step must exceed start_step")
        if self.beta < 0 or self.lambda_floor < 0:
            raise ValueError("beta and lambda_floor must be >= 0")
        object.__setattr__(
            self, "waypoints", {int(k): (float(v[0]), float(v[1])) for k, v in dict(self.waypoints).items()}
        )

    def active_at(self, step: int) -> bool:
        return self.start_step <= step < self.end_step


@dataclass(frozen=True)
class MissionPlan:
    stages: tuple[StageObjective, ...]
    horizon: int = 1

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        for a, b in zip(self.stages, self.stages[1:]):
            if b.start_step < a.end_step:
                raise ValueError("stages must be ordered and non-overlapping")

    def stage_at(self, step: int) -> Optional[StageObjective]:
        for s in self.stages:
            if s.active_at(step):
                return s
        return None


def _waypoint_errors(net: LayeredNetwork, obj: StageObjective):
    """(agent ids, x - waypoint rows) over active agents; zero rows where a layer has no waypoint."""
    act = [a for a in net.agents if a.status is Status.ACTIVE]
    err = np.zeros((len(act), 2))
    for r, a in enumerate(act):
        wp = obj.waypoints.get(a.layer)
        if wp is not None:
            err[r] = np.asarray(a.position) - wp
    return [a.id for a in act], err


class StagePayoff:
    """Connectivity minus beta times the mean squared distance to the layer waypoints."""

    def __init__(self, obj: StageObjective, mode: Mode = Mode()):
        self.stage = obj
        self.connectivity = ConnectivityObjective(mode)

    def value(self, net: LayeredNetwork) -> float:
        lam = self.connectivity.value(net)
        if self.stage.beta == 0:
            return lam
        _, err = _waypoint_errors(net, self.stage)
        if len(err) == 0:
            return lam
        return lam - self.stage.beta * float((err**2).sum(axis=1).mean())

    def gradients(self, net: LayeredNetwork):
        grads = self.connectivity.gradients(net)
        if self.stage.beta == 0:
            return grads
        ids, err = _waypoint_errors(net, self.stage)
        for aid, e in zip(ids, err):
            if grads.get(aid) is not None:
                grads[aid] = grads[aid] - self.stage.beta * 2.0 * e / len(ids)
        return grads


def stage_payoff(net: LayeredNetwork, obj: StageObjective, mode: Mode = Mode()) -> float:
    return StagePayoff(obj, mode).value(net)


@dataclass(frozen=True)
class StepEvents:
    """What changed in the realized state this step."""

    detected: tuple[int, ...] = ()
    attacks_started: tuple[int, ...] = ()
    attacks_ended: tuple[int, ...] = ()
    quarantined: tuple[int, ...] = ()
    lost: tuple[int, ...] = ()
    stage_boundary: bool = False


def replan_trigger(events: StepEvents) -> bool:
    return bool(
        events.detected
        or events.attacks_started
        or events.attacks_ended
        or events.quarantined
        or events.lost
        or events.stage_boundary
    )


@dataclass(frozen=True)
class PlanResult:
    decisions: tuple[OperatorDecision, ...]
    gne: Optional[GneResult]
    stage: Optional[StageObjective]
    rollout: tuple[GneResult, ...] = field(default=(), repr=False)
    reused: bool = False

    @property
    def moves(self) -> dict[int, np.ndarray]:
        out = {}
        for d in self.decisions:
            out.update(d.moves)
        return out


def _stay(net: LayeredNetwork) -> tuple[OperatorDecision, ...]:
    return tuple(
        OperatorDecision(op, {a.id: np.zeros(2) for a in net.agents if a.layer == op and a.status is Status.ACTIVE})
        for op in range(net.layer_count)
    )


def plan_step(
    net: LayeredNetwork,
    plan: MissionPlan,
    mode: Mode = Mode(),
    eps: float = DEFAULT_EPS,
    max_rounds: int = DEFAULT_MAX_ROUNDS,
    m: int = DEFAULT_DIRECTIONS,
) -> PlanResult:
    """Roll the stage game forward min(H, steps left in the stage) steps, assuming
    no attacks; only the first step's decisions are meant to be applied."""
    stage = plan.stage_at(net.step_index)
    if stage is None:
        return PlanResult(_stay(net), None, None)
    payoff = StagePayoff(stage, mode)
    steps = min(plan.horizon, stage.end_step - net.step_index)
    rollout = []
    state = net
    for _ in range(steps):
        res = gne_iterate(state, eps, max_rounds, payoff, m)
        rollout.append(res)
        state = replace(res.net, step_index=state.step_index + 1)
    first = rollout[0]
    return PlanResult(first.decisions, first, stage, tuple(rollout))


class MissionPlanner:
    """Receding-horizon planner that reuses its last rollout while the realized
    state matches the rollout's prediction and nothing has triggered a replan."""

    def __init__(self, plan: MissionPlan, mode: Mode = Mode(), eps: float = DEFAULT_EPS,
                 max_rounds: int = DEFAULT_MAX_ROUNDS, m: int = DEFAULT_DIRECTIONS):
        self.plan = plan
        self.mode = mode
        self.eps = eps
        self.max_rounds = max_rounds
        self.m = m
        self._predicted: list[tuple[LayeredNetwork, GneResult]] = []
        self.replans = 0

    def step(self, net: LayeredNetwork, events: StepEvents = StepEvents(), mode: Optional[Mode] = None) -> PlanResult:
        mode = mode or self.mode
        if mode != self.mode:
            self.mode = mode
            self._predicted = []
        if not replan_trigger(events) and self._predicted and self._predicted[0][0] == net:
            state, res = self._predicted.pop(0)
            return PlanResult(res.decisions, res, self.plan.stage_at(net.step_index), reused=True)
        out = plan_step(net, self.plan, mode, self.eps, self.max_rounds, self.m)
        self.replans += 1
        self._predicted = []
        state = net
        for res in out.rollout:
            self._predicted.append((state, res))
            state = replace(res.net, step_index=state.step_index + 1)
        if self._predicted:
            self._predicted.pop(0)
        return out

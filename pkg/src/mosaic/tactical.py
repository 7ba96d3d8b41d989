"""Operator best responses and alternating best-response dynamics toward a GNE.

One call to :func:`gne_iterate` solves the tactical game of a single time
step: every active agent picks a displacement from a finite candidate set
built at the start of the step, each layer's operator picks its agents'
displacements, and all operators share the connectivity objective.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .games import GneCertificate, check_gne
from .security import apply_moves, robust_connectivity
from .spectral import (
    DegenerateEigenvalueError,
    DegenerateNetworkError,
    LayeredNetwork,
    Status,
    lambda2_position_gradient,
    network_lambda2,
    network_spectrum,
)

DEFAULT_EPS = 1e-4
DEFAULT_MAX_ROUNDS = 100
DEFAULT_DIRECTIONS = 8
# a move replaces the current one only if it beats it by more than this
IMPROVEMENT_FLOOR = 1e-12


@dataclass(frozen=True)
class Mode:
    kind: str = "nominal"
    k: int = 1
    perceived: bool = False

    def __post_init__(self):
        if self.kind not in ("nominal", "robust"):
            raise ValueError(f"unknown mode {self.kind!r}")
        if self.kind == "robust" and self.k < 1:
            raise ValueError("robust mode needs k >= 1")

    @classmethod
    def parse(cls, text: str, k: int = 1) -> "Mode":
        """'nominal', 'perceived', 'robust' or 'robust(k)'."""
        text = text.strip()
        if text == "perceived":
            return cls("nominal", perceived=True)
        m = re.fullmatch(r"robust(?:\((\d+)\))?", text)
        if m:
            return cls("robust", k=int(m.group(1)) if m.group(1) else k)
        return cls(text)


# weight of nominal lambda2 inside the robust objective; without it every
# graph with a bridge scores 0 under a 1-link jam and the search stalls
ROBUST_TIE_WEIGHT = 0.01


class ConnectivityObjective:
    """lambda2 of the (perceived) network, or its worst case under a k-link jam.

    The robust value is ``robust_lambda2 + tie_weight * lambda2``.
    """

    def __init__(self, mode: Mode = Mode(), tie_weight: float = ROBUST_TIE_WEIGHT):
        self.mode = mode
        self.tie_weight = tie_weight

    def value(self, net: LayeredNetwork) -> float:
        if self.mode.kind == "robust":
            t = robust_connectivity(net, self.mode.k, perceived=self.mode.perceived)
            return t.robust_lambda2 + self.tie_weight * t.nominal_lambda2
        return network_lambda2(net, perceived=self.mode.perceived)

    def gradients(self, net: LayeredNetwork) -> dict[int, Optional[np.ndarray]]:
        """Per-agent ascent directions for the candidate sets; None where unreliable."""
        try:
            res = network_spectrum(net, perceived=self.mode.perceived)
        except DegenerateNetworkError:
            return {a.id: None for a in net.agents}
        out = {}
        for a in net.agents:
            try:
                out[a.id] = lambda2_position_gradient(net, res, a.id, perceived=self.mode.perceived)
            except DegenerateEigenvalueError:
                out[a.id] = None
        return out


def as_objective(mode_or_objective):
    if isinstance(mode_or_objective, str):
        return ConnectivityObjective(Mode.parse(mode_or_objective))
    if isinstance(mode_or_objective, Mode):
        return ConnectivityObjective(mode_or_objective)
    return mode_or_objective


@dataclass(frozen=True)
class OperatorDecision:
    operator: int
    moves: dict[int, np.ndarray] = field(default_factory=dict)

    def is_stay(self) -> bool:
        return all(not np.any(d) for d in self.moves.values())


def candidate_moves(agent, m: int = DEFAULT_DIRECTIONS, gradient: Optional[np.ndarray] = None) -> list[np.ndarray]:
    """Stay, ``m`` compass moves of length max_step, then the gradient direction."""
    if m < 1:
        raise ValueError("m must be >= 1")
    out = [np.zeros(2)]
    if agent.max_step == 0:
        return out
    for i in range(m):
        t = 2 * math.pi * i / m
        d = np.array([math.cos(t), math.sin(t)])
        d[np.abs(d) < 1e-15] = 0.0
        out.append(agent.max_step * d)
    if gradient is not None:
        norm = float(np.linalg.norm(gradient))
        if norm > 0 and np.isfinite(norm):
            out.append(agent.max_step * np.asarray(gradient, dtype=float) / norm)
    return out


class StageGame:
    """The finite game of one time step.

    Players are the active agents; a profile maps agent id to an index into
    that agent's candidate list. The local game of an agent is its own
    unilateral choice; the composed game lets its whole layer operator
    re-coordinate (one greedy pass), all under the common objective.
    """

    def __init__(self, net: LayeredNetwork, objective, m: int = DEFAULT_DIRECTIONS):
        self.net = net
        self.objective = as_objective(objective)
        grads = self.objective.gradients(net)
        self.players = [a.id for a in net.agents if a.status is Status.ACTIVE]
        self.candidates = {aid: candidate_moves(net.agent(aid), m, grads.get(aid)) for aid in self.players}
        self.layer_of = {aid: net.agent(aid).layer for aid in self.players}
        self._cache: dict[tuple, float] = {}

    @property
    def player_count(self) -> int:
        return len(self.players)

    def zero_profile(self) -> dict[int, int]:
        return {aid: 0 for aid in self.players}

    def moves(self, profile) -> dict[int, np.ndarray]:
        return {aid: self.candidates[aid][profile[aid]] for aid in self.players}

    def net_for(self, profile) -> LayeredNetwork:
        return apply_moves(self.net, self.moves(profile))

    def value(self, profile) -> float:
        key = tuple(profile[aid] for aid in self.players)
        if key not in self._cache:
            self._cache[key] = float(self.objective.value(self.net_for(profile)))
        return self._cache[key]

    def agent_best(self, profile, aid) -> tuple[int, float]:
        """Best candidate for one agent given the others; keeps the current one on ties."""
        cur = profile[aid]
        trial = dict(profile)
        values = []
        for c in range(len(self.candidates[aid])):
            trial[aid] = c
            values.append(self.value(trial))
        best = int(np.argmax(values))
        if values[best] > values[cur] + IMPROVEMENT_FLOOR:
            return best, values[best]
        return cur, values[cur]

    def operator_pass(self, profile, operator: int) -> dict[int, int]:
        profile = dict(profile)
        for aid in self.players:
            if self.layer_of[aid] == operator:
                profile[aid], _ = self.agent_best(profile, aid)
        return profile

    def local_regret(self, profile, player: int) -> float:
        aid = self.players[player]
        _, best = self.agent_best(profile, aid)
        return best - self.value(profile)

    def composed_regret(self, profile, player: int) -> float:
        op = self.layer_of[self.players[player]]
        return self.value(self.operator_pass(profile, op)) - self.value(profile)

    def decision(self, profile, operator: int) -> OperatorDecision:
        return OperatorDecision(
            operator,
            {aid: self.candidates[aid][profile[aid]] for aid in self.players if self.layer_of[aid] == operator},
        )


def operator_best_response(net: LayeredNetwork, operator: int, mode="nominal", m: int = DEFAULT_DIRECTIONS) -> OperatorDecision:
    """Coordinate-wise greedy choice for the agents of one layer, ascending id."""
    if not 0 <= operator < net.layer_count:
        raise ValueError(f"operator {operator} out of range")
    game = StageGame(net, mode, m)
    return game.decision(game.operator_pass(game.zero_profile(), operator), operator)


@dataclass(frozen=True)
class GneResult:
    net: LayeredNetwork
    lambda2_trace: list[float]
    rounds: int
    converged: bool
    certificate: GneCertificate
    decisions: tuple[OperatorDecision, ...] = ()
    initial_value: float = 0.0
    profile: dict = field(default_factory=dict, repr=False)

    @property
    def final_value(self) -> float:
        return self.lambda2_trace[-1] if self.lambda2_trace else self.initial_value


def gne_iterate(
    net: LayeredNetwork,
    eps: float = DEFAULT_EPS,
    max_rounds: int = DEFAULT_MAX_ROUNDS,
    mode="nominal",
    m: int = DEFAULT_DIRECTIONS,
) -> GneResult:
    """Alternate operator best responses (layers 0..L-1, cyclically).

    Stops once a full cycle gains at most ``eps`` and the profile certifies
    as an eps-GNE, or after ``max_rounds`` cycles.
    """
    if eps <= 0:
        raise ValueError("eps must be > 0")
    if max_rounds < 1:
        raise ValueError("max_rounds must be >= 1")
    game = StageGame(net, mode, m)
    profile = game.zero_profile()
    start = game.value(profile)
    trace: list[float] = []
    converged = False
    cert = GneCertificate(False, float("inf"))
    rounds = 0
    while rounds < max_rounds:
        rounds += 1
        before = game.value(profile)
        for op in range(net.layer_count):
            profile = game.operator_pass(profile, op)
            trace.append(game.value(profile))
        if game.value(profile) - before <= eps:
            cert = check_gne(profile, game, eps)
            if cert.holds:
                converged = True
                break
    if not converged:
        cert = check_gne(profile, game, eps)
    return GneResult(
        net=game.net_for(profile),
        lambda2_trace=trace,
        rounds=rounds,
        converged=converged,
        certificate=cert,
        decisions=tuple(game.decision(profile, op) for op in range(net.layer_count)),
        initial_value=start,
        profile=profile,
    )

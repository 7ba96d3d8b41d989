"""Adversary models (jamming, spoofing, node loss), worst-case analysis and self-healing."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from typing import Mapping, Optional, Sequence

import numpy as np

from .games import MatrixGame
from .spectral import (
    Agent,
    LayeredNetwork,
    Status,
    active_ids,
    build_weights,
    lambda2_values,
    network_lambda2,
)

ENUMERATION_CAP = 5000
DETECTION_DELAY = 6
ATTACK_KINDS = ("jam", "spoof", "node_loss")

Link = tuple[int, int]


@dataclass(frozen=True)
class SpoofSpec:
    entry_position: tuple[float, float]
    layer: int = 0
    # "stationary" or "drift": move away from the honest agents' centroid at ``speed`` m/step
    trajectory: str = "drift"
    speed: float = 1.0
    max_step: float = 1.0
    agent_id: Optional[int] = None

    def __post_init__(self):
        if self.trajectory not in ("stationary", "drift"):
            raise ValueError(f"unknown spoof trajectory {self.trajectory!r}")
        object.__setattr__(self, "entry_position", tuple(float(v) for v in self.entry_position))


@dataclass(frozen=True)
class AttackEvent:
    kind: str
    start_step: int
    duration: int
    budget: int = 1
    spoof_spec: Optional[SpoofSpec] = None
    target: Optional[int] = None

    def __post_init__(self):
        if self.kind not in ATTACK_KINDS:
            raise ValueError(f"unknown attack kind {self.kind!r}")
        if self.start_step < 0:
            raise ValueError("start_step must be >= 0")
        if self.duration < 1:
            raise ValueError("duration must be >= 1")
        if self.kind == "jam" and self.budget < 1:
            raise ValueError("jam budget must be >= 1")
        if (self.spoof_spec is not None) != (self.kind == "spoof"):
            raise ValueError("spoof_spec is required for, and only for, spoof attacks")
        if self.kind == "node_loss" and self.target is None:
            raise ValueError("node_loss requires a target")

    @property
    def end_step(self) -> int:
        return self.start_step + self.duration

    def active_at(self, step: int) -> bool:
        return self.start_step <= step < self.end_step


@dataclass(frozen=True)
class JamResult:
    links: tuple[Link, ...]
    lambda2_after: float
    exact: bool

    def __iter__(self):
        return iter((self.links, self.lambda2_after))


@dataclass(frozen=True)
class ThreatAssessment:
    nominal_lambda2: float
    robust_lambda2: float
    critical_links: tuple[Link, ...]
    exact: bool = True


def _true_graph(net: LayeredNetwork, perceived: bool = False):
    W = build_weights(net, perceived)
    m = net.mask(perceived)
    return W[np.ix_(m, m)], active_ids(net, perceived)


def present_links(W: np.ndarray, ids: Sequence[int]) -> list[tuple[Link, int, int]]:
    """Links with positive weight as (id pair, row, col), lexicographic by id pair."""
    n = len(ids)
    out = [((ids[i], ids[j]), i, j) for i in range(n) for j in range(i + 1, n) if W[i, j] > 0]
    return sorted(out)


def _removal_lambda2(W: np.ndarray, subsets: list[tuple[tuple[int, int], ...]]) -> np.ndarray:
    """lambda2 after removing each subset of (row, col) pairs, batched."""
    if W.shape[0] < 2:
        return np.zeros(len(subsets))
    stack = np.repeat(W[None], len(subsets), axis=0)
    for s, pairs in enumerate(subsets):
        for i, j in pairs:
            stack[s, i, j] = stack[s, j, i] = 0.0
    deg = stack.sum(axis=2)
    L = -stack
    idx = np.arange(W.shape[0])
    L[:, idx, idx] = deg
    out = np.empty(len(subsets))
    for lo in range(0, len(subsets), 1024):
        out[lo : lo + 1024] = lambda2_values(L[lo : lo + 1024])
    return out


def _argmin_lex(values: np.ndarray, keys: list) -> int:
    """Index of the minimum value; near-ties go to the smallest key."""
    lo = float(values.min())
    tie = 1e-9 * max(1.0, abs(lo))
    cands = [i for i, v in enumerate(values) if v - lo <= tie]
    return min(cands, key=lambda i: keys[i])


def worst_case_jam_weights(W: np.ndarray, ids: Sequence[int], k: int, cap: int = ENUMERATION_CAP) -> JamResult:
    if k < 1:
        raise ValueError("jam budget k must be >= 1")
    links = present_links(W, ids)
    base = float(_removal_lambda2(W, [()])[0])
    if not links:
        return JamResult((), base, True)
    k = min(k, len(links))
    total = sum(math.comb(len(links), r) for r in range(1, k + 1))
    if total <= cap:
        combos = [c for r in range(1, k + 1) for c in itertools.combinations(links, r)]
        values = _removal_lambda2(W, [tuple((i, j) for _, i, j in c) for c in combos])
        keys = [tuple(l for l, _, _ in c) for c in combos]
        best = _argmin_lex(values, keys)
        return JamResult(keys[best], float(values[best]), True)

    # greedy: remove the single most damaging link, k times
    removed: list = []
    remaining = list(links)
    value = base
    for _ in range(k):
        trial = [tuple((i, j) for _, i, j in removed + [l]) for l in remaining]
        values = _removal_lambda2(W, trial)
        best = _argmin_lex(values, [l[0] for l in remaining])
        removed.append(remaining.pop(best))
        value = float(values[best])
    return JamResult(tuple(sorted(l for l, _, _ in removed)), value, False)


def worst_case_jam(net: LayeredNetwork, k: int, cap: int = ENUMERATION_CAP, perceived: bool = False) -> JamResult:
    """Links (at most ``k``) whose removal minimizes lambda2 of the active subgraph."""
    W, ids = _true_graph(net, perceived)
    return worst_case_jam_weights(W, ids, k, cap)


def robust_connectivity(net: LayeredNetwork, k: int, cap: int = ENUMERATION_CAP, perceived: bool = False) -> ThreatAssessment:
    W, ids = _true_graph(net, perceived)
    jam = worst_case_jam_weights(W, ids, k, cap)
    nominal = float(_removal_lambda2(W, [()])[0])
    return ThreatAssessment(
        nominal_lambda2=nominal,
        robust_lambda2=min(jam.lambda2_after, nominal),
        critical_links=jam.links,
        exact=jam.exact,
    )


def apply_moves(net: LayeredNetwork, moves: Mapping[int, Sequence[float]]) -> LayeredNetwork:
    return net.with_agents(a.moved(moves[a.id]) if a.id in moves else a for a in net.agents)


def jam_as_matrix_game(net: LayeredNetwork, defender_moves: Sequence, k: int, cap: int = ENUMERATION_CAP) -> MatrixGame:
    """Defender (rows: candidate decisions) vs. jammer (columns: link subsets).

    Columns range over the empty removal plus every subset of at most ``k``
    links drawn from the links present after any defender move; removing a
    link absent from a row's graph has no effect there. Beyond ``cap``
    columns, the subsets are built from the most damaging links only and the
    game is flagged inexact.
    """
    if not defender_moves:
        raise ValueError("defender_moves must be nonempty")
    graphs = []
    for mv in defender_moves:
        moves = mv.moves if hasattr(mv, "moves") else mv
        graphs.append(_true_graph(apply_moves(net, moves)))
    universe = sorted({l for W, ids in graphs for l, _, _ in present_links(W, ids)})
    kk = min(k, len(universe))
    total = 1 + sum(math.comb(len(universe), r) for r in range(1, kk + 1))
    exact = total <= cap
    pool = universe
    if not exact:
        # rank links by the worst single-removal damage over all rows
        damage = {}
        for W, ids in graphs:
            lk = present_links(W, ids)
            vals = _removal_lambda2(W, [((i, j),) for _, i, j in lk])
            for (l, _, _), v in zip(lk, vals):
                damage[l] = min(damage.get(l, np.inf), v)
        pool = sorted(universe, key=lambda l: (damage.get(l, np.inf), l))
        while pool and 1 + sum(math.comb(len(pool), r) for r in range(1, kk + 1)) > cap:
            pool = pool[:-1]
        pool = sorted(pool)
    columns = [()] + [c for r in range(1, min(kk, len(pool)) + 1) for c in itertools.combinations(pool, r)]
    payoff = np.zeros((len(graphs), len(columns)))
    for r, (W, ids) in enumerate(graphs):
        pos = {idv: i for i, idv in enumerate(ids)}
        subsets = [
            tuple((pos[a], pos[b]) for a, b in col if a in pos and b in pos) for col in columns
        ]
        payoff[r] = _removal_lambda2(W, subsets)
    return MatrixGame(
        payoff=payoff,
        row_labels=tuple(range(len(graphs))),
        col_labels=tuple(columns),
        exact=exact,
    )


def inject_spoof(net: LayeredNetwork, spec: SpoofSpec) -> LayeredNetwork:
    """Add a fake agent visible to perceived objectives only."""
    agent_id = spec.agent_id if spec.agent_id is not None else max(net.ids, default=-1) + 1
    if agent_id in net.ids:
        existing = net.agent(agent_id)
        raise ValueError(f"agent id {agent_id} already present (status {existing.status.value})")
    fake = Agent(
        id=agent_id,
        layer=spec.layer,
        position=spec.entry_position,
        max_step=spec.max_step,
        status=Status.SPOOFED,
    )
    return net.with_agents(net.agents + (fake,))


def advance_spoof(net: LayeredNetwork, agent_id: int, spec: SpoofSpec) -> LayeredNetwork:
    """Move a spoofed agent one step along its trajectory rule."""
    if spec.trajectory == "stationary" or spec.speed == 0:
        return net
    fake = net.agent(agent_id)
    honest = [a.position for a in net.agents if a.status is Status.ACTIVE]
    if not honest:
        return net
    away = np.asarray(fake.position) - np.mean(honest, axis=0)
    norm = np.linalg.norm(away)
    direction = away / norm if norm > 0 else np.array([1.0, 0.0])
    return apply_moves(net, {agent_id: spec.speed * direction})


Snapshot = Mapping[int, tuple[float, float]]


def perceived_snapshot(net: LayeredNetwork) -> dict[int, tuple[float, float]]:
    """Positions reported by every agent the operators can currently see."""
    return {a.id: a.position for a in net.agents if a.status is not Status.QUARANTINED}


def detect_spoof(history: Sequence[Snapshot], net: LayeredNetwork, detection_delay: int = DETECTION_DELAY) -> list[int]:
    """Flag agents with implausible motion, or spoofed agents seen for ``detection_delay`` steps.

    ``history`` holds perceived position snapshots, oldest first; the last is
    the current step.
    """
    if not history:
        raise ValueError("history must hold at least one snapshot")
    flagged = set()
    for prev, cur in zip(history, history[1:]):
        for aid, pos in cur.items():
            if aid in prev and aid in net.ids:
                step = math.dist(prev[aid], pos)
                if step > net.agent(aid).max_step * (1 + 1e-6):
                    flagged.add(aid)
    for a in net.agents:
        if a.status is not Status.SPOOFED:
            continue
        age = -1
        for snap in reversed(history):
            if a.id not in snap:
                break
            age += 1
        if age >= detection_delay:
            flagged.add(a.id)
    return sorted(flagged)


def quarantine(net: LayeredNetwork, ids) -> LayeredNetwork:
    ids = list(ids)
    missing = [i for i in ids if i not in net.ids]
    if missing:
        raise KeyError(f"unknown agent ids {missing}")
    return net.with_status(ids, Status.QUARANTINED)


def spoof_free_lambda2(net: LayeredNetwork) -> float:
    """lambda2 of the perceived graph after deleting every spoofed node."""
    keep = [a for a in net.agents if a.status is not Status.SPOOFED]
    return network_lambda2(replace(net, agents=tuple(keep)), perceived=True)


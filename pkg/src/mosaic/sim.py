"""Per-step simulation loop binding the strategic, tactical and mission layers."""
from __future__ import annotations

import logging
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

from .mission import MissionPlanner, StepEvents
from .scenario import ScenarioConfig, initial_network
from .security import (
    AttackEvent,
    advance_spoof,
    apply_moves,
    detect_spoof,
    inject_spoof,
    perceived_snapshot,
    quarantine,
    worst_case_jam,
)
from .spectral import Status, network_lambda2

log = logging.getLogger(__name__)

RECOVERY_FRACTION = 0.95
RECOVERY_WINDOW = 10


@dataclass(frozen=True)
class StepRecord:
    step: int
    lambda2_true: float
    lambda2_perceived: float
    jam_links_removed: int
    spoof_active: bool
    quarantined_count: int
    gne_rounds: int
    gne_converged: bool
    lambda_floor_violation: bool
    positions: dict[int, tuple[float, float]]
    statuses: dict[int, str]
    # not part of the CSV
    jammed_links: tuple = ()
    certificate_holds: bool = False
    detected: tuple[int, ...] = ()


@dataclass
class SimTrace:
    agent_ids: tuple[int, ...]
    records: list[StepRecord] = field(default_factory=list)
    attacks: tuple[AttackEvent, ...] = ()
    name: str = "scenario"

    def __len__(self):
        return len(self.records)

    def lambda2(self) -> list[float]:
        return [r.lambda2_true for r in self.records]


@dataclass(frozen=True)
class AttackOutcome:
    kind: str
    start_step: int
    end_step: int
    pre_attack_lambda2: Optional[float]
    recovery_steps: Optional[int]  # None: unrecovered

    @property
    def recovered(self) -> bool:
        return self.recovery_steps is not None


@dataclass(frozen=True)
class RunSummary:
    name: str
    steps: int
    min_lambda2: float
    mean_lambda2: float
    final_lambda2: float
    steps_disconnected: int
    attacks: tuple[AttackOutcome, ...] = ()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["attacks"] = [asdict(a) for a in self.attacks]
        return d


@dataclass(frozen=True)
class ScenarioFailure:
    name: str
    error: str


def _stage_boundary(plan, t: int) -> bool:
    return t > 0 and plan.stage_at(t) != plan.stage_at(t - 1)


def run(cfg: ScenarioConfig) -> SimTrace:
    """Simulate ``cfg.total_steps`` steps.

    Each step: attack transitions, spoof detection and quarantine, mission
    planning, motion, then the jammer's worst-case cut for the measurement.
    """
    net = initial_network(cfg)
    real_ids = net.ids
    plan = cfg.plan
    planner = MissionPlanner(plan, cfg.tactical_mode, cfg.epsilon, cfg.max_rounds, cfg.directions)
    history: deque = deque(maxlen=cfg.detection_delay + 1)
    spoof_ids: dict[int, int] = {}
    lost: dict[int, int] = {}
    trace = SimTrace(agent_ids=real_ids, attacks=cfg.attacks, name=cfg.name)

    for t in range(cfg.total_steps):
        net = replace(net, step_index=t)
        started, ended, lost_now = [], [], []

        # (1) attack schedule
        for i, ev in enumerate(cfg.attacks):
            if ev.end_step == t:
                ended.append(i)
                if ev.kind == "node_loss" and i in lost:
                    target = lost.pop(i)
                    if net.agent(target).status is Status.QUARANTINED and target not in lost.values():
                        net = net.with_status([target], Status.ACTIVE)
        for i, ev in enumerate(cfg.attacks):
            if ev.start_step == t:
                started.append(i)
                if ev.kind == "spoof":
                    spec = ev.spoof_spec
                    if spec.agent_id is None:
                        spec = replace(spec, agent_id=max(net.ids) + 1)
                    net = inject_spoof(net, spec)
                    spoof_ids[i] = spec.agent_id
                    log.info("step %d: spoofed agent %d injected", t, spec.agent_id)
                elif ev.kind == "node_loss":
                    if net.agent(ev.target).status is Status.ACTIVE:
                        lost[i] = ev.target
                        lost_now.append(ev.target)
                        net = net.with_status([ev.target], Status.QUARANTINED)
            elif ev.kind == "spoof" and ev.active_at(t) and i in spoof_ids:
                aid = spoof_ids[i]
                if net.agent(aid).status is Status.SPOOFED:
                    net = advance_spoof(net, aid, ev.spoof_spec)

        # (2) detection and quarantine
        detected: list[int] = []
        if cfg.detection:
            history.append(perceived_snapshot(net))
            flagged = detect_spoof(list(history), net, cfg.detection_delay)
            detected = [a for a in flagged if net.agent(a).status is not Status.QUARANTINED]
            if detected:
                log.info("step %d: quarantining %s", t, detected)
                net = quarantine(net, detected)

        # (3) plan
        events = StepEvents(
            detected=tuple(detected),
            attacks_started=tuple(started),
            attacks_ended=tuple(ended),
            quarantined=tuple(detected),
            lost=tuple(lost_now),
            stage_boundary=_stage_boundary(plan, t),
        )
        spoofed_present = any(a.status is Status.SPOOFED for a in net.agents)
        mode = replace(cfg.tactical_mode, perceived=spoofed_present)
        step_plan = planner.step(net, events, mode)

        # (4) move
        net = apply_moves(net, step_plan.moves)

        # (5) measure, with the jammer's worst-case cut when jamming is active
        budget = sum(ev.budget for ev in cfg.attacks if ev.kind == "jam" and ev.active_at(t))
        lam_true = network_lambda2(net)
        jammed = ()
        if budget:
            jam = worst_case_jam(net, budget)
            jammed = jam.links
            lam_true = min(lam_true, jam.lambda2_after)
        lam_perceived = network_lambda2(net, perceived=True)

        # (6) record
        gne = step_plan.gne
        stage = step_plan.stage
        real = [net.agent(a) for a in real_ids]
        trace.records.append(StepRecord(
            step=t,
            lambda2_true=lam_true,
            lambda2_perceived=lam_perceived,
            jam_links_removed=len(jammed),
            spoof_active=any(ev.kind == "spoof" and ev.active_at(t) for ev in cfg.attacks),
            quarantined_count=sum(a.status is Status.QUARANTINED for a in net.agents),
            gne_rounds=gne.rounds if gne else 0,
            gne_converged=gne.converged if gne else False,
            lambda_floor_violation=bool(stage is not None and lam_true < stage.lambda_floor),
            positions={a.id: a.position for a in real},
            statuses={a.id: a.status.value for a in real},
            jammed_links=jammed,
            certificate_holds=gne.certificate.holds if gne else False,
            detected=tuple(detected),
        ))
        log.debug("step %d: lambda2 true %.6g perceived %.6g", t, lam_true, lam_perceived)
    return trace


def summarize(trace: SimTrace) -> RunSummary:
    if not trace.records:
        raise ValueError("empty trace")
    lam = trace.lambda2()
    outcomes = []
    for ev in trace.attacks:
        before = [r for r in trace.records if r.step < ev.start_step]
        converged = [r for r in before if r.gne_converged]
        ref = (converged or before or [None])[-1]
        pre = ref.lambda2_true if ref is not None else None
        recovery = None
        if pre is not None:
            for r in trace.records:
                if r.step >= ev.end_step and r.lambda2_true >= RECOVERY_FRACTION * pre:
                    recovery = r.step - ev.end_step
                    break
        outcomes.append(AttackOutcome(ev.kind, ev.start_step, ev.end_step, pre, recovery))
    return RunSummary(
        name=trace.name,
        steps=len(lam),
        min_lambda2=min(lam),
        mean_lambda2=sum(lam) / len(lam),
        final_lambda2=lam[-1],
        steps_disconnected=sum(v == 0.0 for v in lam),
        attacks=tuple(outcomes),
    )


def run_and_summarize(cfg: ScenarioConfig):
    trace = run(cfg)
    return trace, summarize(trace)


def _guarded(cfg: ScenarioConfig):
    try:
        return run_and_summarize(cfg)
    except Exception as e:  # reported per scenario; the batch keeps going
        log.error("scenario %s failed: %s", cfg.name, e)
        return None, ScenarioFailure(cfg.name, f"{type(e).__name__}: {e}")


def batch(configs: Sequence[ScenarioConfig], jobs: int = 1, with_traces: bool = False) -> list:
    """Run scenarios independently; results follow input order."""
    configs = list(configs)
    if jobs > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_guarded, configs))
    else:
        results = [_guarded(c) for c in configs]
    return results if with_traces else [summary for _, summary in results]

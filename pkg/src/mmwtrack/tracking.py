"""The two beam-tracking procedures.

Scheme A: a periodic refresh sweeps every eNB direction against every UE
direction across all cells and re-selects serving cell and beam pair by
maximum SINR (handover allowed).

Scheme B: between refreshes, periodic refinements sweep only the serving
cell's directions against the k_ref + 1 UE directions adjacent to the
current optimum (beam switch only, never a handover).  The refinement
cadence re-anchors at every refresh, so t_ref >= T_PR degenerates
exactly to Scheme A.

Sweeps take simulated time: one pilot period per dwell, divided by the
parallelism L when the UE can receive several directions at once.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .linkmetrics import MeasurementTable, threshold_filter
from .scenario import ScenarioConfig


class EventKind(enum.Enum):
    REFRESH = "refresh"
    REFINEMENT = "refinement"


class SchedulerAction(enum.Enum):
    IDLE = "idle"
    START_REFRESH = "start_refresh"
    START_REFINEMENT = "start_refinement"


@dataclass(frozen=True)
class SweepStep:
    """One dwell: an eNB direction paired with the UE directions heard
    simultaneously, at a time offset from the sweep start."""

    offset: float
    enb_dir: int
    ue_dirs: tuple[int, ...]


@dataclass(frozen=True)
class SweepPlan:
    kind: EventKind
    steps: tuple[SweepStep, ...]
    duration: float
    parallelism: int
    serving_only: int | None = None   # eNB index for refinements, None = all cells

    @property
    def n_dwells(self) -> int:
        return sum(len(s.ue_dirs) for s in self.steps)


def plan_refresh(cfg: ScenarioConfig) -> SweepPlan:
    """Full sweep over every (eNB direction, UE direction) pair.

    The UE holds each receive direction while the cells run through their
    directions; a digital front end hears all its directions at once, so
    the sweep shortens by L = n_ue_dir.
    """
    l_par = cfg.refresh_parallelism
    duration = cfg.t_per * cfg.n_enb_dir * cfg.n_ue_dir / l_par
    steps = []
    if l_par == 1:
        serial = 0
        for j in range(cfg.n_ue_dir):
            for i in range(cfg.n_enb_dir):
                steps.append(SweepStep(offset=serial * cfg.t_per, enb_dir=i, ue_dirs=(j,)))
                serial += 1
    else:
        all_ue = tuple(range(cfg.n_ue_dir))
        for i in range(cfg.n_enb_dir):
            steps.append(SweepStep(offset=i * cfg.t_per, enb_dir=i, ue_dirs=all_ue))
    return SweepPlan(
        kind=EventKind.REFRESH,
        steps=tuple(steps),
        duration=duration,
        parallelism=l_par,
    )


def refinement_window(d_opt: int, k_ref: int, n_ue_dir: int) -> tuple[int, ...]:
    """UE directions d_opt - k/2 .. d_opt + k/2 modulo the codebook size.

    A window wider than the codebook revisits directions; the dwell count
    stays k_ref + 1 so sweep time and energy remain linear in it.
    """
    half = k_ref // 2
    return tuple((d_opt + off) % n_ue_dir for off in range(-half, half + 1))


def plan_refinement(cfg: ScenarioConfig, serving: int, d_opt: int) -> SweepPlan:
    """Local sweep: all serving-cell directions x the adjacent UE window."""
    window = refinement_window(d_opt, cfg.k_ref, cfg.n_ue_dir)
    l_par = cfg.refinement_parallelism
    duration = cfg.t_per * cfg.n_enb_dir * len(window) / l_par
    steps = []
    if l_par == 1:
        serial = 0
        for j in window:
            for i in range(cfg.n_enb_dir):
                steps.append(SweepStep(offset=serial * cfg.t_per, enb_dir=i, ue_dirs=(j,)))
                serial += 1
    else:
        # groups of up to L simultaneous directions per eNB dwell; the
        # offset grid keeps the idealized duration of (k_ref+1)/L pilot
        # periods per eNB direction even when L does not divide the window
        per_dir = len(window) / l_par
        for i in range(cfg.n_enb_dir):
            for g in range(math.ceil(len(window) / l_par)):
                group = window[g * l_par:(g + 1) * l_par]
                offset = (i * per_dir + g) * cfg.t_per
                steps.append(SweepStep(offset=offset, enb_dir=i, ue_dirs=tuple(group)))
    return SweepPlan(
        kind=EventKind.REFINEMENT,
        steps=tuple(steps),
        duration=duration,
        parallelism=l_par,
        serving_only=serving,
    )


def select_refresh(table: MeasurementTable) -> tuple[int, int, int] | None:
    """Global argmax over the filtered table; None signals tracking loss."""
    return table.argmax()


@dataclass(frozen=True)
class RefinementOutcome:
    enb_dir: int
    ue_dir: int
    changed: bool
    degraded: bool    # nothing eligible; previous pair retained


def select_refinement(
    table: MeasurementTable,
    serving: int,
    current_enb_dir: int,
    current_ue_dir: int,
) -> RefinementOutcome:
    """Argmax over the serving cell's measured grid; never a handover."""
    sub = MeasurementTable(values=table.values[serving:serving + 1])
    best = sub.argmax()
    if best is None:
        return RefinementOutcome(
            enb_dir=current_enb_dir, ue_dir=current_ue_dir, changed=False, degraded=True
        )
    _, i, j = best
    changed = (i, j) != (current_enb_dir, current_ue_dir)
    return RefinementOutcome(enb_dir=i, ue_dir=j, changed=changed, degraded=False)


# --------------------------------------------------------------------------
# event timing
# --------------------------------------------------------------------------

@dataclass
class EventRecord:
    time: float
    kind: EventKind
    old: tuple | None      # (m, enb_dir, ue_dir) before, None if unattached
    new: tuple | None
    outcome: str           # attach | handover | beam_switch | no_change |
                           # tracking_loss | degraded


@dataclass
class TrackingState:
    """Serving selection plus the refresh/refinement timers of one trial."""

    scheme: str
    t_pr: float
    t_ref: float
    serving: int | None = None
    enb_dir: int = 0
    ue_dir: int = 0
    refresh_index: int = 0          # next refresh fires at refresh_index * t_pr
    refinement_anchor: float = 0.0  # scheduled time of the last refresh
    refinement_index: int = 1       # next refinement at anchor + index * t_ref
    last_event: EventKind | None = None
    event_log: list = field(default_factory=list)
    handover_count: int = 0
    beam_switch_count: int = 0

    @property
    def next_refresh_at(self) -> float:
        return self.refresh_index * self.t_pr

    @property
    def next_refinement_at(self) -> float:
        if self.scheme != "B":
            return math.inf
        return self.refinement_anchor + self.refinement_index * self.t_ref


_EPS = 1e-12


def step_scheduler(state: TrackingState, now: float, cfg: ScenarioConfig) -> SchedulerAction:
    """Decide whether a sweep starts at this instant and advance timers.

    Refreshes win simultaneous deadlines and re-anchor the refinement
    cadence, so a refinement landing on a refresh is subsumed by it.
    Refinement deadlines that went stale while a sweep was running (they
    fell inside its window) are dropped without firing; a missed refresh
    instead fires late, keeping the refresh count at its cadence.
    """
    if now >= state.next_refresh_at - _EPS:
        anchor = state.next_refresh_at
        while now >= state.next_refresh_at - _EPS:
            anchor = state.next_refresh_at
            state.refresh_index += 1
        state.refinement_anchor = anchor
        state.refinement_index = 1
        return SchedulerAction.START_REFRESH
    if state.scheme == "B":
        while state.next_refinement_at < now - cfg.slot + _EPS:
            state.refinement_index += 1
        if now >= state.next_refinement_at - _EPS:
            state.refinement_index += 1
            return SchedulerAction.START_REFINEMENT
    return SchedulerAction.IDLE


def apply_refresh_selection(
    state: TrackingState,
    table: MeasurementTable,
    time: float,
) -> EventRecord:
    """Apply the refresh argmax; logs attach/handover/beam switch/loss."""
    old = None if state.serving is None else (state.serving, state.enb_dir, state.ue_dir)
    best = select_refresh(table)
    if best is None:
        state.serving = None
        record = EventRecord(time=time, kind=EventKind.REFRESH, old=old, new=None,
                             outcome="tracking_loss")
    else:
        m, i, j = best
        if old is None:
            outcome = "attach"
        elif m != old[0]:
            outcome = "handover"
            state.handover_count += 1
        elif (i, j) != (old[1], old[2]):
            outcome = "beam_switch"
            state.beam_switch_count += 1
        else:
            outcome = "no_change"
        state.serving, state.enb_dir, state.ue_dir = m, i, j
        record = EventRecord(time=time, kind=EventKind.REFRESH, old=old,
                             new=(m, i, j), outcome=outcome)
    state.last_event = EventKind.REFRESH
    state.event_log.append(record)
    return record


def apply_refinement_selection(
    state: TrackingState,
    table: MeasurementTable,
    time: float,
) -> EventRecord:
    """Apply a refinement outcome; serving cell never changes here."""
    old = (state.serving, state.enb_dir, state.ue_dir)
    outcome = select_refinement(table, state.serving, state.enb_dir, state.ue_dir)
    if outcome.degraded:
        label = "degraded"
    elif outcome.changed:
        label = "beam_switch"
        state.beam_switch_count += 1
    else:
        label = "no_change"
    state.enb_dir, state.ue_dir = outcome.enb_dir, outcome.ue_dir
    record = EventRecord(
        time=time, kind=EventKind.REFINEMENT, old=old,
        new=(state.serving, state.enb_dir, state.ue_dir), outcome=label,
    )
    state.last_event = EventKind.REFINEMENT
    state.event_log.append(record)
    return record


# --------------------------------------------------------------------------
# sweep execution
# --------------------------------------------------------------------------

class SweepExecution:
    """A sweep in progress: measures dwells slot window by slot window.

    The channel bank must provide ``measure_probes(enb_dirs, ue_dirs, row)``
    returning received watts, shaped (n_probes, n_enb) when ``row`` is
    None or (n_probes,) for a single cell.  All cells transmit the probed
    direction index simultaneously, so one dwell yields one entry per
    cell; with interference-free control signalling the SINR denominator
    is thermal noise only, otherwise the other cells' concurrent pilots
    interfere.
    """

    def __init__(self, plan: SweepPlan, cfg: ScenarioConfig, n_enb: int,
                 start_time: float):
        self.plan = plan
        self.cfg = cfg
        self.start_time = start_time
        self.end_time = start_time + plan.duration
        self.table = MeasurementTable.empty(n_enb, cfg.n_enb_dir, cfg.n_ue_dir)
        self._cursor = 0

    def process_window(self, bank, t0: float, t1: float) -> bool:
        """Measure dwells starting in [t0, t1); True once the sweep ends."""
        steps = self.plan.steps
        window = []
        while self._cursor < len(steps):
            step = steps[self._cursor]
            if self.start_time + step.offset >= t1 - _EPS:
                break
            window.append(step)
            self._cursor += 1
        if window:
            enb_dirs = np.repeat(
                np.fromiter((s.enb_dir for s in window), dtype=int, count=len(window)),
                [len(s.ue_dirs) for s in window],
            )
            ue_dirs = np.concatenate([s.ue_dirs for s in window]).astype(int)
            self._measure(bank, enb_dirs, ue_dirs)
        return self.end_time < t1 - _EPS

    def _measure(self, bank, enb_dirs: np.ndarray, ue_dirs: np.ndarray) -> None:
        cfg = self.cfg
        row = self.plan.serving_only
        noise = cfg.noise_w
        need_all = row is None or cfg.control_interference
        recv = bank.measure_probes(enb_dirs, ue_dirs, None if need_all else row)
        with np.errstate(divide="ignore"):
            if need_all:
                if cfg.control_interference:
                    total = recv.sum(axis=1, keepdims=True)
                    sinr_db = 10.0 * np.log10(recv / (noise + total - recv))
                else:
                    sinr_db = 10.0 * np.log10(recv / noise)
                if row is None:
                    self.table.values[:, enb_dirs, ue_dirs] = sinr_db.T
                else:
                    self.table.values[row, enb_dirs, ue_dirs] = sinr_db[:, row]
            else:
                sinr_db = 10.0 * np.log10(recv / noise)
                self.table.values[row, enb_dirs, ue_dirs] = sinr_db

    def result(self) -> MeasurementTable:
        return threshold_filter(self.table, self.cfg.gamma_db)


def execute_sweep(
    plan: SweepPlan,
    channel_supplier,
    cfg: ScenarioConfig,
    n_enb: int,
) -> MeasurementTable:
    """Run a whole sweep against a slot-indexed channel supplier.

    ``channel_supplier(slot_index)`` returns a bank for that slot (see
    SweepExecution for the probe interface).  The channel advances slot
    by slot while the sweep is in progress; thresholding applies at the
    end.
    """
    execution = SweepExecution(plan, cfg, n_enb, start_time=0.0)
    n_slots = max(1, math.ceil(plan.duration / cfg.slot - 1e-9))
    for k in range(n_slots + 1):
        bank = channel_supplier(k)
        if execution.process_window(bank, k * cfg.slot, (k + 1) * cfg.slot):
            break
    return execution.result()

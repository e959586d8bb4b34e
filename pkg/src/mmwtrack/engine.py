"""Slot loop and Monte Carlo driver.

A trial advances the test UE along its trajectory in fixed slots,
evolving every eNB link's channel per slot (full redraw on the
large-scale clock), firing tracking sweeps from the scheduler, and
accruing the per-slot data rate on the currently selected beam pair.
Sweeps occupy simulated time; their selection applies at completion.

Each trial draws from four independent random streams (deployment,
test-UE channels, background-UE link states, interferer beams) spawned
from the trial seed, so sweeping a tracking parameter leaves the channel
realization untouched and paired scheme comparisons are exact.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import channel as chmod
from .beams import beam_kernel, steering_matrix
from .channel import PathlossParams, draw_states_vec, pathloss_db_vec
from .energy import EnergyLedger, total_energy
from .scenario import Deployment, ScenarioConfig, advance_ue, deploy
from .tracking import (
    EventKind,
    SchedulerAction,
    SweepExecution,
    TrackingState,
    apply_refresh_selection,
    apply_refinement_selection,
    plan_refinement,
    plan_refresh,
    step_scheduler,
)

TWO_PI = 2.0 * np.pi


class ChannelBank:
    """All eNB links of the test UE, stacked for per-slot vector math.

    Between large-scale updates the subpath structure is fixed, so the
    bank keeps flattened subpath arrays across links and evolves them in
    a handful of numpy operations per slot.  Beam responses use the
    closed-form codebook kernel, which equals |w_rx^* H w_tx|^2 against
    the synthesized channel matrix without ever forming it.
    """

    def __init__(self, cfg: ScenarioConfig, enb_positions: np.ndarray):
        self.cfg = cfg
        self.enb_positions = np.asarray(enb_positions, dtype=float)
        self.n_enb = len(self.enb_positions)
        self.params = PathlossParams.from_profile(cfg.channel)
        self.lam = chmod.SPEED_OF_LIGHT / cfg.f_c
        self.rx_geom = cfg.ue_geometry
        self.tx_geom = cfg.enb_geometry
        self.scale = float(self.rx_geom.n_elements * self.tx_geom.n_elements)
        self.az_enb = TWO_PI * np.arange(cfg.n_enb_dir) / cfg.n_enb_dir
        self.az_ue = TWO_PI * np.arange(cfg.n_ue_dir) / cfg.n_ue_dir
        self.states: list[chmod.ChannelState] = []
        # stacked per-link scalars
        self.distance = np.zeros(self.n_enb)
        self.bearing = np.zeros(self.n_enb)
        self.pl_lin = np.full(self.n_enb, np.inf)
        self.state_codes = np.full(self.n_enb, 2, dtype=int)   # 0 LoS, 1 NLoS, 2 outage
        self._alpha = np.zeros(self.n_enb)
        self._beta = np.zeros(self.n_enb)
        self._outage = np.ones(self.n_enb, dtype=bool)
        # stacked per-subpath arrays (filled by regenerate)
        self.sub_aoa = np.zeros(0)
        self.sub_aod = np.zeros(0)
        self.sub_phase = np.zeros(0)
        self.sub_gain = np.zeros(0, dtype=complex)
        self.sub_link = np.zeros(0, dtype=np.intp)
        self.seg = np.zeros(1, dtype=np.intp)
        self._gtilde = None

    # -- lifecycle -----------------------------------------------------------

    def regenerate(self, ue_position: np.ndarray, rng: np.random.Generator) -> None:
        """Large-scale update: redraw every link and rebuild the stacks."""
        ue = np.asarray(ue_position, dtype=float)
        self.states = [
            chmod.regenerate_large_scale(self.enb_positions[m], ue, self.cfg.channel, rng)
            for m in range(self.n_enb)
        ]
        aoa_parts, aod_parts, gain_parts, link_parts = [], [], [], []
        for m, st in enumerate(self.states):
            delta = self.enb_positions[m] - ue
            self.distance[m] = st.distance
            self.bearing[m] = math.atan2(delta[1], delta[0])
            if st.state is chmod.LinkState.OUTAGE:
                self._outage[m] = True
                self.state_codes[m] = 2
                self.pl_lin[m] = np.inf
                self._alpha[m] = 0.0
                self._beta[m] = 0.0
                # zero-gain placeholder keeps every segment non-empty
                aoa_parts.append(np.zeros(1))
                aod_parts.append(np.zeros(1))
                gain_parts.append(np.zeros(1, dtype=complex))
                link_parts.append(np.full(1, m, dtype=np.intp))
                continue
            self._outage[m] = False
            if st.state is chmod.LinkState.LOS:
                self.state_codes[m] = 0
                self._alpha[m] = self.params.alpha_los
                self._beta[m] = self.params.beta_los
            else:
                self.state_codes[m] = 1
                self._alpha[m] = self.params.alpha_nlos
                self._beta[m] = self.params.beta_nlos
            self.pl_lin[m] = 10.0 ** (st.pathloss_db / 10.0)
            cl = st.clusters
            aoa_parts.append(cl.sub_aoa())
            aod_parts.append(cl.sub_aod())
            gain_parts.append(cl.sub_gain.copy())
            link_parts.append(np.full(cl.n_subpaths, m, dtype=np.intp))
        self.sub_aoa = np.concatenate(aoa_parts)
        self.sub_aod = np.concatenate(aod_parts)
        self.sub_gain = np.concatenate(gain_parts)
        self.sub_link = np.concatenate(link_parts)
        self.sub_phase = np.zeros(len(self.sub_gain))
        counts = np.bincount(self.sub_link, minlength=self.n_enb)
        self.seg = np.concatenate([[0], np.cumsum(counts)]).astype(np.intp)
        self._gtilde = None

    def small_scale(self, ue_position: np.ndarray, velocity: np.ndarray, dt: float) -> None:
        """Per-slot update: Doppler advance, angle rotation, pathloss."""
        ue = np.asarray(ue_position, dtype=float)
        vel = np.asarray(velocity, dtype=float)
        # Doppler uses the angles at the start of the interval
        self.sub_phase += (TWO_PI / self.lam) * dt * (
            vel[0] * np.cos(self.sub_aoa) + vel[1] * np.sin(self.sub_aoa)
        )
        delta = self.enb_positions - ue[None, :]
        new_bearing = np.arctan2(delta[:, 1], delta[:, 0])
        rot = new_bearing - self.bearing
        self.bearing = new_bearing
        self.sub_aoa += rot[self.sub_link]
        self.sub_aod += rot[self.sub_link]
        self.distance = np.maximum(np.hypot(delta[:, 0], delta[:, 1]), 1.0)
        pl_db = self._alpha + self._beta * 10.0 * np.log10(self.distance)
        self.pl_lin = np.where(self._outage, np.inf, 10.0 ** (pl_db / 10.0))
        self._gtilde = None

    # -- beam responses --------------------------------------------------------

    def _gains_tilde(self) -> np.ndarray:
        if self._gtilde is None:
            self._gtilde = self.sub_gain * np.exp(1j * self.sub_phase)
        return self._gtilde

    def data_received(self, tx_dirs: np.ndarray, ue_dir: int) -> np.ndarray:
        """Received watts per cell with each cell on its own transmit beam
        and the UE listening on one codebook direction."""
        g = self._gains_tilde()
        k_rx = beam_kernel(self.rx_geom, self.sub_aoa - self.az_ue[ue_dir])
        k_tx = beam_kernel(self.tx_geom, self.sub_aod - self.az_enb[tx_dirs][self.sub_link])
        amp = np.add.reduceat(g * k_rx * np.conj(k_tx), self.seg[:-1])
        gain = self.scale * np.abs(amp) ** 2
        return self.cfg.p_tx_w / self.pl_lin * gain

    def measure_probes(self, enb_dirs: np.ndarray, ue_dirs: np.ndarray,
                       row: int | None = None) -> np.ndarray:
        """Received watts for a batch of pilot dwells.

        Every cell transmits the probed direction index simultaneously.
        Returns (n_probes, n_enb), or (n_probes,) when ``row`` restricts
        the measurement to a single cell.
        """
        if row is None:
            g = self._gains_tilde()
            k_tx = beam_kernel(
                self.tx_geom, self.sub_aod[None, :] - self.az_enb[enb_dirs][:, None]
            )
            k_rx = beam_kernel(
                self.rx_geom, self.sub_aoa[None, :] - self.az_ue[ue_dirs][:, None]
            )
            amp = np.add.reduceat(k_rx * np.conj(k_tx) * g[None, :], self.seg[:-1], axis=1)
            gain = self.scale * np.abs(amp) ** 2                     # (P, n_enb)
            return self.cfg.p_tx_w / self.pl_lin[None, :] * gain
        lo, hi = self.seg[row], self.seg[row + 1]
        g = self._gains_tilde()[lo:hi]
        k_tx = beam_kernel(
            self.tx_geom, self.sub_aod[None, lo:hi] - self.az_enb[enb_dirs][:, None]
        )
        k_rx = beam_kernel(
            self.rx_geom, self.sub_aoa[None, lo:hi] - self.az_ue[ue_dirs][:, None]
        )
        amp = (k_rx * np.conj(k_tx) * g[None, :]).sum(axis=1)
        gain = self.scale * np.abs(amp) ** 2
        return self.cfg.p_tx_w / self.pl_lin[row] * gain

    def frobenius_sq(self) -> np.ndarray:
        """||H||_F^2 per link at the current slot (debug-trace path)."""
        g = self._gains_tilde()
        out = np.zeros(self.n_enb)
        for m in range(self.n_enb):
            if self._outage[m]:
                continue
            lo, hi = self.seg[m], self.seg[m + 1]
            a_rx = steering_matrix(self.rx_geom, self.sub_aoa[lo:hi])
            a_tx = steering_matrix(self.tx_geom, self.sub_aod[lo:hi])
            h = (a_rx * g[lo:hi]) @ a_tx.conj().T
            out[m] = self.scale * float(np.sum(np.abs(h) ** 2))
        return out


class BgPopulation:
    """Background UEs: static positions, per-epoch link states, attachment."""

    def __init__(self, cfg: ScenarioConfig, dep: Deployment):
        self.cfg = cfg
        self.params = PathlossParams.from_profile(cfg.channel)
        bg = np.delete(dep.ue_positions, dep.test_ue_index, axis=0)
        diff = bg[:, None, :] - dep.enb_positions[None, :, :]
        self.distances = np.maximum(np.hypot(diff[..., 0], diff[..., 1]), 1.0)
        self.n_bg, self.n_enb = self.distances.shape
        self.pl_db = np.full((self.n_bg, self.n_enb), np.inf)

    def redraw(self, rng: np.random.Generator) -> None:
        codes = draw_states_vec(self.distances, self.params, rng)
        self.pl_db = pathloss_db_vec(self.distances, codes, self.params)

    def attached_counts(self) -> np.ndarray:
        """UEs per cell when each attaches to its least-pathloss link."""
        counts = np.zeros(self.n_enb, dtype=int)
        if self.n_bg == 0:
            return counts
        best = np.argmin(self.pl_db, axis=1)
        reachable = np.isfinite(self.pl_db.min(axis=1))
        np.add.at(counts, best[reachable], 1)
        return counts


@dataclass
class TrialResult:
    """Outcome of one simulated trial."""

    seed: int
    avg_rate: float
    energy: EnergyLedger
    handover_count: int
    beam_switch_count: int
    tracking_loss_slots: int
    executed_refreshes: int
    executed_refinements: int
    n_enb: int
    n_background: int
    deployment_digest: str
    zero_redraws: int
    rate_trace: np.ndarray | None = None
    serving_trace: np.ndarray | None = None
    enb_dir_trace: np.ndarray | None = None
    ue_dir_trace: np.ndarray | None = None
    event_trace: np.ndarray | None = None
    event_log: list = field(default_factory=list)
    channel_trace: np.ndarray | None = None   # (slots, links, 3): state, PL dB, ||H||_F^2


def run_trial(
    cfg: ScenarioConfig,
    seed: int,
    keep_trace: bool = False,
    keep_channel_trace: bool = False,
) -> TrialResult:
    """Simulate one trial; a deterministic function of (cfg, seed)."""
    root = np.random.SeedSequence(seed)
    deploy_ss, channel_ss, bg_ss, interf_ss = root.spawn(4)
    rng_deploy = np.random.default_rng(deploy_ss)
    rng_channel = np.random.default_rng(channel_ss)
    rng_bg = np.random.default_rng(bg_ss)
    rng_interf = np.random.default_rng(interf_ss)

    dep = deploy(cfg, rng_deploy)
    bank = ChannelBank(cfg, dep.enb_positions)
    bgpop = BgPopulation(cfg, dep)
    tracking = TrackingState(scheme=cfg.scheme, t_pr=cfg.t_pr, t_ref=cfg.t_ref)

    n_slots = cfg.n_slots
    slot = cfg.slot
    velocity = dep.test_ue_heading * cfg.v
    noise = cfg.noise_w
    n_enb = bank.n_enb

    rate_trace = np.zeros(n_slots)
    if keep_trace:
        serving_trace = np.full(n_slots, -1, dtype=int)
        enb_dir_trace = np.zeros(n_slots, dtype=int)
        ue_dir_trace = np.zeros(n_slots, dtype=int)
        event_trace = np.zeros(n_slots, dtype=int)
    channel_trace = np.zeros((n_slots, n_enb, 3)) if keep_channel_trace else None
    tracking_loss_slots = 0
    executed_refreshes = 0
    executed_refinements = 0
    n_users = 1
    epoch = 0
    active: SweepExecution | None = None
    refresh_plan = plan_refresh(cfg)
    refinement_plans: dict[tuple[int, int], object] = {}

    for n in range(n_slots):
        t = n * slot
        if n > 0:
            advance_ue(dep, cfg.v, slot)
        ue_pos = dep.test_ue_position

        if t >= epoch * cfg.t_h - 1e-12:
            while t >= epoch * cfg.t_h - 1e-12:
                epoch += 1
            bank.regenerate(ue_pos, rng_channel)
            bgpop.redraw(rng_bg)
        elif n > 0:
            bank.small_scale(ue_pos, velocity, slot)

        tx_draws = rng_interf.integers(0, cfg.n_enb_dir, size=n_enb)

        if channel_trace is not None:
            channel_trace[n, :, 0] = bank.state_codes
            with np.errstate(divide="ignore"):
                channel_trace[n, :, 1] = 10.0 * np.log10(bank.pl_lin)
            channel_trace[n, :, 2] = bank.frobenius_sq()

        serving = tracking.serving
        if serving is None:
            tracking_loss_slots += 1
        else:
            tx_dirs = tx_draws.copy()
            tx_dirs[serving] = tracking.enb_dir
            recv = bank.data_received(tx_dirs, tracking.ue_dir)
            signal = recv[serving]
            interference = recv.sum() - signal
            if signal > 0.0:
                sinr_lin = signal / (interference + noise)
                rate_trace[n] = cfg.w_tot / n_users * math.log2(1.0 + sinr_lin)
            if keep_trace:
                serving_trace[n] = serving
                enb_dir_trace[n] = tracking.enb_dir
                ue_dir_trace[n] = tracking.ue_dir

        if active is None:
            action = step_scheduler(tracking, t, cfg)
            if action is SchedulerAction.START_REFRESH:
                active = SweepExecution(refresh_plan, cfg, n_enb, start_time=t)
            elif (
                action is SchedulerAction.START_REFINEMENT
                and tracking.serving is not None
            ):
                key = (tracking.serving, tracking.ue_dir)
                plan = refinement_plans.get(key)
                if plan is None:
                    plan = plan_refinement(cfg, tracking.serving, tracking.ue_dir)
                    refinement_plans[key] = plan
                active = SweepExecution(plan, cfg, n_enb, start_time=t)
        if active is not None:
            if active.process_window(bank, t, t + slot):
                table = active.result()
                if active.plan.kind is EventKind.REFRESH:
                    apply_refresh_selection(tracking, table, active.end_time)
                    executed_refreshes += 1
                    if tracking.serving is not None:
                        n_users = 1 + int(bgpop.attached_counts()[tracking.serving])
                elif tracking.serving is not None:
                    apply_refinement_selection(tracking, table, active.end_time)
                    executed_refinements += 1
                if keep_trace:
                    event_trace[n] = 1 if active.plan.kind is EventKind.REFRESH else 2
                active = None

    ledger = total_energy(cfg.scheme, cfg, t_sim=cfg.t_sim)
    return TrialResult(
        seed=seed,
        avg_rate=float(rate_trace.mean()),
        energy=ledger,
        handover_count=tracking.handover_count,
        beam_switch_count=tracking.beam_switch_count,
        tracking_loss_slots=tracking_loss_slots,
        executed_refreshes=executed_refreshes,
        executed_refinements=executed_refinements,
        n_enb=dep.n_enb,
        n_background=dep.n_background,
        deployment_digest=dep.digest(),
        zero_redraws=dep.zero_redraws,
        rate_trace=rate_trace if keep_trace else None,
        serving_trace=serving_trace if keep_trace else None,
        enb_dir_trace=enb_dir_trace if keep_trace else None,
        ue_dir_trace=ue_dir_trace if keep_trace else None,
        event_trace=event_trace if keep_trace else None,
        event_log=tracking.event_log if keep_trace else [],
        channel_trace=channel_trace,
    )


# --------------------------------------------------------------------------
# Monte Carlo batches
# --------------------------------------------------------------------------

_SWEEPABLE = {"t_ref", "t_pr", "t_h", "k_ref", "bf_arch", "scheme"}


@dataclass(frozen=True)
class SweepSpec:
    """One swept parameter with the values to visit."""

    name: str
    values: tuple

    def __post_init__(self):
        if self.name not in _SWEEPABLE:
            raise ValueError(
                f"cannot sweep {self.name!r}; choose one of {sorted(_SWEEPABLE)}"
            )
        if not self.values:
            raise ValueError("sweep needs at least one value")

    def points(self, base: ScenarioConfig) -> list[ScenarioConfig]:
        return [base.replace(**{self.name: v}).validate() for v in self.values]


@dataclass
class PointSummary:
    label: str
    cfg: ScenarioConfig
    results: list[TrialResult]

    @property
    def rates(self) -> np.ndarray:
        return np.array([r.avg_rate for r in self.results])

    @property
    def mean_rate(self) -> float:
        return float(self.rates.mean())

    @property
    def stderr_rate(self) -> float:
        r = self.rates
        if len(r) < 2:
            return 0.0
        return float(r.std(ddof=1) / math.sqrt(len(r)))

    @property
    def mean_energy(self) -> float:
        return float(np.mean([r.energy.total for r in self.results]))


def trial_seeds(master_seed: int, trials: int) -> list[int]:
    """Per-trial seeds; independent of the sweep point for paired runs."""
    state = np.random.SeedSequence(master_seed).generate_state(trials, dtype=np.uint64)
    return [int(s) for s in state]


def _run_one(args) -> tuple:
    point_idx, trial_idx, cfg, seed = args
    return point_idx, trial_idx, run_trial(cfg, seed)


def worker_count() -> int:
    env = os.environ.get("MMWTRACK_WORKERS")
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


def run_points(
    points: list[tuple[str, ScenarioConfig]],
    trials: int,
    master_seed: int,
    workers: int | None = None,
) -> list[PointSummary]:
    """Run a grid of labelled configs with matched per-trial seeds."""
    seeds = trial_seeds(master_seed, trials)
    tasks = [
        (pi, ti, cfg, seeds[ti])
        for pi, (_, cfg) in enumerate(points)
        for ti in range(trials)
    ]
    n_workers = worker_count() if workers is None else max(1, workers)
    results: dict[tuple[int, int], TrialResult] = {}
    if n_workers == 1 or len(tasks) == 1:
        for task in tasks:
            pi, ti, res = _run_one(task)
            results[(pi, ti)] = res
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            for pi, ti, res in pool.map(_run_one, tasks, chunksize=4):
                results[(pi, ti)] = res
    return [
        PointSummary(
            label=label,
            cfg=cfg,
            results=[results[(pi, ti)] for ti in range(trials)],
        )
        for pi, (label, cfg) in enumerate(points)
    ]


def run_batch(
    cfg: ScenarioConfig,
    sweep: SweepSpec,
    trials: int,
    master_seed: int,
    workers: int | None = None,
) -> list[PointSummary]:
    """Sweep one parameter; trial i shares its seed at every sweep value."""
    points = [
        (f"{sweep.name}={value}", point)
        for value, point in zip(sweep.values, sweep.points(cfg))
    ]
    return run_points(points, trials, master_seed, workers)

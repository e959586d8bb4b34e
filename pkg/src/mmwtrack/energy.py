"""UE-side power consumption of the beamforming front end and the
energy spent on tracking sweeps.

Power follows the component model of analog and digital receiver
architectures; a tracking event costs the front-end power times the
actual sweep duration (the minimum refresh or refinement time divided by
the architecture's parallelism L).  Totals over a window count scheduled
events: floor(T_sim / T_PR) refreshes, each refresh interval containing
floor(T_PR / t_ref) refinements in Scheme B.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .scenario import ScenarioConfig


@dataclass(frozen=True)
class PowerProfile:
    """Component powers bound to an array size and bandwidth."""

    p_lna: float
    p_ps: float
    p_c: float
    p_m: float
    p_lo: float
    p_lpf: float
    p_bb_amp: float
    c: float
    b: int
    n_ant: int
    w_tot: float

    @classmethod
    def from_config(cls, cfg: ScenarioConfig) -> "PowerProfile":
        comp = cfg.power
        rows, cols = cfg.n_ant_ue
        return cls(
            p_lna=comp.p_lna,
            p_ps=comp.p_ps,
            p_c=comp.p_c,
            p_m=comp.p_m,
            p_lo=comp.p_lo,
            p_lpf=comp.p_lpf,
            p_bb_amp=comp.p_bb_amp,
            c=comp.c,
            b=comp.b,
            n_ant=rows * cols,
            w_tot=cfg.w_tot,
        )


def p_rf(profile: PowerProfile) -> float:
    """RF chain power: mixer + LO + low-pass filter + baseband amplifier."""
    return profile.p_m + profile.p_lo + profile.p_lpf + profile.p_bb_amp


def p_adc(profile: PowerProfile) -> float:
    """ADC power c * W_tot * 2^b; linear in bandwidth."""
    return profile.c * profile.w_tot * 2.0 ** profile.b


def power_abf(profile: PowerProfile) -> float:
    """Analog front end: per-element LNA + phase shifter, one RF chain."""
    return (
        profile.n_ant * (profile.p_lna + profile.p_ps)
        + p_rf(profile)
        + profile.p_c
        + 2.0 * p_adc(profile)
    )


def power_dbf(profile: PowerProfile) -> float:
    """Digital front end: a full RF chain and ADC pair per element."""
    return profile.n_ant * (profile.p_lna + p_rf(profile) + 2.0 * p_adc(profile))


def front_end_power(arch: str, profile: PowerProfile) -> float:
    if arch == "ABF":
        return power_abf(profile)
    if arch == "DBF":
        return power_dbf(profile)
    raise ValueError(f"unknown beamforming architecture {arch!r}")


def robust_floor_div(x: float, y: float) -> int:
    """floor(x / y) with a relative guard against binary-float dust."""
    q = x / y
    return int(math.floor(q * (1.0 + 1e-9) + 1e-12))


def energy_event(kind: str, cfg: ScenarioConfig, profile: PowerProfile | None = None) -> float:
    """Energy of one sweep: front-end power times the sweep's duration.

    The duration is the event's minimum scan time already divided by the
    parallelism L (1 for ABF; the number of simultaneously received
    directions for DBF).
    """
    if profile is None:
        profile = PowerProfile.from_config(cfg)
    p = front_end_power(cfg.bf_arch, profile)
    if kind == "refresh":
        return p * cfg.min_t_pr
    if kind == "refinement":
        return p * cfg.min_t_ref
    raise ValueError(f"unknown event kind {kind!r}")


@dataclass
class EnergyLedger:
    """Tracking-energy account of one trial window."""

    arch: str
    refresh_count: int
    refinement_count: int
    refresh_energy: float
    refinement_energy: float

    @property
    def total(self) -> float:
        return self.refresh_energy + self.refinement_energy


def total_energy(
    scheme: str,
    cfg: ScenarioConfig,
    profile: PowerProfile | None = None,
    t_sim: float | None = None,
) -> EnergyLedger:
    """Closed-form tracking energy over a window of t_sim seconds."""
    if profile is None:
        profile = PowerProfile.from_config(cfg)
    if t_sim is None:
        t_sim = cfg.t_sim
    n_refresh = robust_floor_div(t_sim, cfg.t_pr)
    e_refresh = energy_event("refresh", cfg, profile)
    if scheme == "A":
        n_refinement = 0
    elif scheme == "B":
        n_per_interval = robust_floor_div(cfg.t_pr, cfg.t_ref)
        n_refinement = n_per_interval * n_refresh
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    e_refinement = energy_event("refinement", cfg, profile)
    return EnergyLedger(
        arch=cfg.bf_arch,
        refresh_count=n_refresh,
        refinement_count=n_refinement,
        refresh_energy=n_refresh * e_refresh,
        refinement_energy=n_refinement * e_refinement,
    )

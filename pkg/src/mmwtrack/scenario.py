"""Scenario configuration, cell deployment and test-UE mobility.

The config file is a flat ``key = value`` text format, one entry per
line, ``#`` comments allowed.  Unknown keys are rejected so typos fail
loudly.  Keys and defaults:

    w_tot                = 1e9          total bandwidth [Hz]
    f_c                  = 28e9         carrier frequency [Hz]
    p_tx_dbm             = 30.0         transmit power [dBm]
    gamma_db             = -5.0         pilot detection SINR threshold [dB]
    n_ant_enb            = 8x8          eNB array (rows x cols)
    n_ant_ue             = 4x4          UE array (rows x cols)
    n_enb_dir            = 16           eNB codebook size
    n_ue_dir             = 8            UE codebook size
    t_sim                = 10.0         trial duration [s]
    slot                 = 1e-3         slot duration [s]
    v                    = 20.0         UE speed [m/s]
    k_ref                = 2            refinement factor (even)
    t_h                  = 0.1          large-scale channel update period [s]
    t_pr                 = 0.6          refresh period [s]
    t_ref                = 0.01         refinement period [s] (Scheme B)
    enb_density          = 70.0         eNBs per km^2
    ue_per_enb           = 10.0         mean background UEs per eNB
    t_sig                = 10e-6        pilot duration [s]
    t_per                = 200e-6       pilot period per direction [s]
    phi_ov               = 0.05         control overhead t_sig/t_per
    area                 = 1000x100     corridor dimensions [m]
    bf_arch              = ABF          ABF | DBF
    scheme               = A            A | B
    control_interference = false        interference on pilot measurements
    seed                 = 1            default trial seed
    trials               = 50           default trials per sweep point

    channel.alpha_los    = 61.4         pathloss intercept, LoS [dB]
    channel.beta_los     = 2.0          pathloss slope, LoS
    channel.alpha_nlos   = 72.0         pathloss intercept, NLoS [dB]
    channel.beta_nlos    = 2.92         pathloss slope, NLoS
    channel.a_out        = 0.0333333333 outage state rate [1/m]
    channel.b_out        = 5.2          outage state offset
    channel.a_los        = 0.0149       LoS state rate [1/m]
    channel.cluster_mean = 1.8          Poisson mean of the cluster count
    channel.subpaths     = 10           subpaths per cluster
    channel.rms_spread_deg = 10.0       per-cluster rms angle spread [deg]
    channel.noise_figure_db = 5.0       UE receiver noise figure [dB]

    power.p_lna          = 0.039        low-noise amplifier [W]
    power.p_ps           = 0.0195       phase shifter [W]
    power.p_c            = 0.0195       combiner [W]
    power.p_m            = 0.0168       mixer [W]
    power.p_lo           = 0.005        local oscillator [W]
    power.p_lpf          = 0.014        low-pass filter [W]
    power.p_bb_amp       = 0.005        baseband amplifier [W]
    power.c              = 494e-15      ADC energy per conversion step [J]
    power.b              = 3            ADC quantization bits
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .beams import ArrayGeometry


class ConfigError(ValueError):
    """Config file failed to parse or violated an invariant."""


@dataclass(frozen=True)
class ChannelProfile:
    """Pathloss and cluster-statistics defaults for the 28 GHz urban profile."""

    alpha_los: float = 61.4
    beta_los: float = 2.0
    alpha_nlos: float = 72.0
    beta_nlos: float = 2.92
    a_out: float = 1.0 / 30.0
    b_out: float = 5.2
    a_los: float = 1.0 / 67.1
    cluster_mean: float = 1.8
    subpaths: int = 10
    rms_spread_deg: float = 10.0
    noise_figure_db: float = 5.0


@dataclass(frozen=True)
class PowerComponents:
    """UE front-end component powers (illustrative defaults)."""

    p_lna: float = 0.039
    p_ps: float = 0.0195
    p_c: float = 0.0195
    p_m: float = 0.0168
    p_lo: float = 0.005
    p_lpf: float = 0.014
    p_bb_amp: float = 0.005
    c: float = 494e-15
    b: int = 3


@dataclass(frozen=True)
class ScenarioConfig:
    """All run parameters; the single source of truth for a trial."""

    w_tot: float = 1e9
    f_c: float = 28e9
    p_tx_dbm: float = 30.0
    gamma_db: float = -5.0
    n_ant_enb: tuple[int, int] = (8, 8)
    n_ant_ue: tuple[int, int] = (4, 4)
    n_enb_dir: int = 16
    n_ue_dir: int = 8
    t_sim: float = 10.0
    slot: float = 1e-3
    v: float = 20.0
    k_ref: int = 2
    t_h: float = 0.1
    t_pr: float = 0.6
    t_ref: float = 0.01
    enb_density: float = 70.0
    ue_per_enb: float = 10.0
    t_sig: float = 10e-6
    t_per: float = 200e-6
    phi_ov: float = 0.05
    area: tuple[float, float] = (1000.0, 100.0)
    bf_arch: str = "ABF"
    scheme: str = "A"
    control_interference: bool = False
    seed: int = 1
    trials: int = 50
    channel: ChannelProfile = field(default_factory=ChannelProfile)
    power: PowerComponents = field(default_factory=PowerComponents)

    # -- derived quantities -------------------------------------------------

    @property
    def enb_geometry(self) -> ArrayGeometry:
        return ArrayGeometry(rows=self.n_ant_enb[0], cols=self.n_ant_enb[1])

    @property
    def ue_geometry(self) -> ArrayGeometry:
        return ArrayGeometry(rows=self.n_ant_ue[0], cols=self.n_ant_ue[1])

    @property
    def p_tx_w(self) -> float:
        return 10.0 ** ((self.p_tx_dbm - 30.0) / 10.0)

    @property
    def noise_w(self) -> float:
        """Thermal noise over the full band at 290 K plus the noise figure."""
        k_boltzmann = 1.380649e-23
        nf = 10.0 ** (self.channel.noise_figure_db / 10.0)
        return k_boltzmann * 290.0 * nf * self.w_tot

    @property
    def refresh_parallelism(self) -> int:
        """Sweep divisor L for refresh events."""
        return self.n_ue_dir if self.bf_arch == "DBF" else 1

    @property
    def refinement_parallelism(self) -> int:
        """Sweep divisor L for refinement events, bounded by k_ref + 1."""
        if self.bf_arch == "DBF":
            return min(self.n_ue_dir, self.k_ref + 1)
        return 1

    @property
    def min_t_pr(self) -> float:
        return self.t_per * self.n_enb_dir * self.n_ue_dir / self.refresh_parallelism

    @property
    def min_t_ref(self) -> float:
        return (
            self.t_per * self.n_enb_dir * (self.k_ref + 1) / self.refinement_parallelism
        )

    @property
    def n_slots(self) -> int:
        return math.ceil(self.t_sim / self.slot - 1e-9)

    # -- validation ----------------------------------------------------------

    def validate(self) -> "ScenarioConfig":
        pos = {
            "w_tot": self.w_tot,
            "f_c": self.f_c,
            "t_sim": self.t_sim,
            "slot": self.slot,
            "t_h": self.t_h,
            "t_pr": self.t_pr,
            "t_ref": self.t_ref,
            "enb_density": self.enb_density,
            "t_sig": self.t_sig,
            "t_per": self.t_per,
            "phi_ov": self.phi_ov,
        }
        for key, val in pos.items():
            if not val > 0:
                raise ConfigError(f"{key} must be strictly positive, got {val}")
        if self.v < 0:
            raise ConfigError(f"v must be nonnegative, got {self.v}")
        if self.ue_per_enb < 0:
            raise ConfigError(f"ue_per_enb must be nonnegative, got {self.ue_per_enb}")
        if self.area[0] <= 0 or self.area[1] <= 0:
            raise ConfigError(f"area dimensions must be positive, got {self.area}")
        if self.bf_arch not in ("ABF", "DBF"):
            raise ConfigError(f"bf_arch must be ABF or DBF, got {self.bf_arch!r}")
        if self.scheme not in ("A", "B"):
            raise ConfigError(f"scheme must be A or B, got {self.scheme!r}")
        if self.n_enb_dir < 1 or self.n_ue_dir < 1:
            raise ConfigError("codebook sizes must be at least 1")
        if self.trials < 1:
            raise ConfigError(f"trials must be at least 1, got {self.trials}")
        if self.k_ref < 0:
            raise ConfigError(f"k_ref must be nonnegative, got {self.k_ref}")
        if self.k_ref % 2 != 0:
            raise ConfigError("k_ref must be even")
        if abs(self.t_sig / self.t_per - self.phi_ov) > 1e-12:
            raise ConfigError(
                f"t_sig/t_per = {self.t_sig / self.t_per!r} does not match the "
                f"configured overhead phi_ov = {self.phi_ov!r}"
            )
        if self.t_pr < self.min_t_pr * (1 - 1e-12):
            raise ConfigError(
                f"t_pr = {self.t_pr} s is below the Minimum refresh period "
                f"{self.min_t_pr} s (t_per * n_enb_dir * n_ue_dir / L)"
            )
        if self.scheme == "B":
            if self.t_ref < self.min_t_ref * (1 - 1e-12):
                raise ConfigError(
                    f"t_ref = {self.t_ref} s is below the Minimum refinement "
                    f"period {self.min_t_ref} s (t_per * n_enb_dir * (k_ref+1) / L)"
                )
            if not self.t_ref < self.t_pr:
                raise ConfigError(
                    f"Scheme B requires t_ref < t_pr, got t_ref = {self.t_ref} "
                    f"and t_pr = {self.t_pr}"
                )
        comps = dataclasses.asdict(self.power)
        for key, val in comps.items():
            if val < 0:
                raise ConfigError(f"power.{key} must be nonnegative, got {val}")
        if self.power.b < 1:
            raise ConfigError(f"power.b must be at least 1, got {self.power.b}")
        if self.channel.beta_los <= 0 or self.channel.beta_nlos <= 0:
            raise ConfigError("pathloss slopes must be positive")
        return self

    # -- serialization --------------------------------------------------------

    def to_text(self) -> str:
        lines = []
        for key, raw in _flatten(self).items():
            lines.append(f"{key} = {_format_value(raw)}")
        return "\n".join(lines) + "\n"

    def replace(self, **kwargs) -> "ScenarioConfig":
        return dataclasses.replace(self, **kwargs)


# --------------------------------------------------------------------------
# flat key-value parsing
# --------------------------------------------------------------------------

def _parse_pair(text: str, key: str, sep: str, cast) -> tuple:
    parts = text.lower().split(sep)
    if len(parts) != 2:
        raise ConfigError(f"{key} must look like '<a>{sep}<b>', got {text!r}")
    try:
        return (cast(parts[0]), cast(parts[1]))
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {text!r}: {exc}") from None


def _parse_bool(text: str, key: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"{key} must be a boolean, got {text!r}")


def _parse_int(text: str, key: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{key} must be an integer, got {text!r}") from None


def _parse_float(text: str, key: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{key} must be a number, got {text!r}") from None


_TOP_FLOAT = {
    "w_tot", "f_c", "p_tx_dbm", "gamma_db", "t_sim", "slot", "v", "t_h",
    "t_pr", "t_ref", "enb_density", "ue_per_enb", "t_sig", "t_per", "phi_ov",
}
_TOP_INT = {"n_enb_dir", "n_ue_dir", "k_ref", "seed", "trials"}
_CHANNEL_FLOAT = {
    "alpha_los", "beta_los", "alpha_nlos", "beta_nlos", "a_out", "b_out",
    "a_los", "cluster_mean", "rms_spread_deg", "noise_figure_db",
}
_POWER_FLOAT = {"p_lna", "p_ps", "p_c", "p_m", "p_lo", "p_lpf", "p_bb_amp", "c"}


def parse_config_text(text: str) -> ScenarioConfig:
    """Parse the flat key-value format into a validated ScenarioConfig."""
    top: dict = {}
    channel: dict = {}
    power: dict = {}
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not value:
            raise ConfigError(f"line {lineno}: empty value for key {key!r}")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)

        if key in _TOP_FLOAT:
            top[key] = _parse_float(value, key)
        elif key in _TOP_INT:
            top[key] = _parse_int(value, key)
        elif key == "n_ant_enb":
            top[key] = _parse_pair(value, key, "x", int)
        elif key == "n_ant_ue":
            top[key] = _parse_pair(value, key, "x", int)
        elif key == "area":
            top[key] = _parse_pair(value, key, "x", float)
        elif key == "bf_arch":
            top[key] = value.upper()
        elif key == "scheme":
            top[key] = value.upper()
        elif key == "control_interference":
            top[key] = _parse_bool(value, key)
        elif key.startswith("channel."):
            sub = key[len("channel."):]
            if sub == "subpaths":
                channel[sub] = _parse_int(value, key)
            elif sub in _CHANNEL_FLOAT:
                channel[sub] = _parse_float(value, key)
            else:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
        elif key.startswith("power."):
            sub = key[len("power."):]
            if sub == "b":
                power[sub] = _parse_int(value, key)
            elif sub in _POWER_FLOAT:
                power[sub] = _parse_float(value, key)
            else:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")

    if channel:
        top["channel"] = ChannelProfile(**{**dataclasses.asdict(ChannelProfile()), **channel})
    if power:
        top["power"] = PowerComponents(**{**dataclasses.asdict(PowerComponents()), **power})
    return ScenarioConfig(**top).validate()


def load_config(path) -> ScenarioConfig:
    """Read and validate a config file; defaults fill every omitted key."""
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def _flatten(cfg: ScenarioConfig) -> dict:
    out: dict = {}
    for f in dataclasses.fields(cfg):
        val = getattr(cfg, f.name)
        if f.name == "channel":
            for sub in dataclasses.fields(val):
                out[f"channel.{sub.name}"] = getattr(val, sub.name)
        elif f.name == "power":
            for sub in dataclasses.fields(val):
                out[f"power.{sub.name}"] = getattr(val, sub.name)
        else:
            out[f.name] = val
    return out


def _format_value(val) -> str:
    if isinstance(val, tuple):
        return f"{_format_value(val[0])}x{_format_value(val[1])}"
    if isinstance(val, bool):
        return "true" if val else "false"
    if isinstance(val, float):
        return repr(val)
    return str(val)


# --------------------------------------------------------------------------
# deployment and mobility
# --------------------------------------------------------------------------

@dataclass
class Deployment:
    """Node placement of one trial: eNBs, background UEs and the test UE."""

    enb_positions: np.ndarray    # (n_enb, 2) [m]
    ue_positions: np.ndarray     # (n_ue, 2) [m], test UE included
    test_ue_index: int
    test_ue_heading: np.ndarray  # unit vector
    zero_redraws: int = 0        # Poisson draws rejected for having no eNB

    @property
    def n_enb(self) -> int:
        return len(self.enb_positions)

    @property
    def n_background(self) -> int:
        return len(self.ue_positions) - 1

    @property
    def test_ue_position(self) -> np.ndarray:
        return self.ue_positions[self.test_ue_index]

    def to_json(self) -> str:
        payload = {
            "enb_positions": [[repr(float(x)), repr(float(y))] for x, y in self.enb_positions],
            "ue_positions": [[repr(float(x)), repr(float(y))] for x, y in self.ue_positions],
            "test_ue_index": self.test_ue_index,
            "test_ue_heading": [repr(float(h)) for h in self.test_ue_heading],
            "zero_redraws": self.zero_redraws,
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()


def deploy(cfg: ScenarioConfig, rng: np.random.Generator) -> Deployment:
    """Draw eNB and background-UE positions from a Poisson point process.

    The test UE starts at the corridor entrance, mid-width, heading down
    the long axis.  Zero-eNB draws are redrawn and counted.
    """
    width, height = cfg.area
    area_km2 = width * height / 1e6
    redraws = 0
    n_enb = int(rng.poisson(cfg.enb_density * area_km2))
    while n_enb == 0:
        redraws += 1
        n_enb = int(rng.poisson(cfg.enb_density * area_km2))
    enb = np.column_stack(
        [rng.uniform(0.0, width, n_enb), rng.uniform(0.0, height, n_enb)]
    )
    n_bg = int(rng.poisson(cfg.ue_per_enb * n_enb))
    bg = np.column_stack(
        [rng.uniform(0.0, width, n_bg), rng.uniform(0.0, height, n_bg)]
    )
    test = np.array([[0.0, height / 2.0]])
    ues = np.vstack([bg, test])
    return Deployment(
        enb_positions=enb,
        ue_positions=ues,
        test_ue_index=len(ues) - 1,
        test_ue_heading=np.array([1.0, 0.0]),
        zero_redraws=redraws,
    )


def advance_ue(dep: Deployment, v: float, dt: float) -> Deployment:
    """Move the test UE by v*dt along its heading; everything else is static."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    dep.ue_positions[dep.test_ue_index] = (
        dep.ue_positions[dep.test_ue_index] + dep.test_ue_heading * (v * dt)
    )
    return dep

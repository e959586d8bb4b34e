"""Time-varying directional cluster channel for one eNB-UE link.

Each link carries a pathloss state (LoS / NLoS / outage), a distance
pathloss and a set of spatial clusters synthesized from subpaths.  The
full structure is redrawn at every large-scale update; in between, only
the Doppler phases, angles of arrival/departure, distance and pathloss
evolve slot by slot while the pathloss state is held.

The normalized channel matrix is

    H = sqrt(n_rx * n_tx) * sum_s g_s * e^{j phi_s} * a_rx(aoa_s) a_tx(aod_s)^H

with subpath gains g_s drawn complex Gaussian so that cluster powers
match their drawn fractions and E[||H||_F^2] = n_rx * n_tx.  Pathloss is
carried separately.  An outage link has pathloss +inf and a zero H.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .beams import ArrayGeometry, steering_matrix
from .scenario import ChannelProfile

SPEED_OF_LIGHT = 299_792_458.0


class LinkState(enum.Enum):
    LOS = "los"
    NLOS = "nlos"
    OUTAGE = "outage"


@dataclass(frozen=True)
class PathlossParams:
    """Distance pathloss and state-probability parameters."""

    alpha_los: float
    beta_los: float
    alpha_nlos: float
    beta_nlos: float
    a_out: float
    b_out: float
    a_los: float

    @classmethod
    def from_profile(cls, profile: ChannelProfile) -> "PathlossParams":
        return cls(
            alpha_los=profile.alpha_los,
            beta_los=profile.beta_los,
            alpha_nlos=profile.alpha_nlos,
            beta_nlos=profile.beta_nlos,
            a_out=profile.a_out,
            b_out=profile.b_out,
            a_los=profile.a_los,
        )


def state_probabilities(d: float, params: PathlossParams) -> tuple[float, float, float]:
    """(p_los, p_nlos, p_out) of the three-state model at distance d."""
    p_out = max(0.0, 1.0 - math.exp(-params.a_out * d + params.b_out))
    p_los = (1.0 - p_out) * math.exp(-params.a_los * d)
    return p_los, 1.0 - p_out - p_los, p_out


def draw_state(d: float, params: PathlossParams, rng: np.random.Generator) -> LinkState:
    """Sample the link state from the distance-dependent distribution."""
    if d <= 0:
        raise ValueError(f"distance must be positive, got {d}")
    p_los, p_nlos, _ = state_probabilities(d, params)
    u = rng.uniform()
    if u < p_los:
        return LinkState.LOS
    if u < p_los + p_nlos:
        return LinkState.NLOS
    return LinkState.OUTAGE


def pathloss_db(d: float, state: LinkState, params: PathlossParams) -> float:
    """alpha + beta * 10 log10(d) for a non-outage state."""
    if d <= 0:
        raise ValueError(f"distance must be positive, got {d}")
    if state is LinkState.LOS:
        return params.alpha_los + params.beta_los * 10.0 * math.log10(d)
    if state is LinkState.NLOS:
        return params.alpha_nlos + params.beta_nlos * 10.0 * math.log10(d)
    raise ValueError("pathloss_db is undefined in outage; handle the sentinel upstream")


@dataclass
class ClusterSet:
    """Cluster structure of one link; subpath arrays are flattened."""

    power_fractions: np.ndarray   # (K,), sums to 1
    aoa_centers: np.ndarray       # (K,) absolute azimuth [rad]
    aod_centers: np.ndarray       # (K,)
    aoa_spread: float             # rms beamspread [rad]
    aod_spread: float
    sub_cluster: np.ndarray       # (S,) cluster index of each subpath
    sub_gain: np.ndarray          # (S,) complex gain, E|g|^2 = fraction/n_sub
    sub_aoa_off: np.ndarray       # (S,) offset from the cluster AoA center
    sub_aod_off: np.ndarray       # (S,)
    sub_doppler_phase: np.ndarray  # (S,) accumulated Doppler phase [rad]

    @property
    def n_clusters(self) -> int:
        return len(self.power_fractions)

    @property
    def n_subpaths(self) -> int:
        return len(self.sub_gain)

    def sub_aoa(self) -> np.ndarray:
        return self.aoa_centers[self.sub_cluster] + self.sub_aoa_off

    def sub_aod(self) -> np.ndarray:
        return self.aod_centers[self.sub_cluster] + self.sub_aod_off

    def copy(self) -> "ClusterSet":
        return ClusterSet(
            power_fractions=self.power_fractions.copy(),
            aoa_centers=self.aoa_centers.copy(),
            aod_centers=self.aod_centers.copy(),
            aoa_spread=self.aoa_spread,
            aod_spread=self.aod_spread,
            sub_cluster=self.sub_cluster.copy(),
            sub_gain=self.sub_gain.copy(),
            sub_aoa_off=self.sub_aoa_off.copy(),
            sub_aod_off=self.sub_aod_off.copy(),
            sub_doppler_phase=self.sub_doppler_phase.copy(),
        )


@dataclass
class ChannelState:
    """Full per-link channel: geometry, pathloss state and clusters."""

    state: LinkState
    enb_position: np.ndarray
    ue_position: np.ndarray
    distance: float
    pathloss_db: float            # +inf in outage
    clusters: ClusterSet | None   # None in outage
    age_since_large_scale: float = 0.0

    @property
    def pathloss_lin(self) -> float:
        return 10.0 ** (self.pathloss_db / 10.0)

    def bearing_to_enb(self) -> float:
        d = self.enb_position - self.ue_position
        return math.atan2(d[1], d[0])

    def copy(self) -> "ChannelState":
        return ChannelState(
            state=self.state,
            enb_position=self.enb_position.copy(),
            ue_position=self.ue_position.copy(),
            distance=self.distance,
            pathloss_db=self.pathloss_db,
            clusters=self.clusters.copy() if self.clusters is not None else None,
            age_since_large_scale=self.age_since_large_scale,
        )


def _draw_clusters(
    bearing_rx: float,
    bearing_tx: float,
    profile: ChannelProfile,
    rng: np.random.Generator,
    align_first: bool,
) -> ClusterSet:
    k = max(1, int(rng.poisson(profile.cluster_mean)))
    raw = rng.exponential(1.0, size=k)
    fractions = raw / raw.sum()
    # cluster centers sit anywhere on the circle; on a LoS link the first
    # cluster rides the geometric bearing
    aoa_centers = rng.uniform(0.0, 2.0 * np.pi, size=k)
    aod_centers = rng.uniform(0.0, 2.0 * np.pi, size=k)
    if align_first:
        aoa_centers[0] = bearing_rx
        aod_centers[0] = bearing_tx
    spread = math.radians(profile.rms_spread_deg)
    n_sub = profile.subpaths
    s = k * n_sub
    sub_cluster = np.repeat(np.arange(k), n_sub)
    sigma = np.sqrt(fractions[sub_cluster] / n_sub / 2.0)
    sub_gain = sigma * (rng.standard_normal(s) + 1j * rng.standard_normal(s))
    return ClusterSet(
        power_fractions=fractions,
        aoa_centers=aoa_centers,
        aod_centers=aod_centers,
        aoa_spread=spread,
        aod_spread=spread,
        sub_cluster=sub_cluster,
        sub_gain=sub_gain,
        sub_aoa_off=rng.normal(0.0, spread, size=s),
        sub_aod_off=rng.normal(0.0, spread, size=s),
        sub_doppler_phase=np.zeros(s),
    )


def regenerate_large_scale(
    enb_position: np.ndarray,
    ue_position: np.ndarray,
    profile: ChannelProfile,
    rng: np.random.Generator,
) -> ChannelState:
    """Redraw everything: state, pathloss, cluster structure, subpaths."""
    enb = np.asarray(enb_position, dtype=float)
    ue = np.asarray(ue_position, dtype=float)
    delta = enb - ue
    d = float(np.hypot(delta[0], delta[1]))
    d = max(d, 1.0)  # clamp inside the 1 m reference distance
    params = PathlossParams.from_profile(profile)
    state = draw_state(d, params, rng)
    if state is LinkState.OUTAGE:
        return ChannelState(
            state=state,
            enb_position=enb.copy(),
            ue_position=ue.copy(),
            distance=d,
            pathloss_db=float("inf"),
            clusters=None,
        )
    bearing_rx = math.atan2(delta[1], delta[0])
    bearing_tx = math.atan2(-delta[1], -delta[0])
    return ChannelState(
        state=state,
        enb_position=enb.copy(),
        ue_position=ue.copy(),
        distance=d,
        pathloss_db=pathloss_db(d, state, params),
        clusters=_draw_clusters(
            bearing_rx, bearing_tx, profile, rng, align_first=state is LinkState.LOS
        ),
    )


def update_small_scale(
    ch: ChannelState,
    velocity: np.ndarray,
    dt: float,
    f_c: float,
    profile: ChannelProfile,
) -> ChannelState:
    """Advance Doppler phases, rotate angles and refresh the pathloss.

    The Doppler advance for each subpath is 2*pi*(v/lambda)*cos(psi)*dt
    with psi the angle between the velocity and the subpath AoA, taken at
    the start of the interval.  The UE then moves by velocity*dt, AoA and
    AoD centers rotate with the new geometric bearings, and distance and
    pathloss are recomputed.  The pathloss state is preserved.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    vel = np.asarray(velocity, dtype=float)
    ch.age_since_large_scale += dt
    if ch.state is LinkState.OUTAGE:
        ch.ue_position = ch.ue_position + vel * dt
        delta = ch.enb_position - ch.ue_position
        ch.distance = max(float(np.hypot(delta[0], delta[1])), 1.0)
        return ch

    cl = ch.clusters
    lam = SPEED_OF_LIGHT / f_c
    aoa = cl.sub_aoa()
    cl.sub_doppler_phase += (
        (2.0 * np.pi / lam) * dt * (vel[0] * np.cos(aoa) + vel[1] * np.sin(aoa))
    )

    old_delta = ch.enb_position - ch.ue_position
    ch.ue_position = ch.ue_position + vel * dt
    new_delta = ch.enb_position - ch.ue_position
    old_bearing = math.atan2(old_delta[1], old_delta[0])
    new_bearing = math.atan2(new_delta[1], new_delta[0])
    rot = new_bearing - old_bearing
    cl.aoa_centers += rot
    cl.aod_centers += rot

    ch.distance = max(float(np.hypot(new_delta[0], new_delta[1])), 1.0)
    params = PathlossParams.from_profile(profile)
    ch.pathloss_db = pathloss_db(ch.distance, ch.state, params)
    return ch


def synthesize_h(
    ch: ChannelState, rx_geom: ArrayGeometry, tx_geom: ArrayGeometry
) -> np.ndarray:
    """Materialize the channel matrix (n_rx x n_tx) of this link."""
    n_rx = rx_geom.n_elements
    n_tx = tx_geom.n_elements
    if ch.state is LinkState.OUTAGE or ch.clusters is None:
        return np.zeros((n_rx, n_tx), dtype=complex)
    cl = ch.clusters
    a_rx = steering_matrix(rx_geom, cl.sub_aoa())        # (n_rx, S)
    a_tx = steering_matrix(tx_geom, cl.sub_aod())        # (n_tx, S)
    g = cl.sub_gain * np.exp(1j * cl.sub_doppler_phase)
    return math.sqrt(n_rx * n_tx) * ((a_rx * g) @ a_tx.conj().T)


# --------------------------------------------------------------------------
# vectorized state/pathloss helpers for link populations
# --------------------------------------------------------------------------

def draw_states_vec(
    d: np.ndarray, params: PathlossParams, rng: np.random.Generator
) -> np.ndarray:
    """Vector version of draw_state; returns int codes 0=LoS 1=NLoS 2=outage."""
    d = np.asarray(d, dtype=float)
    p_out = np.maximum(0.0, 1.0 - np.exp(-params.a_out * d + params.b_out))
    p_los = (1.0 - p_out) * np.exp(-params.a_los * d)
    u = rng.uniform(size=d.shape)
    return np.where(u < p_los, 0, np.where(u < p_los + (1.0 - p_out - p_los), 1, 2))


def pathloss_db_vec(d: np.ndarray, codes: np.ndarray, params: PathlossParams) -> np.ndarray:
    """Pathloss in dB for coded states; outage maps to +inf."""
    d = np.asarray(d, dtype=float)
    log_d = 10.0 * np.log10(d)
    pl = np.where(
        codes == 0,
        params.alpha_los + params.beta_los * log_d,
        params.alpha_nlos + params.beta_nlos * log_d,
    )
    return np.where(codes == 2, np.inf, pl)

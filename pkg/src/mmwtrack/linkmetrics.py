"""SINR and rate computation, plus the swept-measurement table.

The measurement table is a dense (n_enb, n_enb_dir, n_ue_dir) grid of
SINR values in dB.  NaN marks an entry that is either not measured or
below the detection threshold; such entries never win a selection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

NEG_INF = float("-inf")


def db_to_lin(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def lin_to_db(x: float) -> float:
    if x <= 0.0:
        return NEG_INF
    return 10.0 * math.log10(x)


@dataclass(frozen=True)
class LinkBudget:
    """One link's contribution to an SINR: powers in watts, gains linear."""

    p_tx_lin: float
    pathloss_lin: float
    gain: float
    noise: float = 0.0

    @property
    def received_w(self) -> float:
        if math.isinf(self.pathloss_lin):
            return 0.0
        return self.p_tx_lin / self.pathloss_lin * self.gain


def sinr(serving: LinkBudget, interferers=()) -> float:
    """SINR in dB of the serving link against interferers plus noise.

    Pass an empty interferer list for control-plane measurements taken on
    narrowband sub-signals (interference-free).  An outage serving link
    returns -inf dB.
    """
    signal = serving.received_w
    interference = sum(b.received_w for b in interferers)
    return lin_to_db(signal / (interference + serving.noise))


def rate(sinr_db: float, n_users: int, w_tot: float) -> float:
    """Shannon rate with the band split equally over the served users."""
    if n_users < 1:
        raise ValueError(f"n_users must be at least 1, got {n_users}")
    if sinr_db == NEG_INF:
        return 0.0
    return w_tot / n_users * math.log2(1.0 + db_to_lin(sinr_db))


@dataclass
class MeasurementTable:
    """SINR grid collected during a sweep; NaN = not collected."""

    values: np.ndarray  # (n_enb, n_enb_dir, n_ue_dir) float, dB

    @classmethod
    def empty(cls, n_enb: int, n_enb_dir: int, n_ue_dir: int) -> "MeasurementTable":
        return cls(values=np.full((n_enb, n_enb_dir, n_ue_dir), np.nan))

    @property
    def shape(self):
        return self.values.shape

    def set(self, m: int, i: int, j: int, sinr_db: float) -> None:
        self.values[m, i, j] = sinr_db

    def eligible_mask(self) -> np.ndarray:
        return np.isfinite(self.values)

    def n_eligible(self) -> int:
        return int(self.eligible_mask().sum())

    def argmax(self) -> tuple[int, int, int] | None:
        """Highest entry; ties go to the lowest (m, i, j); None if all marked."""
        mask = self.eligible_mask()
        if not mask.any():
            return None
        flat = np.where(mask, self.values, NEG_INF)
        m, i, j = np.unravel_index(int(np.argmax(flat)), flat.shape)
        return int(m), int(i), int(j)

    def copy(self) -> "MeasurementTable":
        return MeasurementTable(values=self.values.copy())


def threshold_filter(table: MeasurementTable, gamma_db: float) -> MeasurementTable:
    """Mark every entry below the detection threshold; >= is retained."""
    values = table.values.copy()
    with np.errstate(invalid="ignore"):
        values[values < gamma_db] = np.nan
    return MeasurementTable(values=values)

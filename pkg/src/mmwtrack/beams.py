"""Antenna arrays, direction codebooks and beamforming gain.

Steering vectors here are full-circle azimuth beams over the rectangular
element grid: the per-element phase is linear in azimuth with stride 1
along rows and stride 2 along columns.  This keeps every azimuth in
[0, 2pi) unambiguous (a geometric half-wave in-plane response is
front-back ambiguous at the cardinal directions) and makes the response
between two azimuths a function of their circular distance only, so the
codebook entry nearest a path angle is never beaten by a farther one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class ArrayGeometry:
    """Rectangular antenna grid, spacing in wavelengths."""

    rows: int
    cols: int
    spacing: float = 0.5

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("array must have at least one element per axis")
        if self.spacing <= 0:
            raise ValueError("element spacing must be positive")

    @property
    def n_elements(self) -> int:
        return self.rows * self.cols

    def phase_modes(self) -> np.ndarray:
        """Per-element azimuth phase slope, flattened row-major."""
        r = np.arange(self.rows)[:, None]
        c = np.arange(self.cols)[None, :]
        return (2.0 * self.spacing * (r + 2 * c)).ravel()


def steering_vector(geom: ArrayGeometry, azimuth: float) -> np.ndarray:
    """Unit-norm array response for one azimuth.

    Entries have magnitude 1/sqrt(N); azimuth 0 gives the uniform
    (zero phase progression) vector.
    """
    n = geom.n_elements
    return np.exp(1j * geom.phase_modes() * azimuth) / np.sqrt(n)


def steering_matrix(geom: ArrayGeometry, azimuths: np.ndarray) -> np.ndarray:
    """Stacked steering vectors, shape (n_elements, len(azimuths))."""
    az = np.asarray(azimuths, dtype=float)
    ph = geom.phase_modes()[:, None] * az[None, :]
    return np.exp(1j * ph) / np.sqrt(geom.n_elements)


@dataclass(frozen=True)
class Codebook:
    """Finite set of steering directions with their weight vectors."""

    geom: ArrayGeometry
    directions: np.ndarray          # azimuths in [0, 2pi), shape (n_dir,)
    vectors: np.ndarray             # shape (n_dir, n_elements), unit rows

    @property
    def n_dir(self) -> int:
        return len(self.directions)

    def vector(self, i: int) -> np.ndarray:
        return self.vectors[i]

    def azimuth(self, i):
        return self.directions[i]

    def nearest(self, azimuth: float) -> int:
        d = np.abs(self.directions - (azimuth % TWO_PI)) % TWO_PI
        return int(np.argmin(np.minimum(d, TWO_PI - d)))


def build_codebook(geom: ArrayGeometry, n_dir: int) -> Codebook:
    """n_dir azimuths uniformly spaced over [0, 2pi)."""
    if n_dir < 1:
        raise ValueError("codebook needs at least one direction")
    azs = TWO_PI * np.arange(n_dir) / n_dir
    vecs = steering_matrix(geom, azs).T.copy()
    return Codebook(geom=geom, directions=azs, vectors=vecs)


def bf_gain(h: np.ndarray, w_tx: np.ndarray, w_rx: np.ndarray) -> float:
    """Beamforming gain |w_rx^* H w_tx|^2 of a channel matrix."""
    h = np.asarray(h)
    if h.shape != (len(w_rx), len(w_tx)):
        raise ValueError(
            f"dimension mismatch: H is {h.shape}, expected ({len(w_rx)}, {len(w_tx)})"
        )
    return float(np.abs(np.conj(w_rx) @ h @ w_tx) ** 2)


# ---------------------------------------------------------------------------
# Closed-form beam response kernel.
#
# For codebook weights w(phi) and steering a(theta) built from the same
# phase-mode family, w(phi)^H a(theta) depends only on theta - phi:
#     K(d) = D_rows(s*d) * D_cols(2*s*d) / (rows*cols),   s = 2*spacing,
# with D_n the complex Dirichlet sum. The engine's hot loop uses this
# instead of element-space products; both paths agree to rounding.
# ---------------------------------------------------------------------------

def _dirichlet(x: np.ndarray, n: int) -> np.ndarray:
    """Sum_{k=0}^{n-1} exp(j*k*x), stable at x = 2*pi*m."""
    half = 0.5 * np.asarray(x, dtype=float)
    s = np.sin(half)
    near = np.abs(s) < 1e-9
    mag = np.sin(n * half) / np.where(near, 1.0, s)
    return np.where(near, float(n) + 0.0j, mag * np.exp(1j * (n - 1) * half))


def beam_kernel(geom: ArrayGeometry, delta: np.ndarray) -> np.ndarray:
    """w(phi)^H a(phi + delta) for this array's codebook family."""
    s = 2.0 * geom.spacing
    d = np.asarray(delta, dtype=float)
    return (
        _dirichlet(s * d, geom.rows)
        * _dirichlet(2.0 * s * d, geom.cols)
        / geom.n_elements
    )

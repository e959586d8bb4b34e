"""Array, codebook and beamforming-gain tests."""

import numpy as np
import pytest

from mmwtrack.beams import (
    ArrayGeometry,
    Codebook,
    beam_kernel,
    bf_gain,
    build_codebook,
    steering_matrix,
    steering_vector,
)

ENB = ArrayGeometry(8, 8)
UE = ArrayGeometry(4, 4)


def single_path_h(rx_geom, tx_geom, aoa, aod):
    a_rx = steering_vector(rx_geom, aoa)
    a_tx = steering_vector(tx_geom, aod)
    scale = np.sqrt(rx_geom.n_elements * tx_geom.n_elements)
    return scale * np.outer(a_rx, a_tx.conj())


def circ_dist(a, b):
    d = np.abs(a - b) % (2 * np.pi)
    return np.minimum(d, 2 * np.pi - d)


class TestSteeringVector:
    def test_broadside_uniform(self):
        v = steering_vector(ENB, 0.0)
        assert np.allclose(v, v[0])
        assert np.allclose(np.abs(v), 1 / 8.0)

    def test_unit_norm_any_azimuth(self):
        rng = np.random.default_rng(0)
        for az in rng.uniform(0, 2 * np.pi, 50):
            assert abs(np.linalg.norm(steering_vector(ENB, az)) - 1.0) < 1e-12
            assert abs(np.linalg.norm(steering_vector(UE, az)) - 1.0) < 1e-12

    def test_self_and_quadrature_inner_products(self):
        for az in np.linspace(0, 2 * np.pi, 9):
            v = steering_vector(ENB, az)
            assert abs(np.vdot(v, v)) == pytest.approx(1.0, abs=1e-12)
            w = steering_vector(ENB, az + np.pi / 2)
            assert abs(np.vdot(w, v)) < 0.3

    def test_entries_unit_magnitude(self):
        v = steering_vector(UE, 1.234)
        assert np.allclose(np.abs(v), 1 / np.sqrt(16))

    def test_matrix_matches_vectors(self):
        azs = np.array([0.1, 1.0, 4.5])
        m = steering_matrix(ENB, azs)
        for k, az in enumerate(azs):
            assert np.allclose(m[:, k], steering_vector(ENB, az))


class TestCodebook:
    def test_sixteen_directions_step(self):
        cb = build_codebook(ENB, 16)
        steps = np.diff(cb.directions)
        assert np.allclose(steps, np.radians(22.5))

    def test_eight_directions_step(self):
        cb = build_codebook(UE, 8)
        assert np.allclose(np.diff(cb.directions), np.radians(45.0))

    def test_single_direction_is_broadside(self):
        cb = build_codebook(ENB, 1)
        assert cb.n_dir == 1
        assert cb.directions[0] == 0.0
        assert np.allclose(cb.vectors[0], steering_vector(ENB, 0.0))

    def test_rows_unit_norm(self):
        cb = build_codebook(ENB, 16)
        assert np.allclose(np.linalg.norm(cb.vectors, axis=1), 1.0, atol=1e-12)

    def test_invalid_size(self):
        with pytest.raises(ValueError):
            build_codebook(ENB, 0)


class TestBfGain:
    def test_zero_channel(self):
        h = np.zeros((16, 64), dtype=complex)
        w_rx = steering_vector(UE, 0.3)
        w_tx = steering_vector(ENB, 0.7)
        assert bf_gain(h, w_tx, w_rx) == 0.0

    def test_matched_single_path_equals_element_product(self):
        h = single_path_h(UE, ENB, aoa=1.1, aod=2.2)
        g = bf_gain(h, steering_vector(ENB, 2.2), steering_vector(UE, 1.1))
        assert g == pytest.approx(16 * 64, rel=1e-9)

    def test_quadratic_scaling(self):
        rng = np.random.default_rng(3)
        h = rng.standard_normal((16, 64)) + 1j * rng.standard_normal((16, 64))
        w_rx = steering_vector(UE, 0.5)
        w_tx = steering_vector(ENB, 1.5)
        assert bf_gain(2 * h, w_tx, w_rx) == pytest.approx(
            4 * bf_gain(h, w_tx, w_rx), rel=1e-12
        )

    def test_dimension_mismatch(self):
        h = np.zeros((4, 8), dtype=complex)
        with pytest.raises(ValueError):
            bf_gain(h, np.ones(4), np.ones(4))

    def test_global_phase_invariance(self):
        rng = np.random.default_rng(4)
        h = rng.standard_normal((16, 64)) + 1j * rng.standard_normal((16, 64))
        w_rx = steering_vector(UE, 0.5)
        w_tx = steering_vector(ENB, 2.5)
        base = bf_gain(h, w_tx, w_rx)
        for phi in (0.3, 1.2, 5.0):
            assert bf_gain(h, w_tx * np.exp(1j * phi), w_rx) == pytest.approx(base, rel=1e-12)
            assert bf_gain(h, w_tx, w_rx * np.exp(1j * phi)) == pytest.approx(base, rel=1e-12)

    def test_spectral_norm_bound(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            h = rng.standard_normal((16, 64)) + 1j * rng.standard_normal((16, 64))
            w_rx = steering_vector(UE, rng.uniform(0, 2 * np.pi))
            w_tx = steering_vector(ENB, rng.uniform(0, 2 * np.pi))
            bound = np.linalg.norm(h, ord=2) ** 2
            assert bf_gain(h, w_tx, w_rx) <= bound * (1 + 1e-9)


class TestNearestBeamSelectivity:
    @pytest.mark.parametrize("geom,n_dir", [(ENB, 16), (UE, 8)])
    def test_nearest_codebook_beam_achieves_max(self, geom, n_dir):
        cb = build_codebook(geom, n_dir)
        rng = np.random.default_rng(12)
        for _ in range(1000):
            az = rng.uniform(0, 2 * np.pi)
            a = steering_vector(geom, az)
            gains = np.abs(cb.vectors.conj() @ a) ** 2
            nearest = cb.nearest(az)
            assert gains[nearest] >= gains.max() * (1 - 1e-9)

    def test_two_sided_selection_on_single_path(self):
        cb_tx = build_codebook(ENB, 16)
        cb_rx = build_codebook(UE, 8)
        rng = np.random.default_rng(13)
        for _ in range(100):
            aoa = rng.uniform(0, 2 * np.pi)
            aod = rng.uniform(0, 2 * np.pi)
            h = single_path_h(UE, ENB, aoa, aod)
            gains = np.abs(cb_rx.vectors.conj() @ h @ cb_tx.vectors.T) ** 2
            j, i = np.unravel_index(np.argmax(gains), gains.shape)
            assert gains[cb_rx.nearest(aoa), cb_tx.nearest(aod)] >= gains[j, i] * (1 - 1e-9)


class TestBeamKernel:
    def test_matches_element_space(self):
        rng = np.random.default_rng(21)
        for geom in (ENB, UE, ArrayGeometry(2, 3)):
            w_az = rng.uniform(0, 2 * np.pi, 5)
            a_az = rng.uniform(0, 2 * np.pi, 5)
            for wa, aa in zip(w_az, a_az):
                w = steering_vector(geom, wa)
                a = steering_vector(geom, aa)
                direct = np.vdot(w, a)
                kernel = beam_kernel(geom, np.array([aa - wa]))[0]
                assert abs(direct - kernel) < 1e-10

    def test_periodicity(self):
        d = np.linspace(-2 * np.pi, 2 * np.pi, 41)
        k1 = beam_kernel(ENB, d)
        k2 = beam_kernel(ENB, d + 2 * np.pi)
        assert np.allclose(k1, k2, atol=1e-9)

    def test_peak_at_zero(self):
        k = beam_kernel(ENB, np.array([0.0]))
        assert k[0] == pytest.approx(1.0, abs=1e-12)

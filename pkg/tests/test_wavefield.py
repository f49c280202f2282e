import numpy as np
import pytest

from sis_forge import cxmat
from sis_forge import wavefield as wf
from sis_forge.errors import GeometryError
from sis_forge.geometry import build_geometry, wavelength_for


def hand_kernel_entry():
    # scalar evaluation, written out term by term
    lam, a2, r, cos_chi = 0.1, 0.5, 0.2, 1.0
    area = (a2 * lam) ** 2
    return area * cos_chi / r * complex(1 / (2 * np.pi * r), -1 / lam) * np.exp(2j * np.pi * r / lam)


def test_kernel_scalar_example():
    geo = build_geometry("tx", 1, 1, 1, 0.1, 2, 0.5, 0)
    k = wf.build_kernel(geo, 0, 1).matrix
    assert k.shape == (1, 1)
    assert k[0, 0] == pytest.approx(hand_kernel_entry(), rel=1e-12)
    assert k[0, 0] == pytest.approx(0.009947 - 0.12500j, abs=1e-6)


def test_in_plane_pair_is_zero():
    assert wf.diffraction_coefficients(1.0, 0.0, 0.1, 0.5) == 0


def test_kernel_envelope_decreases_with_distance():
    a = abs(wf.diffraction_coefficients(0.2, 1.0, 0.1, 0.5))
    b = abs(wf.diffraction_coefficients(0.4, 1.0, 0.1, 0.5))
    assert b < a


def test_kernel_shapes_and_adjacency():
    geo = build_geometry("tx", 2, 9, 3, 0.1, 4, 0.5, 6)
    ks = wf.chain_kernels(geo)
    assert [k.matrix.shape for k in ks] == [(9, 2), (9, 9), (9, 9)]
    with pytest.raises(GeometryError):
        wf.build_kernel(geo, 0, 2)
    with pytest.raises(ValueError):
        ks[1].matrix[0, 0] = 0


def test_receive_kernels_end_at_antennas():
    geo = build_geometry("rx", 2, 9, 2, 0.1, 4, 0.5, 6, (50, 0, 15))
    assert [k.matrix.shape for k in wf.chain_kernels(geo)] == [(9, 9), (2, 9)]


def test_kernel_cache_round_trip(tmp_path):
    geo = build_geometry("tx", 2, 9, 2, 0.1, 4, 0.5, 6)
    a = wf.cached_chain_kernels(geo, tmp_path)
    assert any(tmp_path.iterdir())
    b = wf.cached_chain_kernels(geo, tmp_path)
    for ka, kb in zip(a, b):
        assert np.array_equal(ka.matrix, kb.matrix)


def test_path_loss_example():
    lam = wavelength_for(3e9)
    assert lam == pytest.approx(0.09993, rel=1e-4)
    assert wf.path_loss_amplitude(lam, 50.0) == pytest.approx(1.590e-4, rel=1e-3)
    with pytest.raises(GeometryError):
        wf.path_loss_amplitude(lam, 0.0)


@pytest.fixture(scope="module")
def pair():
    lam = wavelength_for(3e9)
    t = build_geometry("tx", 2, 16, 2, lam, 4, 0.5, 6, (0, 0, 15))
    r = build_geometry("rx", 2, 25, 2, lam, 4, 0.5, 6, (50, 0, 15))
    return t, r


def test_separation_between_facing_layers(pair):
    t, r = pair
    d = wf.surface_separation(t, r)
    assert d == pytest.approx(50 - 2 * (4 + 6) * t.wavelength, rel=1e-12)


def test_pure_los_magnitudes(pair):
    t, r = pair
    ch = wf.sample_channel(t, r, 1e12, np.random.default_rng(0))
    c = wf.path_loss_amplitude(t.wavelength, ch.d)
    np.testing.assert_allclose(np.abs(ch.H), c, rtol=1e-5)
    assert ch.H.shape == (25, 16)


def test_los_rank_one(pair):
    t, r = pair
    for H in (wf.los_matrix(t, r), wf.sample_channel(t, r, np.inf, np.random.default_rng(1)).H):
        _, s, _ = cxmat.truncated_svd(H, 2)
        assert s[1] / s[0] < 1e-8


def test_large_kappa_residual_scales_with_scatter_weight(pair):
    # at finite kappa the scatter keeps amplitude 1/sqrt(kappa+1) relative to LOS
    t, r = pair
    H = wf.sample_channel(t, r, 1e12, np.random.default_rng(1)).H
    _, s, _ = cxmat.truncated_svd(H, 2)
    bound = 1e-6 * (np.sqrt(25) + np.sqrt(16)) / np.sqrt(25 * 16)
    assert 0.1 * bound < s[1] / s[0] < 2 * bound


def test_rayleigh_power_monte_carlo():
    lam = wavelength_for(3e9)
    t = build_geometry("tx", 1, 1, 1, lam, 4, 0.5, 0, (0, 0, 15))
    r = build_geometry("rx", 1, 1, 1, lam, 4, 0.5, 0, (50, 0, 15))
    rng = np.random.default_rng(2)
    d = wf.surface_separation(t, r)
    c = wf.path_loss_amplitude(lam, d)
    h = np.array([wf.sample_channel(t, r, 0.0, rng).H[0, 0] for _ in range(100000)])
    assert np.mean(np.abs(h) ** 2) == pytest.approx(c ** 2, rel=0.02)


def test_channel_determinism(pair):
    t, r = pair
    a = wf.sample_channel(t, r, 15, wf.realization_rng(3, wf.TRAIN_DOMAIN, 7)).H
    b = wf.sample_channel(t, r, 15, wf.realization_rng(3, wf.TRAIN_DOMAIN, 7)).H
    c = wf.sample_channel(t, r, 15, wf.realization_rng(3, wf.TEST_DOMAIN, 7)).H
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_noise_statistics():
    z = wf.sample_noise(4, 250000, 2.5, np.random.default_rng(4))
    assert np.mean(np.abs(z) ** 2) == pytest.approx(2.5, rel=0.01)
    assert np.var(z.real) == pytest.approx(1.25, rel=0.02)
    assert np.var(z.imag) == pytest.approx(1.25, rel=0.02)
    with pytest.raises(ValueError):
        wf.sample_noise(2, 2, 0.0, np.random.default_rng(0))


def test_negative_kappa_rejected():
    with pytest.raises(ValueError):
        wf.rician_weights(-1)


def test_reciprocity():
    # swapping source and destination planes transposes the coupling
    lam = 0.1
    rng = np.random.default_rng(5)
    p = rng.uniform(-1, 1, (5, 3)) + [0, 0, 0]
    q = rng.uniform(-1, 1, (4, 3)) + [2, 0, 0]
    from sis_forge.geometry import pairwise_distance_and_angle
    r1, c1 = pairwise_distance_and_angle(p[None], q[:, None])
    r2, c2 = pairwise_distance_and_angle(q[None], p[:, None])
    k1 = wf.diffraction_coefficients(r1, c1, lam, 0.5)
    k2 = wf.diffraction_coefficients(r2, c2, lam, 0.5)
    np.testing.assert_allclose(k1, k2.T, rtol=1e-14)

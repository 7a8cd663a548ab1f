import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tomolab.background import RingSpectra
from tomolab.errors import TruncationError
from tomolab.forward import ring_green_matrix
from oracles import gaussian_born_amplitude
from tomolab.inversion import born_forward
from tomolab.metrics import NoiseSpec, data_discrepancy, inject_noise
from tomolab.model import PhantomSpec
from tomolab.near2far import (
    DoubleSpectrum,
    TruncationPolicy,
    amplitude_coordinate_path,
    near_to_far,
    phi_spectrum_solve,
    ring_double_dft,
    ring_double_idft,
)


def harmonic(M, q, qp):
    phi = 2 * np.pi * np.arange(M) / M
    return np.exp(1j * q * phi)[:, None] * np.exp(1j * qp * phi)[None, :]


def test_dft_of_constant():
    S = ring_double_dft(np.full((60, 60), 2.5 - 1j), 29)
    assert S[0, 0] == pytest.approx(2.5 - 1j, abs=1e-14)
    S.values[29, 29] = 0
    assert np.abs(S.values).max() < 1e-14


@settings(max_examples=25, deadline=None)
@given(st.integers(-29, 29), st.integers(-29, 29))
def test_dft_single_harmonic(q, qp):
    S = ring_double_dft(harmonic(60, q, qp), 29)
    assert S[q, qp] == pytest.approx(1.0, abs=1e-13)
    vals = S.values.copy()
    vals[q + 29, qp + 29] = 0
    assert np.abs(vals).max() < 1e-13


def test_band_limited_roundtrip():
    rng = np.random.default_rng(3)
    spec = DoubleSpectrum(29, rng.standard_normal((59, 59)) + 1j * rng.standard_normal((59, 59)))
    samples = ring_double_idft(spec, 60)
    back = ring_double_dft(samples, 29)
    assert np.allclose(back.values, spec.values, rtol=0, atol=1e-12)


def test_truncation_errors(geom):
    with pytest.raises(TruncationError):
        TruncationPolicy(Q=40).order(geom)
    with pytest.raises(TruncationError):
        TruncationPolicy(Q=-1).order(geom)
    with pytest.raises(TruncationError):
        ring_double_dft(np.zeros((60, 60)), 30)
    with pytest.raises(ValueError):
        DoubleSpectrum(2, np.zeros((4, 4)))


def test_phi_vanishes_without_scatterer(k, geom):
    G0 = ring_double_dft(ring_green_matrix(k, geom), 29)
    phi = phi_spectrum_solve(G0, k, geom, G0spec=G0)
    assert not np.any(phi.values)


def test_phi_single_channel_division(k, geom):
    dG = ring_double_idft(DoubleSpectrum(29, np.zeros((59, 59))), 60) + 0.7j * harmonic(60, 2, -4)
    phi = phi_spectrum_solve(ring_double_dft(dG, 29), k, geom)
    g = RingSpectra(k, geom, 29).g
    expected = 0.7j / ((2 * np.pi * geom.R0) ** 2 * g[2 + 29] * g[-4 + 29])
    assert phi[2, -4] == pytest.approx(expected, rel=1e-12)
    vals = phi.values.copy()
    vals[2 + 29, -4 + 29] = 0
    assert np.abs(vals).max() <= 1e-10 * abs(expected)


def test_channel_floor_zeroes_weak_channels(case43):
    f = near_to_far(case43[1], trunc=TruncationPolicy(g_floor=1e-2))
    assert f.meta["zeroed_channels"] > 0
    assert near_to_far(case43[1]).meta["zeroed_channels"] == 0


def test_linearity(case43, weak):
    a, b = 0.3 - 2j, 1.7
    bf = case43[1].with_scattered(a * case43[1].G_sc + b * weak[1].G_sc)
    lhs = near_to_far(bf).values
    rhs = a * case43[2].values + b * weak[2].values
    assert np.allclose(lhs, rhs, rtol=0, atol=1e-12 * np.abs(rhs).max())


def test_paths_agree(case43, k, geom):
    f = case43[2]
    g = amplitude_coordinate_path(case43[1], geom, k)
    assert data_discrepancy(g, f) <= 1e-3
    assert g.meta["condition"] > 1


def test_weak_data_match_born_amplitude(weak, angles):
    fb = born_forward(weak[0], angles)
    assert data_discrepancy(weak[2], fb) <= 0.03


def test_weak_data_match_gaussian_transform(weak, k, angles):
    ref = gaussian_born_amplitude(PhantomSpec.two_blob(0.01), k, angles)
    err = np.linalg.norm(weak[2].values - ref) / np.linalg.norm(ref)
    assert err <= 0.03


def test_noise_degrades_both_paths_alike(case43, k, geom):
    bf, f = case43[1], case43[2]
    noisy, _ = inject_noise(bf, NoiseSpec(0.15, seed=1))
    e1 = data_discrepancy(near_to_far(noisy), f)
    e2 = data_discrepancy(amplitude_coordinate_path(noisy, geom, k), f)
    assert e1 > 0.01 and e2 > 0.01
    assert 0.5 <= e1 / e2 <= 2.0


def test_off_ring_angles(case43, angles):
    # resynthesis on a different angle set agrees with the ring-angle values
    sub = angles[::3]
    f = near_to_far(case43[1], phis=sub)
    assert np.allclose(f.values, case43[2].values[::3, ::3], rtol=0, atol=1e-12 * np.abs(f.values).max())

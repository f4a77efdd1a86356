import numpy as np
import pytest

from pitchstyle.wavelet import WaveletDecomposition, band_edges, dwt, idwt, reconstruct_band

SQRT2 = np.sqrt(2.0)


def test_single_stage_known_values():
    # Hand-computed: a_k = (x0+x1)/sqrt2, d_k = (x0-x1)/sqrt2.
    dec = dwt(np.array([1.0, 2.0, 3.0, 4.0]), 1)
    assert np.allclose(dec.approx, [3.0 / SQRT2, 7.0 / SQRT2], atol=1e-15)
    assert np.allclose(dec.details[0], [-1.0 / SQRT2, -1.0 / SQRT2], atol=1e-15)


def test_constant_signal_has_zero_details():
    dec = dwt(np.full(4, 5.0), 2)
    assert np.allclose(dec.approx, [10.0], atol=1e-12)
    for detail in dec.details:
        assert np.allclose(detail, 0.0, atol=1e-12)


def test_details_ordering_finest_first():
    rng = np.random.default_rng(0)
    dec = dwt(rng.normal(size=64), 3)
    assert len(dec.details) == 3
    assert len(dec.details[0]) == 32
    assert len(dec.details[1]) == 16
    assert len(dec.details[2]) == 8


def test_round_trip_random_lengths():
    rng = np.random.default_rng(1)
    for _ in range(200):
        n = int(rng.integers(2, 700))
        levels = int(rng.integers(1, int(np.log2(n)) + 1)) if n >= 4 else 1
        x = rng.normal(size=n)
        y = idwt(dwt(x, levels))
        assert y.shape == x.shape
        assert np.max(np.abs(y - x)) < 1e-12 * max(1.0, np.max(np.abs(x)))


def test_round_trip_odd_lengths_exact():
    rng = np.random.default_rng(2)
    for n in (3, 5, 7, 9, 33, 67, 129, 375):
        x = rng.normal(size=n)
        assert np.allclose(idwt(dwt(x, 1)), x, atol=1e-12)


def test_band_split_identity():
    rng = np.random.default_rng(3)
    for _ in range(100):
        n = int(rng.integers(16, 600))
        x = rng.normal(size=n)
        dec = dwt(x, 4)
        low = reconstruct_band(dec, "low")
        high = reconstruct_band(dec, "high")
        assert np.max(np.abs(low + high - x)) < 1e-12


def test_parseval_power_of_two():
    rng = np.random.default_rng(4)
    for n in (8, 64, 256, 1024):
        x = rng.normal(size=n)
        dec = dwt(x, 3)
        coeff_energy = np.sum(dec.approx**2) + sum(np.sum(d**2) for d in dec.details)
        assert abs(coeff_energy - np.sum(x**2)) < 1e-9 * np.sum(x**2)


def test_band_reconstruction_is_linear():
    rng = np.random.default_rng(5)
    x = rng.normal(size=200)
    y = rng.normal(size=200)
    lx = reconstruct_band(dwt(x, 4), "low")
    ly = reconstruct_band(dwt(y, 4), "low")
    lxy = reconstruct_band(dwt(x + 2 * y, 4), "low")
    assert np.allclose(lxy, lx + 2 * ly, atol=1e-10)


def test_band_edges_at_reference_frame_rate():
    approx, details = band_edges(93.75, 4)
    assert approx == (0.0, 2.9296875)
    assert details[0] == (23.4375, 46.875)
    assert details[-1] == (2.9296875, 5.859375)
    approx3, _ = band_edges(93.75, 3)
    assert approx3 == (0.0, 5.859375)


def test_dwt_input_validation():
    with pytest.raises(ValueError):
        dwt(np.ones((2, 2)), 1)
    with pytest.raises(ValueError):
        dwt(np.ones(8), 0)
    with pytest.raises(ValueError):
        dwt(np.ones(4), 3)  # needs >= 2**levels samples
    with pytest.raises(ValueError):
        dwt(np.array([1.0, np.nan, 2.0, 3.0]), 1)


def test_idwt_rejects_inconsistent_lengths():
    dec = dwt(np.arange(16.0), 2)
    broken = WaveletDecomposition(
        levels=dec.levels,
        approx=dec.approx[:-1],
        details=dec.details,
        original_length=dec.original_length,
        padding=dec.padding,
    )
    with pytest.raises(ValueError):
        idwt(broken)


def test_reconstruct_band_rejects_unknown_band():
    dec = dwt(np.arange(16.0), 2)
    with pytest.raises(ValueError):
        reconstruct_band(dec, "mid")

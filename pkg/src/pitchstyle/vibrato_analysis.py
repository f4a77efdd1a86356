"""Vibrato measurement and style classification from the residual band.

The residual (high) band of a decomposed contour carries the vibrato if
there is any. Rate comes from the dominant autocorrelation lag, extent
from the RMS amplitude converted to cents, and the label from three
gates: enough extent, a rate in the plausible singing range, and enough
of the band's energy concentrated where vibrato lives.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy import signal as sp_signal

from .signal_io import F0Contour
from .style_engine import decompose

__all__ = [
    "DetectorConfig",
    "VibratoEstimate",
    "estimate",
    "level_energy_capture",
    "style_accuracy",
]

_LN2 = math.log(2.0)


@dataclass
class DetectorConfig:
    """Thresholds for the vibrato label.

    ``vibrato_band`` is where singing vibrato concentrates its energy;
    ``rate_search`` bounds the autocorrelation lag scan.
    """

    extent_threshold_cents: float = 20.0
    rate_range: tuple[float, float] = (4.0, 9.0)
    min_band_fraction: float = 0.5
    vibrato_band: tuple[float, float] = (5.0, 8.0)
    rate_search: tuple[float, float] = (3.0, 10.0)
    min_window_seconds: float = 0.5
    drift_tolerance_cents: float = 60.0


@dataclass
class VibratoEstimate:
    rate: float
    extent_cents: float
    band_energy_fraction: float
    label: str

    def to_dict(self) -> dict:
        return {
            "rate": self.rate,
            "extent_cents": self.extent_cents,
            "band_energy_fraction": self.band_energy_fraction,
            "label": self.label,
        }


def _longest_run(mask: np.ndarray) -> tuple[int, int]:
    best = (0, 0)
    start = None
    for i, v in enumerate(mask):
        if v and start is None:
            start = i
        elif not v and start is not None:
            if i - start > best[1] - best[0]:
                best = (start, i)
            start = None
    if start is not None and len(mask) - start > best[1] - best[0]:
        best = (start, len(mask))
    return best


def _default_window(
    contour: F0Contour,
    low: np.ndarray,
    min_frames: int,
    config: DetectorConfig,
    edge: int,
) -> tuple[int, int]:
    """Pick the longest voiced stretch where the melody holds still.

    Note-to-note glides spill broadband energy into the residual band
    and would inflate the extent, so frames whose smoothed melody band
    moves more than the drift tolerance are skipped. When no still
    stretch is long enough, fall back to the longest voiced run. The
    chosen window is then pulled in by one analysis block per side,
    when length allows, to stay clear of boundary transients.
    """
    frame_rate = contour.frame_rate
    # Averaging over one period of the slowest band vibrato removes the
    # small ripple the modulation leaks into the melody band.
    smooth = max(1, int(round(frame_rate / config.vibrato_band[0])))
    melody = ndimage.uniform_filter1d(low, size=smooth)
    half = max(1, int(round(0.25 * config.min_window_seconds * frame_rate)))
    size = 2 * half + 1
    spread = ndimage.maximum_filter1d(melody, size=size) - ndimage.minimum_filter1d(
        melody, size=size
    )
    still = spread <= config.drift_tolerance_cents * _LN2 / 1200.0
    window = _longest_run(contour.voiced & still)
    if window[1] - window[0] < min_frames:
        window = _longest_run(contour.voiced)
    start, end = window
    if end - start - 2 * edge >= min_frames:
        window = (start + edge, end - edge)
    return window


def _autocorrelation_rate(residual: np.ndarray, frame_rate: float, search: tuple[float, float]) -> float:
    x = residual - residual.mean()
    power = float(np.dot(x, x))
    if power == 0.0:
        return 0.0
    n = len(x)
    lag_min = max(1, int(math.floor(frame_rate / search[1])))
    lag_max = min(n - 2, int(math.ceil(frame_rate / search[0])))
    if lag_max <= lag_min:
        return 0.0
    # Unbiased normalization keeps long lags comparable to short ones.
    corr = np.correlate(x, x, mode="full")[n - 1 :]
    counts = n - np.arange(n)
    rho = corr / counts
    window = rho[lag_min : lag_max + 1]
    # A periodic residual peaks at every multiple of its period, so take
    # the shortest local maximum near the global peak height instead of
    # the argmax, which may land on a subharmonic.
    interior = np.arange(1, len(window) - 1)
    local = interior[
        (window[interior] >= window[interior - 1])
        & (window[interior] >= window[interior + 1])
    ]
    if len(local) == 0:
        k = int(np.argmax(window)) + lag_min
    else:
        best = float(window[local].max())
        threshold = 0.85 * best if best > 0 else best
        k = int(local[window[local] >= threshold][0]) + lag_min
    lag = float(k)
    if 1 <= k < n - 1:
        y0, y1, y2 = rho[k - 1], rho[k], rho[k + 1]
        denom = y0 - 2 * y1 + y2
        if denom != 0:
            lag += float(np.clip(0.5 * (y0 - y2) / denom, -0.5, 0.5))
    return frame_rate / lag


def _band_energy_fraction(residual: np.ndarray, frame_rate: float, band: tuple[float, float]) -> float:
    total = float(np.sum(residual ** 2))
    if total == 0.0:
        return 0.0
    # The zero-phase pass applies the filter twice, which would leave
    # only a quarter of the energy at the nominal edges; widening the
    # design band by half a Hz restores roughly half-energy there.
    pad = 0.5
    sos = sp_signal.butter(
        2, (band[0] - pad, band[1] + pad), btype="bandpass", fs=frame_rate, output="sos"
    )
    passed = sp_signal.sosfiltfilt(sos, residual)
    return float(np.sum(passed ** 2) / total)


def estimate(
    contour: F0Contour,
    levels: int = 4,
    window: tuple[int, int] | None = None,
    config: DetectorConfig | None = None,
) -> VibratoEstimate:
    """Measure vibrato rate, extent and band concentration on a contour.

    ``window`` is a frame range to analyse; by default the longest
    voiced stretch with a steady melody is used so note glides do not
    contaminate the residual. The window must be fully voiced and at
    least ``config.min_window_seconds`` long.
    """
    if config is None:
        config = DetectorConfig()
    min_frames = int(math.ceil(config.min_window_seconds * contour.frame_rate))
    bands = decompose(contour, levels)
    if window is None:
        window = _default_window(contour, bands.low, min_frames, config, 2 ** levels)
    start, end = window
    if not (0 <= start < end <= len(contour)):
        raise ValueError(f"window ({start}, {end}) outside contour of {len(contour)} frames")
    if end - start < min_frames:
        raise ValueError(
            f"analysis window of {end - start} frames is shorter than "
            f"{config.min_window_seconds} s ({min_frames} frames)"
        )
    if not np.all(contour.voiced[start:end]):
        raise ValueError("analysis window must be fully voiced")

    residual = bands.high[start:end]

    rate = _autocorrelation_rate(residual, contour.frame_rate, config.rate_search)
    extent = (1200.0 / _LN2) * math.sqrt(2.0) * float(np.sqrt(np.mean(residual ** 2)))
    fraction = _band_energy_fraction(residual, contour.frame_rate, config.vibrato_band)

    is_vibrato = (
        extent >= config.extent_threshold_cents
        and config.rate_range[0] <= rate <= config.rate_range[1]
        and fraction >= config.min_band_fraction
    )
    return VibratoEstimate(
        rate=rate,
        extent_cents=extent,
        band_energy_fraction=fraction,
        label="vibrato" if is_vibrato else "straight",
    )


def level_energy_capture(contour: F0Contour, levels: int, modulation) -> float:
    """How much of a known injected modulation the high band retains.

    ``modulation`` is the log-frequency modulation sequence that was
    added to the contour, one value per frame. The result is the energy
    of the high band's projection onto the modulation divided by the
    modulation energy: 1.0 means fully captured, 0.0 means none of it
    reached the high band.
    """
    modulation = np.asarray(modulation, dtype=float)
    if len(modulation) != len(contour):
        raise ValueError("modulation length must match the contour")
    energy = float(np.dot(modulation, modulation))
    if energy == 0.0:
        raise ValueError("modulation is identically zero")
    bands = decompose(contour, levels)
    coefficient = float(np.dot(bands.high, modulation)) / energy
    return coefficient ** 2


def style_accuracy(items, levels: int = 4, config: DetectorConfig | None = None) -> float:
    """Fraction of (contour, label) pairs the detector labels correctly."""
    total = 0
    correct = 0
    for contour, label in items:
        result = estimate(contour, levels=levels, config=config)
        correct += int(result.label == label)
        total += 1
    if total == 0:
        raise ValueError("style_accuracy needs a non-empty corpus")
    return correct / total

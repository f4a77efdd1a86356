"""Fundamental frequency tracking over a bank of low-passed candidates.

The tracker follows the interval-consistency idea used by the DIO
algorithm: the signal is low-pass filtered at a ladder of cutoffs, and
for each cutoff the spacing of rising zero crossings, falling zero
crossings, peaks and dips gives four period estimates per frame. Where
the four agree the filtered band contains the fundamental and little
else; the candidate with the most consistent intervals wins the frame.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .signal_io import AudioBuffer, F0Contour

__all__ = ["TrackerConfig", "extract_f0", "interpolate_unvoiced"]

# Frames quieter than this RMS are never voiced, whatever the intervals say.
_NOISE_FLOOR_RMS = 1e-4


@dataclass
class TrackerConfig:
    f0_floor: float = 60.0
    f0_ceil: float = 1000.0
    hop: int = 256
    channels_per_octave: int = 2
    voicing_reliability_threshold: float = 0.15

    def validate(self) -> None:
        if self.f0_floor <= 0 or self.f0_ceil <= self.f0_floor:
            raise ValueError("need 0 < f0_floor < f0_ceil")
        if self.hop < 1:
            raise ValueError("hop must be a positive sample count")
        if self.channels_per_octave < 1:
            raise ValueError("channels_per_octave must be >= 1")
        if self.voicing_reliability_threshold <= 0:
            raise ValueError("voicing_reliability_threshold must be positive")


def _band_cutoffs(config: TrackerConfig) -> list[float]:
    # A tone at f is isolated by some cutoff in (f, f * 2**(1/cpo)], so the
    # ladder climbs one channel past f0_ceil.
    step = 2.0 ** (1.0 / config.channels_per_octave)
    cutoffs = []
    c = config.f0_floor * step
    while c / step < config.f0_ceil * (1 + 1e-9):
        cutoffs.append(c)
        c *= step
    return cutoffs


def _event_positions(x: np.ndarray) -> list[np.ndarray]:
    """Sub-sample positions of rising/falling crossings, peaks and dips."""
    a = x[:-1]
    b = x[1:]

    rising = np.nonzero((a < 0) & (b >= 0))[0]
    pos_rising = rising + a[rising] / (a[rising] - b[rising])

    falling = np.nonzero((a > 0) & (b <= 0))[0]
    pos_falling = falling + a[falling] / (a[falling] - b[falling])

    interior = np.arange(1, len(x) - 1)
    left = x[:-2]
    mid = x[1:-1]
    right = x[2:]

    def refine(idx: np.ndarray) -> np.ndarray:
        denom = left[idx] - 2 * mid[idx] + right[idx]
        delta = np.zeros(len(idx))
        ok = denom != 0
        delta[ok] = 0.5 * (left[idx][ok] - right[idx][ok]) / denom[ok]
        return interior[idx] + np.clip(delta, -0.5, 0.5)

    peaks = np.nonzero((mid > left) & (mid >= right) & (mid > 0))[0]
    dips = np.nonzero((mid < left) & (mid <= right) & (mid < 0))[0]
    return [pos_rising, pos_falling, refine(peaks), refine(dips)]


def _interval_track(positions: np.ndarray, frame_centers: np.ndarray) -> np.ndarray:
    """Event spacing sampled at frame centers; NaN where undefined."""
    out = np.full(len(frame_centers), np.nan)
    if len(positions) < 2:
        return out
    intervals = np.diff(positions)
    midpoints = (positions[:-1] + positions[1:]) / 2.0
    inside = (frame_centers >= positions[0]) & (frame_centers <= positions[-1])
    out[inside] = np.interp(frame_centers[inside], midpoints, intervals)
    return out


def extract_f0(buffer: AudioBuffer, config: TrackerConfig | None = None) -> F0Contour:
    """Track f0 over ``buffer``, one frame per ``hop`` samples.

    Each candidate band is isolated with a brickwall FFT filter between
    half the floor frequency and the band cutoff. A frame is voiced when
    the best band's four interval estimates agree to within the
    reliability threshold (their coefficient of variation) and the frame
    is louder than a fixed noise floor.
    """
    if config is None:
        config = TrackerConfig()
    config.validate()
    sr = buffer.sample_rate
    if config.f0_ceil >= sr / 2:
        raise ValueError("f0_ceil must sit below the Nyquist frequency")
    x = buffer.samples
    n_frames = len(x) // config.hop
    if n_frames < 2:
        raise ValueError("buffer too short to frame (need at least two hops)")

    frame_centers = (np.arange(n_frames) + 0.5) * config.hop
    spectrum = np.fft.rfft(x)
    freqs = np.fft.rfftfreq(len(x), d=1.0 / sr)

    cutoffs = _band_cutoffs(config)
    best_cv = np.full(n_frames, np.inf)
    best_f0 = np.zeros(n_frames)
    for cutoff in cutoffs:
        shaped = np.where((freqs >= config.f0_floor / 2) & (freqs <= cutoff), spectrum, 0)
        band = np.fft.irfft(shaped, n=len(x))
        estimates = np.vstack(
            [
                sr / _interval_track(pos, frame_centers)
                for pos in _event_positions(band)
            ]
        )
        with np.errstate(invalid="ignore"):
            mean = estimates.mean(axis=0)
            cv = estimates.std(axis=0) / mean
        valid = (
            np.isfinite(cv)
            & (mean >= config.f0_floor)
            & (mean <= config.f0_ceil)
        )
        better = valid & (cv < best_cv)
        best_cv[better] = cv[better]
        best_f0[better] = mean[better]

    frame_rms = np.sqrt(
        (x[: n_frames * config.hop] ** 2).reshape(n_frames, config.hop).mean(axis=1)
    )
    voiced = (
        (best_cv <= config.voicing_reliability_threshold)
        & (frame_rms > _NOISE_FLOOR_RMS)
    )
    f0 = np.where(voiced, best_f0, 0.0)
    return F0Contour(f0_hz=f0, voiced=voiced, frame_rate=sr / config.hop)


def interpolate_unvoiced(contour: F0Contour) -> F0Contour:
    """Fill unvoiced gaps by linear interpolation in log frequency.

    Leading and trailing unvoiced frames take the nearest voiced value.
    Voiced frames pass through untouched and the flags are preserved, so
    the operation is idempotent.
    """
    voiced_idx = np.nonzero(contour.voiced)[0]
    if len(voiced_idx) == 0:
        raise ValueError("cannot interpolate a contour with no voiced frames")
    log_f0 = np.log(contour.f0_hz[voiced_idx])
    filled = np.exp(np.interp(np.arange(len(contour)), voiced_idx, log_f0))
    filled[voiced_idx] = contour.f0_hz[voiced_idx]
    return F0Contour(f0_hz=filled, voiced=contour.voiced.copy(), frame_rate=contour.frame_rate)

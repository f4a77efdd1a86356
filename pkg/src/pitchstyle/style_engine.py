"""Band-level contour editing: split, rescale, recombine.

Contours are taken to log frequency, split into a slow melody band and
a fast residual band with the Haar transform, and put back together
with a per-frame gain on the fast band. A gain of zero flattens the
residual (removing vibrato), values above one exaggerate it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import wavelet
from .pitch_tracker import interpolate_unvoiced
from .signal_io import F0Contour

__all__ = [
    "StyleBands",
    "ScalingSpec",
    "VibratoParams",
    "decompose",
    "recompose",
    "shift_pitch_range",
    "mean_f0",
    "synth_vibrato",
    "remove_vibrato",
]

_LN2 = math.log(2.0)


@dataclass
class StyleBands:
    """Log-frequency band pair; ``low + high`` restores the log contour."""

    low: np.ndarray
    high: np.ndarray
    voiced: np.ndarray
    frame_rate: float
    levels: int

    def __len__(self) -> int:
        return len(self.low)


@dataclass
class ScalingSpec:
    """High-band gain: one global factor, optionally overridden per frame.

    When ``frame_factors`` is given it must cover every frame and takes
    precedence over ``global_factor``. Factors must be finite and
    non-negative.
    """

    global_factor: float = 1.0
    frame_factors: np.ndarray | None = None

    def __post_init__(self):
        if not np.isfinite(self.global_factor) or self.global_factor < 0:
            raise ValueError("global_factor must be finite and non-negative")
        if self.frame_factors is not None:
            self.frame_factors = np.asarray(self.frame_factors, dtype=float)
            if self.frame_factors.ndim != 1:
                raise ValueError("frame_factors must be one-dimensional")
            if not np.all(np.isfinite(self.frame_factors)) or np.any(self.frame_factors < 0):
                raise ValueError("frame factors must be finite and non-negative")

    def per_frame(self, n_frames: int) -> np.ndarray:
        if self.frame_factors is None:
            return np.full(n_frames, self.global_factor)
        if len(self.frame_factors) != n_frames:
            raise ValueError(
                f"frame_factors has length {len(self.frame_factors)}, expected {n_frames}"
            )
        return self.frame_factors


@dataclass
class VibratoParams:
    """Synthetic vibrato: rate in Hz, peak extent in cents, linear onset
    ramp lasting ``onset_delay`` seconds, initial phase in radians."""

    rate: float = 6.0
    extent: float = 50.0
    onset_delay: float = 0.0
    phase: float = 0.0

    def __post_init__(self):
        if self.rate <= 0:
            raise ValueError("vibrato rate must be positive")
        if self.extent < 0:
            raise ValueError("vibrato extent must be non-negative")
        if self.onset_delay < 0:
            raise ValueError("onset_delay must be non-negative")


def decompose(contour: F0Contour, levels: int = 4) -> StyleBands:
    """Split a contour into melody and residual log-frequency bands.

    Unvoiced gaps are log-interpolated first so the transform sees a
    continuous signal; the voicing flags ride along unchanged.
    """
    if len(contour) < 2 ** levels:
        raise ValueError(
            f"contour has {len(contour)} frames, need at least {2 ** levels} "
            f"for {levels} levels"
        )
    filled = interpolate_unvoiced(contour)
    log_f0 = np.log(filled.f0_hz)
    dec = wavelet.dwt(log_f0, levels)
    return StyleBands(
        low=wavelet.reconstruct_band(dec, "low"),
        high=wavelet.reconstruct_band(dec, "high"),
        voiced=contour.voiced.copy(),
        frame_rate=contour.frame_rate,
        levels=levels,
    )


def recompose(bands: StyleBands, scaling: ScalingSpec | None = None) -> F0Contour:
    """Rebuild a contour with the high band scaled per ``scaling``.

    Unvoiced frames come back with zero f0 and their flags intact.
    """
    if scaling is None:
        scaling = ScalingSpec()
    alpha = scaling.per_frame(len(bands))
    f0 = np.exp(bands.low + alpha * bands.high)
    f0[~bands.voiced] = 0.0
    return F0Contour(f0_hz=f0, voiced=bands.voiced.copy(), frame_rate=bands.frame_rate)


def mean_f0(contour: F0Contour) -> float:
    """Mean f0 over voiced frames."""
    if not np.any(contour.voiced):
        raise ValueError("contour has no voiced frames")
    return float(contour.f0_hz[contour.voiced].mean())


def shift_pitch_range(contour: F0Contour, src_mean: float, tgt_mean: float) -> F0Contour:
    """Scale voiced f0 by ``tgt_mean / src_mean``."""
    if src_mean <= 0 or tgt_mean <= 0:
        raise ValueError("pitch means must be positive")
    ratio = tgt_mean / src_mean
    f0 = contour.f0_hz.copy()
    f0[contour.voiced] *= ratio
    return F0Contour(f0_hz=f0, voiced=contour.voiced.copy(), frame_rate=contour.frame_rate)


def synth_vibrato(
    contour: F0Contour,
    params: VibratoParams,
    segment: tuple[int, int] | None = None,
) -> F0Contour:
    """Impose sinusoidal vibrato on a voiced frame range.

    The modulation is added in log frequency so the extent is symmetric
    in cents, and ramps up linearly over ``params.onset_delay`` seconds
    from the start of the segment.
    """
    n = len(contour)
    start, end = segment if segment is not None else (0, n)
    if not (0 <= start < end <= n):
        raise ValueError(f"segment ({start}, {end}) outside contour of {n} frames")
    if not np.all(contour.voiced[start:end]):
        raise ValueError("vibrato segment must be fully voiced")
    t = np.arange(end - start) / contour.frame_rate
    if params.onset_delay > 0:
        ramp = np.minimum(t / params.onset_delay, 1.0)
    else:
        ramp = np.ones_like(t)
    modulation = (
        (params.extent / 1200.0)
        * _LN2
        * ramp
        * np.sin(2 * np.pi * params.rate * t + params.phase)
    )
    f0 = contour.f0_hz.copy()
    f0[start:end] = np.exp(np.log(f0[start:end]) + modulation)
    return F0Contour(f0_hz=f0, voiced=contour.voiced.copy(), frame_rate=contour.frame_rate)


def remove_vibrato(contour: F0Contour, levels: int = 4) -> F0Contour:
    """Keep only the melody band: decompose, zero the high band, rebuild."""
    return recompose(decompose(contour, levels), ScalingSpec(global_factor=0.0))

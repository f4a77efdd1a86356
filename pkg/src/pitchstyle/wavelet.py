"""Multilevel orthonormal Haar transform for splitting contours into bands.

The analysis step halves the signal per level: approximation samples are
pairwise sums scaled by 1/sqrt(2), details are pairwise differences with
the same scale. Odd-length stages are extended by repeating the final
sample; the amount of padding is recorded per level so synthesis can
truncate back to the exact input length.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "WaveletDecomposition",
    "dwt",
    "idwt",
    "reconstruct_band",
    "band_edges",
]

_SQRT2 = math.sqrt(2.0)


@dataclass
class WaveletDecomposition:
    """Coefficients of a multilevel Haar analysis.

    ``details[0]`` is the finest level (level 1), ``details[-1]`` the
    coarsest. ``padding[j]`` is the number of repeated edge samples that
    were appended at analysis stage ``j + 1``; synthesis removes them
    again, so round trips restore ``original_length`` samples exactly.
    """

    levels: int
    approx: np.ndarray
    details: list[np.ndarray]
    original_length: int
    padding: tuple[int, ...]


def _analysis_stage(x: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]:
    pad = len(x) % 2
    if pad:
        x = np.concatenate([x, x[-1:]])
    even = x[0::2]
    odd = x[1::2]
    return (even + odd) / _SQRT2, (even - odd) / _SQRT2, pad


def _synthesis_stage(approx: np.ndarray, detail: np.ndarray, pad: int) -> np.ndarray:
    out = np.empty(2 * len(approx))
    out[0::2] = (approx + detail) / _SQRT2
    out[1::2] = (approx - detail) / _SQRT2
    if pad:
        out = out[:-pad]
    return out


def dwt(x, levels: int) -> WaveletDecomposition:
    """Run ``levels`` stages of the orthonormal Haar analysis on ``x``.

    Requires ``len(x) >= 2 ** levels`` so every stage has at least one
    coefficient pair to work with.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("dwt expects a one-dimensional signal")
    if levels < 1:
        raise ValueError("levels must be >= 1")
    if len(x) < 2 ** levels:
        raise ValueError(
            f"signal of length {len(x)} is too short for {levels} levels "
            f"(need at least {2 ** levels} samples)"
        )
    if not np.all(np.isfinite(x)):
        raise ValueError("dwt input contains non-finite samples")

    original_length = len(x)
    details: list[np.ndarray] = []
    padding: list[int] = []
    approx = x
    for _ in range(levels):
        approx, detail, pad = _analysis_stage(approx)
        details.append(detail)
        padding.append(pad)
    return WaveletDecomposition(
        levels=levels,
        approx=approx,
        details=details,
        original_length=original_length,
        padding=tuple(padding),
    )


def _expected_lengths(dec: WaveletDecomposition) -> list[int]:
    # Length of the signal entering each analysis stage, finest first.
    n = dec.original_length
    lengths = []
    for pad in dec.padding:
        lengths.append(n)
        n = (n + pad) // 2
    lengths.append(n)
    return lengths


def idwt(dec: WaveletDecomposition) -> np.ndarray:
    """Invert :func:`dwt`, restoring the original sample count."""
    if dec.levels != len(dec.details) or dec.levels != len(dec.padding):
        raise ValueError("decomposition levels disagree with coefficient arrays")
    lengths = _expected_lengths(dec)
    if len(dec.approx) != lengths[-1]:
        raise ValueError(
            f"approximation has length {len(dec.approx)}, expected {lengths[-1]}"
        )
    for j, detail in enumerate(dec.details):
        want = lengths[j + 1]
        if len(detail) != want:
            raise ValueError(
                f"detail level {j + 1} has length {len(detail)}, expected {want}"
            )

    x = np.asarray(dec.approx, dtype=float)
    for j in range(dec.levels - 1, -1, -1):
        x = _synthesis_stage(x, np.asarray(dec.details[j], dtype=float), dec.padding[j])
    return x


def reconstruct_band(dec: WaveletDecomposition, band: str) -> np.ndarray:
    """Reconstruct only the low (approximation) or high (detail) band.

    The two bands sum to the full reconstruction, so ``low + high``
    reproduces the analysed signal.
    """
    if band == "low":
        kept = WaveletDecomposition(
            levels=dec.levels,
            approx=dec.approx,
            details=[np.zeros_like(d) for d in dec.details],
            original_length=dec.original_length,
            padding=dec.padding,
        )
    elif band == "high":
        kept = WaveletDecomposition(
            levels=dec.levels,
            approx=np.zeros_like(dec.approx),
            details=list(dec.details),
            original_length=dec.original_length,
            padding=dec.padding,
        )
    else:
        raise ValueError(f"unknown band {band!r}, expected 'low' or 'high'")
    return idwt(kept)


def band_edges(frame_rate: float, levels: int) -> tuple[tuple[float, float], list[tuple[float, float]]]:
    """Nominal frequency ranges covered by the coefficients.

    Returns ``(approx_range, detail_ranges)`` where ``detail_ranges[j]``
    belongs to detail level ``j + 1``. The approximation spans from zero
    up to ``frame_rate / 2 ** (levels + 1)``.
    """
    if frame_rate <= 0:
        raise ValueError("frame_rate must be positive")
    if levels < 1:
        raise ValueError("levels must be >= 1")
    approx = (0.0, frame_rate / 2 ** (levels + 1))
    details = [
        (frame_rate / 2 ** (j + 1), frame_rate / 2 ** j)
        for j in range(1, levels + 1)
    ]
    return approx, details

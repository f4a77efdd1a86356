"""WAV audio and pitch contour file IO.

Audio comes in and goes out as RIFF/WAVE: readable files are PCM 16-bit
or IEEE float 32-bit with one or two channels, written files are always
PCM 16-bit mono. Contours travel as JSON or CSV with enough digits to
round trip float64 values.
"""
from __future__ import annotations

import csv
import io
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "AudioBuffer",
    "F0Contour",
    "WavFormatError",
    "ContourFormatError",
    "read_wav",
    "write_wav",
    "read_contour",
    "write_contour",
]

_FORMAT_PCM = 1
_FORMAT_IEEE_FLOAT = 3


class WavFormatError(ValueError):
    """A WAV file could not be parsed or uses an unsupported encoding."""


class ContourFormatError(ValueError):
    """A contour file violates the JSON or CSV schema."""


@dataclass
class AudioBuffer:
    """Mono audio, float64 samples nominally in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim != 1:
            raise ValueError("AudioBuffer samples must be one-dimensional")
        if int(self.sample_rate) <= 0:
            raise ValueError("sample_rate must be positive")
        self.sample_rate = int(self.sample_rate)
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("AudioBuffer samples must be finite")

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass
class F0Contour:
    """Frame-rate pitch track: f0 in Hz plus a voicing flag per frame.

    Serialized contours keep f0 at 0 for unvoiced frames. In-memory
    contours may carry interpolated values through unvoiced gaps; the
    flags stay authoritative either way.
    """

    f0_hz: np.ndarray
    voiced: np.ndarray
    frame_rate: float

    def __post_init__(self):
        self.f0_hz = np.asarray(self.f0_hz, dtype=float)
        self.voiced = np.asarray(self.voiced, dtype=bool)
        if self.f0_hz.ndim != 1 or self.voiced.ndim != 1:
            raise ValueError("contour arrays must be one-dimensional")
        if len(self.f0_hz) != len(self.voiced):
            raise ValueError("f0 and voicing arrays differ in length")
        if float(self.frame_rate) <= 0:
            raise ValueError("frame_rate must be positive")
        self.frame_rate = float(self.frame_rate)
        if not np.all(np.isfinite(self.f0_hz)):
            raise ValueError("f0 values must be finite")
        if np.any(self.f0_hz < 0):
            raise ValueError("f0 values must be non-negative")
        if np.any(self.f0_hz[self.voiced] <= 0):
            raise ValueError("voiced frames must carry positive f0")

    def __len__(self) -> int:
        return len(self.f0_hz)


# ---------------------------------------------------------------------------
# WAV


def _read_exact(f, n: int, what: str) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise WavFormatError(f"truncated WAV file while reading {what}")
    return data


def read_wav(path) -> AudioBuffer:
    """Load a RIFF/WAVE file.

    Accepts PCM 16-bit and IEEE float 32-bit data with one or two
    channels; stereo is downmixed by averaging. 16-bit samples are
    scaled by 1/32768.
    """
    with open(path, "rb") as f:
        header = f.read(12)
        if len(header) < 12:
            raise WavFormatError("file too short to hold a RIFF header")
        magic, _size, wave = struct.unpack("<4sI4s", header)
        if magic == b"RIFX":
            raise WavFormatError("big-endian RIFX files are not supported")
        if magic != b"RIFF" or wave != b"WAVE":
            raise WavFormatError("not a RIFF/WAVE file (bad magic)")

        fmt = None
        data = None
        while True:
            chunk_header = f.read(8)
            if len(chunk_header) == 0:
                break
            if len(chunk_header) < 8:
                raise WavFormatError("truncated chunk header")
            chunk_id, chunk_size = struct.unpack("<4sI", chunk_header)
            if chunk_id == b"fmt ":
                body = _read_exact(f, chunk_size, "fmt chunk")
                if chunk_size < 16:
                    raise WavFormatError("fmt chunk too small")
                fmt = struct.unpack("<HHIIHH", body[:16])
            elif chunk_id == b"data":
                data = _read_exact(f, chunk_size, "sample data")
            else:
                f.seek(chunk_size, io.SEEK_CUR)
            if chunk_size % 2:
                f.seek(1, io.SEEK_CUR)

    if fmt is None:
        raise WavFormatError("missing fmt chunk")
    if data is None:
        raise WavFormatError("missing data chunk")

    audio_format, channels, sample_rate, _byte_rate, _block_align, bits = fmt
    if channels not in (1, 2):
        raise WavFormatError(f"unsupported channel count {channels}")

    if audio_format == _FORMAT_PCM:
        if bits != 16:
            raise WavFormatError(f"unsupported PCM bit depth {bits}")
        raw = np.frombuffer(data, dtype="<i2")
        samples = raw.astype(float) / 32768.0
    elif audio_format == _FORMAT_IEEE_FLOAT:
        if bits != 32:
            raise WavFormatError(f"unsupported float bit depth {bits}")
        samples = np.frombuffer(data, dtype="<f4").astype(float)
    else:
        raise WavFormatError(f"unsupported codec (format tag {audio_format})")

    if channels == 2:
        if len(samples) % 2:
            raise WavFormatError("stereo data chunk holds an odd sample count")
        samples = samples.reshape(-1, 2).mean(axis=1)
    if not np.all(np.isfinite(samples)):
        raise WavFormatError("sample data contains non-finite values")
    return AudioBuffer(samples=samples, sample_rate=sample_rate)


def write_wav(path, buffer: AudioBuffer) -> None:
    """Write mono PCM 16-bit. Samples are clamped to [-1, 1] first."""
    clipped = np.clip(buffer.samples, -1.0, 1.0)
    quantized = np.clip(np.round(clipped * 32768.0), -32768, 32767).astype("<i2")
    payload = quantized.tobytes()
    sr = buffer.sample_rate
    with open(path, "wb") as f:
        f.write(struct.pack("<4sI4s", b"RIFF", 36 + len(payload), b"WAVE"))
        f.write(struct.pack("<4sI", b"fmt ", 16))
        f.write(struct.pack("<HHIIHH", _FORMAT_PCM, 1, sr, sr * 2, 2, 16))
        f.write(struct.pack("<4sI", b"data", len(payload)))
        f.write(payload)
        if len(payload) % 2:
            f.write(b"\x00")


# ---------------------------------------------------------------------------
# Contours


def _check_serializable(contour: F0Contour) -> None:
    unvoiced = ~contour.voiced
    if np.any(contour.f0_hz[unvoiced] != 0.0):
        raise ContourFormatError(
            "cannot serialize a contour whose unvoiced frames carry nonzero f0"
        )


def write_contour(path, contour: F0Contour, fmt: str | None = None) -> None:
    """Serialize a contour to JSON or CSV.

    ``fmt`` may be "json" or "csv"; when omitted it is taken from the
    file extension. Values are written with full float64 precision.
    """
    path = Path(path)
    if fmt is None:
        fmt = path.suffix.lstrip(".").lower() or "json"
    _check_serializable(contour)
    if fmt == "json":
        doc = {
            "frame_rate": contour.frame_rate,
            "frames": [
                {"f0": float(f), "voiced": bool(v)}
                for f, v in zip(contour.f0_hz, contour.voiced)
            ],
        }
        with open(path, "w") as f:
            json.dump(doc, f)
            f.write("\n")
    elif fmt == "csv":
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["index", "f0", "voiced"])
            writer.writerow(["frame_rate", repr(contour.frame_rate), ""])
            for i, (f0, v) in enumerate(zip(contour.f0_hz, contour.voiced)):
                writer.writerow([i, repr(float(f0)), int(v)])
    else:
        raise ContourFormatError(f"unknown contour format {fmt!r}")


def _contour_from_json(text: str, where: str) -> F0Contour:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ContourFormatError(f"{where}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ContourFormatError(f"{where}: top level must be an object")
    if "frame_rate" not in doc or "frames" not in doc:
        raise ContourFormatError(f"{where}: missing frame_rate or frames")
    frames = doc["frames"]
    if not isinstance(frames, list):
        raise ContourFormatError(f"{where}: frames must be a list")
    f0 = np.empty(len(frames))
    voiced = np.empty(len(frames), dtype=bool)
    for i, frame in enumerate(frames):
        if not isinstance(frame, dict) or "f0" not in frame or "voiced" not in frame:
            raise ContourFormatError(f"{where}: frame {i} missing f0 or voiced")
        if not isinstance(frame["voiced"], bool):
            raise ContourFormatError(f"{where}: frame {i} voiced flag must be boolean")
        try:
            f0[i] = float(frame["f0"])
        except (TypeError, ValueError) as exc:
            raise ContourFormatError(f"{where}: frame {i} has non-numeric f0") from exc
        voiced[i] = frame["voiced"]
    try:
        return F0Contour(f0_hz=f0, voiced=voiced, frame_rate=float(doc["frame_rate"]))
    except (TypeError, ValueError) as exc:
        raise ContourFormatError(f"{where}: {exc}") from exc


def _contour_from_csv(text: str, where: str) -> F0Contour:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0][:3] != ["index", "f0", "voiced"]:
        raise ContourFormatError(f"{where}: missing index,f0,voiced header")
    frame_rate = None
    f0: list[float] = []
    voiced: list[bool] = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if row[0] == "frame_rate":
            frame_rate = float(row[1])
            continue
        if len(row) < 3:
            raise ContourFormatError(f"{where}: row {lineno} has too few columns")
        try:
            index = int(row[0])
            f0.append(float(row[1]))
            voiced.append(bool(int(row[2])))
        except ValueError as exc:
            raise ContourFormatError(f"{where}: row {lineno} is malformed ({exc})") from exc
        if index != len(f0) - 1:
            raise ContourFormatError(f"{where}: row {lineno} has index {index}, expected {len(f0) - 1}")
    if frame_rate is None:
        raise ContourFormatError(f"{where}: missing frame_rate row")
    try:
        return F0Contour(f0_hz=np.array(f0), voiced=np.array(voiced, dtype=bool), frame_rate=frame_rate)
    except (TypeError, ValueError) as exc:
        raise ContourFormatError(f"{where}: {exc}") from exc


def read_contour(path) -> F0Contour:
    """Load a contour written by :func:`write_contour`.

    The format is sniffed from the content, so any extension works.
    """
    path = Path(path)
    text = path.read_text()
    if text.lstrip().startswith("{"):
        return _contour_from_json(text, str(path))
    return _contour_from_csv(text, str(path))

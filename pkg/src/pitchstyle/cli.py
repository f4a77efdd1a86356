"""Command line surface plus the synthetic corpus and demo synthesizer.

Subcommands cover the whole pipeline: extract f0 from audio, split and
rescale bands, detect vibrato, edit contours, generate the labeled
synthetic corpus, train and apply the style converter, evaluate, and
render contours back to audio. Exit codes: 0 on success, 2 for usage
errors, 1 for processing errors.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import converter_model, vibrato_analysis
from .pitch_tracker import TrackerConfig, extract_f0, interpolate_unvoiced
from .signal_io import AudioBuffer, F0Contour, read_contour, read_wav, write_contour, write_wav
from .style_engine import (
    ScalingSpec,
    VibratoParams,
    decompose,
    mean_f0,
    recompose,
    remove_vibrato,
    shift_pitch_range,
    synth_vibrato,
)

__all__ = ["CorpusSpec", "gen_corpus", "synth_demo", "evaluate", "main", "entrypoint"]

_LN2 = math.log(2.0)

# 24 kHz audio framed every 256 samples.
FRAME_RATE = 24000 / 256


@dataclass
class CorpusSpec:
    items: int = 200
    base_pitch_range: tuple[float, float] = (110.0, 440.0)
    note_count_range: tuple[int, int] = (3, 6)
    vibrato_fraction: float = 0.5
    rate_range: tuple[float, float] = (5.0, 8.0)
    extent_range: tuple[float, float] = (30.0, 120.0)
    jitter_cents_rms: float = 3.0
    seed: int = 0

    def validate(self) -> None:
        if self.items < 1:
            raise ValueError("corpus needs at least one item")
        for name in ("base_pitch_range", "note_count_range", "rate_range", "extent_range"):
            low, high = getattr(self, name)
            if not (low <= high):
                raise ValueError(f"{name} must be ordered (low <= high)")
        if self.base_pitch_range[0] <= 0:
            raise ValueError("base pitches must be positive")
        if self.note_count_range[0] < 1:
            raise ValueError("need at least one note per item")
        if not 0.0 <= self.vibrato_fraction <= 1.0:
            raise ValueError("vibrato_fraction must lie in [0, 1]")
        if self.jitter_cents_rms < 0:
            raise ValueError("jitter_cents_rms must be non-negative")


def _snap_rate(raw: float, rate_range: tuple[float, float], frame_rate: float) -> float:
    # Vibrato rates are snapped to multiples of frame_rate / 32 so the
    # oscillation repeats exactly across the converter's window grid;
    # with the default range this is 5.859 Hz. Rates that cannot be
    # snapped inside the range are left as drawn.
    grid = frame_rate / 32.0
    k = round(raw / grid)
    while k * grid > rate_range[1] and k > 1:
        k -= 1
    while k * grid < rate_range[0]:
        k += 1
    snapped = k * grid
    if rate_range[0] <= snapped <= rate_range[1]:
        return snapped
    return raw


def _render_item(rng: np.random.Generator, spec: CorpusSpec, label: str):
    """One synthetic melody, returned as (styled, source) contour pair."""
    fr = FRAME_RATE
    margin = round(0.1 * fr)
    glide = round(0.1 * fr)
    count = int(rng.integers(spec.note_count_range[0], spec.note_count_range[1] + 1))
    durations = rng.uniform(0.8, 1.4, count)
    log_lo, log_hi = math.log(spec.base_pitch_range[0]), math.log(spec.base_pitch_range[1])
    # Notes move in singable intervals; octave-scale leaps would dump
    # glide energy into the residual band and drown the vibrato.
    max_step = 350.0 / 1200.0 * _LN2
    log_pitches = np.empty(count)
    log_pitches[0] = float(rng.uniform(log_lo, log_hi))
    for k in range(1, count):
        nxt = log_pitches[k - 1] + float(rng.uniform(-max_step, max_step))
        if nxt > log_hi:
            nxt = 2 * log_hi - nxt
        elif nxt < log_lo:
            nxt = 2 * log_lo - nxt
        log_pitches[k] = nxt

    pieces = []
    note_segments = []
    pos = margin
    for k in range(count):
        n_k = max(8, round(durations[k] * fr))
        pieces.append(np.full(n_k, log_pitches[k]))
        note_segments.append((pos, pos + n_k))
        pos += n_k
        if k < count - 1:
            ramp = np.linspace(log_pitches[k], log_pitches[k + 1], glide + 2)[1:-1]
            pieces.append(ramp)
            pos += glide
    log_mel = np.concatenate(pieces)
    total = margin + len(log_mel) + margin
    voiced = np.zeros(total, dtype=bool)
    voiced[margin : margin + len(log_mel)] = True

    jitter = rng.normal(0.0, spec.jitter_cents_rms / 1200.0 * _LN2, len(log_mel))
    f0 = np.zeros(total)
    f0[voiced] = np.exp(log_mel + jitter)
    source = F0Contour(f0_hz=f0, voiced=voiced, frame_rate=fr)

    if label != "vibrato":
        return source, source, None, None

    rate = float(_snap_rate(float(rng.uniform(*spec.rate_range)), spec.rate_range, fr))
    extent = float(rng.uniform(*spec.extent_range))
    delay = float(rng.uniform(0.08, 0.16))
    styled = source
    for start, end in note_segments:
        # Phase chosen so the oscillation is continuous in absolute time
        # across notes, like a single oscillator running through the take.
        phase = (2 * np.pi * rate * start / fr) % (2 * np.pi)
        styled = synth_vibrato(
            styled,
            VibratoParams(rate=rate, extent=extent, onset_delay=delay, phase=phase),
            (start, end),
        )
    return styled, source, rate, extent


def gen_corpus(spec: CorpusSpec, out_dir) -> dict:
    """Generate the labeled contour corpus and its manifest.

    Items are deterministic per seed: identical specs produce identical
    files. Exactly ``round(items * vibrato_fraction)`` items carry
    vibrato; each of those also gets a vibrato-free twin file so the
    converter can train on aligned (source, styled) pairs.
    """
    spec.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)
    n_vibrato = round(spec.items * spec.vibrato_fraction)
    items = []
    for i in range(spec.items):
        label = "vibrato" if i < n_vibrato else "straight"
        styled, source, rate, extent = _render_item(rng, spec, label)
        name = f"item_{i:03d}.json"
        write_contour(out / name, styled)
        if styled is source:
            source_name = name
        else:
            source_name = f"item_{i:03d}_source.json"
            write_contour(out / source_name, source)
        items.append(
            {
                "id": f"item_{i:03d}",
                "path": name,
                "source_path": source_name,
                "label": label,
                "rate": rate,
                "extent_cents": extent,
            }
        )
    manifest = {"frame_rate": FRAME_RATE, "spec": asdict(spec), "items": items}
    with open(out / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return manifest


def load_corpus(corpus_dir):
    """Read a corpus manifest and its contours.

    Returns (manifest, entries) where each entry is a dict with the
    manifest fields plus loaded ``contour`` and ``source`` objects.
    """
    root = Path(corpus_dir)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise ValueError(f"no manifest.json under {corpus_dir}")
    manifest = json.loads(manifest_path.read_text())
    entries = []
    cache: dict[str, F0Contour] = {}

    def load(name: str) -> F0Contour:
        if name not in cache:
            cache[name] = read_contour(root / name)
        return cache[name]

    for item in manifest["items"]:
        entry = dict(item)
        entry["contour"] = load(item["path"])
        entry["source"] = load(item["source_path"])
        entries.append(entry)
    return manifest, entries


# ---------------------------------------------------------------------------
# Demo synthesizer


def synth_demo(contour: F0Contour, path, partials: int = 8, sample_rate: int = 24000) -> None:
    """Render a contour as additive harmonics and write a mono WAV.

    Phase accumulates per sample so pitch changes stay click free;
    voicing boundaries get 10 ms fades. Harmonics are weighted 1/k and
    partials that would cross Nyquist are dropped.
    """
    if partials < 1:
        raise ValueError("need at least one partial")
    hop = int(round(sample_rate / contour.frame_rate))
    if hop < 1:
        raise ValueError("frame_rate too high for this sample rate")
    n_samples = len(contour) * hop
    if not np.any(contour.voiced):
        write_wav(path, AudioBuffer(samples=np.zeros(n_samples), sample_rate=sample_rate))
        return

    filled = interpolate_unvoiced(contour)
    centers = (np.arange(len(contour)) + 0.5) * hop
    sample_pos = np.arange(n_samples)
    f0 = np.interp(sample_pos, centers, filled.f0_hz)

    frame_of_sample = np.minimum(sample_pos // hop, len(contour) - 1)
    gate = contour.voiced[frame_of_sample].astype(float)
    fade = max(1, int(round(0.010 * sample_rate)))
    kernel = np.ones(fade) / fade
    envelope = np.convolve(gate, kernel, mode="same")

    phase = 2 * np.pi * np.cumsum(f0) / sample_rate
    max_f0 = float(f0.max())
    x = np.zeros(n_samples)
    used = 0.0
    for k in range(1, partials + 1):
        if k * max_f0 >= sample_rate / 2:
            break
        x += np.sin(k * phase) / k
        used += 1.0 / k
    if used == 0.0:
        raise ValueError("fundamental already exceeds Nyquist")
    x *= 0.8 / used
    write_wav(path, AudioBuffer(samples=x * envelope, sample_rate=sample_rate))


# ---------------------------------------------------------------------------
# Evaluation harness


def _capture_probe(levels: int, n_frames: int = 1024, rate: float = 5.0, extent: float = 50.0):
    t = np.arange(n_frames) / FRAME_RATE
    modulation = (extent / 1200.0) * _LN2 * np.sin(2 * np.pi * rate * t)
    f0 = np.exp(math.log(220.0) + modulation)
    contour = F0Contour(f0_hz=f0, voiced=np.ones(n_frames, dtype=bool), frame_rate=FRAME_RATE)
    return vibrato_analysis.level_energy_capture(contour, levels, modulation)


def evaluate(corpus_dir, alphas=(0.1, 0.3, 0.5, 0.7, 1.0, 2.0), levels: int = 4) -> dict:
    """Detector metrics over a generated corpus.

    ``style_accuracy`` scores the detector against the manifest labels.
    ``per_alpha_accuracy`` rescales the residual band of every vibrato
    item by each factor and reports the fraction still classified as
    vibrato. ``level_capture`` probes how much of a 5 Hz modulation the
    residual band retains at decomposition levels 3, 4 and 5.
    """
    _manifest, entries = load_corpus(corpus_dir)
    labeled = [(e["contour"], e["label"]) for e in entries]
    accuracy = vibrato_analysis.style_accuracy(labeled, levels=levels)

    per_alpha: dict[str, float] = {}
    vibrato_entries = [e for e in entries if e["label"] == "vibrato"]
    decomposed = [decompose(e["contour"], levels) for e in vibrato_entries]
    for alpha in alphas:
        if vibrato_entries:
            hits = 0
            for bands in decomposed:
                scaled = recompose(bands, ScalingSpec(global_factor=alpha))
                result = vibrato_analysis.estimate(scaled, levels=levels)
                hits += int(result.label == "vibrato")
            per_alpha[str(alpha)] = hits / len(vibrato_entries)
        else:
            per_alpha[str(alpha)] = 0.0

    capture = {str(lv): _capture_probe(lv) for lv in (3, 4, 5)}
    return {
        "style_accuracy": accuracy,
        "per_alpha_accuracy": per_alpha,
        "level_capture": capture,
    }


# ---------------------------------------------------------------------------
# Subcommand handlers


def _tracker_config(args) -> TrackerConfig:
    return TrackerConfig(
        f0_floor=args.floor,
        f0_ceil=args.ceil,
        hop=args.hop,
        channels_per_octave=args.channels_per_octave,
        voicing_reliability_threshold=args.threshold,
    )


def _cmd_extract(args) -> int:
    buffer = read_wav(args.audio)
    contour = extract_f0(buffer, _tracker_config(args))
    write_contour(args.output, contour, fmt=args.format)
    return 0


def _cmd_decompose(args) -> int:
    bands = decompose(read_contour(args.contour), levels=args.levels)
    doc = {
        "frame_rate": bands.frame_rate,
        "levels": bands.levels,
        "low": bands.low.tolist(),
        "high": bands.high.tolist(),
        "voiced": bands.voiced.astype(int).tolist(),
    }
    with open(args.output, "w") as f:
        json.dump(doc, f)
        f.write("\n")
    return 0


def _parse_frame_range(text: str, n_frames: int, default_factor: float):
    parts = text.split(":")
    if len(parts) not in (2, 3):
        raise ValueError(f"bad --frames value {text!r}, expected start:end[:factor]")
    try:
        start, end = int(parts[0]), int(parts[1])
        factor = float(parts[2]) if len(parts) == 3 else default_factor
    except ValueError as exc:
        raise ValueError(f"bad --frames value {text!r}: {exc}") from exc
    if not (0 <= start < end <= n_frames):
        raise ValueError(f"--frames range {text!r} outside contour of {n_frames} frames")
    return start, end, factor


def _cmd_scale(args) -> int:
    contour = read_contour(args.contour)
    bands = decompose(contour, levels=args.levels)
    if args.frames:
        # Ranges get scaled (by their own factor, or --factor); frames
        # outside every range keep the band untouched.
        factors = np.ones(len(contour))
        for text in args.frames:
            start, end, factor = _parse_frame_range(text, len(contour), args.factor)
            factors[start:end] = factor
        spec = ScalingSpec(global_factor=args.factor, frame_factors=factors)
    else:
        spec = ScalingSpec(global_factor=args.factor)
    write_contour(args.output, recompose(bands, spec))
    return 0


def _cmd_detect(args) -> int:
    contour = read_contour(args.contour)
    window = None
    if args.start is not None or args.end is not None:
        if args.start is None or args.end is None:
            raise ValueError("--start and --end must be given together")
        window = (args.start, args.end)
    result = vibrato_analysis.estimate(contour, levels=args.levels, window=window)
    print(json.dumps(result.to_dict(), indent=2))
    return 0


def _cmd_remove_vibrato(args) -> int:
    write_contour(args.output, remove_vibrato(read_contour(args.contour), levels=args.levels))
    return 0


def _cmd_add_vibrato(args) -> int:
    contour = read_contour(args.contour)
    segment = None
    if args.start is not None or args.end is not None:
        segment = (args.start or 0, args.end if args.end is not None else len(contour))
    params = VibratoParams(
        rate=args.rate, extent=args.extent, onset_delay=args.delay, phase=args.phase
    )
    write_contour(args.output, synth_vibrato(contour, params, segment))
    return 0


def _cmd_shift_range(args) -> int:
    contour = read_contour(args.contour)
    src = args.src_mean if args.src_mean is not None else mean_f0(contour)
    write_contour(args.output, shift_pitch_range(contour, src, args.tgt_mean))
    return 0


def _cmd_convert(args) -> int:
    model = converter_model.load_model(args.model)
    contour = read_contour(args.contour)
    converted = converter_model.convert_style(model, contour, args.style, levels=args.levels)
    write_contour(args.output, converted)
    return 0


def _cmd_gen_corpus(args) -> int:
    spec = CorpusSpec(
        items=args.items,
        base_pitch_range=tuple(args.base_pitch),
        note_count_range=tuple(args.notes),
        vibrato_fraction=args.vibrato_fraction,
        rate_range=tuple(args.rate_range),
        extent_range=tuple(args.extent_range),
        jitter_cents_rms=args.jitter,
        seed=args.seed,
    )
    manifest = gen_corpus(spec, args.out)
    print(f"wrote {len(manifest['items'])} items to {args.out}")
    return 0


def _cmd_train(args) -> int:
    _manifest, entries = load_corpus(args.corpus)
    pairs = [(e["contour"], e["source"], e["label"]) for e in entries]
    dataset = converter_model.build_window_dataset(pairs, levels=args.levels, window=args.window)
    model = converter_model.initialize(
        window=args.window,
        hidden_sizes=tuple(args.hidden),
        style_dim=args.style_dim,
        seed=args.seed,
    )
    config = converter_model.TrainConfig(
        learning_rate=args.lr, steps=args.steps, batch_size=args.batch, seed=args.seed
    )
    model, history = converter_model.train(model, dataset, config)
    converter_model.save_model(args.output, model)
    print(
        f"trained on {len(dataset)} windows: initial loss {history[0]:.6f}, "
        f"final loss {history[-1]:.6f}"
    )
    return 0


def _cmd_eval(args) -> int:
    alphas = tuple(float(a) for a in args.alphas.split(","))
    report = evaluate(args.corpus, alphas=alphas, levels=args.levels)
    text = json.dumps(report, indent=2)
    if args.output:
        Path(args.output).write_text(text + "\n")
    else:
        print(text)
    return 0


def _cmd_synth(args) -> int:
    synth_demo(
        read_contour(args.contour), args.output,
        partials=args.partials, sample_rate=args.sample_rate,
    )
    return 0


# ---------------------------------------------------------------------------
# Parser


def _add_levels(p) -> None:
    p.add_argument("--levels", type=int, default=4, help="decomposition depth (default 4)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pitchstyle",
        description="Pitch contour style processing: band splitting, vibrato analysis and conversion.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="track f0 from a WAV file")
    p.add_argument("audio")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--hop", type=int, default=256)
    p.add_argument("--floor", type=float, default=60.0)
    p.add_argument("--ceil", type=float, default=1000.0)
    p.add_argument("--channels-per-octave", type=int, default=2)
    p.add_argument("--threshold", type=float, default=0.15)
    p.add_argument("--format", choices=("json", "csv"), default=None)
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("decompose", help="split a contour into low/high bands")
    p.add_argument("contour")
    p.add_argument("-o", "--output", required=True)
    _add_levels(p)
    p.set_defaults(func=_cmd_decompose)

    p = sub.add_parser("scale", help="rescale the residual band")
    p.add_argument("contour")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--factor", type=float, default=1.0)
    p.add_argument(
        "--frames",
        action="append",
        metavar="START:END[:FACTOR]",
        help="scale only this frame range (repeatable); FACTOR defaults to --factor",
    )
    _add_levels(p)
    p.set_defaults(func=_cmd_scale)

    p = sub.add_parser("detect", help="estimate vibrato rate/extent and label a contour")
    p.add_argument("contour")
    p.add_argument("--start", type=int, default=None)
    p.add_argument("--end", type=int, default=None)
    _add_levels(p)
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("remove-vibrato", help="keep only the melody band")
    p.add_argument("contour")
    p.add_argument("-o", "--output", required=True)
    _add_levels(p)
    p.set_defaults(func=_cmd_remove_vibrato)

    p = sub.add_parser("add-vibrato", help="impose sinusoidal vibrato")
    p.add_argument("contour")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--rate", type=float, default=6.0)
    p.add_argument("--extent", type=float, default=50.0)
    p.add_argument("--delay", type=float, default=0.0)
    p.add_argument("--phase", type=float, default=0.0)
    p.add_argument("--start", type=int, default=None)
    p.add_argument("--end", type=int, default=None)
    p.set_defaults(func=_cmd_add_vibrato)

    p = sub.add_parser("shift-range", help="move the contour to a new mean pitch")
    p.add_argument("contour")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--tgt-mean", type=float, required=True)
    p.add_argument("--src-mean", type=float, default=None, help="defaults to the measured mean")
    p.set_defaults(func=_cmd_shift_range)

    p = sub.add_parser("convert", help="re-render a contour in another style")
    p.add_argument("model")
    p.add_argument("contour")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--style", choices=converter_model.STYLES, required=True)
    _add_levels(p)
    p.set_defaults(func=_cmd_convert)

    p = sub.add_parser("gen-corpus", help="generate the labeled synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--items", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--vibrato-fraction", type=float, default=0.5)
    p.add_argument("--base-pitch", type=float, nargs=2, default=(110.0, 440.0))
    p.add_argument("--notes", type=int, nargs=2, default=(3, 6))
    p.add_argument("--rate-range", type=float, nargs=2, default=(5.0, 8.0))
    p.add_argument("--extent-range", type=float, nargs=2, default=(30.0, 120.0))
    p.add_argument("--jitter", type=float, default=3.0)
    p.set_defaults(func=_cmd_gen_corpus)

    p = sub.add_parser("train", help="train the style converter on a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--window", type=int, default=64)
    p.add_argument("--hidden", type=int, nargs="+", default=(128, 128))
    p.add_argument("--style-dim", type=int, default=16)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--steps", type=int, default=20000)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    _add_levels(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="score the detector over a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--alphas", default="0.1,0.3,0.5,0.7,1.0,2.0")
    p.add_argument("-o", "--output", default=None)
    _add_levels(p)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("synth", help="render a contour to a WAV file")
    p.add_argument("contour")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--partials", type=int, default=8)
    p.add_argument("--sample-rate", type=int, default=24000)
    p.set_defaults(func=_cmd_synth)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()

"""Pitch contour style processing.

Splits singing f0 contours into a melody band and a residual band with
an orthonormal Haar transform, measures and manipulates vibrato in the
residual, and converts between straight and vibrato styles with a small
gradient-trained predictor.
"""
from .signal_io import (
    AudioBuffer,
    ContourFormatError,
    F0Contour,
    WavFormatError,
    read_contour,
    read_wav,
    write_contour,
    write_wav,
)
from .pitch_tracker import TrackerConfig, extract_f0, interpolate_unvoiced
from .wavelet import WaveletDecomposition, band_edges, dwt, idwt, reconstruct_band
from .style_engine import (
    ScalingSpec,
    StyleBands,
    VibratoParams,
    decompose,
    mean_f0,
    recompose,
    remove_vibrato,
    shift_pitch_range,
    synth_vibrato,
)
from .vibrato_analysis import (
    DetectorConfig,
    VibratoEstimate,
    estimate,
    level_energy_capture,
    style_accuracy,
)
from .converter_model import (
    STYLES,
    ConverterModel,
    TrainConfig,
    WindowBatch,
    build_window_dataset,
    convert_style,
    forward,
    grad_check,
    initialize,
    load_model,
    save_model,
    train,
)
from .cli import CorpusSpec, evaluate, gen_corpus, synth_demo

__version__ = "0.1.0"

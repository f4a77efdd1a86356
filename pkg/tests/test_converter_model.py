import numpy as np
import pytest

from pitchstyle.converter_model import (
    STYLES,
    TrainConfig,
    WindowBatch,
    build_window_dataset,
    convert_style,
    forward,
    grad_check,
    initialize,
    load_model,
    loss,
    save_model,
    style_index,
    train,
)
from pitchstyle.signal_io import F0Contour
from pitchstyle.style_engine import VibratoParams, remove_vibrato, synth_vibrato

FR = 93.75


def _toy_pairs(n_items=6, n=160, seed=0):
    rng = np.random.default_rng(seed)
    pairs = []
    for i in range(n_items):
        f0 = float(rng.uniform(180, 300))
        flat = F0Contour(f0_hz=np.full(n, f0), voiced=np.ones(n, bool), frame_rate=FR)
        if i % 2 == 0:
            styled = synth_vibrato(flat, VibratoParams(rate=5.859375, extent=60.0))
            pairs.append((styled, flat, "vibrato"))
        else:
            pairs.append((flat, flat, "straight"))
    return pairs


def _zeroed(model):
    for w, b in model.layers:
        w[:] = 0.0
        b[:] = 0.0
    model.style_vectors[:] = 0.0
    return model


def test_styles_and_index():
    assert STYLES == ("straight", "vibrato")
    assert style_index("straight") == 0
    assert style_index("vibrato") == 1
    with pytest.raises(ValueError, match="unknown style"):
        style_index("wobbly")


def test_initialize_shapes():
    model = initialize()
    assert model.window == 64
    assert [w.shape for w, _ in model.layers] == [(144, 128), (128, 128), (128, 64)]
    assert all(np.all(b == 0.0) for _, b in model.layers)
    assert model.style_vectors.shape == (2, 16)
    w0 = model.layers[0][0]
    # melody and flag pathways start disconnected
    assert np.all(w0[:128, :] == 0.0)
    assert np.any(w0[128:, :] != 0.0)


def test_initialize_deterministic():
    a, b = initialize(seed=5), initialize(seed=5)
    for (wa, ba), (wb, bb) in zip(a.layers, b.layers):
        assert np.array_equal(wa, wb)
        assert np.array_equal(ba, bb)
    assert np.array_equal(a.style_vectors, b.style_vectors)
    c = initialize(seed=6)
    assert not np.array_equal(a.style_vectors, c.style_vectors)


def test_initialize_validation():
    with pytest.raises(ValueError):
        initialize(window=1)
    with pytest.raises(ValueError):
        initialize(style_dim=0)
    with pytest.raises(ValueError):
        initialize(hidden_sizes=())


def test_forward_zero_model_outputs_bias():
    model = _zeroed(initialize(window=8, hidden_sizes=(4,), style_dim=2))
    out = forward(model, np.ones(8), np.ones(8), "vibrato")
    assert np.array_equal(out, np.zeros(8))
    model.layers[-1][1][:] = 0.25
    out = forward(model, np.ones(8), np.ones(8), "vibrato")
    assert np.array_equal(out, np.full(8, 0.25))


def test_forward_is_deterministic_and_checks_shapes():
    model = initialize(window=8, hidden_sizes=(4,), style_dim=2, seed=3)
    low, flags = np.linspace(-1, 1, 8), np.ones(8)
    assert np.array_equal(
        forward(model, low, flags, "straight"), forward(model, low, flags, "straight")
    )
    with pytest.raises(ValueError, match="shape"):
        forward(model, np.zeros(7), flags, "straight")
    with pytest.raises(ValueError, match="shape"):
        forward(model, low, np.zeros(9), "straight")
    with pytest.raises(ValueError, match="unknown style"):
        forward(model, low, flags, "breathy")


def test_loss_of_zero_model_is_mean_abs_target():
    w = 64
    t = np.arange(w)
    targets = 0.02 * np.sin(2 * np.pi * 4 * t / w)[None, :].repeat(6, axis=0)
    batch = WindowBatch(
        low=np.zeros((6, w)), flags=np.ones((6, w)),
        style_ids=np.zeros(6, int), targets=targets,
    )
    model = _zeroed(initialize(window=w, hidden_sizes=(4,), style_dim=2))
    value = loss(model, batch)
    assert value == np.abs(targets).mean()
    # full sinusoid periods: mean magnitude sits near 2/pi of the peak
    assert value == pytest.approx(0.02 * 2 / np.pi, rel=0.02)


def test_loss_is_permutation_invariant():
    ds = build_window_dataset(_toy_pairs())
    model = initialize(window=64, hidden_sizes=(16,), style_dim=4, seed=2)
    perm = np.random.default_rng(0).permutation(len(ds))
    assert loss(model, ds) == pytest.approx(loss(model, ds.take(perm)), rel=1e-12)


def test_empty_batch_rejected():
    w = 8
    empty = WindowBatch(
        low=np.zeros((0, w)), flags=np.zeros((0, w)),
        style_ids=np.zeros(0, int), targets=np.zeros((0, w)),
    )
    model = initialize(window=w, hidden_sizes=(4,), style_dim=2)
    with pytest.raises(ValueError, match="empty"):
        loss(model, empty)
    with pytest.raises(ValueError, match="empty"):
        grad_check(model, empty)


def test_window_batch_validates_shapes():
    with pytest.raises(ValueError, match="shapes"):
        WindowBatch(
            low=np.zeros((2, 8)), flags=np.zeros((2, 7)),
            style_ids=np.zeros(2, int), targets=np.zeros((2, 8)),
        )
    with pytest.raises(ValueError, match="shapes"):
        WindowBatch(
            low=np.zeros((2, 8)), flags=np.zeros((2, 8)),
            style_ids=np.zeros(3, int), targets=np.zeros((2, 8)),
        )


def test_build_window_dataset_grid_and_labels():
    ds = build_window_dataset(_toy_pairs(n_items=2), window=64, hop=32)
    # (160 - 64) // 32 + 1 windows per item
    assert len(ds) == 8
    assert np.array_equal(np.unique(ds.style_ids), [0, 1])
    # low inputs are mean-centered per window
    assert np.abs(ds.low.mean(axis=1)).max() < 1e-12
    # straight items target a silent residual, vibrato items do not
    straight_energy = np.abs(ds.targets[ds.style_ids == 0]).max()
    vibrato_energy = np.abs(ds.targets[ds.style_ids == 1]).max()
    assert straight_energy < 1e-9
    assert vibrato_energy > 0.01
    denser = build_window_dataset(_toy_pairs(n_items=2), window=64, hop=16)
    assert len(denser) == 14


def test_build_window_dataset_errors():
    flat = F0Contour(f0_hz=np.full(160, 220.0), voiced=np.ones(160, bool), frame_rate=FR)
    short = F0Contour(f0_hz=np.full(159, 220.0), voiced=np.ones(159, bool), frame_rate=FR)
    with pytest.raises(ValueError, match="differ in length"):
        build_window_dataset([(flat, short, "straight")])
    tiny = F0Contour(f0_hz=np.full(32, 220.0), voiced=np.ones(32, bool), frame_rate=FR)
    with pytest.raises(ValueError, match="no training windows"):
        build_window_dataset([(tiny, tiny, "straight")], window=64)


def test_take_selects_rows():
    ds = build_window_dataset(_toy_pairs(n_items=2))
    sub = ds.take([0, 2])
    assert len(sub) == 2
    assert np.array_equal(sub.low[1], ds.low[2])


def test_grad_check_matches_backprop():
    ds = build_window_dataset(_toy_pairs())
    model = initialize(window=64, hidden_sizes=(32,), style_dim=8, seed=1)
    sample = ds.take(np.arange(12))
    assert grad_check(model, sample, coords=60) < 1e-4


def test_grad_check_error_grows_in_roundoff_regime():
    ds = build_window_dataset(_toy_pairs())
    model = initialize(window=64, hidden_sizes=(32,), style_dim=8, seed=1)
    sample = ds.take(np.arange(12))
    coarse = grad_check(model, sample, epsilon=1e-4, coords=60)
    fine = grad_check(model, sample, epsilon=1e-6, coords=60)
    assert fine > coarse


def test_train_zero_learning_rate_is_identity():
    ds = build_window_dataset(_toy_pairs())
    model = initialize(window=64, hidden_sizes=(16,), style_dim=4, seed=2)
    trained, history = train(model, ds, TrainConfig(learning_rate=0.0, steps=50, batch_size=8))
    for (w0, b0), (w1, b1) in zip(model.layers, trained.layers):
        assert np.array_equal(w0, w1)
        assert np.array_equal(b0, b1)
    assert np.array_equal(model.style_vectors, trained.style_vectors)


def test_train_is_deterministic_and_leaves_input_untouched():
    ds = build_window_dataset(_toy_pairs())
    model = initialize(window=64, hidden_sizes=(16,), style_dim=4, seed=2)
    snapshot = [(w.copy(), b.copy()) for w, b in model.layers]
    cfg = TrainConfig(learning_rate=1e-3, steps=300, batch_size=16, seed=9)
    t1, h1 = train(model, ds, cfg)
    t2, h2 = train(model, ds, cfg)
    assert h1 == h2
    for (wa, ba), (wb, bb) in zip(t1.layers, t2.layers):
        assert np.array_equal(wa, wb)
        assert np.array_equal(ba, bb)
    for (w0, b0), (ws, bs) in zip(model.layers, snapshot):
        assert np.array_equal(w0, ws)
        assert np.array_equal(b0, bs)


def test_train_reduces_loss_on_toy_corpus():
    ds = build_window_dataset(_toy_pairs())
    model = initialize(window=64, hidden_sizes=(32,), style_dim=8, seed=1)
    trained, history = train(
        model, ds, TrainConfig(learning_rate=1e-3, steps=800, batch_size=16, log_interval=100)
    )
    assert len(history) == 8
    assert history[-1] < 0.6 * history[0]
    assert loss(trained, ds) < loss(model, ds)


def test_train_config_and_dataset_validation():
    ds = build_window_dataset(_toy_pairs(n_items=2))
    model = initialize(window=64, hidden_sizes=(8,), style_dim=2)
    with pytest.raises(ValueError, match="fewer than batch_size"):
        train(model, ds, TrainConfig(batch_size=100))
    with pytest.raises(ValueError):
        train(model, ds, TrainConfig(learning_rate=-1.0))
    with pytest.raises(ValueError):
        train(model, ds, TrainConfig(steps=0))
    with pytest.raises(ValueError):
        train(model, ds, TrainConfig(log_interval=0))


def test_train_aborts_when_loss_blows_up():
    ds = build_window_dataset(_toy_pairs())
    ds.targets[0, 0] = np.inf
    model = initialize(window=64, hidden_sizes=(8,), style_dim=2)
    with pytest.raises(RuntimeError, match="diverged"):
        train(model, ds, TrainConfig(steps=50, batch_size=len(ds)))


def test_save_load_round_trip(tmp_path):
    model = initialize(window=16, hidden_sizes=(8, 8), style_dim=4, seed=7)
    path = tmp_path / "model.npz"
    save_model(path, model)
    back = load_model(path)
    assert back.window == 16
    assert back.hidden_sizes == (8, 8)
    assert back.style_dim == 4
    assert back.seed == 7
    for (w0, b0), (w1, b1) in zip(model.layers, back.layers):
        assert np.array_equal(w0, w1)
        assert np.array_equal(b0, b1)
    assert np.array_equal(model.style_vectors, back.style_vectors)


def test_load_rejects_foreign_and_stale_files(tmp_path):
    alien = tmp_path / "alien.npz"
    np.savez(alien, data=np.zeros(3))
    with pytest.raises(ValueError, match="not a converter checkpoint"):
        load_model(alien)

    model = initialize(window=8, hidden_sizes=(4,), style_dim=2)
    path = tmp_path / "model.npz"
    save_model(path, model)
    with np.load(path) as archive:
        arrays = {k: archive[k] for k in archive.files}
    arrays["meta"] = np.frombuffer(
        b'{"version": -1, "window": 8, "hidden_sizes": [4], '
        b'"style_dim": 2, "seed": 0, "n_layers": 2}', dtype=np.uint8
    )
    np.savez(path, **arrays)
    with pytest.raises(ValueError, match="version mismatch"):
        load_model(path)


def test_convert_with_silent_predictor_flattens():
    vib = synth_vibrato(
        F0Contour(f0_hz=np.full(256, 220.0), voiced=np.ones(256, bool), frame_rate=FR),
        VibratoParams(rate=6.0, extent=50.0),
    )
    model = _zeroed(initialize())
    out = convert_style(model, vib, "straight")
    ref = remove_vibrato(vib)
    assert np.allclose(out.f0_hz, ref.f0_hz, rtol=1e-12)
    assert np.array_equal(out.voiced, vib.voiced)


def test_convert_rejects_short_contours():
    model = initialize()
    tiny = F0Contour(f0_hz=np.full(32, 220.0), voiced=np.ones(32, bool), frame_rate=FR)
    with pytest.raises(ValueError, match="need at least"):
        convert_style(model, tiny, "vibrato")

"""Shared fixtures: the synthetic corpus and one trained converter.

Corpus generation and converter training are the two expensive steps,
so both run once per session and every test that needs them reuses the
same artifacts.
"""
import time

import numpy as np
import pytest

from pitchstyle import converter_model
from pitchstyle.cli import CorpusSpec, gen_corpus, load_corpus


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    path = tmp_path_factory.mktemp("corpus")
    gen_corpus(CorpusSpec(), str(path))
    return str(path)


@pytest.fixture(scope="session")
def corpus_entries(corpus_dir):
    _, entries = load_corpus(corpus_dir)
    return entries


@pytest.fixture(scope="session")
def corpus_split(corpus_entries):
    """(train, held) item pairs, every fifth item held out."""
    train, held = [], []
    for i, entry in enumerate(corpus_entries):
        pair = (entry["contour"], entry["source"], entry["label"])
        (held if i % 5 == 4 else train).append(pair)
    return train, held


@pytest.fixture(scope="session")
def trained_converter(corpus_split):
    """Default-config training run plus its bookkeeping."""
    train_pairs, held_pairs = corpus_split
    dataset = converter_model.build_window_dataset(train_pairs)
    model = converter_model.initialize()
    stride = max(1, len(dataset) // 64)
    sample = dataset.take(np.arange(0, len(dataset), stride)[:64])
    grad_before = converter_model.grad_check(model, sample)
    started = time.perf_counter()
    trained, history = converter_model.train(model, dataset, converter_model.TrainConfig())
    train_seconds = time.perf_counter() - started
    grad_after = converter_model.grad_check(trained, sample)
    return {
        "model": trained,
        "history": history,
        "grad_before": grad_before,
        "grad_after": grad_after,
        "train_seconds": train_seconds,
        "dataset": dataset,
        "train_pairs": train_pairs,
        "held_pairs": held_pairs,
    }

"""Secondary acceptance suite: training, cross-component round trip, and
the deduplicated-versus-raw training comparison (run with -v -s for one
line per criterion).
"""

import time

import numpy as np
import torch
from torch import nn

from droidseq.model import forward, load_weights
from droidseq_trainer import (SyntheticCorpusSpec, TrainingConfig,
                              expand_with_repetition,
                              generate_synthetic_corpus, reference_vectors,
                              serialize_weights, train)


def _ok(name: str) -> None:
    print(f"ACCEPTANCE pass - {name}")


def test_s01_synthetic_training_reaches_95_percent():
    spec = SyntheticCorpusSpec(samples_per_class=1000, seed=0)
    corpus = generate_synthetic_corpus(spec)
    assert len(corpus) == 2000
    trained = train(corpus, TrainingConfig(max_len=24, epochs=3, seed=0))
    best = max(row["val_accuracy"] for row in trained.history)
    assert best >= 0.95
    assert len(trained.history) <= 10
    _ok(f"synthetic corpus (2000 samples): validation accuracy "
        f"{best:.2%} >= 95% within {len(trained.history)} epochs")


def test_s02_gradient_finite_difference_check():
    torch.manual_seed(1)
    cell = nn.LSTM(input_size=2, hidden_size=2).double()
    x = torch.randn(3, 1, 2, dtype=torch.float64)
    probe = torch.randn(3, 1, 2, dtype=torch.float64)

    def loss_value():
        out, _ = cell(x)
        return (out * probe).sum()

    loss_value().backward()
    step = 1e-6
    worst = 0.0
    for param in cell.parameters():
        flat = param.data.view(-1)
        grad = param.grad.view(-1)
        for i in range(flat.numel()):
            keep = float(flat[i])
            with torch.no_grad():
                flat[i] = keep + step
                up = float(loss_value())
                flat[i] = keep - step
                down = float(loss_value())
                flat[i] = keep
            numeric = (up - down) / (2 * step)
            analytic = float(grad[i])
            rel = abs(numeric - analytic) / max(1.0, abs(numeric), abs(analytic))
            worst = max(worst, rel)
    assert worst < 1e-4
    _ok(f"cell gradient vs central differences: max relative error "
        f"{worst:.2e} < 1e-4")


def test_s03_cross_component_round_trip(small_corpus, small_trained):
    weights = load_weights(serialize_weights(small_trained))   # no shape errors
    rng = np.random.default_rng(42)
    picks = rng.choice(len(small_corpus), size=25, replace=False)
    pairs = reference_vectors(small_trained,
                              [small_corpus[int(i)][1] for i in picks])
    worst = 0.0
    for ids, (l0, l1) in pairs:
        logits, _ = forward(ids, weights)
        worst = max(worst, abs(float(logits[0]) - l0), abs(float(logits[1]) - l1))
    assert worst < 1e-4
    _ok(f"exported weights load cleanly; engine matches {len(pairs)} "
        f"reference logits (max deviation {worst:.2e} < 1e-4)")


def test_s04_dedup_training_faster_with_matching_accuracy():
    spec = SyntheticCorpusSpec(samples_per_class=700, seed=2,
                               benign_length=(12, 12),
                               malicious_length=(12, 12))
    base = generate_synthetic_corpus(spec)
    rng = np.random.default_rng(2)
    raw = [(label, expand_with_repetition(
        ids, rng, 2.5, forbidden=() if label else spec.motifs))
        for label, ids in base]

    start = time.perf_counter()
    deduplicated = train(base, TrainingConfig(max_len=12, epochs=3, seed=3))
    dedup_time = time.perf_counter() - start
    raw_model = train(raw, TrainingConfig(max_len=30, epochs=3, seed=3))
    raw_time = time.perf_counter() - start - dedup_time

    acc_dedup = deduplicated.history[-1]["val_accuracy"]
    acc_raw = raw_model.history[-1]["val_accuracy"]
    assert dedup_time < raw_time
    assert abs(acc_dedup - acc_raw) <= 0.01
    _ok(f"dedup inputs at length 12 trained in {dedup_time:.1f}s vs "
        f"{raw_time:.1f}s for raw at 30; accuracies {acc_dedup:.2%} / "
        f"{acc_raw:.2%} within 1 point")

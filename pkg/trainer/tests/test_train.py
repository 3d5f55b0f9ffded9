import numpy as np
import pytest
import torch
from torch import nn

from droidseq_trainer import (DivergedError, SyntheticCorpusSpec,
                              TrainingConfig, TrainingError,
                              generate_synthetic_corpus, split_corpus, train)
from droidseq_trainer.train import pad_or_truncate


def tiny_corpus(per_class=40, length=8, seed=5):
    spec = SyntheticCorpusSpec(samples_per_class=per_class,
                               benign_length=(length, length),
                               malicious_length=(length, length), seed=seed)
    return generate_synthetic_corpus(spec), spec


class TestConfig:
    def test_split_must_sum_to_one(self):
        with pytest.raises(TrainingError):
            TrainingConfig(split=(0.5, 0.2, 0.2))

    def test_bad_length(self):
        with pytest.raises(TrainingError):
            TrainingConfig(max_len=0)


class TestSplit:
    def test_stratified_70_15_15(self):
        corpus, _ = tiny_corpus(per_class=100)
        train_set, val_set, test_set = split_corpus(corpus, (0.7, 0.15, 0.15), 0)
        assert len(train_set) == 140 and len(val_set) == 30 and len(test_set) == 30
        for part in (train_set, val_set, test_set):
            labels = [label for label, _ in part]
            assert labels.count(0) == labels.count(1)

    def test_deterministic_in_seed(self):
        corpus, _ = tiny_corpus()
        assert split_corpus(corpus, (0.7, 0.15, 0.15), 3) \
            == split_corpus(corpus, (0.7, 0.15, 0.15), 3)

    def test_disjoint_and_complete(self):
        corpus, _ = tiny_corpus()
        parts = split_corpus(corpus, (0.7, 0.15, 0.15), 1)
        merged = sorted(tuple(ids) for part in parts for _, ids in part)
        assert merged == sorted(tuple(ids) for _, ids in corpus)


class TestPad:
    def test_post_zero_padding(self):
        assert pad_or_truncate([3, 1], 5) == [3, 1, 0, 0, 0]

    def test_truncation(self):
        assert pad_or_truncate([3, 1, 4, 1, 5], 3) == [3, 1, 4]


class TestTrain:
    def test_zero_learning_rate_leaves_parameters_untouched(self):
        corpus, _ = tiny_corpus()
        cfg = TrainingConfig(max_len=8, epochs=1, learning_rate=0.0, seed=5)
        torch.manual_seed(cfg.seed)
        from droidseq_trainer.train import SequenceClassifier
        vocab = max(i for _, ids in corpus for i in ids) + 1
        reference = SequenceClassifier(vocab, cfg)
        initial = {k: v.clone() for k, v in reference.named_parameters()}

        trained = train(corpus, cfg)
        for name, param in trained.model.named_parameters():
            torch.testing.assert_close(param, initial[name], rtol=0, atol=0)

    def test_diverges_with_absurd_learning_rate(self):
        corpus, _ = tiny_corpus()
        with pytest.raises(DivergedError):
            train(corpus, TrainingConfig(max_len=8, epochs=4,
                                         learning_rate=1e12, seed=5))

    def test_history_reproducible_for_fixed_seed(self):
        corpus, _ = tiny_corpus(per_class=30)
        cfg = TrainingConfig(max_len=8, epochs=2, seed=9)
        first = train(corpus, cfg)
        second = train(corpus, cfg)
        assert first.history == second.history

    def test_empty_and_single_class_rejected(self):
        with pytest.raises(TrainingError):
            train([], TrainingConfig())
        with pytest.raises(TrainingError):
            train([(0, [1, 2])] * 10, TrainingConfig(max_len=4))

    def test_history_records_every_epoch(self):
        corpus, _ = tiny_corpus(per_class=30)
        trained = train(corpus, TrainingConfig(max_len=8, epochs=3, seed=2))
        assert [row["epoch"] for row in trained.history] == [1, 2, 3]
        assert all(0.0 <= row["val_accuracy"] <= 1.0 for row in trained.history)
        assert trained.test_accuracy is not None


class TestGradient:
    def test_cell_backprop_matches_central_differences(self):
        # 2-unit reduction of the recurrent cell, double precision
        torch.manual_seed(0)
        cell = nn.LSTM(input_size=2, hidden_size=2).double()
        x = torch.randn(3, 1, 2, dtype=torch.float64)
        probe = torch.randn(3, 1, 2, dtype=torch.float64)

        def loss_value():
            out, _ = cell(x)
            return (out * probe).sum()

        loss = loss_value()
        loss.backward()

        h = 1e-6
        worst = 0.0
        for param in cell.parameters():
            grad = param.grad
            flat = param.data.view(-1)
            for i in range(flat.numel()):
                keep = float(flat[i])
                with torch.no_grad():
                    flat[i] = keep + h
                    up = float(loss_value())
                    flat[i] = keep - h
                    down = float(loss_value())
                    flat[i] = keep
                numeric = (up - down) / (2 * h)
                analytic = float(grad.view(-1)[i])
                rel = abs(numeric - analytic) / max(1.0, abs(numeric), abs(analytic))
                worst = max(worst, rel)
        assert worst < 1e-4

"""Network definition and training loop.

The model is the classifier the scanner runs: embedding (128) ->
bidirectional LSTM (256 units per direction) -> batch normalization over
the 512 channels -> global max pooling over time -> dense 64 -> dense 32
-> 2 logits. Sequences are post-zero padded (or truncated) to the
configured input length; id 0 is the padding row and stays zero in the
embedding.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn


class TrainingError(Exception):
    pass


class DivergedError(TrainingError):
    """Training loss became NaN."""


@dataclass(frozen=True)
class TrainingConfig:
    max_len: int = 1700
    embedding_dim: int = 128
    lstm_units: int = 256
    bn_eps: float = 1e-3
    batch_size: int = 64
    learning_rate: float = 1e-3
    epochs: int = 10
    seed: int = 0
    split: tuple[float, float, float] = (0.70, 0.15, 0.15)

    def __post_init__(self):
        if abs(sum(self.split) - 1.0) > 1e-9:
            raise TrainingError(f"split ratios must sum to 1: {self.split}")
        if self.max_len < 1:
            raise TrainingError(f"max_len must be positive: {self.max_len}")


class SequenceClassifier(nn.Module):
    def __init__(self, vocab_size: int, cfg: TrainingConfig):
        super().__init__()
        self.embedding = nn.Embedding(vocab_size, cfg.embedding_dim, padding_idx=0)
        self.lstm = nn.LSTM(cfg.embedding_dim, cfg.lstm_units,
                            batch_first=True, bidirectional=True)
        self.norm = nn.BatchNorm1d(2 * cfg.lstm_units, eps=cfg.bn_eps)
        self.dense1 = nn.Linear(2 * cfg.lstm_units, 64)
        self.dense2 = nn.Linear(64, 32)
        self.dense3 = nn.Linear(32, 2)

    def forward(self, ids: torch.Tensor) -> torch.Tensor:      # [N, L] int64
        x = self.embedding(ids)                                 # [N, L, 128]
        y, _ = self.lstm(x)                                     # [N, L, 512]
        y = self.norm(y.transpose(1, 2)).transpose(1, 2)
        pooled = y.max(dim=1).values                            # [N, 512]
        a = torch.relu(self.dense1(pooled))
        a = torch.relu(self.dense2(a))
        return self.dense3(a)


@dataclass
class TrainedModel:
    model: SequenceClassifier
    config: TrainingConfig
    vocab_size: int
    history: list[dict] = field(default_factory=list)   # per-epoch accuracies
    test_accuracy: float | None = None


def pad_or_truncate(ids, max_len: int) -> list[int]:
    out = list(ids[:max_len])
    return out + [0] * (max_len - len(out))


def _to_tensors(samples, max_len):
    ids = torch.tensor([pad_or_truncate(s, max_len) for _, s in samples],
                       dtype=torch.int64)
    labels = torch.tensor([label for label, _ in samples], dtype=torch.int64)
    return ids, labels


def split_corpus(samples, split, seed):
    """Stratified 70/15/15-style split, deterministic in the seed."""
    rng = np.random.default_rng(seed)
    train, val, test = [], [], []
    for cls in sorted({label for label, _ in samples}):
        group = [s for s in samples if s[0] == cls]
        order = rng.permutation(len(group))
        n_train = int(round(split[0] * len(group)))
        n_val = int(round(split[1] * len(group)))
        for rank, idx in enumerate(order):
            if rank < n_train:
                train.append(group[idx])
            elif rank < n_train + n_val:
                val.append(group[idx])
            else:
                test.append(group[idx])
    return train, val, test


def _accuracy(model, ids, labels, batch_size) -> float:
    model.eval()
    hits = 0
    with torch.no_grad():
        for at in range(0, len(ids), batch_size):
            logits = model(ids[at:at + batch_size])
            hits += int((logits.argmax(dim=1) == labels[at:at + batch_size]).sum())
    return hits / len(ids)


def train(corpus, cfg: TrainingConfig) -> TrainedModel:
    """Train on a labeled corpus (list of (label, ids) or a corpus file's
    content read via corpus.read_corpus)."""
    if not corpus:
        raise TrainingError("corpus is empty")
    labels_present = {label for label, _ in corpus}
    if labels_present != {0, 1}:
        raise TrainingError(f"need both classes present, got {sorted(labels_present)}")

    torch.manual_seed(cfg.seed)
    vocab_size = max(i for _, ids in corpus for i in ids) + 1

    train_set, val_set, _test_set = split_corpus(corpus, cfg.split, cfg.seed)
    train_ids, train_labels = _to_tensors(train_set, cfg.max_len)
    val_ids, val_labels = _to_tensors(val_set, cfg.max_len)

    model = SequenceClassifier(vocab_size, cfg)
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)
    loss_fn = nn.CrossEntropyLoss()
    shuffler = torch.Generator().manual_seed(cfg.seed)

    trained = TrainedModel(model, cfg, vocab_size)
    for epoch in range(cfg.epochs):
        model.train()
        order = torch.randperm(len(train_ids), generator=shuffler)
        epoch_loss = 0.0
        for at in range(0, len(order), cfg.batch_size):
            batch = order[at:at + cfg.batch_size]
            optimizer.zero_grad()
            logits = model(train_ids[batch])
            loss = loss_fn(logits, train_labels[batch])
            if torch.isnan(loss):
                raise DivergedError(f"loss became NaN in epoch {epoch + 1}")
            loss.backward()
            optimizer.step()
            epoch_loss += float(loss.detach()) * len(batch)

        trained.history.append({
            "epoch": epoch + 1,
            "loss": epoch_loss / len(train_ids),
            "train_accuracy": _accuracy(model, train_ids, train_labels, cfg.batch_size),
            "val_accuracy": _accuracy(model, val_ids, val_labels, cfg.batch_size)
            if len(val_ids) else float("nan"),
        })

    if _test_set:
        test_ids, test_labels = _to_tensors(_test_set, cfg.max_len)
        trained.test_accuracy = _accuracy(model, test_ids, test_labels, cfg.batch_size)
    return trained

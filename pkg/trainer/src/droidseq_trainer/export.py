"""SQMW weight export and reference-vector emission.

The scanner's weight container is written directly from its documented
layout (little-endian; magic, version, named tensors, scalar trailer
with bn.eps, fixed-length word where 0 means dynamic). Gate blocks use
the i, f, g, o order; the two LSTM bias vectors are summed into the
single fused bias the inference cell adds once. Reference vectors give
the engine >= 20 (padded input ids, 32-bit logits) pairs to reproduce.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
import torch

from .train import TrainedModel, pad_or_truncate

_MAGIC = b"SQMW"
_VERSION = 1


def _tensors(trained: TrainedModel) -> dict[str, np.ndarray]:
    model = trained.model
    state = {k: v.detach().numpy() for k, v in model.state_dict().items()}
    return {
        "embedding": state["embedding.weight"],
        "lstm.fw.W_in": state["lstm.weight_ih_l0"].T,
        "lstm.fw.W_rec": state["lstm.weight_hh_l0"].T,
        "lstm.fw.bias": state["lstm.bias_ih_l0"] + state["lstm.bias_hh_l0"],
        "lstm.bw.W_in": state["lstm.weight_ih_l0_reverse"].T,
        "lstm.bw.W_rec": state["lstm.weight_hh_l0_reverse"].T,
        "lstm.bw.bias": state["lstm.bias_ih_l0_reverse"] + state["lstm.bias_hh_l0_reverse"],
        "bn.gamma": state["norm.weight"],
        "bn.beta": state["norm.bias"],
        "bn.mean": state["norm.running_mean"],
        "bn.var": state["norm.running_var"],
        "dense1.W": state["dense1.weight"].T,
        "dense1.b": state["dense1.bias"],
        "dense2.W": state["dense2.weight"].T,
        "dense2.b": state["dense2.bias"],
        "dense3.W": state["dense3.weight"].T,
        "dense3.b": state["dense3.bias"],
    }


def serialize_weights(trained: TrainedModel) -> bytes:
    parts = [_MAGIC]
    tensors = _tensors(trained)
    parts.append(struct.pack("<II", _VERSION, len(tensors)))
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(arr, dtype=np.float32)
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<H", len(encoded)) + encoded)
        parts.append(struct.pack("<BB", 0, arr.ndim))           # dtype 0: float32
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.tobytes())
    parts.append(struct.pack("<I", 1))                          # one scalar: bn.eps
    parts.append(struct.pack("<H", 6) + b"bn.eps")
    parts.append(struct.pack("<d", trained.config.bn_eps))
    parts.append(struct.pack("<I", 0))                          # 0: dynamic model
    return b"".join(parts)


def reference_vectors(trained: TrainedModel, inputs) -> list[tuple[list[int], tuple[float, float]]]:
    """32-bit logits for each input, padded to the training length."""
    model = trained.model
    model.eval()
    pairs = []
    with torch.no_grad():
        for ids in inputs:
            padded = pad_or_truncate(ids, trained.config.max_len)
            logits = model(torch.tensor([padded], dtype=torch.int64))[0]
            pairs.append((padded, (float(logits[0]), float(logits[1]))))
    return pairs


def format_reference_file(pairs) -> str:
    lines = [
        f"{' '.join(str(i) for i in ids)}\t|\t{l0:.9g} {l1:.9g}\n"
        for ids, (l0, l1) in pairs
    ]
    return "".join(lines)


def parse_reference_file(text: str) -> list[tuple[list[int], tuple[float, float]]]:
    pairs = []
    for line in text.splitlines():
        if not line.strip():
            continue
        ids_part, logits_part = line.split("\t|\t")
        ids = [int(p) for p in ids_part.split()]
        l0, l1 = (float(p) for p in logits_part.split())
        pairs.append((ids, (l0, l1)))
    return pairs


def export(trained: TrainedModel, weights_path: str | Path,
           reference_path: str | Path, reference_inputs) -> None:
    """Write the SQMW file and a reference-vector file (>= 20 pairs)."""
    if len(reference_inputs) < 20:
        raise ValueError(f"need at least 20 reference inputs, "
                         f"got {len(reference_inputs)}")
    Path(weights_path).write_bytes(serialize_weights(trained))
    pairs = reference_vectors(trained, reference_inputs)
    Path(reference_path).write_text(format_reference_file(pairs), encoding="utf-8")

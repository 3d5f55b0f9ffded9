"""Bi-LSTM classifier: weight container, forward pass, and prediction modes.

The network is embedding -> bidirectional LSTM (256 units per direction)
-> batch normalization -> global max pooling over time -> two ReLU dense
layers -> a 2-way softmax. Weights travel in the SQMW container (see
save_weights / load_weights); half-precision files are static: they carry
a fixed input length and refuse dynamic-length prediction.
"""

from __future__ import annotations

import enum
import struct
import time
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import expit

from .pipeline import DEFAULT_MAX_LEN, PAD_ID, EncodedSequence

EMBEDDING_DIM = 128
LSTM_UNITS = 256                       # per direction
BILSTM_WIDTH = 2 * LSTM_UNITS
GATE_WIDTH = 4 * LSTM_UNITS            # fused gate blocks, order i, f, g, o
DEFAULT_BN_EPS = 1e-3

FLOAT32 = "float32"
FLOAT16 = "float16"
_FLOAT16_MAX = 65504.0

_MAGIC = b"SQMW"
_VERSION = 1
_DTYPE_CODES = {FLOAT32: 0, FLOAT16: 1}
_DTYPE_NAMES = {0: FLOAT32, 1: FLOAT16}
_NUMPY_DTYPES = {FLOAT32: np.float32, FLOAT16: np.float16}


class ModelError(Exception):
    """Base class for weight-container and inference failures."""


class BadMagicError(ModelError):
    """Not an SQMW container (bad magic, version, or structure)."""


class MissingTensorError(ModelError):
    def __init__(self, name: str):
        super().__init__(f"required tensor missing: {name}")
        self.name = name


class ShapeMismatchError(ModelError):
    def __init__(self, name: str, expected, got):
        super().__init__(f"tensor {name}: expected shape {expected}, got {got}")
        self.name = name
        self.expected = tuple(expected)
        self.got = tuple(got)


class NanInWeightsError(ModelError):
    """A tensor contains NaN values."""


class IdOutOfRangeError(ModelError):
    """An input id is outside the embedding table."""


class ModeMismatchError(ModelError):
    """Prediction mode conflicts with the model's dynamic/static kind."""


class WeightOverflowError(ModelError):
    """A weight magnitude exceeds the half-precision range."""


class Verdict(enum.Enum):
    BENIGN = "benign"
    MALICIOUS = "malicious"


class PredictMode(enum.Enum):
    DYNAMIC = "dynamic"
    FIXED = "fixed"


# (tensor name, ModelWeights field, shape; None marks the free vocab dim)
_TENSOR_FIELDS: tuple[tuple[str, str, tuple[int | None, ...]], ...] = (
    ("embedding", "embedding", (None, EMBEDDING_DIM)),
    ("lstm.fw.W_in", "fw_w_in", (EMBEDDING_DIM, GATE_WIDTH)),
    ("lstm.fw.W_rec", "fw_w_rec", (LSTM_UNITS, GATE_WIDTH)),
    ("lstm.fw.bias", "fw_bias", (GATE_WIDTH,)),
    ("lstm.bw.W_in", "bw_w_in", (EMBEDDING_DIM, GATE_WIDTH)),
    ("lstm.bw.W_rec", "bw_w_rec", (LSTM_UNITS, GATE_WIDTH)),
    ("lstm.bw.bias", "bw_bias", (GATE_WIDTH,)),
    ("bn.gamma", "bn_gamma", (BILSTM_WIDTH,)),
    ("bn.beta", "bn_beta", (BILSTM_WIDTH,)),
    ("bn.mean", "bn_mean", (BILSTM_WIDTH,)),
    ("bn.var", "bn_var", (BILSTM_WIDTH,)),
    ("dense1.W", "dense1_w", (BILSTM_WIDTH, 64)),
    ("dense1.b", "dense1_b", (64,)),
    ("dense2.W", "dense2_w", (64, 32)),
    ("dense2.b", "dense2_b", (32,)),
    ("dense3.W", "dense3_w", (32, 2)),
    ("dense3.b", "dense3_b", (2,)),
)


@dataclass(frozen=True)
class ModelWeights:
    """All network parameters at 32-bit working precision.

    precision records the storage width the container uses; fixed_length
    is None for dynamic models and the mandatory input length for static
    (quantized) ones.
    """

    embedding: np.ndarray
    fw_w_in: np.ndarray
    fw_w_rec: np.ndarray
    fw_bias: np.ndarray
    bw_w_in: np.ndarray
    bw_w_rec: np.ndarray
    bw_bias: np.ndarray
    bn_gamma: np.ndarray
    bn_beta: np.ndarray
    bn_mean: np.ndarray
    bn_var: np.ndarray
    dense1_w: np.ndarray
    dense1_b: np.ndarray
    dense2_w: np.ndarray
    dense2_b: np.ndarray
    dense3_w: np.ndarray
    dense3_b: np.ndarray
    bn_eps: float = DEFAULT_BN_EPS
    precision: str = FLOAT32
    fixed_length: int | None = None

    @property
    def vocab_size(self) -> int:
        return int(self.embedding.shape[0])


@dataclass(frozen=True)
class PredictionResult:
    label: Verdict
    probabilities: tuple[float, float]     # (benign, malicious)
    seq_len_used: int
    elapsed: float                         # seconds, forward pass only
    logits: tuple[float, float]


def validate_weights(w: ModelWeights) -> None:
    for name, field_name, shape in _TENSOR_FIELDS:
        arr = getattr(w, field_name)
        if arr.ndim != len(shape) or any(
                want is not None and arr.shape[i] != want
                for i, want in enumerate(shape)):
            raise ShapeMismatchError(name, shape, arr.shape)
        if np.isnan(arr).any():
            raise NanInWeightsError(f"tensor {name} contains NaN")
    if w.embedding.shape[0] < 1:
        raise ShapeMismatchError("embedding", ("V>=1", EMBEDDING_DIM), w.embedding.shape)
    if (w.bn_var < 0).any():
        raise ModelError("bn.var has negative entries")
    if not w.bn_eps > 0:
        raise ModelError(f"bn.eps must be positive, got {w.bn_eps}")
    if w.precision not in _DTYPE_CODES:
        raise ModelError(f"unknown precision tag {w.precision!r}")
    if w.precision == FLOAT16 and w.fixed_length is None:
        raise ModelError("half-precision models are static: fixed_length required")
    if w.fixed_length is not None and w.fixed_length < 1:
        raise ModelError(f"fixed_length must be positive, got {w.fixed_length}")


def save_weights(w: ModelWeights) -> bytes:
    """Serialize to the SQMW container (little-endian).

    Layout: magic "SQMW", version u32, tensor count u32; per tensor a
    name_len u16, UTF-8 name, dtype u8 (0 = float32, 1 = float16), rank
    u8, dims u32 each, then the row-major payload. A trailer holds a
    scalar table (count u32, then name + float64 value each) carrying
    bn.eps, and a final u32 fixed length where 0 means dynamic.
    """
    validate_weights(w)
    dtype_code = _DTYPE_CODES[w.precision]
    np_dtype = _NUMPY_DTYPES[w.precision]

    parts = [_MAGIC, struct.pack("<II", _VERSION, len(_TENSOR_FIELDS))]
    for name, field_name, _ in _TENSOR_FIELDS:
        arr = np.ascontiguousarray(getattr(w, field_name), dtype=np_dtype)
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<H", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<BB", dtype_code, arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.tobytes())

    eps_name = b"bn.eps"
    parts.append(struct.pack("<I", 1))
    parts.append(struct.pack("<H", len(eps_name)))
    parts.append(eps_name)
    parts.append(struct.pack("<d", w.bn_eps))
    parts.append(struct.pack("<I", w.fixed_length or 0))
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.off = 0

    def take(self, n: int) -> bytes:
        if self.off + n > len(self.data):
            raise BadMagicError(
                f"container truncated at byte {self.off} (wanted {n} more)")
        out = self.data[self.off:self.off + n]
        self.off += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_weights(data: bytes) -> ModelWeights:
    """Parse an SQMW container; half-precision tensors are widened to
    32-bit working precision."""
    r = _Reader(data)
    if r.take(4) != _MAGIC:
        raise BadMagicError("not an SQMW container")
    version, tensor_count = r.unpack("<II")
    if version != _VERSION:
        raise BadMagicError(f"unsupported container version {version}")

    tensors: dict[str, np.ndarray] = {}
    any_f32 = False
    for _ in range(tensor_count):
        name_len, = r.unpack("<H")
        name = r.take(name_len).decode("utf-8")
        dtype_code, rank = r.unpack("<BB")
        if dtype_code not in _DTYPE_NAMES:
            raise BadMagicError(f"tensor {name}: unknown dtype code {dtype_code}")
        dims = r.unpack(f"<{rank}I")
        stored = np.dtype(_NUMPY_DTYPES[_DTYPE_NAMES[dtype_code]])
        count = int(np.prod(dims, dtype=np.int64)) if rank else 1
        payload = r.take(count * stored.itemsize)
        arr = np.frombuffer(payload, dtype=stored).reshape(dims)
        tensors[name] = arr.astype(np.float32)
        any_f32 = any_f32 or dtype_code == _DTYPE_CODES[FLOAT32]

    scalar_count, = r.unpack("<I")
    scalars: dict[str, float] = {}
    for _ in range(scalar_count):
        name_len, = r.unpack("<H")
        name = r.take(name_len).decode("utf-8")
        value, = r.unpack("<d")
        scalars[name] = value
    fixed_raw, = r.unpack("<I")

    fields: dict[str, np.ndarray] = {}
    for name, field_name, shape in _TENSOR_FIELDS:
        if name not in tensors:
            raise MissingTensorError(name)
        arr = tensors[name]
        if arr.ndim != len(shape) or any(
                want is not None and arr.shape[i] != want
                for i, want in enumerate(shape)):
            raise ShapeMismatchError(name, shape, arr.shape)
        fields[field_name] = arr

    w = ModelWeights(
        **fields,
        bn_eps=scalars.get("bn.eps", DEFAULT_BN_EPS),
        precision=FLOAT32 if any_f32 else FLOAT16,
        fixed_length=fixed_raw or None,
    )
    validate_weights(w)
    return w


def _cell(z: np.ndarray, c_prev: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    units = z.shape[-1] // 4
    i = expit(z[..., :units])
    f = expit(z[..., units:2 * units])
    g = np.tanh(z[..., 2 * units:3 * units])
    o = expit(z[..., 3 * units:])
    c = f * c_prev + i * g
    return o * np.tanh(c), c


def lstm_step(
    x: np.ndarray,
    h_prev: np.ndarray,
    c_prev: np.ndarray,
    w_in: np.ndarray,
    w_rec: np.ndarray,
    bias: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """One LSTM cell step.

    z = x @ W_in + h_prev @ W_rec + bias is split into four equal gate
    blocks (i, f, g, o); then c = sigmoid(i) * tanh(g) + sigmoid(f) * c_prev
    and h = sigmoid(o) * tanh(c).
    """
    return _cell(x @ w_in + h_prev @ w_rec + bias, c_prev)


def _run_direction(
    emb: np.ndarray, w_in: np.ndarray, w_rec: np.ndarray, bias: np.ndarray,
) -> np.ndarray:
    # Input projections for every timestep in one matmul; the recurrence
    # then costs a single matvec per step.
    xin = emb @ w_in
    steps, units = xin.shape[0], w_rec.shape[0]
    h = np.zeros(units, dtype=xin.dtype)
    c = np.zeros(units, dtype=xin.dtype)
    out = np.empty((steps, units), dtype=xin.dtype)
    for t in range(steps):
        h, c = _cell(xin[t] + h @ w_rec + bias, c)
        out[t] = h
    return out


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - np.max(logits)
    e = np.exp(shifted)
    return e / e.sum()


def forward(ids, w: ModelWeights) -> tuple[np.ndarray, np.ndarray]:
    """Run the full network on an id sequence; returns (logits, probabilities).

    The backward direction runs the same cell over the reversed sequence
    and its outputs are re-reversed before per-timestep concatenation with
    the forward outputs.
    """
    ids = np.asarray(ids, dtype=np.int64)
    if ids.ndim != 1 or ids.shape[0] < 1:
        raise ValueError("forward needs a non-empty 1-D id sequence")
    if (ids < 0).any() or (ids >= w.vocab_size).any():
        bad = ids[(ids < 0) | (ids >= w.vocab_size)][0]
        raise IdOutOfRangeError(f"id {bad} outside vocabulary of {w.vocab_size}")

    emb = w.embedding[ids]
    h_fw = _run_direction(emb, w.fw_w_in, w.fw_w_rec, w.fw_bias)
    h_bw = _run_direction(emb[::-1], w.bw_w_in, w.bw_w_rec, w.bw_bias)[::-1]
    y = np.concatenate([h_fw, h_bw], axis=1)

    y = w.bn_gamma * (y - w.bn_mean) / np.sqrt(w.bn_var + w.bn_eps) + w.bn_beta
    pooled = y.max(axis=0)

    a = np.maximum(pooled @ w.dense1_w + w.dense1_b, 0.0)
    a = np.maximum(a @ w.dense2_w + w.dense2_b, 0.0)
    logits = a @ w.dense3_w + w.dense3_b
    return logits, softmax(logits)


def predict(
    seq: EncodedSequence,
    w: ModelWeights,
    mode: PredictMode = PredictMode.DYNAMIC,
    max_len: int = DEFAULT_MAX_LEN,
) -> PredictionResult:
    """Classify an encoded sequence.

    DYNAMIC requires a dynamic model and runs on min(len, max_len)
    timesteps with no padding; FIXED requires a static model and post-pads
    with the padding id (or truncates) to exactly the model's fixed
    length. Elapsed time covers the forward pass only.
    """
    if mode is PredictMode.DYNAMIC:
        if w.fixed_length is not None:
            raise ModeMismatchError(
                "static (fixed-length) weights cannot run in DYNAMIC mode")
        ids = list(seq.ids[:max_len])
    else:
        if w.fixed_length is None:
            raise ModeMismatchError("FIXED mode needs static weights "
                                    "(no fixed_length in this model)")
        ids = list(seq.ids[:w.fixed_length])
        ids += [PAD_ID] * (w.fixed_length - len(ids))

    start = time.perf_counter()
    logits, probs = forward(ids, w)
    elapsed = time.perf_counter() - start

    label = Verdict.MALICIOUS if probs[1] >= probs[0] else Verdict.BENIGN
    return PredictionResult(
        label=label,
        probabilities=(float(probs[0]), float(probs[1])),
        seq_len_used=len(ids),
        elapsed=elapsed,
        logits=(float(logits[0]), float(logits[1])),
    )


def quantize_weights(w: ModelWeights, fixed_length: int) -> ModelWeights:
    """Produce a half-precision static copy of a dynamic 32-bit model.

    Storage drops to 16-bit IEEE-754 (working precision stays 32-bit, so
    in-memory tensors hold the rounded values); the result is static with
    the given mandatory input length.
    """
    if w.precision != FLOAT32 or w.fixed_length is not None:
        raise ModeMismatchError("only dynamic 32-bit models can be quantized")
    if fixed_length < 1:
        raise ValueError(f"fixed_length must be positive, got {fixed_length}")

    rounded: dict[str, np.ndarray] = {}
    for name, field_name, _ in _TENSOR_FIELDS:
        arr = getattr(w, field_name)
        peak = float(np.max(np.abs(arr))) if arr.size else 0.0
        if peak > _FLOAT16_MAX:
            raise WeightOverflowError(
                f"tensor {name}: magnitude {peak:g} exceeds half-precision "
                f"range {_FLOAT16_MAX:g}")
        rounded[field_name] = arr.astype(np.float16).astype(np.float32)

    return replace(w, **rounded, precision=FLOAT16, fixed_length=fixed_length)

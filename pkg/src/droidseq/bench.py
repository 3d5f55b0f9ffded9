"""Forward-pass latency benchmarking and the optimization-gain metric."""

from __future__ import annotations

from dataclasses import dataclass, replace
from collections.abc import Sequence

import numpy as np

from .model import ModelWeights, PredictMode, predict
from .pipeline import DEFAULT_MAX_LEN, EncodedSequence


class BenchError(Exception):
    pass


class ZeroBaselineError(BenchError):
    """performance_gain needs a positive baseline time."""


@dataclass(frozen=True)
class BenchRecord:
    scenario: str
    length: int
    trials: int
    mean_ms: float
    min_ms: float
    max_ms: float


def _time_scenario(
    weights: ModelWeights,
    scenario: str,
    length: int,
    trials: int,
    mode: PredictMode,
    rng: np.random.Generator,
) -> BenchRecord:
    vocab = weights.vocab_size
    times = []
    for _ in range(trials):
        ids = rng.integers(1, vocab, size=length) if vocab > 1 \
            else np.zeros(length, dtype=np.int64)
        seq = EncodedSequence(tuple(int(i) for i in ids), False, length)
        result = predict(seq, weights, mode, max_len=length)
        times.append(result.elapsed * 1e3)
    return BenchRecord(scenario, length, trials,
                       mean_ms=float(np.mean(times)),
                       min_ms=float(np.min(times)),
                       max_ms=float(np.max(times)))


def bench_predict(
    weights: ModelWeights,
    lengths: Sequence[int],
    trials: int,
    compare_fixed: bool = False,
    fixed_length: int = DEFAULT_MAX_LEN,
    seed: int | None = None,
) -> list[BenchRecord]:
    """Time predictions over random valid id sequences of each length.

    Runs DYNAMIC mode on the given (dynamic) weights; with compare_fixed,
    repeats every length in FIXED mode against a static copy of the same
    weights padded to fixed_length, mirroring the dynamic-versus-static
    trade-off.
    """
    if not lengths:
        raise ValueError("lengths must be non-empty")
    if any(n < 1 for n in lengths):
        raise ValueError(f"lengths must be positive, got {list(lengths)}")
    if trials < 3:
        raise ValueError(f"need at least 3 trials, got {trials}")

    rng = np.random.default_rng(seed)
    records = [
        _time_scenario(weights, "dynamic", n, trials, PredictMode.DYNAMIC, rng)
        for n in lengths
    ]
    if compare_fixed:
        static = replace(weights, fixed_length=fixed_length)
        records += [
            _time_scenario(static, "fixed", n, trials, PredictMode.FIXED, rng)
            for n in lengths
        ]
    return records


def performance_gain(t_optimized: float, t_baseline: float) -> float:
    """Relative speedup as a percentage: (1 - optimized/baseline) * 100.

    Negative values represent regressions.
    """
    if t_baseline <= 0:
        raise ZeroBaselineError(f"baseline must be positive, got {t_baseline}")
    return (1.0 - t_optimized / t_baseline) * 100.0


def format_csv(records: Sequence[BenchRecord]) -> str:
    lines = ["scenario,length,trials,mean_ms,min_ms,max_ms"]
    lines += [
        f"{r.scenario},{r.length},{r.trials},{r.mean_ms:.3f},{r.min_ms:.3f},{r.max_ms:.3f}"
        for r in records
    ]
    return "\n".join(lines) + "\n"

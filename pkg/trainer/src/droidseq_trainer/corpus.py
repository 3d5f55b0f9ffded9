"""Synthetic labeled corpora for the sequence classifier.

Both classes draw from the same id alphabet; what separates them is
order. A malicious sample contains at least one planted motif as an
ordered (not necessarily contiguous) subsequence; a benign sample
carries the same tokens — including every motif token, planted in
reverse — but never a full motif in order.

Base samples use distinct tokens, mirroring the scanner's input after
repetitive-element removal; expand_with_repetition produces the "raw"
counterpart whose de-duplication gives the base back exactly. Corpora
are written in the scanner's label-prefixed dump format: one sequence
per line, "<label> <id> <id> ...".
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


class CorpusError(Exception):
    pass


class MotifLargerThanLengthError(CorpusError):
    """A planted motif cannot fit into the sampled sequence length."""


@dataclass(frozen=True)
class SyntheticCorpusSpec:
    vocab_size: int = 50
    samples_per_class: int = 1000
    motifs: tuple[tuple[int, ...], ...] = ((5, 9, 2),)
    benign_length: tuple[int, int] = (10, 20)        # inclusive bounds
    malicious_length: tuple[int, int] = (10, 20)
    noise_rate: float = 0.0                          # extra-token insertion rate
    seed: int = 0

    def __post_init__(self):
        if self.vocab_size < 3:
            raise CorpusError("vocab_size must leave room for ids above the pad id")
        for motif in self.motifs:
            if not motif or any(not 0 < t < self.vocab_size for t in motif):
                raise CorpusError(
                    f"motif ids must lie in 1..{self.vocab_size - 1}: {motif}")
            if len(set(motif)) != len(motif) or len(motif) < 2:
                raise CorpusError(f"motifs need >= 2 distinct ids: {motif}")
            if len(motif) > self.malicious_length[0]:
                raise MotifLargerThanLengthError(
                    f"motif {motif} cannot fit the minimum malicious length "
                    f"{self.malicious_length[0]}")
        if self.benign_length[1] >= self.vocab_size \
                or self.malicious_length[1] >= self.vocab_size:
            raise CorpusError("distinct-token samples need lengths < vocab_size")


def contains_motif(seq, motif) -> bool:
    it = iter(seq)
    return all(any(x == m for x in it) for m in motif)


def _insert_noise(rng, seq, rate, vocab):
    if rate <= 0:
        return seq
    extra = int(rng.binomial(len(seq), rate))
    for _ in range(extra):
        at = int(rng.integers(0, len(seq) + 1))
        seq.insert(at, int(rng.integers(1, vocab)))
    return seq


def _base_sample(rng, spec: SyntheticCorpusSpec, bounds, planted) -> list[int]:
    """Distinct filler tokens with `planted` written onto random sorted
    positions, so only the planted order distinguishes the classes."""
    low, high = bounds
    length = int(rng.integers(low, high + 1))
    if len(planted) > length:
        raise MotifLargerThanLengthError(
            f"cannot place {len(planted)} motif tokens into length {length}")
    motif_tokens = {t for m in spec.motifs for t in m}
    filler = [t for t in range(1, spec.vocab_size) if t not in motif_tokens]
    seq = [int(t) for t in rng.choice(filler, size=length, replace=False)]
    positions = sorted(rng.choice(length, size=len(planted), replace=False))
    for pos, token in zip(positions, planted):
        seq[pos] = token
    return seq


def _pick_motif(rng, spec):
    return spec.motifs[int(rng.integers(0, len(spec.motifs)))]


def _benign_sample(rng, spec: SyntheticCorpusSpec) -> list[int]:
    motif = _pick_motif(rng, spec)
    for _ in range(100):
        seq = _base_sample(rng, spec, spec.benign_length, tuple(reversed(motif)))
        seq = _insert_noise(rng, seq, spec.noise_rate, spec.vocab_size)
        if not any(contains_motif(seq, m) for m in spec.motifs):
            return seq
    raise CorpusError("could not sample a benign sequence without the motif")


def _malicious_sample(rng, spec: SyntheticCorpusSpec) -> list[int]:
    seq = _base_sample(rng, spec, spec.malicious_length, _pick_motif(rng, spec))
    # noise insertions cannot break an ordered subsequence
    return _insert_noise(rng, seq, spec.noise_rate, spec.vocab_size)


def generate_synthetic_corpus(spec: SyntheticCorpusSpec) -> list[tuple[int, list[int]]]:
    """Labeled samples, benign (0) then malicious (1), deterministic in
    the spec's seed."""
    rng = np.random.default_rng(spec.seed)
    samples = [(0, _benign_sample(rng, spec)) for _ in range(spec.samples_per_class)]
    samples += [(1, _malicious_sample(rng, spec)) for _ in range(spec.samples_per_class)]
    return samples


def expand_with_repetition(seq: list[int], rng, ratio: float = 2.5,
                           forbidden=()) -> list[int]:
    """Lengthen a sequence to about ratio * len(seq) by re-inserting
    copies of elements after their first occurrence.

    For a duplicate-free input, first-occurrence de-duplication of the
    result gives the input back exactly. Expansions are redrawn if they
    would create one of the forbidden ordered motifs.
    """
    target = max(len(seq), int(round(len(seq) * ratio)))
    for _ in range(200):
        out = list(seq)
        while len(out) < target:
            src = int(rng.integers(0, len(out)))
            at = int(rng.integers(src + 1, len(out) + 1))
            out.insert(at, out[src])
        if not any(contains_motif(out, m) for m in forbidden):
            return out
    raise CorpusError("could not expand sequence without creating a motif")


def write_corpus(path: str | Path, samples) -> None:
    lines = [f"{label} {' '.join(str(i) for i in ids)}\n" for label, ids in samples]
    Path(path).write_text("".join(lines), encoding="utf-8")


def read_corpus(path: str | Path) -> list[tuple[int, list[int]]]:
    samples = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        parts = [int(p) for p in line.split()]
        samples.append((parts[0], parts[1:]))
    return samples

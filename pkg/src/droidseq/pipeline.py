"""Dictionaries, sequence assembly, de-duplication, and integer encoding.

The scan pipeline turns raw extracted tokens into the integer sequence the
classifier consumes: dictionary filtering, first-occurrence removal of
repeated elements, lookup-table encoding, and truncation or padding to the
model input length.
"""

from __future__ import annotations

import enum
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path

from .axml import ManifestFeatures
from .dex import RawToken, TokenKind

PAD_ID = 0
DEFAULT_MAX_LEN = 1700

# Fraction of a raw sequence that de-duplication removes, on average;
# used to estimate the raw length a deduplicated sequence came from.
REPETITIVE_PROPORTION = 0.6


class PipelineError(Exception):
    """Base class for feature-pipeline failures."""


class DuplicateEntryError(PipelineError):
    """A dictionary contains, or two dictionaries share, the same token."""


class UnknownTokenError(PipelineError):
    """A token reached the encoder without passing dictionary filtering."""


class DictKind(enum.Enum):
    PERMISSION = "PERMISSION"
    INTENT = "INTENT"
    API = "API"


class FitMode(enum.Enum):
    TRUNCATE_ONLY = "truncate"       # real-time scans: never pad
    PAD_AND_TRUNCATE = "pad"         # fixed-length model input


@dataclass(frozen=True)
class Dictionary:
    """An ordered set of feature tokens; entry order defines id assignment."""

    kind: DictKind
    entries: tuple[str, ...]

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for token in self.entries:
            if token in seen:
                raise DuplicateEntryError(
                    f"duplicate token in {self.kind.value} dictionary: {token!r}")
            seen.add(token)

    def __len__(self) -> int:
        return len(self.entries)


def load_dictionary(path: str | Path, kind: DictKind) -> Dictionary:
    """Read a dictionary file: one token per line, UTF-8, line order defines
    ids; blank lines and #-comments are skipped."""
    entries = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            entries.append(line)
    return Dictionary(kind, tuple(entries))


@dataclass(frozen=True)
class LookupTable:
    """Token-to-id mapping over the three dictionaries.

    Ids are consecutive and kind-blocked: permissions 1..|P|, intents
    |P|+1..|P|+|I|, APIs after that. Id 0 is reserved for padding.
    """

    permissions: Dictionary
    intents: Dictionary
    apis: Dictionary
    token_to_id: dict[str, int]
    id_to_token: tuple[str | None, ...]

    @property
    def vocab_size(self) -> int:
        return len(self.id_to_token)

    def encode_token(self, token: str) -> int:
        try:
            return self.token_to_id[token]
        except KeyError:
            raise UnknownTokenError(
                f"token not in any dictionary (filtering must precede "
                f"encoding): {token!r}") from None

    def decode_id(self, token_id: int) -> str:
        token = self.id_to_token[token_id] if 0 <= token_id < self.vocab_size else None
        if token is None:
            raise UnknownTokenError(f"id {token_id} maps to no token")
        return token

    def id_ranges(self) -> dict[DictKind, tuple[int, int]]:
        """Inclusive (first, last) id per kind; empty dictionaries get (0, -1)-style
        empty ranges with first > last."""
        p, i, a = len(self.permissions), len(self.intents), len(self.apis)
        return {
            DictKind.PERMISSION: (1, p),
            DictKind.INTENT: (p + 1, p + i),
            DictKind.API: (p + i + 1, p + i + a),
        }


def build_lookup_table(
    permissions: Dictionary, intents: Dictionary, apis: Dictionary,
) -> LookupTable:
    """Assign every dictionary token a unique positive id; 0 stays reserved."""
    expected = (
        (permissions, DictKind.PERMISSION),
        (intents, DictKind.INTENT),
        (apis, DictKind.API),
    )
    for d, kind in expected:
        if d.kind is not kind:
            raise ValueError(f"expected a {kind.value} dictionary, got {d.kind.value}")

    token_to_id: dict[str, int] = {}
    id_to_token: list[str | None] = [None]
    for d, _ in expected:
        for token in d.entries:
            if token in token_to_id:
                raise DuplicateEntryError(
                    f"token appears in more than one dictionary: {token!r}")
            token_to_id[token] = len(id_to_token)
            id_to_token.append(token)

    return LookupTable(permissions, intents, apis, token_to_id, tuple(id_to_token))


def load_dictionaries(directory: str | Path) -> LookupTable:
    """Load permissions.txt, intents.txt, and apis.txt from a directory."""
    directory = Path(directory)
    return build_lookup_table(
        load_dictionary(directory / "permissions.txt", DictKind.PERMISSION),
        load_dictionary(directory / "intents.txt", DictKind.INTENT),
        load_dictionary(directory / "apis.txt", DictKind.API),
    )


@dataclass(frozen=True)
class EncodedSequence:
    """Integer sequence ready for the classifier."""

    ids: tuple[int, ...]
    truncated: bool
    original_filtered_length: int


def assemble_filtered_sequence(
    features: ManifestFeatures,
    code_tokens: Sequence[RawToken],
    table: LookupTable,
) -> list[str]:
    """Build the final token sequence: dictionary-matched permissions, then
    intent values, then the dictionary-filtered code stream.

    Code API tokens survive only if present in the API dictionary (dropping
    self-defined and uncommon calls); code string constants survive only if
    they are known intent values. Manifest features are filtered the same
    way. Manifest features lead so truncation can never discard them.
    """
    perm_set = set(table.permissions.entries)
    intent_set = set(table.intents.entries)
    api_set = set(table.apis.entries)

    out = [p for p in features.permissions if p in perm_set]
    out += [v for v in features.intent_values if v in intent_set]
    for token in code_tokens:
        if token.kind is TokenKind.API:
            if token.text in api_set:
                out.append(token.text)
        elif token.text in intent_set:
            out.append(token.text)
    return out


def remove_repetitive(seq: Iterable) -> list:
    """Drop every repeated element, keeping first occurrences in order."""
    seen = set()
    out = []
    for item in seq:
        if item not in seen:
            seen.add(item)
            out.append(item)
    return out


def encode_and_fit(
    tokens: Sequence[str],
    table: LookupTable,
    max_len: int = DEFAULT_MAX_LEN,
    mode: FitMode = FitMode.TRUNCATE_ONLY,
) -> EncodedSequence:
    """Map tokens to ids and fit the sequence to the model input length.

    Sequences longer than max_len are cut to the first max_len ids in either
    mode; PAD_AND_TRUNCATE additionally post-pads short sequences with id 0.
    """
    if max_len < 1:
        raise ValueError(f"max_len must be positive, got {max_len}")
    ids = [table.encode_token(t) for t in tokens]
    original = len(ids)
    truncated = original > max_len
    if truncated:
        ids = ids[:max_len]
    if mode is FitMode.PAD_AND_TRUNCATE and len(ids) < max_len:
        ids += [PAD_ID] * (max_len - len(ids))
    return EncodedSequence(tuple(ids), truncated, original)


def decode_ids(ids: Iterable[int], table: LookupTable) -> list[str]:
    """Inverse of encoding for non-padding ids; pad ids are skipped."""
    return [table.decode_id(i) for i in ids if i != PAD_ID]


def estimate_original_length(deduplicated_length: float) -> float:
    """Estimate the raw sequence length a deduplicated length came from.

    Repeated elements make up roughly REPETITIVE_PROPORTION of a raw
    sequence, so the raw length is n / (1 - 0.6), i.e. exactly 2.5 * n.
    """
    return deduplicated_length * 2.5


def format_id_line(ids: Iterable[int], label: int | None = None) -> str:
    """One encoded sequence as a line of decimal ids; optional 0/1 label prefix."""
    body = " ".join(str(i) for i in ids)
    if label is None:
        return body
    return f"{label} {body}" if body else str(label)


def parse_id_line(line: str, labeled: bool = False) -> tuple[int | None, list[int]]:
    """Inverse of format_id_line; returns (label, ids)."""
    parts = [int(p) for p in line.split()]
    if labeled:
        return parts[0], parts[1:]
    return None, parts

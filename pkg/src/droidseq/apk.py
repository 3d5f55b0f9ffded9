"""APK container reading and the end-to-end scan pipeline."""

from __future__ import annotations

import json
import re
import time
import zipfile
from dataclasses import asdict, dataclass
from pathlib import Path

from . import axml, dex
from .model import (ModeMismatchError, ModelWeights, PredictMode, Verdict,
                    predict)
from .pipeline import (DEFAULT_MAX_LEN, FitMode, LookupTable,
                       assemble_filtered_sequence, encode_and_fit,
                       remove_repetitive)

MANIFEST_NAME = "AndroidManifest.xml"
_DEX_NAME = re.compile(r"^classes(\d*)\.dex$")


class ApkError(Exception):
    """Base class for APK container failures."""


class NotAnApkError(ApkError):
    """The file carries no ZIP signature."""


class MissingDexError(ApkError):
    """The archive contains no classes.dex entry."""


class MissingManifestError(ApkError):
    """The archive contains no AndroidManifest.xml entry."""


class UnsupportedCompressionError(ApkError):
    """An entry uses a compression method other than stored or deflate."""


@dataclass(frozen=True)
class ApkContents:
    manifest: bytes
    dex_files: tuple[tuple[str, bytes], ...]     # (entry name, bytes), scan order


@dataclass(frozen=True)
class ScanCounts:
    permissions: int            # dictionary-matched manifest permissions
    intent_values: int          # matched intent values, manifest and code
    api_tokens: int             # dictionary-matched API calls
    filtered_length: int
    post_removal_length: int


@dataclass(frozen=True)
class ScanTimings:
    """Per-stage wall-clock times, milliseconds."""

    unzip_ms: float
    parse_dex_ms: float
    parse_manifest_ms: float
    pipeline_ms: float
    predict_ms: float


@dataclass(frozen=True)
class ScanReport:
    path: str
    verdict: Verdict
    probabilities: tuple[float, float]
    counts: ScanCounts
    truncated: bool
    seq_len_used: int
    model_mode: str
    timings: ScanTimings

    def to_json(self) -> str:
        record = asdict(self)
        record["verdict"] = self.verdict.value
        return json.dumps(record, separators=(",", ":"))


def _dex_sort_key(name: str) -> int:
    suffix = _DEX_NAME.match(name).group(1)
    return int(suffix) if suffix else 1


def read_apk(path: str | Path) -> ApkContents:
    """Pull the manifest and every classesN.dex out of an APK.

    Dex entries come back in ascending numeric order (classes.dex first).
    Entries must be stored or deflate-compressed.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        if fh.read(2) != b"PK":
            raise NotAnApkError(f"{path}: no ZIP signature")
    if not zipfile.is_zipfile(path):
        raise NotAnApkError(f"{path}: not a readable ZIP archive")

    with zipfile.ZipFile(path) as zf:
        names = zf.namelist()
        dex_names = sorted((n for n in names if _DEX_NAME.match(n)), key=_dex_sort_key)
        if MANIFEST_NAME not in names:
            raise MissingManifestError(f"{path}: no {MANIFEST_NAME}")
        if not dex_names:
            raise MissingDexError(f"{path}: no classes.dex")

        def read_entry(name: str) -> bytes:
            info = zf.getinfo(name)
            if info.compress_type not in (zipfile.ZIP_STORED, zipfile.ZIP_DEFLATED):
                raise UnsupportedCompressionError(
                    f"{path}: entry {name} uses unsupported compression "
                    f"method {info.compress_type}; only stored and deflate "
                    f"are accepted")
            return zf.read(name)

        manifest = read_entry(MANIFEST_NAME)
        dex_files = tuple((n, read_entry(n)) for n in dex_names)
    return ApkContents(manifest, dex_files)


def scan_apk(
    path: str | Path,
    table: LookupTable,
    weights: ModelWeights,
    mode: PredictMode = PredictMode.DYNAMIC,
    max_len: int = DEFAULT_MAX_LEN,
) -> ScanReport:
    """Extract, encode, and classify one APK."""
    # fail before extraction work rather than inside predict
    if mode is PredictMode.FIXED and weights.fixed_length is None:
        raise ModeMismatchError("FIXED mode needs static weights "
                                "(no fixed_length in this model)")
    if mode is PredictMode.DYNAMIC and weights.fixed_length is not None:
        raise ModeMismatchError(
            "static (fixed-length) weights cannot run in DYNAMIC mode")

    t0 = time.perf_counter()
    contents = read_apk(path)
    t1 = time.perf_counter()

    features = axml.extract_manifest_features(axml.parse_axml(contents.manifest))
    t2 = time.perf_counter()

    code_tokens: list[dex.RawToken] = []
    for _, dex_bytes in contents.dex_files:
        code_tokens.extend(dex.extract_code_tokens(dex.parse_dex(dex_bytes)))
    t3 = time.perf_counter()

    assembled = assemble_filtered_sequence(features, code_tokens, table)
    deduplicated = remove_repetitive(assembled)
    fit_len = weights.fixed_length if mode is PredictMode.FIXED else max_len
    encoded = encode_and_fit(deduplicated, table, fit_len, FitMode.TRUNCATE_ONLY)
    t4 = time.perf_counter()

    result = predict(encoded, weights, mode, max_len=max_len)

    perm_set = set(table.permissions.entries)
    intent_set = set(table.intents.entries)
    api_set = set(table.apis.entries)
    kept_perms = sum(1 for p in features.permissions if p in perm_set)
    kept_manifest_intents = sum(1 for v in features.intent_values if v in intent_set)
    kept_apis = sum(1 for t in code_tokens
                    if t.kind is dex.TokenKind.API and t.text in api_set)
    kept_code_intents = sum(1 for t in code_tokens
                            if t.kind is dex.TokenKind.STRING and t.text in intent_set)

    counts = ScanCounts(
        permissions=kept_perms,
        intent_values=kept_manifest_intents + kept_code_intents,
        api_tokens=kept_apis,
        filtered_length=len(assembled),
        post_removal_length=len(deduplicated),
    )
    timings = ScanTimings(
        unzip_ms=(t1 - t0) * 1e3,
        parse_dex_ms=(t3 - t2) * 1e3,
        parse_manifest_ms=(t2 - t1) * 1e3,
        pipeline_ms=(t4 - t3) * 1e3,
        predict_ms=result.elapsed * 1e3,
    )
    return ScanReport(
        path=str(path),
        verdict=result.label,
        probabilities=result.probabilities,
        counts=counts,
        truncated=encoded.truncated,
        seq_len_used=result.seq_len_used,
        model_mode=mode.value,
        timings=timings,
    )

"""Sequence-based Android malware scanner.

Extracts permission, intent, and API-call token sequences straight from
APK binaries, encodes them against curated dictionaries, and classifies
with a bidirectional-LSTM forward pass that supports dynamic-length and
fixed-length half-precision inference.
"""

from .apk import (ApkError, MissingDexError, MissingManifestError,
                  NotAnApkError, ScanCounts, ScanReport, ScanTimings,
                  read_apk, scan_apk)
from .axml import (AxmlDocument, ManifestFeatures, XmlEvent,
                   extract_manifest_features, parse_axml, to_xml)
from .bench import BenchRecord, ZeroBaselineError, bench_predict, performance_gain
from .dex import (DexFile, RawToken, TokenKind, extract_code_tokens,
                  parse_dex)
from .model import (ModelWeights, ModeMismatchError, PredictionResult,
                    PredictMode, Verdict, forward, load_weights, lstm_step,
                    predict, quantize_weights, save_weights)
from .pipeline import (DEFAULT_MAX_LEN, PAD_ID, Dictionary, DictKind,
                       EncodedSequence, FitMode, LookupTable,
                       assemble_filtered_sequence, build_lookup_table,
                       encode_and_fit, estimate_original_length,
                       load_dictionaries, load_dictionary,
                       remove_repetitive)

__version__ = "0.1.0"

__all__ = [
    "ApkError", "AxmlDocument", "BenchRecord", "DEFAULT_MAX_LEN",
    "DexFile", "Dictionary", "DictKind", "EncodedSequence", "FitMode",
    "LookupTable", "ManifestFeatures", "MissingDexError",
    "MissingManifestError", "ModeMismatchError", "ModelWeights",
    "NotAnApkError", "PAD_ID", "PredictMode", "PredictionResult",
    "RawToken", "ScanCounts", "ScanReport", "ScanTimings", "TokenKind",
    "Verdict", "XmlEvent", "ZeroBaselineError",
    "assemble_filtered_sequence", "bench_predict", "build_lookup_table",
    "encode_and_fit", "estimate_original_length", "extract_code_tokens",
    "extract_manifest_features", "forward", "load_dictionaries",
    "load_dictionary", "load_weights", "lstm_step", "parse_axml",
    "parse_dex", "performance_gain", "predict", "quantize_weights",
    "read_apk", "save_weights", "scan_apk", "to_xml",
]

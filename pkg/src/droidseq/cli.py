"""Command-line interface.

Commands: dict build/inspect, extract, scan, bench predict, quantize.
Scan prints one JSON record per APK on stdout and a human summary on
stderr; exit code 0 means benign, 1 malicious, 2 error.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from importlib import resources
from pathlib import Path

from . import apk, axml, bench, dex, model, pipeline

EXIT_BENIGN = 0
EXIT_MALICIOUS = 1
EXIT_ERROR = 2

_SCAN_ERRORS = (apk.ApkError, axml.AxmlError, dex.DexError,
                pipeline.PipelineError, model.ModelError, OSError)


def _builtin_dicts_dir() -> Path:
    return Path(str(resources.files("droidseq") / "data"))


def _load_table(dicts_dir: str | None) -> pipeline.LookupTable:
    return pipeline.load_dictionaries(dicts_dir or _builtin_dicts_dir())


def _load_model(path: str) -> model.ModelWeights:
    return model.load_weights(Path(path).read_bytes())


def _cmd_dict_build(args: argparse.Namespace) -> int:
    table = pipeline.build_lookup_table(
        pipeline.load_dictionary(args.permissions, pipeline.DictKind.PERMISSION),
        pipeline.load_dictionary(args.intents, pipeline.DictKind.INTENT),
        pipeline.load_dictionary(args.apis, pipeline.DictKind.API),
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, d in (("permissions.txt", table.permissions),
                    ("intents.txt", table.intents),
                    ("apis.txt", table.apis)):
        (out / name).write_text("".join(f"{t}\n" for t in d.entries), encoding="utf-8")
    print(f"wrote {out}: {len(table.permissions)} permissions, "
          f"{len(table.intents)} intents, {len(table.apis)} APIs "
          f"(vocabulary {table.vocab_size})", file=sys.stderr)
    return EXIT_BENIGN


def _cmd_dict_inspect(args: argparse.Namespace) -> int:
    table = _load_table(args.dicts)
    ranges = table.id_ranges()
    for kind, d in ((pipeline.DictKind.PERMISSION, table.permissions),
                    (pipeline.DictKind.INTENT, table.intents),
                    (pipeline.DictKind.API, table.apis)):
        lo, hi = ranges[kind]
        span = f"ids {lo}..{hi}" if hi >= lo else "empty"
        print(f"{kind.value}\t{len(d)}\t{span}")
    print(f"vocab_size\t{table.vocab_size}")
    return EXIT_BENIGN


def _cmd_extract(args: argparse.Namespace) -> int:
    contents = apk.read_apk(args.apk)
    features = axml.extract_manifest_features(axml.parse_axml(contents.manifest))
    sys.stdout.write(axml.dump_features(features))
    for _, dex_bytes in contents.dex_files:
        tokens = dex.extract_code_tokens(dex.parse_dex(dex_bytes))
        sys.stdout.write(dex.dump_tokens(tokens))
    return EXIT_BENIGN


def _cmd_scan(args: argparse.Namespace) -> int:
    table = _load_table(args.dicts)
    weights = _load_model(args.model)
    mode = model.PredictMode(args.mode)

    def scan_one(path: str):
        return apk.scan_apk(path, table, weights, mode, max_len=args.max_len)

    reports: list[apk.ScanReport | Exception] = []
    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            futures = [pool.submit(scan_one, p) for p in args.apks]
            for future in futures:
                try:
                    reports.append(future.result())
                except _SCAN_ERRORS as exc:
                    reports.append(exc)
    else:
        for path in args.apks:
            try:
                reports.append(scan_one(path))
            except _SCAN_ERRORS as exc:
                reports.append(exc)

    worst = EXIT_BENIGN
    for path, report in zip(args.apks, reports):
        if isinstance(report, Exception):
            print(json.dumps({"path": path, "error": str(report)},
                             separators=(",", ":")))
            print(f"{path}: ERROR: {report}", file=sys.stderr)
            worst = EXIT_ERROR
        else:
            print(report.to_json())
            p_mal = report.probabilities[1]
            print(f"{path}: {report.verdict.value.upper()} "
                  f"(p_malicious={p_mal:.4f}, {report.seq_len_used} steps, "
                  f"predict {report.timings.predict_ms:.1f} ms)", file=sys.stderr)
            if worst == EXIT_BENIGN and report.verdict is model.Verdict.MALICIOUS:
                worst = EXIT_MALICIOUS
    return worst


def _cmd_bench_predict(args: argparse.Namespace) -> int:
    weights = _load_model(args.model)
    lengths = [int(part) for part in args.lengths.split(",") if part]
    records = bench.bench_predict(
        weights, lengths, args.trials,
        compare_fixed=args.compare_fixed,
        fixed_length=args.fixed_length,
        seed=args.seed,
    )
    sys.stdout.write(bench.format_csv(records))
    return EXIT_BENIGN


def _cmd_quantize(args: argparse.Namespace) -> int:
    weights = _load_model(args.input)
    quantized = model.quantize_weights(weights, args.length)
    data = model.save_weights(quantized)
    Path(args.output).write_bytes(data)
    original = Path(args.input).stat().st_size
    print(f"{args.output}: {len(data)} bytes "
          f"({len(data) / original:.2%} of {original}), "
          f"fixed length {args.length}", file=sys.stderr)
    return EXIT_BENIGN


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="droidseq",
        description="Sequence-based Android malware scanner")
    sub = parser.add_subparsers(dest="command", required=True)

    dict_p = sub.add_parser("dict", help="dictionary tooling")
    dict_sub = dict_p.add_subparsers(dest="dict_command", required=True)
    build_p = dict_sub.add_parser("build", help="validate and install dictionary files")
    build_p.add_argument("--permissions", required=True)
    build_p.add_argument("--intents", required=True)
    build_p.add_argument("--apis", required=True)
    build_p.add_argument("--out", required=True, help="output dictionary directory")
    build_p.set_defaults(func=_cmd_dict_build)
    inspect_p = dict_sub.add_parser("inspect", help="show sizes and id ranges")
    inspect_p.add_argument("dicts", nargs="?", default=None,
                           help="dictionary directory (default: built-in)")
    inspect_p.set_defaults(func=_cmd_dict_inspect)

    extract_p = sub.add_parser("extract", help="dump raw tokens from an APK")
    extract_p.add_argument("apk")
    extract_p.set_defaults(func=_cmd_extract)

    scan_p = sub.add_parser("scan", help="classify APKs")
    scan_p.add_argument("apks", nargs="+", metavar="apk")
    scan_p.add_argument("--dicts", default=None, help="dictionary directory")
    scan_p.add_argument("--model", required=True, help="SQMW weight file")
    scan_p.add_argument("--mode", choices=["dynamic", "fixed"], default="dynamic")
    scan_p.add_argument("--max-len", type=int, default=pipeline.DEFAULT_MAX_LEN)
    scan_p.add_argument("--jobs", type=int, default=1,
                        help="scan this many APKs concurrently")
    scan_p.set_defaults(func=_cmd_scan)

    bench_p = sub.add_parser("bench", help="latency benchmarks")
    bench_sub = bench_p.add_subparsers(dest="bench_command", required=True)
    predict_p = bench_sub.add_parser("predict", help="time the forward pass")
    predict_p.add_argument("--model", required=True)
    predict_p.add_argument("--lengths", default="300,600,900,1500,1700,1900",
                           help="comma-separated sequence lengths")
    predict_p.add_argument("--trials", type=int, default=10)
    predict_p.add_argument("--compare-fixed", action="store_true",
                           help="also time FIXED mode on a static copy")
    predict_p.add_argument("--fixed-length", type=int,
                           default=pipeline.DEFAULT_MAX_LEN)
    predict_p.add_argument("--seed", type=int, default=None)
    predict_p.set_defaults(func=_cmd_bench_predict)

    quant_p = sub.add_parser("quantize", help="write a half-precision static model")
    quant_p.add_argument("input")
    quant_p.add_argument("output")
    quant_p.add_argument("--length", type=int, required=True,
                         help="mandatory input length of the static model")
    quant_p.set_defaults(func=_cmd_quantize)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _SCAN_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface: trace ingestion, vocabulary building, simulation,
policy comparison, horizon sweeps, and forecaster accuracy tables."""

from __future__ import annotations

import argparse
import sys

from . import harness, trace
from .cache import CacheConfig
from .forecast import (
    FileForecaster,
    NGramForecaster,
    OracleForecaster,
    PredictionFileError,
    evaluate_forecaster,
)
from .trace import ParseError


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v]


def _add_cache_args(parser):
    parser.add_argument("--cache-kib", type=int, default=40, help="cache size in KiB")
    parser.add_argument("--page-size", type=int, default=4096)
    parser.add_argument("--address-bits", type=int, default=32)
    parser.add_argument("--seed", type=int, default=None)


def _add_forecaster_args(parser, include_k: bool = True):
    parser.add_argument(
        "--forecaster", choices=harness.FORECASTER_NAMES, default="oracle"
    )
    if include_k:
        parser.add_argument("--k", type=int, default=30, help="prediction horizon")
    parser.add_argument("--w", type=int, default=100, help="look-back window")
    parser.add_argument("--rho", type=float, default=0.0, help="oracle corruption rate")
    parser.add_argument("--full-horizon", action="store_true",
                        help="oracle predicts the whole remaining trace")
    parser.add_argument("--order", type=int, default=3, help="ngram context length")
    parser.add_argument("--alpha", type=float, default=1.0, help="ngram smoothing")
    parser.add_argument("--pred-file", default=None)
    parser.add_argument("--fallback", choices=harness.FALLBACK_NAMES, default="lru")
    parser.add_argument("--train", dest="train_path", default=None,
                        help="page-access CSV to train/build the vocabulary from")
    parser.add_argument("--train-fraction", type=float, default=0.9)
    parser.add_argument("--min-count", type=int, default=2)
    parser.add_argument("--vocab", dest="vocab_path", default=None)


def _cache_config(args) -> CacheConfig:
    return CacheConfig.from_cache_kib(args.cache_kib, args.page_size, args.address_bits)


def _experiment_config(args, policy: str) -> harness.ExperimentConfig:
    return harness.ExperimentConfig(
        policy=policy,
        cache=_cache_config(args),
        trace_path=args.trace,
        seed=args.seed,
        forecaster=args.forecaster,
        k=args.k,
        w=args.w,
        rho=args.rho,
        full_horizon=args.full_horizon,
        ngram_order=args.order,
        ngram_alpha=args.alpha,
        pred_file=args.pred_file,
        fallback=args.fallback,
        train_fraction=args.train_fraction,
        min_count=args.min_count,
        train_path=args.train_path,
        vocab_path=args.vocab_path,
    )


def cmd_ingest(args) -> int:
    with open(args.pin, encoding="utf-8") as fh:
        result = trace.parse_pin_trace(fh, strict=args.strict)
    accesses = trace.to_page_accesses(result.records, args.page_size)
    if args.strip_preamble:
        accesses = trace.strip_preamble(accesses, args.strip_preamble)
    elif args.auto_lcp:
        others = []
        for path in args.auto_lcp:
            with open(path, encoding="utf-8") as fh:
                parsed = trace.parse_pin_trace(fh, strict=args.strict)
            others.append(trace.to_page_accesses(parsed.records, args.page_size))
        stripped, lcp = trace.strip_common_prefix([accesses] + others)
        accesses = stripped[0]
        print(f"stripped common preamble of {lcp} accesses")
    trace.save_accesses_csv(accesses, args.out)
    print(
        f"ingested {len(result.records)} records ({result.skipped} lines skipped), "
        f"wrote {len(accesses)} page accesses to {args.out}"
    )
    return 0


def cmd_vocab(args) -> int:
    accesses = trace.load_accesses_csv(args.train)
    deltas = trace.page_deltas([a.page for a in accesses], args.delta_mode)
    vocab = trace.build_vocabulary(deltas, args.min_count)
    vocab.save(args.out)
    print(f"vocabulary of {len(vocab)} deltas (min_count={args.min_count}) -> {args.out}")
    return 0


def cmd_split(args) -> int:
    accesses = trace.load_accesses_csv(args.trace)
    dataset = trace.split_train_test(accesses, args.fraction, args.min_count)
    trace.save_accesses_csv(dataset.train, args.out_train)
    trace.save_accesses_csv(dataset.test, args.out_test)
    print(
        f"split {len(accesses)} accesses at {dataset.train_end}: "
        f"{args.out_train} / {args.out_test}"
    )
    return 0


def cmd_gen(args) -> int:
    params: dict = {"length": args.length, "write_prob": args.write_prob}
    if args.kind == "cyclic-scan":
        params["universe"] = args.universe
    elif args.kind == "zipfian":
        params.update(universe=args.universe, s=args.zipf_s)
    elif args.kind == "looping-with-hotset":
        params.update(
            loop_size=args.loop_size,
            hot_size=args.hot_size,
            loop_prob=args.loop_prob,
            s=args.zipf_s,
        )
    elif args.kind == "markov-delta":
        deltas = _int_list(args.deltas)
        weights = [float(v) for v in args.weights.split(",") if v]
        params.update(
            deltas=deltas, weights=weights, universe=args.universe, start_page=args.start_page
        )
    accesses = trace.generate_synthetic(args.kind, params, seed=args.seed)
    trace.save_accesses_csv(accesses, args.out)
    print(f"generated {len(accesses)} {args.kind} accesses -> {args.out}")
    return 0


def cmd_simulate(args) -> int:
    config = _experiment_config(args, args.policy)
    metrics = harness.run_simulation(config)
    rows = harness.comparison_rows([(config, metrics)])
    sys.stdout.write(harness.emit_report(rows, args.format))
    return 0


def cmd_compare(args) -> int:
    policies = [p.strip() for p in args.policies.split(",") if p.strip()]
    configs = [_experiment_config(args, p) for p in policies]
    results = harness.run_policy_comparison(configs)
    rows = harness.comparison_rows(results)
    text = harness.emit_report(rows, args.format)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(harness.emit_report(rows, "csv"))
        print(f"wrote {args.out}")
    sys.stdout.write(text)
    if args.plot:
        from . import report

        report.plot_comparison(rows, args.plot)
        print(f"wrote {args.plot}")
    return 0


def cmd_sweep(args) -> int:
    horizons = _int_list(args.horizons)
    if not horizons:
        raise ValueError("empty horizon list")
    args.k = horizons[0]
    config = _experiment_config(args, "mustache")
    results = harness.run_horizon_sweep(config, horizons)
    rows = harness.sweep_rows(results, label=config.display_label)
    text = harness.emit_report(rows, args.format)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(harness.emit_report(rows, "csv"))
        print(f"wrote {args.out}")
    sys.stdout.write(text)
    if args.plot:
        from . import report

        report.plot_sweep(rows, args.plot)
        print(f"wrote {args.plot}")
    return 0


def cmd_accuracy(args) -> int:
    accesses = trace.load_accesses_csv(args.test)
    horizons = _int_list(args.horizons)
    num_pages = (1 << args.address_bits) // args.page_size

    def vocabulary():
        if args.vocab_path:
            return trace.DeltaVocabulary.load(args.vocab_path)
        if args.train_path:
            train = trace.load_accesses_csv(args.train_path)
            return trace.build_vocabulary(
                trace.page_deltas([a.page for a in train]), args.min_count
            )
        raise ValueError("need --vocab or --train to build a vocabulary")

    if args.forecaster == "oracle":
        vocab = vocabulary() if args.rho > 0.0 else None
        forecaster = OracleForecaster(
            accesses, rho=args.rho, seed=args.seed, vocab=vocab, num_pages=num_pages
        )
    elif args.forecaster == "ngram":
        if not args.train_path:
            raise ValueError("ngram accuracy needs --train")
        train = trace.load_accesses_csv(args.train_path)
        deltas = trace.page_deltas([a.page for a in train])
        vocab = (
            trace.DeltaVocabulary.load(args.vocab_path)
            if args.vocab_path
            else trace.build_vocabulary(deltas, args.min_count)
        )
        forecaster = NGramForecaster.train(
            deltas, vocab, order=args.order, alpha=args.alpha, num_pages=num_pages
        )
    elif args.forecaster == "file":
        if not args.pred_file:
            raise ValueError("file accuracy needs --pred-file")
        forecaster = FileForecaster.load(args.pred_file, num_pages=num_pages)
    else:
        raise ValueError(f"cannot evaluate forecaster {args.forecaster!r}")

    print("k,accuracy")
    table = {}
    for k in horizons:
        acc = evaluate_forecaster(forecaster, accesses, args.w, [k])[k]
        table[k] = acc
        print(f"{k},{acc:.6f}")
    if args.plot:
        from . import report

        report.plot_accuracy(table, args.plot, label=args.forecaster)
        print(f"wrote {args.plot}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mustachesim",
        description="Page-cache replacement simulator with forecast-driven eviction.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="convert an instrumentation log to page-access CSV")
    p.add_argument("--pin", required=True, help="trace file: PC OP MEM N_BYTES [MEM_PREF]")
    p.add_argument("--page-size", type=int, default=4096)
    p.add_argument("--out", required=True)
    p.add_argument("--strict", action="store_true", help="error on malformed lines")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--strip-preamble", type=int, default=0, metavar="N")
    group.add_argument("--auto-lcp", nargs="+", metavar="FILE",
                       help="other traces; strip their common page prefix")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("vocab", help="build a delta vocabulary from a train CSV")
    p.add_argument("--train", required=True)
    p.add_argument("--min-count", type=int, default=2)
    p.add_argument("--delta-mode", choices=("consecutive", "anchored"), default="consecutive")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_vocab)

    p = sub.add_parser("split", help="split a trace into train/test CSVs")
    p.add_argument("--trace", required=True)
    p.add_argument("--fraction", type=float, default=0.9)
    p.add_argument("--min-count", type=int, default=2)
    p.add_argument("--out-train", required=True)
    p.add_argument("--out-test", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("gen", help="generate a synthetic workload CSV")
    p.add_argument("--kind", required=True, choices=sorted(trace.SYNTH_KINDS))
    p.add_argument("--length", type=int, required=True)
    p.add_argument("--universe", type=int, default=100)
    p.add_argument("--zipf-s", type=float, default=1.0)
    p.add_argument("--loop-size", type=int, default=20)
    p.add_argument("--hot-size", type=int, default=100)
    p.add_argument("--loop-prob", type=float, default=0.5)
    p.add_argument("--deltas", default="1", help="markov-delta: comma-separated steps")
    p.add_argument("--weights", default="1.0", help="markov-delta: step weights")
    p.add_argument("--start-page", type=int, default=0)
    p.add_argument("--write-prob", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("simulate", help="run one policy over a trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--policy", required=True, choices=harness.POLICY_NAMES)
    _add_cache_args(p)
    _add_forecaster_args(p)
    p.add_argument("--format", choices=("human", "csv"), default="human")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="run several policies over one trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--policies", required=True, help="comma-separated policy names")
    _add_cache_args(p)
    _add_forecaster_args(p)
    p.add_argument("--format", choices=("human", "csv"), default="human")
    p.add_argument("--out", default=None, help="also write the table as CSV")
    p.add_argument("--plot", default=None, help="render a comparison figure")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", help="sweep the mustache prediction horizon")
    p.add_argument("--trace", required=True)
    p.add_argument("--k", dest="horizons", required=True, help="comma-separated horizons")
    _add_cache_args(p)
    _add_forecaster_args(p, include_k=False)
    p.add_argument("--format", choices=("human", "csv"), default="human")
    p.add_argument("--out", default=None, help="also write the table as CSV")
    p.add_argument("--plot", default=None, help="render a sweep figure")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("accuracy", help="forecaster accuracy over a test CSV")
    p.add_argument("--test", required=True)
    p.add_argument("--k", dest="horizons", default="10,20,30")
    p.add_argument("--page-size", type=int, default=4096)
    p.add_argument("--address-bits", type=int, default=32)
    p.add_argument("--seed", type=int, default=None)
    _add_forecaster_args_accuracy(p)
    p.add_argument("--plot", default=None, help="render an accuracy figure")
    p.set_defaults(func=cmd_accuracy)

    return parser


def _add_forecaster_args_accuracy(parser):
    parser.add_argument("--forecaster", choices=("oracle", "ngram", "file"), default="oracle")
    parser.add_argument("--w", type=int, default=100)
    parser.add_argument("--rho", type=float, default=0.0)
    parser.add_argument("--order", type=int, default=3)
    parser.add_argument("--alpha", type=float, default=1.0)
    parser.add_argument("--pred-file", default=None)
    parser.add_argument("--train", dest="train_path", default=None)
    parser.add_argument("--min-count", type=int, default=2)
    parser.add_argument("--vocab", dest="vocab_path", default=None)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, PredictionFileError, ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``triehh <subcommand> [flags]``.

Every subcommand parses flags, calls the library, and serializes the result.
Flags may also come from a JSON file given with ``--config``; keys are flag
names (``max-length`` or ``max_length``) and explicit flags win.

Exit codes: 0 success, 1 invalid input, 2 runtime failure. Errors go to
standard error as one line of JSON.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import count_from_frequency, min_population, rate_at
from .data import (
    FIXTURES,
    IngestConfig,
    generate_synthetic,
    ingest_csv,
    ingest_jsonl,
    load_dataset,
    load_fixture,
    zipf_table,
)
from .errors import ParameterError, TrieHHError, ValidationError
from .harness import ExperimentSpec, discovery_curve, plot_csv, plot_rows, run_battery
from .privacy import choose_parameters, parse_delta_mode
from .simulation import MULTI_WORD, SINGLE_WORD, ProtocolParams

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class UsageError(ValidationError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {text}")
    return v


def _int_list(text):
    try:
        return [int(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _common(p):
    p.add_argument("--seed", type=int, default=0, help="base random seed")
    p.add_argument("--output", "-o", help="write the primary output here instead of stdout")
    p.add_argument("--format", dest="out_format", choices=["json", "csv"], default="json",
                   help="primary output format")
    p.add_argument("--config", help="JSON file of flag values")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="triehh", description="Federated heavy-hitter discovery with a trie.")
    parser.add_argument("--version", action="version", version=f"triehh {__version__}")
    parser.add_argument("--help-json", action="store_true", help="print a machine-readable description of all flags")
    parser.add_argument("--log-rounds", action="store_true", help="log one line per protocol round to stderr")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("params", help="choose theta, gamma and m for a privacy target")
    _common(p)
    p.add_argument("--n", type=int, help="population size")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--max-length", type=int, default=10, help="L, including the end marker")
    p.add_argument("--delta-mode", default="invn2", help="inv300n, invn2 or explicit=<delta>")

    p = sub.add_parser("simulate", help="run a battery of seeded protocol executions")
    _common(p)
    p.add_argument("--dataset", help="canonical .jsonl dump or a .csv corpus")
    p.add_argument("--mode", choices=["single", "multi"], default="single")
    p.add_argument("--runs", type=_positive_int, default=1)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--delta-mode", default="invn2")
    p.add_argument("--max-length", type=int, default=10)
    p.add_argument("--theta", type=int, help="bypass privacy selection: fixed threshold (needs --batch-size)")
    p.add_argument("--batch-size", type=int, help="bypass privacy selection: fixed users per round")
    p.add_argument("--top-k", type=_int_list, default=[10, 25, 50, 100], help="comma-separated cut-offs")
    p.add_argument("--workers", type=_positive_int, default=1)
    p.add_argument("--curve-bins", type=_positive_int, help="log-spaced frequency bins for a discovery curve")
    p.add_argument("--emit-plot-data", help="write (series, x, y, ci95) CSV here")
    p.add_argument("--run-reports", help="directory for one JSON report per run")
    p.add_argument("--no-round-logs", action="store_true", help="omit per-round tallies from run reports")

    p = sub.add_parser("analyze-rate", help="worst-case discovery rate over a frequency grid")
    _common(p)
    p.add_argument("--n", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--delta-mode", default="invn2")
    p.add_argument("--max-length", type=int, default=10)
    p.add_argument("--freq-min", type=float, default=1e-4)
    p.add_argument("--freq-max", type=float, default=1e-1)
    p.add_argument("--bins", type=_positive_int, default=20)

    p = sub.add_parser("min-pop", help="smallest population reaching a target discovery rate")
    _common(p)
    p.add_argument("--freq", type=float, nargs="+")
    p.add_argument("--target-rate", type=float, default=0.9)
    p.add_argument("--epsilon", type=float, nargs="+")
    p.add_argument("--max-length", type=int, default=10)
    p.add_argument("--delta-mode", default="invn2")

    p = sub.add_parser("ingest", help="build a canonical dataset from a corpus")
    p.add_argument("--seed", type=int, default=0, help="accepted for uniformity; ingestion uses no randomness")
    p.add_argument("--output", "-o")
    p.add_argument("--config")
    p.add_argument("--input")
    p.add_argument("--format", dest="in_format", choices=["auto", "csv", "jsonl"], default="auto",
                   help="input format; output is always canonical JSONL")
    p.add_argument("--oov-dict", help="dictionary file, one word per line")
    p.add_argument("--top1", action="store_true", help="keep each user's most frequent word only")
    p.add_argument("--max-length", type=int, default=10)
    p.add_argument("--keep-case", action="store_true")
    p.add_argument("--strip-punctuation", action="store_true")

    p = sub.add_parser("gen", help="generate a synthetic dataset")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", "-o")
    p.add_argument("--config")
    p.add_argument("--fixture", choices=sorted(FIXTURES))
    p.add_argument("--zipf-vocab", type=int, help="instead of a fixture, Zipf(s) over this many words")
    p.add_argument("--zipf-s", type=float, default=1.0)
    p.add_argument("--n", type=int)
    p.add_argument("--words-per-user", type=int, default=1)
    p.add_argument("--max-length", type=int, default=10)
    return parser


REQUIRED = {
    "params": ["n", "epsilon"],
    "simulate": ["dataset"],
    "analyze-rate": ["n", "epsilon"],
    "min-pop": ["freq", "epsilon"],
    "ingest": ["input"],
    "gen": ["n"],
}


def _subparsers(parser):
    for a in parser._actions:
        if isinstance(a, argparse._SubParsersAction):
            return a.choices
    return {}


def help_json(parser) -> dict:
    def describe(p):
        out = []
        for a in p._actions:
            if isinstance(a, (argparse._HelpAction, argparse._SubParsersAction)):
                continue
            out.append({
                "flags": list(a.option_strings),
                "dest": a.dest,
                "default": a.default if a.default is not argparse.SUPPRESS else None,
                "choices": list(a.choices) if a.choices else None,
                "nargs": a.nargs,
                "help": a.help,
            })
        return out

    subs = _subparsers(parser)
    return {
        "prog": parser.prog,
        "version": __version__,
        "options": describe(parser),
        "subcommands": {
            name: {"options": describe(p), "required": [f"--{r.replace('_', '-')}" for r in REQUIRED[name]]}
            for name, p in subs.items()
        },
    }


def _apply_config(parser, argv, args):
    if not getattr(args, "config", None):
        return args
    try:
        cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise UsageError(f"config {args.config}: invalid JSON ({e})") from None
    if not isinstance(cfg, dict):
        raise UsageError(f"config {args.config}: expected a JSON object")
    sub = _subparsers(parser)[args.command]
    dests = {a.dest: a for a in sub._actions if a.option_strings}
    alias = {"format": "in_format" if args.command == "ingest" else "out_format"}
    defaults = {}
    for key, value in cfg.items():
        dest = key.replace("-", "_")
        dest = alias.get(dest, dest)
        if dest not in dests or dest == "config":
            raise UsageError(f"config {args.config}: unknown key {key!r}")
        action = dests[dest]
        if isinstance(value, str) and action.type is not None:
            value = action.type(value)
        if action.choices and value not in action.choices:
            raise UsageError(f"config {args.config}: {key}={value!r} not in {list(action.choices)}")
        defaults[dest] = value
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def _check_required(args):
    missing = [f"--{r.replace('_', '-')}" for r in REQUIRED[args.command] if getattr(args, r) is None]
    if missing:
        raise UsageError(f"triehh {args.command}: missing required flags: {' '.join(missing)}")


def _emit(text: str, output):
    if output:
        with open(output, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, indent=1) + "\n"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def cmd_params(args) -> str:
    params = choose_parameters(args.n, args.max_length, args.epsilon, args.delta_mode)
    d = params.to_dict()
    if args.out_format == "csv":
        return _csv(list(d), [list(d.values())])
    d["table_row"] = params.table_row()
    return _dumps(d)


def _load_any(path: str, max_length: int):
    if path.endswith(".csv"):
        return ingest_csv(path, IngestConfig(max_length=max_length))
    return load_dataset(path, max_length=max_length)


def cmd_simulate(args) -> str:
    dataset = _load_any(args.dataset, args.max_length)
    mode = SINGLE_WORD if args.mode == "single" else MULTI_WORD
    params = None
    if args.theta is not None or args.batch_size is not None:
        if args.theta is None or args.batch_size is None:
            raise ParameterError("--theta and --batch-size must be given together")
        params = ProtocolParams(theta=args.theta, m=args.batch_size, max_length=args.max_length)
    elif args.epsilon is None:
        raise UsageError("triehh simulate: give --epsilon, or --theta with --batch-size")
    spec = ExperimentSpec(
        dataset=dataset,
        runs=args.runs,
        top_k=tuple(args.top_k),
        base_seed=args.seed,
        mode=mode,
        params=params,
        epsilon=args.epsilon,
        delta_mode=args.delta_mode,
        max_length=args.max_length,
        workers=args.workers,
    )
    report = run_battery(spec, keep_runs=bool(args.run_reports), keep_rounds=not args.no_round_logs)
    curve = None
    if args.curve_bins:
        freq = dataset.population_frequencies().values()
        lo, hi = min(freq), max(freq)
        edges = np.geomspace(lo, hi, args.curve_bins + 1) if hi > lo else np.array([lo, lo * 2])
        curve = discovery_curve(spec, edges, report)
    if args.run_reports:
        out = Path(args.run_reports)
        out.mkdir(parents=True, exist_ok=True)
        for r in report.runs:
            (out / f"run_{r.seed:06d}.json").write_text(r.to_json(include_rounds=not args.no_round_logs) + "\n",
                                                        encoding="utf-8")
    if args.emit_plot_data:
        Path(args.emit_plot_data).write_text(plot_csv(plot_rows(report, curve)), encoding="utf-8")
    if args.out_format == "csv":
        return report.to_csv()
    d = report.to_dict()
    if curve is not None:
        d["discovery_curve"] = [row.to_dict() for row in curve]
    return _dumps(d)


def cmd_analyze_rate(args) -> str:
    if not 0 < args.freq_min <= args.freq_max <= 1:
        raise ParameterError(f"0 < freq-min <= freq-max <= 1 violated: {args.freq_min}, {args.freq_max}")
    mode = parse_delta_mode(args.delta_mode)
    params = choose_parameters(args.n, args.max_length, args.epsilon, mode)
    freqs = np.geomspace(args.freq_min, args.freq_max, args.bins) if args.bins > 1 else np.array([args.freq_min])
    rows = []
    for f in freqs.tolist():
        W = count_from_frequency(f, args.n)
        rows.append((f, W, rate_at(args.n, f, args.epsilon, args.max_length, mode)))
    if args.out_format == "csv":
        return _csv(["frequency", "W", "rate"], rows)
    return _dumps({"params": params.to_dict(),
                   "rows": [{"frequency": f, "W": W, "rate": r} for f, W, r in rows]})


def cmd_min_pop(args) -> str:
    rows = []
    for eps in args.epsilon:
        for f in args.freq:
            n = min_population(f, args.target_rate, eps, args.max_length, args.delta_mode)
            rows.append((eps, f, n))
    if args.out_format == "csv":
        return _csv(["epsilon", "frequency", "n"], rows)
    return _dumps({"target_rate": args.target_rate, "max_length": args.max_length,
                   "delta_mode": args.delta_mode,
                   "rows": [{"epsilon": e, "frequency": f, "n": n} for e, f, n in rows]})


def cmd_ingest(args) -> str:
    config = IngestConfig(
        max_length=args.max_length,
        lowercase=not args.keep_case,
        strip_punctuation=args.strip_punctuation,
        oov_dictionary=args.oov_dict,
        selection="top1" if args.top1 else "all",
    )
    fmt = args.in_format
    if fmt == "auto":
        fmt = "jsonl" if args.input.endswith((".jsonl", ".json")) else "csv"
    dataset = ingest_csv(args.input, config) if fmt == "csv" else ingest_jsonl(args.input, config)
    return dataset.to_jsonl()


def cmd_gen(args) -> str:
    if (args.fixture is None) == (args.zipf_vocab is None):
        raise UsageError("triehh gen: give exactly one of --fixture or --zipf-vocab")
    if args.fixture is not None:
        table = load_fixture(args.fixture)
    else:
        table = zipf_table(args.zipf_vocab, args.zipf_s, seed=args.seed, max_length=args.max_length)
    dataset = generate_synthetic(table, args.n, words_per_user=args.words_per_user, seed=args.seed,
                                 max_length=args.max_length)
    return dataset.to_jsonl()


COMMANDS = {
    "params": cmd_params,
    "simulate": cmd_simulate,
    "analyze-rate": cmd_analyze_rate,
    "min-pop": cmd_min_pop,
    "ingest": cmd_ingest,
    "gen": cmd_gen,
}


def _fail(exc: BaseException, code: int) -> int:
    sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code}) + "\n")
    return code


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.help_json:
            sys.stdout.write(_dumps(help_json(parser)))
            return EXIT_OK
        if args.command is None:
            raise UsageError("triehh: a subcommand is required (params, simulate, analyze-rate, min-pop, ingest, gen)")
        args = _apply_config(parser, argv, args)
        _check_required(args)
        handler = None
        pkg_logger = logging.getLogger("triehh")
        if args.log_rounds:
            handler = logging.StreamHandler(sys.stderr)
            handler.setFormatter(logging.Formatter("%(message)s"))
            pkg_logger.addHandler(handler)
            pkg_logger.setLevel(logging.INFO)
        try:
            text = COMMANDS[args.command](args)
        finally:
            if handler is not None:
                pkg_logger.removeHandler(handler)
                pkg_logger.setLevel(logging.NOTSET)
        _emit(text, args.output)
    except (ValidationError, ValueError, argparse.ArgumentTypeError) as e:
        return _fail(e, EXIT_INVALID)
    except (TrieHHError, OSError, ArithmeticError) as e:
        return _fail(e, EXIT_RUNTIME)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

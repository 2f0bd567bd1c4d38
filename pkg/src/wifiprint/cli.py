"""``wifiprint`` command line.

Exit status: 0 success, 1 runtime failure, 2 usage or format error.
Settings come from built-in defaults, then the JSON file named by
``WIFIPRINT_CONFIG``, then command-line flags.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, replace
from typing import Optional, Sequence

from . import __version__
from .evaluator import (DEFAULT_MIN_OBS, DEFAULT_REF_DURATION, DEFAULT_SWEEP_SIZE, DEFAULT_WINDOW,
                        US_PER_S, EvaluationConfig, EvaluationError, build_reference_db,
                        default_sweep, device_signatures, evaluate, report_csv, windows_of)
from .features import ParameterKind, extract_samples, samples_csv
from .ingest import UnsupportedFormatError, decode_pcap
from .matcher import identify, match_many
from .signature import BinningScheme, ReferenceDatabase, SchemeMismatchError, default_scheme
from .synthgen import ScenarioError, load_scenario
from .trace import CanonicalTrace, TraceError, load_trace, save_trace

logger = logging.getLogger("wifiprint")

CONFIG_ENV = "WIFIPRINT_CONFIG"
EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class Config:
    kind: ParameterKind = ParameterKind.INTER_ARRIVAL_TIME
    bins: Optional[tuple[float, ...]] = None
    min_obs: int = DEFAULT_MIN_OBS
    ref_duration: int = DEFAULT_REF_DURATION
    window: int = DEFAULT_WINDOW
    sweep_size: int = DEFAULT_SWEEP_SIZE
    threshold: float = 0.5
    keep_bad_fcs: bool = False
    verbose: bool = False
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        if self.min_obs < 1:
            raise UsageError("min-obs must be >= 1")
        if self.window <= 0:
            raise UsageError("window must be > 0")
        if self.ref_duration < 0:
            raise UsageError("ref-duration must be >= 0")
        if self.sweep_size < 1:
            raise UsageError("sweep must be >= 1")
        if not 0.0 <= self.threshold <= 1.0:
            raise UsageError("threshold must lie in [0, 1]")

    @property
    def scheme(self) -> BinningScheme:
        if self.bins is None:
            return default_scheme(self.kind)
        try:
            return BinningScheme(self.kind, self.bins)
        except ValueError as exc:
            raise UsageError(f"bad bin edges: {exc}") from None

    def evaluation(self) -> EvaluationConfig:
        return EvaluationConfig(self.ref_duration, self.window, self.min_obs,
                                default_sweep(self.sweep_size))


def _seconds(value) -> int:
    return int(round(float(value) * US_PER_S))


def read_edges(path: str) -> tuple[float, ...]:
    """Edges file: a JSON list, or numbers separated by whitespace/commas."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError:
        obj = text.replace(",", " ").split()
    try:
        return tuple(float(x) for x in obj)
    except (TypeError, ValueError):
        raise UsageError(f"{path}: bin edges must be a list of numbers") from None


_CONFIG_KEYS = {
    "param": ("kind", ParameterKind),
    "min_obs": ("min_obs", int),
    "ref_duration": ("ref_duration", _seconds),
    "window": ("window", _seconds),
    "sweep": ("sweep_size", int),
    "threshold": ("threshold", float),
    "keep_bad_fcs": ("keep_bad_fcs", bool),
    "verbose": ("verbose", bool),
    "seed": ("seed", int),
}


def _apply(cfg: Config, source: dict, where: str) -> Config:
    changes = {}
    for key, value in source.items():
        if value is None:
            continue
        if key == "bins":
            changes["bins"] = (read_edges(value) if isinstance(value, str)
                               else tuple(float(x) for x in value))
            continue
        if key not in _CONFIG_KEYS:
            raise UsageError(f"{where}: unknown setting {key!r}")
        attr, conv = _CONFIG_KEYS[key]
        try:
            changes[attr] = conv(value)
        except (TypeError, ValueError):
            raise UsageError(f"{where}: bad value for {key}: {value!r}") from None
    return replace(cfg, **changes)


def load_config(args: argparse.Namespace, env: Optional[dict] = None) -> Config:
    env = os.environ if env is None else env
    cfg = Config()
    path = env.get(CONFIG_ENV)
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                obj = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"{CONFIG_ENV}={path}: {exc}") from None
        if not isinstance(obj, dict):
            raise UsageError(f"{CONFIG_ENV}={path}: expected a JSON object")
        cfg = _apply(cfg, obj, path)
    flags = {k: getattr(args, k, None) for k in (*_CONFIG_KEYS, "bins")}
    return _apply(cfg, flags, "command line")


def _load_db(path: str) -> ReferenceDatabase:
    try:
        return ReferenceDatabase.load(path)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"{path}: not a reference database ({exc})") from None


def cmd_convert(args, cfg: Config) -> int:
    with open(args.pcap, "rb") as fh:
        trace, stats = decode_pcap(fh, keep_bad_fcs=cfg.keep_bad_fcs)
    save_trace(trace, args.out)
    print(f"decoded={stats.decoded} skipped-bad-fcs={stats.bad_fcs} "
          f"skipped-truncated={stats.truncated} skipped-unsupported={stats.unsupported}")
    return EXIT_OK


def cmd_samples(args, cfg: Config) -> int:
    text = samples_csv(extract_samples(load_trace(args.trace), cfg.kind))
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_learn(args, cfg: Config) -> int:
    trace = load_trace(args.trace)
    db = build_reference_db(trace, cfg.kind, cfg.scheme, cfg.min_obs)
    if not len(db):
        print(f"warning: no device reached {cfg.min_obs} observations", file=sys.stderr)
    db.save(args.db_out)
    print(f"devices={len(db)}")
    return EXIT_OK


def cmd_match(args, cfg: Config) -> int:
    db = _load_db(args.db)
    if not len(db):
        raise UsageError("reference database is empty")
    scheme = cfg.scheme
    if scheme.scheme_id != db.scheme.scheme_id:
        raise UsageError("signatures not comparable: database and configuration use different "
                         f"binning schemes ({db.scheme.kind}/{db.scheme.scheme_id} vs "
                         f"{scheme.kind}/{scheme.scheme_id})")
    trace = load_trace(args.trace)
    buckets = windows_of(trace.frames, 0, cfg.window, trace.duration) if trace.frames else []
    out = sys.stdout
    header = "window,candidate_mac,best_ref_mac,best_sim"
    out.write(header + (",vector\n" if cfg.verbose else "\n"))
    for w, frames in enumerate(buckets):
        cands = device_signatures(CanonicalTrace(tuple(frames), trace.origin), db.scheme, cfg.min_obs)
        for vec in match_many(cands, db):
            best = identify(vec, cfg.threshold)
            best_sim = vec.ranked()[0][1] if len(vec) else 0.0
            row = f"{w},{vec.candidate.mac},{best.mac if best else 'unknown'},{best_sim!r}"
            if cfg.verbose:
                row += "," + " ".join(f"{r.mac}={s!r}" for r, s in vec.entries)
            out.write(row + "\n")
    return EXIT_OK


def cmd_evaluate(args, cfg: Config) -> int:
    trace = load_trace(args.trace)
    report = evaluate(trace, cfg.evaluation(), cfg.kind, cfg.scheme)
    with open(args.report_out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(report_csv(report))
    print(f"references={report.n_references} windows={report.n_windows} "
          f"candidates={report.n_candidates} known={report.n_known}")
    print(f"AUC={report.auc:.4f}")
    for target in (0.01, 0.1):
        p = report.nearest_id_fpr(target)
        if p is not None:
            print(f"id_fpr~{target}: T={p.threshold:.3f} id_ratio={p.id_ratio:.4f} id_fpr={p.id_fpr:.4f}")
    return EXIT_OK


def cmd_synth(args, cfg: Config) -> int:
    scenario = load_scenario(args.scenario)
    if cfg.seed is not None:
        scenario = replace(scenario, seed=cfg.seed)
    trace = scenario.generate()
    save_trace(trace, args.out)
    print(f"frames={len(trace)} devices={len(trace.devices())}")
    return EXIT_OK


def _add_analysis_flags(p: argparse.ArgumentParser, *, windows: bool = False,
                        sweep: bool = False, threshold: bool = False) -> None:
    p.add_argument("--param", choices=[k.value for k in ParameterKind],
                   help="network parameter (default inter_arrival_time)")
    p.add_argument("--bins", metavar="EDGES_FILE", help="bin edges overriding the default scheme")
    p.add_argument("--min-obs", dest="min_obs", type=int,
                   help=f"minimum observations per signature (default {DEFAULT_MIN_OBS})")
    if windows:
        p.add_argument("--window", type=float, help="window length in seconds (default 300)")
    if sweep:
        p.add_argument("--ref-duration", dest="ref_duration", type=float,
                       help="reference part length in seconds (default 3600)")
        p.add_argument("--sweep", type=int, help=f"number of thresholds in [0,1] (default {DEFAULT_SWEEP_SIZE})")
    if threshold:
        p.add_argument("--threshold", type=float, help="identification threshold (default 0.5)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wifiprint", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="pcap (radiotap/Prism) to canonical trace")
    p.add_argument("pcap")
    p.add_argument("out")
    p.add_argument("--keep-bad-fcs", dest="keep_bad_fcs", action="store_const", const=True)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("samples", help="dump per-device parameter samples as CSV")
    p.add_argument("trace")
    p.add_argument("-o", "--out")
    p.add_argument("--param", choices=[k.value for k in ParameterKind])
    p.set_defaults(func=cmd_samples)

    p = sub.add_parser("learn", help="build a reference database from a trace")
    p.add_argument("trace")
    p.add_argument("db_out")
    _add_analysis_flags(p)
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("match", help="match each window's devices against a database")
    p.add_argument("trace")
    p.add_argument("db")
    _add_analysis_flags(p, windows=True, threshold=True)
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("evaluate", help="split, learn, match and write a threshold-sweep report")
    p.add_argument("trace")
    p.add_argument("report_out")
    _add_analysis_flags(p, windows=True, sweep=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("synth", help="generate a synthetic trace from a scenario file")
    p.add_argument("scenario")
    p.add_argument("out")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.set_defaults(func=cmd_synth)

    for name, p in sub.choices.items():
        p.add_argument("--verbose", action="store_const", const=True,
                       help="full similarity vectors (match) and info logging")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        cfg = load_config(args)
    except UsageError as exc:
        print(f"wifiprint: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if cfg.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, cfg)
    except (UsageError, TraceError, ScenarioError, UnsupportedFormatError,
            SchemeMismatchError, EvaluationError) as exc:
        print(f"wifiprint: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError) as exc:
        print(f"wifiprint: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())

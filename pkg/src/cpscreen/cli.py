"""Command-line entry point.

Three batch commands, all driven by JSON configs so a run is archivable:

  cpscreen synth <config.json>       write a synthetic benchmark to disk
  cpscreen evaluate <config.json>    run the orphan-screening protocol
  cpscreen report <report.json ...>  merge report files into one table

Exit codes: 0 success, 1 runtime or I/O failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from .baselines import BaselineSpec
from .cp import CpConfig
from .data import SynthConfig, load_benchmark, save_benchmark, synth_generate
from .errors import ConfigError, CpScreenError, InvalidInputError
from .evaluation import ProtocolConfig, loo_orphan, supervised_bounds
from .kernels import KernelSpec
from .report import load_report, save_report, summary_table

_EVALUATE_KEYS = {
    "ligands", "similarity", "output_dir", "methods", "seed", "n_draws",
    "ligands_per_draw", "nu", "lambda", "c_grid", "eps_grid", "folds",
    "kernel", "normalize_rows", "tlk_raw_similarity", "threads",
}
_SYNTH_KEYS = {
    "n_targets", "m_ligands", "dim", "noise_sd", "similarity_decay", "seed",
    "ligands_out", "similarity_out",
}


@dataclass(frozen=True)
class RunConfig:
    """A full evaluate invocation: inputs, methods, protocol, flags."""

    ligands: str
    similarity: str
    output_dir: str
    methods: tuple[BaselineSpec, ...]
    protocol: ProtocolConfig
    normalize_rows: bool = False
    tlk_raw_similarity: bool = False
    threads: int | None = None

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(doc) - _EVALUATE_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        missing = [k for k in ("ligands", "similarity", "output_dir", "methods") if k not in doc]
        if missing:
            raise ConfigError(f"missing config keys: {missing}")
        if not isinstance(doc["methods"], list) or not doc["methods"]:
            raise ConfigError("'methods' must be a non-empty list of method tokens")
        try:
            methods = tuple(BaselineSpec.parse(str(t)) for t in doc["methods"])
        except InvalidInputError as exc:
            raise ConfigError(str(exc)) from None
        try:
            kernel = KernelSpec.from_dict(doc.get("kernel", {"kind": "linear"}))
            protocol = ProtocolConfig(
                n_draws=int(doc.get("n_draws", 10)),
                ligands_per_draw=int(doc.get("ligands_per_draw", 240)),
                seed=int(doc.get("seed", 0)),
                cp=CpConfig(
                    nu=float(doc.get("nu", 5.0)), lam=float(doc.get("lambda", 1.0))
                ),
                c_grid=tuple(float(c) for c in doc.get("c_grid", tuple(2.0**i for i in range(-5, 6)))),
                eps_grid=tuple(float(e) for e in doc.get("eps_grid", (0.1, 0.01, 0.001))),
                folds=int(doc.get("folds", 3)),
                kernel=kernel,
            )
        except (InvalidInputError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad protocol settings: {exc}") from None
        threads = doc.get("threads")
        if threads is not None:
            threads = int(threads)
        return cls(
            ligands=str(doc["ligands"]),
            similarity=str(doc["similarity"]),
            output_dir=str(doc["output_dir"]),
            methods=methods,
            protocol=protocol,
            normalize_rows=bool(doc.get("normalize_rows", False)),
            tlk_raw_similarity=bool(doc.get("tlk_raw_similarity", False)),
            threads=threads,
        )


def _load_json(path: str) -> dict:
    text = Path(path).read_text(encoding="utf-8")  # OSError propagates: exit 1
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON: {exc}") from None


def _resolve_threads(cli_value: int | None, config_value: int | None) -> int:
    if cli_value is not None:
        value = cli_value
    elif "CPSCREEN_THREADS" in os.environ:
        try:
            value = int(os.environ["CPSCREEN_THREADS"])
        except ValueError:
            raise ConfigError(
                f"CPSCREEN_THREADS={os.environ['CPSCREEN_THREADS']!r} is not an integer"
            ) from None
    elif config_value is not None:
        value = config_value
    else:
        value = os.cpu_count() or 1
    if value < 1:
        raise ConfigError("thread count must be >= 1")
    return value


def cmd_synth(args) -> int:
    doc = _load_json(args.config)
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(doc) - _SYNTH_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    missing = [k for k in _SYNTH_KEYS if k not in doc]
    if missing:
        raise ConfigError(f"missing config keys: {sorted(missing)}")
    try:
        config = SynthConfig(
            n_targets=int(doc["n_targets"]),
            m_ligands=int(doc["m_ligands"]),
            dim=int(doc["dim"]),
            noise_sd=float(doc["noise_sd"]),
            similarity_decay=float(doc["similarity_decay"]),
            seed=int(doc["seed"]),
        )
    except (InvalidInputError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad synth settings: {exc}") from None
    ligands_out = Path(doc["ligands_out"])
    similarity_out = Path(doc["similarity_out"])
    for path in (ligands_out, similarity_out):
        if not path.parent.is_dir():
            print(f"error: output directory {path.parent} does not exist", file=sys.stderr)
            return 1
    benchmark = synth_generate(config)
    save_benchmark(benchmark, ligands_out, similarity_out)
    print(f"wrote {ligands_out} and {similarity_out}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = RunConfig.from_dict(_load_json(args.config))
    threads = _resolve_threads(args.threads, cfg.threads)
    benchmark = load_benchmark(cfg.ligands, cfg.similarity)
    transfer = [m for m in cfg.methods if m.kind != "supervised_fraction"]
    fractions = [m.fraction for m in cfg.methods if m.kind == "supervised_fraction"]
    reports = []
    if transfer:
        reports.extend(
            loo_orphan(
                benchmark, transfer, cfg.protocol, threads=threads,
                normalize_rows=cfg.normalize_rows,
                tlk_raw_similarity=cfg.tlk_raw_similarity,
            )
        )
    if fractions:
        reports.extend(
            supervised_bounds(benchmark, fractions, cfg.protocol, threads=threads)
        )
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for r in reports:
        save_report(r, out_dir / (r.method.replace(":", "_") + ".json"))
    print(summary_table(reports))
    return 0


def cmd_report(args) -> int:
    reports = [load_report(p) for p in args.reports]
    print(summary_table(reports))
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cpscreen",
        description="Orphan-screening benchmark harness with corresponding projections.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic benchmark")
    p_synth.add_argument("config", help="JSON config with synth settings and output paths")
    p_synth.set_defaults(func=cmd_synth)

    p_eval = sub.add_parser("evaluate", help="run the leave-one-out protocol")
    p_eval.add_argument("config", help="JSON run config")
    p_eval.add_argument(
        "--threads", type=int, default=None,
        help="parallel work units (default: CPSCREEN_THREADS, then config, then all cores)",
    )
    p_eval.set_defaults(func=cmd_evaluate)

    p_rep = sub.add_parser("report", help="merge report files into one table")
    p_rep.add_argument("reports", nargs="+", help="report JSON files")
    p_rep.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s", stream=sys.stderr)
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (CpScreenError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

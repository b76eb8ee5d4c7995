"""Command line entry point: ``tubekernels run <subcommand> <config.toml>``.

Exit codes: 0 success, 1 a criterion failed, 2 invalid configuration or a
violated hypothesis guard, 3 a numerical guard tripped.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
import typing
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from . import config as cfgmod
from . import validator as V
from .errors import ConfigError, DimensionError, DomainError, TubeKernelsError

log = logging.getLogger("tubekernels")

WORKERS_ENV = "TUBEKERNELS_WORKERS"
SCHEMA_VERSION = 1

EXPERIMENTS = {
    "symplectic-check": lambda c: V.experiment_symplectic_check(c.symplectic_check, c.seed),
    "gaussian-check": lambda c: V.experiment_gaussian_check(c.gaussian_check, c.seed),
    "kernel": lambda c: V.experiment_kernel(c.kernel),
    "scaling": lambda c: V.experiment_scaling(c.scaling, c.seed),
    "rapid-decay": lambda c: V.experiment_rapid_decay(c.rapid_decay),
    "weyl": lambda c: V.experiment_weyl(c.weyl),
    "husimi": lambda c: V.experiment_husimi(c.husimi),
    "qsymbol": lambda c: V.experiment_qsymbol(c.qsymbol),
}

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def format_cell(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return format(v, ".16e")
    return str(v)


def write_csv(path: Path, table: V.Table) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(table.columns)
        for row in table.rows:
            w.writerow([format_cell(v) for v in row])


def write_report(out_dir: Path, rep: V.Report, cfg: cfgmod.ExperimentConfig) -> None:
    d = out_dir / rep.experiment
    d.mkdir(parents=True, exist_ok=True)
    for name, table in rep.tables.items():
        write_csv(d / f"{name}.csv", table)
    doc = rep.to_dict()
    doc.pop("tables")
    doc["schema_version"] = SCHEMA_VERSION
    doc["csv"] = sorted(f"{name}.csv" for name in rep.tables)
    doc["runtime_s"] = rep.runtime_s
    doc["config_snapshot"] = cfgmod.snapshot(cfg)
    (d / "report.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _run_one(args: tuple[str, cfgmod.ExperimentConfig]) -> V.Report:
    name, cfg = args
    return V.timed(EXPERIMENTS[name], cfg)


def resolve_workers(cfg: cfgmod.ExperimentConfig) -> int:
    env = os.environ.get(WORKERS_ENV)
    if env is None:
        return cfg.workers
    try:
        n = int(env)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be a positive integer, got {env!r}") from None
    if n < 1:
        raise ConfigError(f"{WORKERS_ENV} must be a positive integer, got {env!r}")
    return n


def run_experiments(names: list[str], cfg: cfgmod.ExperimentConfig, workers: int = 1) -> list[V.Report]:
    """Run experiments in the given order; results come back in that order."""
    jobs = [(n, cfg) for n in names]
    if workers <= 1 or len(jobs) <= 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(_run_one, jobs))


def apply_override(data: dict, assignment: str) -> None:
    """Apply ``dotted.key=value`` to nested config dicts; scalar fields only."""
    key, sep, raw = assignment.partition("=")
    if not sep or not key:
        raise ConfigError(f"override must look like key=value, got {assignment!r}")
    parts = key.strip().split(".")
    cls = cfgmod.ExperimentConfig
    node = data
    for i, part in enumerate(parts):
        hints = typing.get_type_hints(cls)
        if part not in hints:
            raise ConfigError(f"unknown config key {'.'.join(parts[:i + 1])!r}")
        tp = hints[part]
        if i == len(parts) - 1:
            if dataclasses.is_dataclass(tp) or typing.get_origin(tp) is list:
                raise ConfigError(f"{key} is not a scalar field; edit the config file instead")
            try:
                value = tomllib.loads(f"v = {raw.strip()}")["v"]
            except tomllib.TOMLDecodeError:
                value = raw.strip()
            node[part] = value
        else:
            if not dataclasses.is_dataclass(tp):
                raise ConfigError(f"{'.'.join(parts[:i + 1])} is not a table")
            node = node.setdefault(part, {})
            cls = tp


def load_config(path: str, overrides: list[str]) -> cfgmod.ExperimentConfig:
    cfg = cfgmod.load(path)
    if overrides:
        data = cfgmod.to_dict(cfg)
        for o in overrides:
            apply_override(data, o)
        cfg = cfgmod.from_dict(cfgmod.ExperimentConfig, data)
        cfgmod.validate(cfg)
    return cfg


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tubekernels", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one experiment or all of them")
    r.add_argument("experiment", choices=[*EXPERIMENTS, "all"])
    r.add_argument("config", help="TOML config file")
    r.add_argument("-o", "--output-dir", help="override output_dir from the config")
    r.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a scalar config field, e.g. scaling.near_graph.lam=200")
    return p


def run(experiment: str, config_path: str, output_dir: str | None = None,
        overrides: list[str] | None = None) -> int:
    """Run an experiment (or ``"all"``), write artifacts and return the exit code."""
    try:
        cfg = load_config(config_path, overrides or [])
        workers = resolve_workers(cfg)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    out = Path(output_dir or cfg.output_dir)
    names = list(EXPERIMENTS) if experiment == "all" else [experiment]
    try:
        reports = run_experiments(names, cfg, workers)
    except (ConfigError, DomainError, DimensionError) as exc:
        log.error("hypothesis guard violated: %s", exc)
        return EXIT_CONFIG
    except TubeKernelsError as exc:
        log.error("numerical guard: %s", exc)
        return EXIT_NUMERIC
    for rep in reports:
        write_report(out, rep, cfg)
        for c in rep.checks:
            print(f"{'PASS' if c.passed else 'FAIL'} {rep.experiment}: {c.name} ({c.value!r}; target {c.target})")
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    return run(args.experiment, args.config, args.output_dir, args.overrides)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

"""Command line entry point: ``pmlmc {partition,simulate,run,sweep,oracle}``.

Exit codes: 0 success, 1 run failure or approximation regression, 2 usage
or configuration error.  Errors are one line on stderr of the form
``pmlmc: error: <Kind>: <message>``.  Set ``PMLMC_LOG`` (DEBUG, INFO, ...)
for progress logging.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import Sequence

from . import config as cfgmod
from .errors import (
    ApproximationViolation,
    ConfigError,
    InstanceTooLarge,
    InvalidArgs,
    InvalidSpec,
    ModelFailure,
    OutOfRange,
    PmlmcError,
    ProtocolViolation,
    UnschedulableTask,
)
from .metrics import sweep_csv
from .oracle import verify_two_approximation
from .partition import PartitionSpec, build_family
from .runtime.driver import run_mlmc
from .scheduler import TaskInstance
from .sweep import run_sweep

log = logging.getLogger("pmlmc")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
USAGE_ERRORS = (ConfigError, InvalidArgs, InvalidSpec, InstanceTooLarge, OutOfRange, UnschedulableTask)
RUN_ERRORS = (ModelFailure, ProtocolViolation, ApproximationViolation)

# named flags and the config key each one sets
FLAG_KEYS = {
    "p": "partition.p", "q": "partition.q",
    "levels": "estimator.levels", "samples": "estimator.samples", "eps": "estimator.eps",
    "model": "model.name", "mu": "model.mu", "sigma": "model.sigma",
    "mode": "run.mode", "comm_limit": "run.comm_limit", "seed": "run.seed",
    "out": "run.out", "timeline": "run.timeline", "log": "run.log",
    "batch_min": "batch.min_fraction", "batch_max": "batch.max_fraction",
    "master_cost": "costs.master", "latency": "costs.latency",
    "sweep": "sweep.kind", "nodes": "sweep.nodes", "node_size": "sweep.node_size",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _run_flags(sp: argparse.ArgumentParser, *, sweep: bool = False) -> None:
    sp.add_argument("--config", help="INI config file")
    sp.add_argument("--p", help="worker count")
    sp.add_argument("--q", help="group sizes per level, e.g. 8,64,512")
    sp.add_argument("--model", choices=("pause", "synthetic", "elliptic1d"))
    sp.add_argument("--mu", help="pause model mean duration (s)")
    sp.add_argument("--sigma", help="pause model spread (std reading)")
    sp.add_argument("--eps", help="error tolerance")
    sp.add_argument("--comm-limit", dest="comm_limit", help="children per coordinator (enables the tree)")
    sp.add_argument("--batch-min", dest="batch_min", help="minimum batch fraction")
    sp.add_argument("--batch-max", dest="batch_max", help="maximum batch fraction")
    sp.add_argument("--master-cost", dest="master_cost", help="simulated seconds per handled message")
    sp.add_argument("--latency", help="simulated message latency (s)")
    sp.add_argument("--seed")
    sp.add_argument("--out", help="output file (default stdout)")
    if sweep:
        sp.add_argument("--sweep", choices=("weak", "strong"))
        sp.add_argument("--nodes", help="node counts, e.g. 1,2,4,8")
        sp.add_argument("--node-size", dest="node_size", help="workers per node")
        sp.add_argument("--samples", help="base sample sizes N* per level")
    else:
        sp.add_argument("--levels", help="initial finest level L0 (default: all levels)")
        sp.add_argument("--samples", help="initial sample sizes per level")
        sp.add_argument("--adaptive", action="store_true", help="run the adaptive outer loop")
        sp.add_argument("--mode", choices=("simulate", "run"))
        sp.add_argument("--timeline", help="write the timeline JSON here")
        sp.add_argument("--log", help="write the message log (JSON lines) here")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="pmlmc", description="Parallel multilevel Monte Carlo scheduler", allow_abbrev=False)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("partition", help="print the partition family", allow_abbrev=False)
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--q", required=True)
    sp.add_argument("--json", action="store_true", help="print JSON only")
    sp.add_argument("--out", help="also write the JSON here")

    for name, help_ in (("simulate", "virtual-time run"), ("run", "run in the configured mode (default: real threads)")):
        sp = sub.add_parser(name, help=help_, allow_abbrev=False)
        _run_flags(sp)

    sp = sub.add_parser("sweep", help="weak or strong scaling sweep (simulated)", allow_abbrev=False)
    _run_flags(sp, sweep=True)

    sp = sub.add_parser("oracle", help="greedy vs optimal makespan on a small instance", allow_abbrev=False)
    sp.add_argument("instance", help='JSON: {"p": 2, "q": [1], "tasks": [[level, duration], ...]}')
    return ap


def split_dotted(argv: Sequence[str]) -> tuple[list[str], list[tuple[str, str]]]:
    """Pull ``--section.key value`` (or ``=value``) pairs out of argv."""
    rest, pairs = [], []
    it = iter(range(len(argv)))
    for i in it:
        tok = argv[i]
        name = tok[2:].split("=", 1)[0] if tok.startswith("--") else ""
        if "." not in name:
            rest.append(tok)
            continue
        if "=" in tok:
            pairs.append((name, tok.split("=", 1)[1]))
        elif i + 1 < len(argv):
            pairs.append((name, argv[i + 1]))
            next(it)
        else:
            raise UsageError(f"override --{name} needs a value")
    return rest, pairs


def _overrides(args: argparse.Namespace, dotted: list[tuple[str, str]]) -> list[tuple[str, str]]:
    out = list(dotted)
    for attr, key in FLAG_KEYS.items():
        v = getattr(args, attr, None)
        if v is not None:
            out.append((key, v))
    if getattr(args, "adaptive", False):
        out.append(("run.adaptive", "true"))
    if args.command == "sweep" and args.samples is not None:
        out = [(k if k != "estimator.samples" else "sweep.n_star", v) for k, v in out]
    return out


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _ints(text: str, what: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise InvalidArgs(f"{what} must be a comma separated list of integers") from None


def cmd_partition(args) -> int:
    fam = build_family(PartitionSpec(args.p, _ints(args.q, "--q")))
    js = fam.to_json(indent=2)
    if args.out:
        _emit(js, args.out)
    _emit(js if args.json else fam.to_text() + "\n" + js, None)
    return EXIT_OK


def cmd_run(args, dotted, default_mode: str) -> int:
    pinned = [("run.mode", default_mode)]
    if default_mode == "simulate":
        # the subcommand wins over the file; an explicit --mode still wins over both
        cp = cfgmod.load_config(args.config, pinned + _overrides(args, dotted))
    else:
        cp = cfgmod.load_config(args.config, _overrides(args, dotted), base=pinned)
    cfg = cfgmod.build_run_config(cp)
    try:
        report = run_mlmc(cfg)
    except ModelFailure as exc:
        partial = exc.partial_report
        if partial is not None and cfgmod._raw(cp, "run", "out"):
            _emit(partial.to_json(), cfgmod._raw(cp, "run", "out"))
        raise
    _emit(report.to_json(), cfgmod._raw(cp, "run", "out") or None)
    if cfgmod._raw(cp, "run", "timeline"):
        _emit(report.timeline.to_json(), cfgmod._raw(cp, "run", "timeline"))
    if cfgmod._raw(cp, "run", "log"):
        _emit(report.log_lines(), cfgmod._raw(cp, "run", "log"))
    log.info("estimate %.10g after %d iteration(s), A=%.4f", report.estimate, report.iterations, report.efficiency)
    return EXIT_OK


def cmd_sweep(args, dotted) -> int:
    cp = cfgmod.load_config(args.config, _overrides(args, dotted))
    result = run_sweep(cfgmod.build_sweep_config(cp))
    _emit(sweep_csv(result.points), cfgmod._raw(cp, "run", "out") or None)
    return EXIT_OK


def load_instance(path: str) -> tuple[int, tuple[int, ...], list[TaskInstance]]:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read instance {path}: {exc.strerror}") from None
    except ValueError as exc:
        raise ConfigError(f"instance {path} is not valid JSON: {exc}") from None
    try:
        p, q = int(data["p"]), tuple(int(x) for x in data["q"])
        tasks = [TaskInstance(i, int(l), float(w), q[int(l)]) for i, (l, w) in enumerate(data["tasks"])]
    except (KeyError, TypeError, IndexError, ValueError) as exc:
        raise ConfigError(f"instance {path}: expected p, q and tasks [[level, duration], ...] ({exc})") from None
    return p, q, tasks


def cmd_oracle(args) -> int:
    p, q, tasks = load_instance(args.instance)
    check = verify_two_approximation(tasks, build_family(PartitionSpec(p, q)))
    _emit(json.dumps({"greedy": check.greedy, "opt": check.opt, "ratio": check.ratio}, sort_keys=True), None)
    return EXIT_OK


def _setup_logging() -> None:
    level = os.environ.get("PMLMC_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def _fail(kind: str, message: str) -> None:
    sys.stderr.write(f"pmlmc: error: {kind}: {' '.join(str(message).split())}\n")


def main(argv: Sequence[str] | None = None) -> int:
    _setup_logging()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        rest, dotted = split_dotted(argv)
        args = build_parser().parse_args(rest)
        if args.command == "partition":
            return cmd_partition(args)
        if args.command in ("simulate", "run"):
            return cmd_run(args, dotted, "simulate" if args.command == "simulate" else "run")
        if args.command == "sweep":
            return cmd_sweep(args, dotted)
        return cmd_oracle(args)
    except UsageError as exc:
        _fail("UsageError", str(exc))
        return EXIT_USAGE
    except (*USAGE_ERRORS, ValueError) as exc:
        _fail(type(exc).__name__, str(exc))
        return EXIT_USAGE
    except RUN_ERRORS as exc:
        _fail(type(exc).__name__, str(exc))
        return EXIT_FAIL
    except PmlmcError as exc:
        _fail(type(exc).__name__, str(exc))
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())

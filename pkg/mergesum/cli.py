"""
Command-line front end.

Human-readable tables go to stdout, summary files to ``--output``, and logs
to stderr. Exit codes: 0 success, 1 operational error, 2 verification
failure or a witness found for a statistic declared mergeable.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Literal, Optional

import pandas as pd
from pydantic import BaseModel, ConfigDict, PositiveInt, ValidationError, model_validator

from mergesum.core.config import settings
from mergesum.core.errors import MergesumError
from mergesum.services.engine import ReductionPlan, aggregate
from mergesum.services.ingestion import SplitStrategy, load, load_schema, split
from mergesum.services.serialization import SummaryFile, merge_files, write_summary_file
from mergesum.services.summaries import describe, merge
from mergesum.services.verification import (
    WORKED_EXAMPLES,
    check_witness,
    format_witness,
    get_statistic,
    run_oracle_suite,
    search_witness,
)

logger = logging.getLogger("mergesum")

EXIT_OK, EXIT_ERROR, EXIT_FAILED = 0, 1, 2


class CommandConfig(BaseModel):
    """Parsed flags, checked for consistency before any work starts."""

    model_config = ConfigDict(extra="ignore")

    command: Literal["summarize", "merge", "verify", "witness", "serve"]
    inputs: List[Path] = []
    schema_path: Optional[Path] = None
    format: Optional[Literal["csv", "jsonl"]] = None
    split: Optional[str] = None
    partitions: Optional[PositiveInt] = None
    plan: Literal["sequential", "tree"] = "sequential"
    workers: PositiveInt = settings.WORKERS
    deterministic: bool = False
    hex_floats: bool = False
    output: Optional[Path] = None
    variable: Optional[str] = None
    splits: PositiveInt = settings.DEFAULT_SPLITS
    seed: int = settings.DEFAULT_SEED
    tolerance: Optional[float] = None
    inject_fault: bool = False
    stat: Optional[str] = None
    universe: Optional[str] = None
    max_size: Optional[PositiveInt] = None
    example: Optional[Literal[1, 2]] = None
    host: str = settings.API_HOST
    port: int = settings.API_PORT

    @model_validator(mode="after")
    def _consistent(self):
        if self.command in ("summarize", "verify") and (len(self.inputs) != 1 or self.schema_path is None):
            raise ValueError(f"{self.command} needs one data file and --schema")
        if self.split and self.partitions:
            raise ValueError("--split and --partitions are mutually exclusive")
        if self.command == "merge":
            if not self.inputs:
                raise ValueError("merge needs at least one summary file")
            if self.output is None:
                raise ValueError("merge needs --output")
        if self.tolerance is not None and self.tolerance <= 0:
            raise ValueError("--tolerance must be positive")
        if self.command == "witness":
            search = (self.stat, self.universe, self.max_size)
            if self.example is not None and any(v is not None for v in search):
                raise ValueError("--paper-example cannot be combined with --stat/--universe/--max-size")
            if self.example is None and any(v is None for v in search):
                raise ValueError("witness needs --stat, --universe and --max-size, or --paper-example")
        return self

    @property
    def strategy(self) -> SplitStrategy:
        if self.split:
            return SplitStrategy.parse(self.split)
        return SplitStrategy("contiguous", k=self.partitions or 1)

    @property
    def reduction_plan(self) -> ReductionPlan:
        return ReductionPlan(mode=self.plan, workers=self.workers, deterministic=self.deterministic)


def parse_universe(text: str) -> List[float]:
    """'a..b' as the integers a..b inclusive."""
    low, sep, high = text.partition("..")
    try:
        a, b = int(low), int(high)
    except ValueError:
        raise MergesumError(f"universe must look like 'a..b', got '{text}'") from None
    if not sep or a > b:
        raise MergesumError(f"universe must look like 'a..b' with a <= b, got '{text}'")
    return [float(v) for v in range(a, b + 1)]


def _print_table(rows: list, columns: List[str]) -> None:
    print(pd.DataFrame(rows, columns=columns).to_string(index=False))


def cmd_summarize(cfg: CommandConfig) -> int:
    schema = load_schema(cfg.schema_path)
    dataset = load(cfg.inputs[0], schema, cfg.format)
    parts = split(dataset, cfg.strategy)
    result = aggregate(parts, schema, cfg.reduction_plan)
    _print_table(
        [(name, s.kind, describe(s)) for name, s in result.variables.items()],
        ["variable", "kind", "summary"],
    )
    print(f"units: {result.n}  partitions: {len(parts)}")
    if cfg.output:
        encoding = "hex" if cfg.hex_floats else settings.FLOAT_ENCODING
        write_summary_file(cfg.output, SummaryFile(result, result.provenance, encoding))
    return EXIT_OK


def cmd_merge(cfg: CommandConfig) -> int:
    merged = merge_files(cfg.inputs)
    if cfg.hex_floats:
        merged = SummaryFile(merged.payload, merged.provenance, "hex")
    write_summary_file(cfg.output, merged)
    payload = merged.payload
    if merged.payload_type == "schema":
        rows = [(name, s.kind, describe(s)) for name, s in payload.variables.items()]
    else:
        rows = [("-", payload.kind, describe(payload))]
    _print_table(rows, ["variable", "kind", "summary"])
    print(f"files: {len(cfg.inputs)}  partitions: {len(merged.provenance)}")
    return EXIT_OK


def _drop_right(a, b):
    # --inject-fault: ignores the right-hand summary
    return a


def cmd_verify(cfg: CommandConfig) -> int:
    schema = load_schema(cfg.schema_path)
    dataset = load(cfg.inputs[0], schema, cfg.format)
    specs = schema.specs()
    if cfg.variable is not None:
        if cfg.variable not in specs:
            raise MergesumError(f"schema has no variable '{cfg.variable}'")
        specs = {cfg.variable: specs[cfg.variable]}
    merge_fn = _drop_right if cfg.inject_fault else merge
    rows, failed = [], 0
    for name, spec in specs.items():
        failures = run_oracle_suite(
            spec,
            dataset.frame[name].tolist(),
            cfg.splits,
            cfg.seed,
            cfg.tolerance,
            dataset.unit_ids,
            merge_fn,
        )
        failed += len(failures)
        detail = failures[0].discrepancy if failures else ""
        rows.append((name, spec.kind, cfg.splits - len(failures), cfg.splits, "pass" if not failures else "FAIL", detail))
    _print_table(rows, ["variable", "kind", "passed", "splits", "result", "first discrepancy"])
    return EXIT_FAILED if failed else EXIT_OK


def cmd_witness(cfg: CommandConfig) -> int:
    if cfg.example is not None:
        report = check_witness(WORKED_EXAMPLES[cfg.example])
        sys.stdout.write(format_witness(report))
        return EXIT_OK if report.proves_non_mergeable else EXIT_FAILED
    stat = get_statistic(cfg.stat)
    found = search_witness(stat, parse_universe(cfg.universe), cfg.max_size)
    if found is None:
        print(f"{stat.name}: none found")
        return EXIT_OK
    sys.stdout.write(format_witness(check_witness(found)))
    return EXIT_FAILED if stat.expect_mergeable else EXIT_OK


def cmd_serve(cfg: CommandConfig) -> int:
    import uvicorn

    uvicorn.run("mergesum.main:app", host=cfg.host, port=cfg.port)
    return EXIT_OK


COMMANDS = {
    "summarize": cmd_summarize,
    "merge": cmd_merge,
    "verify": cmd_verify,
    "witness": cmd_witness,
    "serve": cmd_serve,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mergesum", description="Exactly mergeable summaries")
    parser.add_argument("--log-level", default=settings.LOG_LEVEL)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("summarize", help="summarize a data file partition by partition")
    p.add_argument("inputs", nargs=1, type=Path, metavar="DATA")
    p.add_argument("--schema", dest="schema_path", type=Path)
    p.add_argument("--format", choices=["csv", "jsonl"])
    group = p.add_mutually_exclusive_group()
    group.add_argument("--split", help="round-robin:K, contiguous:K or by-column:NAME")
    group.add_argument("--partitions", type=int, help="shorthand for contiguous:K")
    p.add_argument("--plan", choices=["sequential", "tree"], default="sequential")
    p.add_argument("--workers", type=int, default=settings.WORKERS)
    p.add_argument("--deterministic", action="store_true")
    p.add_argument("--hex-floats", action="store_true")
    p.add_argument("--output", type=Path)

    p = sub.add_parser("merge", help="merge summary files over disjoint partitions")
    p.add_argument("inputs", nargs="+", type=Path, metavar="FILE")
    p.add_argument("--output", type=Path)
    p.add_argument("--hex-floats", action="store_true")

    p = sub.add_parser("verify", help="check the merge law on random splits of a data file")
    p.add_argument("inputs", nargs=1, type=Path, metavar="DATA")
    p.add_argument("--schema", dest="schema_path", type=Path)
    p.add_argument("--format", choices=["csv", "jsonl"])
    p.add_argument("--variable")
    p.add_argument("--splits", type=int, default=settings.DEFAULT_SPLITS)
    p.add_argument("--seed", type=int, default=settings.DEFAULT_SEED)
    p.add_argument("--tolerance", type=float)
    p.add_argument("--inject-fault", action="store_true", help="use a broken merge to test the checker")

    p = sub.add_parser("witness", help="search for or print a non-mergeability witness")
    p.add_argument("--stat")
    p.add_argument("--universe", help="integer range a..b")
    p.add_argument("--max-size", type=int)
    p.add_argument("--paper-example", "--example", dest="example", type=int, choices=sorted(WORKED_EXAMPLES))

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default=settings.API_HOST)
    p.add_argument("--port", type=int, default=settings.API_PORT)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        # usage errors are operational errors, not verification failures
        return EXIT_OK if e.code == 0 else EXIT_ERROR
    logging.basicConfig(
        level=args.log_level.upper(),
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = CommandConfig.model_validate({k: v for k, v in vars(args).items() if v is not None})
        return COMMANDS[cfg.command](cfg)
    except ValidationError as e:
        logger.error("invalid arguments: %s", e)
    except MergesumError as e:
        logger.error("%s", e)
    except OSError as e:
        logger.error("I/O error: %s", e)
    return EXIT_ERROR

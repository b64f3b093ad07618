"""
Loading unit-level data and cutting it into disjoint partitions.

CSV dialect is fixed: comma separator, header row, UTF-8, optional double
quotes. JSON-lines files hold one object per unit. Every field a schema
variable names must be present; there is no missing-value handling.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, List, Literal, Optional

import numpy as np
import pandas as pd
from pydantic import ValidationError

from mergesum.core.errors import IngestError
from mergesum.schemas.specs import DatasetSchema, VariableSpec

logger = logging.getLogger(__name__)

Format = Literal["csv", "jsonl"]


def load_schema(path) -> DatasetSchema:
    try:
        with open(path, encoding="utf-8") as f:
            return DatasetSchema.model_validate(json.load(f))
    except FileNotFoundError:
        raise IngestError(f"schema file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise IngestError(f"schema is not valid JSON: {e}") from e
    except ValidationError as e:
        raise IngestError(f"invalid schema {path}: {e}") from e


@dataclass(frozen=True, eq=False)
class Dataset:
    """Typed records indexed by unit id (strings), one column per variable."""

    name: str
    schema: DatasetSchema
    frame: pd.DataFrame

    def __len__(self) -> int:
        return len(self.frame)

    @property
    def unit_ids(self) -> List[str]:
        return self.frame.index.tolist()

    def equals(self, other: "Dataset") -> bool:
        return self.schema == other.schema and self.frame.equals(other.frame) and self.unit_ids == other.unit_ids


@dataclass(frozen=True, eq=False)
class Partition:
    partition_id: str
    frame: pd.DataFrame

    def __len__(self) -> int:
        return len(self.frame)

    @property
    def unit_ids(self) -> List[str]:
        return self.frame.index.tolist()


def _missing(value: Any) -> bool:
    if value is None:
        return True
    if isinstance(value, str):
        return value == ""
    return bool(pd.isna(value))


def _as_label(value: Any, row: int, column: str) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    raise IngestError(f"expected a category label, got {value!r}", row, column)


def _as_number(value: Any, row: int, column: str) -> float:
    if isinstance(value, bool):
        raise IngestError(f"expected a number, got {value!r}", row, column)
    try:
        number = float(value)
    except (TypeError, ValueError):
        raise IngestError(f"expected a number, got {value!r}", row, column) from None
    if not np.isfinite(number):
        raise IngestError(f"non-finite number {value!r}", row, column)
    return number


def _convert(raw: pd.Series, var: VariableSpec) -> list:
    out = []
    for row, value in enumerate(raw.tolist(), start=1):
        if _missing(value):
            raise IngestError("missing value", row, var.name)
        if var.is_numeric:
            out.append(_as_number(value, row, var.name))
        else:
            label = _as_label(value, row, var.name)
            if label not in var.categories:
                raise IngestError(f"unknown category {label!r}", row, var.name)
            out.append(label)
    return out


def _read(path: Path, fmt: Format) -> pd.DataFrame:
    try:
        if fmt == "csv":
            return pd.read_csv(path, sep=",", quotechar='"', encoding="utf-8", dtype=str, keep_default_na=False)
        if path.stat().st_size == 0:
            return pd.DataFrame()
        return pd.read_json(path, lines=True, orient="records", dtype=False, precise_float=True, convert_dates=False)
    except FileNotFoundError:
        raise IngestError(f"data file not found: {path}") from None
    except (pd.errors.ParserError, pd.errors.EmptyDataError, ValueError, UnicodeDecodeError) as e:
        raise IngestError(f"cannot parse {path}: {e}") from e


def load(path, schema: DatasetSchema, format: Optional[Format] = None) -> Dataset:
    """Read ``path`` (CSV or JSON lines) and type it against ``schema``."""
    path = Path(path)
    fmt = format or ("jsonl" if path.suffix in (".jsonl", ".ndjson") else "csv")
    raw = _read(path, fmt)
    logger.info("Loaded %s (%s): %d rows", path, fmt, len(raw))

    wanted = [v.name for v in schema.variables] + ([schema.id_column] if schema.id_column else [])
    missing = [c for c in wanted if c not in raw.columns]
    if missing and len(raw):
        raise IngestError(f"columns {missing} not found in {path.name}")
    extra = [c for c in raw.columns if c not in wanted]
    if extra:
        logger.info("Ignoring undeclared columns %s", extra)

    if schema.id_column and len(raw):
        ids = []
        for row, value in enumerate(raw[schema.id_column].tolist(), start=1):
            if _missing(value):
                raise IngestError("missing unit id", row, schema.id_column)
            ids.append(_as_label(value, row, schema.id_column))
    else:
        ids = [str(i) for i in range(1, len(raw) + 1)]
    seen = set()
    for row, uid in enumerate(ids, start=1):
        if uid in seen:
            raise IngestError(f"duplicate unit id {uid!r}", row, schema.id_column)
        seen.add(uid)

    columns = {}
    for var in schema.variables:
        values = _convert(raw[var.name], var) if len(raw) else []
        columns[var.name] = pd.Series(values, dtype="float64" if var.is_numeric else "object")
    frame = pd.DataFrame(columns)
    frame.index = pd.Index(ids, dtype="object", name="unit_id")
    return Dataset(name=path.stem, schema=schema, frame=frame)


@dataclass(frozen=True)
class SplitStrategy:
    kind: Literal["round-robin", "contiguous", "by-column"]
    k: Optional[int] = None
    column: Optional[str] = None

    @classmethod
    def parse(cls, text: str) -> "SplitStrategy":
        """'round-robin:K', 'contiguous:K' or 'by-column:NAME'."""
        kind, _, arg = text.partition(":")
        if kind == "by-column":
            if not arg:
                raise IngestError("by-column needs a column name")
            return cls(kind, column=arg)
        if kind in ("round-robin", "contiguous"):
            try:
                return cls(kind, k=int(arg))
            except ValueError:
                raise IngestError(f"{kind} needs an integer partition count, got {arg!r}") from None
        raise IngestError(f"unknown split strategy '{text}'")


def split(ds: Dataset, strategy: SplitStrategy) -> List[Partition]:
    """Disjoint partitions covering ``ds``; deterministic for a given strategy."""
    frame = ds.frame
    if strategy.kind == "by-column":
        if strategy.column not in frame.columns:
            raise IngestError(f"cannot split by unknown column '{strategy.column}'")
        parts = [
            Partition(f"{ds.name}#{strategy.column}={value}", group)
            for value, group in frame.groupby(strategy.column, sort=True)
        ]
    else:
        k = strategy.k
        if k is None or k < 1:
            raise IngestError(f"partition count must be at least 1, got {k}")
        if strategy.kind == "contiguous":
            if len(frame) and k > len(frame):
                raise IngestError(f"cannot cut {len(frame)} records into {k} contiguous partitions")
            chunks = np.array_split(np.arange(len(frame)), k)
        else:
            chunks = [np.arange(i, len(frame), k) for i in range(k)]
        parts = [Partition(f"{ds.name}#{i}", frame.iloc[idx]) for i, idx in enumerate(chunks)]
    logger.info("Split %s into %d partitions (%s)", ds.name, len(parts), strategy.kind)
    return parts

"""
Building new exactly mergeable summaries out of existing ones.

``compose`` gives the tuple summary Σ1 ⊕ Σ2 ⊕ ...; ``summarize_records``
applies one spec per variable over a set of records and yields a
``SchemaSummary`` whose merge is the per-variable merge.
"""

from __future__ import annotations

from typing import Any, Dict, Iterable, Mapping, Optional, Sequence, Tuple, Union

import pandas as pd
from pydantic import Field, NonNegativeInt, model_validator

from mergesum.core.errors import DisjointnessError, MergeError, SpecError
from mergesum.schemas.specs import ComposedSpec, DatasetSchema, FrozenModel, IntervalSpec
from mergesum.services.summaries import ComposedSummary, Summary, merge, spec_of, summarize, units_of


def compose(specs: Sequence) -> Any:
    """Spec of the composition of ``specs``; a single spec composes to itself."""
    specs = list(specs)
    if not specs:
        raise SpecError("compose needs at least one spec")
    if len(specs) == 1:
        return specs[0]
    return ComposedSpec(parts=tuple(specs))


def interval(values) -> ComposedSummary:
    """[min, max] of ``values`` as the composed (min, max) summary."""
    return summarize(IntervalSpec(), values)


def interval_bounds(s: ComposedSummary) -> Optional[Tuple[float, float]]:
    """(m, M) of an interval summary, None for the empty interval."""
    if len(s.parts) != 2 or [p.kind for p in s.parts] != ["min", "max"]:
        raise SpecError("not an interval summary")
    low, high = s.parts
    if low.value is None:
        return None
    return low.value, high.value


def project(s: ComposedSummary, i: int):
    return s.parts[i]


class SchemaSummary(FrozenModel):
    """One summary per variable, all over the same unit set."""

    variables: Dict[str, Summary] = Field(min_length=1)
    n: NonNegativeInt
    provenance: Tuple[str, ...] = ()

    @model_validator(mode="after")
    def _same_units(self):
        for name, s in self.variables.items():
            units = units_of(s)
            if units is not None and units != self.n:
                raise ValueError(f"variable '{name}' covers {units} units, schema summary says {self.n}")
        return self

    def specs(self) -> Dict[str, Any]:
        return {name: spec_of(s) for name, s in self.variables.items()}


SchemaLike = Union[DatasetSchema, Mapping[str, Any]]


def _schema_specs(schema: SchemaLike) -> Dict[str, Any]:
    return schema.specs() if isinstance(schema, DatasetSchema) else dict(schema)


def _columns(specs: Mapping[str, Any], records) -> Tuple[Dict[str, list], int]:
    if isinstance(records, pd.DataFrame):
        missing = [name for name in specs if name not in records.columns]
        if missing:
            raise SpecError(f"records lack variables {missing}")
        return {name: records[name].tolist() for name in specs}, len(records)
    columns: Dict[str, list] = {name: [] for name in specs}
    count = 0
    for pos, record in enumerate(records):
        for name in specs:
            if name not in record or record[name] is None:
                raise SpecError(f"record {pos} has no value for '{name}'")
            columns[name].append(record[name])
        count += 1
    return columns, count


def summarize_records(
    schema: SchemaLike,
    records: Union[pd.DataFrame, Iterable[Mapping[str, Any]]],
    unit_ids: Optional[Sequence[str]] = None,
    provenance: Sequence[str] = (),
) -> SchemaSummary:
    """Per-variable summaries of ``records`` (a DataFrame or mappings)."""
    specs = _schema_specs(schema)
    if not specs:
        raise SpecError("schema declares no variables")
    columns, count = _columns(specs, records)
    summaries = {name: summarize(spec, columns[name], unit_ids) for name, spec in specs.items()}
    return SchemaSummary(variables=summaries, n=count, provenance=tuple(sorted(provenance)))


def merge_schema(x: SchemaSummary, y: SchemaSummary) -> SchemaSummary:
    if set(x.variables) != set(y.variables):
        raise MergeError(f"schema mismatch: {sorted(x.variables)} vs {sorted(y.variables)}")
    overlap = set(x.provenance) & set(y.provenance)
    if overlap:
        raise DisjointnessError(f"partitions summarized twice: {sorted(overlap)}")
    merged = {name: merge(x.variables[name], y.variables[name]) for name in x.variables}
    return SchemaSummary(variables=merged, n=x.n + y.n, provenance=tuple(sorted(x.provenance + y.provenance)))

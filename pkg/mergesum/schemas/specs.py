"""
Declarative summary specs.

A spec names a summary kind together with every parameter that takes part in
merge compatibility (k and order, bin edges, category set, moment order,
reference set). Specs are frozen pydantic models so they compare by value,
hash, and load straight from schema JSON.
"""

from __future__ import annotations

import math
from typing import Annotated, Any, List, Literal, Optional, Tuple, Union

from pydantic import (
    AfterValidator,
    BaseModel,
    BeforeValidator,
    ConfigDict,
    Field,
    PositiveInt,
    field_validator,
    model_validator,
)


def _parse_hex_float(value: Any) -> Any:
    # summary files written in hex mode carry floats as float.hex() strings
    if isinstance(value, str) and "0x" in value.lower():
        try:
            return float.fromhex(value)
        except ValueError:
            return value
    return value


def _require_finite(value: float) -> float:
    if not math.isfinite(value):
        raise ValueError(f"non-finite value {value!r}")
    return value + 0.0  # -0.0 is stored as 0.0


FiniteFloat = Annotated[float, BeforeValidator(_parse_hex_float), AfterValidator(_require_finite)]


class FrozenModel(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


def check_edges(edges: Tuple[float, ...]) -> Tuple[float, ...]:
    if len(edges) < 2:
        raise ValueError("bin edges need at least two values")
    if any(b <= a for a, b in zip(edges, edges[1:])):
        raise ValueError(f"bin edges must be strictly increasing: {list(edges)}")
    return edges


def check_categories(categories: Tuple[str, ...]) -> Tuple[str, ...]:
    if not categories:
        raise ValueError("category set must not be empty")
    if len(set(categories)) != len(categories):
        raise ValueError(f"duplicate category labels: {list(categories)}")
    return categories


Edges = Annotated[Tuple[FiniteFloat, ...], AfterValidator(check_edges)]
Categories = Annotated[Tuple[str, ...], AfterValidator(check_categories)]


class MembershipReference(FrozenModel):
    """Reference set C of a membership count.

    Exactly one form is given: an inclusive numeric range (either end may be
    open), a label set, or an explicit set of unit ids.
    """

    name: str
    low: Optional[FiniteFloat] = None
    high: Optional[FiniteFloat] = None
    labels: Optional[Tuple[str, ...]] = None
    unit_ids: Optional[Tuple[str, ...]] = None

    @field_validator("labels", "unit_ids")
    @classmethod
    def _sorted_unique(cls, v):
        # canonical order so equal sets compare equal
        return None if v is None else tuple(sorted(set(v)))

    @model_validator(mode="after")
    def _one_form(self):
        forms = [
            self.low is not None or self.high is not None,
            self.labels is not None,
            self.unit_ids is not None,
        ]
        if sum(forms) != 1:
            raise ValueError("reference needs exactly one of: low/high range, labels, unit_ids")
        if self.low is not None and self.high is not None and self.low > self.high:
            raise ValueError(f"empty range [{self.low}, {self.high}]")
        return self

    @property
    def by_unit(self) -> bool:
        return self.unit_ids is not None

    @property
    def is_numeric(self) -> bool:
        return self.labels is None and self.unit_ids is None


class CountSpec(FrozenModel):
    kind: Literal["count"] = "count"


class ExtremumSpec(FrozenModel):
    kind: Literal["min", "max"]


class SumSpec(FrozenModel):
    kind: Literal["sum"] = "sum"


class ExtremeKSpec(FrozenModel):
    kind: Literal["extreme_k"] = "extreme_k"
    k: PositiveInt
    order: Literal["smallest", "largest"] = "largest"


class MeanSpec(FrozenModel):
    kind: Literal["mean"] = "mean"


class MomentSpec(FrozenModel):
    kind: Literal["moments"] = "moments"
    order: int = Field(2, ge=2)


class MembershipSpec(FrozenModel):
    kind: Literal["membership"] = "membership"
    reference: MembershipReference


class BarChartSpec(FrozenModel):
    kind: Literal["bar_chart"] = "bar_chart"
    categories: Categories


class HistogramSpec(FrozenModel):
    kind: Literal["histogram"] = "histogram"
    edges: Edges


class DistributionSpec(FrozenModel):
    """(n, p) over either a category set or histogram bins."""

    kind: Literal["distribution"] = "distribution"
    categories: Optional[Categories] = None
    edges: Optional[Edges] = None

    @model_validator(mode="after")
    def _one_support(self):
        if (self.categories is None) == (self.edges is None):
            raise ValueError("distribution needs exactly one of: categories, edges")
        return self


class IntervalSpec(FrozenModel):
    kind: Literal["interval"] = "interval"


class ComposedSpec(FrozenModel):
    kind: Literal["composed"] = "composed"
    parts: Tuple["SummarySpec", ...] = Field(min_length=1)


SummarySpec = Annotated[
    Union[
        CountSpec,
        ExtremumSpec,
        SumSpec,
        ExtremeKSpec,
        MeanSpec,
        MomentSpec,
        MembershipSpec,
        BarChartSpec,
        HistogramSpec,
        DistributionSpec,
        IntervalSpec,
        ComposedSpec,
    ],
    Field(discriminator="kind"),
]

ComposedSpec.model_rebuild()

NUMERIC_KINDS = {"min", "max", "sum", "extreme_k", "mean", "moments", "histogram", "interval"}
CATEGORICAL_KINDS = {"bar_chart"}


def _needs_numeric(spec) -> bool:
    if isinstance(spec, ComposedSpec):
        return any(_needs_numeric(p) for p in spec.parts)
    if isinstance(spec, DistributionSpec):
        return spec.edges is not None
    if isinstance(spec, MembershipSpec):
        return spec.reference.is_numeric
    return spec.kind in NUMERIC_KINDS


def _needs_categorical(spec) -> bool:
    if isinstance(spec, ComposedSpec):
        return any(_needs_categorical(p) for p in spec.parts)
    if isinstance(spec, DistributionSpec):
        return spec.categories is not None
    if isinstance(spec, MembershipSpec):
        return spec.reference.labels is not None
    return spec.kind in CATEGORICAL_KINDS


class VariableSpec(FrozenModel):
    name: str
    type: Literal["numeric", "categorical", "binned"]
    categories: Optional[Categories] = None
    edges: Optional[Edges] = None
    summary: SummarySpec

    @model_validator(mode="before")
    @classmethod
    def _inherit_support(cls, data: Any) -> Any:
        # bar charts, histograms and distributions may leave out the K or B the variable declares
        if not isinstance(data, dict) or not isinstance(data.get("summary"), dict):
            return data
        summary = dict(data["summary"])
        kind = summary.get("kind")
        if kind in ("bar_chart", "distribution") and data.get("categories") is not None:
            if "categories" not in summary and "edges" not in summary:
                summary["categories"] = data["categories"]
        if kind in ("histogram", "distribution") and data.get("edges") is not None:
            if "categories" not in summary and "edges" not in summary:
                summary["edges"] = data["edges"]
        return {**data, "summary": summary}

    @model_validator(mode="after")
    def _consistent(self):
        if self.type == "categorical" and self.categories is None:
            raise ValueError(f"categorical variable '{self.name}' must declare its categories")
        if self.type == "binned" and self.edges is None:
            raise ValueError(f"binned variable '{self.name}' must declare its edges")
        if self.type == "categorical" and _needs_numeric(self.summary):
            raise ValueError(f"summary '{self.summary.kind}' needs numeric values; '{self.name}' is categorical")
        if self.type != "categorical" and _needs_categorical(self.summary):
            raise ValueError(f"summary '{self.summary.kind}' needs category labels; '{self.name}' is {self.type}")
        return self

    @property
    def is_numeric(self) -> bool:
        return self.type != "categorical"


class DatasetSchema(FrozenModel):
    id_column: Optional[str] = None
    variables: List[VariableSpec] = Field(min_length=1)

    @model_validator(mode="after")
    def _unique_names(self):
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate variable names: {names}")
        if self.id_column is not None and self.id_column in names:
            raise ValueError(f"id column '{self.id_column}' is also declared as a variable")
        return self

    def specs(self) -> dict:
        return {v.name: v.summary for v in self.variables}

    def variable(self, name: str) -> VariableSpec:
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(name)

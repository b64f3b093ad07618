"""
Exactly mergeable summaries.

Every summary kind is a frozen pydantic model: a value that can be compared,
hashed and dumped to JSON. ``summarize`` builds a summary from raw values,
``merge`` combines the summaries of two disjoint unit sets so that

    merge(summarize(spec, A), summarize(spec, B)) == summarize(spec, A ++ B)

The empty summary of each kind is the identity element of its merge.
Disjointness of the underlying unit sets cannot be seen from the summaries;
it stays the caller's obligation (see ``verification.disjointness_guard``).
"""

from __future__ import annotations

import math
from collections import Counter
from functools import reduce, singledispatch
from typing import Annotated, Any, Dict, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import Field, NonNegativeInt, PositiveInt, TypeAdapter, model_validator

from mergesum.core.config import settings
from mergesum.core.errors import EmptySummaryError, MergeError, SpecError
from mergesum.schemas.specs import (
    BarChartSpec,
    Categories,
    ComposedSpec,
    CountSpec,
    DistributionSpec,
    Edges,
    ExtremeKSpec,
    ExtremumSpec,
    FiniteFloat,
    FrozenModel,
    HistogramSpec,
    IntervalSpec,
    MeanSpec,
    MembershipReference,
    MembershipSpec,
    MomentSpec,
    SumSpec,
)

Value = Union[float, str]

# kinds whose merge law holds bit-exactly; the others hold within FLOAT_REL_TOL
EXACT_KINDS = frozenset({"count", "min", "max", "extreme_k", "membership", "bar_chart", "histogram"})


def histogram_support(edges: Sequence[float]) -> Tuple[str, ...]:
    """Ordered support labels of a histogram: underflow, bins, overflow."""
    edges = [float(e) for e in edges]
    labels = [f"<{edges[0]!r}"]
    last = len(edges) - 2
    for i, (lo, hi) in enumerate(zip(edges, edges[1:])):
        labels.append(f"[{lo!r},{hi!r}]" if i == last else f"[{lo!r},{hi!r})")
    labels.append(f">{edges[-1]!r}")
    return tuple(labels)


class CountSummary(FrozenModel):
    kind: Literal["count"] = "count"
    n: NonNegativeInt = 0

    def _merge(self, other: "CountSummary") -> "CountSummary":
        return CountSummary(n=self.n + other.n)


class ExtremumSummary(FrozenModel):
    kind: Literal["min", "max"]
    value: Optional[FiniteFloat] = None

    def _merge(self, other: "ExtremumSummary") -> "ExtremumSummary":
        if self.value is None:
            return other
        if other.value is None:
            return self
        pick = min if self.kind == "min" else max
        return ExtremumSummary(kind=self.kind, value=pick(self.value, other.value))


class SumSummary(FrozenModel):
    kind: Literal["sum"] = "sum"
    total: FiniteFloat = 0.0

    def _merge(self, other: "SumSummary") -> "SumSummary":
        return SumSummary(total=self.total + other.total)


class ExtremeK(FrozenModel):
    """The k smallest or k largest values, duplicates kept."""

    kind: Literal["extreme_k"] = "extreme_k"
    k: PositiveInt
    order: Literal["smallest", "largest"]
    values: Tuple[FiniteFloat, ...] = ()

    @model_validator(mode="after")
    def _sorted_and_bounded(self):
        if len(self.values) > self.k:
            raise ValueError(f"{len(self.values)} values kept for k={self.k}")
        pairs = zip(self.values, self.values[1:])
        if self.order == "smallest" and any(b < a for a, b in pairs):
            raise ValueError("values must be sorted ascending")
        if self.order == "largest" and any(b > a for a, b in pairs):
            raise ValueError("values must be sorted descending")
        return self

    def _merge(self, other: "ExtremeK") -> "ExtremeK":
        pooled = sorted(self.values + other.values, reverse=self.order == "largest")
        return ExtremeK(k=self.k, order=self.order, values=tuple(pooled[: self.k]))


class MeanSummary(FrozenModel):
    kind: Literal["mean"] = "mean"
    n: NonNegativeInt = 0
    mean: Optional[FiniteFloat] = None

    @model_validator(mode="after")
    def _mean_iff_units(self):
        if (self.n == 0) != (self.mean is None):
            raise ValueError("mean is present exactly when n > 0")
        return self

    def _merge(self, other: "MeanSummary") -> "MeanSummary":
        if self.n == 0:
            return other
        if other.n == 0:
            return self
        n = self.n + other.n
        return MeanSummary(n=n, mean=(self.n * self.mean + other.n * other.mean) / n)


class MomentSummary(FrozenModel):
    """(n, S_1, ..., S_p) with S_k the sum of k-th powers."""

    kind: Literal["moments"] = "moments"
    n: NonNegativeInt = 0
    power_sums: Tuple[FiniteFloat, ...] = Field(min_length=2)

    @model_validator(mode="after")
    def _consistent(self):
        if self.n == 0:
            if any(s != 0 for s in self.power_sums):
                raise ValueError("power sums of an empty set must be zero")
            return self
        s1, s2 = self.power_sums[0], self.power_sums[1]
        second = s2 / self.n
        if s2 < 0 or second - (s1 / self.n) ** 2 < -1e-9 * max(second, 1.0):
            raise ValueError("power sums imply a negative variance")
        return self

    @property
    def order(self) -> int:
        return len(self.power_sums)

    def _merge(self, other: "MomentSummary") -> "MomentSummary":
        return MomentSummary(
            n=self.n + other.n,
            power_sums=tuple(a + b for a, b in zip(self.power_sums, other.power_sums)),
        )


class MembershipCount(FrozenModel):
    """n(A; C) = |A ∩ C| next to n = |A|."""

    kind: Literal["membership"] = "membership"
    reference: MembershipReference
    n: NonNegativeInt = 0
    count: NonNegativeInt = 0

    @model_validator(mode="after")
    def _count_bounded(self):
        if self.count > self.n:
            raise ValueError(f"count {self.count} exceeds n {self.n}")
        return self

    def _merge(self, other: "MembershipCount") -> "MembershipCount":
        return MembershipCount(reference=self.reference, n=self.n + other.n, count=self.count + other.count)


class BarChart(FrozenModel):
    kind: Literal["bar_chart"] = "bar_chart"
    categories: Categories
    counts: Tuple[NonNegativeInt, ...]
    n: NonNegativeInt

    @model_validator(mode="after")
    def _totals(self):
        if len(self.counts) != len(self.categories):
            raise ValueError("one count per category expected")
        if sum(self.counts) != self.n:
            raise ValueError(f"n={self.n} but counts add up to {sum(self.counts)}")
        return self

    @property
    def counts_by_label(self) -> Dict[str, int]:
        return dict(zip(self.categories, self.counts))

    def _merge(self, other: "BarChart") -> "BarChart":
        return BarChart(
            categories=self.categories,
            counts=tuple(a + b for a, b in zip(self.counts, other.counts)),
            n=self.n + other.n,
        )


class Histogram(FrozenModel):
    """Bins [b_i, b_i+1), the last one closed, plus underflow and overflow."""

    kind: Literal["histogram"] = "histogram"
    edges: Edges
    counts: Tuple[NonNegativeInt, ...]
    underflow: NonNegativeInt = 0
    overflow: NonNegativeInt = 0
    n: NonNegativeInt

    @model_validator(mode="after")
    def _totals(self):
        if len(self.counts) != len(self.edges) - 1:
            raise ValueError(f"{len(self.edges) - 1} bin counts expected, got {len(self.counts)}")
        total = self.underflow + self.overflow + sum(self.counts)
        if total != self.n:
            raise ValueError(f"n={self.n} but bins add up to {total}")
        return self

    @property
    def frequencies(self) -> Tuple[int, ...]:
        return (self.underflow, *self.counts, self.overflow)

    def _merge(self, other: "Histogram") -> "Histogram":
        return Histogram(
            edges=self.edges,
            counts=tuple(a + b for a, b in zip(self.counts, other.counts)),
            underflow=self.underflow + other.underflow,
            overflow=self.overflow + other.overflow,
            n=self.n + other.n,
        )


class DiscreteDistribution(FrozenModel):
    """(n, p) over a category set or histogram bins; n = 0 carries an all-zero p."""

    kind: Literal["distribution"] = "distribution"
    categories: Optional[Categories] = None
    edges: Optional[Edges] = None
    n: NonNegativeInt = 0
    p: Tuple[FiniteFloat, ...]

    @model_validator(mode="after")
    def _probabilities(self):
        if (self.categories is None) == (self.edges is None):
            raise ValueError("distribution needs exactly one of: categories, edges")
        if len(self.p) != len(self.support):
            raise ValueError(f"{len(self.support)} probabilities expected, got {len(self.p)}")
        if any(x < 0 for x in self.p):
            raise ValueError("probabilities must be non-negative")
        if self.n == 0:
            if any(self.p):
                raise ValueError("empty distribution must carry zero probabilities")
        elif abs(math.fsum(self.p) - 1.0) > settings.PROBABILITY_TOL:
            raise ValueError(f"probabilities add up to {math.fsum(self.p)!r}, not 1")
        return self

    @property
    def support(self) -> Tuple[str, ...]:
        return self.categories if self.categories is not None else histogram_support(self.edges)

    def _merge(self, other: "DiscreteDistribution") -> "DiscreteDistribution":
        if self.n == 0:
            return other
        if other.n == 0:
            return self
        n = self.n + other.n
        p = tuple((self.n * a + other.n * b) / n for a, b in zip(self.p, other.p))
        return self.model_copy(update={"n": n, "p": p})


class ComposedSummary(FrozenModel):
    """(Σ1(A), Σ2(A), ...); merges component-wise."""

    kind: Literal["composed"] = "composed"
    parts: Tuple["Summary", ...] = Field(min_length=1)

    @model_validator(mode="after")
    def _same_units(self):
        units = {u for u in (units_of(p) for p in self.parts) if u is not None}
        if len(units) > 1:
            raise ValueError(f"parts disagree on n: {sorted(units)}")
        extrema = [p for p in self.parts if isinstance(p, ExtremumSummary)]
        if len({p.value is None for p in extrema}) > 1:
            raise ValueError("min and max must both be empty or both be present")
        if extrema and units and (extrema[0].value is None) != (units == {0}):
            raise ValueError("min/max presence does not match n")
        lows = [p.value for p in extrema if p.kind == "min" and p.value is not None]
        highs = [p.value for p in extrema if p.kind == "max" and p.value is not None]
        if lows and highs and max(lows) > min(highs):
            raise ValueError(f"min {max(lows)!r} exceeds max {min(highs)!r}")
        return self

    def _merge(self, other: "ComposedSummary") -> "ComposedSummary":
        return ComposedSummary(parts=tuple(merge(a, b) for a, b in zip(self.parts, other.parts)))


Summary = Annotated[
    Union[
        CountSummary,
        ExtremumSummary,
        SumSummary,
        ExtremeK,
        MeanSummary,
        MomentSummary,
        MembershipCount,
        BarChart,
        Histogram,
        DiscreteDistribution,
        ComposedSummary,
    ],
    Field(discriminator="kind"),
]

ComposedSummary.model_rebuild()

SummaryAdapter = TypeAdapter(Summary)


# --- summarize --------------------------------------------------------------


def _numeric(values: Sequence[Value]) -> np.ndarray:
    try:
        arr = np.asarray(values, dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise SpecError(f"numeric values expected: {e}") from e
    if arr.ndim != 1:
        raise SpecError("a flat sequence of values is expected")
    finite = np.isfinite(arr)
    if not finite.all():
        pos = int(np.argmin(finite))
        raise SpecError(f"non-finite numeric value {arr[pos]!r} at position {pos}")
    # no negative zeros
    return arr + 0.0


def _labels(values: Sequence[Value], categories: Optional[Sequence[str]] = None) -> list:
    known = None if categories is None else set(categories)
    out = []
    for pos, v in enumerate(values):
        if not isinstance(v, str):
            raise SpecError(f"category label expected at position {pos}, got {v!r}")
        if known is not None and v not in known:
            raise SpecError(f"unknown category label {v!r} at position {pos}")
        out.append(v)
    return out


def _bin_frequencies(edges: Sequence[float], arr: np.ndarray) -> Tuple[int, ...]:
    """(underflow, bin counts..., overflow) for ``arr``."""
    e = np.asarray(edges, dtype=np.float64)
    idx = np.searchsorted(e, arr, side="right")
    idx[arr == e[-1]] = len(e) - 1  # last bin is closed
    return tuple(int(c) for c in np.bincount(idx, minlength=len(e) + 1))


def _category_counts(categories: Sequence[str], values: Sequence[Value]) -> Tuple[int, ...]:
    counter = Counter(_labels(values, categories))
    return tuple(counter.get(c, 0) for c in categories)


def _probabilities(freqs: Sequence[int]) -> Tuple[float, ...]:
    n = sum(freqs)
    return tuple(f / n for f in freqs) if n else tuple(0.0 for _ in freqs)


@singledispatch
def _summarize(spec, values, unit_ids) -> Any:
    raise SpecError(f"unsupported spec {spec!r}")


@_summarize.register(CountSpec)
def _(spec, values, unit_ids):
    return CountSummary(n=len(values))


@_summarize.register(ExtremumSpec)
def _(spec, values, unit_ids):
    arr = _numeric(values)
    if not len(arr):
        return ExtremumSummary(kind=spec.kind)
    return ExtremumSummary(kind=spec.kind, value=float(arr.min() if spec.kind == "min" else arr.max()))


@_summarize.register(SumSpec)
def _(spec, values, unit_ids):
    return SumSummary(total=math.fsum(_numeric(values)))


@_summarize.register(ExtremeKSpec)
def _(spec, values, unit_ids):
    arr = _numeric(values)
    k = spec.k
    if len(arr) > k:
        # partition first so 10^6 values do not need a full sort
        arr = np.partition(arr, k - 1)[:k] if spec.order == "smallest" else np.partition(arr, len(arr) - k)[-k:]
    kept = np.sort(arr)
    if spec.order == "largest":
        kept = kept[::-1]
    return ExtremeK(k=k, order=spec.order, values=tuple(float(v) for v in kept))


@_summarize.register(MeanSpec)
def _(spec, values, unit_ids):
    arr = _numeric(values)
    if not len(arr):
        return MeanSummary()
    return MeanSummary(n=len(arr), mean=math.fsum(arr) / len(arr))


@_summarize.register(MomentSpec)
def _(spec, values, unit_ids):
    arr = _numeric(values)
    sums = tuple(math.fsum(arr**j) for j in range(1, spec.order + 1))
    return MomentSummary(n=len(arr), power_sums=sums)


@_summarize.register(MembershipSpec)
def _(spec, values, unit_ids):
    ref = spec.reference
    if ref.by_unit:
        if unit_ids is None:
            if values:
                raise SpecError(f"reference '{ref.name}' is a unit-id set; unit ids are required")
            unit_ids = ()
        if len(unit_ids) != len(values):
            raise SpecError(f"{len(values)} values but {len(unit_ids)} unit ids")
        members = set(ref.unit_ids)
        count = sum(1 for uid in unit_ids if str(uid) in members)
    elif ref.labels is not None:
        members = set(ref.labels)
        count = sum(1 for label in _labels(values) if label in members)
    else:
        arr = _numeric(values)
        mask = np.ones(len(arr), dtype=bool)
        if ref.low is not None:
            mask &= arr >= ref.low
        if ref.high is not None:
            mask &= arr <= ref.high
        count = int(mask.sum())
    return MembershipCount(reference=ref, n=len(values), count=count)


@_summarize.register(BarChartSpec)
def _(spec, values, unit_ids):
    counts = _category_counts(spec.categories, values)
    return BarChart(categories=spec.categories, counts=counts, n=sum(counts))


@_summarize.register(HistogramSpec)
def _(spec, values, unit_ids):
    under, *counts, over = _bin_frequencies(spec.edges, _numeric(values))
    return Histogram(edges=spec.edges, counts=tuple(counts), underflow=under, overflow=over, n=len(values))


@_summarize.register(DistributionSpec)
def _(spec, values, unit_ids):
    if spec.categories is not None:
        freqs = _category_counts(spec.categories, values)
    else:
        freqs = _bin_frequencies(spec.edges, _numeric(values))
    return DiscreteDistribution(categories=spec.categories, edges=spec.edges, n=sum(freqs), p=_probabilities(freqs))


@_summarize.register(IntervalSpec)
def _(spec, values, unit_ids):
    return ComposedSummary(
        parts=(_summarize(ExtremumSpec(kind="min"), values, unit_ids), _summarize(ExtremumSpec(kind="max"), values, unit_ids))
    )


@_summarize.register(ComposedSpec)
def _(spec, values, unit_ids):
    return ComposedSummary(parts=tuple(_summarize(part, values, unit_ids) for part in spec.parts))


def summarize(spec, values: Sequence[Value], unit_ids: Optional[Sequence[str]] = None):
    """Summary of ``values`` computed directly from the kind's definition."""
    if isinstance(values, np.ndarray):
        values = values.tolist()
    return _summarize(spec, list(values), unit_ids)


def empty(spec):
    """The identity element of ``spec``'s merge."""
    return _summarize(spec, [], None)


# --- parameters -------------------------------------------------------------


def spec_of(summary):
    """The spec whose parameters ``summary`` carries."""
    if isinstance(summary, CountSummary):
        return CountSpec()
    if isinstance(summary, ExtremumSummary):
        return ExtremumSpec(kind=summary.kind)
    if isinstance(summary, SumSummary):
        return SumSpec()
    if isinstance(summary, ExtremeK):
        return ExtremeKSpec(k=summary.k, order=summary.order)
    if isinstance(summary, MeanSummary):
        return MeanSpec()
    if isinstance(summary, MomentSummary):
        return MomentSpec(order=summary.order)
    if isinstance(summary, MembershipCount):
        return MembershipSpec(reference=summary.reference)
    if isinstance(summary, BarChart):
        return BarChartSpec(categories=summary.categories)
    if isinstance(summary, Histogram):
        return HistogramSpec(edges=summary.edges)
    if isinstance(summary, DiscreteDistribution):
        return DistributionSpec(categories=summary.categories, edges=summary.edges)
    if isinstance(summary, ComposedSummary):
        return ComposedSpec(parts=tuple(spec_of(p) for p in summary.parts))
    raise SpecError(f"not a summary: {summary!r}")


def units_of(summary) -> Optional[int]:
    """|A| as recorded by ``summary``, None for kinds that do not carry it."""
    if isinstance(summary, ComposedSummary):
        units = [u for u in (units_of(p) for p in summary.parts) if u is not None]
        return units[0] if units else None
    return getattr(summary, "n", None)


def is_exact(summary) -> bool:
    if isinstance(summary, ComposedSummary):
        return all(is_exact(p) for p in summary.parts)
    return summary.kind in EXACT_KINDS


# --- merge ------------------------------------------------------------------


def merge(a, b):
    """F(Σ(A), Σ(B)) for disjoint A, B; both summaries must share kind and parameters."""
    if a.kind != b.kind:
        raise MergeError(f"cannot merge a '{a.kind}' summary with a '{b.kind}' summary")
    left, right = spec_of(a), spec_of(b)
    if left != right:
        raise MergeError(f"parameter mismatch for '{a.kind}': {left.model_dump()} vs {right.model_dump()}")
    return a._merge(b)


def merge_all(items: Sequence):
    items = list(items)
    if not items:
        raise MergeError("merge_all needs at least one summary")
    return reduce(merge, items)


# --- views ------------------------------------------------------------------


def mean_view(m: MomentSummary) -> Tuple[int, float, float]:
    """(n, μ, σ) of a moment summary; σ is clamped at zero before the root."""
    if m.n == 0:
        raise EmptySummaryError("mean_view of an empty moment summary")
    mu = m.power_sums[0] / m.n
    return m.n, mu, math.sqrt(max(0.0, m.power_sums[1] / m.n - mu * mu))


def from_mean_view(n: int, mean: float, std: float) -> MomentSummary:
    """Order-2 moment summary from (n, μ, σ) using S = n(σ² + μ²)."""
    if n == 0:
        return MomentSummary(n=0, power_sums=(0.0, 0.0))
    return MomentSummary(n=n, power_sums=(n * mean, n * (std * std + mean * mean)))


def central_moment(m: MomentSummary, r: int) -> float:
    """(1/n) Σ (v - μ)^r by binomial expansion of the power sums."""
    if not 2 <= r <= m.order:
        raise SpecError(f"central moment order {r} outside [2, {m.order}]")
    if m.n == 0:
        raise EmptySummaryError("central moment of an empty moment summary")
    mu = m.power_sums[0] / m.n
    raw = (1.0,) + tuple(s / m.n for s in m.power_sums)
    return math.fsum(math.comb(r, j) * (-mu) ** (r - j) * raw[j] for j in range(r + 1))


def mean_of(m: MeanSummary) -> float:
    if m.n == 0:
        raise EmptySummaryError("mean of an empty set")
    return m.mean


def to_distribution(h: Union[Histogram, BarChart]) -> DiscreteDistribution:
    if h.n == 0:
        raise EmptySummaryError("an empty frequency summary has no distribution")
    if isinstance(h, BarChart):
        return DiscreteDistribution(categories=h.categories, n=h.n, p=_probabilities(h.counts))
    if isinstance(h, Histogram):
        return DiscreteDistribution(edges=h.edges, n=h.n, p=_probabilities(h.frequencies))
    raise SpecError(f"to_distribution expects a histogram or bar chart, got '{h.kind}'")


def from_distribution(d: DiscreteDistribution) -> Tuple[int, ...]:
    """Frequencies f = n·p over the distribution's support."""
    freqs = []
    for label, p in zip(d.support, d.p):
        implied = d.n * p
        f = round(implied)
        if abs(implied - f) > settings.FREQUENCY_TOL:
            raise SpecError(f"frequency {implied!r} for '{label}' is not an integer")
        freqs.append(f)
    if sum(freqs) != d.n:
        raise SpecError(f"frequencies add up to {sum(freqs)}, not n={d.n}")
    return tuple(freqs)


def _fmt(x: Optional[float]) -> str:
    if x is None:
        return "-"
    return str(int(x)) if float(x).is_integer() and abs(x) < 1e15 else f"{x:.6g}"


def describe(summary) -> str:
    """One-line rendering for tables."""
    if isinstance(summary, CountSummary):
        return f"n={summary.n}"
    if isinstance(summary, ExtremumSummary):
        return f"{summary.kind}={_fmt(summary.value)}"
    if isinstance(summary, SumSummary):
        return f"sum={_fmt(summary.total)}"
    if isinstance(summary, ExtremeK):
        return f"{summary.order}-{summary.k}=[{', '.join(_fmt(v) for v in summary.values)}]"
    if isinstance(summary, MeanSummary):
        return f"n={summary.n} mean={_fmt(summary.mean)}"
    if isinstance(summary, MomentSummary):
        if summary.n == 0:
            return "n=0"
        n, mu, sigma = mean_view(summary)
        return f"n={n} mean={_fmt(mu)} std={_fmt(sigma)}"
    if isinstance(summary, MembershipCount):
        return f"n({summary.reference.name})={summary.count} of {summary.n}"
    if isinstance(summary, BarChart):
        return " ".join(f"{c}:{k}" for c, k in zip(summary.categories, summary.counts))
    if isinstance(summary, Histogram):
        return " ".join(f"{label}:{f}" for label, f in zip(histogram_support(summary.edges), summary.frequencies))
    if isinstance(summary, DiscreteDistribution):
        probs = " ".join(f"{label}:{p:.4g}" for label, p in zip(summary.support, summary.p))
        return f"n={summary.n} {probs}"
    if isinstance(summary, ComposedSummary):
        parts = summary.parts
        if len(parts) == 2 and [p.kind for p in parts] == ["min", "max"]:
            return f"[{_fmt(parts[0].value)}, {_fmt(parts[1].value)}]"
        return " ⊕ ".join(describe(p) for p in parts)
    return repr(summary)


def summary_footprint(summary) -> int:
    """Number of scalar slots in a summary; depends on parameters only."""

    def leaves(node) -> int:
        if isinstance(node, dict):
            return sum(leaves(v) for v in node.values())
        if isinstance(node, (list, tuple)):
            return sum(leaves(v) for v in node)
        return 1

    return leaves(summary.model_dump())

"""
Verification of the merge law.

Mergeable kinds are checked against a brute-force oracle: the merged summary
of two disjoint value lists must equal the summary recomputed from their
concatenation. Non-mergeable statistics are exposed by witness quadruples
(A1, B1, A2, B2) with stat(A1) = stat(A2) and stat(B1) = stat(B2) but
stat(A1 ∪ B1) != stat(A2 ∪ B2): no F(stat(A), stat(B)) can produce both
unions.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Hashable, Iterable, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, model_validator

from mergesum.core.config import settings
from mergesum.core.errors import SpecError, WitnessError
from mergesum.schemas.specs import CountSpec, ExtremumSpec, MeanSpec, SumSpec
from mergesum.services.summaries import EXACT_KINDS, Summary, describe, is_exact, merge, summarize

logger = logging.getLogger(__name__)


# --- oracle -----------------------------------------------------------------


@dataclass
class Comparison:
    equal: bool
    exact: bool
    max_rel_error: float = 0.0
    detail: str = ""


def _close(a: float, b: float, rel_tol: float) -> Tuple[bool, float]:
    if a == b:
        return True, 0.0
    scale = max(abs(a), abs(b))
    err = abs(a - b) / scale if scale else math.inf
    return math.isclose(a, b, rel_tol=rel_tol, abs_tol=settings.FLOAT_ABS_TOL), err


def _walk(x: Any, y: Any, path: str, exact: bool, rel_tol: float, out: Comparison) -> None:
    if isinstance(x, dict) and isinstance(y, dict):
        if x.keys() != y.keys():
            out.equal = False
            out.detail = out.detail or f"{path}: fields differ"
            return
        # a composed part decides its own tolerance class
        if "kind" in x:
            exact = exact or x["kind"] in EXACT_KINDS
        for key in x:
            _walk(x[key], y[key], f"{path}.{key}", exact, rel_tol, out)
        return
    if isinstance(x, (list, tuple)) and isinstance(y, (list, tuple)):
        if len(x) != len(y):
            out.equal = False
            out.detail = out.detail or f"{path}: length {len(x)} vs {len(y)}"
            return
        for i, (a, b) in enumerate(zip(x, y)):
            _walk(a, b, f"{path}[{i}]", exact, rel_tol, out)
        return
    if isinstance(x, float) and isinstance(y, float) and not exact:
        ok, err = _close(x, y, rel_tol)
        if x != y:
            out.exact = False
            out.max_rel_error = max(out.max_rel_error, err)
        if not ok:
            out.equal = False
            out.detail = out.detail or f"{path}: {x!r} vs {y!r}"
        return
    if x != y:
        out.equal = False
        out.exact = False
        out.detail = out.detail or f"{path}: {x!r} vs {y!r}"


def compare_summaries(merged, recomputed, rel_tol: Optional[float] = None) -> Comparison:
    """Exact kinds must match bit for bit; floating kinds within ``rel_tol``."""
    out = Comparison(equal=True, exact=True)
    _walk(
        merged.model_dump(),
        recomputed.model_dump(),
        merged.kind,
        False,
        settings.FLOAT_REL_TOL if rel_tol is None else rel_tol,
        out,
    )
    out.exact = out.exact and out.equal
    return out


class MergeReport(BaseModel):
    kind: str
    result: Literal["exact_match", "within_tolerance", "violation"]
    max_rel_error: float = 0.0
    discrepancy: Optional[str] = None
    merged: Summary
    recomputed: Summary
    a_values: List[Any]
    b_values: List[Any]

    @property
    def passed(self) -> bool:
        return self.result != "violation"


def oracle_check(
    spec,
    a_values: Sequence,
    b_values: Sequence,
    tolerance: Optional[float] = None,
    a_ids: Optional[Sequence[str]] = None,
    b_ids: Optional[Sequence[str]] = None,
    merge_fn: Callable = merge,
) -> MergeReport:
    """Compare merge(Σ(A), Σ(B)) with Σ(A ++ B)."""
    a_values, b_values = list(a_values), list(b_values)
    if (a_ids is None) != (b_ids is None):
        raise SpecError("unit ids must be given for both sides or neither")
    if a_ids is not None:
        if not disjointness_guard(a_ids, b_ids):
            raise SpecError("oracle check needs disjoint unit sets")
        all_ids = list(a_ids) + list(b_ids)
    else:
        all_ids = None
    merged = merge_fn(summarize(spec, a_values, a_ids), summarize(spec, b_values, b_ids))
    recomputed = summarize(spec, a_values + b_values, all_ids)
    cmp = compare_summaries(merged, recomputed, tolerance)
    if cmp.exact:
        result = "exact_match"
    elif cmp.equal and not is_exact(recomputed):
        result = "within_tolerance"
    else:
        result = "violation"
        logger.warning("Merge law violated for '%s': %s", spec.kind, cmp.detail or "exact kind differs")
    return MergeReport(
        kind=spec.kind,
        result=result,
        max_rel_error=cmp.max_rel_error,
        discrepancy=None if result != "violation" else (cmp.detail or "summaries differ"),
        merged=merged,
        recomputed=recomputed,
        a_values=a_values,
        b_values=b_values,
    )


def run_oracle_suite(
    spec,
    values: Sequence,
    splits: int,
    seed: int,
    tolerance: Optional[float] = None,
    unit_ids: Optional[Sequence[str]] = None,
    merge_fn: Callable = merge,
) -> List[MergeReport]:
    """``splits`` seeded random (A, B) cuts of ``values``; returns the failing reports."""
    values = list(values)
    ids = None if unit_ids is None else list(unit_ids)
    rng = np.random.default_rng(seed)
    failures = []
    for i in range(splits):
        order = rng.permutation(len(values))
        cut = int(rng.integers(0, len(values) + 1))
        a_idx, b_idx = order[:cut], order[cut:]
        report = oracle_check(
            spec,
            [values[j] for j in a_idx],
            [values[j] for j in b_idx],
            tolerance,
            None if ids is None else [ids[j] for j in a_idx],
            None if ids is None else [ids[j] for j in b_idx],
            merge_fn,
        )
        logger.debug("split %d (%d | %d): %s", i, cut, len(values) - cut, report.result)
        if not report.passed:
            failures.append(report)
    logger.info("Oracle suite for '%s': %d/%d splits passed", spec.kind, splits - len(failures), splits)
    return failures


def disjointness_guard(a_ids: Iterable, b_ids: Iterable) -> bool:
    """True iff the two unit-id sets do not intersect."""
    return set(a_ids).isdisjoint(b_ids)


# --- statistics -------------------------------------------------------------


@dataclass(frozen=True)
class Statistic:
    """A named deterministic function of a value list.

    ``fn`` returns a hashable value, or None where the statistic is undefined
    (for example the 3rd smallest of two values).
    """

    name: str
    label: str
    fn: Callable[[Sequence[float]], Optional[Hashable]] = field(compare=False)
    expect_mergeable: bool = False

    def __call__(self, values: Sequence[float]) -> Optional[Hashable]:
        return self.fn(values)

    @classmethod
    def from_spec(cls, spec, name: Optional[str] = None) -> "Statistic":
        return cls(name or spec.kind, name or spec.kind, lambda values: summarize(spec, values), expect_mergeable=True)


def median(values: Sequence[float]) -> Optional[float]:
    """sort(values)[ceil(n/2)], ascending, 1-based."""
    if not values:
        return None
    return sorted(values)[(len(values) + 1) // 2 - 1]


def kth_smallest(k: int) -> Callable[[Sequence[float]], Optional[float]]:
    def stat(values: Sequence[float]) -> Optional[float]:
        return sorted(values)[k - 1] if len(values) >= k else None

    return stat


def _average(values: Sequence[float]) -> Optional[float]:
    return math.fsum(values) / len(values) if values else None


def _ordinal(k: int) -> str:
    suffix = "th" if 10 <= k % 100 <= 20 else {1: "st", 2: "nd", 3: "rd"}.get(k % 10, "th")
    return f"{k}{suffix}"


BUILTIN_STATISTICS: Dict[str, Statistic] = {
    "median": Statistic("median", "med", median),
    "avg": Statistic("avg", "avg", _average),
    "count": Statistic.from_spec(CountSpec(), "count"),
    "sum": Statistic.from_spec(SumSpec(), "sum"),
    "min": Statistic.from_spec(ExtremumSpec(kind="min"), "min"),
    "max": Statistic.from_spec(ExtremumSpec(kind="max"), "max"),
    "mean": Statistic.from_spec(MeanSpec(), "mean"),
}


def get_statistic(name: str) -> Statistic:
    """Resolve 'median', 'avg', 'count', 'sum', 'min', 'max', 'mean' or 'kth:K'."""
    if name in BUILTIN_STATISTICS:
        return BUILTIN_STATISTICS[name]
    if name.startswith("kth:"):
        try:
            k = int(name[4:])
        except ValueError:
            raise WitnessError(f"bad statistic '{name}': K must be an integer") from None
        if k < 1:
            raise WitnessError(f"bad statistic '{name}': K must be positive")
        return Statistic(name, _ordinal(k), kth_smallest(k))
    raise WitnessError(f"unknown statistic '{name}'")


# --- witnesses --------------------------------------------------------------


class WitnessQuadruple(BaseModel):
    statistic: str
    a1: List[float]
    b1: List[float]
    a2: List[float]
    b2: List[float]
    # unit ids per list; absent means every position is a distinct unit
    a1_ids: Optional[List[str]] = None
    b1_ids: Optional[List[str]] = None
    a2_ids: Optional[List[str]] = None
    b2_ids: Optional[List[str]] = None

    @model_validator(mode="after")
    def _ids_aligned(self):
        for name in ("a1", "b1", "a2", "b2"):
            ids = getattr(self, f"{name}_ids")
            if ids is not None and len(ids) != len(getattr(self, name)):
                raise ValueError(f"{name}_ids must align with {name}")
        return self


class WitnessReport(BaseModel):
    witness: WitnessQuadruple
    stat_a1: Any
    stat_b1: Any
    stat_a2: Any
    stat_b2: Any
    stat_union1: Any
    stat_union2: Any
    disjoint: bool
    proves_non_mergeable: bool


def _disjoint(ids_a: Optional[List[str]], ids_b: Optional[List[str]]) -> bool:
    if ids_a is None or ids_b is None:
        return True
    return disjointness_guard(ids_a, ids_b)


def check_witness(w: WitnessQuadruple) -> WitnessReport:
    """Whether ``w`` proves its statistic is not exactly mergeable."""
    stat = get_statistic(w.statistic)
    lists = {"a1": w.a1, "b1": w.b1, "a2": w.a2, "b2": w.b2}
    stats = {}
    for name, values in lists.items():
        if not values:
            raise WitnessError(f"witness set {name.upper()} is empty")
        stats[name] = stat(values)
        if stats[name] is None:
            raise WitnessError(f"{stat.name} is undefined on {name.upper()} = {values}")
    union1, union2 = stat(w.a1 + w.b1), stat(w.a2 + w.b2)
    disjoint = _disjoint(w.a1_ids, w.b1_ids) and _disjoint(w.a2_ids, w.b2_ids)
    holds = disjoint and stats["a1"] == stats["a2"] and stats["b1"] == stats["b2"] and union1 != union2
    return WitnessReport(
        witness=w,
        stat_a1=stats["a1"],
        stat_b1=stats["b1"],
        stat_a2=stats["a2"],
        stat_b2=stats["b2"],
        stat_union1=union1,
        stat_union2=union2,
        disjoint=disjoint,
        proves_non_mergeable=holds,
    )


def _multisets(universe: Sequence[float], max_size: int) -> List[Tuple[float, ...]]:
    """Sub-multisets of ``universe`` by size, then lexicographically."""
    ordered = sorted(set(universe))
    out: List[Tuple[float, ...]] = []
    for size in range(1, max_size + 1):
        out.extend(itertools.combinations_with_replacement(ordered, size))
    return out


def search_witness(stat: Statistic, universe: Sequence[float], max_size: int) -> Optional[WitnessQuadruple]:
    """Exhaustive search for a witness quadruple over small multisets.

    stat(A ∪ B) is a function of (stat(A), stat(B)) on the searched domain iff
    no two pairs (A, B) agree on both part statistics and disagree on the
    union; the first such conflict is the witness.
    """
    universe = sorted(set(universe))
    if not universe:
        raise WitnessError("universe must not be empty")
    if len(universe) > settings.WITNESS_MAX_UNIVERSE:
        raise WitnessError(f"universe of {len(universe)} values exceeds {settings.WITNESS_MAX_UNIVERSE}")
    if not 1 <= max_size <= settings.WITNESS_MAX_SIZE:
        raise WitnessError(f"max_size must be within [1, {settings.WITNESS_MAX_SIZE}]")

    sets = _multisets(universe, max_size)
    stats = [stat(list(s)) for s in sets]
    defined = [(s, v) for s, v in zip(sets, stats) if v is not None]
    union_cache: Dict[Tuple[float, ...], Any] = {}
    seen: Dict[Tuple[Any, Any], Tuple[Tuple[float, ...], Tuple[float, ...], Any]] = {}

    for a, stat_a in defined:
        for b, stat_b in defined:
            union = tuple(sorted(a + b))
            if union not in union_cache:
                union_cache[union] = stat(list(union))
            value = union_cache[union]
            key = (stat_a, stat_b)
            first = seen.setdefault(key, (a, b, value))
            if first[2] != value:
                logger.info("Witness found for '%s' after %d distinct unions", stat.name, len(union_cache))
                return WitnessQuadruple(
                    statistic=stat.name, a1=list(first[0]), b1=list(first[1]), a2=list(a), b2=list(b)
                )
    logger.info("No witness for '%s' over %d values, sets up to %d", stat.name, len(universe), max_size)
    return None


WORKED_EXAMPLES: Dict[int, WitnessQuadruple] = {
    1: WitnessQuadruple(statistic="median", a1=[3, 4, 1], b1=[9, 6], a2=[3, 8], b2=[6, 2, 7]),
    2: WitnessQuadruple(statistic="kth:2", a1=[1, 3, 5], b1=[2, 5, 6], a2=[3, 3, 6], b2=[4, 5, 7]),
}


def _fmt_value(x: Any) -> str:
    if isinstance(x, float):
        return str(int(x)) if x.is_integer() else repr(x)
    if isinstance(x, BaseModel):
        return describe(x)
    return str(x)


def _fmt_list(values: Sequence[float]) -> str:
    return "[" + ", ".join(_fmt_value(float(v)) for v in values) + "]"


def format_witness(report: WitnessReport) -> str:
    """Fixed text rendering of a witness report, one table row per set."""
    w = report.witness
    label = get_statistic(w.statistic).label
    rows = [
        (f"v(A1) = {_fmt_list(w.a1)}", f"{label}(A1) = {_fmt_value(report.stat_a1)}"),
        (f"v(B1) = {_fmt_list(w.b1)}", f"{label}(B1) = {_fmt_value(report.stat_b1)}"),
        ("", f"{label}(A1 u B1) = {_fmt_value(report.stat_union1)}"),
        (f"v(A2) = {_fmt_list(w.a2)}", f"{label}(A2) = {_fmt_value(report.stat_a2)}"),
        (f"v(B2) = {_fmt_list(w.b2)}", f"{label}(B2) = {_fmt_value(report.stat_b2)}"),
        ("", f"{label}(A2 u B2) = {_fmt_value(report.stat_union2)}"),
    ]
    width = max(len(left) for left, _ in rows)
    lines = [f"{left.ljust(width)}  {right}" for left, right in rows]
    verdict = "not exactly mergeable" if report.proves_non_mergeable else "no contradiction"
    lines.append(f"{w.statistic}: {verdict}")
    return "\n".join(lines) + "\n"

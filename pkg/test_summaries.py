import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from pydantic import ValidationError

from conftest import CATEGORICAL_SPECS, CATEGORIES, NUMERIC_SPECS, spec_id
from mergesum.core.errors import EmptySummaryError, MergeError, SpecError
from mergesum.schemas.specs import (
    BarChartSpec,
    CountSpec,
    ExtremeKSpec,
    ExtremumSpec,
    HistogramSpec,
    IntervalSpec,
    MeanSpec,
    MembershipReference,
    MembershipSpec,
    MomentSpec,
)
from mergesum.services.summaries import (
    BarChart,
    ComposedSummary,
    CountSummary,
    DiscreteDistribution,
    ExtremeK,
    ExtremumSummary,
    MomentSummary,
    SumSummary,
    central_moment,
    describe,
    empty,
    from_distribution,
    from_mean_view,
    histogram_support,
    is_exact,
    mean_of,
    mean_view,
    merge,
    merge_all,
    spec_of,
    summarize,
    summary_footprint,
    to_distribution,
)
from mergesum.services.verification import compare_summaries

# integer values keep every power sum exact
numeric_values = st.lists(st.integers(-1000, 1000).map(float), max_size=25)
label_values = st.lists(st.sampled_from(CATEGORIES), max_size=25)


def assert_same(x, y):
    if is_exact(x):
        assert x == y
    else:
        cmp = compare_summaries(x, y)
        assert cmp.equal, cmp.detail


# --- summarize ----------------------------------------------------------------


def test_count():
    assert summarize(CountSpec(), [3, 4, 1]) == CountSummary(n=3)


def test_extreme_k_smallest():
    s = summarize(ExtremeKSpec(k=2, order="smallest"), [1, 3, 5])
    assert s.values == (1.0, 3.0)


def test_extreme_k_keeps_duplicates():
    spec = ExtremeKSpec(k=3, order="largest")
    assert summarize(spec, [5, 1, 5, 5]).values == (5.0, 5.0, 5.0)
    two = ExtremeKSpec(k=2, order="largest")
    assert merge(summarize(two, [5, 5]), summarize(two, [5])).values == (5.0, 5.0)


def test_extreme_k_fewer_values_than_k():
    assert summarize(ExtremeKSpec(k=5, order="largest"), [2, 7]).values == (7.0, 2.0)


def test_power_sums():
    s = summarize(MomentSpec(order=2), [1, 2, 3])
    assert s.n == 3
    assert s.power_sums == (6.0, 14.0)


def test_histogram_bins_last_closed():
    s = summarize(HistogramSpec(edges=(0, 10, 20)), [-1, 0, 9.99, 10, 20, 21])
    assert (s.underflow, s.counts, s.overflow, s.n) == (1, (2, 2), 1, 6)
    assert histogram_support((0, 10, 20)) == ("<0.0", "[0.0,10.0)", "[10.0,20.0]", ">20.0")


def test_bar_chart_counts():
    s = summarize(BarChartSpec(categories=CATEGORIES), ["rome", "oslo", "rome"])
    assert s.counts_by_label == {"lyon": 0, "oslo": 1, "rome": 2}
    assert s.n == 3


def test_membership_forms():
    numeric = MembershipSpec(reference=MembershipReference(name="mid", low=2, high=4))
    assert summarize(numeric, [1, 2, 3, 4, 5]).count == 3
    labels = MembershipSpec(reference=MembershipReference(name="south", labels=["rome", "lyon", "rome"]))
    assert summarize(labels, ["rome", "oslo", "lyon"]).count == 2
    by_unit = MembershipSpec(reference=MembershipReference(name="vip", unit_ids=["u2", "u9"]))
    s = summarize(by_unit, [10, 20, 30], ["u1", "u2", "u3"])
    assert (s.count, s.n) == (1, 3)


def test_membership_by_unit_needs_ids():
    by_unit = MembershipSpec(reference=MembershipReference(name="vip", unit_ids=["u2"]))
    with pytest.raises(SpecError):
        summarize(by_unit, [1.0])


def test_reference_needs_one_form():
    with pytest.raises(ValidationError):
        MembershipReference(name="bad", low=1, labels=["a"])
    with pytest.raises(ValidationError):
        MembershipReference(name="bad")


def test_unknown_label_rejected():
    with pytest.raises(SpecError, match="unknown category"):
        summarize(BarChartSpec(categories=CATEGORIES), ["rome", "paris"])


def test_non_finite_rejected():
    with pytest.raises(SpecError, match="non-finite"):
        summarize(ExtremumSpec(kind="max"), [1.0, float("inf")])


def test_bad_edges_rejected():
    with pytest.raises(ValidationError):
        HistogramSpec(edges=(1, 1))
    with pytest.raises(ValidationError):
        HistogramSpec(edges=(3,))


# --- merge --------------------------------------------------------------------


@pytest.mark.parametrize("kind", ["min", "max"])
def test_signed_zero_merges_commutatively(kind):
    spec = ExtremumSpec(kind=kind)
    a, b = summarize(spec, [0.0]), summarize(spec, [-0.0])
    assert math.copysign(1.0, b.value) == 1.0
    for merged in (merge(a, b), merge(b, a)):
        assert math.copysign(1.0, merged.value) == 1.0


def test_interval_parts_must_be_ordered():
    with pytest.raises(ValidationError, match="exceeds"):
        ComposedSummary(parts=(ExtremumSummary(kind="min", value=9.0), ExtremumSummary(kind="max", value=1.0)))
    with pytest.raises(ValidationError, match="both"):
        ComposedSummary(parts=(ExtremumSummary(kind="min", value=1.0), ExtremumSummary(kind="max")))


def test_composed_parts_share_n():
    with pytest.raises(ValidationError, match="disagree"):
        ComposedSummary(parts=(CountSummary(n=2), CountSummary(n=3)))
    with pytest.raises(ValidationError, match="presence"):
        ComposedSummary(parts=(CountSummary(n=2), ExtremumSummary(kind="min")))


def test_merge_extreme_k():
    spec = ExtremeKSpec(k=2, order="smallest")
    merged = merge(summarize(spec, [1, 3, 5]), summarize(spec, [2, 5, 6]))
    assert merged.values == (1.0, 2.0)


def test_merge_distribution():
    a = DiscreteDistribution(categories=("x", "y"), n=3, p=(1 / 3, 2 / 3))
    b = DiscreteDistribution(categories=("x", "y"), n=1, p=(1.0, 0.0))
    merged = merge(a, b)
    assert merged.n == 4
    assert merged.p == pytest.approx((0.5, 0.5), abs=1e-12)


def test_merge_moments():
    spec = MomentSpec(order=2)
    merged = merge(summarize(spec, [1, 2, 3]), summarize(spec, [5]))
    assert merged.n == 4
    assert merged.power_sums == (11.0, 39.0)
    n, mu, sigma = mean_view(merged)
    assert (n, mu) == (4, 2.75)
    assert sigma == pytest.approx(math.sqrt(2.1875), rel=1e-12)


def test_merge_all():
    assert merge_all([CountSummary(n=1), CountSummary(n=2), CountSummary(n=3)]).n == 6
    mins = [ExtremumSummary(kind="min", value=v) for v in (4, 3, 9)]
    assert merge_all(mins).value == 3
    assert merge_all([CountSummary(n=7)]) == CountSummary(n=7)
    with pytest.raises(MergeError):
        merge_all([])


def test_merge_kind_mismatch():
    with pytest.raises(MergeError):
        merge(CountSummary(n=1), SumSummary(total=1.0))
    with pytest.raises(MergeError):
        merge(ExtremumSummary(kind="min", value=1), ExtremumSummary(kind="max", value=2))


@pytest.mark.parametrize(
    "a_spec, b_spec",
    [
        (HistogramSpec(edges=(0, 1, 2)), HistogramSpec(edges=(0, 1, 3))),
        (ExtremeKSpec(k=2), ExtremeKSpec(k=3)),
        (ExtremeKSpec(k=2, order="smallest"), ExtremeKSpec(k=2, order="largest")),
        (MomentSpec(order=2), MomentSpec(order=3)),
        (
            MembershipSpec(reference=MembershipReference(name="r", low=0)),
            MembershipSpec(reference=MembershipReference(name="r", low=1)),
        ),
    ],
)
def test_merge_parameter_mismatch(a_spec, b_spec):
    with pytest.raises(MergeError, match="parameter mismatch"):
        merge(summarize(a_spec, [1.0]), summarize(b_spec, [1.0]))


@pytest.mark.parametrize("spec", NUMERIC_SPECS + CATEGORICAL_SPECS, ids=spec_id)
def test_empty_is_identity(spec):
    values = ["rome", "lyon"] if spec in CATEGORICAL_SPECS else [4.0, -2.5, 11.0]
    s = summarize(spec, values)
    assert merge(empty(spec), s) == s
    assert merge(s, empty(spec)) == s
    assert spec_of(empty(spec)) == spec_of(s)


@pytest.mark.parametrize("spec", NUMERIC_SPECS, ids=spec_id)
@given(a=numeric_values, b=numeric_values)
def test_merge_law_numeric(spec, a, b):
    assert_same(merge(summarize(spec, a), summarize(spec, b)), summarize(spec, a + b))


@pytest.mark.parametrize("spec", CATEGORICAL_SPECS, ids=spec_id)
@given(a=label_values, b=label_values)
def test_merge_law_categorical(spec, a, b):
    assert_same(merge(summarize(spec, a), summarize(spec, b)), summarize(spec, a + b))


@pytest.mark.parametrize("spec", NUMERIC_SPECS, ids=spec_id)
@given(a=numeric_values, b=numeric_values, c=numeric_values)
def test_merge_associative_and_commutative(spec, a, b, c):
    sa, sb, sc = (summarize(spec, v) for v in (a, b, c))
    assert_same(merge(merge(sa, sb), sc), merge(sa, merge(sb, sc)))
    assert_same(merge(sa, sb), merge(sb, sa))


# --- views --------------------------------------------------------------------


def test_mean_view():
    assert mean_view(MomentSummary(n=1, power_sums=(5, 25))) == (1, 5.0, 0.0)
    assert mean_view(MomentSummary(n=2, power_sums=(6, 18))) == (2, 3.0, 0.0)
    n, mu, sigma = mean_view(MomentSummary(n=4, power_sums=(11, 39)))
    assert mu == 2.75
    assert sigma == pytest.approx(1.47902, abs=1e-5)
    with pytest.raises(EmptySummaryError):
        mean_view(MomentSummary(n=0, power_sums=(0, 0)))


def test_mean_weighted_merge():
    a = summarize(MeanSpec(), [1, 2, 3])
    b = summarize(MeanSpec(), [10])
    merged = merge(a, b)
    assert merged.n == 4
    assert mean_of(merged) == 4.0
    assert merge(empty(MeanSpec()), a) == a
    with pytest.raises(EmptySummaryError):
        mean_of(empty(MeanSpec()))


def test_from_mean_view():
    m = from_mean_view(4, 2.75, math.sqrt(2.1875))
    assert m.n == 4
    assert m.power_sums == pytest.approx((11.0, 39.0), rel=1e-12)


def test_central_moment():
    m = summarize(MomentSpec(order=3), [1, 2, 3, 5])
    assert central_moment(m, 3) == pytest.approx(1.40625, rel=1e-12)
    assert central_moment(m, 2) == pytest.approx(mean_view(m)[2] ** 2, rel=1e-12)
    flat = summarize(MomentSpec(order=4), [7, 7, 7])
    assert central_moment(flat, 4) == pytest.approx(0.0, abs=1e-9)
    with pytest.raises(SpecError):
        central_moment(m, 4)


def test_moment_identity_on_integers(rng):
    spec = MomentSpec(order=4)
    values = rng.integers(-1000, 1001, size=400).astype(float)
    a, b = values[:150], values[150:]
    sa, sb = summarize(spec, a), summarize(spec, b)
    merged = merge(sa, sb)
    assert merged.power_sums == tuple(x + y for x, y in zip(sa.power_sums, sb.power_sums))
    assert merged == summarize(spec, values)
    n, mu, sigma = mean_view(merged)
    assert sigma == pytest.approx(math.sqrt(merged.power_sums[1] / n - mu * mu), rel=1e-12)
    assert sigma == pytest.approx(float(np.std(values)), rel=1e-9)


def test_to_and_from_distribution():
    chart = BarChart(categories=("a", "b"), counts=(2, 2), n=4)
    d = to_distribution(chart)
    assert d.p == (0.5, 0.5)
    assert from_distribution(d) == (2, 2)
    point = to_distribution(BarChart(categories=("a", "b", "c"), counts=(5, 0, 0), n=5))
    assert point.p == (1.0, 0.0, 0.0)
    hist = summarize(HistogramSpec(edges=(0, 1, 2)), [-3, 0.5, 1.5, 1.5, 9])
    assert from_distribution(to_distribution(hist)) == hist.frequencies
    with pytest.raises(EmptySummaryError):
        to_distribution(BarChart(categories=("a",), counts=(0,), n=0))


def test_from_distribution_rejects_fractional_counts():
    with pytest.raises(SpecError, match="not an integer"):
        from_distribution(DiscreteDistribution(categories=("a", "b"), n=3, p=(0.5, 0.5)))


def test_distribution_merge_matches_summed_frequencies(rng):
    for _ in range(200):
        fa = rng.integers(0, 50, size=6)
        fb = rng.integers(0, 50, size=6)
        fa[0] += 1
        fb[0] += 1
        labels = tuple("abcdef")
        da = to_distribution(BarChart(categories=labels, counts=tuple(int(x) for x in fa), n=int(fa.sum())))
        db = to_distribution(BarChart(categories=labels, counts=tuple(int(x) for x in fb), n=int(fb.sum())))
        merged = merge(da, db)
        total = fa + fb
        assert merged.n == int(total.sum())
        assert merged.p == pytest.approx(tuple(total / total.sum()), abs=1e-12)


def test_distribution_rejects_bad_probabilities():
    with pytest.raises(ValidationError):
        DiscreteDistribution(categories=("a", "b"), n=2, p=(0.5, 0.6))
    with pytest.raises(ValidationError):
        DiscreteDistribution(categories=("a", "b"), n=0, p=(1.0, 0.0))


def test_describe():
    assert describe(summarize(IntervalSpec(), [3, 4, 1, 9, 6])) == "[1, 9]"
    assert describe(CountSummary(n=5)) == "n=5"
    assert describe(ExtremeK(k=2, order="smallest", values=(1, 3))) == "smallest-2=[1, 3]"


@pytest.mark.parametrize("spec", NUMERIC_SPECS + CATEGORICAL_SPECS, ids=spec_id)
def test_footprint_does_not_grow_with_n(spec, rng):
    def draw(n):
        if spec in CATEGORICAL_SPECS:
            return rng.choice(CATEGORIES, size=n).tolist()
        return rng.uniform(-1e6, 1e6, size=n)

    small, large = summarize(spec, draw(10)), summarize(spec, draw(10**6))
    assert summary_footprint(small) == summary_footprint(large)

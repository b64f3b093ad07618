from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings as hypothesis_settings

from mergesum.schemas.specs import (
    BarChartSpec,
    ComposedSpec,
    CountSpec,
    DistributionSpec,
    ExtremeKSpec,
    ExtremumSpec,
    HistogramSpec,
    IntervalSpec,
    MeanSpec,
    MembershipReference,
    MembershipSpec,
    MomentSpec,
    SumSpec,
)
from mergesum.services.ingestion import load, load_schema

DATA_DIR = Path(__file__).parent / "data"

CATEGORIES = ("lyon", "oslo", "rome")
EDGES = (-1e6, -1e3, 0.0, 1e3, 5e5)

NUMERIC_SPECS = [
    CountSpec(),
    ExtremumSpec(kind="min"),
    ExtremumSpec(kind="max"),
    SumSpec(),
    *[ExtremeKSpec(k=k, order=o) for k in (1, 2, 5) for o in ("smallest", "largest")],
    MeanSpec(),
    *[MomentSpec(order=p) for p in (2, 3, 4)],
    MembershipSpec(reference=MembershipReference(name="band", low=-250.0, high=1e5)),
    IntervalSpec(),
    HistogramSpec(edges=EDGES),
    DistributionSpec(edges=EDGES),
    ComposedSpec(parts=(CountSpec(), IntervalSpec(), MomentSpec(order=2))),
    ComposedSpec(parts=(ExtremeKSpec(k=3, order="smallest"), HistogramSpec(edges=EDGES))),
]

CATEGORICAL_SPECS = [
    BarChartSpec(categories=CATEGORIES),
    DistributionSpec(categories=CATEGORIES),
    MembershipSpec(reference=MembershipReference(name="south", labels=("rome", "lyon"))),
]


def spec_id(spec) -> str:
    return spec.kind + "".join(f"-{v}" for k, v in spec.model_dump().items() if k in ("k", "order"))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def schema_path():
    return DATA_DIR / "schema.json"


@pytest.fixture
def sample_csv():
    return DATA_DIR / "sample.csv"


@pytest.fixture
def sample_jsonl():
    return DATA_DIR / "sample.jsonl"


@pytest.fixture
def schema(schema_path):
    return load_schema(schema_path)


@pytest.fixture
def dataset(sample_csv, schema):
    return load(sample_csv, schema)


hypothesis_settings.register_profile("mergesum", deadline=None, max_examples=60)
hypothesis_settings.load_profile("mergesum")

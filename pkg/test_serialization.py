import json

import pytest

from conftest import CATEGORICAL_SPECS, CATEGORIES, EDGES, NUMERIC_SPECS, spec_id
from mergesum.core.errors import DisjointnessError, MergeError, SerializationError
from mergesum.schemas.specs import CountSpec, HistogramSpec, IntervalSpec, MomentSpec
from mergesum.services.combinators import summarize_records
from mergesum.services.engine import aggregate
from mergesum.services.ingestion import SplitStrategy, split
from mergesum.services.serialization import (
    SummaryFile,
    deserialize,
    merge_files,
    parse_summary_file,
    read_summary_file,
    serialize,
    write_summary_file,
)
from mergesum.services.summaries import empty, is_exact, merge, summarize, summary_footprint
from mergesum.services.verification import compare_summaries


def draw(spec, rng, n=40):
    if spec in CATEGORICAL_SPECS:
        return rng.choice(CATEGORIES, size=n).tolist()
    return rng.uniform(-1e6, 1e6, size=n)


@pytest.mark.parametrize("encoding", ["decimal", "hex"])
@pytest.mark.parametrize("spec", NUMERIC_SPECS + CATEGORICAL_SPECS, ids=spec_id)
def test_round_trip_is_bit_exact(spec, encoding, rng):
    s = summarize(spec, draw(spec, rng))
    data = serialize(s, float_encoding=encoding)
    back = deserialize(data)
    assert back == s
    assert serialize(back, float_encoding=encoding) == data


def test_equal_summaries_equal_bytes():
    spec = MomentSpec(order=3)
    a = merge(summarize(spec, [1.5, 2.0]), summarize(spec, [7.25]))
    b = summarize(spec, [7.25, 1.5, 2.0])
    assert a == b
    assert serialize(a) == serialize(b)


def test_canonical_layout():
    data = serialize(summarize(CountSpec(), [1, 2, 3]), provenance=["p1", "p0"])
    assert data == (
        b'{"float_encoding":"decimal","format_version":1,"payload":{"kind":"count","n":3},'
        b'"payload_type":"summary","provenance":["p0","p1"],"spec":{"kind":"count"}}'
    )


def test_hex_floats_written_as_hex():
    doc = json.loads(serialize(summarize(MomentSpec(order=2), [0.1]), float_encoding="hex"))
    assert doc["payload"]["power_sums"][0] == (0.1).hex()


def test_tampered_count_is_rejected():
    doc = json.loads(serialize(summarize(CountSpec(), [1, 2, 3])))
    doc["payload"]["n"] = -1
    with pytest.raises(SerializationError, match="malformed"):
        parse_summary_file(json.dumps(doc))


def test_tampered_histogram_total_is_rejected(rng):
    spec = HistogramSpec(edges=EDGES)
    doc = json.loads(serialize(summarize(spec, draw(spec, rng))))
    doc["payload"]["n"] += 1
    with pytest.raises(SerializationError):
        parse_summary_file(json.dumps(doc))


@pytest.mark.parametrize("field", ["schema_n", "variable_n"])
def test_tampered_schema_units_are_rejected(field):
    records = [{"x": 1.0, "y": 2.0}, {"x": 3.0, "y": 4.0}]
    summary = summarize_records({"x": CountSpec(), "y": MomentSpec(order=2)}, records, provenance=["p0"])
    doc = json.loads(serialize(summary))
    if field == "schema_n":
        doc["payload"]["n"] = 99
    else:
        doc["payload"]["variables"]["x"]["n"] = 7
    with pytest.raises(SerializationError, match="malformed"):
        parse_summary_file(json.dumps(doc))


def test_inverted_interval_is_rejected():
    doc = json.loads(serialize(summarize(IntervalSpec(), [1.0, 9.0])))
    low, high = doc["payload"]["parts"]
    low["value"], high["value"] = high["value"], low["value"]
    with pytest.raises(SerializationError, match="malformed"):
        parse_summary_file(json.dumps(doc))


def test_spec_echo_must_match():
    doc = json.loads(serialize(summarize(MomentSpec(order=2), [1.0])))
    doc["spec"]["order"] = 3
    with pytest.raises(SerializationError, match="spec echo"):
        parse_summary_file(json.dumps(doc))


def test_version_and_garbage_rejected():
    doc = json.loads(serialize(summarize(CountSpec(), [1])))
    doc["format_version"] = 99
    with pytest.raises(SerializationError, match="version"):
        parse_summary_file(json.dumps(doc))
    with pytest.raises(SerializationError):
        parse_summary_file(b"not json")
    with pytest.raises(SerializationError):
        parse_summary_file(b"[1, 2]")


def test_schema_round_trip(dataset, schema, tmp_path):
    summary = aggregate(split(dataset, SplitStrategy("round-robin", k=3)), schema)
    path = tmp_path / "all.json"
    write_summary_file(path, SummaryFile(summary, summary.provenance, "hex"))
    loaded = read_summary_file(path)
    assert loaded.payload == summary
    assert loaded.provenance == ("sample#0", "sample#1", "sample#2")
    assert loaded.payload_type == "schema"


def test_merge_files_equals_whole(dataset, schema, tmp_path):
    parts = split(dataset, SplitStrategy("contiguous", k=2))
    paths = []
    for part in parts:
        summary = summarize_records(schema, part.frame, part.unit_ids, (part.partition_id,))
        path = tmp_path / f"{part.partition_id.replace('#', '_')}.json"
        write_summary_file(path, SummaryFile(summary, summary.provenance))
        paths.append(path)
    merged = merge_files(paths)
    whole = summarize_records(schema, dataset.frame, dataset.unit_ids, [p.partition_id for p in parts])
    for name, s in whole.variables.items():
        if is_exact(s):
            assert merged.payload.variables[name] == s
        else:
            assert compare_summaries(merged.payload.variables[name], s).equal
    assert merged.provenance == ("sample#0", "sample#1")


def test_merge_single_file(tmp_path):
    path = tmp_path / "one.json"
    path.write_bytes(serialize(summarize(CountSpec(), [1, 2]), provenance=["p0"]))
    assert merge_files([path]) == read_summary_file(path)


def test_merge_files_overlapping_provenance(tmp_path):
    paths = []
    for i in range(2):
        path = tmp_path / f"{i}.json"
        path.write_bytes(serialize(summarize(CountSpec(), [i]), provenance=["p0"]))
        paths.append(path)
    with pytest.raises(DisjointnessError):
        merge_files(paths)


def test_merge_files_same_path_twice(tmp_path):
    path = tmp_path / "c.json"
    path.write_bytes(serialize(summarize(CountSpec(), [1, 2, 3]), provenance=["p0"]))
    with pytest.raises(DisjointnessError, match="given twice"):
        merge_files([path, tmp_path / "." / "c.json"])


def test_merge_files_without_provenance(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    a.write_bytes(serialize(summarize(CountSpec(), [1, 2, 3])))
    b.write_bytes(serialize(summarize(CountSpec(), [4]), provenance=["p1"]))
    with pytest.raises(DisjointnessError, match="no provenance"):
        merge_files([a, b])
    assert merge_files([a]).payload.n == 3


def test_merge_files_spec_mismatch(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    a.write_bytes(serialize(summarize(MomentSpec(order=2), [1.0]), provenance=["p0"]))
    b.write_bytes(serialize(summarize(MomentSpec(order=3), [1.0]), provenance=["p1"]))
    with pytest.raises(MergeError, match="spec mismatch"):
        merge_files([a, b])


def test_missing_file(tmp_path):
    with pytest.raises(SerializationError, match="not found"):
        read_summary_file(tmp_path / "absent.json")


@pytest.mark.parametrize("encoding", ["decimal", "hex"])
@pytest.mark.parametrize("spec", NUMERIC_SPECS + CATEGORICAL_SPECS, ids=spec_id)
def test_byte_length_bounded_by_parameters(spec, encoding, rng):
    # every scalar slot costs at most 25 bytes in either encoding
    small = summarize(spec, draw(spec, rng, 10))
    large = summarize(spec, draw(spec, rng, 10**6))
    assert summary_footprint(small) == summary_footprint(large)
    bound = len(serialize(empty(spec), float_encoding=encoding)) + 25 * summary_footprint(large)
    for s in (small, large):
        assert len(serialize(s, float_encoding=encoding)) <= bound

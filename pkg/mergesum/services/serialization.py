"""
Canonical summary files.

A summary file is RFC 8785 canonical JSON: keys sorted, no whitespace,
numbers in shortest round-trip form, so equal summaries give equal bytes.
In hex mode every float is written as ``float.hex()`` instead. Provenance
(the partition ids a file covers) is how disjointness is enforced when files
from different processes are merged.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from functools import reduce
from pathlib import Path
from typing import Any, Dict, Literal, Optional, Sequence, Tuple, Union

import rfc8785
from pydantic import TypeAdapter, ValidationError

from mergesum.core.config import settings
from mergesum.core.errors import DisjointnessError, MergeError, SerializationError
from mergesum.schemas.specs import SummarySpec
from mergesum.services.combinators import SchemaSummary, merge_schema
from mergesum.services.summaries import SummaryAdapter, merge_all, spec_of

logger = logging.getLogger(__name__)

FloatEncoding = Literal["decimal", "hex"]

SpecAdapter = TypeAdapter(SummarySpec)
SchemaSpecAdapter = TypeAdapter(Dict[str, SummarySpec])


@dataclass(frozen=True)
class SummaryFile:
    payload: Union[SchemaSummary, Any]
    provenance: Tuple[str, ...] = ()
    float_encoding: FloatEncoding = "decimal"
    format_version: int = field(default_factory=lambda: settings.FORMAT_VERSION)

    @property
    def payload_type(self) -> str:
        return "schema" if isinstance(self.payload, SchemaSummary) else "summary"

    @property
    def spec(self):
        return self.payload.specs() if isinstance(self.payload, SchemaSummary) else spec_of(self.payload)

    def to_document(self) -> Dict[str, Any]:
        if isinstance(self.payload, SchemaSummary):
            payload = self.payload.model_dump(mode="json", exclude={"provenance"})
            spec = {name: s.model_dump(mode="json") for name, s in self.spec.items()}
        else:
            payload = self.payload.model_dump(mode="json")
            spec = self.spec.model_dump(mode="json")
        if self.float_encoding == "hex":
            payload, spec = _hexify(payload), _hexify(spec)
        return {
            "format_version": self.format_version,
            "float_encoding": self.float_encoding,
            "payload_type": self.payload_type,
            "spec": spec,
            "payload": payload,
            "provenance": sorted(self.provenance),
        }


def _hexify(node: Any) -> Any:
    if isinstance(node, float):
        return node.hex()
    if isinstance(node, dict):
        return {k: _hexify(v) for k, v in node.items()}
    if isinstance(node, list):
        return [_hexify(v) for v in node]
    return node


def _canonical(document: Dict[str, Any]) -> bytes:
    try:
        return rfc8785.dumps(document)
    except rfc8785.CanonicalizationError as e:
        raise SerializationError(f"cannot canonicalize summary: {e}") from e


def serialize(
    obj,
    provenance: Optional[Sequence[str]] = None,
    float_encoding: Optional[FloatEncoding] = None,
) -> bytes:
    """Canonical bytes of a summary or schema summary."""
    if provenance is None:
        provenance = obj.provenance if isinstance(obj, SchemaSummary) else ()
    file = SummaryFile(
        payload=obj,
        provenance=tuple(sorted(provenance)),
        float_encoding=float_encoding or settings.FLOAT_ENCODING,
    )
    return _canonical(file.to_document())


def dump_file(file: SummaryFile) -> bytes:
    return _canonical(file.to_document())


def parse_summary_file(data: Union[bytes, str]) -> SummaryFile:
    try:
        doc = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise SerializationError(f"summary file is not valid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise SerializationError("summary file must be a JSON object")
    expected = {"format_version", "float_encoding", "payload_type", "spec", "payload", "provenance"}
    if set(doc) != expected:
        raise SerializationError(f"summary file fields {sorted(doc)} differ from {sorted(expected)}")
    if doc["format_version"] != settings.FORMAT_VERSION:
        raise SerializationError(
            f"format version {doc['format_version']!r} is not supported (expected {settings.FORMAT_VERSION})"
        )
    if doc["float_encoding"] not in ("decimal", "hex"):
        raise SerializationError(f"unknown float encoding {doc['float_encoding']!r}")
    provenance = doc["provenance"]
    if not isinstance(provenance, list) or not all(isinstance(p, str) for p in provenance):
        raise SerializationError("provenance must be a list of partition ids")

    try:
        if doc["payload_type"] == "schema":
            payload = SchemaSummary.model_validate({**doc["payload"], "provenance": provenance})
            echo = SchemaSpecAdapter.validate_python(doc["spec"])
        elif doc["payload_type"] == "summary":
            payload = SummaryAdapter.validate_python(doc["payload"])
            echo = SpecAdapter.validate_python(doc["spec"])
        else:
            raise SerializationError(f"unknown payload type {doc['payload_type']!r}")
    except (ValidationError, TypeError) as e:
        raise SerializationError(f"malformed summary payload: {e}") from e

    file = SummaryFile(
        payload=payload,
        provenance=tuple(provenance),
        float_encoding=doc["float_encoding"],
        format_version=doc["format_version"],
    )
    if file.spec != echo:
        raise SerializationError("spec echo does not match the summary payload")
    return file


def deserialize(data: Union[bytes, str]):
    """Summary or schema summary stored in ``data``."""
    return parse_summary_file(data).payload


def read_summary_file(path) -> SummaryFile:
    try:
        return parse_summary_file(Path(path).read_bytes())
    except FileNotFoundError:
        raise SerializationError(f"summary file not found: {path}") from None


def write_summary_file(path, file: SummaryFile) -> None:
    Path(path).write_bytes(dump_file(file))
    logger.info("Wrote %s summary to %s", file.payload_type, path)


def merge_files(paths: Sequence) -> SummaryFile:
    """Merge summary files that share spec and format and cover disjoint partitions."""
    files = [read_summary_file(p) for p in paths]
    if not files:
        raise MergeError("merge_files needs at least one file")
    first = files[0]
    covered: Dict[str, str] = {}
    resolved: Dict[Path, str] = {}
    for path, f in zip(paths, files):
        if f.payload_type != first.payload_type or f.spec != first.spec:
            raise MergeError(f"spec mismatch: {path} does not share the spec of {paths[0]}")
        key = Path(path).resolve()
        if key in resolved:
            raise DisjointnessError(f"{path} is given twice (also as {resolved[key]})")
        resolved[key] = str(path)
        if len(files) > 1 and not f.provenance:
            raise DisjointnessError(f"{path} records no provenance; its disjointness cannot be checked")
        for pid in f.provenance:
            if pid in covered:
                raise DisjointnessError(f"partition '{pid}' is covered by both {covered[pid]} and {path}")
            covered[pid] = str(path)
    if first.payload_type == "schema":
        payload = reduce(merge_schema, [f.payload for f in files])
    else:
        payload = merge_all([f.payload for f in files])
    logger.info("Merged %d summary files covering %d partitions", len(files), len(covered))
    return SummaryFile(payload=payload, provenance=tuple(sorted(covered)), float_encoding=first.float_encoding)

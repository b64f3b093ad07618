"""
Partitioned aggregation.

Each partition is summarized on its own, then the partial summaries are
reduced with merge. Merge is associative and commutative for exact kinds, so
any reduction shape gives the same bits; floating kinds may differ across
shapes within FLOAT_REL_TOL.
"""

from __future__ import annotations

import logging
from concurrent.futures import Executor, ThreadPoolExecutor
from functools import reduce
from typing import List, Literal, Sequence

from pydantic import BaseModel, ConfigDict, Field, PositiveInt

from mergesum.core.config import settings
from mergesum.core.errors import DisjointnessError, SpecError
from mergesum.services.combinators import SchemaLike, SchemaSummary, merge_schema, summarize_records
from mergesum.services.ingestion import Partition

logger = logging.getLogger(__name__)


class ReductionPlan(BaseModel):
    model_config = ConfigDict(frozen=True)

    mode: Literal["sequential", "tree"] = "sequential"
    workers: PositiveInt = Field(default_factory=lambda: settings.WORKERS)
    # forces a sequential left fold in partition-id order
    deterministic: bool = False

    @property
    def effective_mode(self) -> str:
        return "sequential" if self.deterministic else self.mode


def check_disjoint(partitions: Sequence[Partition]) -> None:
    seen, owner = set(), {}
    for part in partitions:
        if part.partition_id in seen:
            raise DisjointnessError(f"partition id '{part.partition_id}' appears twice")
        seen.add(part.partition_id)
        for uid in part.unit_ids:
            if uid in owner:
                raise DisjointnessError(
                    f"unit '{uid}' is in both '{owner[uid]}' and '{part.partition_id}'"
                )
            owner[uid] = part.partition_id


def _tree_reduce(items: List[SchemaSummary], pool: Executor) -> SchemaSummary:
    level = items
    while len(level) > 1:
        pairs = [(level[i], level[i + 1]) for i in range(0, len(level) - 1, 2)]
        merged = list(pool.map(lambda pair: merge_schema(*pair), pairs))
        if len(level) % 2:
            merged.append(level[-1])
        level = merged
    return level[0]


def aggregate(partitions: Sequence[Partition], schema: SchemaLike, plan: ReductionPlan = None) -> SchemaSummary:
    """Summarize every partition, then merge; equals summarizing the union."""
    plan = plan or ReductionPlan()
    partitions = list(partitions)
    if not partitions:
        raise SpecError("aggregate needs at least one partition")
    check_disjoint(partitions)
    if plan.deterministic:
        partitions.sort(key=lambda p: p.partition_id)

    def summarize_partition(part: Partition) -> SchemaSummary:
        return summarize_records(schema, part.frame, part.unit_ids, (part.partition_id,))

    with ThreadPoolExecutor(max_workers=plan.workers) as pool:
        partials = list(pool.map(summarize_partition, partitions))
        if plan.effective_mode == "tree":
            result = _tree_reduce(partials, pool)
        else:
            result = reduce(merge_schema, partials)
    logger.info(
        "Aggregated %d partitions (%d units) with %s plan, %d workers",
        len(partitions),
        result.n,
        plan.effective_mode,
        plan.workers,
    )
    return result

"""
Summary operations over HTTP: summarize, merge, oracle check and witnesses.
"""

from typing import Any, List, Optional

from fastapi import APIRouter, HTTPException
from pydantic import BaseModel, Field

from mergesum.schemas.specs import SummarySpec
from mergesum.services.summaries import Summary, merge_all, summarize
from mergesum.services.verification import (
    WORKED_EXAMPLES,
    MergeReport,
    WitnessQuadruple,
    WitnessReport,
    check_witness,
    get_statistic,
    oracle_check,
    search_witness,
)

router = APIRouter(prefix="/summaries", tags=["summaries"])


class SummarizeRequest(BaseModel):
    spec: SummarySpec
    values: List[Any]
    unit_ids: Optional[List[str]] = None


class MergeRequest(BaseModel):
    summaries: List[Summary] = Field(min_length=1)


class VerifyRequest(BaseModel):
    spec: SummarySpec
    a_values: List[Any]
    b_values: List[Any]
    tolerance: Optional[float] = Field(None, gt=0)


class WitnessRequest(BaseModel):
    stat: str
    universe: List[float] = Field(min_length=1)
    max_size: int = Field(ge=1)


@router.post("/summarize", response_model=Summary)
def summarize_values(req: SummarizeRequest):
    return summarize(req.spec, req.values, req.unit_ids)


@router.post("/merge", response_model=Summary)
def merge_summaries(req: MergeRequest):
    return merge_all(req.summaries)


@router.post("/verify", response_model=MergeReport)
def verify_merge(req: VerifyRequest):
    return oracle_check(req.spec, req.a_values, req.b_values, req.tolerance)


@router.post("/witness", response_model=Optional[WitnessQuadruple])
def find_witness(req: WitnessRequest):
    return search_witness(get_statistic(req.stat), req.universe, req.max_size)


@router.get("/examples/{number}", response_model=WitnessReport)
def worked_example(number: int):
    if number not in WORKED_EXAMPLES:
        raise HTTPException(404, f"No worked example {number}; available: {sorted(WORKED_EXAMPLES)}")
    return check_witness(WORKED_EXAMPLES[number])

"""
Run schemas - Rows and records written by a training run

METRICS CSV (one row every run.eval_interval steps):
=====================================================
- greedy_return: mean undiscounted return of the greedy policy from the
  fixed evaluation starts
- queries_onpolicy / queries_offpolicy: cumulative paid expert answers
- tau: safety threshold in force at that step
- *_loss: mean training loss over the steps since the previous row
  (nan when no update happened in that window)

QUERY LOG CSV (one row per paid expert answer):
================================================
- kind: onpolicy (safety gate), offpolicy (SR core-set) or baseline
  (random / uncertainty strategies)
- state_id: maze cell index or observation hash
- expert_action: action index, or comma-separated floats for continuous actions
"""
from typing import Dict, Literal

from pydantic import BaseModel, Field

QueryKind = Literal["onpolicy", "offpolicy", "baseline"]


class MetricsRow(BaseModel):
    seed: int
    step: int = Field(..., ge=0)
    episode: int = Field(..., ge=0)
    greedy_return: float
    queries_onpolicy: int = Field(..., ge=0)
    queries_offpolicy: int = Field(..., ge=0)
    tau: float
    disc_loss: float
    wae_loss: float
    sr_loss: float
    policy_loss: float


class QueryRecord(BaseModel):
    step: int = Field(..., ge=0)
    kind: QueryKind
    state_id: str
    expert_action: str
    tau_at_query: float


class GateAuditSummary(BaseModel):
    gate_triggers: int = 0
    substitutions: int = 0
    denied_budget: int = 0
    deferred_cap: int = 0
    violations: int = 0

    @property
    def policy_ran_with_budget(self) -> int:
        return self.deferred_cap + self.violations


class RunSummary(BaseModel):
    """Per-seed summary stored as summary.json next to the CSVs"""
    strategy: str
    seed: int
    env_kind: str
    env_fingerprint: str
    budget: int
    total_steps: int
    steps_run: int
    episodes: int
    queries_onpolicy: int
    queries_offpolicy: int
    oracle_calls: int
    final_return: float
    expert_return: float
    expert_dataset: Dict[str, int] = Field(default_factory=dict)
    gate: GateAuditSummary = Field(default_factory=GateAuditSummary)

    @property
    def total_queries(self) -> int:
        return self.queries_onpolicy + self.queries_offpolicy


METRIC_COLUMNS = tuple(MetricsRow.model_fields)
QUERY_COLUMNS = tuple(QueryRecord.model_fields)

"""
Report schemas - Strategy comparison across a shared seed list
"""
from typing import Dict, List, Tuple

from pydantic import BaseModel, Field


class StrategySummary(BaseModel):
    strategy: str
    final_returns: Dict[int, float]
    query_counts: Dict[int, int]
    mean_return: float
    stderr_return: float
    mean_queries: float
    # (cumulative queries, mean greedy return) aligned on query count
    query_curve: List[Tuple[float, float]] = Field(default_factory=list)


class ComparisonReport(BaseModel):
    env_kind: str
    budget: int
    seeds: List[int]
    strategies: Dict[str, StrategySummary]
    # wins[a][b] = number of seeds on which a's final return beats b's
    pairwise_wins: Dict[str, Dict[str, int]]
    # mean_difference[a][b] = mean over seeds of (return_a - return_b)
    mean_difference: Dict[str, Dict[str, float]]

"""
Schemas package initialization - Export all pydantic schemas
"""
# Run outputs
from activeil.schemas.run import (
    METRIC_COLUMNS, QUERY_COLUMNS, GateAuditSummary, MetricsRow, QueryKind, QueryRecord, RunSummary,
)

# Comparison
from activeil.schemas.report import ComparisonReport, StrategySummary

__all__ = [
    "METRIC_COLUMNS",
    "QUERY_COLUMNS",
    "GateAuditSummary",
    "MetricsRow",
    "QueryKind",
    "QueryRecord",
    "RunSummary",
    "ComparisonReport",
    "StrategySummary",
]

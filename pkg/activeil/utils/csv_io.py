"""
CSV I/O - Strict readers and writers for run outputs

Fixed column sets, '.' decimal separator, shortest round-trip float text and
'nan' for missing losses; reading back yields exactly the floats written.
"""
from pathlib import Path
from typing import Iterable, List, Sequence, Union

import numpy as np
import pandas as pd

from activeil.core.exceptions import ComparisonError
from activeil.environments.base import Action
from activeil.schemas.run import METRIC_COLUMNS, QUERY_COLUMNS, MetricsRow, QueryRecord

PathLike = Union[str, Path]


def format_action(action: Action) -> str:
    if isinstance(action, (int, np.integer)):
        return str(int(action))
    return ",".join(repr(float(v)) for v in np.asarray(action, dtype=float).reshape(-1))


def _write(path: PathLike, records: Iterable, columns: Sequence[str]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame([r.model_dump() for r in records], columns=list(columns))
    frame.to_csv(path, index=False, na_rep="nan", lineterminator="\n")
    return path


def _read(path: PathLike, columns: Sequence[str], dtypes: dict) -> pd.DataFrame:
    path = Path(path)
    frame = pd.read_csv(path, dtype=dtypes, float_precision="round_trip", keep_default_na=False,
                        na_values=["nan"])
    if tuple(frame.columns) != tuple(columns):
        raise ComparisonError("Unexpected CSV columns", {"file": str(path), "columns": list(frame.columns)})
    return frame


def write_metrics_csv(path: PathLike, rows: Iterable[MetricsRow]) -> Path:
    return _write(path, rows, METRIC_COLUMNS)


def read_metrics_csv(path: PathLike) -> pd.DataFrame:
    dtypes = {name: ("int64" if info.annotation is int else "float64")
              for name, info in MetricsRow.model_fields.items()}
    return _read(path, METRIC_COLUMNS, dtypes)


def write_query_log_csv(path: PathLike, records: Iterable[QueryRecord]) -> Path:
    return _write(path, records, QUERY_COLUMNS)


def read_query_log_csv(path: PathLike) -> List[QueryRecord]:
    dtypes = {"step": "int64", "kind": str, "state_id": str, "expert_action": str, "tau_at_query": "float64"}
    frame = _read(path, QUERY_COLUMNS, dtypes)
    return [QueryRecord(**row) for row in frame.to_dict(orient="records")]

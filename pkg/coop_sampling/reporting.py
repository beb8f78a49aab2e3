"""
Metrics and summary emission.

Metrics are written as CSV, one row per round including round 0, with
columns in a fixed order and numbers rendered with six decimals. The
summary is a JSON document with the final distances, message totals and
property verdicts.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Sequence, Union

import pandas as pd

from coop_sampling.config import Config
from coop_sampling.errors import IoFailure
from coop_sampling.simulation import RoundMetrics

logger = logging.getLogger(__name__)

BASE_COLUMNS = ["round", "policy", "seed", "l2_distance", "lower_bound", "cumulative_messages", "sweeps"]


def metrics_columns(n_class: int) -> List[str]:
    return BASE_COLUMNS + [f"class_{k}" for k in range(n_class)]


def metrics_frame(rows: Sequence[RoundMetrics]) -> pd.DataFrame:
    if not rows:
        raise ValueError("no metrics rows to emit")
    n_class = len(rows[0].per_class_cloud_counts)
    records = []
    for row in rows:
        record = {
            "round": int(row.round),
            "policy": row.policy.value,
            "seed": int(row.seed),
            "l2_distance": float(row.l2_distance),
            "lower_bound": float(row.lower_bound),
            "cumulative_messages": int(row.cumulative_messages),
            "sweeps": int(row.sweeps),
        }
        for k, count in enumerate(row.per_class_cloud_counts):
            record[f"class_{k}"] = float(count)
        records.append(record)
    return pd.DataFrame.from_records(records, columns=metrics_columns(n_class))


def emit_round_metrics(rows: Sequence[RoundMetrics], destination: Union[str, Path]) -> Path:
    """Write header plus rows, in the order given, to `destination`."""
    path = Path(destination)
    frame = metrics_frame(rows)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, float_format=Config.FLOAT_FORMAT, lineterminator="\n", encoding="utf-8")
    except OSError as error:
        raise IoFailure(str(path), str(error)) from error
    logger.info(f"Wrote {len(frame)} metrics rows to {path}")
    return path


def read_metrics_csv(path: Union[str, Path]) -> pd.DataFrame:
    return pd.read_csv(path)


def write_summary(summary: Dict[str, Any], destination: Union[str, Path]) -> Path:
    path = Path(destination)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as error:
        raise IoFailure(str(path), str(error)) from error
    logger.info(f"Wrote summary to {path}")
    return path


def improvement_pct(greedy_l2: float, interactive_l2: float) -> float:
    """Relative reduction of the final distance achieved by interactive over greedy, in percent."""
    if greedy_l2 == 0:
        return 0.0
    return 100.0 * (greedy_l2 - interactive_l2) / greedy_l2

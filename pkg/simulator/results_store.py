import csv
import json
from typing import Any, Dict, List
from loguru import logger
import sys
import os

# Add shared directory to path
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from shared.models import RunRecord, AggregatePoint, SweepPoint
from shared.config import Config, CsvColumns


def _ensure_parent(path: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def _write_rows(path: str, header: List[str], rows: List[List[str]]) -> str:
    _ensure_parent(path)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    logger.info(f"Wrote {len(rows)} rows to {path}")
    return path


def derived_path(path: str, suffix: str) -> str:
    """results/run.csv -> results/run<suffix>"""
    stem, _ = os.path.splitext(path)
    return stem + suffix


def write_records_csv(path: str, records: List[RunRecord]) -> str:
    fmt = Config.format_number
    rows = [[str(r.seed), r.policy_id, r.adversary_id, str(r.t), fmt(r.cum_play_loss),
             fmt(r.cum_switch_cost), fmt(r.regret), fmt(r.switches_so_far)] for r in records]
    return _write_rows(path, CsvColumns.RECORDS, rows)


def read_records_csv(path: str) -> List[RunRecord]:
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames != CsvColumns.RECORDS:
            raise ValueError(f"{path} does not have the run-record header")
        return [
            RunRecord(seed=int(row["seed"]), policy_id=row["policy"], adversary_id=row["adversary"],
                      t=int(row["t"]), cum_play_loss=float(row["cum_play_loss"]),
                      cum_switch_cost=float(row["cum_switch_cost"]), regret=float(row["regret"]),
                      switches_so_far=float(row["switches"]))
            for row in reader
        ]


def write_aggregate_csv(path: str, points: List[AggregatePoint]) -> str:
    fmt = Config.format_number
    rows = [[p.policy_id, p.adversary_id, str(p.t), fmt(p.mean_regret), fmt(p.se_regret), str(p.n_seeds)]
            for p in points]
    return _write_rows(path, CsvColumns.AGGREGATE, rows)


def write_sweep_csv(path: str, points: List[SweepPoint]) -> str:
    fmt = Config.format_number
    rows = [[p.vary, fmt(p.value), p.policy_id, fmt(p.mean_regret), fmt(p.se_regret)] for p in points]
    return _write_rows(path, CsvColumns.SWEEP, rows)


def write_metadata(path: str, metadata: Dict[str, Any]) -> str:
    """JSON sidecar next to a results CSV"""
    target = derived_path(path, ".meta.json")
    _ensure_parent(target)
    with open(target, "w", encoding="utf-8") as handle:
        json.dump(metadata, handle, indent=2, sort_keys=True, default=str)
        handle.write("\n")
    logger.debug(f"Wrote metadata to {target}")
    return target

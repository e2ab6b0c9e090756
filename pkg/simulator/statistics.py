import math
from collections import OrderedDict
from typing import Dict, List, Sequence, Tuple
import numpy as np
from loguru import logger
import sys
import os

# Add shared directory to path
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from shared.models import RunRecord, AggregatePoint
from shared.errors import RaggedRecordsError, InvalidParameterError


def mean_and_se(values: Sequence[float]) -> Tuple[float, float]:
    """Sample mean and its standard error (ddof=1); SE is NaN for a single value"""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise InvalidParameterError("cannot summarise an empty sample")
    if arr.size == 1:
        return float(arr[0]), float("nan")
    return float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(arr.size))


def aggregate(records: List[RunRecord]) -> List[AggregatePoint]:
    """Pointwise mean and standard error of regret across seeds, per (policy, adversary) curve"""
    curves: "OrderedDict[Tuple[str, str], Dict[int, Dict[int, float]]]" = OrderedDict()
    for record in records:
        by_seed = curves.setdefault((record.policy_id, record.adversary_id), OrderedDict())
        by_seed.setdefault(record.seed, OrderedDict())[record.t] = record.regret

    points: List[AggregatePoint] = []
    for (policy_id, adversary_id), by_seed in curves.items():
        grids = [tuple(curve) for curve in by_seed.values()]
        if any(grid != grids[0] for grid in grids):
            raise RaggedRecordsError(f"seeds of {policy_id}/{adversary_id} recorded different time points")
        if len(by_seed) < 2:
            logger.warning(f"Only one seed for {policy_id}/{adversary_id}; standard errors are undefined")
        for t in grids[0]:
            mean, se = mean_and_se([curve[t] for curve in by_seed.values()])
            points.append(AggregatePoint(policy_id=policy_id, adversary_id=adversary_id, t=t,
                                         mean_regret=mean, se_regret=se, n_seeds=len(by_seed)))
    return points


def final_regret_summary(records: List[RunRecord]) -> Dict[str, Tuple[float, float, int]]:
    """policy -> (mean, SE, seeds) of the regret at the last recorded round"""
    last: "OrderedDict[str, Dict[int, RunRecord]]" = OrderedDict()
    for record in records:
        current = last.setdefault(record.policy_id, {}).get(record.seed)
        if current is None or record.t > current.t:
            last[record.policy_id][record.seed] = record
    summary = {}
    for policy_id, by_seed in last.items():
        mean, se = mean_and_se([r.regret for r in by_seed.values()])
        summary[policy_id] = (mean, se, len(by_seed))
    return summary


def pooled_standard_error(se_a: float, se_b: float) -> float:
    return math.sqrt(se_a ** 2 + se_b ** 2)


def fit_scaling_exponent(sweep: Sequence[Tuple[float, float]]) -> Tuple[float, float]:
    """Least squares slope of ln(regret) on ln(x), with its r^2"""
    if len(sweep) < 3:
        raise InvalidParameterError(f"need at least 3 sweep points, got {len(sweep)}")
    x = np.asarray([point[0] for point in sweep], dtype=float)
    y = np.asarray([point[1] for point in sweep], dtype=float)
    if np.any(x <= 0) or np.any(y <= 0):
        raise InvalidParameterError("scaling fit needs strictly positive x and regret values")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    residual = ly - (slope * lx + intercept)
    ss_tot = float(((ly - ly.mean()) ** 2).sum())
    r_squared = 1.0 if ss_tot == 0.0 else 1.0 - float((residual ** 2).sum()) / ss_tot
    return float(slope), r_squared

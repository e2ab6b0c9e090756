import os
from dotenv import load_dotenv
from typing import List, Optional
from loguru import logger

from shared.errors import ConfigError

load_dotenv()


class Config:
    # Application Configuration
    DEBUG: bool = os.getenv("DEBUG", "false").lower() == "true"
    LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO")

    # Runner Configuration
    COMBAT_SWITCH_THREADS: Optional[str] = os.getenv("COMBAT_SWITCH_THREADS")
    RESULTS_DIR: str = os.getenv("RESULTS_DIR", "results")
    DEFAULT_SEEDS: str = os.getenv("DEFAULT_SEEDS", "0-19")

    # Numerical Configuration
    MAX_ENUMERATED_ARMS: int = int(os.getenv("MAX_ENUMERATED_ARMS", "1000000"))
    HULL_FLOOR: float = float(os.getenv("HULL_FLOOR", "1e-12"))
    PINV_RANK_TOLERANCE: float = float(os.getenv("PINV_RANK_TOLERANCE", "1e-10"))
    ROUNDING_GUARD: float = 1e-12

    # Output Configuration
    CSV_SIGNIFICANT_DIGITS: int = int(os.getenv("CSV_SIGNIFICANT_DIGITS", "12"))

    @classmethod
    def get_thread_count(cls, override: Optional[int] = None) -> int:
        """Resolve worker threads: explicit flag, then COMBAT_SWITCH_THREADS, then 1"""
        if override is not None:
            return max(1, int(override))
        if not cls.COMBAT_SWITCH_THREADS:
            return 1
        try:
            threads = int(cls.COMBAT_SWITCH_THREADS)
        except ValueError as e:
            raise ConfigError(f"COMBAT_SWITCH_THREADS must be an integer, got '{cls.COMBAT_SWITCH_THREADS}'") from e
        if threads < 1:
            logger.warning(f"COMBAT_SWITCH_THREADS={threads} is below 1; using one thread")
        return max(1, threads)

    @classmethod
    def get_default_seeds(cls) -> List[int]:
        """Default replicate seeds used by figure presets"""
        return parse_seed_list(cls.DEFAULT_SEEDS)

    @classmethod
    def format_number(cls, value: float) -> str:
        """Format a float for CSV output"""
        return f"{value:.{cls.CSV_SIGNIFICANT_DIGITS}g}"


def parse_seed_list(text: str) -> List[int]:
    """Parse '0,1,5' or '0-19' (or a mix of both) into a list of seeds"""
    seeds: List[int] = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        if "-" in chunk:
            start, end = chunk.split("-", 1)
            lo, hi = int(start), int(end)
            if hi < lo:
                raise ValueError(f"descending seed range '{chunk}'")
            seeds.extend(range(lo, hi + 1))
        else:
            seeds.append(int(chunk))
    if not seeds:
        raise ValueError("seed list is empty")
    return seeds


# CSV Columns
class CsvColumns:
    RECORDS = ["seed", "policy", "adversary", "t", "cum_play_loss", "cum_switch_cost", "regret", "switches"]
    AGGREGATE = ["policy", "adversary", "t", "mean_regret", "se_regret", "n_seeds"]
    SWEEP = ["vary", "value", "policy", "mean_regret", "se_regret"]


# Policy Identifiers
class PolicyIds:
    EXP2 = "exp2"
    EXP3 = "exp3"
    BROAD = "broad"
    HYBRID = "hybrid"
    NEGENTROPY = "negentropy"

    BANDIT = [EXP2, EXP3]
    SEMIBANDIT = [BROAD, HYBRID, NEGENTROPY]


# Figure Presets
class FigurePresets:
    """Parameters of the published experiments; scale 10 and experiment noise throughout"""

    _CURVE_BANDIT = {"K": 10, "I": 3, "T": 10000, "policies": [PolicyIds.EXP2, PolicyIds.EXP3],
                     "schedule": "experiment_bandit", "feedback": "bandit"}
    _CURVE_SEMI = {"K": 10, "I": 3, "T": 10000, "policies": [PolicyIds.BROAD, PolicyIds.HYBRID, PolicyIds.NEGENTROPY],
                   "schedule": "experiment_semibandit", "feedback": "semibandit"}

    PRESETS = {
        "fig5a": {**_CURVE_BANDIT, "lambda": 1.0, "adversary": "cin"},
        "fig5b": {**_CURVE_BANDIT, "lambda": 0.1, "adversary": "cin"},
        "fig5c": {**_CURVE_BANDIT, "lambda": 1.0, "adversary": "sc", "alpha_check": 0.01},
        "fig5d": {**_CURVE_BANDIT, "lambda": 0.1, "adversary": "sc", "alpha_check": 0.01},
        "fig5e": {**_CURVE_BANDIT, "K": 20, "lambda": 1.0, "adversary": "cin", "policies": [PolicyIds.EXP2],
                  "vary": "I", "values": [2, 3, 4, 5, 6]},
        "fig5f": {**_CURVE_BANDIT, "K": 30, "lambda": 1.0, "adversary": "cin", "policies": [PolicyIds.EXP2],
                  "vary": "lambda", "values": [0.25, 0.5, 1.0, 2.0, 4.0]},
        "fig6a": {**_CURVE_SEMI, "lambda": 1.0, "adversary": "cdn"},
        "fig6b": {**_CURVE_SEMI, "lambda": 0.1, "adversary": "cdn"},
        "fig6c": {**_CURVE_SEMI, "lambda": 1.0, "adversary": "sc", "alpha_check": 0.005},
        "fig6d": {**_CURVE_SEMI, "lambda": 0.1, "adversary": "sc", "alpha_check": 0.005},
        "fig6e": {**_CURVE_SEMI, "K": 40, "lambda": 1.0, "adversary": "cdn", "policies": [PolicyIds.BROAD],
                  "vary": "I", "values": [2, 4, 6, 8, 10]},
        "fig6f": {**_CURVE_SEMI, "K": 30, "lambda": 1.0, "adversary": "cdn", "policies": [PolicyIds.BROAD],
                  "vary": "lambda", "values": [0.25, 0.5, 1.0, 2.0, 4.0]},
    }

    SCALE = 10.0
    NOISE_PROFILE = "experiment"

    @classmethod
    def names(cls) -> List[str]:
        return sorted(cls.PRESETS)

    @classmethod
    def get(cls, name: str) -> dict:
        if name not in cls.PRESETS:
            raise KeyError(name)
        return dict(cls.PRESETS[name])

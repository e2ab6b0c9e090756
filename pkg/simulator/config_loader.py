"""
Experiment files: flat KEY=VALUE text read with python-dotenv.

    K=10
    I=3
    T=10000
    LAMBDA=1
    ADVERSARY_KIND=cin
    ADVERSARY_SCALE=10
    ADVERSARY_NOISE_PROFILE=experiment
    POLICIES=exp2,exp3
    POLICY_EXP2_ETA=0.002
    SCHEDULE=experiment_bandit
    FEEDBACK=bandit
    SEEDS=0-19
    OUTPUT=results/fig5a.csv
    GRANULARITY=batch
"""
from typing import Any, Dict, List, Optional, Tuple
from dotenv import dotenv_values
from pydantic import ValidationError
from loguru import logger
import sys
import os

# Add shared directory to path
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from shared.models import (
    ProblemSpec, AdversaryConfig, ExperimentConfig, PolicySpec, CombinatorialArm,
    ScheduleKind, FeedbackMode, Granularity
)
from shared.config import Config, FigurePresets, parse_seed_list
from shared.errors import ConfigError
from simulator.policy_registry import known_policies

REQUIRED_KEYS = ["K", "I", "T", "LAMBDA", "ADVERSARY_KIND", "POLICIES"]


def _describe(error: ValidationError) -> str:
    first = error.errors()[0]
    field = ".".join(str(part) for part in first.get("loc", ())) or "config"
    return f"invalid value for '{field}': {first.get('msg', 'validation failed')}"


def _number(values: Dict[str, Optional[str]], key: str, cast, default=None):
    raw = values.get(key)
    if raw is None or raw == "":
        if default is None:
            raise ConfigError(f"missing required key '{key}'")
        return default
    try:
        return cast(raw)
    except ValueError as e:
        raise ConfigError(f"key '{key}' is not a valid {cast.__name__}: {raw!r}") from e


def parse_schedule(text: str) -> Tuple[ScheduleKind, Optional[int]]:
    """'experiment_bandit', 'theorem_broad', ... or 'fixed:B'"""
    if text.startswith("fixed"):
        _, _, length = text.partition(":")
        if not length:
            raise ConfigError("fixed schedule needs a batch length, e.g. SCHEDULE=fixed:44")
        try:
            return ScheduleKind.FIXED, int(length)
        except ValueError as e:
            raise ConfigError(f"invalid batch length in SCHEDULE={text!r}") from e
    try:
        return ScheduleKind(text), None
    except ValueError as e:
        raise ConfigError(f"unknown SCHEDULE '{text}'") from e


def parse_policy_overrides(values: Dict[str, Optional[str]], policy_ids: List[str]) -> List[PolicySpec]:
    policies = []
    for policy_id in policy_ids:
        prefix = f"POLICY_{policy_id.upper()}_"
        overrides = {key[len(prefix):].lower(): value for key, value in values.items()
                     if key.startswith(prefix) and value not in (None, "")}
        policies.append(PolicySpec(policy_id=policy_id, overrides=overrides))
    return policies


def build_experiment_config(values: Dict[str, Optional[str]], base_dir: str = ".") -> ExperimentConfig:
    """ExperimentConfig from already-parsed key/value pairs"""
    missing = [key for key in REQUIRED_KEYS if not values.get(key)]
    if missing:
        raise ConfigError(f"missing required key(s): {', '.join(missing)}")

    policy_ids = [p.strip().lower() for p in values["POLICIES"].split(",") if p.strip()]
    unknown = [p for p in policy_ids if p not in known_policies()]
    if unknown:
        raise ConfigError(f"unknown polic{'y' if len(unknown) == 1 else 'ies'} {unknown}; known: {known_policies()}")

    feedback_text = (values.get("FEEDBACK") or "bandit").lower()
    try:
        feedback = FeedbackMode(feedback_text)
    except ValueError as e:
        raise ConfigError(f"unknown FEEDBACK '{feedback_text}'") from e
    schedule, fixed_batch = parse_schedule(values.get("SCHEDULE") or f"experiment_{feedback.value}")

    try:
        seeds = parse_seed_list(values.get("SEEDS") or Config.DEFAULT_SEEDS)
    except ValueError as e:
        raise ConfigError(f"invalid SEEDS: {e}") from e

    replay_path = values.get("ADVERSARY_REPLAY_PATH") or None
    if replay_path and not os.path.isabs(replay_path):
        replay_path = os.path.join(base_dir, replay_path)

    try:
        spec = ProblemSpec(
            K=_number(values, "K", int),
            I=_number(values, "I", int),
            T=_number(values, "T", int),
            lam=_number(values, "LAMBDA", float),
        )
        chi = None
        if values.get("ADVERSARY_CHI"):
            indices = [int(i) for i in values["ADVERSARY_CHI"].split(",") if i.strip()]
            chi = CombinatorialArm.from_indices(spec.K, indices)
        alpha_check = values.get("ADVERSARY_ALPHA_CHECK")
        adversary = AdversaryConfig(
            kind=(values["ADVERSARY_KIND"] or "").lower(),
            spec=spec,
            scale=_number(values, "ADVERSARY_SCALE", float, 1.0),
            alpha_check=float(alpha_check) if alpha_check else None,
            seed=_number(values, "ADVERSARY_SEED", int, 0),
            chi=chi,
            noise_profile=(values.get("ADVERSARY_NOISE_PROFILE") or "theorem").lower(),
            replay_path=replay_path,
        )
        return ExperimentConfig(
            spec=spec,
            adversary=adversary,
            policies=parse_policy_overrides(values, policy_ids),
            schedule=schedule,
            fixed_batch=fixed_batch,
            feedback=feedback,
            seeds=seeds,
            output_path=values.get("OUTPUT") or os.path.join(Config.RESULTS_DIR, "run.csv"),
            record_granularity=(values.get("GRANULARITY") or "batch").lower(),
        )
    except ValidationError as e:
        raise ConfigError(_describe(e)) from e
    except (ValueError, IndexError) as e:
        raise ConfigError(str(e)) from e


def load_experiment_config(path: str) -> ExperimentConfig:
    if not os.path.isfile(path):
        raise FileNotFoundError(f"config file not found: {path}")
    values = dotenv_values(path, interpolate=False)
    logger.debug(f"Loaded {len(values)} keys from {path}")
    return build_experiment_config(dict(values), base_dir=os.path.dirname(os.path.abspath(path)))


def preset_config(name: str, seeds: Optional[List[int]] = None,
                  output: Optional[str] = None) -> Tuple[ExperimentConfig, Optional[str], List[float]]:
    """(config, vary, values) for a named figure preset; vary is None for curve figures"""
    try:
        preset = FigurePresets.get(name)
    except KeyError as e:
        raise ConfigError(f"unknown figure '{name}' (known: {', '.join(FigurePresets.names())})") from e
    values: Dict[str, Any] = {
        "K": str(preset["K"]),
        "I": str(preset["I"]),
        "T": str(preset["T"]),
        "LAMBDA": str(preset["lambda"]),
        "ADVERSARY_KIND": preset["adversary"],
        "ADVERSARY_SCALE": str(FigurePresets.SCALE),
        "ADVERSARY_NOISE_PROFILE": FigurePresets.NOISE_PROFILE,
        "POLICIES": ",".join(preset["policies"]),
        "SCHEDULE": preset["schedule"],
        "FEEDBACK": preset["feedback"],
        "OUTPUT": output or os.path.join(Config.RESULTS_DIR, f"{name}.csv"),
    }
    if "alpha_check" in preset:
        values["ADVERSARY_ALPHA_CHECK"] = str(preset["alpha_check"])
    config = build_experiment_config(values)
    config = config.model_copy(update={"seeds": seeds or Config.get_default_seeds()})
    return config, preset.get("vary"), list(preset.get("values", []))

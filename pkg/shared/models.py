from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from typing import Optional, List, Dict, Any, Tuple
from enum import Enum
import numpy as np


class FeedbackMode(str, Enum):
    BANDIT = "bandit"
    SEMIBANDIT = "semibandit"


class AdversaryKind(str, Enum):
    CIN = "cin"
    CDN = "cdn"
    SC = "sc"
    REPLAY = "replay"


class NoiseProfile(str, Enum):
    THEOREM = "theorem"
    EXPERIMENT = "experiment"


class ScheduleKind(str, Enum):
    THEOREM_EXP2 = "theorem_exp2"
    THEOREM_BROAD = "theorem_broad"
    EXPERIMENT_BANDIT = "experiment_bandit"
    EXPERIMENT_SEMIBANDIT = "experiment_semibandit"
    FIXED = "fixed"


class Granularity(str, Enum):
    ROUND = "round"
    BATCH = "batch"


def _as_readonly_array(value: Any) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("vector contains non-finite entries")
    arr.setflags(write=False)
    return arr


class ProblemSpec(BaseModel):
    """K base arms, combinatorial arms of size I, horizon T and switching cost lambda"""
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    K: int = Field(ge=1)
    I: int = Field(ge=1)
    T: int = Field(ge=1)
    lam: float = Field(ge=0.0, alias="lambda")

    @model_validator(mode="after")
    def _check_size(self) -> "ProblemSpec":
        if self.I > self.K:
            raise ValueError(f"I={self.I} exceeds K={self.K}")
        return self

    def with_changes(self, **changes: Any) -> "ProblemSpec":
        data = {"K": self.K, "I": self.I, "T": self.T, "lam": self.lam}
        data.update(changes)
        return ProblemSpec(**data)


class CombinatorialArm(BaseModel):
    """Binary incidence vector of a set of base arms"""
    model_config = ConfigDict(frozen=True)

    bits: Tuple[int, ...]

    @field_validator("bits", mode="before")
    @classmethod
    def _binary(cls, value: Any) -> Tuple[int, ...]:
        bits = tuple(int(round(float(b))) for b in np.asarray(value).ravel())
        if any(b not in (0, 1) for b in bits):
            raise ValueError("arm entries must be 0 or 1")
        if not bits:
            raise ValueError("arm must have at least one coordinate")
        return bits

    @classmethod
    def from_indices(cls, K: int, indices) -> "CombinatorialArm":
        bits = [0] * K
        for i in indices:
            bits[int(i)] = 1
        return cls(bits=bits)

    @property
    def K(self) -> int:
        return len(self.bits)

    @property
    def size(self) -> int:
        return sum(self.bits)

    @property
    def indices(self) -> List[int]:
        return [i for i, b in enumerate(self.bits) if b]

    def as_array(self) -> np.ndarray:
        return np.array(self.bits, dtype=float)

    def check_size(self, I: int) -> "CombinatorialArm":
        if self.size != I:
            raise ValueError(f"arm has {self.size} base arms, expected {I}")
        return self


class LossVector(BaseModel):
    """Per-base-arm losses; [0, 1] per round or [0, B_n] accumulated over a batch"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    values: np.ndarray
    lo: float = 0.0
    hi: float = 1.0

    @field_validator("values", mode="before")
    @classmethod
    def _vector(cls, value: Any) -> np.ndarray:
        return _as_readonly_array(value)

    @model_validator(mode="after")
    def _bounds(self) -> "LossVector":
        slack = 1e-9 * max(1.0, abs(self.hi))
        if self.values.size and (self.values.min() < self.lo - slack or self.values.max() > self.hi + slack):
            raise ValueError(f"loss outside [{self.lo}, {self.hi}]")
        return self

    @property
    def K(self) -> int:
        return int(self.values.size)


class BatchSchedule(BaseModel):
    """Partition of the horizon into batches; batch_length is the nominal B"""
    model_config = ConfigDict(frozen=True)

    lengths: Tuple[int, ...]
    batch_length: int = Field(ge=1)
    nominal_batches: int = Field(ge=1)

    @field_validator("lengths")
    @classmethod
    def _positive(cls, value: Tuple[int, ...]) -> Tuple[int, ...]:
        if not value:
            raise ValueError("schedule needs at least one batch")
        if any(b < 1 for b in value):
            raise ValueError("batch lengths must be positive")
        return value

    @property
    def T(self) -> int:
        return sum(self.lengths)

    @property
    def N(self) -> int:
        return len(self.lengths)

    @property
    def starts(self) -> List[int]:
        """0-based round index at which each batch starts"""
        out, acc = [], 0
        for b in self.lengths:
            out.append(acc)
            acc += b
        return out


class HullPoint(BaseModel):
    """A point of the capped simplex {0 <= a_i <= 1, sum a_i = I}"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    a: np.ndarray
    I: int = Field(ge=1)

    @field_validator("a", mode="before")
    @classmethod
    def _vector(cls, value: Any) -> np.ndarray:
        return _as_readonly_array(value)

    @model_validator(mode="after")
    def _feasible(self) -> "HullPoint":
        if self.a.min() < -1e-12 or self.a.max() > 1.0 + 1e-9:
            raise ValueError("hull point coordinates must lie in [0, 1]")
        if abs(float(self.a.sum()) - self.I) > 1e-9:
            raise ValueError(f"hull point sums to {self.a.sum()}, expected {self.I}")
        return self

    @property
    def K(self) -> int:
        return int(self.a.size)


class VertexDecomposition(BaseModel):
    model_config = ConfigDict(frozen=True)

    vertices: List[CombinatorialArm]
    weights: Tuple[float, ...]

    def reconstruct(self) -> np.ndarray:
        return sum(w * v.as_array() for w, v in zip(self.weights, self.vertices))


class FeedbackView(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    mode: FeedbackMode
    bandit_value: float
    semibandit_vector: Optional[np.ndarray] = None


class AdversaryConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: AdversaryKind
    spec: ProblemSpec
    scale: float = Field(default=1.0, gt=0.0)
    alpha_check: Optional[float] = Field(default=None, ge=0.0)
    seed: int = 0
    chi: Optional[CombinatorialArm] = None
    noise_profile: NoiseProfile = NoiseProfile.THEOREM
    replay_path: Optional[str] = None

    @model_validator(mode="after")
    def _consistent(self) -> "AdversaryConfig":
        if self.kind == AdversaryKind.SC:
            if self.alpha_check is None:
                raise ValueError("SC adversary requires alpha_check")
            if self.alpha_check * self.spec.lam > 1.0:
                raise ValueError("alpha_check * lambda must not exceed 1")
        if self.kind == AdversaryKind.REPLAY and not self.replay_path:
            raise ValueError("replay adversary requires replay_path")
        if self.chi is not None:
            if self.chi.K != self.spec.K or self.chi.size != self.spec.I:
                raise ValueError("chi must be an arm with K coordinates and I ones")
        return self

    @property
    def label(self) -> str:
        if self.kind == AdversaryKind.SC:
            return f"sc({self.alpha_check:g})"
        return self.kind.value

    def with_changes(self, **changes: Any) -> "AdversaryConfig":
        data = self.model_dump()
        data["spec"] = self.spec
        data["chi"] = self.chi
        data.update(changes)
        return AdversaryConfig(**data)


class PolicySpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    policy_id: str
    overrides: Dict[str, Any] = Field(default_factory=dict)


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    spec: ProblemSpec
    adversary: AdversaryConfig
    policies: List[PolicySpec]
    schedule: ScheduleKind = ScheduleKind.EXPERIMENT_BANDIT
    fixed_batch: Optional[int] = Field(default=None, ge=1)
    feedback: FeedbackMode = FeedbackMode.BANDIT
    seeds: List[int]
    output_path: str = "results/run.csv"
    record_granularity: Granularity = Granularity.BATCH

    @model_validator(mode="after")
    def _consistent(self) -> "ExperimentConfig":
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if not self.policies:
            raise ValueError("at least one policy is required")
        if self.adversary.spec != self.spec:
            raise ValueError("adversary spec differs from experiment spec")
        if self.schedule == ScheduleKind.FIXED and self.fixed_batch is None:
            raise ValueError("fixed schedule requires fixed_batch")
        return self

    def with_spec(self, spec: ProblemSpec) -> "ExperimentConfig":
        """Same experiment on a different problem; a pinned chi is dropped if it no longer fits"""
        chi = self.adversary.chi
        if chi is not None and (chi.K != spec.K or chi.size != spec.I):
            chi = None
        adversary = self.adversary.with_changes(spec=spec, chi=chi)
        return self.model_copy(update={"spec": spec, "adversary": adversary})


class RunRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    seed: int
    policy_id: str
    adversary_id: str
    t: int
    cum_play_loss: float
    cum_switch_cost: float
    regret: float
    switches_so_far: float


class AggregatePoint(BaseModel):
    policy_id: str
    adversary_id: str
    t: int
    mean_regret: float
    se_regret: float
    n_seeds: int


class SweepPoint(BaseModel):
    vary: str
    value: float
    policy_id: str
    mean_regret: float
    se_regret: float

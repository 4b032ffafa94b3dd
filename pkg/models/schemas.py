"""
Pydantic models for run configuration, statistics, reports and the HTTP API
"""
from enum import Enum
from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator

from config import Config, SolverParams, get_preset, DEFAULT_PRESET, PRESETS


class SolveStatus(str, Enum):
    """Competition status line values"""
    SATISFIABLE = "SATISFIABLE"
    UNKNOWN = "UNKNOWN"
    UNSATISFIABLE = "UNSATISFIABLE"


# Exit codes of the solve command
EXIT_FEASIBLE = 0
EXIT_PARSE_ERROR = 2
EXIT_UNKNOWN = 10
EXIT_UNSAT = 20


class SolveStatistics(BaseModel):
    """Counters of a single solver run"""
    flips: int = 0
    local_optima: int = 0
    improvements: int = 0
    decimation_hard_forcings: int = 0
    decimation_soft_assignments: int = 0
    decimation_random_assignments: int = 0
    decimation_contradictions: int = 0
    decimation_time_s: float = 0.0
    time_to_first_feasible_s: Optional[float] = None
    best_cost: Optional[int] = None
    elapsed_s: float = 0.0

    def to_key_values(self) -> List[str]:
        """Render as key=value lines (None as NA)"""
        lines = []
        for key, value in self.model_dump().items():
            if value is None:
                value = "NA"
            elif isinstance(value, float):
                value = f"{value:.6f}"
            lines.append(f"{key}={value}")
        return lines


def _known_preset(v: str) -> str:
    """Preset must be one of the known solver variants"""
    if v not in PRESETS:
        raise ValueError(f"Unknown preset '{v}'. Available: {', '.join(PRESETS)}")
    return v


class RunConfig(BaseModel):
    """One solver configuration of the command line or a bench sweep"""
    name: str = DEFAULT_PRESET
    instance: Optional[str] = None
    preset: str = DEFAULT_PRESET
    cutoff: float = Field(Config.DEFAULT_CUTOFF, ge=0)
    seed: int = 1
    p: float = Field(Config.DEFAULT_P, ge=0.0, le=1.0)
    no_decimation: bool = False
    no_care: bool = False
    bms: int = Field(0, ge=0)
    gamma: int = Field(Config.DEFAULT_GAMMA, ge=1)
    hard_weight_inc: int = Field(Config.HARD_WEIGHT_INC, ge=1)
    objective_weight_inc: int = Field(Config.OBJECTIVE_WEIGHT_INC, ge=1)
    max_flips: Optional[int] = Field(None, ge=0)
    run_to_cutoff: bool = False

    @field_validator("preset")
    @classmethod
    def validate_preset(cls, v: str) -> str:
        return _known_preset(v)

    def to_params(self) -> SolverParams:
        """Resolve preset and flags into solver parameters; --no-care forces p = 1"""
        base = SolverParams(
            seed=self.seed,
            cutoff=self.cutoff,
            p=self.p,
            bms=self.bms,
            gamma=self.gamma,
            hard_weight_inc=self.hard_weight_inc,
            objective_weight_inc=self.objective_weight_inc,
            max_flips=self.max_flips,
            stop_at_lower_bound=not self.run_to_cutoff,
        )
        params = get_preset(self.preset, base)
        # an explicit p outranks the preset's switch
        if "p" in self.model_fields_set:
            params.p = self.p
        if self.no_decimation:
            params.decimation = False
        if self.no_care:
            params.p = 1.0
        return params

    def cli_args(self, seed: Optional[int] = None) -> List[str]:
        """Flags reproducing this configuration on the solve command"""
        args = [
            "--preset", self.preset,
            "--cutoff", repr(self.cutoff),
            "--seed", str(self.seed if seed is None else seed),
            "--gamma", str(self.gamma),
            "--hard-inc", str(self.hard_weight_inc),
            "--objective-inc", str(self.objective_weight_inc),
        ]
        if "p" in self.model_fields_set:
            args += ["--p", repr(self.p)]
        if self.no_decimation:
            args.append("--no-decimation")
        if self.no_care:
            args.append("--no-care")
        if self.bms:
            args += ["--bms", str(self.bms)]
        if self.max_flips is not None:
            args += ["--max-flips", str(self.max_flips)]
        if self.run_to_cutoff:
            args.append("--run-to-cutoff")
        return args


class RunRecord(BaseModel):
    """Outcome of one (instance, config, seed) run in a sweep"""
    instance: str
    config: str
    seed: int
    status: str  # SATISFIABLE, UNKNOWN, UNSATISFIABLE, TIMEOUT, ERROR
    best_cost: Optional[int] = None
    time_to_first_feasible_s: Optional[float] = None
    flips: Optional[int] = None
    local_optima: Optional[int] = None
    exit_code: Optional[int] = None
    error: str = ""


CSV_COLUMNS = [
    "instance", "config", "seed", "status", "best_cost",
    "time_to_first_feasible_s", "flips", "local_optima",
]


class BenchRow(BaseModel):
    """Aggregated results of one config on one instance"""
    instance: str
    config: str
    runs: int
    feasible_runs: int
    min_cost: Optional[int] = None
    median_cost: Optional[float] = None
    max_cost: Optional[int] = None
    ttff_quantiles: Dict[str, Optional[float]] = Field(default_factory=dict)

    @property
    def delta_median(self) -> Optional[float]:
        if self.min_cost is None or self.median_cost is None:
            return None
        return self.median_cost - self.min_cost

    @property
    def delta_max(self) -> Optional[int]:
        if self.min_cost is None or self.max_cost is None:
            return None
        return self.max_cost - self.min_cost


TIE_RULE = "ties on the best cost credit a win to every tied config"


class BenchReport(BaseModel):
    """Sweep summary in the min [+median, +max] reporting shape"""
    seeds: int
    configs: List[str]
    instances: List[str]
    rows: List[BenchRow]
    wins: Dict[str, int]
    tie_rule: str = TIE_RULE


class VerificationReport(BaseModel):
    """Independent check of an assignment against an instance"""
    feasible: bool
    violated: List[int] = Field(default_factory=list)
    objective_value: int

    @model_validator(mode="after")
    def check_consistency(self) -> "VerificationReport":
        """feasible iff nothing is violated"""
        if self.feasible != (not self.violated):
            raise ValueError("feasible must equal an empty violated list")
        return self


class InstanceSummary(BaseModel):
    """Size and shape statistics of an instance"""
    num_vars: int
    num_constraints: int
    objective_terms: int
    objective_offset: int
    min_coeff: Optional[int] = None
    max_coeff: Optional[int] = None
    clauses: int
    cardinality_constraints: int
    general_constraints: int


class SolveRequest(BaseModel):
    """Request model for the solve endpoint"""
    opb: str = Field(..., min_length=1)
    preset: str = DEFAULT_PRESET
    cutoff: float = Field(10.0, gt=0, le=Config.MAX_API_CUTOFF)
    seed: int = 1
    p: float = Field(Config.DEFAULT_P, ge=0.0, le=1.0)
    no_decimation: bool = False
    no_care: bool = False
    bms: int = Field(0, ge=0)
    gamma: int = Field(Config.DEFAULT_GAMMA, ge=1)
    max_flips: Optional[int] = Field(None, ge=0)

    @field_validator("preset")
    @classmethod
    def validate_preset(cls, v: str) -> str:
        return _known_preset(v)

    def to_run_config(self) -> RunConfig:
        options = self.model_dump(exclude={"opb", "preset", "cutoff"}, exclude_unset=True)
        return RunConfig(name=self.preset, preset=self.preset, cutoff=self.cutoff, **options)


class SolveResponse(BaseModel):
    """Response model for the solve endpoint"""
    status: SolveStatus
    message: str
    cost: Optional[int] = None
    literals: Optional[List[str]] = None
    improvements: List[Tuple[int, float]] = Field(default_factory=list)
    statistics: Optional[SolveStatistics] = None
    processing_time: Optional[float] = None


class VerifyRequest(BaseModel):
    """Request model for the verify endpoint"""
    opb: str = Field(..., min_length=1)
    solution: str = Field(..., min_length=1)


class ErrorResponse(BaseModel):
    """Error response model"""
    status: Literal["error"]
    message: str
    details: Optional[dict] = None


class HealthResponse(BaseModel):
    """Health check response"""
    status: Literal["healthy", "unhealthy"]
    version: str
    presets: List[str]

"""
Configuration and solver presets for the DeciLS-PBO solver
"""
import os
from typing import Dict, Any, Optional
from dataclasses import dataclass, replace

from dotenv import load_dotenv

load_dotenv()


# Environment configuration
class Config:
    """Application configuration"""
    DEFAULT_CUTOFF = float(os.getenv("PBO_CUTOFF", 300))  # seconds, short time limit
    DEFAULT_P = float(os.getenv("PBO_P", 0.5))  # probability of a random falsified constraint
    DEFAULT_GAMMA = int(os.getenv("PBO_GAMMA", 1000))  # objective weight cap
    HARD_WEIGHT_INC = int(os.getenv("PBO_HARD_WEIGHT_INC", 1))
    OBJECTIVE_WEIGHT_INC = int(os.getenv("PBO_OBJECTIVE_WEIGHT_INC", 1))
    TIME_CHECK_INTERVAL = int(os.getenv("PBO_TIME_CHECK_INTERVAL", 1024))  # flips between clock polls

    # Bench harness
    KILL_GRACE = float(os.getenv("PBO_KILL_GRACE", 5))  # seconds past cutoff before a hard kill
    BENCH_JOBS = int(os.getenv("PBO_BENCH_JOBS", os.cpu_count() or 1))

    # Oracle guards
    BRUTE_FORCE_MAX_VARS = int(os.getenv("PBO_BRUTE_FORCE_MAX_VARS", 25))
    FORCED_ORACLE_MAX_VARS = int(os.getenv("PBO_FORCED_ORACLE_MAX_VARS", 20))

    # Output
    V_LINE_WIDTH = int(os.getenv("PBO_V_LINE_WIDTH", 4096))
    MAX_COEFF_SUM = 1 << 62  # per constraint / objective, checked at parse time

    # HTTP service
    MAX_API_CUTOFF = float(os.getenv("PBO_MAX_API_CUTOFF", 60))
    MAX_CONCURRENT_SOLVES = int(os.getenv("PBO_MAX_CONCURRENT_SOLVES", 2))
    PORT = int(os.getenv("PORT", 8000))

    LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO").upper()
    LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

    VERSION = "1.0.0"


@dataclass
class SolverParams:
    """Parameters of a single solver run"""
    seed: int = 1
    cutoff: float = Config.DEFAULT_CUTOFF
    p: float = Config.DEFAULT_P
    decimation: bool = True
    bms: int = 0  # 0 disables best-of-k sampling
    gamma: int = Config.DEFAULT_GAMMA
    hard_weight_inc: int = Config.HARD_WEIGHT_INC
    objective_weight_inc: int = Config.OBJECTIVE_WEIGHT_INC
    max_flips: Optional[int] = None
    time_check_interval: int = Config.TIME_CHECK_INTERVAL
    stop_at_lower_bound: bool = True

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")
        if self.bms < 0:
            raise ValueError(f"bms must be >= 0, got {self.bms}")
        if self.gamma < 1:
            raise ValueError(f"gamma must be >= 1, got {self.gamma}")
        if self.time_check_interval < 1:
            raise ValueError("time_check_interval must be >= 1")


# Solver variants: care-driven selection and decimation initialization
# switched on and off independently.
PRESETS: Dict[str, Dict[str, Any]] = {
    "deci-ls-pbo": {"decimation": True},
    "alt1": {"decimation": False},           # care-driven selection only
    "alt2": {"decimation": True, "p": 1.0},  # decimation only
    "ls-pbo": {"decimation": False, "p": 1.0},
}

DEFAULT_PRESET = "deci-ls-pbo"


def get_preset(name: str, base: Optional[SolverParams] = None) -> SolverParams:
    """
    Get solver parameters for a named preset

    Args:
        name: Preset name (see PRESETS)
        base: Parameters the preset is applied on top of

    Returns:
        SolverParams with the preset's switches applied

    Raises:
        ValueError: If the preset is unknown
    """
    if name not in PRESETS:
        raise ValueError(f"Unknown preset '{name}'. Available: {', '.join(PRESETS)}")
    return replace(base or SolverParams(), **PRESETS[name])

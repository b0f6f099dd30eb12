"""
Application configuration settings
"""
import os


class Config:
    """Application configuration"""

    # Application
    APP_NAME: str = "Duality Workbench"
    APP_VERSION: str = "1.0.0"
    DEBUG: bool = os.getenv("DUALBENCH_DEBUG", "false").lower() == "true"

    # Artifacts
    OUTPUT_DIR: str = os.getenv("DUALBENCH_OUT_DIR", "./dualbench_out")

    # Statistical thresholds
    SIGMA_THRESHOLD: float = 3.0
    SIGNIFICANCE: float = 0.01
    RERUN_SAMPLE_FACTOR: int = 4

    # Exact / dense linear algebra
    DENSE_STATE_LIMIT: int = 10_000
    EXACT_SOLVE_LIMIT: int = 400
    EXPM_PRECISION_BITS: int = 128
    MPMATH_EXPM_LIMIT: int = 64

    # Simulation guards
    MAX_EVENTS: int = 10_000_000
    RATE_BOUND: float = 1e9
    CONSERVATION_CHECK_EVERY: int = 1000
    SIP_TAIL_DEFICIT: float = 2.0 ** -40
    DT_GATE_MAX_HALVINGS: int = 4


config = Config()

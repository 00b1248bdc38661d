from pydantic_settings import BaseSettings, SettingsConfigDict
from typing import List
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_file=".env", case_sensitive=True, extra="ignore")

    PROJECT_NAME: str = "p-Yang-Mills Lab"
    VERSION: str = "1.0.0"
    CONFIG_SCHEMA_VERSION: str = "1"
    DEBUG: bool = False
    LOG_LEVEL: str = "INFO"

    # Worker pool for independent sweep points
    PYM_WORKERS: int = 1

    # Lattice defaults
    TORUS_SITES: int = 16
    CONVERGENCE_SITES: int = 32
    LATTICE_BUDGET: int = 12

    # Spectral solver
    DENSE_DOF_THRESHOLD: int = 6000
    TOL_ZERO_FACTOR: float = 1e-7
    TOL_KERNEL: float = 1e-6
    SYMMETRY_TOLERANCE: float = 1e-10

    # Gradient flow policy
    FLOW_HALVING: float = 0.5
    FLOW_MAX_BACKTRACKS: int = 40
    FLOW_ARMIJO: float = 1e-4
    FLOW_ACCEPT_FACTOR: float = 1e-6
    FLOW_LOG_EVERY: int = 10

    # Neck and quantization constants
    BOCHNER_C: float = 1.0
    DYADIC_GATE: float = 0.1
    NECK_BOUND_B: float = 2.0
    LORENTZ_TRUNCATION_TOL: float = 1e-3

    # Bubbling families on the lattice
    POINTS_PER_SCALE: float = 4.0
    WINDOW_FACTOR: float = 1.0

    # Inequality battery
    FUZZ_SAMPLES: int = 100_000
    FUZZ_LATTICE_SAMPLES: int = 1000
    FUZZ_MAGNITUDE_MIN: float = 1e-6
    FUZZ_MAGNITUDE_MAX: float = 1e6
    FUZZ_P_GRID: List[float] = [2.0, 2.25, 2.5, 2.75, 2.99]

settings = Settings()

import os

from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()


class Config:
    """Process-level configuration for the gap laboratory."""

    # Worker pool used by assembly and epsilon sweeps
    GAPFIELD_THREADS: int = int(os.getenv('GAPFIELD_THREADS', '1'))

    # Logging
    GAPFIELD_LOG_LEVEL: str = os.getenv('GAPFIELD_LOG_LEVEL', 'info')

    # Output
    OUTPUT_DIRECTORY: str = os.getenv('GAPFIELD_OUTPUT_DIR', 'results')
    DEBUG_DUMP: bool = os.getenv('GAPFIELD_DEBUG_DUMP', 'false').lower() == 'true'

    # Numerics defaults (scenario files override them)
    DEFAULT_TOL: float = float(os.getenv('GAPFIELD_DEFAULT_TOL', '1e-10'))
    DEFAULT_MAX_ITER: int = int(os.getenv('GAPFIELD_MAX_ITER', '20000'))
    DEFAULT_GAMMA: float = float(os.getenv('GAPFIELD_DEFAULT_GAMMA', '0.3'))
    DEFAULT_C_GRADE: float = float(os.getenv('GAPFIELD_DEFAULT_C_GRADE', '0.5'))
    DEFAULT_VERTICAL_CELLS: int = int(os.getenv('GAPFIELD_VERTICAL_CELLS', '32'))
    DEFAULT_PRECONDITIONER: str = os.getenv('GAPFIELD_PRECONDITIONER', 'line')

    # CG progress logging interval (iterations)
    CG_LOG_EVERY: int = int(os.getenv('GAPFIELD_CG_LOG_EVERY', '200'))

    # Property validation
    JACOBIAN_FD_SAMPLES: int = int(os.getenv('GAPFIELD_JACOBIAN_FD_SAMPLES', '100'))
    ROUND_TRIP_SAMPLES: int = int(os.getenv('GAPFIELD_ROUND_TRIP_SAMPLES', '1000'))
    REFINEMENT_BASE_CELLS: int = int(os.getenv('GAPFIELD_REFINEMENT_BASE_CELLS', '16'))

    @classmethod
    def validate_config(cls) -> bool:
        """Validate configuration settings."""
        errors = []

        if cls.GAPFIELD_THREADS < 1:
            errors.append(f"GAPFIELD_THREADS must be at least 1, got {cls.GAPFIELD_THREADS}")

        if not (0.0 < cls.DEFAULT_TOL < 1.0):
            errors.append(f"GAPFIELD_DEFAULT_TOL must lie in (0, 1), got {cls.DEFAULT_TOL}")

        if cls.DEFAULT_MAX_ITER <= 0:
            errors.append("GAPFIELD_MAX_ITER must be positive")

        if not (0.0 < cls.DEFAULT_GAMMA < 1.0):
            errors.append(f"GAPFIELD_DEFAULT_GAMMA must lie in (0, 1), got {cls.DEFAULT_GAMMA}")

        if cls.DEFAULT_C_GRADE <= 0:
            errors.append("GAPFIELD_DEFAULT_C_GRADE must be positive")

        if cls.DEFAULT_VERTICAL_CELLS < 8:
            errors.append(f"GAPFIELD_VERTICAL_CELLS must be at least 8, got {cls.DEFAULT_VERTICAL_CELLS}")

        if cls.DEFAULT_PRECONDITIONER not in ('none', 'jacobi', 'line'):
            errors.append(f"GAPFIELD_PRECONDITIONER must be none, jacobi or line, got {cls.DEFAULT_PRECONDITIONER}")

        if cls.CG_LOG_EVERY <= 0:
            errors.append("GAPFIELD_CG_LOG_EVERY must be positive")

        if cls.GAPFIELD_LOG_LEVEL not in ('info', 'debug', 'trace', 'warning'):
            errors.append(f"GAPFIELD_LOG_LEVEL must be info, debug, trace or warning, got {cls.GAPFIELD_LOG_LEVEL}")

        if errors:
            print("Configuration Validation Errors:")
            for error in errors:
                print(f"  - {error}")
            return False

        return True

    @classmethod
    def worker_count(cls) -> int:
        """Threads for assembly blocks and concurrent sweeps."""
        return max(1, cls.GAPFIELD_THREADS)

# Create global config instance
appConfig = Config()


def load_environment_config(env: str = None):
    """Load environment-specific configuration."""
    if env is None:
        env = os.getenv('ENVIRONMENT', 'development')

    if env == 'production':
        # batch runs: no binary dumps, no per-iteration chatter
        appConfig.DEBUG_DUMP = False
        if appConfig.GAPFIELD_LOG_LEVEL in ('debug', 'trace'):
            appConfig.GAPFIELD_LOG_LEVEL = 'info'


# Auto-load environment configuration
load_environment_config()

# Validate configuration on import
if not appConfig.validate_config():
    raise ValueError("Invalid configuration detected. Please check your environment variables.")

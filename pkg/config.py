"""Configuration and constants for PAT_FULLFIELD."""

import json
import logging
import os
from datetime import datetime, timezone

from dotenv import load_dotenv

load_dotenv()

_ROOT = os.path.dirname(os.path.abspath(__file__))

# --- Grid ---
DEFAULT_N = int(os.getenv("PAT_DEFAULT_N", "128"))
MIN_N = 4
BOX_MARGIN = float(os.getenv("PAT_BOX_MARGIN", "1.25"))  # a = T + BOX_MARGIN
DOMAIN_MARGIN_CELLS = 1  # disc must stay one cell away from the box edge

# --- Wave Solver ---
DEFAULT_CFL = float(os.getenv("PAT_DEFAULT_CFL", "0.3"))
NAN_CHECK_INTERVAL = int(os.getenv("PAT_NAN_CHECK_INTERVAL", "50"))
FFT_WORKERS = int(os.getenv("PAT_FFT_WORKERS", "1"))

# --- Dirichlet Solver ---
CG_TOL = float(os.getenv("PAT_CG_TOL", "1e-10"))
CG_MAXITER_FACTOR = int(os.getenv("PAT_CG_MAXITER_FACTOR", "10"))  # max_iter = factor * N^2

# --- Reconstruction ---
DEFAULT_LAMBDA = float(os.getenv("PAT_DEFAULT_LAMBDA", "0.5"))
DEFAULT_ITERATIONS = int(os.getenv("PAT_DEFAULT_ITERATIONS", "80"))
DIVERGENCE_RATIO = float(os.getenv("PAT_DIVERGENCE_RATIO", "1.5"))
DIVERGENCE_PATIENCE = int(os.getenv("PAT_DIVERGENCE_PATIENCE", "5"))
SHOW_PROGRESS = os.getenv("PAT_SHOW_PROGRESS", "false").lower() in ("1", "true", "yes")

# --- Data Simulation ---
DEFAULT_OVERSAMPLE = int(os.getenv("PAT_DEFAULT_OVERSAMPLE", "3"))
DEFAULT_NOISE = float(os.getenv("PAT_DEFAULT_NOISE", "0.02"))  # experiments only
DEFAULT_SEED = int(os.getenv("PAT_DEFAULT_SEED", "0"))

# --- Phantom Registry ---
REGISTRY_PATH = os.getenv("PAT_REGISTRY_PATH", os.path.join(_ROOT, "data", "registry.txt"))
PHANTOM_MARGIN = 0.05  # supports stay inside r <= 1 - PHANTOM_MARGIN
MIN_SPEED = 0.5

# --- Experiments ---
EXPERIMENT_WORKERS = int(os.getenv("PAT_EXPERIMENT_WORKERS", "1"))

# --- Logging ---
LOG_LEVEL = os.getenv("PAT_LOG_LEVEL", "INFO").upper()


# --- Audit Logging ---
class AuditFormatter(logging.Formatter):
    """JSON structured log formatter for audit events."""

    def format(self, record):
        log_data = {
            "timestamp": datetime.now(timezone.utc).isoformat().replace("+00:00", "Z"),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
        }
        if hasattr(record, "audit_data"):
            log_data.update(record.audit_data)
        return json.dumps(log_data)


def get_logger(name: str) -> logging.Logger:
    """Create a logger with JSON audit formatting."""
    logger = logging.getLogger(name)
    if not logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(AuditFormatter())
        logger.addHandler(handler)
        logger.setLevel(LOG_LEVEL)
        logger.propagate = False
    return logger

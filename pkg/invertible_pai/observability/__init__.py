from .logging import ensure_structlog_configured, reset_structlog_configuration_guard
from .metrics import (
    DIAGNOSTIC_CHECKS,
    LSQR_ITERATIONS,
    PDE_SOLVE_SECONDS,
    PDE_SOLVES,
    STAGE_PASS_SECONDS,
    TRAIN_EPOCHS,
    TRAIN_LOSS,
    render_metrics,
)

__all__ = [
    "DIAGNOSTIC_CHECKS",
    "LSQR_ITERATIONS",
    "PDE_SOLVES",
    "PDE_SOLVE_SECONDS",
    "STAGE_PASS_SECONDS",
    "TRAIN_EPOCHS",
    "TRAIN_LOSS",
    "ensure_structlog_configured",
    "render_metrics",
    "reset_structlog_configuration_guard",
]

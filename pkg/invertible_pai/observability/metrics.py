"""Prometheus metrics definitions for invertible-pai."""

from __future__ import annotations

from prometheus_client import REGISTRY, CollectorRegistry, Counter, Gauge, Histogram
from prometheus_client.exposition import generate_latest

PDE_SOLVES = Counter(
    "pde_solves_total",
    "Wave equation solves performed",
    labelnames=("kind",),
)
PDE_SOLVE_SECONDS = Histogram(
    "pde_solve_seconds",
    "Wall time of a single wave equation solve",
    labelnames=("kind",),
)
STAGE_PASS_SECONDS = Histogram(
    "stage_pass_seconds",
    "Wall time of one invertible stage pass",
    labelnames=("direction",),
)
TRAIN_EPOCHS = Counter(
    "train_epochs_total",
    "Training epochs completed",
    labelnames=("stage",),
)
TRAIN_LOSS = Gauge(
    "train_loss",
    "Mean loss of the most recent training epoch",
    labelnames=("stage",),
)
LSQR_ITERATIONS = Counter(
    "lsqr_iterations_total",
    "LSQR iterations performed",
)
DIAGNOSTIC_CHECKS = Counter(
    "diagnostic_checks_total",
    "Diagnostic check outcomes",
    labelnames=("check", "status"),
)


def render_metrics(registry: CollectorRegistry | None = None) -> bytes:
    """Render all registered metrics as Prometheus exposition format."""
    return generate_latest(registry or REGISTRY)


__all__ = [
    "DIAGNOSTIC_CHECKS",
    "LSQR_ITERATIONS",
    "PDE_SOLVES",
    "PDE_SOLVE_SECONDS",
    "STAGE_PASS_SECONDS",
    "TRAIN_EPOCHS",
    "TRAIN_LOSS",
    "render_metrics",
]

"""Command-line surface and numerical self-checks."""

from .diagnostics import DiagnosticReport, run_diagnostics

__all__ = ["DiagnosticReport", "run_diagnostics"]

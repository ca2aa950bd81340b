"""Self-checks of the numerical building blocks.

Each check returns measured numbers next to its verdict; the suite passes only
when every check passes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np
import structlog

from invertible_pai.inn.cache import ActivationCacheStats
from invertible_pai.inn.coupling import coupling_forward, coupling_inverse
from invertible_pai.inn.stage import (
    ArchitectureSpec,
    InnState,
    StageParams,
    init_params,
    stage_backward,
    stage_forward,
    stage_inverse,
    stored_activation_stats,
)
from invertible_pai.observability.metrics import DIAGNOSTIC_CHECKS
from invertible_pai.wave.fields import Traces, Volume
from invertible_pai.wave.grid import make_subsampled_geometry
from invertible_pai.wave.operator import WaveOperator

if TYPE_CHECKING:
    from invertible_pai.core.config import RunConfig

log = structlog.get_logger(__name__)

ADJOINT_TOLERANCE = 1e-12
DOT_TEST_EPS = 1e-300
ROUND_TRIP_TOLERANCE = 1e-10
MISFIT_GRADIENT_TOLERANCE = 1e-6
STAGE_GRADIENT_TOLERANCE = 1e-5
SWEEP_DEPTHS = (4, 64)
# Relative perturbation applied by the sabotaged adjoint.
SABOTAGE_FACTOR = 1e-6


class SabotagedWaveOperator(WaveOperator):
    """Adjoint scaled by 1 + SABOTAGE_FACTOR; the adjoint check must reject it."""

    def adjoint(self, y: Traces) -> Volume:
        return super().adjoint(y).scaled(1.0 + SABOTAGE_FACTOR)


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: dict[str, float | int] = field(default_factory=dict)

    def render(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        numbers = " ".join(
            f"{key}={value:.3e}" if isinstance(value, float) else f"{key}={value}"
            for key, value in self.measured.items()
        )
        return f"[{verdict}] {self.name}: {numbers}"


@dataclass
class DiagnosticReport:
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def render(self) -> str:
        return "\n".join(check.render() for check in self.checks)


def _random_volume(operator: WaveOperator, rng: np.random.Generator) -> Volume:
    return Volume(operator.grid, rng.standard_normal(operator.grid.shape))


def _random_traces(operator: WaveOperator, rng: np.random.Generator) -> Traces:
    shape = (operator.geometry.n_active, operator.grid.nt)
    return Traces(operator.geometry, rng.standard_normal(shape))


def check_adjoint(
    operator: WaveOperator, rng: np.random.Generator, draws: int = 3
) -> CheckResult:
    """<A x, y> against <x, A^T y>, relative to ||A x|| ||y||, on random draws."""
    worst = 0.0
    for _ in range(draws):
        x, y = _random_volume(operator, rng), _random_traces(operator, rng)
        ax = operator.forward(x).values
        lhs = float(np.vdot(ax, y.values))
        rhs = float(np.vdot(x.values, operator.adjoint(y).values))
        scale = float(np.linalg.norm(ax) * np.linalg.norm(y.values))
        worst = max(worst, abs(lhs - rhs) / (scale + DOT_TEST_EPS))
    return CheckResult(
        "adjoint_dot_test",
        worst < ADJOINT_TOLERANCE,
        {"relative_error": worst, "draws": draws},
    )


def check_misfit_gradient(
    operator: WaveOperator, rng: np.random.Generator, directions: int = 2
) -> CheckResult:
    """Directional derivative of 1/2||Ax - y||^2 against central differences."""
    x, y = _random_volume(operator, rng), _random_traces(operator, rng)
    gradient = operator.misfit_gradient(x, y)
    worst = 0.0
    step = 1e-3
    for _ in range(directions):
        direction = _random_volume(operator, rng)
        plus, _ = operator.misfit_and_gradient(x + direction.scaled(step), y)
        minus, _ = operator.misfit_and_gradient(x - direction.scaled(step), y)
        numeric = (plus - minus) / (2.0 * step)
        analytic = float(np.vdot(gradient.values, direction.values))
        worst = max(worst, abs(numeric - analytic) / max(abs(analytic), 1e-300))
    return CheckResult(
        "misfit_gradient",
        worst < MISFIT_GRADIENT_TOLERANCE,
        {"relative_error": worst, "directions": directions},
    )


def _double(spec: ArchitectureSpec, **update: object) -> ArchitectureSpec:
    return spec.model_copy(update={"dtype": "float64", **update})


def _check_shape(spec: ArchitectureSpec) -> tuple[int, ...]:
    return (2 ** (spec.max_level + 3),) * spec.ndim


def _random_state(
    spec: ArchitectureSpec, spatial: tuple[int, ...], rng: np.random.Generator
) -> tuple[InnState, np.ndarray]:
    state = InnState.from_stacked(rng.standard_normal((spec.n_channels, *spatial)))
    cond = rng.standard_normal((spec.conditioning_channels, *spatial))
    return state, cond


def check_round_trip(spec: ArchitectureSpec, rng: np.random.Generator) -> CheckResult:
    """Coupling layer and full stage inverse(forward(x)) in double precision."""
    spec = _double(spec)
    params = init_params(spec, int(rng.integers(2**32)), output_scale=0.02)
    spatial = _check_shape(spec)
    state, cond = _random_state(spec, spatial, rng)
    layer = params.layers[0]
    stacked = state.stack()
    layer_error = float(
        np.max(
            np.abs(
                coupling_inverse(coupling_forward(stacked, cond, layer), cond, layer)
                - stacked
            )
        )
    )
    restored = stage_inverse(stage_forward(state, cond, params), cond, params)
    stage_error = float(np.max(np.abs(restored.stack() - stacked)))
    return CheckResult(
        "coupling_round_trip",
        max(layer_error, stage_error) < ROUND_TRIP_TOLERANCE,
        {"layer_error": layer_error, "stage_error": stage_error, "depth": spec.depth},
    )


def check_stage_gradient(
    spec: ArchitectureSpec, rng: np.random.Generator, directions: int = 3
) -> CheckResult:
    """stage_backward parameter gradients against central differences."""
    spec = _double(spec, depth=min(spec.depth, 4), squeeze_plan=())
    params = init_params(spec, int(rng.integers(2**32)), output_scale=0.1)
    spatial = (8,) * spec.ndim
    state, cond = _random_state(spec, spatial, rng)
    weights = rng.standard_normal((spec.n_channels, *spatial))

    def objective(candidate: StageParams) -> float:
        return float(np.vdot(weights, stage_forward(state, cond, candidate).stack()))

    output = stage_forward(state, cond, params)
    result = stage_backward(output, weights, cond, params)
    worst = 0.0
    step = 1e-6
    for _ in range(directions):
        direction = [rng.standard_normal(a.shape) for a in params.arrays()]
        plus = params.with_arrays(
            [a + step * d for a, d in zip(params.arrays(), direction, strict=True)]
        )
        minus = params.with_arrays(
            [a - step * d for a, d in zip(params.arrays(), direction, strict=True)]
        )
        numeric = (objective(plus) - objective(minus)) / (2.0 * step)
        analytic = sum(
            float(np.vdot(g, d))
            for g, d in zip(result.grad_params.arrays(), direction, strict=True)
        )
        worst = max(worst, abs(numeric - analytic) / max(abs(analytic), 1e-300))
    return CheckResult(
        "stage_gradient",
        worst < STAGE_GRADIENT_TOLERANCE,
        {"relative_error": worst, "directions": directions},
    )


def check_constant_memory(
    spec: ArchitectureSpec, rng: np.random.Generator
) -> CheckResult:
    """Peak cached tensors of stage_backward at depths 4 and 64, same widths."""
    measured: dict[str, float | int] = {}
    peaks: list[ActivationCacheStats] = []
    for depth in SWEEP_DEPTHS:
        sweep_spec = spec.model_copy(update={"depth": depth, "squeeze_plan": ()})
        params = init_params(sweep_spec, int(rng.integers(2**32)), output_scale=0.02)
        spatial = (8,) * spec.ndim
        state, cond = _random_state(sweep_spec, spatial, rng)
        state = InnState.from_stacked(state.stack().astype(sweep_spec.numpy_dtype))
        output = stage_forward(state, cond, params)
        grad = np.ones_like(output.stack())
        stats = stage_backward(output, grad, cond, params).stats
        conventional = stored_activation_stats(params, spatial)
        peaks.append(stats)
        measured[f"peak_cached_tensors_depth_{depth}"] = stats.peak_cached_tensors
        measured[f"peak_cached_scalars_depth_{depth}"] = stats.peak_cached_scalars
        measured[f"conventional_tensors_depth_{depth}"] = (
            conventional.peak_cached_tensors
        )
    tensors = {peak.peak_cached_tensors for peak in peaks}
    scalars = [peak.peak_cached_scalars for peak in peaks]
    growth = (max(scalars) - scalars[0]) / scalars[0]
    measured["scalar_growth"] = float(growth)
    return CheckResult("constant_memory", len(tensors) == 1 and growth < 0.05, measured)


def run_diagnostics(
    config: RunConfig, *, sabotage_adjoint: bool = False
) -> DiagnosticReport:
    rng = np.random.default_rng(config.seed)
    geometry = make_subsampled_geometry(
        config.grid, config.geometry.subsample_factor, config.geometry.scheme
    )
    operator_cls = SabotagedWaveOperator if sabotage_adjoint else WaveOperator
    operator = operator_cls(config.grid, geometry)
    report = DiagnosticReport()
    for check in (
        lambda: check_adjoint(operator, rng),
        lambda: check_misfit_gradient(operator, rng),
        lambda: check_round_trip(config.architecture, rng),
        lambda: check_stage_gradient(config.architecture, rng),
        lambda: check_constant_memory(config.architecture, rng),
    ):
        result = check()
        report.checks.append(result)
        status = "pass" if result.passed else "fail"
        DIAGNOSTIC_CHECKS.labels(check=result.name, status=status).inc()
        log.info("diagnose.check", check=result.name, status=status, **result.measured)
    return report


__all__ = [
    "CheckResult",
    "DiagnosticReport",
    "SabotagedWaveOperator",
    "check_adjoint",
    "check_constant_memory",
    "check_misfit_gradient",
    "check_round_trip",
    "check_stage_gradient",
    "run_diagnostics",
]

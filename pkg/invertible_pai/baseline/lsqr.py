"""Matrix-free LSQR (Paige and Saunders) for min ||A x - b||_2.

The solver only ever calls ``matvec`` and ``rmatvec`` of a scipy
``LinearOperator``; dense matrices and the wave operator go through the same
interface. One adjoint product starts the Golub-Kahan bidiagonalization and
every iteration costs one forward and one adjoint product.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field
from scipy.sparse.linalg import LinearOperator, aslinearoperator

from invertible_pai.core.exceptions import ShapeMismatchError
from invertible_pai.observability.metrics import LSQR_ITERATIONS
from invertible_pai.wave.fields import Traces, Volume
from invertible_pai.wave.operator import SolveTally, WaveOperator

log = structlog.get_logger(__name__)

STOP_REASONS = {
    0: "x = 0 is the exact solution",
    1: "residual below tolerance (Ax - b is small)",
    2: "least-squares optimality reached (A^T r is small)",
    3: "iteration limit reached",
    4: "bidiagonalization broke down",
}


class LsqrOptions(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    max_iters: int = Field(30, gt=0)
    atol: float = Field(1e-8, ge=0)
    btol: float = Field(1e-8, ge=0)
    record_residuals: bool = True


@dataclass
class LsqrResult:
    x: np.ndarray
    istop: int
    iterations: int
    residual_history: list[float] = field(default_factory=list)
    breakdown: bool = False
    init_solves: int = 0
    body_solves: int = 0

    @property
    def total_solves(self) -> int:
        return self.init_solves + self.body_solves

    @property
    def reason(self) -> str:
        return STOP_REASONS[self.istop]


def lsqr(
    operator: LinearOperator | np.ndarray,
    b: np.ndarray,
    opts: LsqrOptions | None = None,
) -> LsqrResult:
    """Solve min ||A x - b|| from x = 0.

    ``residual_history[k]`` is ||A x_k - b|| / ||b|| for k = 0 .. iterations,
    taken from the bidiagonalization recurrence (no extra products).
    """
    opts = opts or LsqrOptions()
    a = aslinearoperator(operator)
    m, n = a.shape
    b = np.asarray(b, dtype=np.float64).ravel()
    if b.shape != (m,):
        message = f"Right-hand side has {b.size} entries; operator has {m} rows."
        raise ShapeMismatchError(message)

    x = np.zeros(n)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return LsqrResult(x, istop=0, iterations=0, residual_history=[0.0])

    u = b / bnorm
    v = a.rmatvec(u)
    init_solves = 1
    alpha = float(np.linalg.norm(v))
    history = [1.0]
    if alpha == 0.0:
        return LsqrResult(
            x, istop=0, iterations=0, residual_history=history, init_solves=1
        )
    v = v / alpha
    w = v.copy()
    beta = bnorm
    phibar, rhobar = beta, alpha
    anorm = 0.0
    body_solves = 0
    istop = 3
    breakdown = False
    iterations = 0

    for iterations in range(1, opts.max_iters + 1):  # noqa: B007
        u = a.matvec(v) - alpha * u
        body_solves += 1
        beta = float(np.linalg.norm(u))
        if beta > 0.0:
            u = u / beta
            anorm = math.sqrt(anorm**2 + alpha**2 + beta**2)
            v = a.rmatvec(u) - beta * v
            body_solves += 1
            alpha = float(np.linalg.norm(v))
            if alpha > 0.0:
                v = v / alpha
        else:
            anorm = math.sqrt(anorm**2 + alpha**2)

        rho = math.hypot(rhobar, beta)
        c, s = rhobar / rho, beta / rho
        theta = s * alpha
        rhobar = -c * alpha
        phi = c * phibar
        phibar = s * phibar
        x = x + (phi / rho) * w
        w = v - (theta / rho) * w
        LSQR_ITERATIONS.inc()

        rnorm = abs(phibar)
        if opts.record_residuals:
            history.append(rnorm / bnorm)
        if beta == 0.0 or alpha == 0.0:
            istop, breakdown = 4, True
            break
        xnorm = float(np.linalg.norm(x))
        arnorm = alpha * abs(s * phi)
        if rnorm <= (opts.btol + opts.atol * anorm * xnorm / bnorm) * bnorm:
            istop = 1
            break
        if anorm * rnorm > 0 and arnorm / (anorm * rnorm) <= opts.atol:
            istop = 2
            break

    log.info(
        "lsqr.stopped",
        iterations=iterations,
        istop=istop,
        reason=STOP_REASONS[istop],
        relative_residual=history[-1] if history else None,
        solves=init_solves + body_solves,
    )
    return LsqrResult(
        x=x,
        istop=istop,
        iterations=iterations,
        residual_history=history,
        breakdown=breakdown,
        init_solves=init_solves,
        body_solves=body_solves,
    )


@dataclass(frozen=True, eq=False)
class LsqrReconstruction:
    volume: Volume
    result: LsqrResult
    solves: SolveTally
    pde_seconds: float


def lsqr_reconstruct(
    y_obs: Traces, operator: WaveOperator, opts: LsqrOptions | None = None
) -> LsqrReconstruction:
    """Baseline volume from traces; solves are tallied on the operator's counter."""
    if not y_obs.geometry.matches(operator.geometry):
        message = "Traces geometry does not match the operator geometry."
        raise ShapeMismatchError(message)
    counter = operator.counter.child()
    local = operator.with_counter(counter)
    result = lsqr(local.as_linear_operator(), y_obs.values.ravel(), opts)
    volume = Volume(local.grid, result.x.reshape(local.grid.shape))
    return LsqrReconstruction(
        volume=volume,
        result=result,
        solves=counter.snapshot(),
        pde_seconds=counter.seconds,
    )


__all__ = [
    "LsqrOptions",
    "LsqrReconstruction",
    "LsqrResult",
    "lsqr",
    "lsqr_reconstruct",
]

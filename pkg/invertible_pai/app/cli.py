"""CLI entrypoint: simulate, train, reconstruct, lsqr, eval, diagnose.

Exit codes: 0 ok, 1 check or verification failure, 2 usage or configuration
error, 3 I/O error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from collections.abc import Callable, Sequence
from enum import IntEnum
from pathlib import Path

import structlog

from invertible_pai.app.diagnostics import run_diagnostics
from invertible_pai.baseline.lsqr import lsqr_reconstruct
from invertible_pai.core.config import RunConfig
from invertible_pai.core.exceptions import (
    CheckFailedError,
    ConfigurationError,
    PaiError,
    StorageError,
)
from invertible_pai.data.arrays import atomic_write_bytes, read_array, write_array
from invertible_pai.data.checkpoints import CheckpointStore
from invertible_pai.data.dataset import load_dataset, simulate_dataset
from invertible_pai.data.imaging import (
    Axis,
    Normalization,
    export_pgm,
    mip,
    slice_image,
)
from invertible_pai.data.metrics import mse, psnr
from invertible_pai.observability.logging import ensure_structlog_configured
from invertible_pai.observability.metrics import render_metrics
from invertible_pai.unroll.plan import reconstruct
from invertible_pai.unroll.training import train_plan
from invertible_pai.wave.fields import Traces, Volume
from invertible_pai.wave.grid import ReceiverGeometry, make_subsampled_geometry
from invertible_pai.wave.operator import SolveCounter, WaveOperator

log = structlog.get_logger(__name__)

GRADIENT_PANEL = "gradient"


class ExitCode(IntEnum):
    OK = 0
    CHECK_FAILED = 1
    USAGE = 2
    IO = 3
    NUMERICAL = 4


def _geometry(config: RunConfig) -> ReceiverGeometry:
    return make_subsampled_geometry(
        config.grid, config.geometry.subsample_factor, config.geometry.scheme
    )


def _require_dir(path: Path, what: str) -> Path:
    if not path.is_dir():
        message = f"{what} directory {path} does not exist."
        raise ConfigurationError(message)
    return path


def _require_parent(path: Path) -> Path:
    _require_dir(path.parent, "Output")
    return path


def _load_traces(path: Path, config: RunConfig) -> Traces:
    return Traces(_geometry(config), read_array(path))


def _load_volume(path: Path, config: RunConfig) -> Volume:
    return Volume(config.grid, read_array(path))


def cmd_simulate(args: argparse.Namespace, config: RunConfig) -> ExitCode:
    out_dir = _require_dir(args.out or config.paths.dataset, "Output")
    n = args.n if args.n is not None else config.dataset.n_samples
    counter = SolveCounter()
    manifest = simulate_dataset(
        n,
        config.grid,
        config.geometry.subsample_factor,
        config.geometry.scheme,
        config.noise,
        config.phantom,
        out_dir,
        threads=config.threads,
        counter=counter,
    )
    print(f"dataset: {out_dir}")
    print(f"samples: {manifest.n_samples}")
    print(
        f"receivers: {manifest.n_active_receivers} "
        f"(factor {manifest.subsample_factor}, {manifest.scheme.value})"
    )
    print(f"noise: {manifest.noise.snr_db} dB SNR")
    print(f"pde_solves: {manifest.pde_solves} ({counter.seconds:.3f} s)")
    return ExitCode.OK


def cmd_train(args: argparse.Namespace, config: RunConfig) -> ExitCode:
    dataset_dir = _require_dir(args.dataset or config.paths.dataset, "Dataset")
    checkpoints = args.checkpoints or config.paths.checkpoints
    _require_dir(checkpoints.parent, "Output")
    dataset = load_dataset(dataset_dir)
    operator = WaveOperator(dataset.grid, dataset.geometry)
    result = train_plan(
        dataset.pairs(),
        config.architecture,
        config.training,
        config.plan.n_stages,
        operator,
        store=CheckpointStore(checkpoints),
        dataset_checksum=dataset.checksum,
        threads=config.threads,
    )
    for index in range(result.plan.n_stages):
        if index in result.resumed_stages:
            print(f"stage {index}: reused checkpoint")
            continue
        history = result.histories.get(index, [])
        final = f"{history[-1].mean_loss:.6g}" if history else "n/a (0 epochs)"
        print(f"stage {index}: epochs {len(history)}, final loss {final}")
    print(f"checkpoints: {checkpoints}")
    print(f"pde_solves: {operator.counter.total} ({operator.counter.seconds:.3f} s)")
    return ExitCode.OK


def cmd_reconstruct(args: argparse.Namespace, config: RunConfig) -> ExitCode:
    out = _require_parent(args.out)
    plan = CheckpointStore(args.checkpoints or config.paths.checkpoints).load_plan(
        config.plan.n_stages
    )
    traces = _load_traces(args.traces, config)
    operator = WaveOperator(config.grid, traces.geometry)
    result = reconstruct(traces, plan, operator)
    write_array(out, result.volume.values)
    if args.gradient_out is not None and result.first_gradient is not None:
        write_array(_require_parent(args.gradient_out), result.first_gradient.values)
    for index, misfit in enumerate(result.misfits):
        print(f"stage {index}: data misfit {misfit:.6g}")
    per_solve = result.pde_seconds / max(result.solves.total, 1)
    print(
        f"pde_solves: {result.solves.total} "
        f"(forward {result.solves.forward}, adjoint {result.solves.adjoint})"
    )
    print(f"pde_seconds: {result.pde_seconds:.3f} ({per_solve:.3f} s/solve)")
    print(f"network_seconds: {result.network_seconds:.3f}")
    print(f"volume: {out}")
    return ExitCode.OK


def cmd_lsqr(args: argparse.Namespace, config: RunConfig) -> ExitCode:
    out = _require_parent(args.out)
    history_path = _require_parent(
        args.history or out.with_name(out.name + ".residuals.txt")
    )
    traces = _load_traces(args.traces, config)
    operator = WaveOperator(config.grid, traces.geometry)
    baseline = lsqr_reconstruct(traces, operator, config.lsqr)
    result = baseline.result
    write_array(out, baseline.volume.values)
    lines = "".join(
        f"{iteration} {residual:.17g}\n"
        for iteration, residual in enumerate(result.residual_history)
    )
    atomic_write_bytes(history_path, lines.encode("utf-8"))
    print(f"iterations: {result.iterations} ({result.reason})")
    if result.breakdown:
        print("breakdown: bidiagonalization terminated early")
    print(f"relative_residual: {result.residual_history[-1]:.6g}")
    print(f"pde_solves: {result.total_solves} (body {result.body_solves})")
    print(f"pde_seconds: {baseline.pde_seconds:.3f}")
    print(f"volume: {out}")
    print(f"residual_history: {history_path}")
    return ExitCode.OK


def _panel_normalization(truth: Volume) -> Normalization:
    peak = float(truth.values.max())
    return Normalization.fixed(peak) if peak > 0 else Normalization.minmax()


def _export_panels(
    name: str, volume: Volume, directory: Path, normalization: Normalization
) -> list[Path]:
    written = []
    for axis in Axis:
        middle = volume.values.shape[axis.index] // 2
        written.append(
            export_pgm(
                mip(volume, axis),
                directory / f"{name}_mip_{axis.value}.pgm",
                normalization,
            )
        )
        written.append(
            export_pgm(
                slice_image(volume, axis, middle),
                directory / f"{name}_slice_{axis.value}.pgm",
                normalization,
            )
        )
    return written


def _parse_estimate(raw: str) -> tuple[str, Path]:
    name, separator, path = raw.partition("=")
    if not separator or not name or not path:
        message = f"Estimate '{raw}' must look like name=path."
        raise ConfigurationError(message)
    return name, Path(path)


def cmd_eval(args: argparse.Namespace, config: RunConfig) -> ExitCode:
    images = _require_dir(args.images, "Image") if args.images else None
    truth = _load_volume(args.truth, config)
    peak = args.peak if args.peak is not None else float(truth.values.max())
    normalization = _panel_normalization(truth)
    if images is not None:
        _export_panels("truth", truth, images, normalization)
    for name, path in (_parse_estimate(raw) for raw in args.estimate):
        estimate = _load_volume(path, config)
        error = mse(estimate, truth)
        quality = psnr(estimate, truth, peak) if peak > 0 else math.nan
        print(f"{name}: mse {error:.6g} psnr {quality:.3f} dB")
        if images is not None:
            _export_panels(name, estimate, images, normalization)
    if args.gradient is not None:
        if images is None:
            message = "--gradient needs --images to write its panels."
            raise ConfigurationError(message)
        # Gradients live on another scale than pressure estimates.
        gradient = _load_volume(args.gradient, config)
        _export_panels(GRADIENT_PANEL, gradient, images, Normalization.minmax())
    if images is not None:
        print(f"images: {images}")
    return ExitCode.OK


def cmd_diagnose(args: argparse.Namespace, config: RunConfig) -> ExitCode:
    report = run_diagnostics(config, sabotage_adjoint=args.sabotage_adjoint)
    print(report.render())
    if not report.passed:
        failed = ", ".join(check.name for check in report.checks if not check.passed)
        message = f"Diagnostics failed: {failed}."
        raise CheckFailedError(message)
    print("all checks passed")
    return ExitCode.OK


COMMANDS: dict[str, Callable[[argparse.Namespace, RunConfig], ExitCode]] = {
    "simulate": cmd_simulate,
    "train": cmd_train,
    "reconstruct": cmd_reconstruct,
    "lsqr": cmd_lsqr,
    "eval": cmd_eval,
    "diagnose": cmd_diagnose,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON config (or $PAI_CONFIG)")
    common.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Override a config value by dotted path, e.g. grid.nx=32",
    )
    common.add_argument("--threads", type=int, help="Worker cap (default 1)")
    common.add_argument("--metrics-file", type=Path, help="Write Prometheus metrics")
    common.add_argument("--log-json", action="store_true", help="JSON log lines")
    common.add_argument(
        "--log-level",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Log threshold (default INFO)",
    )

    parser = argparse.ArgumentParser(prog="invertible-pai")
    subparsers = parser.add_subparsers(dest="command", required=True)

    simulate = subparsers.add_parser(
        "simulate", parents=[common], help="Simulate a dataset"
    )
    simulate.add_argument("--out", type=Path, help="Existing output directory")
    simulate.add_argument("--n", type=int, help="Number of samples")

    train = subparsers.add_parser(
        "train", parents=[common], help="Greedy stagewise training"
    )
    train.add_argument("--dataset", type=Path)
    train.add_argument("--checkpoints", type=Path)

    recon = subparsers.add_parser(
        "reconstruct", parents=[common], help="Unrolled reconstruction"
    )
    recon.add_argument("--checkpoints", type=Path)
    recon.add_argument("--traces", type=Path, required=True)
    recon.add_argument("--out", type=Path, required=True)
    recon.add_argument("--gradient-out", type=Path, help="Save the first gradient")

    lsqr = subparsers.add_parser("lsqr", parents=[common], help="LSQR baseline")
    lsqr.add_argument("--traces", type=Path, required=True)
    lsqr.add_argument("--out", type=Path, required=True)
    lsqr.add_argument("--history", type=Path, help="Residual history file")

    evaluate = subparsers.add_parser(
        "eval", parents=[common], help="Metrics and image panels"
    )
    evaluate.add_argument("--truth", type=Path, required=True)
    evaluate.add_argument(
        "--estimate", action="append", default=[], metavar="NAME=PATH"
    )
    evaluate.add_argument("--images", type=Path, help="Existing directory for PGMs")
    evaluate.add_argument("--peak", type=float, help="PSNR peak (default max truth)")
    evaluate.add_argument(
        "--gradient", type=Path, help="Misfit gradient to render with minmax panels"
    )

    diagnose = subparsers.add_parser(
        "diagnose", parents=[common], help="Numerical self-checks"
    )
    diagnose.add_argument(
        "--sabotage-adjoint", action="store_true", help=argparse.SUPPRESS
    )
    return parser


def _load_config(args: argparse.Namespace) -> RunConfig:
    overrides = list(args.overrides)
    if args.threads is not None:
        overrides.append(f"threads={args.threads}")
    if args.log_json:
        overrides.append("log_json=true")
    if args.log_level is not None:
        overrides.append(f"log_level={args.log_level}")
    return RunConfig.from_sources(args.config, overrides)


def main(argv: Sequence[str] | None = None) -> int:
    """Parse arguments, run one command and map failures to exit codes."""
    parser = build_parser()
    args = parser.parse_args(argv)
    code = ExitCode.OK
    try:
        config = _load_config(args)
        ensure_structlog_configured(
            json_output=config.log_json, level=config.log_level
        )
        code = COMMANDS[args.command](args, config)
    except PaiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = ExitCode(exc.exit_code)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = ExitCode.IO
    finally:
        if args.metrics_file is not None:
            try:
                atomic_write_bytes(args.metrics_file, render_metrics())
            except StorageError as exc:
                print(f"error: {exc}", file=sys.stderr)
                code = ExitCode.IO
    log.debug("cli.finished", command=args.command, exit_code=int(code))
    return int(code)


if __name__ == "__main__":
    raise SystemExit(main())

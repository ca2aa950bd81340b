"""Structlog configuration helpers."""

import logging  # noqa: TID251
import sys

import numpy as np
import structlog
from structlog.types import BindableLogger, EventDict, Processor


class ArraySummaryProcessor:
    """Processor that replaces numpy arrays with a compact summary."""

    def __init__(self, max_inline: int = 8) -> None:
        """Arrays with at most `max_inline` entries are rendered as lists."""
        self.max_inline = max_inline

    def __call__(
        self, _logger: BindableLogger | None, _method_name: str, event_dict: EventDict
    ) -> EventDict:
        """Summarize every ndarray value in the event dictionary."""
        for key, value in event_dict.items():
            if isinstance(value, np.ndarray):
                event_dict[key] = self._summarize(value)
            elif isinstance(value, np.generic):
                event_dict[key] = value.item()
        return event_dict

    def _summarize(self, array: np.ndarray) -> object:
        if array.size <= self.max_inline:
            return array.tolist()
        summary: dict[str, object] = {
            "shape": list(array.shape),
            "dtype": str(array.dtype),
        }
        if array.dtype.kind in "fiu" and array.size:
            summary["min"] = float(np.min(array))
            summary["max"] = float(np.max(array))
        return summary


class _StructlogGuard:
    _configured = False

    @classmethod
    def ensure_configured(
        cls,
        *,
        json_output: bool = False,
        summarize_arrays: bool = True,
        level: int | str = logging.INFO,
    ) -> None:
        """Configure structlog unless already configured externally.

        Defaults to a concise console renderer on stderr so command output on
        stdout stays machine readable; opt into JSON with json_output=True.
        """
        if cls._configured:
            return
        if getattr(structlog, "is_configured", lambda: False)():
            cls._configured = True
            return

        processors: list[Processor] = [
            structlog.contextvars.merge_contextvars,
            structlog.stdlib.filter_by_level,
            structlog.stdlib.add_logger_name,
            structlog.stdlib.add_log_level,
            structlog.stdlib.PositionalArgumentsFormatter(),
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            structlog.processors.UnicodeDecoder(),
        ]
        if summarize_arrays:
            processors.append(ArraySummaryProcessor())
        processors.append(structlog.stdlib.render_to_log_kwargs)

        structlog.configure(
            processors=processors,
            logger_factory=structlog.stdlib.LoggerFactory(),
            wrapper_class=structlog.stdlib.BoundLogger,
            cache_logger_on_first_use=True,
        )

        renderer: Processor
        if json_output:
            renderer = structlog.processors.JSONRenderer()
        else:
            renderer = structlog.dev.ConsoleRenderer(
                colors=False, exception_formatter=structlog.dev.plain_traceback
            )

        formatter = structlog.stdlib.ProcessorFormatter(
            foreign_pre_chain=[
                structlog.stdlib.add_logger_name,
                structlog.stdlib.add_log_level,
                structlog.stdlib.PositionalArgumentsFormatter(),
            ],
            processor=renderer,
        )

        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(formatter)
        root_logger = logging.getLogger()

        # Clear existing handlers to avoid duplicate logging.
        for h in root_logger.handlers[:]:
            root_logger.removeHandler(h)

        root_logger.addHandler(handler)
        root_logger.setLevel(level)

        cls._configured = True

    @classmethod
    def reset(cls) -> None:
        cls._configured = False


def ensure_structlog_configured(
    *,
    json_output: bool = False,
    summarize_arrays: bool = True,
    level: int | str = logging.INFO,
) -> None:
    """Idempotently configure structlog unless already configured externally."""
    _StructlogGuard.ensure_configured(
        json_output=json_output,
        summarize_arrays=summarize_arrays,
        level=level,
    )


def reset_structlog_configuration_guard() -> None:
    """Reset the guard flag; intended for tests that manipulate structlog directly."""
    _StructlogGuard.reset()


__all__ = [
    "ArraySummaryProcessor",
    "ensure_structlog_configured",
    "reset_structlog_configuration_guard",
]

"""Logging configuration for PT-Weyl.

This module provides structured JSON logging, a contextual logger that carries
run parameters (M, mu, seed) across messages, and a task-event logger that
records the lifecycle of every sweep task.
"""

import json
import logging
import logging.handlers
import sys
import threading
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Optional

from src.core.config import Settings, settings

_RESERVED_ATTRS = frozenset(
    {
        "name", "msg", "args", "levelname", "levelno", "pathname", "filename",
        "module", "lineno", "funcName", "created", "msecs", "relativeCreated",
        "thread", "threadName", "processName", "process", "getMessage", "exc_info",
        "exc_text", "stack_info", "taskName", "message",
    }
)

TEXT_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
TEXT_DATEFMT = "%Y-%m-%d %H:%M:%S"


class JSONFormatter(logging.Formatter):
    """JSON formatter for structured logging."""

    def format(self, record: logging.LogRecord) -> str:
        """Format log record as JSON."""
        log_data: Dict[str, Any] = {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
            "module": record.module,
            "function": record.funcName,
            "line": record.lineno,
            "thread": record.thread,
            "thread_name": record.threadName,
        }

        if record.exc_info:
            log_data["exception"] = self.formatException(record.exc_info)

        # Extra fields (M, mu, seed, residuals, ...)
        for key, value in record.__dict__.items():
            if key not in _RESERVED_ATTRS:
                log_data[key] = value

        return json.dumps(log_data, default=str, ensure_ascii=False)


class TaskEventLogger:
    """Structured records for the lifecycle of sweep tasks."""

    def __init__(self) -> None:
        self.logger = logging.getLogger("ptweyl.tasks")

    def log_task_started(self, task_key: str, kind: str) -> None:
        if not settings.task_events_enabled:
            return
        self.logger.debug(
            "Task started",
            extra={"event_type": "task_started", "task_key": task_key, "kind": kind},
        )

    def log_task_finished(
        self,
        task_key: str,
        kind: str,
        wall_time_s: float,
        metadata: Optional[Dict[str, Any]] = None,
    ) -> None:
        if not settings.task_events_enabled:
            return
        self.logger.info(
            "Task finished",
            extra={
                "event_type": "task_finished",
                "task_key": task_key,
                "kind": kind,
                "wall_time_s": wall_time_s,
                "metadata": metadata or {},
            },
        )

    def log_task_failed(self, task_key: str, kind: str, error: str) -> None:
        """Failures are always recorded, even with task events disabled."""
        self.logger.error(
            f"Task failed: {task_key}",
            extra={
                "event_type": "task_failed",
                "task_key": task_key,
                "kind": kind,
                "error": error,
            },
        )

    def log_run_summary(self, completed: int, failed: int, wall_time_s: float) -> None:
        level = logging.WARNING if failed else logging.INFO
        self.logger.log(
            level,
            "Run finished",
            extra={
                "event_type": "run_summary",
                "completed": completed,
                "failed": failed,
                "wall_time_s": wall_time_s,
            },
        )


def _build_formatter(config: Settings) -> logging.Formatter:
    if config.log_format == "json":
        return JSONFormatter()
    return logging.Formatter(fmt=TEXT_FORMAT, datefmt=TEXT_DATEFMT)


def setup_logging(config: Optional[Settings] = None, level: Optional[str] = None) -> None:
    """Configure application logging."""
    config = config or settings
    root_logger = logging.getLogger()
    root_logger.setLevel(getattr(logging, (level or config.log_level).upper()))

    # Clear existing handlers
    root_logger.handlers.clear()

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(_build_formatter(config))
    root_logger.addHandler(console_handler)

    if config.log_file_enabled:
        log_path = Path(config.log_file_path)
        log_path.parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.handlers.RotatingFileHandler(
            log_path,
            maxBytes=_parse_size(config.log_rotation_size),
            backupCount=config.log_retention_days,
        )
        file_handler.setFormatter(_build_formatter(config))
        root_logger.addHandler(file_handler)

    # Third-party loggers
    logging.getLogger("numexpr").setLevel(logging.WARNING)

    task_level = logging.DEBUG if config.task_events_enabled else logging.ERROR
    logging.getLogger("ptweyl.tasks").setLevel(task_level)


def _parse_size(size_str: str) -> int:
    """Parse size string to bytes."""
    size_str = size_str.upper()
    if size_str.endswith("KB"):
        return int(size_str[:-2]) * 1024
    if size_str.endswith("MB"):
        return int(size_str[:-2]) * 1024 * 1024
    if size_str.endswith("GB"):
        return int(size_str[:-2]) * 1024 * 1024 * 1024
    return int(size_str)


# Shared by every ContextualLogger; one context per thread.
_thread_context = threading.local()


class ContextualLogger:
    """Logger that attaches run parameters to every message.

    The context belongs to the calling thread, not to the logger instance, so a
    task key set by the runner also tags records from the numerical modules.
    """

    def __init__(self, name: str):
        self.logger = logging.getLogger(name)

    @property
    def _context(self) -> Dict[str, Any]:
        context: Optional[Dict[str, Any]] = getattr(_thread_context, "context", None)
        if context is None:
            context = {}
            _thread_context.context = context
        return context

    def set_context(self, **kwargs: Any) -> None:
        """Set context for subsequent log messages from this thread."""
        self._context.update(kwargs)

    def clear_context(self) -> None:
        self._context.clear()

    def _log_with_context(self, level: int, message: str, *args: Any, **kwargs: Any) -> None:
        extra = dict(self._context)
        extra.update(kwargs.get("extra", {}))
        kwargs["extra"] = extra
        # report the caller, not this wrapper
        kwargs.setdefault("stacklevel", 3)
        self.logger.log(level, message, *args, **kwargs)

    def debug(self, message: str, *args: Any, **kwargs: Any) -> None:
        self._log_with_context(logging.DEBUG, message, *args, **kwargs)

    def info(self, message: str, *args: Any, **kwargs: Any) -> None:
        self._log_with_context(logging.INFO, message, *args, **kwargs)

    def warning(self, message: str, *args: Any, **kwargs: Any) -> None:
        self._log_with_context(logging.WARNING, message, *args, **kwargs)

    def error(self, message: str, *args: Any, **kwargs: Any) -> None:
        self._log_with_context(logging.ERROR, message, *args, **kwargs)

    def critical(self, message: str, *args: Any, **kwargs: Any) -> None:
        self._log_with_context(logging.CRITICAL, message, *args, **kwargs)


# Global task-event logger instance
task_events = TaskEventLogger()


def get_logger(name: str) -> ContextualLogger:
    """Get a contextual logger instance."""
    return ContextualLogger(name)

"""Shared structured logging helpers for samplers, trainers and the benchmark harness."""
from __future__ import annotations

import json
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Mapping


LOGGER_NAME = "marginal_gp"
logger = logging.getLogger(LOGGER_NAME)


def configure_logging(level: int | str = logging.INFO, file: Path | str | None = None) -> None:
    """Configure structured logging for the toolkit."""

    handlers: list[logging.Handler] = [logging.StreamHandler()]
    if file is not None:
        path = Path(file)
        path.parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(path, encoding="utf-8"))
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)s %(name)s %(message)s",
        handlers=handlers,
    )


def _utc_timestamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="milliseconds")


def _jsonable(value: Any) -> Any:
    # numpy scalars and arrays; anything else (paths included) as text
    if hasattr(value, "tolist") and callable(value.tolist):
        return value.tolist()
    return str(value)


def log_metric(name: str, value: float, metadata: Mapping[str, Any] | None = None) -> None:
    """Emit a structured metric log."""

    payload = {
        "metric": name,
        "value": value,
        "metadata": dict(metadata or {}),
        "ts": _utc_timestamp(),
    }
    logger.info("METRIC %s", json.dumps(payload, sort_keys=True, default=_jsonable))


def log_event(event_type: str, metadata: Mapping[str, Any], level: int = logging.INFO) -> None:
    """Log an event with its metadata as a single JSON line."""

    payload = {"event": event_type, **dict(metadata)}
    logger.log(level, "EVENT %s", json.dumps(payload, sort_keys=True, default=_jsonable))


__all__ = ["configure_logging", "log_event", "log_metric", "logger"]

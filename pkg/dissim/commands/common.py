"""
Command Helpers
===============

Artifact writing and error reporting shared by every subcommand.
"""

import functools
import json
import logging
import os
import tempfile
from contextlib import nullcontext
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, ContextManager, Optional

import click

from ..services.errors import DissimError
from ..services.settings import override_settings

logger = logging.getLogger(__name__)


def timestamp() -> str:
    return datetime.now(timezone.utc).isoformat()


def dump_json(payload: Any) -> str:
    # default=str covers exception objects inside pydantic error contexts
    return json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False, default=str) + "\n"


def write_text_atomic(path: Path, text: str) -> None:
    """Write through a temp file in the same directory so readers never see a partial file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def emit(payload: dict, output: Optional[Path]) -> None:
    """Write the artifact to ``output``, or print it when no path was given."""
    payload = {**payload, "generated_at": timestamp()}
    text = dump_json(payload)
    if output is None:
        click.echo(text, nl=False)
    else:
        write_text_atomic(output, text)
        logger.info(f"Wrote {output}")


def ceilings(qubits: Optional[int]) -> ContextManager:
    """``--ceiling-qubits`` raises or lowers both the statevector and oracle ceilings."""
    if qubits is None:
        return nullcontext()
    return override_settings(statevector_max_qubits=qubits, oracle_max_qubits=qubits)


def handle_errors(func: Callable) -> Callable:
    """Turn a DissimError into ``{"error": ...}`` on stdout and the error's exit code."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except DissimError as exc:
            logger.error(f"{exc.code}: {exc.message}")
            click.echo(dump_json({"error": exc.to_dict()}), nl=False)
            raise SystemExit(exc.exit_code) from exc

    return wrapper

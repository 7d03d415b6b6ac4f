"""
verify サブコマンド
==================

Run the oracle-equivalence suite. Exit 0 when every check passes, 1 otherwise.
"""

import logging
from pathlib import Path
from typing import Optional

import click

from ..services.verification import run_suite
from .common import emit, handle_errors

logger = logging.getLogger(__name__)


@click.command("verify")
@click.option("--seed", default=0, show_default=True, type=int, help="乱数シード")
@click.option("--output", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="レポート JSON (省略時は標準出力)")
@handle_errors
def verify(seed: int, output: Optional[Path]):
    """オラクル整合性チェックを実行する"""
    report = run_suite(seed)
    for check in report.checks:
        click.echo(f"[{'PASS' if check.passed else 'FAIL'}] {check.name}", err=True)
    click.echo(f"{len(report.checks) - len(report.failed)}/{len(report.checks)} checks passed", err=True)

    emit({"command": "verify", **report.to_dict()}, output)
    if not report.passed:
        raise SystemExit(1)

"""
resources サブコマンド
=====================

Sweep β and tabulate the GCA estimator's cost against the QSVT baseline.

Usage:
    dissim resources                                   # default β sweep to stdout
    dissim resources --beta 10 --M 4 --n 6 --D 12      # single point
    dissim resources --spectral-norm 0.5 --output out/sweep   # writes sweep.csv and sweep.json
"""

import logging
from pathlib import Path
from typing import Optional

import click

from ..services.resource_model import (
    comparison_table,
    crossover_beta,
    reports_to_json,
    write_reports_csv,
)
from .common import emit, handle_errors

logger = logging.getLogger(__name__)

DEFAULT_BETAS = (1.0, 10.0, 100.0, 1e3, 1e4)

_UNIT_INTERVAL = click.FloatRange(min=0, max=1, min_open=True, max_open=True)


@click.command("resources")
@click.option("--beta", "betas", multiple=True, type=click.FloatRange(min=0),
              help="逆温度 β (複数指定可、省略時は 1〜1e4)")
@click.option("--epsilon", default=0.01, show_default=True, type=_UNIT_INTERVAL, help="目標精度")
@click.option("--delta", default=0.05, show_default=True, type=_UNIT_INTERVAL, help="失敗確率")
@click.option("--M", "M", default=10, show_default=True, type=click.IntRange(min=1), help="ハミルトニアンの項数")
@click.option("--n", "n", default=10, show_default=True, type=click.IntRange(min=1), help="量子ビット数")
@click.option("--n-h", "n_h", default=0, show_default=True, type=click.IntRange(min=0),
              help="U1, U2 のアダマール数")
@click.option("--D", "D", default=0, show_default=True, type=click.IntRange(min=0), help="U1, U2 の回路深さ")
@click.option("--spectral-norm", type=float, default=None, help="既知の ‖H‖ (スペクトル増幅版の基準)")
@click.option("--alpha", type=float, default=None, help="スペクトル増幅のパラメータ α")
@click.option("--output", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="出力先プレフィックス (.csv と .json を書き出す)")
@handle_errors
def resources(
    betas: tuple[float, ...],
    epsilon: float,
    delta: float,
    M: int,
    n: int,
    n_h: int,
    D: int,
    spectral_norm: Optional[float],
    alpha: Optional[float],
    output: Optional[Path],
):
    """GCA 推定と QSVT のコストを比較する"""
    points = []
    for beta in betas or DEFAULT_BETAS:
        point = dict(beta=beta, epsilon=epsilon, delta=delta, M=M, n=n, n_h=n_h, D=D)
        if spectral_norm is not None:
            point.update(spectral_norm=spectral_norm, alpha=alpha)
        points.append(point)

    rows = comparison_table(points)
    reports = [r for row in rows for r in row.reports()]
    crossover = crossover_beta(rows)
    logger.info(f"{len(rows)} points, crossover β = {crossover}")

    payload = {
        "command": "resources",
        "crossover_beta": crossover,
        "rows": [
            {
                "point": row.point,
                "ours": row.ours.to_dict(),
                "baseline": row.baseline.to_dict(),
                "speedup": row.speedup,
            }
            for row in rows
        ],
        "reports": reports_to_json(reports),
    }
    if output is None:
        emit(payload, None)
        return
    write_reports_csv(reports, output.with_suffix(".csv"))
    emit(payload, output.with_suffix(".json"))

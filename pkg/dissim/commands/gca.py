"""
gca サブコマンド
===============

Estimate ⟨ψ₁|e^{−β(H+I)}|ψ₂⟩ for a problem file and compare against the dense oracle.

Usage:
    dissim gca --input problem.json
    dissim gca --input problem.json --method all --shots 20000 --seed 3
    dissim gca --input big.json --method exact --no-oracle
"""

import dataclasses
import logging
from pathlib import Path
from typing import Optional

import click

from ..services.gca_pipeline import GcaProblem, run_pipeline_all
from .common import ceilings, emit, handle_errors

logger = logging.getLogger(__name__)

METHODS = ("exact", "shots", "mlae")

_UNIT_INTERVAL = click.FloatRange(min=0, max=1, min_open=True, max_open=True)


@click.command("gca")
@click.option("--input", "input_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path), help="GCA problem JSON")
@click.option("--method", type=click.Choice([*METHODS, "all"]), default="exact", show_default=True,
              help="推定手法")
@click.option("--shots", default=10_000, show_default=True, type=click.IntRange(min=1),
              help="shots 手法の測定回数 (X, Y それぞれ)")
@click.option("--seed", default=0, show_default=True, type=int, help="乱数シード")
@click.option("--epsilon", type=_UNIT_INTERVAL, default=None, help="目標精度 (ファイルの値を上書き)")
@click.option("--delta", type=_UNIT_INTERVAL, default=None, help="失敗確率 (ファイルの値を上書き)")
@click.option("--no-oracle", is_flag=True, help="密行列オラクルとの比較を行わない")
@click.option("--ceiling-qubits", type=click.IntRange(min=1), default=None,
              help="状態ベクトルとオラクルの量子ビット上限")
@click.option("--output", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="出力 JSON (省略時は標準出力)")
@handle_errors
def gca(
    input_path: Path,
    method: str,
    shots: int,
    seed: int,
    epsilon: Optional[float],
    delta: Optional[float],
    no_oracle: bool,
    ceiling_qubits: Optional[int],
    output: Optional[Path],
):
    """Gibbs コヒーレンス振幅を推定する"""
    problem = GcaProblem.load(input_path)
    overrides = {k: v for k, v in {"epsilon": epsilon, "delta": delta}.items() if v is not None}
    if overrides:
        problem = dataclasses.replace(problem, **overrides)

    methods = METHODS if method == "all" else (method,)
    with ceilings(ceiling_qubits):
        results = run_pipeline_all(problem, methods, shots, seed, with_oracle=not no_oracle)  # type: ignore[arg-type]

    payload = {
        "command": "gca",
        "input": str(input_path),
        "seed": seed,
        "problem": problem.to_dict(),
        "estimates": {name: estimate.to_dict() for name, estimate in results.items()},
    }
    if not no_oracle:
        errors = {name: estimate.error for name, estimate in results.items()}
        payload["oracle_check"] = {
            "epsilon": problem.epsilon,
            "errors": errors,
            "within_epsilon": {name: err is not None and err <= problem.epsilon for name, err in errors.items()},
        }
        for name, err in errors.items():
            logger.info(f"{name}: |estimate - oracle| = {err:.3e}")
    emit(payload, output)

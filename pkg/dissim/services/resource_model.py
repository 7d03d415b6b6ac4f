"""
Resource Model
==============

Closed-form query/depth/ancilla counts for the Taylor-channel simulation (sequential and
fast-forwarded), the GCA estimator, and the QSVT baselines, plus comparison tables and
the as-constructed depth envelope check.

All big-O constants are 1. Reports carry that convention so tables compare shapes, not
absolute costs.
"""

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Optional, Sequence

import numpy as np

from .errors import InputError
from .lindblad_engine import truncation_order
from .purified_circuit import PurifiedCircuit, ceil_log2, index_width
from .settings import load_settings

logger = logging.getLogger(__name__)

CONSTANT_CONVENTION = "all big-O constants set to 1"


@dataclass(frozen=True)
class CostReport:
    method: str
    params: dict
    queries: float
    depth: float  # per-query circuit depth
    ancillas: int
    runtime: float  # queries × depth
    K: Optional[int] = None
    as_constructed: Optional[dict] = None
    conventions: str = CONSTANT_CONVENTION

    def to_dict(self) -> dict:
        out = {
            "method": self.method,
            "params": self.params,
            "queries": self.queries,
            "depth": self.depth,
            "ancillas": self.ancillas,
            "runtime": self.runtime,
            "K": self.K,
            "conventions": self.conventions,
        }
        if self.as_constructed is not None:
            out["as_constructed"] = self.as_constructed
        return out


def _check_positive(**values: float) -> None:
    for name, value in values.items():
        if value is None or not np.isfinite(value) or value < 0:
            raise InputError(f"{name} must be a finite nonnegative number, got {value}")


def theorem1_cost(T: float, epsilon: float, M: int) -> CostReport:
    """Sequential Taylor channel: K queries to U_g and U_F, depth K·M."""
    _check_positive(T=T, M=M)
    K = truncation_order(T, epsilon)
    depth = K * M
    return CostReport(
        "theorem1",
        {"T": T, "epsilon": epsilon, "M": M},
        queries=K,
        depth=depth,
        ancillas=K * (1 + index_width(M)),
        runtime=depth,
        K=K,
    )


def fast_forward_depth(K: int, M: int, R: int) -> int:
    """M·⌈log₂K⌉ + R, with the product tree counted as one level for K = 1."""
    if K == 0:
        return R
    return M * max(ceil_log2(K), 1) + R


def theorem2_cost(T: float, epsilon: float, M: int, R: int, n: int) -> CostReport:
    """Fast-forwarded channel for block-diagonal Pauli jumps."""
    _check_positive(T=T, M=M, R=R, n=n)
    K = truncation_order(T, epsilon)
    depth = fast_forward_depth(K, M, R)
    return CostReport(
        "theorem2",
        {"T": T, "epsilon": epsilon, "M": M, "R": R, "n": n},
        queries=K,
        depth=depth,
        ancillas=K * (1 + index_width(M)) + 8 * R * n * K,
        runtime=depth,
        K=K,
    )


def theorem3_cost(beta: float, epsilon: float, delta: float, M: int, n: int, n_h: int, D: int) -> CostReport:
    """
    GCA estimation: 2^{−(n−n_h)/2} ϵ⁻¹ ln(1/δ) queries of depth M⌈log₂K⌉ + D each.

    K comes from the simulation budget ε = ½·2^{(n−n_h)/2}ϵ, and ln(1/δ) multiplies the
    total rather than each query.
    """
    _check_positive(beta=beta, M=M, n=n, n_h=n_h, D=D)
    if not 0 < epsilon < 1 or not 0 < delta < 1:
        raise InputError("epsilon and delta must lie in (0, 1)")
    amplification = 2 ** ((n - n_h) / 2)
    K = truncation_order(beta, min(0.5 * amplification * epsilon, 1.0))
    queries = math.log(1 / delta) / (amplification * epsilon)
    depth = M * ceil_log2(K) + D
    return CostReport(
        "theorem3",
        {"beta": beta, "epsilon": epsilon, "delta": delta, "M": M, "n": n, "n_h": n_h, "D": D},
        queries=queries,
        depth=depth,
        ancillas=1 + K * (1 + index_width(M)) + 16 * n * K,
        runtime=queries * depth,
        K=K,
    )


def qsvt_cost(
    beta: float,
    epsilon: float,
    delta: float,
    M: int,
    D: int,
    spectral_norm: Optional[float] = None,
    alpha: Optional[float] = None,
) -> CostReport:
    """
    QSVT baseline ϵ⁻¹ ln(1/δ) queries of depth M√β·ln(1/ϵ) + D.

    With a known ‖H‖ < 1 the spectral-amplification variant costs
    e^{β(‖H‖/(1−α)−1)} ϵ⁻¹ ln(1/δ) (D + M α⁻¹ √β ln(1/ϵ)) for α ∈ (0, 1−‖H‖);
    α defaults to (1−‖H‖)/2.
    """
    _check_positive(beta=beta, M=M, D=D)
    if not 0 < epsilon < 1 or not 0 < delta < 1:
        raise InputError("epsilon and delta must lie in (0, 1)")
    log_eps = math.log(1 / epsilon)
    params: dict = {"beta": beta, "epsilon": epsilon, "delta": delta, "M": M, "D": D}
    if spectral_norm is None:
        queries = math.log(1 / delta) / epsilon
        depth = M * math.sqrt(beta) * log_eps + D
        return CostReport("qsvt", params, queries, depth, 1, queries * depth)

    if not 0 <= spectral_norm < 1:
        raise InputError(f"Spectral norm must lie in [0, 1), got {spectral_norm}")
    if alpha is None:
        alpha = (1 - spectral_norm) / 2
    if not 0 < alpha < 1 - spectral_norm:
        raise InputError(
            f"alpha must lie in (0, 1-‖H‖) = (0, {1 - spectral_norm}), got {alpha}",
            {"alpha": alpha, "spectral_norm": spectral_norm},
        )
    params.update(spectral_norm=spectral_norm, alpha=alpha)
    prefactor = math.exp(beta * (spectral_norm / (1 - alpha) - 1))
    queries = prefactor * math.log(1 / delta) / epsilon
    depth = D + M * math.sqrt(beta) * log_eps / alpha
    return CostReport("qsvt_known_norm", params, queries, depth, 1, queries * depth)


def circuit_cost(circuit: PurifiedCircuit, epsilon: float) -> CostReport:
    """Formula report for a built circuit, with its as-constructed tallies attached."""
    spec = circuit.spec
    T = circuit.plan.T
    if circuit.mode == "theorem1":
        base = theorem1_cost(T, epsilon, spec.num_jumps)
        depth = circuit.K * spec.num_jumps
        ancillas = circuit.K * (1 + index_width(spec.num_jumps))
    else:
        base = theorem2_cost(T, epsilon, spec.num_jumps, spec.num_blocks, spec.block_width)  # type: ignore[arg-type]
        depth = fast_forward_depth(circuit.K, spec.num_jumps, spec.num_blocks)  # type: ignore[arg-type]
        ancillas = circuit.tallies["ancillas_formula"]
    # K may be fixed by the circuit rather than the bound
    return CostReport(
        base.method,
        {**base.params, "K": circuit.K},
        queries=circuit.K,
        depth=depth,
        ancillas=ancillas,
        runtime=depth,
        K=circuit.K,
        as_constructed=circuit.to_dict(),
    )


@dataclass
class EnvelopeCheck:
    passed: bool
    as_constructed_depth: int
    formula_depth: float
    ratio: float
    constant: float

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "as_constructed_depth": self.as_constructed_depth,
            "formula_depth": self.formula_depth,
            "ratio": self.ratio,
            "constant": self.constant,
        }


def depth_envelope_check(
    circuit: PurifiedCircuit, report: CostReport, constant: Optional[float] = None
) -> EnvelopeCheck:
    c = constant if constant is not None else load_settings()["envelope_constant"]
    built = circuit.depth
    if report.depth == 0:
        ratio = 1.0 if built == 0 else math.inf
    else:
        ratio = built / report.depth
    return EnvelopeCheck(ratio <= c, built, report.depth, ratio, c)


@dataclass
class ScalingFit:
    model: Literal["linear", "log"]
    slope: float
    intercept: float
    r_squared: float

    def to_dict(self) -> dict:
        return {"model": self.model, "slope": self.slope, "intercept": self.intercept, "r_squared": self.r_squared}


def fit_depth_scaling(ks: Sequence[int], depths: Sequence[float], model: Literal["linear", "log"]) -> ScalingFit:
    """Least-squares fit of depth against K (linear) or log₂K (log)."""
    x = np.asarray(ks, dtype=float)
    if model == "log":
        x = np.log2(x)
    y = np.asarray(depths, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    residual = y - (slope * x + intercept)
    total = np.sum((y - y.mean()) ** 2)
    r_squared = 1.0 if total == 0 else float(1 - np.sum(residual**2) / total)
    return ScalingFit(model, float(slope), float(intercept), r_squared)


# Tables

@dataclass
class ComparisonRow:
    point: dict
    ours: CostReport
    baseline: CostReport
    extra: dict = field(default_factory=dict)

    @property
    def speedup(self) -> float:
        return self.baseline.runtime / self.ours.runtime if self.ours.runtime > 0 else math.inf

    def reports(self) -> list[CostReport]:
        return [self.ours, self.baseline]


def comparison_table(points: Sequence[dict]) -> list[ComparisonRow]:
    """theorem3 vs QSVT at each point {beta, epsilon, delta, M, n, n_h, D[, spectral_norm, alpha]}."""
    rows = []
    for point in points:
        ours = theorem3_cost(
            point["beta"], point["epsilon"], point["delta"], point["M"], point["n"], point["n_h"], point["D"]
        )
        baseline = qsvt_cost(
            point["beta"],
            point["epsilon"],
            point["delta"],
            point["M"],
            point["D"],
            point.get("spectral_norm"),
            point.get("alpha"),
        )
        rows.append(ComparisonRow(dict(point), ours, baseline))
    return rows


def sweep_beta(
    betas: Sequence[float],
    epsilon: float = 0.01,
    delta: float = 0.05,
    M: int = 10,
    n: int = 10,
    n_h: int = 0,
    D: int = 0,
) -> list[ComparisonRow]:
    points = [dict(beta=b, epsilon=epsilon, delta=delta, M=M, n=n, n_h=n_h, D=D) for b in betas]
    rows = comparison_table(points)
    logger.info(f"β sweep over {len(rows)} points; crossover at β={crossover_beta(rows)}")
    return rows


def crossover_beta(rows: Sequence[ComparisonRow]) -> Optional[float]:
    """Smallest β at which the GCA estimator's runtime drops below the baseline's."""
    for row in sorted(rows, key=lambda r: r.point["beta"]):
        if row.ours.runtime < row.baseline.runtime:
            return float(row.point["beta"])
    return None


CSV_COLUMNS = ["method", "param_point", "queries", "depth", "ancillas", "runtime", "K"]


def write_reports_csv(reports: Sequence[CostReport], path: Path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for r in reports:
            writer.writerow(
                {
                    "method": r.method,
                    "param_point": json.dumps(r.params, sort_keys=True),
                    "queries": r.queries,
                    "depth": r.depth,
                    "ancillas": r.ancillas,
                    "runtime": r.runtime,
                    "K": "" if r.K is None else r.K,
                }
            )


def reports_to_json(reports: Sequence[CostReport]) -> list[dict]:
    return [r.to_dict() for r in reports]

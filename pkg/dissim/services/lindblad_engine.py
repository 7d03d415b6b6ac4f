"""
Lindblad Engine
===============

Purely dissipative Lindbladians L_d[ρ] = Σ g_i (F_i ρ F_i† − ρ) with unitary jumps.

Three evolutions of the same generator are provided:

- the dense oracle ``exact_evolution`` (matrix exponential of the vectorized generator),
- the Taylor-truncated channel, either as an explicit Kraus set (``build_taylor_channel``)
  or term-recursively (``taylor_superoperator`` / ``apply_taylor_series``),
- Monte-Carlo trajectories that sample the same truncated channel, using the
  block-diagonal Pauli fast-forward path when the jumps allow it.

Sequence convention: a jump sequence (i_1, ..., i_k) applies F_{i_1} first, so the
accumulated operator is F_{i_k} ··· F_{i_1}.
"""

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Optional, Sequence, Union

import numpy as np
from pydantic import ValidationError
from scipy.special import logsumexp

from ..models.files import LindbladSpecFile, matrix_from_json
from .errors import CeilingExceededError, InputError, InvalidStateError, PreconditionError
from .pauli_core import BlockDiagPauli, TreeTrace, blockdiag_product_tree
from .quantum_linalg import (
    KrausChannel,
    apply_superop,
    check_dense_ceiling,
    expm,
    is_unitary,
    num_qubits_of,
    pure_density,
    unitarity_residual,
)
from .settings import get_worker_count, load_settings

logger = logging.getLogger(__name__)

TrajectoryPath = Literal["auto", "dense", "pauli"]


@dataclass(frozen=True, eq=False)
class Jump:
    """A rate and a unitary jump, given densely or as a block-diagonal Pauli operator."""
    rate: float
    dense: Optional[np.ndarray] = None
    pauli: Optional[BlockDiagPauli] = None

    def __post_init__(self):
        if (self.dense is None) == (self.pauli is None):
            raise InputError("A jump needs exactly one of a dense matrix or Pauli blocks")
        if not np.isfinite(self.rate) or self.rate < 0:
            raise InputError(f"Jump rate must be finite and nonnegative, got {self.rate}")
        if self.dense is not None:
            object.__setattr__(self, "dense", np.asarray(self.dense, dtype=complex))

    @property
    def matrix(self) -> np.ndarray:
        if self.dense is not None:
            return self.dense
        assert self.pauli is not None
        return self.pauli.to_dense()


@dataclass(frozen=True, eq=False)
class DissipativeLindbladSpec:
    jumps: tuple[Jump, ...]
    matrices: tuple[np.ndarray, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        jumps = tuple(self.jumps)
        if not jumps:
            raise InputError("A Lindbladian needs at least one jump")
        object.__setattr__(self, "jumps", jumps)
        if sum(j.rate for j in jumps) <= 0:
            raise InputError("Jump rates must have a positive sum")

        matrices = tuple(j.matrix for j in jumps)
        dims = {m.shape for m in matrices}
        if len(dims) != 1:
            raise InputError(f"Jumps act on different dimensions: {sorted(dims)}")
        num_qubits_of(matrices[0].shape[0])
        for i, m in enumerate(matrices):
            if not is_unitary(m, atol=1e-10):
                raise InputError(f"Jump {i} is not unitary", {"residual": unitarity_residual(m)})
        if self.is_pauli:
            shapes = {(j.pauli.num_blocks, j.pauli.num_qubits) for j in jumps}  # type: ignore[union-attr]
            if len(shapes) != 1:
                raise InputError("Pauli jumps must share the block count and block width")
        object.__setattr__(self, "matrices", matrices)

    @classmethod
    def from_dense(cls, rates: Sequence[float], ops: Sequence[np.ndarray]) -> "DissipativeLindbladSpec":
        return cls(tuple(Jump(float(g), dense=np.asarray(f)) for g, f in zip(rates, ops, strict=True)))

    @classmethod
    def from_pauli(cls, rates: Sequence[float], ops: Sequence[BlockDiagPauli]) -> "DissipativeLindbladSpec":
        return cls(tuple(Jump(float(g), pauli=f) for g, f in zip(rates, ops, strict=True)))

    @property
    def is_pauli(self) -> bool:
        return all(j.pauli is not None for j in self.jumps)

    @property
    def dim(self) -> int:
        return self.matrices[0].shape[0]

    @property
    def num_qubits(self) -> int:
        return num_qubits_of(self.dim)

    @property
    def num_jumps(self) -> int:
        return len(self.jumps)

    @property
    def rates(self) -> np.ndarray:
        return np.array([j.rate for j in self.jumps])

    @property
    def lindblad_norm(self) -> float:
        return float(self.rates.sum())

    @property
    def probabilities(self) -> np.ndarray:
        return self.rates / self.lindblad_norm

    @property
    def num_blocks(self) -> Optional[int]:
        return self.jumps[0].pauli.num_blocks if self.is_pauli else None  # type: ignore[union-attr]

    @property
    def block_width(self) -> Optional[int]:
        return self.jumps[0].pauli.num_qubits if self.is_pauli else None  # type: ignore[union-attr]


def spec_from_file(data: LindbladSpecFile) -> DissipativeLindbladSpec:
    """Build a spec from a validated file; ``n`` must match the jumps' qubit count."""
    jumps = []
    for i, entry in enumerate(data.jumps):
        if entry.pauli_blocks is not None:
            jumps.append(Jump(entry.g, pauli=BlockDiagPauli.parse(entry.pauli_blocks)))
        else:
            try:
                dense = matrix_from_json(entry.dense)  # type: ignore[arg-type]
            except ValueError as exc:
                raise InputError(f"Jump {i}: {exc}") from exc
            jumps.append(Jump(entry.g, dense=dense))
    spec = DissipativeLindbladSpec(tuple(jumps))
    if spec.num_qubits != data.n:
        raise InputError(f"Spec declares n={data.n} but the jumps act on {spec.num_qubits} qubits")
    return spec


def load_spec(path: Path) -> DissipativeLindbladSpec:
    try:
        data = LindbladSpecFile.model_validate_json(Path(path).read_text())
    except ValidationError as exc:
        raise InputError(f"Invalid Lindbladian spec {path}", {"errors": exc.errors(include_url=False)}) from exc
    return spec_from_file(data)


def liouvillian_matrix(spec: DissipativeLindbladSpec) -> np.ndarray:
    """Σ g_i (F_i ⊗ conj F_i) − (Σ g_i) I on the vectorized space."""
    d = spec.dim
    check_dense_ceiling(d * d, "Liouvillian")
    out = -spec.lindblad_norm * np.eye(d * d, dtype=complex)
    for g, f in zip(spec.rates, spec.matrices):
        out += g * np.kron(f, f.conj())
    return out


def exact_superoperator(spec: DissipativeLindbladSpec, t: float) -> np.ndarray:
    if t < 0:
        raise InputError(f"Evolution time must be nonnegative, got {t}")
    return expm(liouvillian_matrix(spec) * t)


def exact_evolution(spec: DissipativeLindbladSpec, rho0: np.ndarray, t: float) -> np.ndarray:
    return apply_superop(exact_superoperator(spec, t), np.asarray(rho0, dtype=complex))


# Truncation

def _log_bound(T: float, K: int) -> float:
    return math.log(2.0) + (K + 1) * math.log(T) - math.lgamma(K + 2)


def truncation_order(T: float, epsilon: float) -> int:
    """Smallest K with 2·T^{K+1}/(K+1)! ≤ ε, evaluated in the log domain."""
    if T < 0:
        raise InputError(f"T must be nonnegative, got {T}")
    if not epsilon > 0:
        raise InputError(f"epsilon must be positive, got {epsilon}")
    if T == 0:
        return 0
    log_eps = math.log(epsilon)
    K = 0
    while _log_bound(T, K) > log_eps:
        K += 1
    return K


def truncation_bound(T: float, K: int) -> float:
    return 0.0 if T == 0 else math.exp(_log_bound(T, K))


@dataclass(frozen=True)
class TruncationPlan:
    T: float
    K: int
    C: float
    epsilon_target: float
    weights: tuple[float, ...]  # C² e^{-T} T^k / k!, k = 0..K; sums to 1

    @property
    def error_bound(self) -> float:
        return truncation_bound(self.T, self.K)

    def to_dict(self) -> dict:
        return {
            "T": self.T,
            "K": self.K,
            "C": self.C,
            "epsilon_target": self.epsilon_target,
            "error_bound": self.error_bound,
            "weights": list(self.weights),
        }


def make_plan(T: float, epsilon: float, order: Optional[int] = None) -> TruncationPlan:
    """Plan for dimensionless time T; ``order`` overrides the bound-derived K."""
    K = truncation_order(T, epsilon) if order is None else int(order)
    if T == 0:
        weights = np.zeros(K + 1)
        weights[0] = 1.0
        return TruncationPlan(0.0, K, 1.0, epsilon, tuple(weights))
    ks = np.arange(K + 1)
    log_terms = ks * math.log(T) - np.array([math.lgamma(k + 1) for k in ks])
    log_total = float(logsumexp(log_terms))
    weights = np.exp(log_terms - log_total)
    C = math.exp(0.5 * (T - log_total))
    return TruncationPlan(float(T), K, C, epsilon, tuple(float(w) for w in weights))


def plan_truncation(
    spec: DissipativeLindbladSpec, t: float, epsilon: float, order: Optional[int] = None
) -> TruncationPlan:
    if t < 0:
        raise InputError(f"Evolution time must be nonnegative, got {t}")
    plan = make_plan(spec.lindblad_norm * t, epsilon, order)
    logger.info(f"Truncation plan: T={plan.T:.6g}, K={plan.K}, bound={plan.error_bound:.3e}")
    return plan


def kraus_count(num_jumps: int, K: int) -> int:
    return sum(num_jumps**k for k in range(K + 1))


def build_taylor_channel(
    spec: DissipativeLindbladSpec,
    t: float,
    epsilon: float,
    plan: Optional[TruncationPlan] = None,
) -> KrausChannel:
    """Explicit Kraus set √(w_k p_{i_1}···p_{i_k}) F_{i_k}···F_{i_1} over all sequences k ≤ K."""
    plan = plan or plan_truncation(spec, t, epsilon)
    M = spec.num_jumps
    cap = load_settings()["kraus_cap"]
    if (M + 1) ** plan.K > cap:
        raise CeilingExceededError(
            f"(M+1)^K = {(M + 1) ** plan.K} exceeds the Kraus cap {cap}; "
            "use sample_trajectories or taylor_superoperator",
            {"M": M, "K": plan.K, "cap": cap},
        )
    probs = spec.probabilities
    ops = [np.sqrt(plan.weights[0]) * np.eye(spec.dim, dtype=complex)]
    level: list[tuple[float, np.ndarray]] = [(1.0, np.eye(spec.dim, dtype=complex))]
    for k in range(1, plan.K + 1):
        level = [
            (prob * probs[i], spec.matrices[i] @ op)
            for prob, op in level
            for i in range(M)
            if probs[i] > 0
        ]
        ops.extend(np.sqrt(plan.weights[k] * prob) * op for prob, op in level)
    logger.info(f"Taylor channel: {len(ops)} Kraus operators (K={plan.K}, M={M})")
    return KrausChannel(tuple(ops))


def jump_superoperator(spec: DissipativeLindbladSpec) -> np.ndarray:
    """Σ p_i F_i ⊗ conj F_i."""
    d = spec.dim
    check_dense_ceiling(d * d, "superoperator")
    out = np.zeros((d * d, d * d), dtype=complex)
    for p, f in zip(spec.probabilities, spec.matrices):
        out += p * np.kron(f, f.conj())
    return out


def taylor_superoperator(spec: DissipativeLindbladSpec, plan: TruncationPlan) -> np.ndarray:
    """Σ_k w_k S^k by Horner recursion; no enumeration cap."""
    s = jump_superoperator(spec)
    ident = np.eye(s.shape[0], dtype=complex)
    acc = plan.weights[plan.K] * ident
    for k in range(plan.K - 1, -1, -1):
        acc = plan.weights[k] * ident + s @ acc
    return acc


def apply_taylor_series(spec: DissipativeLindbladSpec, rho: np.ndarray, plan: TruncationPlan) -> np.ndarray:
    """Apply the truncated channel term by term: Σ_k w_k S^k[ρ]."""
    term = np.asarray(rho, dtype=complex)
    out = plan.weights[0] * term
    probs = spec.probabilities
    for k in range(1, plan.K + 1):
        term = sum(p * f @ term @ f.conj().T for p, f in zip(probs, spec.matrices))
        out = out + plan.weights[k] * term
    return out


# Fast forwarding

def fast_forward_apply(
    spec: DissipativeLindbladSpec, sequence: Sequence[int], workers: int = 1
) -> tuple[BlockDiagPauli, TreeTrace]:
    """F_{i_k}···F_{i_1} for a jump sequence, reduced block-wise by a product tree."""
    if not spec.is_pauli:
        raise PreconditionError("fast_forward_apply needs block-diagonal Pauli jumps")
    if not sequence:
        return BlockDiagPauli.identity(spec.num_blocks, spec.block_width), TreeTrace(level_sizes=[0])  # type: ignore[arg-type]
    factors = [spec.jumps[i].pauli for i in reversed(sequence)]
    return blockdiag_product_tree(factors, workers)  # type: ignore[arg-type]


# Trajectories

@dataclass
class TrajectoryResult:
    k: int
    sequence: tuple[int, ...]
    final_state: np.ndarray
    seed: Optional[int] = None
    batch: Optional[int] = None
    index: Optional[int] = None
    tree_depth: Optional[int] = None

    def to_dict(self, include_state: bool = False) -> dict:
        out = {
            "seed": self.seed,
            "batch": self.batch,
            "index": self.index,
            "k": self.k,
            "sequence": list(self.sequence),
        }
        if include_state:
            out["final_state"] = [[float(a.real), float(a.imag)] for a in self.final_state]
        return out


def _as_state(psi0: np.ndarray, dim: int) -> np.ndarray:
    psi = np.asarray(psi0, dtype=complex).reshape(-1)
    if psi.size != dim:
        raise InvalidStateError(f"State of length {psi.size} does not match dimension {dim}")
    norm = np.linalg.norm(psi)
    if not np.isfinite(norm) or abs(norm - 1) > 1e-8:
        raise InvalidStateError(f"Initial state must be normalized, norm={norm}")
    return psi


def _run_one(
    spec: DissipativeLindbladSpec,
    psi: np.ndarray,
    plan: TruncationPlan,
    cumulative: np.ndarray,
    rng: np.random.Generator,
    use_pauli: bool,
) -> TrajectoryResult:
    # Inverse CDF over the K+1 renormalized weights.
    k = min(int(np.searchsorted(cumulative, rng.random(), side="right")), plan.K)
    sequence = tuple(int(i) for i in rng.choice(spec.num_jumps, size=k, p=spec.probabilities)) if k else ()
    if use_pauli:
        product, trace = fast_forward_apply(spec, sequence)
        return TrajectoryResult(k, sequence, product.to_dense() @ psi, tree_depth=trace.depth)
    out = psi
    for i in sequence:
        out = spec.matrices[i] @ out
    return TrajectoryResult(k, sequence, out)


def _resolve_path(spec: DissipativeLindbladSpec, path: TrajectoryPath) -> bool:
    if path == "pauli" and not spec.is_pauli:
        raise PreconditionError("The Pauli trajectory path needs block-diagonal Pauli jumps")
    return path == "pauli" or (path == "auto" and spec.is_pauli)


def sample_trajectory(
    spec: DissipativeLindbladSpec,
    psi0: np.ndarray,
    t: float,
    epsilon: float,
    rng_seed: Union[int, np.random.Generator, None] = None,
    path: TrajectoryPath = "auto",
    plan: Optional[TruncationPlan] = None,
) -> TrajectoryResult:
    """One Monte-Carlo realization of the truncated channel on a pure state."""
    psi = _as_state(psi0, spec.dim)
    plan = plan or plan_truncation(spec, t, epsilon)
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    result = _run_one(spec, psi, plan, np.cumsum(plan.weights), rng, _resolve_path(spec, path))
    if not isinstance(rng_seed, np.random.Generator):
        result.seed = rng_seed
    return result


def sample_trajectories(
    spec: DissipativeLindbladSpec,
    psi0: np.ndarray,
    t: float,
    epsilon: float,
    shots: int,
    seed: int = 0,
    workers: Optional[int] = None,
    path: TrajectoryPath = "auto",
) -> list[TrajectoryResult]:
    """
    Sample ``shots`` trajectories in fixed-size batches.

    Each batch draws from its own child of ``SeedSequence(seed)``, so the output depends
    only on the seed and the batch size, never on the number of workers.
    """
    if shots < 1:
        raise InputError("shots must be at least 1")
    psi = _as_state(psi0, spec.dim)
    plan = plan_truncation(spec, t, epsilon)
    cumulative = np.cumsum(plan.weights)
    use_pauli = _resolve_path(spec, path)
    batch_size = int(load_settings()["trajectory_batch"])
    n_batches = -(-shots // batch_size)
    children = np.random.SeedSequence(seed).spawn(n_batches)
    workers = workers or get_worker_count()

    def run_batch(b: int) -> list[TrajectoryResult]:
        rng = np.random.default_rng(children[b])
        count = min(batch_size, shots - b * batch_size)
        results = []
        for j in range(count):
            r = _run_one(spec, psi, plan, cumulative, rng, use_pauli)
            r.seed, r.batch, r.index = seed, b, j
            results.append(r)
        return results

    logger.info(f"Sampling {shots} trajectories in {n_batches} batches on {workers} workers")
    if workers > 1 and n_batches > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            batches = list(pool.map(run_batch, range(n_batches)))
    else:
        batches = [run_batch(b) for b in range(n_batches)]
    return list(itertools.chain.from_iterable(batches))


def average_density(results: Sequence[TrajectoryResult]) -> np.ndarray:
    if not results:
        raise InputError("No trajectories to average")
    states = np.stack([r.final_state for r in results])
    return states.T @ states.conj() / len(results)


def product_state(labels: str) -> np.ndarray:
    """Statevector for a label over {0, 1, +, -}, qubit 0 first."""
    single = {
        "0": np.array([1, 0], dtype=complex),
        "1": np.array([0, 1], dtype=complex),
        "+": np.array([1, 1], dtype=complex) / np.sqrt(2),
        "-": np.array([1, -1], dtype=complex) / np.sqrt(2),
    }
    out = np.array([1], dtype=complex)
    for ch in labels:
        if ch not in single:
            raise InputError(f"Unknown product-state label {ch!r}")
        out = np.kron(out, single[ch])
    return out


def product_density(labels: str) -> np.ndarray:
    return pure_density(product_state(labels))

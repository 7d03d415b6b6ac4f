"""
Estimation
==========

Amplitude estimation on dense statevectors: the Hadamard-test embedding, the Grover
operator U_G = (I − 2|S₁⟩⟨S₁|)(I − 2|S₂⟩⟨S₂|), maximum-likelihood amplitude estimation
(MLAE) over an exponential schedule of Grover powers, and a shot-noise baseline.

With sin θ = |⟨S₁|S₂⟩|, starting from |S₁⟩ and applying U_G m times leaves an overlap
with |S₂⟩ of magnitude |sin((2m+1)θ)|, which is what each MLAE round samples.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np
import scipy.optimize
import scipy.stats

from .errors import CeilingExceededError, InputError, ShapeMismatchError
from .quantum_linalg import check_dense_ceiling, num_qubits_of, validate_unitary
from .settings import load_settings

logger = logging.getLogger(__name__)

Target = Literal["abs", "real", "imag"]

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_S_DAG = np.diag([1, -1j])
_X = np.array([[0, 1], [1, 0]], dtype=complex)


@dataclass(eq=False)
class AmplitudeProblem:
    """|S₁⟩ = U₁|0⟩ and |S₂⟩ = U₂|0⟩, with the quantity to estimate."""
    u1: np.ndarray
    u2: np.ndarray
    target: Target = "abs"
    epsilon: float = 0.01
    delta: float = 0.05

    def __post_init__(self):
        self.u1 = validate_unitary(self.u1)
        self.u2 = validate_unitary(self.u2)
        if self.u1.shape != self.u2.shape:
            raise ShapeMismatchError(f"U1 {self.u1.shape} and U2 {self.u2.shape} differ")
        if self.target not in ("abs", "real", "imag"):
            raise InputError(f"Unknown estimation target {self.target!r}")
        if not 0 < self.epsilon < 1 or not 0 < self.delta < 1:
            raise InputError("epsilon and delta must lie in (0, 1)")

    @property
    def num_qubits(self) -> int:
        return num_qubits_of(self.u1.shape[0])

    def overlap(self) -> complex:
        return complex(self.u1[:, 0].conj() @ self.u2[:, 0])


@dataclass
class ScheduleRound:
    power: int
    shots: int
    hits: int

    def to_dict(self) -> dict:
        return {"power": self.power, "shots": self.shots, "hits": self.hits}


@dataclass
class EstimateReport:
    estimate: float
    target: str
    epsilon: float
    delta: float
    amplitude: float  # the estimated |⟨S₁|S₂⟩| of the embedded pair
    schedule: list[ScheduleRound] = field(default_factory=list)
    queries: int = 0
    seed: Optional[int] = None

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "target": self.target,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "amplitude": self.amplitude,
            "schedule": [r.to_dict() for r in self.schedule],
            "queries": self.queries,
            "seed": self.seed,
        }


# Embeddings

def block_encode_projector(projector: np.ndarray) -> np.ndarray:
    """One-ancilla U_Z = I⊗Π + X⊗(I−Π), ancilla first; ⟨0|U_Z|0⟩ = Π."""
    p = np.asarray(projector, dtype=complex)
    eye = np.eye(p.shape[0])
    return np.kron(np.eye(2), p) + np.kron(_X, eye - p)


def _hadamard_test_unitary(u1: np.ndarray, u2: np.ndarray, imag: bool) -> np.ndarray:
    """A = H·[S†]·cU·H on ancilla ⊗ system with U = U₁†U₂."""
    u = u1.conj().T @ u2
    d = u.shape[0]
    eye = np.eye(d)
    hadamard = np.kron(_H, eye)
    controlled = np.block([[eye, np.zeros((d, d))], [np.zeros((d, d)), u]])
    phase = np.kron(_S_DAG, eye) if imag else np.eye(2 * d)
    return hadamard @ phase @ controlled @ hadamard


def hadamard_test_embed(u1: np.ndarray, u2: np.ndarray, imag: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """
    (V₁, V₂) on block ⊗ ancilla ⊗ system with ⟨0|V₁†V₂|0⟩ = (1 + Re⟨S₁|S₂⟩)/2.

    ``imag`` inserts S† so the amplitude becomes (1 + Im⟨S₁|S₂⟩)/2.
    """
    u1 = validate_unitary(u1)
    u2 = validate_unitary(u2)
    if u1.shape != u2.shape:
        raise ShapeMismatchError(f"U1 {u1.shape} and U2 {u2.shape} differ")
    check_dense_ceiling(4 * u1.shape[0], "Hadamard-test embedding")
    a = _hadamard_test_unitary(u1, u2, imag)
    d = u1.shape[0]
    projector = np.kron(np.diag([1.0, 0.0]), np.eye(d))
    v1 = np.kron(np.eye(2), a)
    return v1, block_encode_projector(projector) @ v1


def _hadamard_test_states(u1: np.ndarray, u2: np.ndarray, imag: bool) -> tuple[np.ndarray, np.ndarray]:
    """V₁|0⟩ and V₂|0⟩ without forming the block-extended unitaries."""
    psi = _hadamard_test_unitary(u1, u2, imag)[:, 0]
    half = psi.size // 2
    s1 = np.concatenate([psi, np.zeros_like(psi)])
    # U_Z keeps the ancilla-0 half on block |0⟩ and moves the rest to block |1⟩.
    s2 = np.concatenate([psi[:half], np.zeros(half), np.zeros(half), psi[half:]]).astype(complex)
    return s1, s2


def grover_operator(u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
    s1 = np.asarray(u1, dtype=complex)[:, 0]
    s2 = np.asarray(u2, dtype=complex)[:, 0]
    if s1.shape != s2.shape:
        raise ShapeMismatchError("U1 and U2 act on different dimensions")
    check_dense_ceiling(s1.size, "Grover operator")
    eye = np.eye(s1.size)
    return (eye - 2 * np.outer(s1, s1.conj())) @ (eye - 2 * np.outer(s2, s2.conj()))


# Maximum-likelihood amplitude estimation

def mlae_schedule(epsilon: float, delta: float) -> list[int]:
    """
    Grover powers {0, 1, 2, 4, ...}, cut at the shortest prefix whose Fisher information
    Σ 4N(2m+1)² reaches (safety·z_{1−δ/2}/ϵ)².
    """
    settings = load_settings()
    shots = settings["mlae_shots_per_power"]
    z = float(scipy.stats.norm.ppf(1 - delta / 2))
    required = (settings["mlae_safety"] * z / epsilon) ** 2
    powers: list[int] = []
    information = 0.0
    m = 0
    while information < required:
        powers.append(m)
        information += 4 * shots * (2 * m + 1) ** 2
        m = 1 if m == 0 else 2 * m
    return powers


def mlae_query_count(epsilon: float, delta: float) -> int:
    shots = load_settings()["mlae_shots_per_power"]
    return sum(shots * (2 * m + 1) for m in mlae_schedule(epsilon, delta))


def _grover_probabilities(s1: np.ndarray, s2: np.ndarray, powers: list[int]) -> list[float]:
    """|⟨S₂|U_G^m|S₁⟩|² for each scheduled power."""
    v = s1.copy()
    done = 0
    probs = []
    for m in powers:
        for _ in range(m - done):
            v = v - 2 * s2 * (s2.conj() @ v)
            v = v - 2 * s1 * (s1.conj() @ v)
        done = m
        probs.append(float(np.clip(abs(s2.conj() @ v) ** 2, 0.0, 1.0)))
    return probs


def _max_likelihood_theta(rounds: list[ScheduleRound]) -> float:
    powers = np.array([r.power for r in rounds])
    hits = np.array([r.hits for r in rounds])
    misses = np.array([r.shots - r.hits for r in rounds])

    def neg_log_likelihood(theta: float) -> float:
        p = np.sin((2 * powers + 1) * theta) ** 2
        p = np.clip(p, 1e-300, 1 - 1e-16)
        return -float(np.sum(hits * np.log(p) + misses * np.log1p(-p)))

    resolution = max(2000, 100 * (2 * int(powers.max()) + 1))
    grid = np.linspace(0, np.pi / 2, resolution + 1)
    values = np.array([neg_log_likelihood(t) for t in grid])
    best = int(np.argmin(values))
    step = grid[1] - grid[0]
    refined = scipy.optimize.minimize_scalar(
        neg_log_likelihood,
        bounds=(max(0.0, grid[best] - step), min(np.pi / 2, grid[best] + step)),
        method="bounded",
        options={"xatol": 1e-12},
    )
    return float(refined.x) if refined.fun <= values[best] else float(grid[best])


def mlae_from_states(
    s1: np.ndarray,
    s2: np.ndarray,
    epsilon: float,
    delta: float,
    seed: Optional[int] = None,
) -> EstimateReport:
    """Estimate |⟨S₁|S₂⟩| to additive ϵ with probability ≥ 1−δ."""
    s1 = np.asarray(s1, dtype=complex).reshape(-1)
    s2 = np.asarray(s2, dtype=complex).reshape(-1)
    if s1.shape != s2.shape:
        raise ShapeMismatchError("States have different dimensions")
    limit = load_settings()["statevector_max_qubits"]
    if s1.size > 2**limit:
        raise CeilingExceededError(
            f"MLAE states need {num_qubits_of(s1.size)} qubits, ceiling is {limit}",
            {"ceiling": limit},
        )
    shots = load_settings()["mlae_shots_per_power"]
    powers = mlae_schedule(epsilon, delta)
    probs = _grover_probabilities(s1, s2, powers)
    rng = np.random.default_rng(seed)
    rounds = [ScheduleRound(m, shots, int(rng.binomial(shots, p))) for m, p in zip(powers, probs)]
    amplitude = math.sin(_max_likelihood_theta(rounds))
    queries = sum(r.shots * (2 * r.power + 1) for r in rounds)
    logger.info(f"MLAE: powers={powers}, queries={queries}, amplitude={amplitude:.6f}")
    return EstimateReport(amplitude, "abs", epsilon, delta, amplitude, rounds, queries, seed)


def mlae_estimate(problem: AmplitudeProblem, seed: Optional[int] = None) -> EstimateReport:
    """
    Estimate |⟨S₁|S₂⟩|, or its real or imaginary part through the Hadamard test.

    For real/imag targets the amplitude is (1+x)/2, so the embedded estimate needs
    precision ϵ/2 to give x within ϵ.
    """
    limit = load_settings()["statevector_max_qubits"]
    extra = 0 if problem.target == "abs" else 2
    if problem.num_qubits + extra > limit:
        raise CeilingExceededError(
            f"Estimation needs {problem.num_qubits + extra} qubits, ceiling is {limit}",
            {"qubits": problem.num_qubits + extra, "ceiling": limit},
        )
    if problem.target == "abs":
        return mlae_from_states(problem.u1[:, 0], problem.u2[:, 0], problem.epsilon, problem.delta, seed)

    s1, s2 = _hadamard_test_states(problem.u1, problem.u2, problem.target == "imag")
    report = mlae_from_states(s1, s2, problem.epsilon / 2, problem.delta, seed)
    report.estimate = 2 * report.amplitude - 1
    report.target = problem.target
    report.epsilon = problem.epsilon
    return report


def shot_estimate(expectation: float, shots: int, seed: Optional[int] = None) -> float:
    """Mean of ±1 outcomes drawn with P(+1) = (1+x)/2."""
    if shots < 1:
        raise InputError(f"shots must be at least 1, got {shots}")
    if abs(expectation) > 1 + 1e-9:
        raise InputError(f"Expectation {expectation} lies outside [-1, 1]")
    p = min(max((1 + expectation) / 2, 0.0), 1.0)
    hits = np.random.default_rng(seed).binomial(shots, p)
    return 2 * hits / shots - 1

"""
GCA Pipeline
============

Estimate the Gibbs coherence amplitude ⟨ψ₁|e^{−β(H+I)}|ψ₂⟩ with ψ₁ = U₁|+⟩^{⊗n},
ψ₂ = U₂|0⟩^{⊗n} and H = Σ λ_i Q_i (λ_i ≥ 0, Σλ_i = 1).

The NDME input |+⟩⟨+|^{⊗(n+1)} is pushed through C_{U₁†} ∘ e^{L_H β} ∘ C_{U₂}, where
C_U is the compiled CBE of Had·U·Had and L_H is the purely dissipative Lindbladian whose
jumps diag(P0_i, P1_i) make its evolution a 1-CBE of e^{−β(H'+I)}, H' = Had·H·Had.
The NDME qubit's X and Y expectations then carry 2^{(n−n_h)/2}·GCA.

Readout signs: Tr((X⊗I)ρ) = 2 Re Tr(B) and Tr((Y⊗I)ρ) = −2 Im Tr(B) for the upper-right
block B, so ``im`` carries a minus sign.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Optional, Sequence

import numpy as np
from pydantic import ValidationError

from ..models.files import GcaProblemFile
from .errors import CeilingExceededError, ConstructionError, InputError
from .estimation import EstimateReport, mlae_from_states, shot_estimate
from .lindblad_engine import (
    DissipativeLindbladSpec,
    TruncationPlan,
    apply_taylor_series,
    plan_truncation,
    taylor_superoperator,
)
from .ndme_cbe import (
    Gate,
    bell_frame,
    cbe_kraus_channel,
    compile_circuit_cbe,
    count_hadamards,
    gate_unitary,
    hamiltonian_jump_construction,
    pqc_isometry,
)
from .pauli_core import BlockDiagPauli, PauliPhase, PauliString, hadamard_conjugate, parse_pauli
from .quantum_linalg import (
    apply_channel,
    check_dense_ceiling,
    expm,
    kraus_from_superop,
    num_qubits_of,
    stinespring_purify,
)
from .settings import load_settings

logger = logging.getLogger(__name__)

Method = Literal["exact", "shots", "mlae"]

_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_PLUS = np.full((2, 2), 0.5, dtype=complex)

# Dense self-check of the projected generator builds a 4^n × 4^n matrix.
GENERATOR_CHECK_MAX_QUBITS = 4


def circuit_depth(gates: Sequence[Gate], n: int) -> int:
    """ASAP layer count of a gate list."""
    last = [0] * n
    for g in gates:
        layer = 1 + max(last[q] for q in g.qubits)
        for q in g.qubits:
            last[q] = layer
    return max(last, default=0)


def adjoint_gates(gates: Sequence[Gate]) -> list[Gate]:
    """U† from the same gate set: reversed order, S† = S³ and T† = T⁷."""
    repeats = {"H": 1, "CNOT": 1, "S": 3, "T": 7}
    return [g for g in reversed(gates) for _ in range(repeats[g.name])]


@dataclass(eq=False)
class GcaProblem:
    n: int
    terms: list[tuple[float, PauliString]]  # (λ_i, Q_i) with Σλ_i = 1
    beta: float
    u1: list[Gate] = field(default_factory=list)
    u2: list[Gate] = field(default_factory=list)
    epsilon: float = 1e-3
    delta: float = 0.05
    original_beta: Optional[float] = None
    coefficient_norm: float = 1.0  # Σ|c_i| of the input coefficients

    def __post_init__(self):
        if not self.terms:
            raise InputError("The Hamiltonian needs at least one term")
        total = sum(lam for lam, _ in self.terms)
        if abs(total - 1) > 1e-12 or any(lam < 0 for lam, _ in self.terms):
            raise InputError(f"λ must be nonnegative and sum to 1, got Σλ={total}")
        for _, q in self.terms:
            if q.num_qubits != self.n:
                raise InputError(f"Pauli term {q} does not act on n={self.n} qubits")
            if not q.is_hermitian():
                raise InputError(f"Pauli term {q} is not Hermitian")
        for g in self.u1 + self.u2:
            if max(g.qubits) >= self.n:
                raise InputError(f"Gate {g.name}{list(g.qubits)} is outside n={self.n} qubits")
        if self.beta < 0:
            raise InputError(f"beta must be nonnegative, got {self.beta}")
        if self.original_beta is None:
            self.original_beta = self.beta

    @classmethod
    def from_terms(
        cls,
        n: int,
        coefficients: Sequence[tuple[float, PauliString | str]],
        beta: float,
        u1: Sequence[Gate] = (),
        u2: Sequence[Gate] = (),
        epsilon: float = 1e-3,
        delta: float = 0.05,
    ) -> "GcaProblem":
        """Normalize: negative coefficients flip the Pauli sign, then λ = |c|/Σ|c| and β' = βΣ|c|."""
        parsed = []
        for coeff, pauli in coefficients:
            q = parse_pauli(pauli) if isinstance(pauli, str) else pauli
            if coeff == 0:
                continue
            if coeff < 0:
                q = q.with_phase(int(q.phase) + 2)
            parsed.append((abs(float(coeff)), q))
        norm = sum(c for c, _ in parsed)
        if norm <= 0:
            raise InputError("Hamiltonian coefficients are all zero")
        terms = [(c / norm, q) for c, q in parsed]
        return cls(n, terms, beta * norm, list(u1), list(u2), epsilon, delta, beta, norm)

    @classmethod
    def from_file(cls, data: GcaProblemFile) -> "GcaProblem":
        return cls.from_terms(
            data.n,
            [(t.coeff, t.pauli) for t in data.hamiltonian],
            data.beta,
            [Gate(g.g, tuple(g.q)) for g in data.u1],
            [Gate(g.g, tuple(g.q)) for g in data.u2],
            data.epsilon,
            data.delta,
        )

    @classmethod
    def load(cls, path: Path) -> "GcaProblem":
        try:
            data = GcaProblemFile.model_validate_json(Path(path).read_text())
        except ValidationError as exc:
            raise InputError(f"Invalid problem file {path}", {"errors": exc.errors(include_url=False)}) from exc
        return cls.from_file(data)

    @property
    def num_terms(self) -> int:
        return len(self.terms)

    @property
    def n_h(self) -> int:
        return count_hadamards(self.u1) + count_hadamards(self.u2)

    @property
    def depth(self) -> int:
        return circuit_depth(self.u1, self.n) + circuit_depth(self.u2, self.n)

    @property
    def amplification_factor(self) -> float:
        """2^{(n−n_h)/2}; the readout divides by it."""
        return 2 ** ((self.n - self.n_h) / 2)

    @property
    def simulation_epsilon(self) -> float:
        return min(0.5 * self.amplification_factor * self.epsilon, 1.0)

    @property
    def estimation_epsilon(self) -> float:
        return self.epsilon / 2

    def hamiltonian_matrix(self) -> np.ndarray:
        check_dense_ceiling(2**self.n, "Hamiltonian")
        return sum(lam * q.to_dense() for lam, q in self.terms)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "beta": self.beta,
            "original_beta": self.original_beta,
            "coefficient_norm": self.coefficient_norm,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "hamiltonian": [{"lambda": lam, "pauli": str(q)} for lam, q in self.terms],
            "u1": [g.to_dict() for g in self.u1],
            "u2": [g.to_dict() for g in self.u2],
            "n_h": self.n_h,
            "D": self.depth,
        }


@dataclass
class GcaEstimate:
    re: float
    im: float
    method: Method
    amplification_factor: float
    raw_x: float  # Tr((X⊗I)ρ_out), or its estimate
    raw_y: float
    truncation_order: int
    queries: Optional[int] = None
    shots: Optional[int] = None
    near_boundary: bool = False
    oracle: Optional[complex] = None
    resources: Optional[dict] = None

    @property
    def value(self) -> complex:
        return complex(self.re, self.im)

    @property
    def error(self) -> Optional[float]:
        return None if self.oracle is None else abs(self.value - self.oracle)

    def to_dict(self) -> dict:
        out = {
            "re": self.re,
            "im": self.im,
            "method": self.method,
            "amplification_factor": self.amplification_factor,
            "raw_x": self.raw_x,
            "raw_y": self.raw_y,
            "truncation_order": self.truncation_order,
            "queries": self.queries,
            "shots": self.shots,
            "near_boundary": self.near_boundary,
        }
        if self.oracle is not None:
            out["oracle"] = {"re": self.oracle.real, "im": self.oracle.imag}
            out["error"] = self.error
        if self.resources is not None:
            out["resources"] = self.resources
        return out


# Lindbladian

def gibbs_jumps(problem: GcaProblem) -> list[BlockDiagPauli]:
    """F_i = |0⟩⟨0|⊗P0_i + |1⟩⟨1|⊗P1_i for Q_i' = Had·Q_i·Had."""
    return [BlockDiagPauli(hamiltonian_jump_construction(hadamard_conjugate(q))) for _, q in problem.terms]


def projected_generator(spec: DissipativeLindbladSpec, n: int) -> np.ndarray:
    """W†(Σ p_i P0_i ⊗ P1_i* − I)W: the generator's action on the encoded block."""
    w = pqc_isometry(n)
    generator = -np.eye(4**n, dtype=complex)
    for p, jump in zip(spec.probabilities, spec.jumps):
        p0, p1 = jump.pauli.blocks  # type: ignore[union-attr]
        generator += p * np.kron(p0.to_dense(), p1.to_dense().conj())
    return w.conj().T @ generator @ w


def projected_block_evolution(spec: DissipativeLindbladSpec, n: int, beta: float) -> np.ndarray:
    """(⟨0|^{⊗n}⊗I)U_B^{⊗n} exp(β(Σλ P0⊗P1* − I)) U_B^{†⊗n}(|0⟩^{⊗n}⊗I)."""
    frame = bell_frame(n)
    generator = -np.eye(4**n, dtype=complex)
    for p, jump in zip(spec.probabilities, spec.jumps):
        p0, p1 = jump.pauli.blocks  # type: ignore[union-attr]
        generator += p * np.kron(p0.to_dense(), p1.to_dense().conj())
    rotated = frame @ expm(beta * generator) @ frame.conj().T
    return rotated[: 2**n, : 2**n]


def gibbs_lindbladian(problem: GcaProblem) -> DissipativeLindbladSpec:
    """Rates λ_i and jumps diag(P0_i, P1_i); evolving for time β is a 1-CBE of e^{−β(H'+I)}."""
    spec = DissipativeLindbladSpec.from_pauli([lam for lam, _ in problem.terms], gibbs_jumps(problem))
    if problem.n <= GENERATOR_CHECK_MAX_QUBITS:
        target = -(hadamard_conjugated_hamiltonian(problem) + np.eye(2**problem.n))
        residual = float(np.max(np.abs(projected_generator(spec, problem.n) - target)))
        if residual > 1e-10:
            raise ConstructionError("Gibbs Lindbladian does not encode −(H'+I)", {"residual": residual})
    else:
        logger.debug(
            f"Skipping the dense generator check for n={problem.n} > {GENERATOR_CHECK_MAX_QUBITS}"
        )
    logger.info(f"Gibbs Lindbladian: M={spec.num_jumps}, n={problem.n}, β={problem.beta:.6g}")
    return spec


def hadamard_conjugated_hamiltonian(problem: GcaProblem) -> np.ndarray:
    return sum(lam * hadamard_conjugate(q).to_dense() for lam, q in problem.terms)


# Oracle

def _plus_state(n: int) -> np.ndarray:
    return np.full(2**n, 2 ** (-n / 2), dtype=complex)


def _zero_state(n: int) -> np.ndarray:
    psi = np.zeros(2**n, dtype=complex)
    psi[0] = 1
    return psi


def exact_gca_oracle(problem: GcaProblem) -> complex:
    limit = load_settings()["oracle_max_qubits"]
    if problem.n > limit:
        raise CeilingExceededError(
            f"Oracle needs n ≤ {limit}, got {problem.n}", {"n": problem.n, "ceiling": limit}
        )
    n = problem.n
    psi1 = gate_unitary(problem.u1, n) @ _plus_state(n)
    psi2 = gate_unitary(problem.u2, n) @ _zero_state(n)
    propagator = expm(-problem.beta * (problem.hamiltonian_matrix() + np.eye(2**n)))
    return complex(psi1.conj() @ propagator @ psi2)


# Pipeline

def _input_state(n: int) -> np.ndarray:
    """|+⟩⟨+|^{⊗(n+1)}, a 1/2-NDME of |+⟩^{⊗n}."""
    rho = np.array([[1]], dtype=complex)
    for _ in range(n + 1):
        rho = np.kron(rho, _PLUS)
    return rho


def _readout(rho: np.ndarray, n: int) -> tuple[float, float]:
    eye = np.eye(2**n)
    return float(np.trace(np.kron(_X, eye) @ rho).real), float(np.trace(np.kron(_Y, eye) @ rho).real)


def _plan(problem: GcaProblem, spec: DissipativeLindbladSpec) -> TruncationPlan:
    return plan_truncation(spec, problem.beta, problem.simulation_epsilon)


def _resources(problem: GcaProblem) -> dict:
    from .resource_model import theorem3_cost

    return theorem3_cost(
        problem.beta, problem.epsilon, problem.delta, problem.num_terms, problem.n, problem.n_h, problem.depth
    ).to_dict()


def pipeline_output_state(problem: GcaProblem, order: Optional[int] = None) -> tuple[np.ndarray, TruncationPlan]:
    """ρ_out = C_{U₁†} ∘ e^{L_H β} ∘ C_{U₂}[ρ_in] with the Taylor-truncated evolution."""
    n = problem.n
    check_dense_ceiling(2 ** (n + 1), "pipeline state")
    spec = gibbs_lindbladian(problem)
    plan = plan_truncation(spec, problem.beta, problem.simulation_epsilon, order)
    c2 = cbe_kraus_channel(compile_circuit_cbe(problem.u2, n))
    c1 = cbe_kraus_channel(compile_circuit_cbe(adjoint_gates(problem.u1), n))
    rho = apply_channel(c2, _input_state(n))
    rho = apply_taylor_series(spec, rho, plan)
    rho = apply_channel(c1, rho)
    return rho, plan


def run_pipeline_exact(problem: GcaProblem, order: Optional[int] = None) -> GcaEstimate:
    rho, plan = pipeline_output_state(problem, order)
    raw_x, raw_y = _readout(rho, problem.n)
    scale = 1 / problem.amplification_factor
    estimate = GcaEstimate(
        re=raw_x * scale,
        im=-raw_y * scale,
        method="exact",
        amplification_factor=problem.amplification_factor,
        raw_x=raw_x,
        raw_y=raw_y,
        truncation_order=plan.K,
        resources=_resources(problem),
    )
    logger.info(f"Exact pipeline: GCA ≈ {estimate.value:.8g} (K={plan.K})")
    return estimate


def run_pipeline_shots(problem: GcaProblem, shots: int, seed: Optional[int] = None) -> GcaEstimate:
    """Sample the X and Y readouts with ``shots`` measurements each."""
    if shots < 1:
        raise InputError(f"shots must be at least 1, got {shots}")
    rho, plan = pipeline_output_state(problem)
    exact_x, exact_y = _readout(rho, problem.n)
    seed_x, seed_y = np.random.SeedSequence(seed).spawn(2)
    raw_x = shot_estimate(exact_x, shots, int(seed_x.generate_state(1)[0]))
    raw_y = shot_estimate(exact_y, shots, int(seed_y.generate_state(1)[0]))
    scale = 1 / problem.amplification_factor
    return GcaEstimate(
        re=raw_x * scale,
        im=-raw_y * scale,
        method="shots",
        amplification_factor=problem.amplification_factor,
        raw_x=raw_x,
        raw_y=raw_y,
        truncation_order=plan.K,
        shots=shots,
        resources=_resources(problem),
    )


def pipeline_superoperator(problem: GcaProblem) -> tuple[np.ndarray, TruncationPlan]:
    n = problem.n
    spec = gibbs_lindbladian(problem)
    plan = _plan(problem, spec)
    s2 = cbe_kraus_channel(compile_circuit_cbe(problem.u2, n)).superoperator()
    s1 = cbe_kraus_channel(compile_circuit_cbe(adjoint_gates(problem.u1), n)).superoperator()
    return s1 @ taylor_superoperator(spec, plan) @ s2, plan


def purified_output_state(problem: GcaProblem) -> tuple[np.ndarray, TruncationPlan]:
    """V|+⟩^{⊗(n+1)} for the Stinespring isometry V of the whole pipeline (environment first)."""
    superop, plan = pipeline_superoperator(problem)
    channel = kraus_from_superop(superop)
    iso = stinespring_purify(channel)
    psi_in = _plus_state(problem.n + 1)
    return iso @ psi_in, plan


def _reflection_pair(psi: np.ndarray, system_dim: int, projector: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """|0⟩_b|ψ⟩ and U_r|0⟩_b|ψ⟩ with U_r = I⊗Π + X⊗(I−Π), Π on the NDME qubit."""
    tensor = psi.reshape(-1, 2, system_dim // 2)
    projected = np.einsum("ab,ebr->ear", projector, tensor).reshape(-1)
    s1 = np.concatenate([psi, np.zeros_like(psi)])
    s2 = np.concatenate([projected, psi - projected])
    return s1, s2


def run_pipeline_mlae(problem: GcaProblem, seed: Optional[int] = None) -> GcaEstimate:
    """
    Estimate (1 + Tr_X)/2 and (1 + Tr_Y)/2 by MLAE on the purified output.

    The amplitude precision is chosen so each readout lands within ϵ/2 after division by
    the amplification factor.
    """
    n = problem.n
    system_dim = 2 ** (n + 1)
    check_dense_ceiling(system_dim**2, "pipeline superoperator")
    psi, plan = purified_output_state(problem)
    total_qubits = 1 + num_qubits_of(psi.size)
    limit = load_settings()["statevector_max_qubits"]
    if total_qubits > limit:
        raise CeilingExceededError(
            f"Purified pipeline needs {total_qubits} qubits, ceiling is {limit}",
            {"qubits": total_qubits, "ceiling": limit},
        )

    amplitude_eps = min(problem.estimation_epsilon * problem.amplification_factor / 2, 0.25)
    seed_x, seed_y = np.random.SeedSequence(seed).spawn(2)
    reports: list[EstimateReport] = []
    for projector, child in ((_PLUS, seed_x), ((np.eye(2) + _Y) / 2, seed_y)):
        s1, s2 = _reflection_pair(psi, system_dim, projector)
        child_seed = int(child.generate_state(1)[0])
        reports.append(mlae_from_states(s1, s2, amplitude_eps, problem.delta / 2, child_seed))

    raw_x, raw_y = (2 * r.amplitude - 1 for r in reports)
    near_boundary = any(r.amplitude < 2 * amplitude_eps for r in reports)
    if near_boundary:
        logger.warning("MLAE amplitude within 2ϵ of zero; the readout sign may be unreliable")
    scale = 1 / problem.amplification_factor
    return GcaEstimate(
        re=raw_x * scale,
        im=-raw_y * scale,
        method="mlae",
        amplification_factor=problem.amplification_factor,
        raw_x=raw_x,
        raw_y=raw_y,
        truncation_order=plan.K,
        queries=sum(r.queries for r in reports),
        near_boundary=near_boundary,
        resources=_resources(problem),
    )


def run_pipeline_all(
    problem: GcaProblem,
    methods: Sequence[Method] = ("exact", "shots", "mlae"),
    shots: int = 10_000,
    seed: Optional[int] = None,
    with_oracle: bool = True,
) -> dict[str, GcaEstimate]:
    oracle = exact_gca_oracle(problem) if with_oracle else None
    results: dict[str, GcaEstimate] = {}
    for method in methods:
        if method == "exact":
            estimate = run_pipeline_exact(problem)
        elif method == "shots":
            estimate = run_pipeline_shots(problem, shots, seed)
        elif method == "mlae":
            estimate = run_pipeline_mlae(problem, seed)
        else:
            raise InputError(f"Unknown method {method!r}")
        estimate.oracle = oracle
        results[method] = estimate
    return results


def random_gca_problem(
    n: int,
    num_terms: int,
    beta: float,
    depth: int,
    rng: np.random.Generator,
    epsilon: float = 1e-3,
) -> GcaProblem:
    """Random Hermitian Pauli terms and random {H,S,T,CNOT} circuits of ≤ ``depth`` gates each."""
    names = ["H", "S", "T"] + (["CNOT"] if n > 1 else [])
    terms = []
    for _ in range(num_terms):
        letters = "".join(rng.choice(list("IXYZ"), size=n))
        sign = PauliPhase.PLUS_ONE if rng.random() < 0.5 else PauliPhase.MINUS_ONE
        terms.append((float(rng.uniform(0.1, 1.0)), PauliString.from_letters(letters, sign)))

    def circuit() -> list[Gate]:
        gates = []
        for _ in range(int(rng.integers(0, depth + 1))):
            name = str(rng.choice(names))
            qubits = rng.choice(n, size=2 if name == "CNOT" else 1, replace=False)
            gates.append(Gate(name, tuple(int(q) for q in qubits)))
        return gates

    return GcaProblem.from_terms(n, terms, beta, circuit(), circuit(), epsilon)

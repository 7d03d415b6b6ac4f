"""
Verification Suite
==================

Oracle-equivalence checks run by ``dissim verify``. Every check is deterministic given
the seed and reports plain numbers, so two runs with the same seed produce identical
reports.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DissimError
from .gca_pipeline import (
    exact_gca_oracle,
    gibbs_lindbladian,
    hadamard_conjugated_hamiltonian,
    projected_block_evolution,
    random_gca_problem,
    run_pipeline_exact,
)
from .lindblad_engine import (
    DissipativeLindbladSpec,
    exact_superoperator,
    make_plan,
    taylor_superoperator,
    truncation_bound,
)
from .ndme_cbe import (
    CBE_GATES,
    H,
    I2,
    X,
    Y,
    Z,
    bell_frame,
    eta_upper_bound_estimate,
    gamma_upper_bound,
    gate_cbe,
    verify_cbe,
)
from .pauli_core import (
    LETTERS,
    BlockDiagPauli,
    PauliPhase,
    PauliString,
    multiply,
    product_tree,
    random_pauli,
)
from .purified_circuit import build_purified_circuit, index_width
from .quantum_linalg import choi_trace_distance, expm, random_unitary
from .resource_model import fit_depth_scaling

logger = logging.getLogger(__name__)


@dataclass
class CheckResult:
    name: str
    passed: bool
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "details": self.details}


@dataclass
class SuiteReport:
    seed: int
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failed(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "passed": self.passed,
            "failed": self.failed,
            "checks": [c.to_dict() for c in self.checks],
        }


def check_pauli_table(rng: np.random.Generator) -> CheckResult:
    """All 16 phased letters squared: 256 products against 2×2 matrices."""
    phased = [PauliString.from_letters(l, p) for l in LETTERS for p in PauliPhase]
    worst = max(
        float(np.max(np.abs(multiply(a, b).to_dense() - a.to_dense() @ b.to_dense())))
        for a in phased
        for b in phased
    )
    return CheckResult("pauli_product_table", worst == 0.0, {"pairs": 256, "max_residual": worst})


def check_pauli_random(rng: np.random.Generator, pairs: int = 10_000) -> CheckResult:
    worst = 0.0
    for _ in range(pairs):
        n = int(rng.integers(1, 7))
        a, b = random_pauli(n, rng), random_pauli(n, rng)
        worst = max(worst, float(np.max(np.abs(multiply(a, b).to_dense() - a.to_dense() @ b.to_dense()))))
    return CheckResult("pauli_random_products", worst <= 1e-12, {"pairs": pairs, "max_residual": worst})


def check_product_tree(rng: np.random.Generator, sequences: int = 1000, max_length: int = 4096) -> CheckResult:
    mismatches = 0
    bad_depths = 0
    for _ in range(sequences):
        n = int(rng.integers(1, 5))
        length = int(rng.integers(1, max_length + 1))
        seq = [random_pauli(n, rng) for _ in range(length)]
        folded = seq[0]
        for p in seq[1:]:
            folded = multiply(folded, p)
        result, trace = product_tree(seq)
        mismatches += result != folded
        bad_depths += trace.depth != (length - 1).bit_length()
    return CheckResult(
        "pauli_product_tree",
        mismatches == 0 and bad_depths == 0,
        {"sequences": sequences, "mismatches": mismatches, "depth_errors": bad_depths},
    )


def check_cbe_table(rng: np.random.Generator) -> CheckResult:
    expected_eta = {g: (1 / np.sqrt(2) if g == "H" else 1.0) for g in CBE_GATES}
    details = {}
    ok = True
    for g in CBE_GATES:
        channel = gate_cbe(g)
        report = verify_cbe(channel, tol=1e-12)
        eta_ok = abs(channel.eta - expected_eta[g]) < 1e-15
        details[g] = {**report.to_dict(), "eta": channel.eta}
        ok = ok and report.passed and eta_ok
    return CheckResult("cbe_table", ok, details)


def check_bell_identities(rng: np.random.Generator) -> CheckResult:
    u_b = bell_frame(1)
    cases = {"IX": (I2, X, X), "ZY": (Z, Y, Y), "ZZ": (Z, Z, Z)}
    residuals = {
        name: float(np.max(np.abs(u_b @ np.kron(a, b) @ u_b.conj().T - np.kron(I2, target))))
        for name, (a, b, target) in cases.items()
    }
    return CheckResult("bell_identities", max(residuals.values()) <= 1e-12, residuals)


def _random_spec(rng: np.random.Generator, n: int, M: int, pauli: bool) -> DissipativeLindbladSpec:
    rates = rng.uniform(0.1, 1.0, size=M)
    if pauli:
        # one block qubit when there is room for it
        block_qubits = 1 if n > 1 else 0
        ops = [
            BlockDiagPauli(tuple(random_pauli(n - block_qubits, rng) for _ in range(2**block_qubits)))
            for _ in range(M)
        ]
        return DissipativeLindbladSpec.from_pauli(rates, ops)
    return DissipativeLindbladSpec.from_dense(rates, [random_unitary(2**n, rng) for _ in range(M)])


def check_truncation_bound(rng: np.random.Generator) -> CheckResult:
    cases = 0
    violations = []
    for n in (1, 2):
        for M in (1, 2, 4):
            for pauli in (False, True):
                spec = _random_spec(rng, n, M, pauli)
                for t in (0.1, 0.5, 1.0, 2.0):
                    exact = exact_superoperator(spec, t)
                    T = spec.lindblad_norm * t
                    for eps in (1e-2, 1e-4, 1e-6):
                        plan = make_plan(T, eps)
                        distance = choi_trace_distance(exact, taylor_superoperator(spec, plan))
                        cases += 1
                        if distance > truncation_bound(T, plan.K) + 1e-12:
                            violations.append({"n": n, "M": M, "t": t, "eps": eps, "distance": distance})
    return CheckResult("truncation_bound", not violations, {"cases": cases, "violations": violations})


def check_gibbs_cbe(rng: np.random.Generator, instances: int = 20) -> CheckResult:
    worst = 0.0
    for _ in range(instances):
        n = int(rng.integers(1, 4))
        problem = random_gca_problem(n, int(rng.integers(1, 5)), 1.0, 0, rng)
        spec = gibbs_lindbladian(problem)
        h_prime = hadamard_conjugated_hamiltonian(problem)
        for beta in (0.5, 1.0, 2.0, 5.0):
            target = expm(-beta * (h_prime + np.eye(2**n)))
            worst = max(worst, float(np.max(np.abs(projected_block_evolution(spec, n, beta) - target))))
    return CheckResult("gibbs_one_cbe", worst <= 1e-8, {"instances": instances, "max_residual": worst})


def check_gca_oracle(rng: np.random.Generator, instances: int = 20, epsilon: float = 1e-3) -> CheckResult:
    worst = 0.0
    bound_violations = 0
    for _ in range(instances):
        n = int(rng.integers(1, 5))
        problem = random_gca_problem(n, int(rng.integers(1, 5)), float(rng.uniform(0, 3)), 6, rng, epsilon)
        oracle = exact_gca_oracle(problem)
        estimate = run_pipeline_exact(problem)
        worst = max(worst, abs(estimate.value - oracle))
        bound_violations += abs(oracle) > 1 / problem.amplification_factor + 1e-9
    return CheckResult(
        "gca_oracle",
        worst <= epsilon and bound_violations == 0,
        {"instances": instances, "max_error": worst, "bound_violations": bound_violations},
    )


def check_gamma_eta(rng: np.random.Generator) -> CheckResult:
    gamma_ok = True
    for n in range(1, 6):
        basis = np.zeros(2**n, dtype=complex)
        basis[int(rng.integers(2**n))] = 1
        plus = np.full(2**n, 2 ** (-n / 2), dtype=complex)
        gamma_ok &= abs(gamma_upper_bound(basis) - 2 ** (-n / 2 - 1)) < 1e-12
        gamma_ok &= abs(gamma_upper_bound(plus) - 0.5) < 1e-12
    eta_h = eta_upper_bound_estimate(H, samples=16, iterations=300).value
    eta_z = eta_upper_bound_estimate(Z, samples=16, iterations=300).value
    passed = bool(gamma_ok) and eta_h <= 1 / np.sqrt(2) + 1e-3 and eta_z >= 1 - 1e-3
    return CheckResult("gamma_eta_bounds", passed, {"gamma_exact": bool(gamma_ok), "eta_H": eta_h, "eta_Z": eta_z})


def check_depth_separation(rng: np.random.Generator) -> CheckResult:
    spec = DissipativeLindbladSpec.from_pauli([1.0], [BlockDiagPauli.parse(["+X", "-Z"])])
    ks = [2, 4, 8, 16, 32]
    depths: dict[str, list[int]] = {"theorem1": [], "theorem2": []}
    tally_errors = 0
    for K in ks:
        for mode in depths:
            circuit = build_purified_circuit(spec, 1.0, 1e-3, mode, order=K)  # type: ignore[arg-type]
            depths[mode].append(circuit.depth)
            expected = circuit.tallies["ancillas_as_constructed"]
            tally_errors += circuit.ancilla_count != expected
            if mode == "theorem1":
                tally_errors += circuit.ancilla_count != K * (1 + index_width(spec.num_jumps))
    linear = fit_depth_scaling(ks, depths["theorem1"], "linear")
    log = fit_depth_scaling(ks, depths["theorem2"], "log")
    passed = linear.r_squared > 0.99 and log.r_squared > 0.99 and tally_errors == 0
    return CheckResult(
        "depth_separation",
        passed,
        {"theorem1": linear.to_dict(), "theorem2": log.to_dict(), "depths": depths, "tally_errors": tally_errors},
    )


CHECKS: list[Callable[[np.random.Generator], CheckResult]] = [
    check_pauli_table,
    check_pauli_random,
    check_product_tree,
    check_cbe_table,
    check_bell_identities,
    check_truncation_bound,
    check_gibbs_cbe,
    check_gca_oracle,
    check_gamma_eta,
    check_depth_separation,
]


def run_suite(seed: int = 0, checks: list[Callable[[np.random.Generator], CheckResult]] | None = None) -> SuiteReport:
    """Run every check with its own child generator of ``seed``."""
    selected = checks if checks is not None else CHECKS
    children = np.random.SeedSequence(seed).spawn(len(selected))
    report = SuiteReport(seed)
    for check, child in zip(selected, children):
        name = check.__name__.removeprefix("check_")
        try:
            result = check(np.random.default_rng(child))
        except DissimError as exc:
            result = CheckResult(name, False, {"error": exc.to_dict()})
        logger.info(f"check {result.name}: {'PASS' if result.passed else 'FAIL'}")
        report.checks.append(result)
    return report

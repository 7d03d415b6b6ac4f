import functools
import json
import logging

import numpy as np
import pytest
from scipy.linalg import expm

from dissim.services.errors import CeilingExceededError, InputError
from dissim.services.gca_pipeline import (
    GcaProblem,
    adjoint_gates,
    circuit_depth,
    exact_gca_oracle,
    gibbs_lindbladian,
    hadamard_conjugated_hamiltonian,
    projected_block_evolution,
    random_gca_problem,
    run_pipeline_all,
    run_pipeline_exact,
    run_pipeline_mlae,
    run_pipeline_shots,
)
from dissim.services.lindblad_engine import apply_taylor_series, plan_truncation
from dissim.services.ndme_cbe import (
    X,
    Y,
    Gate,
    cbe_kraus_channel,
    compile_circuit_cbe,
    gate_unitary,
)
from dissim.services.pauli_core import parse_pauli
from dissim.services.quantum_linalg import apply_channel
from dissim.services.settings import override_settings


def _phase_problem(beta: float = 0.5, epsilon: float = 1e-3) -> GcaProblem:
    """H = Z on one qubit with ψ₂ = S·H|0⟩, so the GCA is (e^{−2β} + i)/2."""
    return GcaProblem.from_terms(1, [(1.0, "+Z")], beta, u2=[Gate("H", (0,)), Gate("S", (0,))], epsilon=epsilon)


def test_from_terms_normalizes():
    problem = GcaProblem.from_terms(2, [(2.0, "+ZZ"), (-1.0, "+XI"), (0.0, "+YY")], 0.5)
    assert problem.coefficient_norm == 3.0
    assert problem.beta == pytest.approx(1.5)
    assert problem.original_beta == 0.5
    assert [lam for lam, _ in problem.terms] == pytest.approx([2 / 3, 1 / 3])
    assert str(problem.terms[1][1]) == str(parse_pauli("-XI"))


def test_normalization_keeps_the_propagator():
    problem = GcaProblem.from_terms(2, [(2.0, "+ZZ"), (-1.0, "+XI")], 0.5)
    h = 2.0 * parse_pauli("+ZZ").to_dense() - parse_pauli("+XI").to_dense()
    np.testing.assert_allclose(
        problem.beta * problem.hamiltonian_matrix(), 0.5 * h, atol=1e-12
    )


def test_problem_validation():
    with pytest.raises(InputError):
        GcaProblem.from_terms(1, [(0.0, "+Z")], 1.0)
    with pytest.raises(InputError):
        GcaProblem(1, [(1.0, parse_pauli("+iZ"))], 1.0)
    with pytest.raises(InputError):
        GcaProblem(1, [(0.5, parse_pauli("+Z"))], 1.0)
    with pytest.raises(InputError):
        GcaProblem(1, [(1.0, parse_pauli("+ZZ"))], 1.0)
    with pytest.raises(InputError):
        GcaProblem.from_terms(1, [(1.0, "+Z")], 1.0, u1=[Gate("H", (1,))])
    with pytest.raises(InputError):
        GcaProblem.from_terms(1, [(1.0, "+Z")], -1.0)


def test_load(small_problem_file):
    problem = GcaProblem.load(small_problem_file)
    assert problem.n == 2
    assert problem.n_h == 2
    assert problem.depth == 4
    assert problem.amplification_factor == 1.0
    assert problem.to_dict()["hamiltonian"][1]["pauli"] == str(parse_pauli("-XI"))


@pytest.mark.parametrize(
    "payload",
    [
        {"n": 1, "beta": 1.0, "hamiltonian": []},
        {"n": 1, "beta": 1.0, "hamiltonian": [{"coeff": 1.0, "pauli": "ZZ"}]},
        {"n": 1, "beta": 1.0, "hamiltonian": [{"coeff": 1.0, "pauli": "Z"}], "u1": [{"g": "H", "q": [3]}]},
        {"n": 1, "beta": 1.0, "hamiltonian": [{"coeff": 1.0, "pauli": "Z"}], "u1": [{"g": "RX", "q": [0]}]},
        {"n": 1, "beta": -1.0, "hamiltonian": [{"coeff": 1.0, "pauli": "Z"}]},
    ],
)
def test_load_rejects_invalid_files(write_json, payload):
    with pytest.raises(InputError):
        GcaProblem.load(write_json("bad.json", payload))


def test_load_rejects_malformed_json(write_json):
    with pytest.raises(InputError):
        GcaProblem.load(write_json("bad.json", "{not json"))


def test_circuit_helpers():
    gates = [Gate("H", (0,)), Gate("CNOT", (0, 1)), Gate("T", (1,)), Gate("S", (0,))]
    assert circuit_depth(gates, 2) == 3
    assert circuit_depth([Gate("H", (0,)), Gate("H", (1,))], 2) == 1
    assert circuit_depth([], 3) == 0
    u = gate_unitary(gates, 2)
    np.testing.assert_allclose(gate_unitary(adjoint_gates(gates), 2), u.conj().T, atol=1e-12)


def test_oracle_closed_form():
    problem = _phase_problem(beta=0.5)
    assert exact_gca_oracle(problem) == pytest.approx((np.exp(-1.0) + 1j) / 2, abs=1e-12)


def test_oracle_ceiling(small_problem_file):
    problem = GcaProblem.load(small_problem_file)
    with override_settings(oracle_max_qubits=1):
        with pytest.raises(CeilingExceededError):
            exact_gca_oracle(problem)


def test_gibbs_lindbladian_encodes_propagator(small_problem_file):
    problem = GcaProblem.load(small_problem_file)
    spec = gibbs_lindbladian(problem)
    assert spec.num_jumps == problem.num_terms
    target = expm(-problem.beta * (hadamard_conjugated_hamiltonian(problem) + np.eye(4)))
    np.testing.assert_allclose(projected_block_evolution(spec, 2, problem.beta), target, atol=1e-10)


def test_generator_check_skip_is_logged(caplog):
    problem = GcaProblem.from_terms(5, [(1.0, "+ZZZZZ")], 0.5)
    with caplog.at_level(logging.DEBUG, logger="dissim.services.gca_pipeline"):
        spec = gibbs_lindbladian(problem)
    assert spec.num_jumps == 1
    assert any("Skipping the dense generator check" in r.getMessage() for r in caplog.records)


def test_exact_pipeline_matches_oracle(small_problem_file):
    problem = GcaProblem.load(small_problem_file)
    estimate = run_pipeline_exact(problem)
    assert abs(estimate.value - exact_gca_oracle(problem)) <= problem.epsilon
    assert abs(estimate.value) <= 1 + problem.epsilon
    assert estimate.resources is not None


def test_exact_pipeline_imaginary_sign():
    problem = _phase_problem(beta=0.5)
    estimate = run_pipeline_exact(problem)
    assert estimate.im == pytest.approx(0.5, abs=problem.epsilon)
    assert estimate.re == pytest.approx(np.exp(-1.0) / 2, abs=problem.epsilon)
    assert estimate.raw_y < 0


@pytest.mark.parametrize("n", [1, 2, 3])
def test_zero_beta_trivial_circuits(n):
    problem = GcaProblem.from_terms(n, [(1.0, "+" + "Z" * n)], 0.0)
    estimate = run_pipeline_exact(problem)
    assert estimate.re == pytest.approx(2 ** (-n / 2), abs=1e-12)
    assert estimate.im == pytest.approx(0.0, abs=1e-12)
    assert estimate.raw_x == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_random_problems_match_oracle(seed):
    rng = np.random.default_rng(seed)
    problem = random_gca_problem(2, 3, float(rng.uniform(0.1, 2.0)), 4, rng, epsilon=1e-3)
    estimate = run_pipeline_exact(problem)
    assert abs(estimate.value - exact_gca_oracle(problem)) <= problem.epsilon


def test_shot_pipeline(small_problem_file):
    problem = GcaProblem.load(small_problem_file)
    exact = run_pipeline_exact(problem)
    sampled = run_pipeline_shots(problem, 200_000, seed=5)
    assert abs(sampled.re - exact.re) < 0.02
    assert abs(sampled.im - exact.im) < 0.02
    assert sampled.shots == 200_000
    assert run_pipeline_shots(problem, 1000, seed=5).to_dict() == run_pipeline_shots(problem, 1000, seed=5).to_dict()
    with pytest.raises(InputError):
        run_pipeline_shots(problem, 0)


def test_mlae_pipeline():
    problem = _phase_problem(beta=0.3, epsilon=0.1)
    estimate = run_pipeline_mlae(problem, seed=2)
    assert abs(estimate.value - exact_gca_oracle(problem)) <= problem.epsilon
    assert estimate.queries > 0


def test_mlae_pipeline_success_rate():
    problem = _phase_problem(beta=1.0, epsilon=0.02)
    oracle = exact_gca_oracle(problem)
    values = [run_pipeline_mlae(problem, seed=s).value for s in range(100)]
    hits = sum(abs(v - oracle) <= problem.epsilon for v in values)
    assert hits >= 95


def test_mlae_pipeline_queries_double_when_epsilon_halves():
    coarse = run_pipeline_mlae(_phase_problem(beta=1.0, epsilon=0.02), seed=0)
    fine = run_pipeline_mlae(_phase_problem(beta=1.0, epsilon=0.01), seed=0)
    assert 1.6 <= fine.queries / coarse.queries <= 2.4


def _reversed_order_value(problem: GcaProblem) -> complex:
    """Apply C_{U₁†} before C_{U₂}, the wrong way round."""
    n = problem.n
    spec = gibbs_lindbladian(problem)
    plan = plan_truncation(spec, problem.beta, problem.simulation_epsilon)
    c1 = cbe_kraus_channel(compile_circuit_cbe(adjoint_gates(problem.u1), n))
    c2 = cbe_kraus_channel(compile_circuit_cbe(problem.u2, n))
    rho = functools.reduce(np.kron, [np.full((2, 2), 0.5, dtype=complex)] * (n + 1))
    rho = apply_channel(c2, apply_taylor_series(spec, apply_channel(c1, rho), plan))
    eye = np.eye(2**n)
    raw_x = np.trace(np.kron(X, eye) @ rho).real
    raw_y = np.trace(np.kron(Y, eye) @ rho).real
    return complex(raw_x, -raw_y) / problem.amplification_factor


def test_composition_order_matters():
    # <+|H e^{-β(Z+I)} S|0> differs from <+|S e^{-β(Z+I)} H|0> by about 0.53
    problem = GcaProblem.from_terms(1, [(1.0, "+Z")], 0.5, u1=[Gate("H", (0,))], u2=[Gate("S", (0,))])
    oracle = exact_gca_oracle(problem)
    assert abs(run_pipeline_exact(problem).value - oracle) <= problem.epsilon
    assert abs(_reversed_order_value(problem) - oracle) > 0.1


def test_mlae_pipeline_ceiling():
    problem = _phase_problem(beta=0.3, epsilon=0.1)
    with override_settings(statevector_max_qubits=3):
        with pytest.raises(CeilingExceededError):
            run_pipeline_mlae(problem, seed=0)


def test_run_all_attaches_oracle(small_problem_file):
    problem = GcaProblem.load(small_problem_file)
    results = run_pipeline_all(problem, ("exact", "shots"), shots=5000, seed=1)
    assert set(results) == {"exact", "shots"}
    oracle = exact_gca_oracle(problem)
    for estimate in results.values():
        assert estimate.oracle == oracle
        assert estimate.to_dict()["error"] == estimate.error
    json.dumps(results["exact"].to_dict())

    bare = run_pipeline_all(problem, ("exact",), with_oracle=False)
    assert bare["exact"].error is None
    assert "oracle" not in bare["exact"].to_dict()


def test_run_all_rejects_unknown_method(small_problem_file):
    problem = GcaProblem.load(small_problem_file)
    with pytest.raises(InputError):
        run_pipeline_all(problem, ("vqe",), with_oracle=False)  # type: ignore[arg-type]


def test_amplification_factor_scales_shot_error():
    # both problems read out the same raw value e^{-2}; only the amplification differs
    amplified = GcaProblem.from_terms(2, [(1.0, "+ZZ")], 1.0)
    plain = GcaProblem.from_terms(2, [(1.0, "+ZZ")], 1.0, u1=[Gate("H", (0,)), Gate("H", (1,))])
    assert amplified.amplification_factor == 2.0
    assert plain.amplification_factor == 1.0

    def mean_error(problem: GcaProblem) -> float:
        exact = run_pipeline_exact(problem).value
        return float(np.mean([abs(run_pipeline_shots(problem, 2000, seed=s).value - exact) for s in range(50)]))

    ratio = mean_error(plain) / mean_error(amplified)
    assert 1.0 <= ratio <= 4.0

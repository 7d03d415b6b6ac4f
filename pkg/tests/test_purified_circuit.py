import numpy as np
import pytest

from dissim.services.errors import CeilingExceededError, PreconditionError
from dissim.services.lindblad_engine import (
    DissipativeLindbladSpec,
    apply_taylor_series,
    plan_truncation,
    product_density,
    product_state,
)
from dissim.services.pauli_core import BlockDiagPauli
from dissim.services.purified_circuit import (
    build_purified_circuit,
    ceil_log2,
    index_width,
    reduced_system_state,
    simulate_circuit,
)
from dissim.services.quantum_linalg import random_unitary
from dissim.services.settings import override_settings

BLOCK_SPEC = DissipativeLindbladSpec.from_pauli([1.0], [BlockDiagPauli.parse(["+X", "-Z"])])


def test_widths():
    assert index_width(1) == 1
    assert index_width(3) == 2
    assert index_width(4) == 3
    assert [ceil_log2(k) for k in (0, 1, 2, 3, 4, 5, 8, 9)] == [0, 0, 1, 2, 2, 3, 3, 4]


@pytest.mark.parametrize("K", [1, 2, 5, 8])
def test_theorem1_depth_and_registers(K):
    spec = DissipativeLindbladSpec.from_pauli(
        [0.5, 0.3, 0.2], [BlockDiagPauli.parse(t) for t in (["+X", "-Z"], ["+Y", "+Y"], ["+Z", "+I"])]
    )
    circuit = build_purified_circuit(spec, 1.0, 1e-3, "theorem1", order=K)
    assert circuit.K == K
    assert circuit.depth == 2 + K * 3
    assert circuit.ancilla_count == K * (1 + index_width(3))
    assert circuit.ancilla_count == circuit.tallies["ancillas_as_constructed"] == circuit.tallies["ancillas_formula"]
    assert circuit.stage_depth("cF") == K * 3
    assert list(circuit.registers) == ["a"] + [f"b{k + 1}" for k in range(K)] + ["system"]
    assert circuit.system_qubits == tuple(range(circuit.num_qubits - 2, circuit.num_qubits))


@pytest.mark.parametrize("K", [1, 2, 3, 4, 8, 16])
def test_theorem2_depth_and_registers(K):
    circuit = build_purified_circuit(BLOCK_SPEC, 1.0, 1e-3, "theorem2", order=K)
    M, R, n = 1, 2, 1
    code_width = 4 * R * n
    assert circuit.depth == 2 + M + ceil_log2(K) + R
    assert circuit.stage_depth("U_P") == ceil_log2(K)
    assert circuit.stage_depth("T_F") == R
    assert circuit.ancilla_count == K + K * index_width(M) + (2 * K - 1) * code_width
    assert circuit.ancilla_count == circuit.tallies["ancillas_as_constructed"]
    assert circuit.tallies["ancillas_formula"] == K * (1 + index_width(M)) + 8 * R * n * K
    assert sum(1 for node in circuit.nodes if node.kind == "U_P") == K - 1


def test_single_step_theorem2_aliases_product_register():
    circuit = build_purified_circuit(BLOCK_SPEC, 1.0, 1e-3, "theorem2", order=1)
    assert circuit.registers["d"] == circuit.registers["c1"]


def test_zero_order_circuit_is_empty():
    circuit = build_purified_circuit(BLOCK_SPEC, 0.0, 1e-3)
    assert circuit.K == 0
    assert circuit.depth == 0
    assert circuit.layers() == []


def test_layers_cover_every_node():
    circuit = build_purified_circuit(BLOCK_SPEC, 1.0, 1e-3, "theorem2", order=5)
    layers = circuit.layers()
    assert len(layers) == circuit.depth
    assert sorted(i for layer in layers for i in layer) == list(range(len(circuit.nodes)))
    summary = circuit.to_dict()
    assert summary["node_counts"]["V_F"] == 5
    assert summary["depth"] == circuit.depth


def test_theorem2_needs_pauli_jumps(rng):
    spec = DissipativeLindbladSpec.from_dense([1.0], [random_unitary(2, rng)])
    with pytest.raises(PreconditionError):
        build_purified_circuit(spec, 1.0, 1e-3, "theorem2")


def test_theorem1_statevector_matches_channel(rng):
    spec = DissipativeLindbladSpec.from_dense([0.7, 0.5], [random_unitary(2, rng), random_unitary(2, rng)])
    circuit = build_purified_circuit(spec, 1.0, 1e-3, "theorem1", order=3)
    assert circuit.num_qubits == 10
    state = simulate_circuit(circuit, product_state("+"))
    assert np.linalg.norm(state) == pytest.approx(1.0)
    plan = plan_truncation(spec, 1.0, 1e-3, order=3)
    expected = apply_taylor_series(spec, product_density("+"), plan)
    np.testing.assert_allclose(reduced_system_state(circuit, state), expected, atol=1e-10)


def test_theorem2_statevector_matches_channel():
    spec = DissipativeLindbladSpec.from_pauli([1.0], [BlockDiagPauli.parse(["-iY"])])
    circuit = build_purified_circuit(spec, 0.8, 1e-3, "theorem2", order=2)
    assert circuit.num_qubits == 17
    with override_settings(statevector_max_qubits=17):
        state = simulate_circuit(circuit, product_state("+"))
    plan = plan_truncation(spec, 0.8, 1e-3, order=2)
    expected = apply_taylor_series(spec, product_density("+"), plan)
    np.testing.assert_allclose(reduced_system_state(circuit, state), expected, atol=1e-10)


def test_statevector_ceiling():
    circuit = build_purified_circuit(BLOCK_SPEC, 1.0, 1e-3, "theorem1", order=3)
    with override_settings(statevector_max_qubits=5):
        with pytest.raises(CeilingExceededError):
            simulate_circuit(circuit, product_state("00"))

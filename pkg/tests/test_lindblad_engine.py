import math

import numpy as np
import pytest

from dissim.models.files import LindbladSpecFile, matrix_to_json
from dissim.services.errors import CeilingExceededError, InputError, PreconditionError, ShapeMismatchError
from dissim.services.lindblad_engine import (
    DissipativeLindbladSpec,
    Jump,
    apply_taylor_series,
    average_density,
    build_taylor_channel,
    exact_evolution,
    exact_superoperator,
    fast_forward_apply,
    kraus_count,
    liouvillian_matrix,
    load_spec,
    make_plan,
    plan_truncation,
    product_density,
    product_state,
    sample_trajectories,
    sample_trajectory,
    spec_from_file,
    taylor_superoperator,
    truncation_bound,
    truncation_order,
)
from dissim.services.pauli_core import BlockDiagPauli, random_pauli
from dissim.services.quantum_linalg import (
    apply_superop,
    choi_trace_distance,
    expm,
    random_density_matrix,
    random_unitary,
    trace_norm,
)
from dissim.services.settings import override_settings


@pytest.fixture
def dense_spec(rng):
    return DissipativeLindbladSpec.from_dense([0.3, 0.9], [random_unitary(4, rng), random_unitary(4, rng)])


@pytest.fixture
def pauli_spec():
    return DissipativeLindbladSpec.from_pauli(
        [0.4, 0.6], [BlockDiagPauli.parse(["+X", "-Z"]), BlockDiagPauli.parse(["+iY", "+X"])]
    )


def test_truncation_order_examples():
    assert truncation_order(1.0, 1e-6) == 9
    assert truncation_order(0.0, 1e-6) == 0
    K = truncation_order(3.0, 1e-4)
    assert truncation_bound(3.0, K) <= 1e-4 < truncation_bound(3.0, K - 1)


def test_truncation_order_rejects_bad_input():
    with pytest.raises(InputError):
        truncation_order(-1.0, 1e-3)
    with pytest.raises(InputError):
        truncation_order(1.0, 0.0)


def test_plan_weights():
    plan = make_plan(2.0, 1e-6)
    assert sum(plan.weights) == pytest.approx(1.0)
    # C² = e^T / Σ_{k≤K} T^k/k!
    partial = sum(2.0**k / math.factorial(k) for k in range(plan.K + 1))
    assert plan.C**2 == pytest.approx(math.exp(2.0) / partial)
    assert plan.to_dict()["error_bound"] == truncation_bound(2.0, plan.K)


def test_order_override():
    assert make_plan(1.0, 1e-6, order=3).K == 3


def test_spec_properties(pauli_spec):
    assert pauli_spec.is_pauli
    assert pauli_spec.num_qubits == 2
    assert pauli_spec.num_blocks == 2 and pauli_spec.block_width == 1
    assert pauli_spec.lindblad_norm == pytest.approx(1.0)
    np.testing.assert_allclose(pauli_spec.probabilities, [0.4, 0.6])


def test_spec_validation():
    with pytest.raises(InputError):
        DissipativeLindbladSpec.from_dense([1.0], [np.array([[1, 1], [0, 1]])])
    with pytest.raises(InputError):
        DissipativeLindbladSpec.from_pauli([0.0], [BlockDiagPauli.parse(["+X"])])
    with pytest.raises(ShapeMismatchError):
        DissipativeLindbladSpec.from_pauli([1.0], [BlockDiagPauli.parse(["+X", "+Y", "+Z"])])
    with pytest.raises(InputError):
        Jump(1.0)


def test_exact_evolution_dephasing():
    spec = DissipativeLindbladSpec.from_pauli([0.5, 0.5], [BlockDiagPauli.parse(["+ZI"]), BlockDiagPauli.parse(["+IZ"])])
    rho = exact_evolution(spec, product_density("+0"), 1.0)
    assert rho[0, 2] == pytest.approx(0.5 * math.exp(-1.0))
    np.testing.assert_allclose(expm(liouvillian_matrix(spec)), exact_superoperator(spec, 1.0), atol=1e-12)


@pytest.mark.parametrize("t", [0.1, 0.5, 1.0, 2.0])
@pytest.mark.parametrize("eps", [1e-2, 1e-4, 1e-6])
def test_truncation_bound_holds(dense_spec, pauli_spec, t, eps):
    for spec in (dense_spec, pauli_spec):
        plan = plan_truncation(spec, t, eps)
        distance = choi_trace_distance(exact_superoperator(spec, t), taylor_superoperator(spec, plan))
        assert distance <= plan.error_bound + 1e-12
        assert plan.error_bound <= eps


def test_taylor_channel_routes_agree(dense_spec, rng):
    plan = plan_truncation(dense_spec, 0.8, 1e-3)
    channel = build_taylor_channel(dense_spec, 0.8, 1e-3, plan)
    assert len(channel.kraus_ops) == kraus_count(2, plan.K)
    assert channel.is_cptp()
    superop = taylor_superoperator(dense_spec, plan)
    np.testing.assert_allclose(channel.superoperator(), superop, atol=1e-12)
    rho = random_density_matrix(4, rng)
    np.testing.assert_allclose(apply_taylor_series(dense_spec, rho, plan), apply_superop(superop, rho), atol=1e-12)


def test_taylor_channel_at_time_zero_is_identity(dense_spec):
    channel = build_taylor_channel(dense_spec, 0.0, 1e-6)
    assert len(channel.kraus_ops) == 1
    np.testing.assert_allclose(channel.kraus_ops[0], np.eye(4))


def test_kraus_cap(dense_spec):
    with override_settings(kraus_cap=8):
        with pytest.raises(CeilingExceededError):
            build_taylor_channel(dense_spec, 2.0, 1e-6)


def test_fast_forward_order(pauli_spec):
    product, trace = fast_forward_apply(pauli_spec, [0, 1, 1, 0, 1])
    f0, f1 = pauli_spec.matrices
    np.testing.assert_allclose(product.to_dense(), f1 @ f0 @ f1 @ f1 @ f0, atol=1e-12)
    assert trace.depth == 3


def test_fast_forward_needs_pauli(dense_spec):
    with pytest.raises(PreconditionError):
        fast_forward_apply(dense_spec, [0])


def test_fast_forward_long_sequence(rng):
    ops = [BlockDiagPauli(tuple(random_pauli(2, rng) for _ in range(4))) for _ in range(3)]
    spec = DissipativeLindbladSpec.from_pauli([1.0, 1.0, 1.0], ops)
    seq = [int(i) for i in rng.integers(0, 3, size=1000)]
    dense = np.eye(16, dtype=complex)
    for i in seq:
        dense = spec.matrices[i] @ dense
    product, trace = fast_forward_apply(spec, seq, workers=2)
    np.testing.assert_allclose(product.to_dense(), dense, atol=1e-9)
    assert trace.depth == 10


def test_trajectories_independent_of_workers(pauli_spec):
    psi = product_state("+0")
    with override_settings(trajectory_batch=16):
        serial = sample_trajectories(pauli_spec, psi, 1.0, 1e-3, 100, seed=11, workers=1)
        parallel = sample_trajectories(pauli_spec, psi, 1.0, 1e-3, 100, seed=11, workers=4)
    assert [r.sequence for r in serial] == [r.sequence for r in parallel]
    assert [r.batch for r in serial][-1] == 6


def test_trajectory_average_approaches_channel():
    spec = DissipativeLindbladSpec.from_pauli([0.5, 0.5], [BlockDiagPauli.parse(["+ZI"]), BlockDiagPauli.parse(["+IZ"])])
    results = sample_trajectories(spec, product_state("+0"), 1.0, 1e-4, 4000, seed=3)
    plan = plan_truncation(spec, 1.0, 1e-4)
    expected = apply_taylor_series(spec, product_density("+0"), plan)
    assert 0.5 * trace_norm(average_density(results) - expected) < 0.05


def test_dense_and_pauli_paths_agree(pauli_spec):
    psi = product_state("+1")
    a = sample_trajectory(pauli_spec, psi, 1.0, 1e-3, rng_seed=5, path="dense")
    b = sample_trajectory(pauli_spec, psi, 1.0, 1e-3, rng_seed=5, path="pauli")
    assert a.sequence == b.sequence
    np.testing.assert_allclose(a.final_state, b.final_state, atol=1e-12)


def test_pauli_path_needs_pauli_spec(dense_spec):
    with pytest.raises(PreconditionError):
        sample_trajectory(dense_spec, product_state("00"), 1.0, 1e-3, path="pauli")


def test_spec_from_file_forms(rng):
    u = random_unitary(2, rng)
    data = LindbladSpecFile.model_validate(
        {"n": 1, "jumps": [{"g": 1.0, "dense": matrix_to_json(u)}, {"g": 0.5, "pauli_blocks": ["-Y"]}]}
    )
    spec = spec_from_file(data)
    assert not spec.is_pauli
    np.testing.assert_allclose(spec.matrices[0], u)


def test_spec_from_file_checks_width():
    data = LindbladSpecFile.model_validate({"n": 1, "jumps": [{"g": 1.0, "pauli_blocks": ["+X", "+Z"]}]})
    with pytest.raises(InputError):
        spec_from_file(data)


def test_load_spec(dephasing_spec_file, write_json):
    assert load_spec(dephasing_spec_file).num_jumps == 2
    with pytest.raises(InputError):
        load_spec(write_json("broken.json", "{not json"))
    with pytest.raises(InputError):
        load_spec(write_json("both.json", {"n": 1, "jumps": [{"g": 1, "pauli_blocks": ["+X"], "dense": [[[1, 0]]]}]}))

"""
Purified Circuit
================

Gate-DAG emission for the purified Taylor channel, with depth/width accounting and
optional statevector execution of small instances.

Register layout (qubit indices ascending): ``a`` (K unary time qubits), ``b1..bK`` (jump
index, ⌈log₂(M+1)⌉ each, value i selects jump i-1 and 0 means "no jump"), then in
theorem2 mode ``c1..cK`` (binary Pauli codes), the tree work registers and ``d`` (the
product code), and finally the system.

theorem1: U_T, K parallel controlled-U_g, then K sequential U_{F,k}, each expanded into M
controlled-F_i nodes (depth K·M).
theorem2: U_T, controlled-U_g, K parallel V_F tables (M nodes each), a U_P product tree
of depth ⌈log₂K⌉, then R block-controlled T_F nodes on the system.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np
from scipy.linalg import block_diag

from .errors import CeilingExceededError, PreconditionError
from .lindblad_engine import DissipativeLindbladSpec, TruncationPlan, plan_truncation
from .pauli_core import LETTER_CODES, LETTERS, PAULI_MATRICES, encode_binary, multiply_letters
from .quantum_linalg import apply_to_qubits, isometry_to_unitary
from .settings import load_settings

logger = logging.getLogger(__name__)

CircuitMode = Literal["theorem1", "theorem2"]


def index_width(num_jumps: int) -> int:
    """⌈log₂(M+1)⌉ qubits for a jump index including the 'no jump' value."""
    return max(1, math.ceil(math.log2(num_jumps + 1)))


def ceil_log2(k: int) -> int:
    return 0 if k <= 1 else (k - 1).bit_length()


@dataclass(frozen=True)
class GateNode:
    index: int
    name: str
    kind: str  # U_T | cU_g | cF | V_F | U_P | T_F
    qubits: tuple[int, ...]
    layer: int
    params: dict = field(default_factory=dict)


@dataclass
class PurifiedCircuit:
    mode: CircuitMode
    spec: DissipativeLindbladSpec
    plan: TruncationPlan
    registers: dict[str, tuple[int, ...]]
    nodes: list[GateNode] = field(default_factory=list)
    tallies: dict = field(default_factory=dict)

    @property
    def K(self) -> int:
        return self.plan.K

    @property
    def num_qubits(self) -> int:
        return sum(len(q) for q in self.registers.values())

    @property
    def system_qubits(self) -> tuple[int, ...]:
        return self.registers["system"]

    @property
    def depth(self) -> int:
        return max((node.layer for node in self.nodes), default=0)

    @property
    def ancilla_count(self) -> int:
        return self.num_qubits - len(self.system_qubits)

    def layers(self) -> list[list[int]]:
        schedule: list[list[int]] = [[] for _ in range(self.depth)]
        for node in self.nodes:
            schedule[node.layer - 1].append(node.index)
        return schedule

    def stage_depth(self, kind: str) -> int:
        return len({node.layer for node in self.nodes if node.kind == kind})

    def to_dict(self) -> dict:
        kinds = sorted({node.kind for node in self.nodes})
        return {
            "mode": self.mode,
            "K": self.K,
            "num_qubits": self.num_qubits,
            "depth": self.depth,
            "ancillas": self.ancilla_count,
            "registers": {name: list(qs) for name, qs in self.registers.items()},
            "stage_depths": {kind: self.stage_depth(kind) for kind in kinds},
            "node_counts": {kind: sum(1 for n in self.nodes if n.kind == kind) for kind in kinds},
            "tallies": dict(self.tallies),
        }


class _Builder:
    def __init__(self):
        self.registers: dict[str, tuple[int, ...]] = {}
        self.nodes: list[GateNode] = []
        self._next = 0
        self._last: dict[int, int] = {}

    def register(self, name: str, width: int) -> tuple[int, ...]:
        qubits = tuple(range(self._next, self._next + width))
        self._next += width
        self.registers[name] = qubits
        return qubits

    def add(self, name: str, kind: str, qubits: tuple[int, ...], **params) -> GateNode:
        layer = 1 + max((self._last.get(q, 0) for q in qubits), default=0)
        for q in qubits:
            self._last[q] = layer
        node = GateNode(len(self.nodes), name, kind, qubits, layer, params)
        self.nodes.append(node)
        return node


def build_purified_circuit(
    spec: DissipativeLindbladSpec,
    t: float,
    epsilon: float,
    mode: CircuitMode = "theorem1",
    order: Optional[int] = None,
) -> PurifiedCircuit:
    """Emit the layered gate DAG; ``order`` fixes K directly for sweeps."""
    if mode not in ("theorem1", "theorem2"):
        raise PreconditionError(f"Unknown circuit mode {mode!r}")
    if mode == "theorem2" and not spec.is_pauli:
        raise PreconditionError("theorem2 circuits need block-diagonal Pauli jumps")

    plan = plan_truncation(spec, t, epsilon, order)
    K, M = plan.K, spec.num_jumps
    wb = index_width(M)
    builder = _Builder()

    a = builder.register("a", K)
    b = [builder.register(f"b{k + 1}", wb) for k in range(K)]
    code_width = 0
    c: list[tuple[int, ...]] = []
    work: list[tuple[int, ...]] = []
    if mode == "theorem2":
        code_width = 4 * spec.num_blocks * spec.block_width  # type: ignore[operator]
        c = [builder.register(f"c{k + 1}", code_width) for k in range(K)]
        for j in range(max(K - 1, 0)):
            work.append(builder.register("d" if j == K - 2 else f"t{j + 1}", code_width))
        if K == 1:
            builder.registers["d"] = c[0]
    system = builder.register("system", spec.num_qubits)

    if K:
        builder.add("U_T", "U_T", a)
    for k in range(K):
        builder.add(f"cU_g[{k + 1}]", "cU_g", (a[k],) + b[k])

    if mode == "theorem1":
        for k in range(K):
            for i in range(1, M + 1):
                builder.add(f"U_F[{k + 1}].F{i}", "cF", b[k] + system, step=k, value=i)
        tallies = {
            "queries_U_g": K,
            "queries_U_F": K,
            "ancillas_formula": K * (1 + wb),
            "ancillas_as_constructed": K + K * wb,
        }
    else:
        for k in range(K):
            for i in range(1, M + 1):
                builder.add(f"V_F[{k + 1}].{i}", "V_F", b[k] + c[k], step=k, value=i)
        # Latest factor on the left so the tree computes F_{i_K}···F_{i_1}.
        level = list(reversed(c))
        outputs = iter(work)
        tree_level = 0
        while len(level) > 1:
            tree_level += 1
            reduced = []
            for left, right in zip(level[0:len(level) - 1:2], level[1::2]):
                out = next(outputs)
                builder.add(f"U_P[L{tree_level}]", "U_P", left + right + out, level=tree_level, width=code_width)
                reduced.append(out)
            if len(level) % 2:
                reduced.append(level[-1])
            level = reduced
        if K:
            d = builder.registers["d"]
            block_bits = 4 * spec.block_width  # type: ignore[operator]
            for j in range(spec.num_blocks):  # type: ignore[arg-type]
                builder.add(f"T_F[{j}]", "T_F", d[j * block_bits:(j + 1) * block_bits] + system, block=j)
        R, n = spec.num_blocks, spec.block_width
        tallies = {
            "queries_U_g": K,
            "queries_V_F": K,
            "ancillas_formula": K * (1 + wb) + 8 * R * n * K,  # type: ignore[operator]
            "ancillas_as_constructed": K + K * wb + (2 * K - 1) * code_width if K else 0,
        }

    circuit = PurifiedCircuit(mode, spec, plan, builder.registers, builder.nodes, tallies)
    logger.info(
        f"Built {mode} circuit: K={K}, {circuit.num_qubits} qubits, depth {circuit.depth}, "
        f"{len(circuit.nodes)} nodes"
    )
    return circuit


# Statevector execution

def _unary_time_state(plan: TruncationPlan) -> np.ndarray:
    K = plan.K
    v = np.zeros(2**K, dtype=complex)
    for k, w in enumerate(plan.weights):
        index = sum(1 << (K - 1 - j) for j in range(k))  # |1^k 0^{K-k}⟩
        v[index] = np.sqrt(w)
    return v


def _slot_product(code1: str, code2: str) -> str:
    """Slot-wise product of two binary codes; each slot keeps its own phase."""
    out = []
    for s in range(0, len(code1), 4):
        p1, l1 = int(code1[s:s + 2], 2), LETTERS[int(code1[s + 2:s + 4], 2)]
        p2, l2 = int(code2[s:s + 2], 2), LETTERS[int(code2[s + 2:s + 4], 2)]
        phase, letter = multiply_letters(l1, l2)
        out.append(f"{(p1 + p2 + phase) % 4:02b}{LETTER_CODES[letter]:02b}")
    return "".join(out)


def _code_operator(bits: str) -> np.ndarray:
    """Dense i^{Σ slot phases} ⊗ letters for one block's code."""
    phase = 0
    op = np.array([[1]], dtype=complex)
    for s in range(0, len(bits), 4):
        phase += int(bits[s:s + 2], 2)
        op = np.kron(op, PAULI_MATRICES[LETTERS[int(bits[s + 2:s + 4], 2)]])
    return (1j ** (phase % 4)) * op


def _apply_permutation(state: np.ndarray, perm: np.ndarray, targets: tuple[int, ...], n: int) -> np.ndarray:
    k = len(targets)
    tensor = np.moveaxis(state.reshape([2] * n), list(targets), list(range(k)))
    shape = tensor.shape
    local = tensor.reshape(2**k, -1)
    out = np.empty_like(local)
    out[perm] = local
    return np.moveaxis(out.reshape(shape), list(range(k)), list(targets)).reshape(-1)


def _node_action(circuit: PurifiedCircuit, node: GateNode, state: np.ndarray, n: int) -> np.ndarray:
    spec = circuit.spec
    M = spec.num_jumps
    wb = index_width(M)
    if node.kind == "U_T":
        return apply_to_qubits(state, isometry_to_unitary(_unary_time_state(circuit.plan)), node.qubits, n)
    if node.kind == "cU_g":
        v = np.zeros(2**wb, dtype=complex)
        v[1:M + 1] = np.sqrt(spec.probabilities)
        return apply_to_qubits(state, block_diag(np.eye(2**wb), isometry_to_unitary(v)), node.qubits, n)
    if node.kind == "cF":
        blocks = [
            spec.matrices[node.params["value"] - 1] if value == node.params["value"] else np.eye(spec.dim)
            for value in range(2**wb)
        ]
        return apply_to_qubits(state, block_diag(*blocks), node.qubits, n)
    if node.kind == "V_F":
        width = len(node.qubits) - wb
        code = encode_binary(spec.jumps[node.params["value"] - 1].pauli).as_int  # type: ignore[arg-type]
        idx = np.arange(2 ** len(node.qubits))
        b_val, y = idx >> width, idx & ((1 << width) - 1)
        perm = np.where(b_val == node.params["value"], (b_val << width) | (y ^ code), idx)
        return _apply_permutation(state, perm, node.qubits, n)
    if node.kind == "U_P":
        width = node.params["width"]
        size = 1 << width
        products = np.array(
            [
                int(_slot_product(format(x1, f"0{width}b"), format(x2, f"0{width}b")), 2)
                for x1 in range(size)
                for x2 in range(size)
            ]
        )
        idx = np.arange(size**3)
        x12, y = idx >> width, idx & (size - 1)
        perm = (x12 << width) | (y ^ products[x12])
        return _apply_permutation(state, perm, node.qubits, n)
    if node.kind == "T_F":
        R, n_block = spec.num_blocks, spec.block_width
        block_bits = 4 * n_block  # type: ignore[operator]
        j = node.params["block"]
        selector = np.zeros((R, R))  # type: ignore[arg-type]
        selector[j, j] = 1
        rest = np.eye(R) - selector  # type: ignore[arg-type]
        blocks = [
            np.kron(selector, _code_operator(format(x, f"0{block_bits}b"))) + np.kron(rest, np.eye(2**n_block))  # type: ignore[operator]
            for x in range(2**block_bits)
        ]
        return apply_to_qubits(state, block_diag(*blocks), node.qubits, n)
    raise PreconditionError(f"Unknown node kind {node.kind!r}")


def simulate_circuit(circuit: PurifiedCircuit, psi0: np.ndarray) -> np.ndarray:
    """Run the DAG on |0…0⟩ ⊗ |ψ0⟩ and return the full statevector."""
    n = circuit.num_qubits
    limit = load_settings()["statevector_max_qubits"]
    if n > limit:
        raise CeilingExceededError(
            f"Statevector execution needs {n} qubits, ceiling is {limit}", {"qubits": n, "ceiling": limit}
        )
    psi = np.asarray(psi0, dtype=complex).reshape(-1)
    state = np.zeros(2 ** (n - len(circuit.system_qubits)), dtype=complex)
    state[0] = 1
    state = np.kron(state, psi)
    for node in circuit.nodes:
        state = _node_action(circuit, node, state, n)
    return state


def reduced_system_state(circuit: PurifiedCircuit, state: np.ndarray) -> np.ndarray:
    """Trace out every register except the system (which is last)."""
    amplitudes = state.reshape(-1, 2 ** len(circuit.system_qubits))
    return amplitudes.T @ amplitudes.conj()

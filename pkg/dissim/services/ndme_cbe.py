"""
NDME and Channel Block Encodings
================================

Non-diagonal density-matrix encoding (an operator S stored as the upper-right block γS of
an (n+1)-qubit density matrix), the Pauli encoding that identifies I/X words with
computational basis states, and channel block encodings (CBEs): block-diagonal channels
ρ ↦ Σ diag(K_i, L_i) ρ diag(K_i, L_i)† that act on the encoded block as η·Q.

Frames: ``bell_frame(n)`` is U_B^{⊗n} on the row-major vectorization space, pairing
qubit k of the row index with qubit k of the column index. Its inverse restricted to the
all-zero first register is the isometry W whose column j is vec(P_j)/2^{n/2}, with P_j
the I/X word read from the bits of j.
"""

import functools
import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.optimize
from pydantic import ValidationError
from scipy.linalg import block_diag, hadamard

from ..models.files import CbeDumpFile, KrausPairEntry, matrix_from_json, matrix_to_json
from .errors import ConstructionError, InputError, InvalidStateError, PreconditionError
from .pauli_core import PauliPhase, PauliString
from .quantum_linalg import (
    KrausChannel,
    check_dense_ceiling,
    embed_operator,
    isometry_to_unitary,
    matrixize,
    num_qubits_of,
    stinespring_purify,
    vectorize,
)
from .settings import load_settings

logger = logging.getLogger(__name__)

CBE_TOLERANCE = 1e-10

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
S = np.diag([1, 1j])
T = np.diag([1, np.exp(1j * np.pi / 4)])
CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)

GATE_MATRICES: dict[str, np.ndarray] = {"H": H, "S": S, "T": T, "CNOT": CNOT}
GATE_ARITY = {"H": 1, "S": 1, "T": 1, "CNOT": 2}


def hadamard_transform(n: int) -> np.ndarray:
    """Had^{⊗n} as a dense matrix."""
    return hadamard(2**n).astype(complex) / np.sqrt(2**n)


# Frames

def _bell_pair() -> np.ndarray:
    """U_B = (H ⊗ I)·CNOT: maps vec(I)/√2, vec(X)/√2 to |00⟩, |01⟩."""
    return np.kron(H, I2) @ CNOT


@functools.lru_cache(maxsize=8)
def _bell_frame_cached(n: int) -> np.ndarray:
    check_dense_ceiling(4**n, "Bell frame")
    frame = np.eye(4**n, dtype=complex)
    u_b = _bell_pair()
    for k in range(n):
        frame = embed_operator(u_b, [k, n + k], 2 * n) @ frame
    frame.setflags(write=False)
    return frame


def bell_frame(n: int) -> np.ndarray:
    return _bell_frame_cached(n)


def pqc_isometry(n: int) -> np.ndarray:
    """W = U_B^{†⊗n}(|0⟩^{⊗n} ⊗ I); column j is vec(P_j)/2^{n/2}."""
    return bell_frame(n).conj().T[:, : 2**n]


def pqc_encode(state: np.ndarray) -> np.ndarray:
    """S = 2^{-n/2} Σ_j c_j P_j for the state Σ_j c_j |j⟩."""
    c = np.asarray(state, dtype=complex).reshape(-1)
    n = num_qubits_of(c.size)
    if abs(np.linalg.norm(c) - 1) > 1e-10:
        raise InvalidStateError("pqc_encode expects a normalized state", {"norm": float(np.linalg.norm(c))})
    return matrixize(pqc_isometry(n) @ c)


def pqc_decode(encoded: np.ndarray) -> np.ndarray:
    s = np.asarray(encoded, dtype=complex)
    n = num_qubits_of(s.shape[0])
    return pqc_isometry(n).conj().T @ vectorize(s)


def gamma_upper_bound(state: np.ndarray) -> float:
    """γ_S = 1 / (2‖Had^{⊗n}|S⟩‖₁)."""
    c = np.asarray(state, dtype=complex).reshape(-1)
    n = num_qubits_of(c.size)
    return float(1.0 / (2.0 * np.sum(np.abs(hadamard_transform(n) @ c))))


# NDME

@dataclass(frozen=True, eq=False)
class NdmeState:
    n: int
    rho: np.ndarray  # (n+1)-qubit density matrix, NDME qubit first
    gamma: float
    encoded_S: Optional[np.ndarray] = None

    @property
    def block(self) -> np.ndarray:
        d = 2**self.n
        return self.rho[:d, d:]

    def block_residual(self) -> float:
        if self.encoded_S is None:
            return float(np.max(np.abs(self.block)))
        return float(np.max(np.abs(self.block - self.gamma * self.encoded_S)))


def ndme_construct(state: np.ndarray, gamma: float) -> NdmeState:
    """
    Build ρ with upper-right block γS.

    In the Hadamard frame S is diagonal with entries χ = Had^{⊗n}|S⟩, so each 2×2 block
    (R_x, γχ_x; γχ_x*, R_x) is PSD with R_x = γ|χ_x| plus an even share of the leftover
    trace. This is feasible exactly when γ ≤ γ_S.
    """
    c = np.asarray(state, dtype=complex).reshape(-1)
    n = num_qubits_of(c.size)
    if gamma < 0:
        raise InputError(f"gamma must be nonnegative, got {gamma}")
    bound = gamma_upper_bound(c)
    if gamma > bound + 1e-12:
        raise InputError(f"gamma={gamma} exceeds the NDME bound {bound}", {"gamma": gamma, "bound": bound})

    had = hadamard_transform(n)
    chi = had @ c
    d = 2**n
    slack = max(0.0, 1.0 - 2.0 * gamma * float(np.sum(np.abs(chi)))) / (2 * d)
    diag = np.diag(gamma * np.abs(chi) + slack)
    encoded = pqc_encode(c)
    upper = gamma * encoded
    rho = np.block([[had @ diag @ had, upper], [upper.conj().T, had @ diag @ had]])
    ndme = NdmeState(n, rho, float(gamma), encoded)
    residual = ndme.block_residual()
    if residual > CBE_TOLERANCE:
        raise ConstructionError("NDME block does not match γS", {"residual": residual})
    return ndme


def ndme_amplitude(rho: np.ndarray, j: int) -> complex:
    """γ·⟨j|S⟩ read from Tr((X⊗P_j)ρ) and Tr((Y⊗P_j)ρ)."""
    m = np.asarray(rho, dtype=complex)
    n = num_qubits_of(m.shape[0]) - 1
    p_j = PauliString(n, 0, int(format(j, f"0{n}b")[::-1], 2), 0).to_dense()
    tr_x = np.trace(np.kron(X, p_j) @ m).real
    tr_y = np.trace(np.kron(Y, p_j) @ m).real
    return complex(tr_x - 1j * tr_y) / 2 ** (n / 2 + 1)


# Channel block encodings

@dataclass(frozen=True, eq=False)
class CbeChannel:
    pairs: tuple[tuple[np.ndarray, np.ndarray], ...]
    eta: float
    encoded_op: np.ndarray
    name: str = ""

    @property
    def dim(self) -> int:
        return self.encoded_op.shape[0]

    @property
    def n(self) -> int:
        return num_qubits_of(self.dim)

    def block_map(self) -> np.ndarray:
        """Σ K_i ⊗ conj(L_i): the action on the vectorized upper-right block."""
        return sum(np.kron(k, l.conj()) for k, l in self.pairs)


@dataclass
class CbeVerification:
    passed: bool
    residual: float  # max |W†(ΣK⊗L*)W − ηQ|
    cptp_residual: float
    strong_residual: float

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "residual": self.residual,
            "cptp_residual": self.cptp_residual,
            "strong_residual": self.strong_residual,
        }


def _pair_cptp_residual(c: CbeChannel) -> float:
    eye = np.eye(c.dim)
    k_sum = sum(k.conj().T @ k for k, _ in c.pairs)
    l_sum = sum(l.conj().T @ l for _, l in c.pairs)
    return float(max(np.max(np.abs(k_sum - eye)), np.max(np.abs(l_sum - eye))))


def verify_cbe(c: CbeChannel, tol: float = CBE_TOLERANCE) -> CbeVerification:
    w = pqc_isometry(c.n)
    full = c.block_map()
    projected = w.conj().T @ full @ w
    residual = float(np.max(np.abs(projected - c.eta * c.encoded_op)))
    strong = float(np.max(np.abs(w.conj().T @ full @ full @ w - projected @ projected)))
    cptp = _pair_cptp_residual(c)
    passed = residual <= tol and strong <= tol and cptp <= tol
    logger.debug(f"verify_cbe {c.name or '?'}: residual={residual:.2e} strong={strong:.2e} cptp={cptp:.2e}")
    return CbeVerification(passed, residual, cptp, strong)


def _table_entries() -> dict[str, tuple[list[tuple[np.ndarray, np.ndarray]], float, np.ndarray]]:
    """
    Kraus pairs (K, L) per gate, with the block acting as O ↦ Σ K O L†.

    L carries the complex conjugate of the usual phase-gate pairs: with row-major
    vectorization and the Bell frame above, the literal (I, Q)/√2, (X, XQ)/√2 pairs encode
    conj(Q). The conjugated CNOT permutes I/X words exactly like it permutes basis states,
    so the single unitary pair (Q, Q) already encodes it with η = 1.
    """
    hsh = H @ S @ H
    hth = H @ T @ H
    r2 = np.sqrt(2)

    def phase_gate(q: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
        return [(I2 / r2, q.conj() / r2), (X / r2, X @ q.conj() / r2)]

    hcnoth = np.kron(H, H) @ CNOT @ np.kron(H, H)
    return {
        "X": ([(I2, X)], 1.0, X),
        "Y": ([(Z, -Y)], 1.0, Y),
        "Z": ([(Z, Z)], 1.0, Z),
        "H": ([(I2 / 2, X / 2), (Z / 2, Z / 2), (X / 2, I2 / 2), (Y / 2, Y / 2)], 1 / r2, H),
        "HSH": (phase_gate(hsh), 1.0, hsh),
        "HTH": (phase_gate(hth), 1.0, hth),
        "HCNOTH": ([(hcnoth, hcnoth)], 1.0, hcnoth),
    }


CBE_GATES = ("X", "Y", "Z", "H", "HSH", "HTH", "HCNOTH")


def gate_cbe(gate: str) -> CbeChannel:
    """Optimal CBE of one elementary gate; ``HCNOTH`` is (H⊗H)·CNOT·(H⊗H)."""
    entries = _table_entries()
    if gate not in entries:
        raise InputError(f"No CBE construction for gate {gate!r}", {"supported": list(CBE_GATES)})
    pairs, eta, q = entries[gate]
    return CbeChannel(tuple(pairs), eta, q, gate)


def identity_cbe(n: int) -> CbeChannel:
    eye = np.eye(2**n, dtype=complex)
    return CbeChannel(((eye, eye),), 1.0, eye, "I")


def _compress_pairs(pairs: Sequence[tuple[np.ndarray, np.ndarray]]) -> tuple[tuple[np.ndarray, np.ndarray], ...]:
    """Unitarily mix the block-diagonal Kraus set down to its rank."""
    d = pairs[0][0].shape[0]
    stacked = np.stack([np.concatenate([k.reshape(-1), l.reshape(-1)]) for k, l in pairs])
    if stacked.shape[0] <= 2 * d:
        return tuple(pairs)
    _, s, vh = np.linalg.svd(stacked, full_matrices=False)
    keep = np.flatnonzero(s > 1e-13 * max(1.0, s[0]))
    rows = s[keep, None] * vh[keep]
    return tuple((r[: d * d].reshape(d, d), r[d * d:].reshape(d, d)) for r in rows)


def compose_cbe(c2: CbeChannel, c1: CbeChannel, check: bool = True) -> CbeChannel:
    """c2 ∘ c1: η = η₁η₂ and Q = Q₂Q₁; both operands must be strong CBEs."""
    if c1.dim != c2.dim:
        raise PreconditionError("Cannot compose CBEs on different qubit counts")
    if check:
        for c in (c1, c2):
            report = verify_cbe(c)
            if not report.passed:
                raise PreconditionError(
                    f"CBE {c.name or '?'} is not a verified strong CBE", report.to_dict()
                )
    pairs = [(k2 @ k1, l2 @ l1) for k2, l2 in c2.pairs for k1, l1 in c1.pairs]
    name = f"{c2.name}∘{c1.name}" if c1.name and c2.name else ""
    return CbeChannel(_compress_pairs(pairs), c1.eta * c2.eta, c2.encoded_op @ c1.encoded_op, name)


def tensor_cbe(a: CbeChannel, b: CbeChannel) -> CbeChannel:
    pairs = [(np.kron(ka, kb), np.kron(la, lb)) for ka, la in a.pairs for kb, lb in b.pairs]
    return CbeChannel(tuple(pairs), a.eta * b.eta, np.kron(a.encoded_op, b.encoded_op), f"{a.name}⊗{b.name}")


def embed_cbe(c: CbeChannel, targets: Sequence[int], n: int) -> CbeChannel:
    """Act on ``targets`` of an n-qubit register, identity elsewhere."""
    pairs = tuple((embed_operator(k, targets, n), embed_operator(l, targets, n)) for k, l in c.pairs)
    return CbeChannel(pairs, c.eta, embed_operator(c.encoded_op, targets, n), f"{c.name}{list(targets)}")


def cbe_kraus_channel(c: CbeChannel) -> KrausChannel:
    """Block-diagonal channel diag(K_i, L_i) with the NDME qubit first."""
    return KrausChannel(tuple(block_diag(k, l) for k, l in c.pairs))


def gate_stinespring(gate: str) -> np.ndarray:
    """Purification unitary of a gate's block-diagonal CBE channel."""
    return isometry_to_unitary(stinespring_purify(cbe_kraus_channel(gate_cbe(gate))))


# Circuits

@dataclass(frozen=True)
class Gate:
    name: str  # H | S | T | CNOT
    qubits: tuple[int, ...]

    def __post_init__(self):
        if self.name not in GATE_MATRICES:
            raise InputError(f"Unsupported gate {self.name!r}", {"supported": sorted(GATE_MATRICES)})
        if len(self.qubits) != GATE_ARITY[self.name] or len(set(self.qubits)) != len(self.qubits):
            raise InputError(f"Gate {self.name} needs {GATE_ARITY[self.name]} distinct qubits, got {list(self.qubits)}")
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))

    def to_dict(self) -> dict:
        return {"g": self.name, "q": list(self.qubits)}


# Gate → its Hadamard-conjugated CBE entry
_CONJUGATED_ENTRY = {"H": "H", "S": "HSH", "T": "HTH", "CNOT": "HCNOTH"}


def count_hadamards(gates: Sequence[Gate]) -> int:
    return sum(1 for g in gates if g.name == "H")


def gate_unitary(gates: Sequence[Gate], n: int) -> np.ndarray:
    """Dense U for a gate list applied in order."""
    u = np.eye(2**n, dtype=complex)
    for g in gates:
        if max(g.qubits) >= n:
            raise InputError(f"Gate {g.name}{list(g.qubits)} is outside {n} qubits")
        u = embed_operator(GATE_MATRICES[g.name], g.qubits, n) @ u
    return u


def compile_circuit_cbe(gates: Sequence[Gate], n: int) -> CbeChannel:
    """CBE of Had^{⊗n}·U·Had^{⊗n} with η = 2^{-n_h/2}."""
    result = identity_cbe(n)
    for g in gates:
        if max(g.qubits) >= n:
            raise InputError(f"Gate {g.name}{list(g.qubits)} is outside {n} qubits")
        layer = embed_cbe(gate_cbe(_CONJUGATED_ENTRY[g.name]), g.qubits, n)
        result = compose_cbe(layer, result, check=False)
    logger.info(
        f"Compiled {len(gates)} gates on {n} qubits: η={result.eta:.6g}, {len(result.pairs)} Kraus pairs"
    )
    return CbeChannel(result.pairs, result.eta, result.encoded_op, f"circuit[{len(gates)}]")


# Bounds

@dataclass
class EtaEstimate:
    value: float
    witness: np.ndarray

    def to_dict(self) -> dict:
        return {"value": self.value, "witness": matrix_to_json(self.witness.reshape(-1, 1))}


def _eta_ratio(had: np.ndarray, u: np.ndarray, c: np.ndarray) -> float:
    denom = float(np.sum(np.abs(had @ u @ c)))
    return float(np.sum(np.abs(had @ c))) / denom if denom > 0 else np.inf


def eta_upper_bound_estimate(
    u: np.ndarray,
    samples: Optional[int] = None,
    iterations: Optional[int] = None,
    seed: int = 0,
) -> EtaEstimate:
    """
    Multi-start Nelder-Mead estimate of inf_S ‖Had|S⟩‖₁ / ‖Had·U|S⟩‖₁.

    The result is attained at the returned witness, so it upper-bounds the infimum.
    Starts include the computational and Hadamard bases before random states.
    """
    op = np.asarray(u, dtype=complex)
    n = num_qubits_of(op.shape[0])
    if n > 3:
        raise PreconditionError(f"eta estimation is limited to 3 qubits, got {n}")
    settings = load_settings()
    samples = samples or settings["eta_samples"]
    iterations = iterations or settings["eta_iterations"]
    d = 2**n
    had = hadamard_transform(n)
    rng = np.random.default_rng(seed)

    def unpack(params: np.ndarray) -> np.ndarray:
        c = params[:d] + 1j * params[d:]
        norm = np.linalg.norm(c)
        return c / norm if norm > 0 else np.eye(d)[0].astype(complex)

    def objective(params: np.ndarray) -> float:
        return _eta_ratio(had, op, unpack(params))

    starts = [np.eye(d)[j].astype(complex) for j in range(d)]
    starts += [had[:, j] for j in range(d)]
    starts += [rng.normal(size=d) + 1j * rng.normal(size=d) for _ in range(max(samples - len(starts), 0))]

    best_value, best_state = np.inf, starts[0]
    for start in starts:
        c0 = start / np.linalg.norm(start)
        value0 = _eta_ratio(had, op, c0)
        if value0 < best_value:
            best_value, best_state = value0, c0
        result = scipy.optimize.minimize(
            objective,
            np.concatenate([c0.real, c0.imag]),
            method="Nelder-Mead",
            options={"maxiter": iterations, "xatol": 1e-9, "fatol": 1e-12},
        )
        if result.fun < best_value:
            best_value, best_state = float(result.fun), unpack(result.x)
    logger.info(f"eta estimate for {n}-qubit operator: {best_value:.6f} over {len(starts)} starts")
    return EtaEstimate(float(best_value), best_state)


# Gibbs jumps

_P0_LETTER = {"I": "I", "X": "I", "Y": "Z", "Z": "Z"}


def hamiltonian_jump_construction(q_prime: PauliString) -> tuple[PauliString, PauliString]:
    """
    (P0, P1) with U_B^{⊗n}(P0 ⊗ P1*)U_B^{†⊗n} = −I ⊗ Q'.

    P1 is the phase-free letters of Q'; the sign of Q' and the (−1)^{#Y} from conjugating
    Y are carried by P0.
    """
    if q_prime.phase not in (PauliPhase.PLUS_ONE, PauliPhase.MINUS_ONE):
        raise InputError(f"Q' must carry a real sign, got {q_prime}")
    letters = q_prime.letters
    p1 = PauliString.from_letters(letters)
    sign = 1 if q_prime.phase == PauliPhase.PLUS_ONE else -1
    p0_sign = -sign * (-1) ** q_prime.y_count
    p0 = PauliString.from_letters(
        "".join(_P0_LETTER[c] for c in letters),
        PauliPhase.PLUS_ONE if p0_sign > 0 else PauliPhase.MINUS_ONE,
    )

    n = q_prime.num_qubits
    frame = bell_frame(n)
    lhs = frame @ np.kron(p0.to_dense(), p1.to_dense().conj()) @ frame.conj().T
    rhs = -np.kron(np.eye(2**n), q_prime.to_dense())
    residual = float(np.max(np.abs(lhs - rhs)))
    if residual > CBE_TOLERANCE:
        raise ConstructionError(f"Jump construction failed for {q_prime}", {"residual": residual})
    return p0, p1


# Dump format

def cbe_to_dump(c: CbeChannel) -> dict:
    dump = CbeDumpFile(
        n=c.n,
        eta=c.eta,
        name=c.name or None,
        encoded_op=matrix_to_json(c.encoded_op),
        pairs=[KrausPairEntry(K=matrix_to_json(k), L=matrix_to_json(l)) for k, l in c.pairs],
    )
    return dump.model_dump(exclude_none=True)


def cbe_from_dump(data: dict) -> CbeChannel:
    try:
        dump = CbeDumpFile.model_validate(data)
    except ValidationError as exc:
        raise InputError("Invalid CBE dump", {"errors": exc.errors(include_url=False)}) from exc
    pairs = tuple((matrix_from_json(p.K), matrix_from_json(p.L)) for p in dump.pairs)
    dim = 2**dump.n
    if any(k.shape != (dim, dim) or l.shape != (dim, dim) for k, l in pairs):
        raise InputError(f"CBE pairs must be {dim}x{dim} for n={dump.n}")
    if dump.encoded_op is not None:
        q = matrix_from_json(dump.encoded_op)
    else:
        w = pqc_isometry(dump.n)
        projected = w.conj().T @ sum(np.kron(k, l.conj()) for k, l in pairs) @ w
        q = projected / dump.eta
    return CbeChannel(pairs, dump.eta, q, dump.name or "")

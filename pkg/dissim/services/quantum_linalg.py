"""
Quantum Linear Algebra
======================

Dense operators, density matrices and Kraus channels, with row-major vectorization
(|O⟩⟩ = Σ o_ij |i⟩|j⟩, so vec(A O B†) = (A ⊗ B*) vec(O)), Choi states, partial traces,
Stinespring purification and the matrix-exponential oracle.

Operators are plain ``numpy`` complex arrays. Every entry point checks the dense ceiling
from settings before allocating.
"""

import logging
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

import numpy as np
import numpy.typing as npt
import scipy.linalg

from .errors import CeilingExceededError, InvalidStateError, NotCPTPError, ShapeMismatchError
from .settings import Tolerance, get_tolerance, load_settings

logger = logging.getLogger(__name__)

DenseOperator = npt.NDArray[np.complex128]
DensityMatrix = npt.NDArray[np.complex128]
VectorizedOperator = npt.NDArray[np.complex128]


def num_qubits_of(dim: int) -> int:
    q = int(dim).bit_length() - 1
    if dim < 1 or (1 << q) != dim:
        raise ShapeMismatchError(f"Dimension {dim} is not a power of two")
    return q


def check_dense_ceiling(dim: int, what: str = "operator", max_dim: Optional[int] = None) -> None:
    limit = max_dim if max_dim is not None else load_settings()["dense_max_dim"]
    if dim > limit:
        raise CeilingExceededError(
            f"Dense {what} of dimension {dim} exceeds the ceiling {limit}",
            {"dim": dim, "ceiling": limit},
        )


def as_operator(matrix: npt.ArrayLike) -> DenseOperator:
    """Validate a square, finite, power-of-two-sized matrix."""
    op = np.asarray(matrix, dtype=complex)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise ShapeMismatchError(f"Expected a square matrix, got shape {op.shape}")
    num_qubits_of(op.shape[0])
    if not np.all(np.isfinite(op)):
        raise InvalidStateError("Operator has non-finite entries")
    return op


def is_unitary(op: np.ndarray, atol: float = 1e-10) -> bool:
    return np.allclose(op.conj().T @ op, np.eye(op.shape[0]), atol=atol)


def validate_unitary(op: npt.ArrayLike, atol: float = 1e-10) -> DenseOperator:
    u = as_operator(op)
    if not is_unitary(u, atol):
        raise InvalidStateError("Operator is not unitary", {"residual": unitarity_residual(u)})
    return u


def unitarity_residual(op: np.ndarray) -> float:
    return float(np.max(np.abs(op.conj().T @ op - np.eye(op.shape[0]))))


def validate_density_matrix(rho: npt.ArrayLike) -> DensityMatrix:
    """Check Hermiticity, unit trace and positivity within configured tolerances."""
    m = as_operator(rho)
    herm = float(np.max(np.abs(m - m.conj().T)))
    if herm > get_tolerance(Tolerance.HERMITIAN):
        raise InvalidStateError("Density matrix is not Hermitian", {"residual": herm})
    trace = complex(np.trace(m))
    if abs(trace - 1) > get_tolerance(Tolerance.TRACE):
        raise InvalidStateError("Density matrix trace is not 1", {"trace": trace.real})
    smallest = float(np.min(np.linalg.eigvalsh((m + m.conj().T) / 2)))
    if smallest < -get_tolerance(Tolerance.PSD):
        raise InvalidStateError("Density matrix is not positive semidefinite", {"min_eig": smallest})
    return m


def pure_density(psi: npt.ArrayLike) -> DensityMatrix:
    v = np.asarray(psi, dtype=complex).reshape(-1)
    return np.outer(v, v.conj())


# Vectorization

def vectorize(op: npt.ArrayLike) -> VectorizedOperator:
    return np.asarray(op, dtype=complex).reshape(-1).copy()


def matrixize(vec: npt.ArrayLike) -> DenseOperator:
    v = np.asarray(vec, dtype=complex).reshape(-1)
    d = int(round(np.sqrt(v.size)))
    if d * d != v.size:
        raise ShapeMismatchError(f"Vector of length {v.size} is not a vectorized square matrix")
    return v.reshape(d, d).copy()


def superop_of_map(a_list: Sequence[np.ndarray], b_list: Sequence[np.ndarray]) -> DenseOperator:
    """Σ A_i ⊗ conj(B_i), the matrix of O ↦ Σ A_i O B_i† on vectorized operators."""
    if len(a_list) != len(b_list) or not a_list:
        raise ShapeMismatchError("superop_of_map needs equally long, nonempty operator lists")
    dim = np.asarray(a_list[0]).shape[0]
    check_dense_ceiling(dim * dim, "superoperator")
    out = np.zeros((dim * dim, dim * dim), dtype=complex)
    for a, b in zip(a_list, b_list):
        a = np.asarray(a, dtype=complex)
        b = np.asarray(b, dtype=complex)
        if a.shape != (dim, dim) or b.shape != (dim, dim):
            raise ShapeMismatchError(f"Operator shapes {a.shape}, {b.shape} differ from ({dim}, {dim})")
        out += np.kron(a, b.conj())
    return out


def apply_superop(superop: np.ndarray, rho: np.ndarray) -> DenseOperator:
    return matrixize(superop @ vectorize(rho))


def expm(matrix: npt.ArrayLike) -> DenseOperator:
    """Scaling-and-squaring Padé exponential (scipy), guarded against overflow."""
    m = np.asarray(matrix, dtype=complex)
    if not np.all(np.isfinite(m)):
        raise InvalidStateError("expm input has non-finite entries")
    check_dense_ceiling(m.shape[0])
    out = scipy.linalg.expm(m)
    if not np.all(np.isfinite(out)):
        raise InvalidStateError("expm overflowed", {"norm": float(np.linalg.norm(m, 1))})
    return out


# Channels

@dataclass(frozen=True, eq=False)
class KrausChannel:
    """Channel ρ ↦ Σ A_i ρ A_i†."""
    kraus_ops: tuple[np.ndarray, ...]

    def __post_init__(self):
        ops = tuple(np.asarray(a, dtype=complex) for a in self.kraus_ops)
        if not ops:
            raise ShapeMismatchError("A channel needs at least one Kraus operator")
        shape = ops[0].shape
        if any(a.shape != shape for a in ops) or shape[0] != shape[1]:
            raise ShapeMismatchError("Kraus operators must be square and equally sized")
        object.__setattr__(self, "kraus_ops", ops)

    @classmethod
    def identity(cls, num_qubits: int) -> "KrausChannel":
        return cls((np.eye(2**num_qubits, dtype=complex),))

    @classmethod
    def unitary(cls, u: np.ndarray) -> "KrausChannel":
        return cls((np.asarray(u, dtype=complex),))

    @property
    def dim(self) -> int:
        return self.kraus_ops[0].shape[0]

    @property
    def num_qubits(self) -> int:
        return num_qubits_of(self.dim)

    def cptp_residual(self) -> float:
        total = sum(a.conj().T @ a for a in self.kraus_ops)
        return float(np.max(np.abs(total - np.eye(self.dim))))

    def is_cptp(self, tol: Optional[float] = None) -> bool:
        return self.cptp_residual() <= (tol if tol is not None else get_tolerance(Tolerance.CPTP))

    def superoperator(self) -> DenseOperator:
        return superop_of_map(self.kraus_ops, self.kraus_ops)

    def compose(self, first: "KrausChannel") -> "KrausChannel":
        """self ∘ first."""
        if first.dim != self.dim:
            raise ShapeMismatchError("Cannot compose channels of different dimensions")
        return KrausChannel(tuple(b @ a for b in self.kraus_ops for a in first.kraus_ops))


def apply_channel(channel: KrausChannel, rho: npt.ArrayLike, check: bool = True) -> DensityMatrix:
    m = np.asarray(rho, dtype=complex)
    if m.shape != (channel.dim, channel.dim):
        raise ShapeMismatchError(f"State of shape {m.shape} does not match channel dim {channel.dim}")
    if check:
        residual = channel.cptp_residual()
        if residual > get_tolerance(Tolerance.CPTP):
            raise NotCPTPError("Channel is not trace preserving", {"residual": residual})
    return sum(a @ m @ a.conj().T for a in channel.kraus_ops)


def compress_kraus(ops: Sequence[np.ndarray], tol: float = 1e-13) -> tuple[np.ndarray, ...]:
    """Equivalent Kraus set with at most d² elements (SVD of the stacked operators)."""
    stacked = np.stack([np.asarray(a, dtype=complex).reshape(-1) for a in ops])
    if stacked.shape[0] <= stacked.shape[1]:
        return tuple(np.asarray(a, dtype=complex) for a in ops)
    _, s, vh = np.linalg.svd(stacked, full_matrices=False)
    keep = s > tol * max(1.0, s[0])
    d = ops[0].shape[0]
    return tuple((s[j] * vh[j]).reshape(d, d) for j in np.flatnonzero(keep))


# Choi representation

def choi_state(channel: KrausChannel) -> DensityMatrix:
    """(C ⊗ I)[|Ω⟩⟨Ω|] with |Ω⟩ = Σ|ii⟩/√d; equals Σ vec(A)vec(A)†/d."""
    check_dense_ceiling(channel.dim**2, "Choi state")
    vecs = np.stack([a.reshape(-1) for a in channel.kraus_ops], axis=1)
    return (vecs @ vecs.conj().T) / channel.dim


def choi_from_superop(superop: np.ndarray) -> DensityMatrix:
    d2 = superop.shape[0]
    d = int(round(np.sqrt(d2)))
    # J[(a,i),(b,j)] = S[(a,b),(i,j)] / d
    return superop.reshape(d, d, d, d).transpose(0, 2, 1, 3).reshape(d2, d2) / d


def kraus_from_superop(superop: np.ndarray, tol: float = 1e-12) -> KrausChannel:
    """Minimal Kraus set from the Choi eigen-decomposition."""
    choi = choi_from_superop(superop)
    d = int(round(np.sqrt(choi.shape[0])))
    values, vectors = np.linalg.eigh((choi + choi.conj().T) / 2)
    ops = [
        np.sqrt(d * lam) * vectors[:, j].reshape(d, d)
        for j, lam in enumerate(values)
        if lam > tol
    ]
    if not ops:
        raise NotCPTPError("Superoperator has no positive Choi eigenvalues")
    if float(np.min(values)) < -1e-8:
        raise NotCPTPError("Superoperator is not completely positive", {"min_eig": float(np.min(values))})
    return KrausChannel(tuple(ops))


def trace_norm(matrix: np.ndarray) -> float:
    """Schatten-1 norm; Hermitian inputs use eigenvalues, others singular values."""
    m = np.asarray(matrix, dtype=complex)
    if np.allclose(m, m.conj().T, atol=1e-13):
        return float(np.sum(np.abs(np.linalg.eigvalsh((m + m.conj().T) / 2))))
    return float(np.sum(np.linalg.svd(m, compute_uv=False)))


ChannelLike = Union[KrausChannel, np.ndarray]


def _choi_of(channel: ChannelLike) -> DensityMatrix:
    if isinstance(channel, KrausChannel):
        return choi_state(channel)
    return choi_from_superop(np.asarray(channel, dtype=complex))


def choi_trace_distance(c1: ChannelLike, c2: ChannelLike) -> float:
    """‖J(C1) − J(C2)‖₁, a lower bound on the diamond distance. Superoperators accepted."""
    j1 = _choi_of(c1)
    j2 = _choi_of(c2)
    if j1.shape != j2.shape:
        raise ShapeMismatchError("Channels act on different dimensions")
    return trace_norm(j1 - j2)


# Subsystems

def partial_trace(rho: npt.ArrayLike, keep: Iterable[int]) -> DensityMatrix:
    """Trace out every qubit not in ``keep``; kept qubits stay in ascending order."""
    m = np.asarray(rho, dtype=complex)
    n = num_qubits_of(m.shape[0])
    kept = sorted(set(keep))
    if any(q < 0 or q >= n for q in kept):
        raise ShapeMismatchError(f"Qubit indices {kept} out of range for {n} qubits")
    tensor = m.reshape([2] * (2 * n))
    current = n
    for q in sorted(set(range(n)) - set(kept), reverse=True):
        tensor = np.trace(tensor, axis1=q, axis2=q + current)
        current -= 1
    dim = 2 ** len(kept)
    return tensor.reshape(dim, dim)


def embed_operator(op: npt.ArrayLike, targets: Sequence[int], num_qubits: int) -> DenseOperator:
    """Lift a k-qubit operator acting on ``targets`` (in that order) to ``num_qubits``."""
    u = np.asarray(op, dtype=complex)
    k = len(targets)
    if u.shape != (2**k, 2**k):
        raise ShapeMismatchError(f"Operator of shape {u.shape} does not act on {k} qubits")
    if len(set(targets)) != k or any(t < 0 or t >= num_qubits for t in targets):
        raise ShapeMismatchError(f"Invalid target qubits {list(targets)}")
    check_dense_ceiling(2**num_qubits)
    order = list(targets) + [q for q in range(num_qubits) if q not in targets]
    full = np.kron(u, np.eye(2 ** (num_qubits - k), dtype=complex))
    position = list(np.argsort(order))
    tensor = full.reshape([2] * (2 * num_qubits))
    tensor = tensor.transpose(position + [num_qubits + p for p in position])
    return tensor.reshape(2**num_qubits, 2**num_qubits)


def apply_to_qubits(state: np.ndarray, op: np.ndarray, targets: Sequence[int], num_qubits: int) -> np.ndarray:
    """Apply a k-qubit operator to a statevector without forming the full matrix."""
    k = len(targets)
    tensor = np.moveaxis(state.reshape([2] * num_qubits), list(targets), list(range(k)))
    shape = tensor.shape
    tensor = (op @ tensor.reshape(2**k, -1)).reshape(shape)
    return np.moveaxis(tensor, list(range(k)), list(targets)).reshape(-1)


# Purification

def isometry_to_unitary(v: npt.ArrayLike) -> DenseOperator:
    """Complete an isometry's columns to a unitary (extra columns span the complement)."""
    iso = np.asarray(v, dtype=complex)
    if iso.ndim == 1:
        iso = iso[:, None]
    complement = scipy.linalg.null_space(iso.conj().T)
    return np.hstack([iso, complement])


def stinespring_purify(channel: KrausChannel) -> DenseOperator:
    """
    Isometry V = Σ_i |i⟩_env ⊗ A_i with the environment as the leading register.

    The environment dimension is the Kraus count padded to a power of two; a single Kraus
    operator gives a one-dimensional environment.
    """
    residual = channel.cptp_residual()
    if residual > get_tolerance(Tolerance.CPTP):
        raise NotCPTPError("Cannot purify a channel that is not trace preserving", {"residual": residual})
    count = len(channel.kraus_ops)
    env_dim = 1 if count == 1 else 1 << (count - 1).bit_length()
    check_dense_ceiling(env_dim * channel.dim, "Stinespring isometry")
    iso = np.zeros((env_dim * channel.dim, channel.dim), dtype=complex)
    for i, a in enumerate(channel.kraus_ops):
        iso[i * channel.dim:(i + 1) * channel.dim] = a
    return iso


def random_unitary(dim: int, rng: np.random.Generator) -> DenseOperator:
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_density_matrix(dim: int, rng: np.random.Generator, rank: Optional[int] = None) -> DensityMatrix:
    g = rng.normal(size=(dim, rank or dim)) + 1j * rng.normal(size=(dim, rank or dim))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


def random_channel(num_qubits: int, num_kraus: int, rng: np.random.Generator) -> KrausChannel:
    """Random CPTP channel from a random isometry."""
    d = 2**num_qubits
    u = random_unitary(d * num_kraus, rng)
    iso = u[:, :d]
    return KrausChannel(tuple(iso[i * d:(i + 1) * d] for i in range(num_kraus)))

"""
Pauli Core
==========

Exact algebra for phased Pauli strings and block-diagonal Pauli operators.

A PauliString stores one global phase (a power of i) and two bit masks ``x`` and ``z``
packed into Python integers, so a product of two n-qubit strings costs a handful of
word-level AND/XOR/popcount operations. Letters map to (x, z) as I=(0,0), X=(1,0),
Y=(1,1), Z=(0,1); qubit q lives in bit q and qubit 0 is the leftmost tensor factor.
"""

import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Callable, Optional, Sequence, TypeVar

import numpy as np
from scipy.linalg import block_diag

from .errors import InputError, PreconditionError, ShapeMismatchError

logger = logging.getLogger(__name__)


class PauliPhase(IntEnum):
    """Global phase as a power of i; the value is the 2-bit binary code."""
    PLUS_ONE = 0    # 00
    PLUS_I = 1      # 01
    MINUS_ONE = 2   # 10
    MINUS_I = 3     # 11

    def to_complex(self) -> complex:
        return (1, 1j, -1, -1j)[self.value]

    def __str__(self) -> str:
        return ("+", "+i", "-", "-i")[self.value]


LETTERS = "IXYZ"
LETTER_CODES = {"I": 0, "X": 1, "Y": 2, "Z": 3}  # binary code order
_LETTER_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_BITS_LETTER = {bits: letter for letter, bits in _LETTER_BITS.items()}

PAULI_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

# Single-letter products: (row, column) -> (phase, letter)
LETTER_PRODUCT_TABLE: dict[tuple[str, str], tuple[PauliPhase, str]] = {
    ("I", "I"): (PauliPhase.PLUS_ONE, "I"),
    ("I", "X"): (PauliPhase.PLUS_ONE, "X"),
    ("I", "Y"): (PauliPhase.PLUS_ONE, "Y"),
    ("I", "Z"): (PauliPhase.PLUS_ONE, "Z"),
    ("X", "I"): (PauliPhase.PLUS_ONE, "X"),
    ("X", "X"): (PauliPhase.PLUS_ONE, "I"),
    ("X", "Y"): (PauliPhase.PLUS_I, "Z"),
    ("X", "Z"): (PauliPhase.MINUS_I, "Y"),
    ("Y", "I"): (PauliPhase.PLUS_ONE, "Y"),
    ("Y", "X"): (PauliPhase.MINUS_I, "Z"),
    ("Y", "Y"): (PauliPhase.PLUS_ONE, "I"),
    ("Y", "Z"): (PauliPhase.PLUS_I, "X"),
    ("Z", "I"): (PauliPhase.PLUS_ONE, "Z"),
    ("Z", "X"): (PauliPhase.PLUS_I, "Y"),
    ("Z", "Y"): (PauliPhase.MINUS_I, "X"),
    ("Z", "Z"): (PauliPhase.PLUS_ONE, "I"),
}

_TEXT_PATTERN = re.compile(r"^([+-]?)(i?)([IXYZ]+)$")


@dataclass(frozen=True, slots=True)
class PauliString:
    """Phased n-qubit Pauli string i^phase · P_0 ⊗ ... ⊗ P_{n-1}."""
    num_qubits: int
    phase: PauliPhase
    x: int
    z: int

    def __post_init__(self):
        if self.num_qubits < 1:
            raise InputError(f"Pauli strings need at least one qubit, got {self.num_qubits!r}")
        limit = 1 << self.num_qubits
        if self.x >= limit or self.z >= limit or self.x < 0 or self.z < 0:
            raise InputError(f"Invalid Pauli bit masks for {self.num_qubits} qubits")
        if not isinstance(self.phase, PauliPhase):
            object.__setattr__(self, "phase", PauliPhase(int(self.phase) % 4))

    @classmethod
    def identity(cls, num_qubits: int) -> "PauliString":
        return cls(num_qubits, PauliPhase.PLUS_ONE, 0, 0)

    @classmethod
    def from_letters(cls, letters: str, phase: PauliPhase | int = PauliPhase.PLUS_ONE) -> "PauliString":
        x = z = 0
        for q, letter in enumerate(letters):
            try:
                xb, zb = _LETTER_BITS[letter]
            except KeyError:
                raise InputError(f"Unknown Pauli letter {letter!r}") from None
            x |= xb << q
            z |= zb << q
        return cls(len(letters), PauliPhase(int(phase) % 4), x, z)

    def letter(self, qubit: int) -> str:
        return _BITS_LETTER[((self.x >> qubit) & 1, (self.z >> qubit) & 1)]

    @property
    def letters(self) -> str:
        return "".join(self.letter(q) for q in range(self.num_qubits))

    @property
    def y_count(self) -> int:
        return (self.x & self.z).bit_count()

    @property
    def weight(self) -> int:
        return (self.x | self.z).bit_count()

    def is_hermitian(self) -> bool:
        return self.phase in (PauliPhase.PLUS_ONE, PauliPhase.MINUS_ONE)

    def with_phase(self, phase: PauliPhase | int) -> "PauliString":
        return PauliString(self.num_qubits, PauliPhase(int(phase) % 4), self.x, self.z)

    def to_dense(self) -> np.ndarray:
        out = np.array([[self.phase.to_complex()]], dtype=complex)
        for q in range(self.num_qubits):
            out = np.kron(out, PAULI_MATRICES[self.letter(q)])
        return out

    def __str__(self) -> str:
        return format_pauli(self)


def parse_pauli(text: str) -> PauliString:
    """Parse the text form, e.g. ``"-iXZY"`` or ``"+Z"``."""
    match = _TEXT_PATTERN.match(text.strip())
    if not match:
        raise InputError(f"Malformed Pauli string {text!r}")
    sign, imag, letters = match.groups()
    code = (2 if sign == "-" else 0) + (1 if imag else 0)
    # "-i" is code 3 and "+i" is code 1
    return PauliString.from_letters(letters, PauliPhase(code))


def format_pauli(p: PauliString) -> str:
    return f"{p.phase}{p.letters}"


def multiply(a: PauliString, b: PauliString) -> PauliString:
    """Return a·b with exact phase tracking."""
    if a.num_qubits != b.num_qubits:
        raise ShapeMismatchError(
            f"Cannot multiply {a.num_qubits}-qubit and {b.num_qubits}-qubit Pauli strings"
        )
    x = a.x ^ b.x
    z = a.z ^ b.z
    # With P(x,z) = i^{x.z} X^x Z^z, commuting Z^{z_a} past X^{x_b} contributes (-1)^{z_a.x_b}.
    exponent = (
        a.phase
        + b.phase
        + (a.x & a.z).bit_count()
        + (b.x & b.z).bit_count()
        + 2 * (a.z & b.x).bit_count()
        - (x & z).bit_count()
    )
    return PauliString(a.num_qubits, PauliPhase(exponent % 4), x, z)


def multiply_letters(a: str, b: str) -> tuple[PauliPhase, str]:
    """Single-qubit product by table lookup."""
    return LETTER_PRODUCT_TABLE[(a, b)]


def complex_conjugate(p: PauliString) -> PauliString:
    """Elementwise conjugate: conj(i^k) = i^{-k}, and each Y contributes a sign."""
    return p.with_phase((-int(p.phase) + 2 * p.y_count) % 4)


def hadamard_conjugate(p: PauliString) -> PauliString:
    """Had^{⊗n} p Had^{⊗n}: X and Z swap, Y picks up a sign."""
    return PauliString(p.num_qubits, PauliPhase((int(p.phase) + 2 * p.y_count) % 4), p.z, p.x)


def random_pauli(num_qubits: int, rng: np.random.Generator, with_phase: bool = True) -> PauliString:
    x = int(rng.integers(0, 1 << num_qubits))
    z = int(rng.integers(0, 1 << num_qubits))
    phase = int(rng.integers(0, 4)) if with_phase else 0
    return PauliString(num_qubits, PauliPhase(phase), x, z)


@dataclass(frozen=True, slots=True)
class BlockDiagPauli:
    """Σ_j |j⟩⟨j| ⊗ P_j over R blocks sharing the same n qubits."""
    blocks: tuple[PauliString, ...]

    def __post_init__(self):
        if not self.blocks:
            raise InputError("BlockDiagPauli needs at least one block")
        object.__setattr__(self, "blocks", tuple(self.blocks))
        widths = {b.num_qubits for b in self.blocks}
        if len(widths) != 1:
            raise ShapeMismatchError(f"Blocks act on differing qubit counts: {sorted(widths)}")

    @classmethod
    def identity(cls, num_blocks: int, num_qubits: int) -> "BlockDiagPauli":
        return cls(tuple(PauliString.identity(num_qubits) for _ in range(num_blocks)))

    @classmethod
    def parse(cls, texts: Sequence[str]) -> "BlockDiagPauli":
        return cls(tuple(parse_pauli(t) for t in texts))

    @property
    def num_blocks(self) -> int:
        return len(self.blocks)

    @property
    def num_qubits(self) -> int:
        return self.blocks[0].num_qubits

    def to_dense(self) -> np.ndarray:
        return block_diag(*(b.to_dense() for b in self.blocks))

    def to_text(self) -> list[str]:
        return [format_pauli(b) for b in self.blocks]


def multiply_blockdiag(a: BlockDiagPauli, b: BlockDiagPauli) -> BlockDiagPauli:
    if a.num_blocks != b.num_blocks or a.num_qubits != b.num_qubits:
        raise ShapeMismatchError(
            f"Block shapes differ: R={a.num_blocks},n={a.num_qubits} vs R={b.num_blocks},n={b.num_qubits}"
        )
    return BlockDiagPauli(tuple(multiply(pa, pb) for pa, pb in zip(a.blocks, b.blocks)))


# Binary encoding

@dataclass(frozen=True, slots=True)
class PauliBinaryCode:
    """R blocks of n slots, each slot = 2 phase bits followed by 2 letter bits."""
    bits: str
    num_blocks: int
    num_qubits: int

    def __post_init__(self):
        if len(self.bits) != 4 * self.num_blocks * self.num_qubits:
            raise InputError(
                f"Binary code length {len(self.bits)} != 4*R*n = {4 * self.num_blocks * self.num_qubits}"
            )
        if set(self.bits) - {"0", "1"}:
            raise InputError("Binary code must contain only 0 and 1")

    @property
    def as_int(self) -> int:
        return int(self.bits, 2) if self.bits else 0


def encode_binary(f: BlockDiagPauli) -> PauliBinaryCode:
    """Expand to the 4Rn layout; the block phase sits in the first slot of each block."""
    chunks = []
    for block in f.blocks:
        for q in range(block.num_qubits):
            phase = int(block.phase) if q == 0 else 0
            chunks.append(f"{phase:02b}{LETTER_CODES[block.letter(q)]:02b}")
    return PauliBinaryCode("".join(chunks), f.num_blocks, f.num_qubits)


def decode_binary(
    code: PauliBinaryCode | str,
    num_blocks: Optional[int] = None,
    num_qubits: Optional[int] = None,
    strict: bool = True,
) -> BlockDiagPauli:
    """
    Inverse of encode_binary.

    With ``strict`` (default) any nonzero phase bits outside a block's first slot are
    rejected. Non-strict decoding sums the phases of all slots, which is how register
    contents produced by slot-wise multiplication are read back.
    """
    if isinstance(code, str):
        if num_blocks is None or num_qubits is None:
            raise InputError("num_blocks and num_qubits are required when decoding a raw bit string")
        code = PauliBinaryCode(code, num_blocks, num_qubits)

    letters_by_code = {v: k for k, v in LETTER_CODES.items()}
    blocks = []
    for j in range(code.num_blocks):
        phase = 0
        letters = []
        for q in range(code.num_qubits):
            offset = 4 * (j * code.num_qubits + q)
            slot_phase = int(code.bits[offset:offset + 2], 2)
            if q > 0 and slot_phase and strict:
                raise InputError(f"Nonzero phase bits in block {j}, slot {q}")
            phase += slot_phase
            letters.append(letters_by_code[int(code.bits[offset + 2:offset + 4], 2)])
        blocks.append(PauliString.from_letters("".join(letters), PauliPhase(phase % 4)))
    return BlockDiagPauli(tuple(blocks))


# Tree reduction

T = TypeVar("T")


@dataclass
class TreeTrace:
    """Statistics of a pairwise reduction."""
    depth: int = 0
    level_sizes: list[int] = field(default_factory=list)
    multiplications: int = 0


def _reduce_tree(
    items: Sequence[T], op: Callable[[T, T], T], workers: int = 1
) -> tuple[T, TreeTrace]:
    level = list(items)
    trace = TreeTrace(level_sizes=[len(level)])
    executor = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        while len(level) > 1:
            lefts = level[0:len(level) - 1:2]
            rights = level[1::2]
            if executor is not None and len(rights) > 1:
                reduced = list(executor.map(op, lefts, rights))
            else:
                reduced = [op(a, b) for a, b in zip(lefts, rights)]
            if len(level) % 2:
                reduced.append(level[-1])  # odd element promoted unchanged
            trace.multiplications += len(rights)
            trace.depth += 1
            level = reduced
            trace.level_sizes.append(len(level))
    finally:
        if executor is not None:
            executor.shutdown()
    return level[0], trace


def product_tree(seq: Sequence[PauliString], workers: int = 1) -> tuple[PauliString, TreeTrace]:
    """Product of ``seq`` (left to right) by a binary tree of depth ⌈log₂ len⌉."""
    if not seq:
        raise PreconditionError("product_tree needs a nonempty sequence")
    if len({p.num_qubits for p in seq}) != 1:
        raise ShapeMismatchError("product_tree needs a uniform qubit count")
    return _reduce_tree(seq, multiply, workers)


def blockdiag_product_tree(
    seq: Sequence[BlockDiagPauli], workers: int = 1
) -> tuple[BlockDiagPauli, TreeTrace]:
    if not seq:
        raise PreconditionError("blockdiag_product_tree needs a nonempty sequence")
    result, trace = _reduce_tree(seq, multiply_blockdiag, workers)
    logger.debug(f"Block-diagonal tree over {len(seq)} factors: depth {trace.depth}")
    return result, trace

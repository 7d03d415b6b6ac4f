"""
File Schemas
============

Validation models for every JSON document dissim reads or writes, plus the matrix
interchange helpers (row-major arrays of [re, im] pairs).
"""

from typing import List, Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator

MatrixJson = List[List[List[float]]]


def matrix_to_json(matrix: np.ndarray) -> MatrixJson:
    m = np.atleast_2d(np.asarray(matrix, dtype=complex))
    return [[[float(v.real), float(v.imag)] for v in row] for row in m]


def matrix_from_json(data: MatrixJson) -> np.ndarray:
    """Inverse of ``matrix_to_json``; raises ValueError on ragged or non-pair entries."""
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ValueError(f"Matrix must be rows of [re, im] pairs, got array of shape {arr.shape}")
    return arr[..., 0] + 1j * arr[..., 1]


# Lindbladian spec

class JumpEntry(BaseModel):
    """One jump: a rate and either Pauli blocks or a dense unitary."""
    g: float = Field(..., ge=0)
    pauli_blocks: Optional[List[str]] = Field(None, min_length=1)
    dense: Optional[MatrixJson] = None

    @model_validator(mode="after")
    def _one_form(self) -> "JumpEntry":
        if (self.pauli_blocks is None) == (self.dense is None):
            raise ValueError("a jump needs exactly one of 'pauli_blocks' or 'dense'")
        if self.pauli_blocks is not None:
            for text in self.pauli_blocks:
                if not text or text.lstrip("+-i").strip("IXYZ"):
                    raise ValueError(f"invalid Pauli text {text!r}")
        return self


class LindbladSpecFile(BaseModel):
    """Lindbladian spec; ``n`` counts the system qubits the jumps act on."""
    n: int = Field(..., ge=1, le=16)
    jumps: List[JumpEntry] = Field(..., min_length=1)


# GCA problem

class HamiltonianTermEntry(BaseModel):
    coeff: float
    pauli: str = Field(..., pattern=r"^[+-]?[IXYZ]+$")


class GateEntry(BaseModel):
    g: str = Field(..., pattern=r"^(H|S|T|CNOT)$")
    q: List[int] = Field(..., min_length=1, max_length=2)


class GcaProblemFile(BaseModel):
    n: int = Field(..., ge=1, le=12)
    beta: float = Field(..., ge=0)
    epsilon: float = Field(default=1e-3, gt=0, lt=1)
    delta: float = Field(default=0.05, gt=0, lt=1)
    hamiltonian: List[HamiltonianTermEntry] = Field(..., min_length=1)
    u1: List[GateEntry] = Field(default_factory=list)
    u2: List[GateEntry] = Field(default_factory=list)

    @model_validator(mode="after")
    def _widths(self) -> "GcaProblemFile":
        for term in self.hamiltonian:
            if len(term.pauli.lstrip("+-")) != self.n:
                raise ValueError(f"Pauli term {term.pauli!r} does not act on n={self.n} qubits")
        for gate in self.u1 + self.u2:
            if any(q < 0 or q >= self.n for q in gate.q):
                raise ValueError(f"gate {gate.g}{gate.q} is outside n={self.n} qubits")
        return self


# CBE dump

class KrausPairEntry(BaseModel):
    K: MatrixJson
    L: MatrixJson


class CbeDumpFile(BaseModel):
    n: int = Field(..., ge=1)
    eta: float = Field(..., gt=0, le=1)
    name: Optional[str] = None
    encoded_op: Optional[MatrixJson] = None
    pairs: List[KrausPairEntry] = Field(..., min_length=1)

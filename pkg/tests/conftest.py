"""Shared fixtures."""

import json

import numpy as np
import pytest

from dissim.services import settings


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture(autouse=True)
def isolated_settings(tmp_path, monkeypatch):
    """Keep tests away from ~/.dissim and from the caller's environment."""
    monkeypatch.setattr(settings, "SETTINGS_DIR", tmp_path / ".dissim")
    monkeypatch.setattr(settings, "SETTINGS_FILE", tmp_path / ".dissim" / "settings.json")
    monkeypatch.delenv("DISSIM_THREADS", raising=False)
    monkeypatch.delenv("DISSIM_DENSE_MAX_DIM", raising=False)


@pytest.fixture
def write_json(tmp_path):
    def write(name: str, payload) -> str:
        path = tmp_path / name
        path.write_text(payload if isinstance(payload, str) else json.dumps(payload))
        return str(path)

    return write


@pytest.fixture
def dephasing_spec_file(write_json):
    """Two-qubit dephasing: Z on each qubit at rate 0.5."""
    return write_json(
        "dephasing.json",
        {
            "n": 2,
            "jumps": [
                {"g": 0.5, "pauli_blocks": ["+ZI"]},
                {"g": 0.5, "pauli_blocks": ["+IZ"]},
            ],
        },
    )


@pytest.fixture
def small_problem_file(write_json):
    return write_json(
        "problem.json",
        {
            "n": 2,
            "beta": 0.7,
            "epsilon": 1e-3,
            "delta": 0.05,
            "hamiltonian": [{"coeff": 0.6, "pauli": "ZZ"}, {"coeff": -0.4, "pauli": "XI"}],
            "u1": [{"g": "H", "q": [0]}, {"g": "CNOT", "q": [0, 1]}],
            "u2": [{"g": "T", "q": [1]}, {"g": "H", "q": [1]}],
        },
    )

"""数値計算の設定管理

Ceilings, tolerances and worker counts shared by every engine. Values come from
``DEFAULT_SETTINGS``, overlaid by ``$DISSIM_HOME/settings.json`` and then by
environment variables: ``DISSIM_THREADS`` caps the worker count and
``DISSIM_DENSE_MAX_DIM`` replaces the dense ceiling.
"""

import functools
import json
import os
from contextlib import contextmanager
try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):
        def __str__(self) -> str:
            return str.__str__(self)
from pathlib import Path
from typing import Iterator, TypedDict

from .errors import InputError


class Tolerance(StrEnum):
    """許容誤差の種類"""

    HERMITIAN = "tol_herm"
    TRACE = "tol_trace"
    CPTP = "tol_cptp"
    PSD = "tol_psd"


class DissimSettings(TypedDict):
    """設定の型定義"""

    dense_max_dim: int
    kraus_cap: int
    statevector_max_qubits: int
    oracle_max_qubits: int
    tol_herm: float
    tol_trace: float
    tol_cptp: float
    tol_psd: float
    threads: int
    trajectory_batch: int
    mlae_shots_per_power: int
    mlae_safety: float
    eta_samples: int
    eta_iterations: int
    envelope_constant: float


SETTINGS_DIR = Path(os.environ.get("DISSIM_HOME", Path.home() / ".dissim"))
SETTINGS_FILE = SETTINGS_DIR / "settings.json"

DEFAULT_SETTINGS: DissimSettings = {
    "dense_max_dim": 4096,
    "kraus_cap": 2**16,
    "statevector_max_qubits": 14,
    "oracle_max_qubits": 8,
    "tol_herm": 1e-10,
    "tol_trace": 1e-10,
    "tol_cptp": 1e-9,
    "tol_psd": 1e-10,
    "threads": os.cpu_count() or 1,
    "trajectory_batch": 1024,
    "mlae_shots_per_power": 64,
    "mlae_safety": 1.5,
    "eta_samples": 64,
    "eta_iterations": 500,
    "envelope_constant": 4.0,
}

# Overrides installed by override_settings(); take precedence over file and env.
_overrides: dict = {}


@functools.lru_cache(maxsize=8)
def _read_settings_file(path: Path, mtime_ns: int, size: int) -> dict:
    """設定ファイルを読み込む (更新時刻とサイズでキャッシュ)"""
    try:
        with open(path) as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise InputError(f"Settings file {path} is not valid JSON: {e}", {"path": str(path)}) from e
    if not isinstance(data, dict):
        raise InputError(f"Settings file {path} must hold a JSON object", {"path": str(path)})
    return data


def _env_int(name: str) -> int | None:
    value = os.environ.get(name)
    if not value:
        return None
    try:
        return int(value)
    except ValueError:
        raise InputError(f"{name} must be an integer, got {value!r}", {"variable": name}) from None


def load_settings() -> DissimSettings:
    """設定を読み込む"""
    settings: DissimSettings = DEFAULT_SETTINGS.copy()
    if SETTINGS_FILE.exists():
        stat = SETTINGS_FILE.stat()
        settings.update(_read_settings_file(SETTINGS_FILE, stat.st_mtime_ns, stat.st_size))  # type: ignore[typeddict-item]

    threads = _env_int("DISSIM_THREADS")
    if threads is not None:
        settings["threads"] = min(settings["threads"], max(1, threads))
    dense_max = _env_int("DISSIM_DENSE_MAX_DIM")
    if dense_max is not None:
        settings["dense_max_dim"] = dense_max

    settings.update(_overrides)  # type: ignore[typeddict-item]
    return settings


def save_settings(settings: DissimSettings) -> None:
    """設定を保存する"""
    SETTINGS_DIR.mkdir(parents=True, exist_ok=True)
    with open(SETTINGS_FILE, "w") as f:
        json.dump(settings, f, indent=2)


@contextmanager
def override_settings(**values) -> Iterator[DissimSettings]:
    """一時的に設定を上書きする"""
    unknown = set(values) - set(DEFAULT_SETTINGS)
    if unknown:
        raise KeyError(f"Unknown settings: {sorted(unknown)}")
    previous = dict(_overrides)
    _overrides.update(values)
    try:
        yield load_settings()
    finally:
        _overrides.clear()
        _overrides.update(previous)


def get_tolerance(kind: Tolerance) -> float:
    """許容誤差を取得"""
    return float(load_settings()[kind.value])  # type: ignore[literal-required]


def get_worker_count() -> int:
    """ワーカー数を取得 (DISSIM_THREADS で上限)"""
    return max(1, int(load_settings()["threads"]))

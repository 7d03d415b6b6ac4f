import json

import pytest
from click.testing import CliRunner

from dissim import __version__
from dissim.cli import main
from dissim.services import verification


@pytest.fixture
def runner():
    return CliRunner()


def _read(path) -> dict:
    with open(path) as f:
        return json.load(f)


def test_version(runner):
    result = runner.invoke(main, ["--version"])
    assert result.exit_code == 0
    assert __version__ in result.output


def test_simulate_channel(runner, dephasing_spec_file, tmp_path):
    out = tmp_path / "sim.json"
    result = runner.invoke(
        main, ["simulate", "--input", dephasing_spec_file, "--state", "+0", "--output", str(out)]
    )
    assert result.exit_code == 0, result.output
    payload = _read(out)
    assert payload["command"] == "simulate"
    assert payload["plan"]["K"] == 7
    assert payload["spec"] == {"n": 2, "M": 2, "lindblad_norm": 1.0, "pauli": True}
    assert payload["choi"]["satisfied"] is True
    assert payload["state"]["trace"] == pytest.approx(1.0, abs=1e-10)
    assert payload["state"]["trace_distance_to_exact"] <= 1e-4
    assert "generated_at" in payload


def test_simulate_zero_time_is_identity(runner, dephasing_spec_file, tmp_path):
    out = tmp_path / "sim.json"
    result = runner.invoke(main, ["simulate", "--input", dephasing_spec_file, "--time", "0", "--output", str(out)])
    assert result.exit_code == 0, result.output
    payload = _read(out)
    assert payload["plan"]["K"] == 0
    rho = payload["state"]["rho"]
    assert rho[0][0] == [1.0, 0.0]
    assert all(entry == [0.0, 0.0] for i, row in enumerate(rho) for j, entry in enumerate(row) if (i, j) != (0, 0))


def test_simulate_trajectories_ignores_thread_count(runner, dephasing_spec_file, tmp_path, monkeypatch):
    states = []
    for threads in ("1", "3"):
        monkeypatch.setenv("DISSIM_THREADS", threads)
        out = tmp_path / f"traj{threads}.json"
        args = ["simulate", "--input", dephasing_spec_file, "--state", "++", "--mode", "trajectories",
                "--shots", "200", "--seed", "3", "--output", str(out)]
        result = runner.invoke(main, args)
        assert result.exit_code == 0, result.output
        payload = _read(out)
        assert sum(payload["trajectories"]["order_counts"].values()) == 200
        states.append(payload["state"]["rho"])
    assert states[0] == states[1]


def test_bad_thread_variable_exits_with_input_error(runner, dephasing_spec_file, monkeypatch):
    monkeypatch.setenv("DISSIM_THREADS", "lots")
    args = ["simulate", "--input", dephasing_spec_file, "--mode", "trajectories", "--shots", "10"]
    result = runner.invoke(main, args)
    assert result.exit_code == 2
    assert '"invalid_input"' in result.output


def test_simulate_circuit(runner, dephasing_spec_file, tmp_path):
    out = tmp_path / "circuit.json"
    args = ["simulate", "--input", dephasing_spec_file, "--state", "++", "--time", "0.2", "--epsilon", "1e-2",
            "--mode", "circuit", "--output", str(out)]
    result = runner.invoke(main, args)
    assert result.exit_code == 0, result.output
    payload = _read(out)
    assert payload["circuit"]["cost"]["K"] == 2
    assert payload["circuit"]["envelope"]["passed"] is True
    assert payload["state"]["trace_distance_to_exact"] <= 1e-2


def test_simulate_circuit_over_ceiling(runner, dephasing_spec_file):
    result = runner.invoke(main, ["simulate", "--input", dephasing_spec_file, "--mode", "circuit"])
    assert result.exit_code == 3
    assert '"ceiling_exceeded"' in result.output


def test_simulate_bad_label(runner, dephasing_spec_file):
    result = runner.invoke(main, ["simulate", "--input", dephasing_spec_file, "--state", "0"])
    assert result.exit_code == 2
    assert '"invalid_input"' in result.output


@pytest.mark.parametrize(
    "payload",
    ["{broken", {"n": 2, "jumps": []}, {"n": 1, "jumps": [{"g": 1.0, "pauli_blocks": ["+ZZ"]}]}],
)
def test_simulate_rejects_bad_specs(runner, write_json, payload):
    result = runner.invoke(main, ["simulate", "--input", write_json("bad.json", payload)])
    assert result.exit_code == 2
    assert '"invalid_input"' in result.output


def test_gca_exact(runner, small_problem_file, tmp_path):
    out = tmp_path / "gca.json"
    result = runner.invoke(main, ["gca", "--input", small_problem_file, "--output", str(out)])
    assert result.exit_code == 0, result.output
    payload = _read(out)
    assert set(payload["estimates"]) == {"exact"}
    assert payload["oracle_check"]["within_epsilon"]["exact"] is True
    assert payload["problem"]["n_h"] == 2


def test_gca_no_oracle_with_override(runner, small_problem_file, tmp_path):
    out = tmp_path / "gca.json"
    args = ["gca", "--input", small_problem_file, "--method", "shots", "--shots", "500",
            "--epsilon", "0.05", "--no-oracle", "--output", str(out)]
    result = runner.invoke(main, args)
    assert result.exit_code == 0, result.output
    payload = _read(out)
    assert "oracle_check" not in payload
    assert payload["problem"]["epsilon"] == 0.05
    assert payload["estimates"]["shots"]["shots"] == 500


def test_gca_oracle_ceiling(runner, small_problem_file):
    result = runner.invoke(main, ["gca", "--input", small_problem_file, "--ceiling-qubits", "1"])
    assert result.exit_code == 3
    assert '"ceiling_exceeded"' in result.output


def test_resources_writes_csv_and_json(runner, tmp_path):
    prefix = tmp_path / "out" / "sweep"
    result = runner.invoke(main, ["resources", "--beta", "1", "--beta", "10", "--output", str(prefix)])
    assert result.exit_code == 0, result.output
    payload = _read(prefix.with_suffix(".json"))
    assert payload["crossover_beta"] == 1.0
    assert len(payload["rows"]) == 2
    assert prefix.with_suffix(".csv").read_text().startswith("method,param_point")


def test_resources_rejects_bad_alpha(runner):
    result = runner.invoke(main, ["resources", "--spectral-norm", "0.5", "--alpha", "0.9"])
    assert result.exit_code == 2
    assert '"invalid_input"' in result.output


def test_verify_pass(runner, monkeypatch, tmp_path):
    monkeypatch.setattr(verification, "CHECKS", [verification.check_pauli_table, verification.check_bell_identities])
    out = tmp_path / "verify.json"
    result = runner.invoke(main, ["verify", "--output", str(out)])
    assert result.exit_code == 0, result.output
    payload = _read(out)
    assert payload["passed"] is True
    assert "2/2 checks passed" in result.output


def test_verify_fail(runner, monkeypatch, tmp_path):
    def check_always_fails(rng):
        return verification.CheckResult("always_fails", False)

    monkeypatch.setattr(verification, "CHECKS", [check_always_fails])
    out = tmp_path / "verify.json"
    result = runner.invoke(main, ["verify", "--output", str(out)])
    assert result.exit_code == 1
    assert _read(out)["failed"] == ["always_fails"]

import pytest

import cli
from errors import NumericError
from utils import read_json_as_dict


@pytest.fixture
def error_file(tmp_path, monkeypatch):
    """Redirects every command's error file into tmp_path."""
    for name, command in list(cli.COMMANDS.items()):
        monkeypatch.setitem(
            cli.COMMANDS, name, command._replace(error_path=str(tmp_path / "errors" / f"{name}_error.txt"))
        )
    return lambda name: tmp_path / "errors" / f"{name}_error.txt"


@pytest.fixture
def scattering_config(write_config):
    return write_config(
        {
            "study": {"kind": "scattering"},
            "sweep": {"beta": 0.5, "ell": 1.0, "N_list": "16, 64, 256"},
            "tolerances": {"radial_points": 400},
        }
    )


def test_arguments_default_to_the_command_files():
    args = cli.parse_arguments(["suite", "--seed", "7"])
    assert args.command == "suite"
    assert args.seed == 7
    assert args.threads == 1
    assert args.config == cli.COMMANDS["suite"].config_path
    assert args.out is None


def test_unknown_command_is_rejected():
    with pytest.raises(SystemExit):
        cli.parse_arguments(["train"])


def test_successful_run_returns_zero(tmp_path, scattering_config, error_file):
    out = tmp_path / "results"
    code = cli.main(["scattering", "--config", scattering_config, "--out", str(out)])
    assert code == 0
    assert (out / "scattering.csv").exists()
    assert read_json_as_dict(str(out / "summary.json"))["rows"] == 3


def test_output_section_is_used_without_out_flag(tmp_path, write_config, error_file):
    out = tmp_path / "from_config"
    path = write_config(
        {
            "study": {"kind": "scattering"},
            "sweep": {"N_list": "16, 64, 256"},
            "tolerances": {"radial_points": 400},
            "output": {"directory": str(out)},
        }
    )
    assert cli.run_command("scattering", config_path=path) == 0
    assert (out / "scattering.csv").exists()


def test_kind_mismatch_is_a_validation_error(tmp_path, scattering_config, error_file):
    code = cli.run_command("nls", config_path=scattering_config, output_dir=str(tmp_path))
    assert code == 2
    assert "study.kind" in error_file("nls").read_text(encoding="utf-8")


def test_invalid_config_is_a_validation_error(tmp_path, write_config, error_file):
    path = write_config({"study": {"kind": "scattering"}, "sweep": {"N_list": "64, 16"}})
    assert cli.run_command("scattering", config_path=path, output_dir=str(tmp_path)) == 2
    assert error_file("scattering").exists()


def test_thread_count_must_be_positive(tmp_path, scattering_config, error_file):
    assert cli.run_command("scattering", scattering_config, str(tmp_path), threads=0) == 2


def test_numerical_failure_exits_with_three(tmp_path, scattering_config, error_file, monkeypatch):
    def diverge(schema, output_dir, n_jobs=1):
        raise NumericError("quadrature failed")

    monkeypatch.setitem(cli.COMMANDS, "scattering", cli.COMMANDS["scattering"]._replace(runner=diverge))
    assert cli.run_command("scattering", scattering_config, str(tmp_path)) == 3
    assert "quadrature failed" in error_file("scattering").read_text(encoding="utf-8")


def test_unexpected_failure_exits_with_three(tmp_path, scattering_config, error_file, monkeypatch):
    def crash(schema, output_dir, n_jobs=1):
        raise KeyError("boom")

    monkeypatch.setitem(cli.COMMANDS, "scattering", cli.COMMANDS["scattering"]._replace(runner=crash))
    assert cli.run_command("scattering", scattering_config, str(tmp_path)) == 3

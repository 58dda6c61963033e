import os

import pytest

from config import paths
from data_models.config_validator import StudyKind, validate_config_dict
from errors import ConfigValidationError
from schema.experiment_schema import (
    ExperimentSchema,
    load_experiment_config,
    load_experiment_schema,
    load_saved_schema,
    save_schema,
)


def _nls_config(**sweep):
    config = {
        "study": {"kind": "nls_convergence"},
        "grid": {"dim": "1", "points": "256", "length": "8.0"},
        "sweep": {"beta": "0.5", "ell": "1.0", "N_list": ["16", "32", "64"], "times": ["0.5"]},
    }
    config["sweep"].update(sweep)
    return config


def _paths(exc):
    return [path for path, _ in exc.value.field_errors]


def test_valid_config_gets_defaults():
    config = validate_config_dict(_nls_config())
    assert config["study"]["kind"] == "nls_convergence"
    assert config["sweep"]["N_list"] == [16.0, 32.0, 64.0]
    assert config["potential"]["shape"] == "square_well"
    assert config["initial"]["width"] == 0.5
    assert config["tolerances"]["series_tol"] == 1e-10


def test_missing_study_section_is_reported():
    with pytest.raises(ConfigValidationError) as exc:
        validate_config_dict({"sweep": {"N_list": ["16"]}})
    assert "study" in _paths(exc)


def test_every_invalid_field_is_listed():
    config = _nls_config(beta="1.5", dt="-1")
    config["grid"]["points"] = "100"
    with pytest.raises(ConfigValidationError) as exc:
        validate_config_dict(config)
    assert {"sweep.beta", "sweep.dt", "grid.points"} <= set(_paths(exc))
    assert exc.value.exit_code == 2


@pytest.mark.parametrize(
    "n_list",
    [["32", "16"], ["16", "16"], ["-4", "16"]],
)
def test_n_list_must_be_positive_and_increasing(n_list):
    with pytest.raises(ConfigValidationError) as exc:
        validate_config_dict(_nls_config(N_list=n_list))
    assert "sweep.N_list" in _paths(exc)


def test_unknown_potential_shape_is_rejected():
    config = _nls_config()
    config["potential"] = {"shape": "gaussian"}
    with pytest.raises(ConfigValidationError) as exc:
        validate_config_dict(config)
    assert "potential.shape" in _paths(exc)


def test_unresolvable_n_names_the_largest_admissible_value():
    with pytest.raises(ConfigValidationError) as exc:
        validate_config_dict(_nls_config(N_list=["16", "512"]))
    messages = dict(exc.value.field_errors)
    assert "256" in messages["sweep.N_list"]


def test_support_must_fit_inside_ell():
    with pytest.raises(ConfigValidationError) as exc:
        validate_config_dict(_nls_config(N_list=["1", "16"]))
    assert "sweep.ell" in _paths(exc)


def test_grid_studies_need_a_grid():
    config = _nls_config()
    del config["grid"]
    with pytest.raises(ConfigValidationError) as exc:
        validate_config_dict(config)
    assert "grid" in _paths(exc)


def test_fluctuation_studies_limit_mode_count():
    config = _nls_config()
    config["study"]["kind"] = "fluctuation_comparison"
    config["grid"]["points"] = "1024"
    config["grid"]["length"] = "32.0"
    with pytest.raises(ConfigValidationError) as exc:
        validate_config_dict(config)
    assert "grid.points" in _paths(exc)


def test_property_suite_needs_no_sweep():
    config = validate_config_dict({"study": {"kind": "property_suite"}})
    assert config["sweep"] is None
    assert config["suite"]["modes"] == 64


def test_scattering_needs_a_sweep():
    with pytest.raises(ConfigValidationError) as exc:
        validate_config_dict({"study": {"kind": "scattering"}})
    assert "sweep" in _paths(exc)


def test_file_is_parsed_with_comments_and_lists(write_config):
    path = write_config(
        {
            "study": {"kind": "nls_convergence  # inline comment"},
            "sweep": {"N_list": "16, 32,64", "times": "0.5"},
        }
    )
    config = load_experiment_config(path)
    assert config["study"]["kind"] == "nls_convergence"
    assert config["sweep"]["N_list"] == ["16", "32", "64"]
    assert config["sweep"]["times"] == ["0.5"]


def test_missing_file_is_a_config_error(tmp_path):
    with pytest.raises(ConfigValidationError):
        load_experiment_config(str(tmp_path / "missing.cfg"))


def test_malformed_file_is_a_config_error(tmp_path):
    path = tmp_path / "broken.cfg"
    path.write_text("kind = scattering\n", encoding="utf-8")
    with pytest.raises(ConfigValidationError):
        load_experiment_config(str(path))


def test_schema_exposes_validated_values(write_config):
    path = write_config(
        {
            "study": {"kind": "nls_convergence"},
            "potential": {"shape": "parabolic", "strength": "2.0"},
            "grid": {"dim": "1", "points": "256", "length": "8.0"},
            "sweep": {"N_list": "16, 32, 64", "times": "0.25, 0.5"},
            "output": {"directory": "/tmp/runs"},
        }
    )
    schema = load_experiment_schema(path)
    assert schema.kind == StudyKind.NLS_CONVERGENCE.value
    assert schema.potential.name == "parabolic"
    assert schema.grid.mode_count == 256
    assert schema.n_list == [16.0, 32.0, 64.0]
    assert schema.times == [0.25, 0.5]
    assert schema.output_dir == "/tmp/runs"
    assert len(schema.config_hash) == 64


def test_config_hash_tracks_content():
    first = ExperimentSchema(validate_config_dict(_nls_config()))
    again = ExperimentSchema(validate_config_dict(_nls_config()))
    other = ExperimentSchema(validate_config_dict(_nls_config(dt="2e-3")))
    assert first.config_hash == again.config_hash
    assert first.config_hash != other.config_hash


def test_schema_round_trips_through_joblib(tmp_path):
    schema = ExperimentSchema(validate_config_dict(_nls_config()))
    assert schema.b0 > 0.0
    save_schema(schema, str(tmp_path))
    loaded = load_saved_schema(str(tmp_path))
    assert loaded.config == schema.config
    assert loaded.b0 == pytest.approx(schema.b0)


def test_suite_schema_has_no_sweep_parameters():
    schema = ExperimentSchema(validate_config_dict({"study": {"kind": "property_suite"}}))
    with pytest.raises(ConfigValidationError):
        schema.n_list


@pytest.mark.parametrize(
    "config_path",
    [
        paths.SCATTERING_CONFIG_FILE_PATH,
        paths.NLS_CONFIG_FILE_PATH,
        paths.KERNELS_CONFIG_FILE_PATH,
        paths.FLUCT_CONFIG_FILE_PATH,
        paths.SUITE_CONFIG_FILE_PATH,
    ],
)
def test_default_experiment_files_are_valid(config_path):
    assert os.path.isfile(config_path)
    load_experiment_schema(config_path)

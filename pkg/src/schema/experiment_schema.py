import configparser
import os
from typing import Dict, List, Optional

import joblib

from data_models.config_validator import validate_config_dict
from errors import ConfigValidationError
from physics.fields import Grid
from physics.scattering import PotentialSpec, potential_from_config
from utils import config_hash

SCHEMA_FILE_NAME = "schema.joblib"

# Keys whose values are always comma-separated lists, even with one entry
LIST_KEYS = {("sweep", "N_list"), ("sweep", "times")}


class ExperimentSchema:
    """
    A class for loading and providing access to a validated experiment
    configuration.

    Studies read every parameter through this class, so they never depend on
    the layout of the configuration file. Sections that a study does not use
    keep their defaults.
    """

    def __init__(self, config_dict: dict) -> None:
        """
        Initializes a new instance of the `ExperimentSchema` class from a
        validated configuration dictionary.

        Args:
            config_dict (dict): The validated configuration.
        """
        self.config = config_dict
        self._potential = None

    def __getstate__(self) -> dict:
        # potential profiles are closures and do not pickle
        return {"config": self.config, "_potential": None}

    @property
    def kind(self) -> str:
        """
        Gets the study kind.

        Returns:
            str: One of scattering, nls_convergence, kernel_convergence,
                fluctuation_comparison, property_suite.
        """
        return str(self.config["study"]["kind"])

    @property
    def potential(self) -> PotentialSpec:
        """
        Gets the unscaled potential.

        Returns:
            PotentialSpec: The potential built from the [potential] section.
        """
        if self._potential is None:
            section = self.config["potential"]
            self._potential = potential_from_config(
                str(section["shape"]), section["strength"], section["radius"]
            )
        return self._potential

    @property
    def b0(self) -> float:
        """
        Gets the Born coupling ∫V of the potential.

        Returns:
            float: b0.
        """
        return self.potential.b0

    @property
    def grid(self) -> Optional[Grid]:
        """
        Gets the simulation grid, if the configuration defines one.

        Returns:
            Optional[Grid]: The periodic grid.
        """
        grid = self.config.get("grid")
        if grid is None:
            return None
        return Grid(dim=grid["dim"], points=grid["points"], length=grid["length"])

    @property
    def beta(self) -> float:
        return self._sweep["beta"]

    @property
    def ell(self) -> float:
        return self._sweep["ell"]

    @property
    def n_list(self) -> List[float]:
        """
        Gets the sweep over N.

        Returns:
            List[float]: Strictly increasing particle numbers.
        """
        return list(self._sweep["N_list"])

    @property
    def times(self) -> List[float]:
        return list(self._sweep["times"])

    @property
    def dt(self) -> float:
        return self._sweep["dt"]

    @property
    def width(self) -> float:
        return self.config["initial"]["width"]

    @property
    def kick(self) -> float:
        return self.config["initial"]["kick"]

    @property
    def tolerances(self) -> Dict:
        """
        Gets the numerical tolerances.

        Returns:
            Dict: series_tol, series_max_terms, defect_tol, frame_dt and
                radial_points.
        """
        return dict(self.config["tolerances"])

    @property
    def suite(self) -> Dict:
        """
        Gets the sizes of the randomized property checks.

        Returns:
            Dict: trials, modes, max_kernel_norm, series_kernel_norm,
                ad_series_order and ad_series_trials.
        """
        return dict(self.config["suite"])

    @property
    def output_dir(self) -> Optional[str]:
        return self.config["output"]["directory"]

    @property
    def config_hash(self) -> str:
        """
        Gets the sha256 of the canonical form of the validated configuration.

        Returns:
            str: Hex digest written into every result footer.
        """
        return config_hash(self.config)

    @property
    def _sweep(self) -> Dict:
        sweep = self.config.get("sweep")
        if sweep is None:
            raise ConfigValidationError(
                "Missing configuration section.", [("sweep", "section is required")]
            )
        return sweep


def _parse_value(section: str, key: str, raw: str):
    raw = raw.strip()
    if (section, key) in LIST_KEYS:
        return [item.strip() for item in raw.split(",") if item.strip()]
    if raw == "":
        return None
    return raw


def load_experiment_config(config_path: str) -> Dict:
    """
    Parse an experiment file into a nested dictionary of raw strings.

    The grammar is the INI format: `[section]` headers, `key = value` lines,
    `#` comments and comma-separated lists. Key case is preserved.

    Args:
        config_path (str): Path to the configuration file.

    Raises:
        ConfigValidationError: If the file is missing or not parseable.

    Returns:
        Dict: {section: {key: value}}.
    """
    if not os.path.isfile(config_path):
        raise ConfigValidationError(
            "Configuration file not found.", [("config", f"no such file: {config_path}")]
        )
    parser = configparser.ConfigParser(
        comment_prefixes=("#",), inline_comment_prefixes=("#",), interpolation=None
    )
    parser.optionxform = str
    try:
        with open(config_path, "r", encoding="utf-8") as file:
            parser.read_file(file)
    except configparser.Error as exc:
        raise ConfigValidationError(
            "Configuration file is malformed.", [("config", str(exc).splitlines()[0])]
        ) from exc

    config = {}
    for section in parser.sections():
        values = {
            key: _parse_value(section, key, raw) for key, raw in parser.items(section)
        }
        config[section] = {key: value for key, value in values.items() if value is not None}
    return config


def load_experiment_schema(config_path: str) -> ExperimentSchema:
    """
    Load the experiment file, validate it and use the validated dictionary
    to instantiate the schema provider.

    Args:
        config_path (str): Path to the configuration file.

    Returns:
        ExperimentSchema: An instance of the ExperimentSchema.
    """
    config_dict = load_experiment_config(config_path)
    validated_config_dict = validate_config_dict(config_dict)
    return ExperimentSchema(validated_config_dict)


def save_schema(schema: ExperimentSchema, save_dir_path: str) -> None:
    """
    Save the schema with joblib.

    Args:
        schema (ExperimentSchema): The schema to be saved.
        save_dir_path (str): The dir path to save the schema to.
    """
    if not os.path.exists(save_dir_path):
        os.makedirs(save_dir_path)
    file_path = os.path.join(save_dir_path, SCHEMA_FILE_NAME)
    joblib.dump(schema, file_path)


def load_saved_schema(save_dir_path: str) -> ExperimentSchema:
    """
    Load a saved schema.

    Args:
        save_dir_path (str): The path to load the schema from.

    Returns:
        ExperimentSchema: An instance of the ExperimentSchema.
    """
    file_path = os.path.join(save_dir_path, SCHEMA_FILE_NAME)
    if not os.path.exists(file_path):
        raise FileNotFoundError(f"No such file or directory: '{file_path}'")
    return joblib.load(file_path)

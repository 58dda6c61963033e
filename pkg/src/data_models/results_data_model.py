from typing import Dict, List, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ValidationError, validator

from errors import NumericError

# table name -> (required columns, columns that must be non-negative)
RESULT_TABLES: Dict[str, Dict[str, List[str]]] = {
    "scattering": {
        "required": [
            "N", "lambda", "N_lambda", "lambda_deviation", "c0", "c_lambda",
            "c_omega", "c_grad", "variational_gap", "omega_difference_bound",
            "coupling_integral", "coupling_defect", "boundary_residual",
        ],
        "non_negative": [
            "N", "lambda", "lambda_deviation", "c0", "c_omega", "c_grad",
            "omega_difference_bound", "coupling_defect", "boundary_residual",
        ],
    },
    "nls": {
        "required": ["N", "t", "l2_distance", "h2_distance", "dot_distance", "mass_N", "mass_limit"],
        "non_negative": ["N", "t", "l2_distance", "h2_distance", "dot_distance"],
    },
    "kernels": {
        "required": [
            "N", "t", "k_distance", "p_distance", "p_bound", "p_dominated",
            "k_norm", "k_limit_norm", "k_sup_row", "grad1_k_norm", "grad1_p_norm",
        ],
        "non_negative": [
            "N", "t", "k_distance", "p_distance", "p_bound", "k_norm",
            "k_limit_norm", "k_sup_row", "grad1_k_norm", "grad1_p_norm",
        ],
    },
    "fluct": {
        "required": [
            "N", "t", "frame_distance", "particle_number_N", "particle_number_limit",
            "second_moment_N", "second_moment_limit", "kinetic_N", "kinetic_limit",
            "defect_N", "defect_limit", "eta_N",
        ],
        "non_negative": [
            "N", "t", "frame_distance", "particle_number_N", "particle_number_limit",
            "second_moment_N", "second_moment_limit", "defect_N", "defect_limit",
        ],
    },
    "suite": {
        "required": ["check", "trials", "worst_value", "threshold", "passed"],
        "non_negative": ["trials"],
    },
}


def get_results_validator(
    table_name: str, required: Sequence[str], non_negative: Sequence[str]
) -> BaseModel:
    """
    Returns a dynamic Pydantic data validator class for one result table.

    The resulting validator checks the following:

    1. That the dataFrame is not empty.
    2. That every required column is present.
    3. That numeric columns contain no nulls and no infinities.
    4. That norm-like columns are non-negative.

    If any of these checks fail, the validator will raise a ValueError.

    Args:
        table_name (str): Name used in error messages.
        required (Sequence[str]): Required columns.
        non_negative (Sequence[str]): Columns whose values must be >= 0.

    Returns:
        BaseModel: A dynamic Pydantic BaseModel class for data validation.
    """

    class DataValidator(BaseModel):
        data: pd.DataFrame

        class Config:
            arbitrary_types_allowed = True

        @validator("data", allow_reuse=True)
        def validate_dataframe(cls, data):
            if data.empty:
                raise ValueError(f"The {table_name} result table is empty.")

            missing = [column for column in required if column not in data.columns]
            if missing:
                raise ValueError(
                    f"Malformed {table_name} result table. Missing columns: {missing}"
                )

            for column in data.columns:
                series = data[column]
                if pd.api.types.is_bool_dtype(series) or not pd.api.types.is_numeric_dtype(series):
                    continue
                if not np.all(np.isfinite(series.to_numpy(dtype=float))):
                    raise ValueError(
                        f"Column '{column}' of the {table_name} table contains "
                        "null or non-finite values."
                    )

            for column in non_negative:
                if (data[column] < 0).any():
                    raise ValueError(
                        f"Column '{column}' of the {table_name} table has negative values."
                    )
            return data

    return DataValidator


def validate_results(results: pd.DataFrame, table_name: str) -> pd.DataFrame:
    """
    Validates a result table before it is written.

    Args:
        results (pd.DataFrame): Table to validate.
        table_name (str): Key of RESULT_TABLES.

    Returns:
        pd.DataFrame: The validated table.

    Raises:
        NumericError: If the table fails validation.
    """
    spec = RESULT_TABLES[table_name]
    DataValidator = get_results_validator(table_name, spec["required"], spec["non_negative"])
    try:
        validated = DataValidator(data=results)
        return validated.data
    except ValidationError as exc:
        raise NumericError(f"Result validation failed: {exc}") from exc

from enum import Enum
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ValidationError, validator

from errors import ConfigValidationError
from physics.fields import max_admissible_n

MAX_MODES = 4096
MAX_FLUCTUATION_MODES = 512


class StudyKind(str, Enum):
    """Enum for the kind of experiment a configuration file describes"""

    SCATTERING = "scattering"
    NLS_CONVERGENCE = "nls_convergence"
    KERNEL_CONVERGENCE = "kernel_convergence"
    FLUCTUATION_COMPARISON = "fluctuation_comparison"
    PROPERTY_SUITE = "property_suite"


GRID_STUDIES = (
    StudyKind.NLS_CONVERGENCE,
    StudyKind.KERNEL_CONVERGENCE,
    StudyKind.FLUCTUATION_COMPARISON,
)


class PotentialShape(str, Enum):
    """Enum for the catalogued potential profiles"""

    SQUARE_WELL = "square_well"
    PARABOLIC = "parabolic"
    SMOOTH_BUMP = "smooth_bump"
    ZERO = "zero"


class StudySection(BaseModel):
    kind: StudyKind

    class Config:
        use_enum_values = True


class PotentialSection(BaseModel):
    """
    The unscaled potential V: a catalogued shape of height `strength`
    supported in the ball of radius `radius`.
    """

    shape: PotentialShape = PotentialShape.SQUARE_WELL.value
    strength: float = 1.0
    radius: float = 1.0

    class Config:
        use_enum_values = True

    @validator("strength", allow_reuse=True)
    def strength_non_negative(cls, v):
        if v < 0:
            raise ValueError(f"Potential strength must be non-negative. Given {v}")
        return v

    @validator("radius", allow_reuse=True)
    def radius_positive(cls, v):
        if v <= 0:
            raise ValueError(f"Support radius must be positive. Given {v}")
        return v


class GridSection(BaseModel):
    """
    Periodic box [-L/2, L/2)^dim sampled with `points` points per axis.
    """

    dim: int = 1
    points: int
    length: float

    @validator("dim", allow_reuse=True)
    def dim_supported(cls, v):
        if v not in (1, 3):
            raise ValueError(f"Grid dimension must be 1 or 3. Given {v}")
        return v

    @validator("points", allow_reuse=True)
    def points_power_of_two(cls, v):
        if v < 2 or v & (v - 1):
            raise ValueError(f"Points per axis must be a power of two. Given {v}")
        return v

    @validator("length", allow_reuse=True)
    def length_positive(cls, v):
        if v <= 0:
            raise ValueError(f"Box length must be positive. Given {v}")
        return v

    @property
    def mode_count(self) -> int:
        return self.points**self.dim


class InitialSection(BaseModel):
    """Gaussian condensate width and momentum kick at t = 0."""

    width: float = 0.5
    kick: float = 0.0

    @validator("width", allow_reuse=True)
    def width_positive(cls, v):
        if v <= 0:
            raise ValueError(f"Condensate width must be positive. Given {v}")
        return v


class SweepSection(BaseModel):
    beta: float = 0.5
    ell: float = 1.0
    N_list: List[float]
    times: List[float] = [0.5]
    dt: float = 1e-3

    @validator("beta", allow_reuse=True)
    def beta_in_open_interval(cls, v):
        if not 0 < v < 1:
            raise ValueError(f"beta must lie in (0, 1). Given {v}")
        return v

    @validator("ell", allow_reuse=True)
    def ell_positive(cls, v):
        if v <= 0:
            raise ValueError(f"ell must be positive. Given {v}")
        return v

    @validator("N_list", allow_reuse=True)
    def n_list_increasing(cls, v):
        if not v:
            raise ValueError("N_list must not be empty.")
        if any(n <= 0 for n in v):
            raise ValueError(f"N_list entries must be positive. Given {v}")
        if any(b <= a for a, b in zip(v[:-1], v[1:])):
            raise ValueError(f"N_list must be strictly increasing. Given {v}")
        return v

    @validator("times", allow_reuse=True)
    def times_sorted(cls, v):
        if any(t < 0 for t in v):
            raise ValueError(f"times must be non-negative. Given {v}")
        if v != sorted(v):
            raise ValueError(f"times must be sorted. Given {v}")
        return v

    @validator("dt", allow_reuse=True)
    def dt_positive(cls, v):
        if v <= 0:
            raise ValueError(f"dt must be positive. Given {v}")
        return v


class ToleranceSection(BaseModel):
    series_tol: float = 1e-10
    series_max_terms: int = 40
    defect_tol: float = 1e-6
    frame_dt: float = 1e-2
    radial_points: int = 2000

    @validator("series_tol", "defect_tol", "frame_dt", allow_reuse=True)
    def strictly_positive(cls, v):
        if v <= 0:
            raise ValueError(f"Value must be positive. Given {v}")
        return v

    @validator("series_max_terms", allow_reuse=True)
    def enough_terms(cls, v):
        if v < 1:
            raise ValueError(f"series_max_terms must be at least 1. Given {v}")
        return v

    @validator("radial_points", allow_reuse=True)
    def enough_radial_points(cls, v):
        if v < 100:
            raise ValueError(f"radial_points must be at least 100. Given {v}")
        return v


class SuiteSection(BaseModel):
    """Sizes of the randomized property checks."""

    trials: int = 20
    modes: int = 64
    max_kernel_norm: float = 5.0
    series_kernel_norm: float = 1.0
    ad_series_order: int = 8
    ad_series_trials: int = 10

    @validator("trials", "ad_series_trials", allow_reuse=True)
    def at_least_one(cls, v):
        if v < 1:
            raise ValueError(f"Trial counts must be at least 1. Given {v}")
        return v

    @validator("modes", allow_reuse=True)
    def modes_in_range(cls, v):
        if not 2 <= v <= MAX_MODES or v & (v - 1):
            raise ValueError(f"modes must be a power of two in [2, {MAX_MODES}]. Given {v}")
        return v

    @validator("max_kernel_norm", "series_kernel_norm", allow_reuse=True)
    def norm_positive(cls, v):
        if v <= 0:
            raise ValueError(f"Kernel norms must be positive. Given {v}")
        return v

    @validator("ad_series_order", allow_reuse=True)
    def order_non_negative(cls, v):
        if v < 0:
            raise ValueError(f"ad_series_order must be non-negative. Given {v}")
        return v


class OutputSection(BaseModel):
    directory: Optional[str] = None


class ExperimentConfig(BaseModel):
    """
    A model representing a complete experiment configuration.

    Field-level checks run inside the section models; checks that relate
    several sections run in `cross_field_errors` once every section parsed.
    """

    study: StudySection
    potential: PotentialSection = PotentialSection()
    grid: Optional[GridSection] = None
    initial: InitialSection = InitialSection()
    sweep: Optional[SweepSection] = None
    tolerances: ToleranceSection = ToleranceSection()
    suite: SuiteSection = SuiteSection()
    output: OutputSection = OutputSection()


def cross_field_errors(config: ExperimentConfig) -> List[Tuple[str, str]]:
    """
    Checks that relate several sections: grid size limits, the Neumann
    radius against the box and the interaction range, and resolvability of
    the largest N.

    Returns:
        List[Tuple[str, str]]: (dotted field path, reason) pairs.
    """
    errors = []
    kind = config.study.kind
    sweep = config.sweep
    if sweep is None:
        if kind != StudyKind.PROPERTY_SUITE:
            errors.append(("sweep", f"A [sweep] section is required for {kind} studies."))
        return errors
    radius = config.potential.radius
    n_min, n_max = sweep.N_list[0], sweep.N_list[-1]

    support = radius * n_min ** (-sweep.beta)
    if support >= sweep.ell:
        errors.append(
            (
                "sweep.ell",
                f"The rescaled support R N_min^-beta = {support:.4g} must be below ell. "
                f"Given {sweep.ell}",
            )
        )

    if kind not in GRID_STUDIES:
        return errors
    grid = config.grid
    if grid is None:
        errors.append(("grid", f"A [grid] section is required for {kind} studies."))
        return errors

    mode_limit = MAX_FLUCTUATION_MODES if kind == StudyKind.FLUCTUATION_COMPARISON else MAX_MODES
    if grid.mode_count > mode_limit:
        errors.append(
            (
                "grid.points",
                f"points^dim = {grid.mode_count} exceeds {mode_limit} for {kind} studies.",
            )
        )
    if sweep.ell >= grid.length / 2.0:
        errors.append(("sweep.ell", f"ell must be below L/2 = {grid.length / 2.0}. Given {sweep.ell}"))

    dx = grid.length / grid.points
    admissible = max_admissible_n(radius, dx, sweep.beta)
    if n_max > admissible:
        errors.append(
            (
                "sweep.N_list",
                f"N = {n_max:g} is not resolvable on this grid; "
                f"the largest admissible N is {admissible:.6g}.",
            )
        )
    return errors


def _field_path(loc: Tuple) -> str:
    return ".".join(str(part) for part in loc)


def validate_config_dict(config_dict: Dict) -> Dict:
    """
    Validate an experiment configuration.

    Args:
        config_dict: dict
            experiment configuration as a nested python dictionary

    Raises:
        ConfigValidationError: listing every invalid field with its dotted path

    Returns:
        dict: validated configuration with defaults filled in
    """
    try:
        config = ExperimentConfig.parse_obj(config_dict)
    except ValidationError as exc:
        field_errors = [(_field_path(err["loc"]), err["msg"]) for err in exc.errors()]
        raise ConfigValidationError("Invalid experiment configuration.", field_errors) from exc

    field_errors = cross_field_errors(config)
    if field_errors:
        raise ConfigValidationError("Invalid experiment configuration.", field_errors)
    return config.dict()

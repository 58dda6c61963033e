import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from errors import FitRefusedError

MIN_FIT_POINTS = 3

# half-widths of the slope bands a sweep is accepted in
RATE_TOLERANCES = {"eigenvalue": 0.2, "nls": 0.25, "kernel": 0.25, "fluctuation": 0.25}
# kernel distances must at least decay like N^-0.1
KERNEL_SLOPE_CEILING = -0.1


@dataclass(frozen=True)
class RateFit:
    """Least-squares line log(error) = slope * log(N) + intercept."""

    slope: float
    intercept: float
    stderr: float
    points: List[Tuple[float, float]] = field(default_factory=list)

    def as_dict(self) -> Dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "stderr": self.stderr,
            "points": [list(point) for point in self.points],
        }

    def within(self, expected: float, tolerance: float) -> bool:
        return abs(self.slope - expected) <= tolerance


def fit_rate(n_values: Sequence[float], errors: Sequence[float]) -> RateFit:
    """
    Fits a power law error ~ N^slope in log-log coordinates.

    Args:
        n_values (Sequence[float]): Sweep parameters, positive.
        errors (Sequence[float]): Measured errors, positive and finite.

    Returns:
        RateFit: Slope, intercept and the standard error of the slope.

    Raises:
        FitRefusedError: If there are fewer than 3 points or any value is
            zero, negative or non-finite.
    """
    n_values = np.asarray(n_values, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if n_values.shape != errors.shape:
        raise FitRefusedError(
            f"Got {n_values.size} N values but {errors.size} errors."
        )
    if n_values.size < MIN_FIT_POINTS:
        raise FitRefusedError(
            f"A rate fit needs at least {MIN_FIT_POINTS} points. Given {n_values.size}"
        )
    if not (np.all(np.isfinite(errors)) and np.all(errors > 0)):
        raise FitRefusedError(f"Errors must be positive and finite. Given {errors.tolist()}")
    if not (np.all(np.isfinite(n_values)) and np.all(n_values > 0)):
        raise FitRefusedError(f"N values must be positive. Given {n_values.tolist()}")
    if np.unique(n_values).size < 2:
        raise FitRefusedError("N values must not all coincide.")

    log_n, log_err = np.log(n_values), np.log(errors)
    result = stats.linregress(log_n, log_err)
    stderr = float(result.stderr) if math.isfinite(result.stderr) else 0.0
    return RateFit(
        slope=float(result.slope),
        intercept=float(result.intercept),
        stderr=max(stderr, 0.0),
        points=[(float(x), float(y)) for x, y in zip(log_n, log_err)],
    )


def expected_rates(beta: float) -> Dict[str, float]:
    """Asymptotic decay exponents predicted for a given scaling exponent."""
    return {
        "fluctuation": min(beta / 2.0, (1.0 - beta) / 2.0),
        "nls": min(beta, 1.0 - beta),
        "kernel": min(beta / 2.0, 1.0 - beta),
        "eigenvalue": 1.0 - beta,
    }


def rate_band(
    slope: Optional[float], expected: float, tolerance: float, ceiling: Optional[float] = None
) -> Dict:
    """
    Checks a fitted slope against the band expected ± tolerance and, when
    given, against an upper ceiling. A refused fit (slope None) never meets
    the band.
    """
    met = slope is not None and abs(slope - expected) <= tolerance
    if met and ceiling is not None:
        met = slope <= ceiling
    return {
        "slope": slope,
        "expected": expected,
        "tolerance": tolerance,
        "ceiling": ceiling,
        "met": bool(met),
    }

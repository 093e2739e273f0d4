import numpy as np
from scipy.interpolate import PchipInterpolator

from chsh_rates.exceptions import CurveError


class Interpolant:
    """Monotone cubic (PCHIP) interpolation of a sampled curve.

    Evaluation is clamped to [lower, upper]; derivatives at the end points are
    the one-sided PCHIP estimates.
    """

    def __init__(self, x, y, lower: float | None = None, upper: float | None = None):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.ndim != 1 or x.shape != y.shape or x.size < 2:
            raise CurveError("interpolation needs at least two (omega, entropy) points")
        if np.any(np.diff(x) <= 0.0):
            raise CurveError("interpolation nodes must be strictly increasing")
        self.x = x
        self.y = y
        self.lower = x[0] if lower is None else max(lower, x[0])
        self.upper = x[-1] if upper is None else min(upper, x[-1])
        self._spline = PchipInterpolator(x, y, extrapolate=False)
        self._derivative = self._spline.derivative()

    def _clamp(self, omega):
        return np.clip(np.asarray(omega, dtype=float), self.lower, self.upper)

    def __call__(self, omega):
        value = self._spline(self._clamp(omega))
        return float(value) if np.ndim(value) == 0 else value

    def derivative(self, omega):
        value = self._derivative(self._clamp(omega))
        return float(value) if np.ndim(value) == 0 else value

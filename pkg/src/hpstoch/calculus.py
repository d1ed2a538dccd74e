"""Pathwise Ito and Stratonovich integrals on a shared time grid.

The discrete Stratonovich integral is the trapezoid-in-integrand rule

    sum_i (Z_i + Z_{i+1}) / 2 * (X_{i+1} - X_i)

and every other module evaluates Stratonovich integrals through the helpers
here, so algebraic identities between different arrangements of the same
sums hold to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument
from .paths import SamplePath


@dataclass(frozen=True)
class IntegralResult:
    cumulative: SamplePath
    total: float


def _scalar_columns(Z: SamplePath, X: SamplePath):
    if Z.grid != X.grid:
        raise InvalidArgument("integrand and integrator live on different grids")
    if Z.d != 1 or X.d != 1:
        raise InvalidArgument("scalar integrals need 1-dimensional paths")
    return Z.values[:, 0], X.values[:, 0]


def _result(grid, terms: np.ndarray) -> IntegralResult:
    cum = np.zeros(terms.size + 1)
    np.cumsum(terms, out=cum[1:])
    return IntegralResult(SamplePath(grid, cum), float(cum[-1]))


def ito_terms(z: np.ndarray, x: np.ndarray) -> np.ndarray:
    return z[:-1] * np.diff(x, axis=0)


def strat_terms(z: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Per-increment midpoint-rule contributions; works columnwise on 2-D input."""
    return 0.5 * (z[:-1] + z[1:]) * np.diff(x, axis=0)


def covariation_terms(z: np.ndarray, x: np.ndarray) -> np.ndarray:
    return np.diff(z, axis=0) * np.diff(x, axis=0)


def ito_integral(Z: SamplePath, X: SamplePath) -> IntegralResult:
    z, x = _scalar_columns(Z, X)
    return _result(Z.grid, ito_terms(z, x))


def stratonovich_integral(Z: SamplePath, X: SamplePath) -> IntegralResult:
    z, x = _scalar_columns(Z, X)
    return _result(Z.grid, strat_terms(z, x))


def quadratic_covariation(Z: SamplePath, X: SamplePath) -> IntegralResult:
    z, x = _scalar_columns(Z, X)
    return _result(Z.grid, covariation_terms(z, x))


def pairing_integral(Z: SamplePath, X: SamplePath) -> float:
    """Stratonovich integral of <Z, o dX> for equal-dimension vector paths."""
    if Z.grid != X.grid or Z.d != X.d:
        raise InvalidArgument("pairing needs paths of equal dimension on one grid")
    return float(np.sum(strat_terms(Z.values, X.values)))


def integral_over_window(Z: SamplePath, X: SamplePath, window) -> float:
    """Midpoint-rule integral over the increments inside ``window``.

    ``window`` is a closed index interval ``(a, b)``; the increment
    ``[i, i + 1]`` counts iff ``a <= i`` and ``i + 1 <= b``. ``None`` or an
    infinite start means an empty window and gives 0. Vector paths are paired
    componentwise.
    """
    if Z.grid != X.grid or Z.d != X.d:
        raise InvalidArgument("integrand and integrator do not match")
    if window is None:
        return 0.0
    a, b = window
    if a == float("inf"):
        return 0.0
    last = len(Z.grid) - 1
    a = int(a)
    b = last if b == float("inf") else int(min(b, last))
    if a < 0:
        raise InvalidArgument("window starts before the grid")
    if b <= a:
        return 0.0
    return float(np.sum(strat_terms(Z.values[a : b + 1], X.values[a : b + 1])))

"""Pure numpy kernel for the finite part of the decoherence integral.

The integrand is ``F(k; u) = (sin k - k cos k)^2 / k^7 * (1 - sin(uk)/(uk))``
and this module integrates it over ``[0, cutoff]``. It mirrors the compiled
kernel in ``_dcore.pyx`` and is used when that extension is unavailable.
"""

from __future__ import annotations

import math

import numpy as np

from .numerics import adaptive_gauss_kronrod

# (sin k - k cos k)/k^3 and (1 - sin x / x)/x^2 near zero
_S_COEF = (1.0 / 3.0, -1.0 / 30.0, 1.0 / 840.0, -1.0 / 45360.0, 1.0 / 3991680.0)
_Q_COEF = (1.0 / 6.0, -1.0 / 120.0, 1.0 / 5040.0, -1.0 / 362880.0, 1.0 / 39916800.0)
S_SERIES_MAX = 0.2
Q_SERIES_MAX = 0.1


def _poly_even(coef, x2):
    out = np.full_like(x2, coef[-1])
    for c in coef[-2::-1]:
        out = out * x2 + c
    return out


def integrand(k: np.ndarray, u: float) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    k2 = k * k
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(k < S_SERIES_MAX, _poly_even(_S_COEF, k2), (np.sin(k) - k * np.cos(k)) / (k2 * k))
        x = u * k
        q = np.where(x < Q_SERIES_MAX, _poly_even(_Q_COEF, x * x), (1.0 - np.sin(x) / x) / (x * x))
    # s^2 / k * (1 - sin x / x) = s^2 * u^2 * k * q
    return s * s * (u * u) * k * q


def initial_edges(u: float, cutoff: float) -> np.ndarray:
    """Panels no wider than ``pi/(u + 2)`` so each holds under half a period."""
    width = math.pi / (u + 2.0)
    n = max(1, int(math.ceil(cutoff / width)))
    return np.linspace(0.0, cutoff, n + 1)


def finite_part(u: float, cutoff: float, abs_tol: float, rel_tol: float, budget: int) -> tuple[float, float, int]:
    return adaptive_gauss_kronrod(
        lambda k: integrand(k, u), initial_edges(u, cutoff), abs_tol, rel_tol, budget
    )

"""The decoherence exponent D for uniform balls, its asymptotes and unit conversion.

For a single ball of mass M and radius R displaced by a,

    D(a) = 216 M^2 I(a/R),
    I(u) = int_0^inf (sin k - k cos k)^2 / k^7 * (1 - sin(uk)/(uk)) dk,

with everything in Planck units. ``I`` is evaluated as a finite part on
``[0, K]`` (compiled kernel when available) plus the exact remainder beyond
``K``: expanding the integrand into terms ``Re c k^-m e^{iwk}`` gives each
tail as a generalized exponential integral.
"""

from __future__ import annotations

import functools
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .numerics import QuadratureSpec, TrigPowerTail, integrate_semiinfinite

try:
    if os.environ.get("GRAVDECO_PURE_PYTHON"):
        raise ImportError("pure-Python kernel requested")
    from . import _dcore as _kernel

    BACKEND = "cython"
except ImportError:
    from . import _dcore_py as _kernel

    BACKEND = "python"

__all__ = [
    "BACKEND",
    "BallParams",
    "DecoherenceSpec",
    "NBodyConfig",
    "PlanckUnits",
    "alpha",
    "decoherence_integral",
    "dexp",
    "dexp_auto",
    "dexp_exact",
    "dexp_gaussian",
    "dexp_log",
    "dexp_nbody_gaussian",
    "dexp_nbody_log",
    "dexp_values",
    "fit_gaussian_correction",
    "load_constants",
    "planck_convert",
    "UnsupportedConfiguration",
    "SingularConfiguration",
]

GAUSSIAN_MAX_RATIO = 0.2
LOG_MIN_RATIO = 20.0
DEFAULT_CUTOFF = 4.0 * math.pi


class UnsupportedConfiguration(ValueError):
    pass


class SingularConfiguration(ValueError):
    pass


@dataclass(frozen=True)
class BallParams:
    M: float
    R: float

    def __post_init__(self):
        if not (self.M > 0 and self.R > 0):
            raise ValueError("ball mass and radius must be positive")


@dataclass(frozen=True)
class DecoherenceSpec:
    mode: str
    ball: BallParams
    quad: QuadratureSpec | None = field(default_factory=QuadratureSpec)

    def __post_init__(self):
        if self.mode not in ("exact", "gaussian", "logarithmic", "auto"):
            raise ValueError(f"unknown decoherence mode {self.mode!r}")
        if self.mode in ("auto", "exact") and self.quad is None:
            raise ValueError(f"mode {self.mode!r} needs a QuadratureSpec")


@dataclass(frozen=True)
class NBodyConfig:
    masses: tuple[float, ...]
    radii: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "masses", tuple(float(m) for m in self.masses))
        object.__setattr__(self, "radii", tuple(float(r) for r in self.radii))
        if len(self.masses) != len(self.radii) or not self.masses:
            raise ValueError("need one radius per mass and at least one ball")
        if min(self.masses) <= 0 or min(self.radii) <= 0:
            raise ValueError("masses and radii must be positive")

    @property
    def N(self) -> int:
        return len(self.masses)

    @property
    def total_mass(self) -> float:
        return sum(self.masses)


# ---------------------------------------------------------------------------
# units


def load_constants(path: str | os.PathLike | None = None) -> dict[str, float]:
    """Read ``key = value`` lines (``#`` comments allowed) into a dict."""
    path = Path(path) if path is not None else Path(__file__).with_name("constants.cfg")
    out = {}
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        out[key.strip()] = float(value)
    return out


@dataclass(frozen=True)
class PlanckUnits:
    length_cm: float
    time_s: float
    mass_g: float
    year_s: float = 3.15576e7

    def __post_init__(self):
        if min(self.length_cm, self.time_s, self.mass_g, self.year_s) <= 0:
            raise ValueError("unit constants must be positive")

    @classmethod
    def from_file(cls, path=None) -> "PlanckUnits":
        c = load_constants(path)
        return cls(c["planck_length_cm"], c["planck_time_s"], c["planck_mass_g"], c.get("julian_year_s", 3.15576e7))


@functools.lru_cache(maxsize=None)
def default_units() -> PlanckUnits:
    return PlanckUnits.from_file()


_UNIT_ALIASES = {
    "cm": ("length", "cm"),
    "planck_length": ("length", "planck"),
    "lp": ("length", "planck"),
    "s": ("time", "s"),
    "yr": ("time", "yr"),
    "year": ("time", "yr"),
    "planck_time": ("time", "planck"),
    "tp": ("time", "planck"),
    "g": ("mass", "g"),
    "planck_mass": ("mass", "planck"),
    "mp": ("mass", "planck"),
}


def _to_planck_factor(unit: str, consts: PlanckUnits) -> tuple[str, float]:
    try:
        dim, name = _UNIT_ALIASES[unit.lower()]
    except KeyError:
        raise ValueError(f"unknown unit {unit!r}") from None
    if name == "planck":
        return dim, 1.0
    if dim == "length":
        return dim, 1.0 / consts.length_cm
    if dim == "mass":
        return dim, 1.0 / consts.mass_g
    if name == "s":
        return dim, 1.0 / consts.time_s
    return dim, consts.year_s / consts.time_s


def planck_convert(value: float, from_unit: str, to_unit: str, consts: PlanckUnits | None = None) -> float:
    """Convert between CGS (cm, g, s, yr) and Planck units of the same dimension."""
    consts = consts or default_units()
    d1, f1 = _to_planck_factor(from_unit, consts)
    d2, f2 = _to_planck_factor(to_unit, consts)
    if d1 != d2:
        raise ValueError(f"cannot convert {d1} ({from_unit}) to {d2} ({to_unit})")
    return value * f1 / f2


# ---------------------------------------------------------------------------
# single ball


def alpha(ball: BallParams) -> float:
    return 9.0 * ball.M**2 / ball.R**2


# integrand (sin k - k cos k)^2 / k^7 written as Re sum c k^-m e^{iwk}
_G_TERMS = ((0.5, 7, 0.0), (0.5, 5, 0.0), (0.5, 5, 2.0), (-0.5, 7, 2.0), (1j, 6, 2.0))


def integral_tail(u: float) -> TrigPowerTail:
    """Exact remainder model for ``I(u)`` beyond any cutoff."""
    terms = list(_G_TERMS)
    for c, m, w in _G_TERMS:
        terms.append((0.5j * c / u, m + 1, w + u))
        terms.append((-0.5j * c / u, m + 1, w - u))
    return TrigPowerTail(tuple(terms))


def _normalization_integrand(k: np.ndarray) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    small = k < 0.05
    ks = np.where(small, 1.0, k)
    big = (np.sin(ks) - ks * np.cos(ks)) ** 2 / ks**5
    k2 = k * k
    series = k / 9.0 * (1.0 - k2 / 5.0 + 3.0 * k2 * k2 / 175.0)
    return np.where(small, series, big)


def normalization_integral(quad: QuadratureSpec | None = None) -> float:
    """``int_0^inf (sin k - k cos k)^2 / k^5 dk`` (exactly 1/4); fixes ``alpha = 9 M^2 / R^2``."""
    quad = quad or QuadratureSpec(abs_tol=1e-12, rel_tol=1e-12)
    cutoff = quad.tail_cutoff if quad.tail_cutoff is not None else DEFAULT_CUTOFF
    tail = TrigPowerTail(tuple((c, m - 2, w) for c, m, w in _G_TERMS))
    spec = QuadratureSpec(quad.abs_tol, quad.rel_tol, cutoff, quad.panel_budget)
    return integrate_semiinfinite(_normalization_integrand, spec, tail=tail, period=math.pi)


@functools.lru_cache(maxsize=65536)
def _integral_cached(u: float, abs_tol: float, rel_tol: float, cutoff: float, budget: int) -> tuple[float, float]:
    finite, err, _ = _kernel.finite_part(u, cutoff, 0.5 * abs_tol, 0.5 * rel_tol, budget)
    return finite + integral_tail(u)(cutoff), err


def decoherence_integral(u: float, quad: QuadratureSpec | None = None, *, abs_tol: float | None = None) -> float:
    """The dimensionless integral ``I(u)`` with ``D = 216 M^2 I(a/R)``."""
    if u < 0:
        raise ValueError("separation must be >= 0")
    if u == 0:
        return 0.0
    quad = quad or QuadratureSpec()
    cutoff = quad.tail_cutoff if quad.tail_cutoff is not None else DEFAULT_CUTOFF
    tol = quad.abs_tol if abs_tol is None else abs_tol
    return _integral_cached(float(u), float(tol), quad.rel_tol, float(cutoff), quad.panel_budget)[0]


def dexp_exact(a: float, ball: BallParams, quad: QuadratureSpec | None = None) -> float:
    if a < 0:
        raise ValueError("separation must be >= 0")
    if a == 0:
        return 0.0
    quad = quad or QuadratureSpec()
    scale = 216.0 * ball.M**2
    return scale * decoherence_integral(a / ball.R, quad, abs_tol=quad.abs_tol / scale)


def dexp_gaussian(a: float, ball: BallParams) -> float:
    if a < 0:
        raise ValueError("separation must be >= 0")
    return alpha(ball) * a * a


def dexp_log(a: float, ball: BallParams) -> float:
    if a <= 0:
        raise ValueError("logarithmic form needs a > 0")
    return 24.0 * ball.M**2 * math.log(a / ball.R)


def dexp_auto(a: float, ball: BallParams, quad: QuadratureSpec | None = None) -> float:
    """Gaussian form for ``a/R <= 0.2``, exact quadrature otherwise."""
    if a < 0:
        raise ValueError("separation must be >= 0")
    if a / ball.R <= GAUSSIAN_MAX_RATIO:
        return dexp_gaussian(a, ball)
    return dexp_exact(a, ball, quad)


def dexp(a: float, spec: DecoherenceSpec) -> float:
    if spec.mode == "exact":
        return dexp_exact(a, spec.ball, spec.quad)
    if spec.mode == "gaussian":
        return dexp_gaussian(a, spec.ball)
    if spec.mode == "logarithmic":
        return dexp_log(a, spec.ball)
    return dexp_auto(a, spec.ball, spec.quad)


def dexp_values(distances, spec: DecoherenceSpec) -> np.ndarray:
    """``D`` at every entry of ``distances``, evaluating each distinct value once."""
    d = np.abs(np.asarray(distances, dtype=float))
    if spec.mode == "gaussian":
        return alpha(spec.ball) * d * d
    uniq, inv = np.unique(d, return_inverse=True)
    vals = np.array([dexp(float(x), spec) if x > 0 or spec.mode != "logarithmic" else 0.0 for x in uniq])
    return vals[inv].reshape(d.shape)


def fit_gaussian_correction(M: float, ratios: Sequence[float], quad: QuadratureSpec | None = None) -> dict:
    """Measure how ``D_exact - alpha a^2`` scales at small ``u = a/R``.

    Returns the log-log slope of the correction against ``u`` and the
    coefficient ``C`` of a least-squares fit ``C M^2 u^4 ln u``.
    """
    ball = BallParams(M, 1.0)
    u = np.asarray(ratios, dtype=float)
    quad = quad or QuadratureSpec(abs_tol=1e-14, rel_tol=1e-13)
    delta = np.array([dexp_exact(x, ball, quad) - dexp_gaussian(x, ball) for x in u])
    slope = float(np.polyfit(np.log(u), np.log(np.abs(delta)), 1)[0])
    basis = M**2 * u**4 * np.log(u)
    coef = float(basis @ delta / (basis @ basis))
    return {"slope": slope, "coefficient": coef, "corrections": delta.tolist()}


# ---------------------------------------------------------------------------
# many balls


def _as_points(x, n: int) -> np.ndarray:
    p = np.asarray(x, dtype=float)
    if p.ndim == 1:
        p = p[:, None]
    if p.ndim != 2 or p.shape[0] != n:
        raise ValueError(f"expected {n} positions")
    return p


def dexp_nbody_gaussian(cfg: NBodyConfig, x, xp) -> float:
    """``9 M_total^2 / R^2 |x_cm - x'_cm|^2`` for equal radii (1D or 3D positions)."""
    if max(cfg.radii) != min(cfg.radii):
        raise UnsupportedConfiguration("the N-body Gaussian form needs equal radii")
    p, q = _as_points(x, cfg.N), _as_points(xp, cfg.N)
    m = np.asarray(cfg.masses)
    shift = m @ (p - q) / cfg.total_mass
    return float(9.0 * cfg.total_mass**2 / cfg.radii[0] ** 2 * (shift @ shift))


def dexp_nbody_log(cfg: NBodyConfig, x, xp) -> float:
    """Many-ball logarithmic regime.

    ``D = sum_IJ 12 M_I M_J ln(|x'_I - x_J||x_I - x'_J| / (|x_I - x_J||x'_I - x'_J|))``
    with the ``I = J`` denominator replaced by ``R_I^2``.
    """
    p, q = _as_points(x, cfg.N), _as_points(xp, cfg.N)
    if np.array_equal(p, q):
        return 0.0
    m = np.asarray(cfg.masses)
    r = np.asarray(cfg.radii)

    def dist(a, b):
        return np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1)

    num = dist(q, p) * dist(p, q)
    den = dist(p, p) * dist(q, q)
    np.fill_diagonal(den, r**2)
    if np.any(num == 0) or np.any(den == 0):
        raise SingularConfiguration("coincident points make a required distance vanish")
    return float(np.sum(12.0 * np.outer(m, m) * np.log(num / den)))

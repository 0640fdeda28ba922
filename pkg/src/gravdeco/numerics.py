"""Grids, quadrature, Hermitian eigensolves and Schrodinger propagation.

Everything here is plumbing for the physics modules: a uniform 1D grid with
hard-wall boundaries, an adaptive Gauss-Kronrod integrator for semi-infinite
oscillatory integrals, a thin wrapper around LAPACK's Hermitian eigensolver and
a Crank-Nicolson (implicit midpoint) propagator.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
import scipy.special

__all__ = [
    "Grid1D",
    "QuadratureSpec",
    "QuadratureBudgetExceeded",
    "PropagationUnstable",
    "TrigPowerTail",
    "HamiltonianSpec",
    "integrate_semiinfinite",
    "adaptive_gauss_kronrod",
    "expn_complex",
    "hermitian_spectrum",
    "position_operator",
    "momentum_operator",
    "p2_operator",
    "hamiltonian_matrix",
    "schrodinger_propagate",
]


# ---------------------------------------------------------------------------
# grids


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid ``x_min, x_min + dx, ..., x_max`` with ``n`` points.

    Wave functions vanish just outside the grid (one spacing beyond either
    end), which is where the hard walls sit.
    """

    x_min: float
    x_max: float
    n: int

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("grid needs n >= 2")
        if not self.x_max > self.x_min:
            raise ValueError("grid needs x_max > x_min")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n - 1)

    @property
    def points(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n)

    @property
    def is_symmetric(self) -> bool:
        return self.n % 2 == 1 and math.isclose(self.x_min, -self.x_max, rel_tol=0, abs_tol=1e-12 * self.x_max)

    @property
    def walls(self) -> tuple[float, float]:
        return self.x_min - self.dx, self.x_max + self.dx

    @classmethod
    def symmetric(cls, half_width: float, n: int) -> "Grid1D":
        """Odd-sized grid on ``[-half_width, half_width]`` with a node at 0."""
        if n % 2 == 0:
            n += 1
        return cls(-half_width, half_width, n)

    @classmethod
    def box(cls, delta: float, n: int) -> "Grid1D":
        """Interior nodes of a box whose hard walls sit exactly at +-delta."""
        if n % 2 == 0:
            n += 1
        h = 2.0 * delta / (n + 1)
        return cls(-delta + h, delta - h, n)

    def to_dict(self) -> dict:
        return {"x_min": self.x_min, "x_max": self.x_max, "n": self.n}


# ---------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True)
class QuadratureSpec:
    abs_tol: float = 1e-9
    rel_tol: float = 1e-9
    tail_cutoff: float | None = None
    panel_budget: int = 200_000

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("quadrature tolerances must be positive")
        if self.tail_cutoff is not None and self.tail_cutoff <= 0:
            raise ValueError("tail_cutoff must be positive")
        if self.panel_budget < 1:
            raise ValueError("panel_budget must be >= 1")


class QuadratureBudgetExceeded(RuntimeError):
    """Raised when the panel budget runs out before the tolerance is met."""

    def __init__(self, estimate: float, error: float, panels: int):
        super().__init__(
            f"quadrature budget exceeded after {panels} panels: "
            f"estimate {estimate!r} with error {error:.3e}"
        )
        self.estimate = estimate
        self.error = error
        self.panels = panels


class PropagationUnstable(RuntimeError):
    pass


# 15-point Kronrod nodes on [-1, 1]; the odd-indexed ones are the 7 Gauss nodes.
_XK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
GK_NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
GK_WEIGHTS = np.concatenate([_WK[:-1], _WK[::-1]])
# Gauss weights aligned with GK_NODES (zero on the Kronrod-only nodes)
GAUSS_WEIGHTS = np.zeros(15)
GAUSS_WEIGHTS[[1, 3, 5, 7, 9, 11, 13]] = np.concatenate([_WG[:-1], _WG[::-1]])

_EPS = np.finfo(float).eps


def _gk15(f, a: np.ndarray, b: np.ndarray):
    """Integral and QUADPACK-style error estimate on every panel [a_i, b_i]."""
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    x = mid[:, None] + half[:, None] * GK_NODES[None, :]
    fx = np.asarray(f(x), dtype=float)
    if fx.shape != x.shape:
        fx = np.broadcast_to(fx, x.shape)
    rk = fx @ GK_WEIGHTS
    rg = fx @ GAUSS_WEIGHTS
    mean = 0.5 * rk
    resasc = np.abs(fx - mean[:, None]) @ GK_WEIGHTS
    resabs = np.abs(fx) @ GK_WEIGHTS
    err = np.abs(rk - rg)
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = np.where(resasc > 0, resasc * np.minimum(1.0, (200.0 * err / resasc) ** 1.5), err)
    floor = 50.0 * _EPS * resabs
    scaled = np.maximum(scaled, floor)
    return rk * half, scaled * np.abs(half)


def adaptive_gauss_kronrod(
    f: Callable[[np.ndarray], np.ndarray],
    edges: Sequence[float] | np.ndarray,
    abs_tol: float,
    rel_tol: float,
    budget: int,
) -> tuple[float, float, int]:
    """Adaptive panel subdivision over the partition ``edges``.

    ``f`` must accept an ndarray of abscissae and return values of the same
    shape. Every refinement round bisects, in one vectorized call, all panels
    whose error exceeds their width-proportional share of the tolerance.
    Returns ``(integral, error_estimate, panel_count)``.
    """
    edges = np.asarray(edges, dtype=float)
    a, b = edges[:-1], edges[1:]
    vals, errs = _gk15(f, a, b)
    # converged panels are frozen into these accumulators
    done_val = 0.0
    done_err = 0.0
    done_count = 0
    span = float(edges[-1] - edges[0])
    while True:
        total = done_val + vals.sum()
        err = done_err + errs.sum()
        tol = max(abs_tol, rel_tol * abs(total))
        npanels = done_count + a.size
        if err <= tol:
            return float(total), float(err), npanels
        share = tol * (b - a) / span
        bad = errs > 0.5 * share
        if not bad.any():
            bad = errs >= errs.max()
        if npanels + int(bad.sum()) > budget:
            raise QuadratureBudgetExceeded(float(total), float(err), npanels)
        done_val += vals[~bad].sum()
        done_err += errs[~bad].sum()
        done_count += int((~bad).sum())
        a, b = a[bad], b[bad]
        m = 0.5 * (a + b)
        a, b = np.concatenate([a, m]), np.concatenate([m, b])
        vals, errs = _gk15(f, a, b)


def expn_complex(m: int, z: complex) -> complex:
    """Generalized exponential integral ``E_m(z) = int_1^inf e^{-zt} t^{-m} dt``.

    For ``|z| < 1`` the upward recurrence from ``E_1`` is used (it is stable
    there); otherwise the continued fraction, evaluated by modified Lentz.
    Valid for ``z`` off the negative real axis, in particular on the
    imaginary axis.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    z = complex(z)
    if abs(z) < 1.0:
        e = complex(scipy.special.exp1(z))
        ez = cmath.exp(-z)
        for n in range(1, m):
            e = (ez - z * e) / n
        return e
    tiny = 1e-300
    b = z + m
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 10_000):
        an = -i * (m - 1 + i)
        b += 2.0
        d = an * d + b
        if d == 0:
            d = tiny
        c = b + an / c
        if c == 0:
            c = tiny
        d = 1.0 / d
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return h * cmath.exp(-z)


@dataclass(frozen=True)
class TrigPowerTail:
    """Exact tail for integrands of the form ``Re sum_j c_j k^{-m_j} e^{i w_j k}``.

    ``terms`` is a sequence of ``(coefficient, power, frequency)`` triples.
    The tail from ``K`` to infinity of each term is ``c K^{1-m} E_m(-i w K)``
    (or ``c K^{1-m}/(m-1)`` when ``w == 0``).
    """

    terms: tuple[tuple[complex, int, float], ...]

    def __call__(self, cutoff: float) -> float:
        total = 0.0
        for c, m, w in self.terms:
            if abs(w) * cutoff < 1e-14:
                if m <= 1:
                    raise ValueError("non-oscillatory term with power <= 1 has no finite tail")
                total += (complex(c) * cutoff ** (1 - m) / (m - 1)).real
            else:
                total += (complex(c) * cutoff ** (1 - m) * expn_complex(m, -1j * w * cutoff)).real
        return total


def _hurwitz_tail(f, cutoff: float, period: float, power: float) -> tuple[float, float]:
    """Continue the sequence of per-period integrals as ``c (n + 1/2)^-power``.

    Returns the extrapolated tail and a crude error estimate (difference
    between fits anchored on the last and second-to-last period).
    """
    if power <= 1:
        raise ValueError("decay_power must exceed 1")
    n_last = cutoff / period
    cycles = []
    for shift in (1, 2):
        lo = cutoff - shift * period
        val, _ = _gk15(f, np.linspace(lo, lo + period, 9)[:-1], np.linspace(lo, lo + period, 9)[1:])
        cycles.append(float(val.sum()))
    estimates = []
    for shift, val in zip((1, 2), cycles):
        centre = n_last - shift + 0.5
        c = val * centre ** power
        estimates.append(c * float(scipy.special.zeta(power, n_last + 0.5)))
    return estimates[0], abs(estimates[0] - estimates[1])


def integrate_semiinfinite(
    f: Callable[[np.ndarray], np.ndarray],
    spec: QuadratureSpec | None = None,
    *,
    tail: Callable[[float], float] | None = None,
    period: float | None = None,
    decay_power: float | None = None,
    full_output: bool = False,
):
    """Integrate a vectorized ``f`` over ``(0, inf)``.

    The interval ``[0, cutoff]`` is handled by adaptive Gauss-Kronrod panels
    (initially one per half ``period`` when given). Beyond the cutoff either

    * ``tail(cutoff)`` supplies the exact remainder, or
    * ``decay_power`` asserts the per-period integrals decay like a power law
      and the remainder is summed with a Hurwitz zeta function, or
    * neither is given and the integrand is assumed negligible past the
      cutoff (checked against the last period's contribution).
    """
    spec = spec or QuadratureSpec()
    cutoff = spec.tail_cutoff
    if cutoff is None:
        cutoff = 64.0 * (period or 1.0)
    width = 0.5 * period if period else cutoff / 64.0
    npan = max(1, int(math.ceil(cutoff / width)))
    edges = np.linspace(0.0, cutoff, npan + 1)
    if npan > spec.panel_budget:
        raise QuadratureBudgetExceeded(float("nan"), float("inf"), 0)
    finite, err, used = adaptive_gauss_kronrod(f, edges, 0.5 * spec.abs_tol, 0.5 * spec.rel_tol, spec.panel_budget)

    if tail is not None:
        rest, rest_err = float(tail(cutoff)), 0.0
    elif decay_power is not None:
        rest, rest_err = _hurwitz_tail(f, cutoff, period or 1.0, decay_power)
    else:
        last = period or cutoff / 64.0
        v, _ = _gk15(f, np.array([cutoff - last]), np.array([cutoff]))
        rest, rest_err = 0.0, abs(float(v[0]))
    total = finite + rest
    err += rest_err
    if err > max(spec.abs_tol, spec.rel_tol * abs(total)):
        raise QuadratureBudgetExceeded(total, err, used)
    if full_output:
        return total, err, used
    return total


# ---------------------------------------------------------------------------
# eigensolver


def hermitian_spectrum(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and matching orthonormal eigenvector columns."""
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("expected a square matrix")
    w, v = np.linalg.eigh(m)
    return w[::-1].copy(), v[:, ::-1].copy()


# ---------------------------------------------------------------------------
# grid operators and Hamiltonians


def position_operator(grid: Grid1D) -> np.ndarray:
    return np.diag(grid.points)


def _first_diff(n: int, dx: float) -> np.ndarray:
    d = np.zeros((n, n))
    i = np.arange(n - 1)
    d[i, i + 1] = 1.0
    d[i + 1, i] = -1.0
    return d / (2.0 * dx)


def momentum_operator(grid: Grid1D) -> np.ndarray:
    """Central-difference ``-i d/dx`` with hard walls; Hermitian."""
    return -1j * _first_diff(grid.n, grid.dx)


def p2_operator(grid: Grid1D, order: int = 4) -> np.ndarray:
    """Finite-difference ``-d^2/dx^2`` with hard walls (real symmetric).

    ``order=2`` is the three-point stencil used by the Hamiltonian;
    ``order=4`` is the five-point stencil, whose O(dx^4) error keeps
    kernel-level momentum identities accurate on desk-sized grids.
    """
    n, dx = grid.n, grid.dx
    if order == 2:
        return (2.0 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)) / dx**2
    if order == 4:
        m = 2.5 * np.eye(n) - 4.0 / 3.0 * (np.eye(n, k=1) + np.eye(n, k=-1))
        m += (np.eye(n, k=2) + np.eye(n, k=-2)) / 12.0
        return m / dx**2
    raise ValueError("order must be 2 or 4")


@dataclass(frozen=True)
class HamiltonianSpec:
    """``p^2/2M + V(x)`` on a hard-walled grid.

    kind is one of ``free``, ``harmonic`` (V = k x^2 / 2), ``box`` (walls at
    +-delta, which must coincide with the grid's walls) or ``potential``
    (V sampled on the grid).
    """

    kind: str
    M: float
    k: float = 0.0
    delta: float | None = None
    V: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("free", "harmonic", "box", "potential"):
            raise ValueError(f"unknown Hamiltonian kind {self.kind!r}")
        if not self.M > 0:
            raise ValueError("mass must be positive")
        if self.k < 0:
            raise ValueError("spring constant must be >= 0")
        if self.kind == "box" and not (self.delta and self.delta > 0):
            raise ValueError("box Hamiltonian needs delta > 0")
        if self.kind == "potential" and self.V is None:
            raise ValueError("potential Hamiltonian needs V")

    @classmethod
    def free(cls, M):
        return cls("free", M)

    @classmethod
    def harmonic(cls, M, k):
        return cls("harmonic", M, k=k)

    @classmethod
    def box(cls, M, delta):
        return cls("box", M, delta=delta)

    @classmethod
    def potential(cls, V, M):
        return cls("potential", M, V=np.asarray(V, dtype=float))

    @property
    def period(self) -> float:
        if self.kind != "harmonic" or self.k == 0:
            raise ValueError("only a harmonic Hamiltonian has a period")
        return 2.0 * math.pi * math.sqrt(self.M / self.k)

    def potential_on(self, grid: Grid1D) -> np.ndarray:
        x = grid.points
        if self.kind == "harmonic":
            return 0.5 * self.k * x**2
        if self.kind == "potential":
            if self.V.shape != (grid.n,):
                raise ValueError("potential does not match grid")
            return self.V
        if self.kind == "box":
            lo, hi = grid.walls
            if not (math.isclose(lo, -self.delta, rel_tol=1e-9) and math.isclose(hi, self.delta, rel_tol=1e-9)):
                raise ValueError("box walls must coincide with the grid walls; use Grid1D.box")
        return np.zeros(grid.n)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "M": self.M}
        if self.kind == "harmonic":
            d["k"] = self.k
        if self.kind == "box":
            d["delta"] = self.delta
        if self.kind == "potential":
            d["V"] = self.V.tolist()
        return d


def _h_bands(h: HamiltonianSpec, grid: Grid1D) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal and off-diagonal of the (real, tridiagonal) grid Hamiltonian."""
    dx = grid.dx
    diag = 1.0 / (h.M * dx**2) + h.potential_on(grid)
    off = np.full(grid.n - 1, -0.5 / (h.M * dx**2))
    return diag, off


def hamiltonian_matrix(h: HamiltonianSpec, grid: Grid1D) -> np.ndarray:
    diag, off = _h_bands(h, grid)
    return np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)


def _apply_tridiag(diag, off, v):
    out = diag * v
    out[:-1] += off * v[1:]
    out[1:] += off * v[:-1]
    return out


def schrodinger_propagate(psi, h: HamiltonianSpec, t: float, *, method: str = "cn", steps: int | None = None):
    """Evolve a ``WaveFunction`` by ``exp(-iHt)`` on its grid.

    ``method="cn"`` uses Crank-Nicolson (implicit midpoint) steps, chosen so
    that ``dt * ||H psi|| <= 0.01`` unless ``steps`` is given;
    ``method="spectral"`` exponentiates the grid Hamiltonian exactly.
    """
    grid = psi.grid
    amps = np.asarray(psi.amplitudes, dtype=complex)
    if t == 0:
        return psi
    norm0 = float(np.sum(np.abs(amps) ** 2) * grid.dx)
    diag, off = _h_bands(h, grid)
    if method == "spectral":
        w, v = scipy.linalg.eigh_tridiagonal(diag, off)
        new = v @ (np.exp(-1j * w * t) * (v.T @ amps))
    elif method == "cn":
        if steps is None:
            hpsi = _apply_tridiag(diag, off, amps)
            scale = math.sqrt(float(np.sum(np.abs(hpsi) ** 2) * grid.dx) / max(norm0, 1e-300))
            steps = max(1, int(math.ceil(abs(t) * scale / 0.01)))
        dt = t / steps
        ab = np.zeros((3, grid.n), dtype=complex)
        ab[0, 1:] = 0.5j * dt * off
        ab[1, :] = 1.0 + 0.5j * dt * diag
        ab[2, :-1] = 0.5j * dt * off
        new = amps.copy()
        for _ in range(steps):
            rhs = new - 0.5j * dt * _apply_tridiag(diag, off, new)
            new = scipy.linalg.solve_banded((1, 1), ab, rhs, check_finite=False)
    else:
        raise ValueError(f"unknown propagation method {method!r}")
    norm1 = float(np.sum(np.abs(new) ** 2) * grid.dx)
    if abs(norm1 - norm0) > 1e-6:
        raise PropagationUnstable(f"norm drifted from {norm0:.12g} to {norm1:.12g}")
    if hasattr(psi, "with_amplitudes"):
        return psi.with_amplitudes(new)
    return replace(psi, amplitudes=new)

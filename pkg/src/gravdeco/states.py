"""Wave functions, physical density kernels and their expectation values.

A density kernel stores ``K[i, j] = rho(x_i, x_j)`` on a grid. As an operator
on amplitude vectors it acts as ``K * dx`` (``K * dx1 * dx2`` for two bodies),
so ``tr(rho A) = dx * sum_ij K_ij A_ji`` for an operator matrix ``A``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .decoherence import BallParams, DecoherenceSpec, alpha, dexp_values
from .numerics import Grid1D, hermitian_spectrum, momentum_operator, p2_operator

__all__ = [
    "WaveFunction",
    "ProductWaveFunction",
    "DensityKernel",
    "GaussianModelParams",
    "ObservableKernel",
    "InstanceTooLarge",
    "UncertaintyReport",
    "gaussian_packet",
    "complex_gaussian",
    "box_eigenstate",
    "hermite_state",
    "cat_wavefunction",
    "pure_kernel",
    "build_rho_gauss",
    "build_rho_ball",
    "build_rho_nbody",
    "first_order_rho",
    "expect",
    "expect_wf",
    "expect_parity",
    "parity_first_order",
    "naive_p2_offset",
    "uncertainty_report",
    "position_moments",
    "wavefunction_to_dict",
    "wavefunction_from_dict",
    "kernel_to_dict",
    "kernel_from_dict",
    "write_diagonal_csv",
]

NORM_TOL = 1e-8
PARITY_TOL = 1e-10
DEFAULT_MAX_ENTRIES = 20_000_000


class InstanceTooLarge(MemoryError):
    pass


def _parity_holds(grid: Grid1D, amps: np.ndarray, tag: str) -> bool:
    if tag == "none":
        return True
    if not grid.is_symmetric:
        return False
    sign = 1.0 if tag == "even" else -1.0
    scale = max(float(np.max(np.abs(amps))), 1e-300)
    return float(np.max(np.abs(amps[::-1] - sign * amps))) <= PARITY_TOL * scale


@dataclass(frozen=True, eq=False)
class WaveFunction:
    """Normalized complex amplitudes on a hard-walled uniform grid."""

    grid: Grid1D
    amplitudes: np.ndarray
    parity_tag: str = "none"

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        if amps.shape != (self.grid.n,):
            raise ValueError("amplitudes do not match the grid")
        if self.parity_tag not in ("even", "odd", "none"):
            raise ValueError(f"unknown parity tag {self.parity_tag!r}")
        norm = self.norm
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"wave function not normalized (norm {norm:.12g})")
        if not _parity_holds(self.grid, amps, self.parity_tag):
            raise ValueError(f"amplitudes are not {self.parity_tag} on a symmetric grid")

    @classmethod
    def from_values(cls, grid: Grid1D, values, parity: str | None = None) -> "WaveFunction":
        """Normalize ``values``; ``parity=None`` detects even/odd symmetry."""
        v = np.asarray(values, dtype=complex)
        nrm = math.sqrt(float(np.sum(np.abs(v) ** 2)) * grid.dx)
        if nrm == 0:
            raise ValueError("zero wave function")
        v = v / nrm
        if parity is None:
            parity = next((t for t in ("even", "odd") if _parity_holds(grid, v, t)), "none")
        return cls(grid, v, parity)

    @classmethod
    def from_function(cls, grid: Grid1D, f: Callable[[np.ndarray], np.ndarray], parity: str | None = None):
        return cls.from_values(grid, f(grid.points), parity)

    def with_amplitudes(self, amps) -> "WaveFunction":
        amps = np.asarray(amps, dtype=complex)
        tag = self.parity_tag if _parity_holds(self.grid, amps, self.parity_tag) else "none"
        return WaveFunction(self.grid, amps, tag)

    @property
    def norm(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2) * self.grid.dx)

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def inner(self, other: "WaveFunction") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes) * self.grid.dx)


@dataclass(frozen=True, eq=False)
class ProductWaveFunction:
    """Many-body amplitudes ``Psi[i1, i2, ...]`` on a product of grids."""

    grids: tuple[Grid1D, ...]
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        object.__setattr__(self, "grids", tuple(self.grids))
        object.__setattr__(self, "amplitudes", amps)
        if amps.shape != tuple(g.n for g in self.grids):
            raise ValueError("amplitudes do not match the product grid")
        norm = float(np.sum(np.abs(amps) ** 2)) * self.weight
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"wave function not normalized (norm {norm:.12g})")

    @property
    def weight(self) -> float:
        return math.prod(g.dx for g in self.grids)

    @classmethod
    def product(cls, *factors: WaveFunction) -> "ProductWaveFunction":
        amps = functools.reduce(np.multiply.outer, [f.amplitudes for f in factors])
        return cls(tuple(f.grid for f in factors), amps)

    @classmethod
    def from_values(cls, grids, values) -> "ProductWaveFunction":
        v = np.asarray(values, dtype=complex)
        w = math.prod(g.dx for g in grids)
        return cls(tuple(grids), v / math.sqrt(float(np.sum(np.abs(v) ** 2)) * w))

    @property
    def flat(self) -> np.ndarray:
        return self.amplitudes.reshape(-1)


@dataclass(frozen=True)
class GaussianModelParams:
    kappa: float

    def __post_init__(self):
        if self.kappa < 0:
            raise ValueError("kappa must be >= 0")

    @classmethod
    def from_ball(cls, ball: BallParams) -> "GaussianModelParams":
        return cls(alpha(ball))


@dataclass(frozen=True, eq=False)
class DensityKernel:
    """Hermitian kernel ``rho(q, q')`` on one grid per body."""

    grids: tuple[Grid1D, ...]
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        m.setflags(write=False)
        object.__setattr__(self, "grids", tuple(self.grids))
        object.__setattr__(self, "matrix", m)
        size = math.prod(g.n for g in self.grids)
        if m.shape != (size, size):
            raise ValueError("kernel does not match its grids")
        if not np.array_equal(m, m.conj().T):
            raise ValueError("kernel is not exactly Hermitian")
        tr = self.trace
        if abs(tr - 1.0) > NORM_TOL:
            raise ValueError(f"kernel trace {tr:.12g} differs from 1")

    @property
    def grid(self) -> Grid1D:
        return self.grids[0]

    @property
    def nbody(self) -> int:
        return len(self.grids)

    @property
    def trace_weight(self) -> float:
        return math.prod(g.dx for g in self.grids)

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix))) * self.trace_weight

    @property
    def diagonal(self) -> np.ndarray:
        return np.real(np.diag(self.matrix)).copy()

    @property
    def operator(self) -> np.ndarray:
        """Matrix of rho acting on amplitude vectors."""
        return self.matrix * self.trace_weight

    @functools.cached_property
    def spectrum(self) -> tuple[np.ndarray, np.ndarray]:
        """Eigenvalues (descending) and eigenvectors as grid amplitudes (unit norm with dx)."""
        w, v = hermitian_spectrum(self.operator)
        return w, v / math.sqrt(self.trace_weight)

    @property
    def min_eigenvalue(self) -> float:
        return float(self.spectrum[0][-1])

    def purity(self) -> float:
        """``tr rho^2`` by direct kernel contraction."""
        return float(np.sum(np.abs(self.matrix) ** 2)) * self.trace_weight**2


def _hermitize(m: np.ndarray) -> np.ndarray:
    """Mirror the upper triangle so the result is Hermitian bit for bit."""
    up = np.triu(m, 1)
    out = up + up.conj().T
    out[np.diag_indices_from(out)] = np.real(np.diag(m))
    return out


def pure_kernel(psi: WaveFunction) -> DensityKernel:
    a = psi.amplitudes
    k = np.outer(a, a.conj())
    k[np.diag_indices_from(k)] = np.abs(a) ** 2
    return DensityKernel((psi.grid,), _hermitize(k))


def _dressed(psi: WaveFunction, factor: np.ndarray) -> DensityKernel:
    a = psi.amplitudes
    k = np.outer(a, a.conj()) * factor
    k[np.diag_indices_from(k)] = np.abs(a) ** 2
    return DensityKernel((psi.grid,), _hermitize(k))


def build_rho_gauss(psi: WaveFunction, kappa: float) -> DensityKernel:
    """``psi(x) psi*(x') exp(-kappa (x - x')^2)``."""
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    x = psi.grid.points
    return _dressed(psi, np.exp(-kappa * (x[:, None] - x[None, :]) ** 2))


def build_rho_ball(psi: WaveFunction, ball: BallParams, dspec: DecoherenceSpec) -> DensityKernel:
    """``psi(x) psi*(x') exp(-D(|x - x'|))`` for the centre of mass of a ball."""
    if dspec.ball != ball:
        dspec = DecoherenceSpec(dspec.mode, ball, dspec.quad)
    if dspec.mode == "gaussian":
        x = psi.grid.points
        return _dressed(psi, np.exp(-alpha(ball) * (x[:, None] - x[None, :]) ** 2))
    # the uniform grid has only n distinct separations
    per_offset = dexp_values(np.arange(psi.grid.n) * psi.grid.dx, dspec)
    idx = np.arange(psi.grid.n)
    return _dressed(psi, np.exp(-per_offset[np.abs(idx[:, None] - idx[None, :])]))


def build_rho_nbody(
    Psi: ProductWaveFunction,
    d: Callable[[tuple, tuple], np.ndarray],
    max_entries: int = DEFAULT_MAX_ENTRIES,
) -> DensityKernel:
    """``Psi(q) Psi*(q') exp(-d(q, q'))`` on a product grid.

    ``d`` receives two tuples of coordinate arrays (one per body, shaped to
    broadcast as rows and columns) and must vanish when ``q == q'``.
    """
    size = Psi.flat.size
    if size * size > max_entries:
        raise InstanceTooLarge(f"{size}^2 kernel entries exceed the cap of {max_entries}")
    mesh = np.meshgrid(*[g.points for g in Psi.grids], indexing="ij")
    q = tuple(c.reshape(-1)[:, None] for c in mesh)
    qp = tuple(c.reshape(-1)[None, :] for c in mesh)
    dval = np.broadcast_to(np.asarray(d(q, qp), dtype=float), (size, size))
    a = Psi.flat
    k = np.outer(a, a.conj()) * np.exp(-dval)
    k[np.diag_indices_from(k)] = np.abs(a) ** 2
    return DensityKernel(Psi.grids, _hermitize(k))


def first_order_rho(psi: WaveFunction, kappa: float) -> DensityKernel:
    """``rho0 - kappa [x, [x, rho0]]``; the kernel is ``rho0 (1 - kappa (x - x')^2)``.

    Not positive beyond first order in ``kappa``.
    """
    x = psi.grid.points
    return _dressed(psi, 1.0 - kappa * (x[:, None] - x[None, :]) ** 2)


# ---------------------------------------------------------------------------
# observables


def _parity_matrix(grid: Grid1D) -> np.ndarray:
    if not grid.is_symmetric:
        raise ValueError("parity needs an odd-sized grid symmetric about 0")
    return np.fliplr(np.eye(grid.n))


@dataclass(frozen=True, eq=False)
class ObservableKernel:
    """A Hermitian observable for one body of a density kernel.

    kind: ``position_function`` (``f`` callable or sampled array),
    ``momentum``, ``momentum_squared``, ``parity`` or ``custom`` (``kernel``
    is ``A(x_i, x_j)``, acting as ``A * dx``).
    """

    kind: str
    f: Callable | np.ndarray | None = None
    kernel: np.ndarray | None = None
    body: int = 0

    def __post_init__(self):
        if self.kind not in ("position_function", "momentum", "momentum_squared", "parity", "custom"):
            raise ValueError(f"unknown observable kind {self.kind!r}")
        if self.kind == "position_function" and self.f is None:
            raise ValueError("position_function observable needs f")
        if self.kind == "custom":
            if self.kernel is None:
                raise ValueError("custom observable needs a kernel")
            k = np.asarray(self.kernel)
            if not np.allclose(k, k.conj().T, rtol=0, atol=1e-12 * max(1.0, float(np.max(np.abs(k))))):
                raise ValueError("custom kernel is not Hermitian")

    @classmethod
    def position(cls, f, body: int = 0):
        return cls("position_function", f=f, body=body)

    def matrix(self, grid: Grid1D) -> np.ndarray:
        """Operator matrix acting on amplitude vectors on ``grid``."""
        if self.kind == "position_function":
            vals = self.f(grid.points) if callable(self.f) else np.asarray(self.f)
            if np.shape(vals) != (grid.n,):
                raise ValueError("sampled function does not match the grid")
            return np.diag(np.asarray(vals, dtype=complex))
        if self.kind == "momentum":
            return momentum_operator(grid)
        if self.kind == "momentum_squared":
            return p2_operator(grid).astype(complex)
        if self.kind == "parity":
            return _parity_matrix(grid).astype(complex)
        k = np.asarray(self.kernel, dtype=complex)
        if k.shape != (grid.n, grid.n):
            raise ValueError("custom kernel does not match the grid")
        return k * grid.dx


def _trace_with(rho: DensityKernel, a: np.ndarray, body: int) -> complex:
    if not 0 <= body < rho.nbody:
        raise ValueError(f"observable body {body} out of range")
    shape = tuple(g.n for g in rho.grids)
    if a.shape != (shape[body], shape[body]):
        raise ValueError("observable does not match the kernel grid")
    op = rho.operator
    if rho.nbody == 1:
        return complex(np.sum(op * a.T))
    t = op.reshape(shape + shape)
    # contract every other body's indices, then trace against a
    n = rho.nbody
    letters = "abcdefgh"
    rows = list(letters[:n])
    cols = list(letters[:n])
    rows[body], cols[body] = "y", "z"
    reduced = np.einsum(f"{''.join(rows)}{''.join(cols)}->yz", t)
    return complex(np.sum(reduced * a.T))


def expect(rho: DensityKernel, obs: ObservableKernel) -> float:
    """``tr(rho A)``; the imaginary residue must stay below 1e-8 of the scale."""
    if not 0 <= obs.body < rho.nbody:
        raise ValueError(f"observable body {obs.body} out of range")
    a = obs.matrix(rho.grids[obs.body])
    val = _trace_with(rho, a, obs.body)
    scale = max(1.0, abs(val.real))
    if abs(val.imag) > 1e-8 * scale:
        raise ValueError(f"expectation has imaginary part {val.imag:.3e}")
    return float(val.real)


def expect_wf(psi: WaveFunction, a: np.ndarray) -> complex:
    """``<psi|A|psi>`` for an operator matrix ``A`` on amplitude vectors."""
    v = psi.amplitudes
    return complex(np.vdot(v, a @ v) * psi.grid.dx)


def position_moments(psi: WaveFunction) -> tuple[float, float]:
    """``(<x>, <x^2>)`` of the would-be state."""
    x = psi.grid.points
    w = psi.density * psi.grid.dx
    return float(w @ x), float(w @ (x * x))


def expect_parity(rho: DensityKernel) -> float:
    return expect(rho, ObservableKernel("parity"))


def parity_first_order(psi: WaveFunction, kappa: float) -> float:
    """``+-(1 - 4 kappa <x^2>)`` for an even/odd state."""
    if psi.parity_tag == "none":
        raise ValueError("parity formula needs an even or odd state")
    sign = 1.0 if psi.parity_tag == "even" else -1.0
    return sign * (1.0 - 4.0 * kappa * position_moments(psi)[1])


def naive_p2_offset(dim: int, alpha_or_kappa: float) -> float:
    """Shift of ``tr(rho p^2)`` over the would-be value: ``2 alpha`` per component."""
    if dim not in (1, 3):
        raise ValueError("dim must be 1 or 3")
    return 2.0 * dim * alpha_or_kappa


@dataclass(frozen=True)
class UncertaintyReport:
    dx2: float
    dp2_physical: float
    dp2_wouldbe: float
    heisenberg_lhs: float
    modified_rhs: float
    lambda_max: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def uncertainty_report(psi: WaveFunction, ball: BallParams) -> UncertaintyReport:
    a = alpha(ball)
    g = psi.grid
    mx, mx2 = position_moments(psi)
    dx2 = mx2 - mx * mx
    p = expect_wf(psi, momentum_operator(g)).real
    p2 = expect_wf(psi, p2_operator(g)).real
    dp2 = p2 - p * p
    phys = dp2 + naive_p2_offset(1, a)
    return UncertaintyReport(
        dx2=dx2,
        dp2_physical=phys,
        dp2_wouldbe=dp2,
        heisenberg_lhs=dx2 * phys,
        modified_rhs=0.25 + 2.0 * a * dx2,
        lambda_max=2.0 * math.pi * ball.R / (3.0 * math.sqrt(6.0) * ball.M),
    )


# ---------------------------------------------------------------------------
# standard states


def gaussian_packet(grid: Grid1D, sigma: float, x0: float = 0.0, p0: float = 0.0) -> WaveFunction:
    """Minimum-uncertainty packet with ``<x> = x0``, ``<p> = p0`` and width ``sigma``."""
    x = grid.points
    vals = np.exp(-((x - x0) ** 2) / (4.0 * sigma**2) + 1j * p0 * x)
    parity = None if (x0 == 0 and p0 == 0) else "none"
    return WaveFunction.from_values(grid, vals, parity)


def complex_gaussian(grid: Grid1D, c: complex) -> WaveFunction:
    """``exp(-c x^2)``; needs ``Re c > 0``."""
    if complex(c).real <= 0:
        raise ValueError("Re c must be positive")
    return WaveFunction.from_values(grid, np.exp(-complex(c) * grid.points**2), "even")


def box_eigenstate(grid: Grid1D, delta: float, level: int = 1) -> WaveFunction:
    """``level``-th stationary state of a particle between walls at +-delta."""
    if level < 1:
        raise ValueError("level must be >= 1")
    x = grid.points
    if level % 2:
        vals, tag = np.cos(level * math.pi * x / (2.0 * delta)), "even"
    else:
        vals, tag = np.sin(level * math.pi * x / (2.0 * delta)), "odd"
    vals = np.where(np.abs(x) <= delta, vals, 0.0)
    return WaveFunction.from_values(grid, vals, tag if grid.is_symmetric else "none")


def hermite_state(grid: Grid1D, level: int, sigma: float = 1.0) -> WaveFunction:
    """Harmonic-oscillator eigenfunction shape ``H_n(x/(sqrt2 sigma)) exp(-x^2/4sigma^2)``."""
    from numpy.polynomial.hermite import hermval

    x = grid.points
    coef = np.zeros(level + 1)
    coef[level] = 1.0
    vals = hermval(x / (math.sqrt(2.0) * sigma), coef) * np.exp(-(x**2) / (4.0 * sigma**2))
    tag = ("even" if level % 2 == 0 else "odd") if grid.is_symmetric else "none"
    return WaveFunction.from_values(grid, vals, tag)


def cat_wavefunction(grid: Grid1D, separation: float, sigma: float, c1: complex, c2: complex) -> WaveFunction:
    """``c1 g(x + a/2) + c2 g(x - a/2)`` with narrow normalized Gaussian peaks ``g``."""
    x = grid.points
    h = 0.5 * separation
    g1 = np.exp(-((x + h) ** 2) / (4.0 * sigma**2))
    g2 = np.exp(-((x - h) ** 2) / (4.0 * sigma**2))
    g1 = g1 / math.sqrt(float(g1 @ g1) * grid.dx)
    g2 = g2 / math.sqrt(float(g2 @ g2) * grid.dx)
    return WaveFunction.from_values(grid, c1 * g1 + c2 * g2, "none")


# ---------------------------------------------------------------------------
# serialization


def _interleave(a: np.ndarray) -> list[float]:
    a = np.asarray(a, dtype=complex).reshape(-1)
    out = np.empty(2 * a.size)
    out[0::2], out[1::2] = a.real, a.imag
    return out.tolist()


def _deinterleave(v, shape) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return (v[0::2] + 1j * v[1::2]).reshape(shape)


def wavefunction_to_dict(psi: WaveFunction) -> dict:
    return {
        "type": "wavefunction",
        "grid": psi.grid.to_dict(),
        "parity_tag": psi.parity_tag,
        "amplitudes": _interleave(psi.amplitudes),
    }


def wavefunction_from_dict(d: dict) -> WaveFunction:
    grid = Grid1D(**d["grid"])
    return WaveFunction(grid, _deinterleave(d["amplitudes"], (grid.n,)), d.get("parity_tag", "none"))


def kernel_to_dict(rho: DensityKernel) -> dict:
    return {
        "type": "density_kernel",
        "grids": [g.to_dict() for g in rho.grids],
        "matrix": _interleave(rho.matrix),
    }


def kernel_from_dict(d: dict) -> DensityKernel:
    grids = tuple(Grid1D(**g) for g in d["grids"])
    size = math.prod(g.n for g in grids)
    return DensityKernel(grids, _deinterleave(d["matrix"], (size, size)))


def write_diagonal_csv(rho: DensityKernel, path) -> None:
    if rho.nbody != 1:
        raise ValueError("diagonal export is defined for single-body kernels")
    with open(path, "w") as fh:
        fh.write("x,rho_diag\n")
        for x, v in zip(rho.grid.points, rho.diagonal):
            fh.write(f"{x:.17e},{v:.17e}\n")


"""Eigen-decompositions of physical density operators and the events they define.

Events are the spectral subspaces of rho: an eigenvalue lambda of
multiplicity m is one event with probability m * lambda. Small-kappa
closed forms for Gaussian-model kernels are provided alongside a
brute-force grid eigensolve that serves as their oracle.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .numerics import Grid1D, hermitian_spectrum
from .states import (
    DensityKernel,
    ObservableKernel,
    ProductWaveFunction,
    WaveFunction,
    build_rho_gauss,
    position_moments,
)

__all__ = [
    "PerturbativeSpectrum",
    "SeparableState3D",
    "Event",
    "EventSet",
    "CatState",
    "CatDiagonalization",
    "perturb_diag_1d",
    "general_first_eigenpair",
    "perturb_diag_product",
    "perturb_diag_3d",
    "brute_force_events",
    "events_from_operator",
    "separable_3d_spectrum",
    "cat_density_matrix",
    "cat_exact_diag",
    "cat_kernel",
    "is_beable",
    "beable_expectation",
]


# ---------------------------------------------------------------------------
# perturbative spectra


@dataclass(frozen=True)
class SeparableState3D:
    """Sum of product terms ``sum_t c_t f_t(x) g_t(y) h_t(z)`` on three grids."""

    grids: tuple[Grid1D, Grid1D, Grid1D]
    terms: tuple[tuple[complex, tuple[np.ndarray, np.ndarray, np.ndarray]], ...]

    def inner(self, other: "SeparableState3D") -> complex:
        total = 0j
        for (c1, f1), (c2, f2) in itertools.product(self.terms, other.terms):
            prod = np.conj(c1) * c2
            for g, a, b in zip(self.grids, f1, f2):
                prod *= np.vdot(a, b) * g.dx
            total += prod
        return complex(total)

    @property
    def norm(self) -> float:
        return math.sqrt(max(self.inner(self).real, 0.0))

    def normalized(self) -> "SeparableState3D":
        n = self.norm
        return SeparableState3D(self.grids, tuple((c / n, f) for c, f in self.terms))


@dataclass(frozen=True)
class PerturbativeSpectrum:
    pairs: tuple
    order_param: float

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.array([lam for lam, _ in self.pairs])


def _normalized(grid: Grid1D, values, parity=None) -> WaveFunction:
    return WaveFunction.from_values(grid, values, parity)


def perturb_diag_1d(psi: WaveFunction, kappa: float) -> PerturbativeSpectrum:
    """First-order eigenpairs of the Gaussian-model kernel for an even/odd state."""
    if psi.parity_tag == "none":
        raise ValueError("parity required: use general_first_eigenpair for untagged states")
    _, x2 = position_moments(psi)
    if kappa == 0:
        return PerturbativeSpectrum(((1.0, psi),), 0.0)
    x = psi.grid.points
    a = psi.amplitudes
    other = "odd" if psi.parity_tag == "even" else "even"
    phi1 = _normalized(psi.grid, (1.0 + kappa * x2) * a - kappa * x * x * a, psi.parity_tag)
    phi2 = _normalized(psi.grid, x * a, other)
    return PerturbativeSpectrum(((1.0 - 2.0 * kappa * x2, phi1), (2.0 * kappa * x2, phi2)), kappa * x2)


def general_first_eigenpair(psi: WaveFunction, kappa: float) -> tuple[float, WaveFunction]:
    """Leading eigenpair ``1 - 2 kappa (dx)^2`` for an arbitrary state."""
    if kappa == 0:
        return 1.0, psi
    mx, mx2 = position_moments(psi)
    var = mx2 - mx * mx
    x = psi.grid.points
    a = psi.amplitudes
    vec = (1.0 + 2.0 * kappa * var - kappa * mx2) * a - kappa * x * x * a + 2.0 * kappa * mx * x * a
    return 1.0 - 2.0 * kappa * var, _normalized(psi.grid, vec, "none")


def perturb_diag_product(psi_list: Sequence[WaveFunction], kappa: float) -> PerturbativeSpectrum:
    """First-order eigenpairs for ``Psi = psi_1 x ... x psi_N`` with a centre-of-mass Gaussian factor."""
    tags = {p.parity_tag for p in psi_list}
    if len(tags) != 1 or "none" in tags:
        raise ValueError("all factors must be even or all odd")
    Psi = ProductWaveFunction.product(*psi_list)
    if kappa == 0:
        return PerturbativeSpectrum(((1.0, Psi),), 0.0)
    s = sum(position_moments(p)[1] for p in psi_list)
    mesh = np.meshgrid(*[p.grid.points for p in psi_list], indexing="ij")
    xsum = sum(mesh)
    A = Psi.amplitudes
    phi1 = ProductWaveFunction.from_values(Psi.grids, (1.0 + kappa * s) * A - kappa * xsum**2 * A)
    phi2 = ProductWaveFunction.from_values(Psi.grids, xsum * A)
    return PerturbativeSpectrum(((1.0 - 2.0 * kappa * s, phi1), (2.0 * kappa * s, phi2)), kappa * s)


def perturb_diag_3d(factors: Sequence[WaveFunction], kappa: float) -> PerturbativeSpectrum:
    """First-order eigenpairs for ``psi = alpha(x) beta(y) gamma(z)`` with even factors.

    ``lambda_1 = 1 - 2 kappa <r^2>`` with ``phi_1 ~ (1 + kappa <r^2>) psi - kappa r^2 psi``
    and ``lambda_{2,3,4} = 2 kappa <x^2>, <y^2>, <z^2>`` with ``phi ~ x psi, y psi, z psi``.
    """
    if len(factors) != 3:
        raise ValueError("a separable 3D state needs exactly three factors")
    if any(f.parity_tag != "even" for f in factors):
        raise ValueError("the eightfold reflection symmetry needs three even factors")
    grids = tuple(f.grid for f in factors)
    amps = [f.amplitudes for f in factors]
    psi = SeparableState3D(grids, ((1.0, tuple(amps)),))
    if kappa == 0:
        return PerturbativeSpectrum(((1.0, psi),), 0.0)
    m2 = [position_moments(f)[1] for f in factors]
    r2 = sum(m2)

    def times(axis, power):
        fs = list(amps)
        fs[axis] = grids[axis].points ** power * amps[axis]
        return tuple(fs)

    phi1 = SeparableState3D(
        grids,
        ((1.0 + kappa * r2, tuple(amps)),) + tuple((-kappa, times(ax, 2)) for ax in range(3)),
    ).normalized()
    pairs = [(1.0 - 2.0 * kappa * r2, phi1)]
    for ax in range(3):
        pairs.append((2.0 * kappa * m2[ax], SeparableState3D(grids, ((1.0, times(ax, 1)),)).normalized()))
    return PerturbativeSpectrum(tuple(pairs), kappa * r2)


def separable_3d_spectrum(factors: Sequence[WaveFunction], kappa: float, keep: int = 8):
    """Exact leading eigenpairs of the 3D Gaussian-model kernel of a product state.

    The kernel factorizes into three 1D Gaussian-model kernels, so its
    eigenvalues are products of theirs. Returns ``(values, index_triples,
    factor_vectors)``, where ``factor_vectors[axis][:, i]`` are 1D grid
    amplitudes.
    """
    spectra = [build_rho_gauss(f, kappa).spectrum for f in factors]
    top = [min(keep, w.size) for w, _ in spectra]
    combos = []
    for idx in itertools.product(*[range(t) for t in top]):
        combos.append((math.prod(spectra[a][0][i] for a, i in enumerate(idx)), idx))
    combos.sort(key=lambda c: -c[0])
    combos = combos[:keep]
    return (
        np.array([c[0] for c in combos]),
        [c[1] for c in combos],
        [v for _, v in spectra],
    )


# ---------------------------------------------------------------------------
# events


@dataclass(frozen=True, eq=False)
class Event:
    probability: float
    multiplicity: int
    eigenvalue: float
    basis: np.ndarray  # columns are grid amplitudes, orthonormal with the trace weight

    def to_dict(self, with_basis: bool = False) -> dict:
        d = {"probability": self.probability, "multiplicity": self.multiplicity, "eigenvalue": self.eigenvalue}
        if with_basis:
            b = np.asarray(self.basis)
            d["basis_re"] = b.real.T.tolist()
            d["basis_im"] = b.imag.T.tolist()
        return d


@dataclass(frozen=True, eq=False)
class EventSet:
    events: tuple[Event, ...]
    residual: float
    weight: float = 1.0

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([e.probability for e in self.events])

    @property
    def total(self) -> float:
        return float(self.probabilities.sum()) + self.residual

    def to_dict(self, with_basis: bool = False) -> dict:
        return {
            "events": [e.to_dict(with_basis) for e in self.events],
            "residual": self.residual,
        }


def events_from_operator(op: np.ndarray, cluster_tol: float = 1e-8, floor: float = 1e-12, weight: float = 1.0) -> EventSet:
    """Group the spectrum of a density operator matrix into events.

    Eigenvalues within ``cluster_tol`` (relative) of the first member of a
    group form one event; eigenvalues below ``floor`` go to the residual.
    ``weight`` is the grid measure used to normalize basis vectors.
    """
    w, v = hermitian_spectrum(op)
    v = v / math.sqrt(weight)
    events = []
    residual = 0.0
    i = 0
    while i < w.size:
        lam = w[i]
        if lam < floor:
            residual += float(w[i:].sum())
            break
        j = i + 1
        while j < w.size and abs(w[j] - lam) <= cluster_tol * abs(lam):
            j += 1
        m = j - i
        mean = float(w[i:j].mean())
        events.append(Event(m * mean, m, mean, v[:, i:j]))
        i = j
    return EventSet(tuple(events), residual, weight)


def brute_force_events(rho: DensityKernel, cluster_tol: float = 1e-8, floor: float = 1e-12) -> EventSet:
    return events_from_operator(rho.operator, cluster_tol, floor, rho.trace_weight)


# ---------------------------------------------------------------------------
# cat states


@dataclass(frozen=True)
class CatState:
    c1: complex
    c2: complex
    overlap: float

    def __post_init__(self):
        if abs(abs(self.c1) ** 2 + abs(self.c2) ** 2 - 1.0) > 1e-12:
            raise ValueError("|c1|^2 + |c2|^2 must be 1")
        if not 0.0 <= self.overlap <= 1.0:
            raise ValueError("overlap must lie in [0, 1]")


@dataclass(frozen=True)
class CatDiagonalization:
    A: float
    B: float
    k: complex
    s: complex

    @property
    def phi1(self) -> np.ndarray:
        return np.array([self.k, np.conj(self.s)])

    @property
    def phi2(self) -> np.ndarray:
        return np.array([-self.s, np.conj(self.k)])

    def matrix(self) -> np.ndarray:
        return self.A * np.outer(self.phi1, self.phi1.conj()) + self.B * np.outer(self.phi2, self.phi2.conj())


def cat_density_matrix(cat: CatState) -> np.ndarray:
    """Density matrix in the orthonormal peak basis ``(psi_1, psi_2)``."""
    c1, c2, e = complex(cat.c1), complex(cat.c2), cat.overlap
    return np.array([[abs(c1) ** 2, c1 * c2.conjugate() * e], [c1.conjugate() * c2 * e, abs(c2) ** 2]])


def cat_exact_diag(cat: CatState) -> CatDiagonalization:
    """Closed-form eigen-decomposition ``A |phi1><phi1| + B |phi2><phi2|``.

    ``phi1 = k psi_1 + s* psi_2`` and ``phi2 = -s psi_1 + k* psi_2``; the
    phase is fixed by taking ``k`` real and non-negative.
    """
    p1, p2 = abs(cat.c1) ** 2, abs(cat.c2) ** 2
    b = complex(cat.c1) * complex(cat.c2).conjugate() * cat.overlap
    root = 0.5 * math.sqrt((p1 - p2) ** 2 + 4.0 * p1 * p2 * cat.overlap**2)
    A = 0.5 + root
    # the smaller root from the determinant avoids cancellation in 0.5 - root
    B = p1 * p2 * (1.0 - cat.overlap**2) / A
    if abs(b) == 0.0:
        k, sc = (1.0, 0.0) if p1 >= p2 else (0.0, 1.0)
    else:
        # either row of (rho - A) gives the eigenvector; take the one whose
        # diagonal entry A - p_i = (p_j - p_i)/2 + root does not cancel
        if p1 >= p2:
            v = np.array([0.5 * (p1 - p2) + root, b.conjugate()])
        else:
            v = np.array([b, 0.5 * (p2 - p1) + root])
        v = v / np.linalg.norm(v)
        k, sc = v[0], v[1]
        # fix the phase so that k is real and non-negative
        ph = abs(k) / k if k != 0 else 1.0
        k, sc = k * ph, sc * ph
    return CatDiagonalization(A, B, complex(k), complex(np.conj(sc)))


def cat_kernel(grid: Grid1D, cat: CatState, separation: float, width: float) -> tuple[DensityKernel, WaveFunction, WaveFunction]:
    """Grid kernel of a two-peak state whose coherence between peaks is ``overlap``.

    The peaks are compactly supported ``cos^2`` bumps, so they are exactly
    orthogonal and the kernel's nonzero spectrum is that of the 2x2 matrix.
    """
    x = grid.points
    if separation <= width:
        raise ValueError("peaks would overlap")

    def bump(c):
        t = (x - c) / width
        return np.where(np.abs(t) < 0.5, np.cos(math.pi * t) ** 2, 0.0)

    psi1 = WaveFunction.from_values(grid, bump(-0.5 * separation), "none")
    psi2 = WaveFunction.from_values(grid, bump(0.5 * separation), "none")
    m = cat_density_matrix(cat)
    basis = np.stack([psi1.amplitudes, psi2.amplitudes], axis=1)
    k = basis @ m @ basis.conj().T
    up = np.triu(k, 1)
    k = up + up.conj().T + np.diag(np.real(np.diag(k)))
    return DensityKernel((grid,), k), psi1, psi2


# ---------------------------------------------------------------------------
# beables


def _operator(B, rho: DensityKernel) -> np.ndarray:
    if isinstance(B, ObservableKernel):
        if rho.nbody != 1:
            raise ValueError("beable checks are defined for single-body kernels")
        return B.matrix(rho.grid)
    if isinstance(B, DensityKernel):
        return B.operator
    return np.asarray(B, dtype=complex)


def is_beable(B, rho: DensityKernel, tol: float = 1e-8, events: EventSet | None = None) -> dict:
    """Check that ``B`` commutes with rho and takes one value on every event."""
    b = _operator(B, rho)
    r = rho.operator
    comm = float(np.linalg.norm(b @ r - r @ b))
    scale = float(np.linalg.norm(b) * np.linalg.norm(r))
    events = events or brute_force_events(rho)
    values = []
    definite = True
    w = rho.trace_weight
    bscale = max(float(np.linalg.norm(b, 2)), 1e-300)
    lams = np.array([ev.eigenvalue for ev in events.events] + [0.0])
    # computed eigenvectors are only accurate to ~ n eps ||rho|| / gap
    roundoff = 10.0 * r.shape[0] * np.finfo(float).eps * float(np.max(np.abs(lams)))
    for i, ev in enumerate(events.events):
        V = ev.basis
        restricted = (V.conj().T @ b @ V) * w
        val = float(np.real(np.trace(restricted))) / ev.multiplicity
        leak = float(np.linalg.norm(b @ V - V @ restricted)) * math.sqrt(w)
        spread = float(np.linalg.norm(restricted - val * np.eye(ev.multiplicity)))
        gap = float(np.min(np.abs(np.delete(lams, i) - ev.eigenvalue)))
        allowed = bscale * (10.0 * tol + roundoff / max(gap, 1e-300))
        if leak > allowed or spread > allowed:
            definite = False
        values.append(val)
    return {
        "beable": bool(comm <= tol * scale and definite),
        "commutator_norm": comm,
        "event_values": values,
        "events": events,
    }


def beable_expectation(B, events: EventSet, values: Sequence[float]) -> float:
    """``sum_events probability * value``."""
    if len(values) != len(events.events):
        raise ValueError("need one value per event")
    return float(sum(e.probability * v for e, v in zip(events.events, values)))

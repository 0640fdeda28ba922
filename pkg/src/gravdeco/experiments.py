"""Experiment harnesses: position measurements, the Penrose interferometer and radiation estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from .decoherence import BallParams, NBodyConfig, alpha, dexp_auto, dexp_exact, load_constants
from .numerics import Grid1D, PropagationUnstable, p2_operator
from .states import InstanceTooLarge, WaveFunction, box_eigenstate

__all__ = [
    "PMTConfig",
    "pmt_run",
    "pmt_light_probe",
    "bead_ground_state",
    "PenroseConfig",
    "penrose_run",
    "RadiationInput",
    "graviton_estimate",
    "photon_emission_estimate",
    "D_MODELS",
    "ConfigError",
]

D_MODELS = ("nbody_gaussian", "light_probe", "exact_single_ball")
DEFAULT_MAX_ENTRIES = 2e7


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# bead


def bead_ground_state(delta: float, n: int = 257) -> WaveFunction:
    """``delta^(-1/2) cos(pi x / 2 delta)`` sampled on the interior of ``[-delta, delta]``."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    return box_eigenstate(Grid1D.box(delta, n), delta, 1)


# ---------------------------------------------------------------------------
# position measurement harness


@dataclass(frozen=True)
class PMTConfig:
    """Bead of mass ``bead.M`` between walls at ``+-delta``; a probe on a line to its right.

    The probe starts as a Gaussian packet at ``probe_start`` moving left with
    velocity ``probe_speed`` and reflects off a repulsive contact potential of
    height ``contact_height`` switched on where ``y - x < contact_range``.
    """

    bead: BallParams = BallParams(1.0, 10.0)
    delta: float = 1.0
    probe_mass: float = 1.0
    probe_radius: float | None = None
    nx: int = 21
    ny: int = 64
    y_range: tuple = (0.0, 8.0)
    probe_start: float = 4.5
    probe_width: float = 0.5
    probe_speed: float = 2.0
    contact_range: float = 1.5
    contact_height: float = 50.0
    t_out: float = 2.5
    dt: float = 0.005
    dmodels: tuple = D_MODELS
    kernel_width: float = 0.5
    max_entries: float = DEFAULT_MAX_ENTRIES

    def __post_init__(self):
        if not self.delta > 0 or not self.probe_mass > 0:
            raise ConfigError("delta and probe_mass must be positive")
        if self.nx * self.ny * self.nx * self.ny > self.max_entries:
            raise InstanceTooLarge(f"{(self.nx * self.ny) ** 2} kernel entries exceed the cap of {self.max_entries:g}")
        for m in self.dmodels:
            if m not in D_MODELS:
                raise ConfigError(f"unknown D model {m!r}")

    @property
    def xgrid(self) -> Grid1D:
        return Grid1D.box(self.delta, self.nx)

    @property
    def ygrid(self) -> Grid1D:
        return Grid1D(float(self.y_range[0]), float(self.y_range[1]), self.ny)


def _laplacian_1d(grid: Grid1D) -> scipy.sparse.spmatrix:
    n = grid.n
    return scipy.sparse.diags([np.ones(n - 1), -2.0 * np.ones(n), np.ones(n - 1)], [-1, 0, 1]) / grid.dx**2


def _pmt_hamiltonian(cfg: PMTConfig) -> scipy.sparse.csc_matrix:
    gx, gy = cfg.xgrid, cfg.ygrid
    ix, iy = scipy.sparse.identity(gx.n), scipy.sparse.identity(gy.n)
    kin = -0.5 / cfg.bead.M * scipy.sparse.kron(_laplacian_1d(gx), iy) - 0.5 / cfg.probe_mass * scipy.sparse.kron(ix, _laplacian_1d(gy))
    X, Y = np.meshgrid(gx.points, gy.points, indexing="ij")
    V = np.where(Y - X < cfg.contact_range, cfg.contact_height, 0.0).reshape(-1)
    return (kin + scipy.sparse.diags(V)).tocsc()


def _pmt_initial(cfg: PMTConfig) -> np.ndarray:
    gy = cfg.ygrid
    bead = bead_ground_state(cfg.delta, cfg.nx).amplitudes
    y = gy.points
    probe = np.exp(-((y - cfg.probe_start) ** 2) / (4.0 * cfg.probe_width**2) - 1j * cfg.probe_mass * cfg.probe_speed * y)
    probe = probe / math.sqrt(float(np.sum(np.abs(probe) ** 2) * gy.dx))
    return np.outer(bead, probe).reshape(-1)


def _pmt_propagate(cfg: PMTConfig) -> np.ndarray:
    """Crank-Nicolson with a sparse LU factorization of ``1 + i dt H / 2``."""
    H = _pmt_hamiltonian(cfg)
    w = cfg.xgrid.dx * cfg.ygrid.dx
    phi = _pmt_initial(cfg)
    steps = max(1, int(math.ceil(cfg.t_out / cfg.dt)))
    dt = cfg.t_out / steps
    eye = scipy.sparse.identity(H.shape[0], format="csc")
    lu = scipy.sparse.linalg.splu((eye + 0.5j * dt * H).tocsc())
    B = (eye - 0.5j * dt * H).tocsr()
    for _ in range(steps):
        phi = lu.solve(B @ phi)
    norm = float(np.sum(np.abs(phi) ** 2) * w)
    if abs(norm - 1.0) > 1e-6:
        raise PropagationUnstable(f"two-body norm drifted to {norm:.12g}")
    return phi


def _pmt_dmatrix(cfg: PMTConfig, model: str, probe_mass: float | None = None) -> np.ndarray:
    gx, gy = cfg.xgrid, cfg.ygrid
    X, Y = np.meshgrid(gx.points, gy.points, indexing="ij")
    x, y = X.reshape(-1), Y.reshape(-1)
    dxx = x[:, None] - x[None, :]
    if model == "nbody_gaussian":
        m = cfg.probe_mass if probe_mass is None else probe_mass
        R = cfg.probe_radius or cfg.bead.R
        cfgn = NBodyConfig((cfg.bead.M, m), (cfg.bead.R, R))
        if cfgn.radii[0] != cfgn.radii[1]:
            raise ConfigError("the two-body Gaussian model needs equal radii")
        shift = (cfg.bead.M * dxx + m * (y[:, None] - y[None, :])) / cfgn.total_mass
        return 9.0 * cfgn.total_mass**2 / cfgn.radii[0] ** 2 * shift * shift
    if model == "light_probe":
        return alpha(cfg.bead) * dxx * dxx
    if model == "exact_single_ball":
        offsets = np.arange(gx.n) * gx.dx
        vals = np.array([dexp_exact(float(a), cfg.bead) for a in offsets])
        ix = np.repeat(np.arange(gx.n), gy.n)
        return vals[np.abs(ix[:, None] - ix[None, :])]
    raise ConfigError(f"unknown D model {model!r}")


def _probe_state(K: np.ndarray, cfg: PMTConfig) -> np.ndarray:
    """Reduced probe kernel ``sum_x K[(x, y), (x, y')] dx``."""
    nx, ny = cfg.nx, cfg.ny
    K4 = K.reshape(nx, ny, nx, ny)
    return np.einsum("iaib->ab", K4) * cfg.xgrid.dx


def _probe_observables(cfg: PMTConfig) -> dict:
    gy = cfg.ygrid
    y = gy.points
    diff = np.zeros((gy.n, gy.n))
    i = np.arange(gy.n - 1)
    diff[i, i + 1] = 1.0
    diff[i + 1, i] = -1.0
    py = -1j * diff / (2.0 * gy.dx)
    ell = cfg.kernel_width
    Ayy = np.exp(-((y[:, None] - y[None, :]) ** 2) / (2.0 * ell**2)) / (math.sqrt(2.0 * math.pi) * ell)
    return {
        "position": ("diagonal", y),
        "position_squared": ("diagonal", y * y),
        "tanh_position": ("diagonal", np.tanh(y - cfg.probe_start)),
        "momentum": ("operator", py),
        "momentum_squared": ("operator", p2_operator(gy)),
        "gaussian_kernel": ("kernel", Ayy),
    }


def _probe_expectation(rho_y: np.ndarray, obs: tuple, dy: float) -> float:
    kind, a = obs
    if kind == "diagonal":
        return float(np.real(np.diag(rho_y)) @ a) * dy
    if kind == "operator":
        # operator matrices act on amplitudes; the kernel operator is rho_y * dy
        return float(np.real(np.trace(a @ rho_y))) * dy
    return float(np.real(np.sum(a.T * rho_y))) * dy * dy


def pmt_run(cfg: PMTConfig | None = None, *, phi_out: np.ndarray | None = None) -> dict:
    """Two-body position-measurement harness.

    Returns, per D model, the bitwise diagonal comparison and the change of
    every probe observable between ``rho_out`` and ``rho0_out``.
    """
    cfg = cfg or PMTConfig()
    phi = _pmt_propagate(cfg) if phi_out is None else phi_out
    K0 = np.outer(phi, phi.conj())
    rho0_y = _probe_state(K0, cfg)
    obs = _probe_observables(cfg)
    dy = cfg.ygrid.dx
    ref = {name: _probe_expectation(rho0_y, o, dy) for name, o in obs.items()}
    models = {}
    max_diag = 0.0
    for model in cfg.dmodels:
        D = _pmt_dmatrix(cfg, model)
        K = K0 * np.exp(-D)
        diag_equal = bool(np.array_equal(np.diag(K), np.diag(K0)))
        diag_disc = float(np.max(np.abs(np.diag(K) - np.diag(K0))))
        max_diag = max(max_diag, diag_disc)
        rho_y = _probe_state(K, cfg)
        table = {}
        for name, o in obs.items():
            val = _probe_expectation(rho_y, o, dy)
            table[name] = {"rho0": ref[name], "rho": val, "discrepancy": abs(val - ref[name]), "kind": o[0]}
        models[model] = {"diagonal_bitwise_equal": diag_equal, "max_diag_discrepancy": diag_disc, "observables": table}
    return {"max_diag_discrepancy": max_diag, "models": models, "config": _cfg_summary(cfg)}


def _cfg_summary(cfg: PMTConfig) -> dict:
    return {
        "M": cfg.bead.M,
        "R": cfg.bead.R,
        "delta": cfg.delta,
        "probe_mass": cfg.probe_mass,
        "nx": cfg.nx,
        "ny": cfg.ny,
        "t_out": cfg.t_out,
    }


def pmt_light_probe(cfg: PMTConfig | None = None, mass_ratios: Sequence[float] = (1.0, 1e-1, 1e-2, 1e-3)) -> dict:
    """Largest probe-observable discrepancy under the two-body Gaussian D versus probe/bead mass ratio.

    The outgoing would-be state is computed once with ``cfg`` and held fixed,
    so the sweep isolates the probe mass entering D. The y-independent model
    is reported as the zero-mass limit.
    """
    cfg = cfg or PMTConfig()
    phi = _pmt_propagate(cfg)
    K0 = np.outer(phi, phi.conj())
    rho0_y = _probe_state(K0, cfg)
    obs = _probe_observables(cfg)
    dy = cfg.ygrid.dx
    ref = {name: _probe_expectation(rho0_y, o, dy) for name, o in obs.items()}
    scale = max(abs(v) for v in ref.values())
    rows = []
    for ratio in list(mass_ratios) + [0.0]:
        if ratio > 0:
            D = _pmt_dmatrix(cfg, "nbody_gaussian", probe_mass=ratio * cfg.bead.M)
        else:
            D = _pmt_dmatrix(cfg, "light_probe")
        rho_y = _probe_state(K0 * np.exp(-D), cfg)
        disc = max(abs(_probe_expectation(rho_y, o, dy) - ref[name]) for name, o in obs.items())
        rows.append({"mass_ratio": ratio, "max_discrepancy": disc, "relative": disc / scale})
    return {"observable_scale": scale, "sweep": rows}


# ---------------------------------------------------------------------------
# Penrose interferometer (effective two-path, two-mirror-state model)


THEORIES = ("standard", "penrose_collapse", "entanglement")


@dataclass(frozen=True)
class PenroseConfig:
    """Mirror displacement schedule ``xi(t)`` sampled at ``times``.

    ``mirror_width`` is the spread of the mirror's quantum state; the overlap
    of rest and displaced mirror states is ``exp(-xi^2 / (8 width^2))``.
    """

    mirror: BallParams = BallParams(10.0, 1.0)
    times: tuple = tuple(np.linspace(0.0, 1.0, 41))
    displacements: tuple = tuple(0.15 * np.sin(np.pi * np.linspace(0.0, 1.0, 41)))
    mirror_width: float = 0.0075
    theory: str = "entanglement"

    def __post_init__(self):
        if self.theory not in THEORIES:
            raise ConfigError(f"unknown theory {self.theory!r}; expected one of {THEORIES}")
        t, xi = np.asarray(self.times, float), np.asarray(self.displacements, float)
        if t.shape != xi.shape or t.size < 3:
            raise ConfigError("need at least three (time, displacement) samples")
        if np.any(np.diff(t) <= 0):
            raise ConfigError("times must increase")
        if xi[0] != 0 or xi[-1] != 0:
            raise ConfigError("the displacement must vanish at the first and last times")
        if not self.mirror_width > 0:
            raise ConfigError("mirror_width must be positive")

    @classmethod
    def sine(cls, mirror: BallParams, xi_max: float, t_f: float = 1.0, n: int = 41, width: float | None = None, theory: str = "entanglement"):
        if n % 2 == 0:
            n += 1  # keep t_m = t_f / 2 on the grid
        t = np.linspace(0.0, t_f, n)
        xi = xi_max * np.sin(np.pi * t / t_f)
        xi[0] = xi[-1] = 0.0
        return cls(mirror, tuple(t), tuple(xi), width if width is not None else xi_max / 20.0, theory)

    @property
    def t_m_index(self) -> int:
        return int(np.argmax(np.abs(self.displacements)))


def _gravity_factor(cfg: PenroseConfig) -> np.ndarray:
    return np.array([math.exp(-dexp_auto(abs(float(x)), cfg.mirror)) for x in cfg.displacements])


def _theory_factor(r: np.ndarray, theory: str) -> np.ndarray:
    if theory == "standard":
        return np.ones_like(r)
    if theory == "entanglement":
        return r
    return np.minimum.accumulate(r)


def _matter_state(s: float, f: float) -> np.ndarray:
    """``(|A>|mu0> + |B>|mu_t>)/sqrt 2`` with the cross terms scaled by ``f``.

    Basis ``{A, B} x {e0, e1}`` with ``e0 = mu0`` and ``mu_t = s e0 + sqrt(1-s^2) e1``.
    """
    a = np.array([1.0, 0.0, 0.0, 0.0])
    b = np.array([0.0, 0.0, s, math.sqrt(max(1.0 - s * s, 0.0))])
    return 0.5 * (np.outer(a, a) + np.outer(b, b) + f * (np.outer(a, b) + np.outer(b, a)))


def _photon_state(rho: np.ndarray) -> np.ndarray:
    return np.einsum("iaja->ij", rho.reshape(2, 2, 2, 2))


def penrose_run(cfg: PenroseConfig | None = None) -> dict:
    """Photon/mirror density operators over the schedule and detector probabilities.

    The relative phase is fixed so that full photon coherence at the final
    time sends the photon to the source port.
    """
    cfg = cfg or PenroseConfig()
    xi = np.asarray(cfg.displacements, float)
    overlap = np.exp(-(xi**2) / (8.0 * cfg.mirror_width**2))
    r = _gravity_factor(cfg)
    f = _theory_factor(r, cfg.theory)
    matter = [_matter_state(float(s), float(ff)) for s, ff in zip(overlap, f)]
    photon = [_photon_state(m) for m in matter]
    coherence = np.array([2.0 * p[0, 1] for p in photon])
    p_det = 0.5 * (1.0 - float(coherence[-1]))
    im = cfg.t_m_index
    return {
        "theory": cfg.theory,
        "times": list(map(float, cfg.times)),
        "gravity_factor": list(map(float, r)),
        "theory_factor": list(map(float, f)),
        "coherence": list(map(float, coherence)),
        "photon_trace": [float(np.trace(p)) for p in photon],
        "rho_matter": matter,
        "photon_t_m": photon[im],
        "photon_t_f": photon[-1],
        "D_max": float(dexp_auto(float(abs(xi[im])), cfg.mirror)),
        "p_detector": p_det,
        "p_source": 1.0 - p_det,
    }


# ---------------------------------------------------------------------------
# radiation estimates (CGS)


@dataclass(frozen=True)
class RadiationInput:
    """Oscillating mirror: mass ``m`` (g), amplitude ``ell`` (cm), angular frequency ``omega`` (1/s), area (cm^2)."""

    m: float = 1e-8
    ell: float = 1e-11
    omega: float = 3e3
    area: float = 1e-6

    def __post_init__(self):
        for name in ("m", "ell", "omega", "area"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")


PREFACTOR = 1.0


def graviton_estimate(inp: RadiationInput, consts: dict | None = None) -> dict:
    """Gravitons per cycle ``2 pi m^2 ell^4 omega^4 G / (hbar c^5)`` times an order-unity prefactor fixed to 1."""
    c = consts or load_constants()
    n = PREFACTOR * 2.0 * math.pi * inp.m**2 * inp.ell**4 * inp.omega**4 * c["gravitational_constant_cgs"] / (
        c["reduced_planck_cgs"] * c["speed_of_light_cm_s"] ** 5
    )
    return {"N_graviton": n, "prefactor": PREFACTOR}


def photon_emission_estimate(inp: RadiationInput, consts: dict | None = None) -> dict:
    """Photons per cycle from the oscillating boundary, ``ell^2 omega^4 area / (180 pi c^4)`` (two polarizations)."""
    c = consts or load_constants()
    n = PREFACTOR * inp.ell**2 * inp.omega**4 * inp.area / (180.0 * math.pi * c["speed_of_light_cm_s"] ** 4)
    return {"N_photon": n, "prefactor": PREFACTOR}

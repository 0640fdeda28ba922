"""The fifteen acceptance criteria as runnable checks.

Each check returns a ``CriterionResult`` holding the measured quantities and
a pass/fail verdict at the stated tolerance. The test suite and the
``paper-check`` command both run them from here.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .decoherence import BallParams, dexp_exact, dexp_gaussian, normalization_integral
from .dynamics import (
    MasterEqSpec,
    entropy_S1,
    entropy_timescale_example,
    evolve_mdm,
    integrate_master,
    positivity_probe,
    spread_fit,
    two_sided_check,
)
from .experiments import PenroseConfig, PMTConfig, RadiationInput, graviton_estimate, penrose_run, photon_emission_estimate, pmt_run
from .numerics import Grid1D, HamiltonianSpec, hamiltonian_matrix
from .spectra import (
    CatState,
    SeparableState3D,
    beable_expectation,
    brute_force_events,
    cat_density_matrix,
    cat_exact_diag,
    cat_kernel,
    is_beable,
    perturb_diag_1d,
    perturb_diag_3d,
    perturb_diag_product,
    separable_3d_spectrum,
)
from .states import (
    ObservableKernel,
    ProductWaveFunction,
    WaveFunction,
    box_eigenstate,
    build_rho_gauss,
    build_rho_nbody,
    cat_wavefunction,
    complex_gaussian,
    expect,
    expect_parity,
    expect_wf,
    gaussian_packet,
    hermite_state,
    parity_first_order,
    position_moments,
    pure_kernel,
)

__all__ = ["CriterionResult", "CRITERIA", "run_criteria", "format_table"]


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        return f"criterion {self.number:2d} {'PASS' if self.passed else 'FAIL'}  {self.title}  ({self.seconds:.2f}s)"


# ---------------------------------------------------------------------------
# 1-3: decoherence exponent


def c01_normalization() -> tuple[bool, dict]:
    t0 = time.perf_counter()
    v = normalization_integral()
    dt = time.perf_counter() - t0
    return abs(v - 0.25) <= 1e-6 and dt < 1.0, {"value": v, "error": v - 0.25, "runtime_s": dt}


def c02_gaussian_regime() -> tuple[bool, dict]:
    d = dexp_exact(0.1, BallParams(10.0, 1.0))
    ball = BallParams(1.0, 1.0)
    ratio = dexp_exact(0.05, ball) / dexp_gaussian(0.05, ball)
    ok = 8.55 <= d <= 9.45 and abs(ratio - 1.0) <= 0.02
    return ok, {"D(M=10,a=R/10)": d, "exact/gaussian(a/R=0.05)": ratio}


def c03_log_regime() -> tuple[bool, dict]:
    ball = BallParams(1.0, 1.0)
    u = np.geomspace(50.0, 500.0, 21)
    d = np.array([dexp_exact(float(a), ball) for a in u])
    slope = float(np.polyfit(np.log(u), d, 1)[0])
    return abs(slope / 24.0 - 1.0) <= 0.02, {"slope": slope}


# ---------------------------------------------------------------------------
# 4: trace formulas on a ten-state corpus


def state_corpus(n: int = 257) -> list[tuple[str, WaveFunction]]:
    box = Grid1D.box(1.0, n)
    line = Grid1D.symmetric(12.0, n)
    return [
        ("bead_ground", box_eigenstate(box, 1.0, 1)),
        ("box_level_2", box_eigenstate(box, 1.0, 2)),
        ("box_level_3", box_eigenstate(box, 1.0, 3)),
        ("gaussian", gaussian_packet(line, 1.0)),
        ("gaussian_wide", gaussian_packet(line, 1.6)),
        ("gaussian_moving", gaussian_packet(line, 1.2, x0=1.0, p0=0.7)),
        ("complex_gaussian", complex_gaussian(line, 0.5 - 0.2j)),
        ("hermite_1", hermite_state(line, 1, 1.0)),
        ("hermite_2", hermite_state(line, 2, 1.0)),
        ("cat", cat_wavefunction(line, 4.0, 0.8, math.sqrt(0.3), math.sqrt(0.7))),
    ]


def c04_trace_formulas(eps: float = 1e-3) -> tuple[bool, dict]:
    rows = {}
    ok = True
    fs = {"x": lambda x: x, "x2": lambda x: x * x, "cos": np.cos}
    p2 = ObservableKernel("momentum_squared")
    for name, psi in state_corpus():
        kappa = eps / position_moments(psi)[1]
        rho, rho0 = build_rho_gauss(psi, kappa), pure_kernel(psi)
        fdiff = max(abs(expect(rho, ObservableKernel.position(f)) - expect(rho0, ObservableKernel.position(f))) for f in fs.values())
        shift = expect(rho, p2) - expect(rho0, p2)
        rel = abs(shift - 2.0 * kappa) / (2.0 * kappa)
        row = {"f_discrepancy": fdiff, "p2_shift_rel_error": rel}
        good = fdiff <= 1e-13 and rel <= 1e-4
        if psi.parity_tag in ("even", "odd"):
            # e^-y lies between 1 - y and 1 - y + y^2/2, so the first-order
            # parity value is off by at most 8 kappa^2 <x^4> (with the state's sign)
            x = psi.grid.points
            x4 = float(psi.density @ x**4) * psi.grid.dx
            err = abs(expect_parity(rho) - parity_first_order(psi, kappa))
            row["parity_error"] = err
            row["parity_bound"] = 8.0 * kappa**2 * x4
            good = good and err <= 8.0 * kappa**2 * x4 * (1.0 + 1e-6) + 1e-14
        row["pass"] = good
        ok = ok and good
        rows[name] = row
    return ok, rows


# ---------------------------------------------------------------------------
# 5: perturbative versus brute-force spectra


def _infidelity(a: np.ndarray, b: np.ndarray, w: float) -> float:
    return 1.0 - (abs(np.vdot(a, b)) * w) ** 2


def _compare(pairs, events, vec_of, w) -> tuple[list, list]:
    lam = [abs(l - e.eigenvalue) for (l, _), e in zip(pairs, events.events)]
    vec = [_infidelity(vec_of(p), e.basis[:, 0], w) for (_, p), e in zip(pairs, events.events)]
    return lam, vec


def _spectral_case_1d(psi, eps):
    kappa = eps / position_moments(psi)[1]
    ps = perturb_diag_1d(psi, kappa)
    ev = brute_force_events(build_rho_gauss(psi, kappa))
    return _compare(ps.pairs, ev, lambda p: p.amplitudes, psi.grid.dx)


def _spectral_case_pair(psi, eps):
    kappa = eps / (2.0 * position_moments(psi)[1])
    ps = perturb_diag_product([psi, psi], kappa)
    Psi = ProductWaveFunction.product(psi, psi)

    def d(q, qp):
        s = (q[0] + q[1]) - (qp[0] + qp[1])
        return kappa * s * s

    ev = brute_force_events(build_rho_nbody(Psi, d))
    return _compare(ps.pairs, ev, lambda p: p.flat, psi.grid.dx**2)


def _spectral_case_3d(factors, eps):
    r2 = sum(position_moments(f)[1] for f in factors)
    kappa = eps / r2
    ps = perturb_diag_3d(factors, kappa)
    vals, idx, vecs = separable_3d_spectrum(factors, kappa, keep=4)
    grids = tuple(f.grid for f in factors)
    order = [0] + [1 + i for i in np.argsort([-l for l, _ in ps.pairs[1:]])]
    lam, vec = [], []
    for j, k in enumerate(order):
        l, phi = ps.pairs[k]
        lam.append(abs(l - vals[j]))
        exact = SeparableState3D(
            grids,
            ((1.0, tuple(vecs[a][:, idx[j][a]] for a in range(3))),),
        )
        vec.append(1.0 - abs(phi.inner(exact)) ** 2)
    return lam, vec


def c05_spectra(bound: float = 10.0) -> tuple[bool, dict]:
    t0 = time.perf_counter()
    box = Grid1D.box(1.0, 257)
    small = Grid1D.box(1.0, 31)
    factors = [box_eigenstate(Grid1D.box(d, 65), d, 1) for d in (1.0, 1.3, 1.7)]
    cases = {
        "1d_even_bead_ground": lambda e: _spectral_case_1d(box_eigenstate(box, 1.0, 1), e),
        "1d_odd_box_level_2": lambda e: _spectral_case_1d(box_eigenstate(box, 1.0, 2), e),
        "n2_identical_bead_ground": lambda e: _spectral_case_pair(box_eigenstate(small, 1.0, 1), e),
        "3d_separable_bead_product": lambda e: _spectral_case_3d(factors, e),
    }
    out = {}
    ok = True
    for name, fn in cases.items():
        worst = 0.0
        for eps in (1e-4, 1e-3, 1e-2):
            lam, vec = fn(eps)
            worst = max(worst, max(abs(v) for v in lam + vec) / eps**2)
        good = bool(worst <= bound)
        out[name] = {"max_error_over_eps2": worst, "pass": good}
        ok = ok and good
    dt = time.perf_counter() - t0
    out["runtime_s"] = dt
    return ok and dt < 30.0, out


# ---------------------------------------------------------------------------
# 6-7: cat events, beables


def c06_cat_events() -> tuple[bool, dict]:
    grid = Grid1D.symmetric(6.0, 241)
    cat = CatState(math.sqrt(0.3), math.sqrt(0.7), math.exp(-9.0))
    diag = cat_exact_diag(cat)
    closed = np.array([diag.A, diag.B])
    two = np.sort(np.linalg.eigvalsh(cat_density_matrix(cat)))[::-1]
    rho, _, _ = cat_kernel(grid, cat, 4.0, 2.0)
    ev = brute_force_events(rho)
    grid_probs = ev.probabilities[:2]
    err = float(max(np.max(np.abs(closed - two)), np.max(np.abs(closed - grid_probs))))
    ok1 = err <= 1e-10 and len(ev.events) == 2
    half = CatState(math.sqrt(0.5), math.sqrt(0.5), 0.0)
    ev2 = brute_force_events(cat_kernel(grid, half, 4.0, 2.0)[0])
    single = len(ev2.events) == 1 and ev2.events[0].multiplicity == 2 and abs(ev2.events[0].probability - 1.0) <= 1e-10
    return ok1 and single, {
        "closed_form": closed.tolist(),
        "grid_events": grid_probs.tolist(),
        "max_error": err,
        "degenerate_case": ev2.to_dict(),
    }


def c07_beable(eps: float = 1e-3) -> tuple[bool, dict]:
    grid = Grid1D.box(1.0, 257)
    psi = box_eigenstate(grid, 1.0, 1)
    kappa = eps / position_moments(psi)[1]
    rho = build_rho_gauss(psi, kappa)
    P = ObservableKernel("parity")
    check = is_beable(P, rho)
    bval = beable_expectation(P, check["events"], check["event_values"])
    tr = expect_parity(rho)
    first = parity_first_order(psi, kappa)
    x4 = float(psi.density @ grid.points**4) * grid.dx
    ok = check["beable"] and abs(bval - tr) <= 1e-6 and abs(bval - first) <= 8.0 * kappa**2 * x4 * (1.0 + 1e-6)
    return ok, {"beable": check["beable"], "beable_expectation": bval, "trace": tr, "first_order": first, "second_order_bound": 8.0 * kappa**2 * x4}


# ---------------------------------------------------------------------------
# 8-11: dynamics


def c08_two_sided(eps_max: float = 1e-2) -> tuple[bool, dict]:
    M = 1.0
    grid = Grid1D.symmetric(20.0, 401)
    psi = gaussian_packet(grid, 1.0)
    h = HamiltonianSpec.free(M)
    times = np.linspace(-4.0, 4.0, 33)
    x2_max = 1.0 + (0.5 / M * 4.0) ** 2  # sigma^2 + (t / (2 M sigma))^2 at |t| = 4
    kappa = eps_max / x2_max
    res = evolve_mdm(psi, h, kappa, times, method="spectral")
    verdict = two_sided_check(res)
    fit = spread_fit(times, res.x2, M)
    E = expect_wf(psi, hamiltonian_matrix(h, grid)).real
    rel = abs(fit.E - E) / E
    ok = verdict["monotone_before"] and verdict["monotone_after"] and rel <= 0.01
    return ok, {"verdict": verdict, "E_fit": fit.E, "E_expected": E, "relative_error": rel, "kappa_x2_max": kappa * max(res.x2)}


def c09_worked_example() -> tuple[bool, dict]:
    rep = entropy_timescale_example()
    ok_s = 3e-4 <= rep["S1_min"] <= 5e-4
    ok_t = 1e8 <= rep["time_years"] <= 1e10
    return ok_s and ok_t, {"S1_min": rep["S1_min"], "S1_min_pass": ok_s, "time_years": rep["time_years"], "time_pass": ok_t}


def c10_blp_monotone(steps: int = 1000) -> tuple[bool, dict]:
    grid = Grid1D.symmetric(4.0, 61)
    psi = gaussian_packet(grid, 0.6, x0=0.4)
    rho0 = build_rho_gauss(psi, 0.05)
    hams = {
        "free": HamiltonianSpec.free(1.0),
        "harmonic": HamiltonianSpec.harmonic(1.0, 1.0),
        "box": HamiltonianSpec.box(1.0, grid.walls[1]),
    }
    out = {}
    ok = True
    for hname, h in hams.items():
        for c in (0.1, 1.0, 10.0):
            traj = integrate_master(rho0, MasterEqSpec.blp(c, h, 5e-4), steps)
            s1 = np.array([entropy_S1(k) for k in traj.kernels])
            worst = float(np.min(np.diff(s1)))
            good = worst >= -1e-9
            out[f"{hname}_c{c:g}"] = {"min_step_change": worst, "S1_final": float(s1[-1]), "pass": good}
            ok = ok and good
    return ok, out


def c11_harmonic_recoherence() -> tuple[bool, dict]:
    grid = Grid1D.symmetric(20.0, 401)
    h = HamiltonianSpec.harmonic(1.0, 1.0)
    psi = gaussian_packet(grid, 0.5, x0=1.0)
    res = evolve_mdm(psi, h, 1e-2, np.linspace(0.0, h.period, 9), method="spectral")
    diff = abs(res.S1[-1] - res.S1[0])
    swing = max(res.S1) - min(res.S1)
    return diff <= 1e-4, {"S1_start": res.S1[0], "S1_after_period": res.S1[-1], "difference": diff, "swing": swing}


# ---------------------------------------------------------------------------
# 12-15: experiments and positivity


def c12_pmt() -> tuple[bool, dict]:
    rep = pmt_run(PMTConfig())
    diag_ok = all(m["diagonal_bitwise_equal"] and m["max_diag_discrepancy"] == 0.0 for m in rep["models"].values())
    fy_ok = all(
        o["discrepancy"] == 0.0 for m in rep["models"].values() for o in m["observables"].values() if o["kind"] == "diagonal"
    )
    heavy = rep["models"]["nbody_gaussian"]["observables"]["gaussian_kernel"]["discrepancy"]
    ok = diag_ok and fy_ok and heavy > 1e-6
    return ok, {"max_diag_discrepancy": rep["max_diag_discrepancy"], "heavy_probe_kernel_discrepancy": heavy}


def c13_penrose() -> tuple[bool, dict]:
    mirror = BallParams(10.0, 1.0)
    cfgs = {th: PenroseConfig.sine(mirror, 0.15, theory=th) for th in ("standard", "penrose_collapse", "entanglement")}
    runs = {th: penrose_run(c) for th, c in cfgs.items()}
    D = runs["entanglement"]["D_max"]
    dip = runs["entanglement"]["gravity_factor"][cfgs["entanglement"].t_m_index]
    spread = max(float(np.max(np.abs(runs[a]["photon_t_m"] - runs[b]["photon_t_m"]))) for a in runs for b in runs)
    ok = (
        runs["standard"]["p_detector"] == 0.0
        and D >= 9.0
        and 0.4999 <= runs["penrose_collapse"]["p_detector"] <= 0.5
        and abs(runs["entanglement"]["p_detector"]) <= 1e-15
        and abs(dip - math.exp(-D)) <= 1e-12 * max(1.0, math.exp(-D))
        and spread <= 1e-12
    )
    return ok, {
        "p_detector": {k: v["p_detector"] for k, v in runs.items()},
        "D_max": D,
        "entanglement_dip": dip,
        "photon_state_spread_t_m": spread,
    }


def c14_radiation() -> tuple[bool, dict]:
    inp = RadiationInput()
    ng = graviton_estimate(inp)["N_graviton"]
    nph = photon_emission_estimate(inp)["N_photon"]
    ok_g = 1e-82 <= ng <= 1e-78
    ok_p = 1e-41 <= nph <= 1e-37
    return ok_g and ok_p, {"N_graviton": ng, "graviton_pass": ok_g, "N_photon": nph, "photon_pass": ok_p}


def c15_positivity() -> tuple[bool, dict]:
    box = Grid1D.box(1.0, 201)
    cosine = positivity_probe(box_eigenstate(box, 1.0, 1), 0.01, 1.0, 1e-4)
    line = Grid1D.symmetric(10.0, 201)
    gauss = positivity_probe(complex_gaussian(line, 0.5 - 0.2j), 0.01, 1.0, 1e-4)
    ok = cosine["min_eigenvalue"] < -10.0 * cosine["floor"] and gauss["min_eigenvalue"] >= -1e-8
    return ok, {"cosine": cosine, "gaussian": gauss}


CRITERIA: list[tuple[int, str, Callable[[], tuple[bool, dict]]]] = [
    (1, "D-integral normalization", c01_normalization),
    (2, "Gaussian regime of D", c02_gaussian_regime),
    (3, "logarithmic regime of D", c03_log_regime),
    (4, "trace formulas on a ten-state corpus", c04_trace_formulas),
    (5, "perturbative vs brute-force spectra", c05_spectra),
    (6, "cat-state events", c06_cat_events),
    (7, "parity beable coincidence", c07_beable),
    (8, "two-sided entropy increase", c08_two_sided),
    (9, "entropy timescale example", c09_worked_example),
    (10, "BLP monotonicity", c10_blp_monotone),
    (11, "harmonic recoherence", c11_harmonic_recoherence),
    (12, "position measurement theorem", c12_pmt),
    (13, "Penrose interferometer", c13_penrose),
    (14, "radiation estimates", c14_radiation),
    (15, "positivity probe", c15_positivity),
]


def run_criterion(number: int) -> CriterionResult:
    for n, title, fn in CRITERIA:
        if n == number:
            t0 = time.perf_counter()
            ok, detail = fn()
            return CriterionResult(n, title, bool(ok), detail, time.perf_counter() - t0)
    raise KeyError(f"no criterion {number}")


def run_criteria(numbers=None) -> list[CriterionResult]:
    wanted = [n for n, _, _ in CRITERIA] if numbers is None else list(numbers)
    return [run_criterion(n) for n in wanted]


def format_table(results: list[CriterionResult]) -> str:
    lines = [r.line() for r in results]
    passed = sum(r.passed for r in results)
    lines.append(f"{passed}/{len(results)} criteria pass")
    return "\n".join(lines)

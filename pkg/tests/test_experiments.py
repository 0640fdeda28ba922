import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gravdeco.decoherence import BallParams, dexp_auto
from gravdeco.experiments import (
    ConfigError,
    PenroseConfig,
    PMTConfig,
    RadiationInput,
    bead_ground_state,
    graviton_estimate,
    penrose_run,
    photon_emission_estimate,
    pmt_light_probe,
    pmt_run,
)
from gravdeco.states import InstanceTooLarge

SMALL = PMTConfig(nx=11, ny=40, dt=0.01, t_out=2.0)


# ---------------------------------------------------------------------------
# bead


def test_bead_ground_state_matches_cosine():
    psi = bead_ground_state(2.0, 101)
    x = psi.grid.points
    np.testing.assert_allclose(psi.amplitudes.real, np.cos(np.pi * x / 4.0) / math.sqrt(2.0), rtol=0, atol=1e-3)
    assert psi.parity_tag == "even"
    with pytest.raises(ValueError):
        bead_ground_state(0.0)


# ---------------------------------------------------------------------------
# position measurement harness


@pytest.fixture(scope="module")
def small_run():
    return pmt_run(SMALL)


def test_diagonal_is_bitwise_unchanged_for_every_model(small_run):
    assert small_run["max_diag_discrepancy"] == 0.0
    for model in small_run["models"].values():
        assert model["diagonal_bitwise_equal"]


def test_position_observables_of_probe_are_unchanged(small_run):
    for model in small_run["models"].values():
        for name, row in model["observables"].items():
            if row["kind"] == "diagonal":
                assert row["discrepancy"] == 0.0, name


def test_bead_only_models_leave_the_probe_untouched(small_run):
    # D depends on the bead coordinate alone, so the probe's reduced state is exact
    for model in ("light_probe", "exact_single_ball"):
        for row in small_run["models"][model]["observables"].values():
            assert row["discrepancy"] <= 1e-12 * max(1.0, abs(row["rho0"]))


def test_heavy_probe_changes_a_general_observable(small_run):
    rows = small_run["models"]["nbody_gaussian"]["observables"]
    assert max(rows[k]["discrepancy"] for k in ("momentum_squared", "gaussian_kernel")) > 1e-6


def test_probe_reflects_off_the_bead(small_run):
    p = small_run["models"]["light_probe"]["observables"]["momentum"]["rho0"]
    assert p > 0  # started moving left, now moving right


def test_light_probe_sweep_decreases_to_zero():
    out = pmt_light_probe(SMALL, mass_ratios=(1.0, 0.1, 0.01))
    disc = [row["max_discrepancy"] for row in out["sweep"]]
    assert disc[0] > disc[1] > disc[2] > disc[3]
    assert out["sweep"][-1]["mass_ratio"] == 0.0
    assert disc[-1] <= 1e-12 * out["observable_scale"]


def test_pmt_config_validation():
    with pytest.raises(InstanceTooLarge):
        PMTConfig(nx=100, ny=100)
    with pytest.raises(ConfigError):
        PMTConfig(dmodels=("nope",))
    with pytest.raises(ConfigError):
        PMTConfig(delta=0.0)


def test_pmt_rejects_unequal_radii_for_two_body_model():
    with pytest.raises(ConfigError):
        pmt_run(PMTConfig(nx=7, ny=16, t_out=0.1, probe_radius=1.0, dmodels=("nbody_gaussian",)))


# ---------------------------------------------------------------------------
# Penrose interferometer


def _runs(xi_max=0.15, M=10.0):
    ball = BallParams(M, 1.0)
    return {th: penrose_run(PenroseConfig.sine(ball, xi_max, theory=th)) for th in ("standard", "penrose_collapse", "entanglement")}


def test_standard_theory_recoheres_completely():
    out = _runs()["standard"]
    assert out["p_detector"] == pytest.approx(0.0, abs=1e-15)
    assert out["theory_factor"] == [1.0] * len(out["times"])


def test_collapse_leaves_an_unbiased_mixture():
    out = _runs()["penrose_collapse"]
    assert out["D_max"] >= 9.0
    assert 0.4999 <= out["p_detector"] <= 0.5


def test_entanglement_theory_recoheres_but_dips_at_midpoint():
    runs = _runs()
    ent = runs["entanglement"]
    assert ent["p_detector"] == pytest.approx(0.0, abs=1e-15)
    im = PenroseConfig.sine(BallParams(10.0, 1.0), 0.15).t_m_index
    assert ent["gravity_factor"][im] == pytest.approx(math.exp(-ent["D_max"]), rel=1e-12)
    assert ent["D_max"] == pytest.approx(dexp_auto(0.15, BallParams(10.0, 1.0)))
    for other in ("standard", "penrose_collapse"):
        np.testing.assert_allclose(runs[other]["photon_t_m"], ent["photon_t_m"], atol=1e-12)


@given(st.floats(0.0, 0.5), st.sampled_from(["standard", "penrose_collapse", "entanglement"]), st.floats(0.5, 20.0))
def test_penrose_states_are_valid(xi_max, theory, M):
    out = penrose_run(PenroseConfig.sine(BallParams(M, 1.0), xi_max, n=21, width=0.01, theory=theory))
    assert 0.0 <= out["p_detector"] <= 0.5 + 1e-15
    np.testing.assert_allclose(out["photon_trace"], 1.0, atol=1e-14)
    for rho in out["rho_matter"]:
        assert np.linalg.eigvalsh(rho)[0] >= -1e-14
    # the collapse factor is a running minimum, so it never recovers
    assert np.all(np.diff(out["theory_factor"]) <= 0) or theory != "penrose_collapse"


def test_penrose_config_validation():
    ball = BallParams(1.0, 1.0)
    with pytest.raises(ConfigError):
        PenroseConfig(ball, (0.0, 0.5, 1.0), (0.0, 0.1, 0.1))
    with pytest.raises(ConfigError):
        PenroseConfig(ball, (0.0, 0.5, 0.4), (0.0, 0.1, 0.0))
    with pytest.raises(ConfigError):
        PenroseConfig(ball, theory="many_worlds")
    assert PenroseConfig.sine(ball, 0.1, n=40).t_m_index == 20


# ---------------------------------------------------------------------------
# radiation estimates

G, HBAR, C = 6.67430e-8, 1.054571817e-27, 2.99792458e10


def test_graviton_estimate_value():
    inp = RadiationInput()
    expected = 2 * math.pi * inp.m**2 * inp.ell**4 * inp.omega**4 * G / (HBAR * C**5)
    assert graviton_estimate(inp)["N_graviton"] == pytest.approx(expected, rel=1e-12)
    assert graviton_estimate(inp)["N_graviton"] == pytest.approx(1.33e-78, rel=1e-2)


def test_photon_estimate_value():
    inp = RadiationInput()
    expected = inp.ell**2 * inp.omega**4 * inp.area / (180 * math.pi * C**4)
    assert photon_emission_estimate(inp)["N_photon"] == pytest.approx(expected, rel=1e-12)


@given(st.floats(1e-12, 1e-3), st.floats(1e-14, 1e-8), st.floats(1.0, 1e5), st.floats(1e-8, 1.0))
def test_radiation_scaling_laws(m, ell, omega, area):
    base = RadiationInput(m, ell, omega, area)
    ng = graviton_estimate(base)["N_graviton"]
    npho = photon_emission_estimate(base)["N_photon"]
    assert graviton_estimate(RadiationInput(m, 2 * ell, omega, area))["N_graviton"] == pytest.approx(16 * ng, rel=1e-12)
    assert graviton_estimate(RadiationInput(2 * m, ell, omega, area))["N_graviton"] == pytest.approx(4 * ng, rel=1e-12)
    assert photon_emission_estimate(RadiationInput(m, ell, 2 * omega, area))["N_photon"] == pytest.approx(16 * npho, rel=1e-12)
    assert photon_emission_estimate(RadiationInput(m, 2 * ell, omega, area))["N_photon"] == pytest.approx(4 * npho, rel=1e-12)
    assert photon_emission_estimate(RadiationInput(2 * m, ell, omega, area))["N_photon"] == npho


def test_radiation_zero_and_invalid_inputs():
    assert graviton_estimate(RadiationInput(m=0.0))["N_graviton"] == 0.0
    assert photon_emission_estimate(RadiationInput(area=0.0))["N_photon"] == 0.0
    with pytest.raises(ConfigError):
        RadiationInput(omega=-1.0)

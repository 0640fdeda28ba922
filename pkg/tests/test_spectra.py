import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gravdeco.numerics import Grid1D
from gravdeco.spectra import (
    CatState,
    beable_expectation,
    brute_force_events,
    cat_density_matrix,
    cat_exact_diag,
    cat_kernel,
    events_from_operator,
    general_first_eigenpair,
    is_beable,
    perturb_diag_1d,
    perturb_diag_3d,
    perturb_diag_product,
    separable_3d_spectrum,
)
from gravdeco.states import (
    ObservableKernel,
    box_eigenstate,
    build_rho_gauss,
    expect_parity,
    gaussian_packet,
    hermite_state,
    position_moments,
)

GRID = Grid1D.symmetric(10.0, 201)


# ---------------------------------------------------------------------------
# Gaussian-model oracle: a Gaussian packet dressed with a Gaussian factor is a
# Gaussian mixed state whose spectrum is geometric, (1 - q) q^n, with purity
# (1 - q) / (1 + q).


@pytest.mark.parametrize("sigma, kappa", [(1.0, 0.01), (1.0, 0.2), (0.6, 1.0)])
def test_gaussian_state_spectrum_is_geometric(sigma, kappa):
    rho = build_rho_gauss(gaussian_packet(GRID, sigma), kappa)
    purity = 1.0 / math.sqrt(1.0 + 8.0 * kappa * sigma**2)
    q = (1.0 - purity) / (1.0 + purity)
    ev = brute_force_events(rho)
    lam = np.array([e.eigenvalue for e in ev.events[:5]])
    np.testing.assert_allclose(lam, (1.0 - q) * q ** np.arange(5), rtol=1e-8, atol=1e-14)


def test_events_account_for_unit_probability():
    rho = build_rho_gauss(gaussian_packet(GRID, 1.0), 0.3)
    ev = brute_force_events(rho)
    assert ev.total == pytest.approx(1.0, abs=1e-12)
    assert all(e.multiplicity == 1 for e in ev.events)
    assert np.all(np.diff(ev.probabilities) <= 0)


def test_event_clustering_of_degenerate_spectrum():
    op = np.diag([0.4, 0.2, 0.2, 0.2, 0.0])
    ev = events_from_operator(op)
    assert [e.multiplicity for e in ev.events] == [1, 3]
    assert ev.events[1].probability == pytest.approx(0.6)
    assert ev.residual == 0.0


# ---------------------------------------------------------------------------
# small-kappa closed forms against the grid eigensolver


def _infidelity(vec, wf, dx):
    return 1.0 - abs(np.vdot(vec, wf.amplitudes) * dx) ** 2


@pytest.mark.parametrize(
    "make",
    [lambda g: gaussian_packet(g, 1.0), lambda g: hermite_state(g, 1), lambda g: hermite_state(g, 2)],
    ids=["gauss", "hermite1", "hermite2"],
)
@pytest.mark.parametrize("K", [1e-4, 1e-3, 1e-2])
def test_first_order_pairs_match_brute_force(make, K):
    psi = make(GRID)
    kappa = K / position_moments(psi)[1]
    pert = perturb_diag_1d(psi, kappa)
    assert pert.order_param == pytest.approx(K)
    rho = build_rho_gauss(psi, kappa)
    w, v = rho.spectrum
    # the Gaussian's second eigenvalue carries a -12 K^2 correction (see below)
    for n, (lam, phi) in enumerate(pert.pairs):
        assert abs(w[n] - lam) <= 15 * K**2 + 1e-12
        assert _infidelity(v[:, n], phi, GRID.dx) <= 10 * K**2 + 1e-12


@pytest.mark.parametrize("K", [1e-3, 3e-3])
def test_gaussian_second_order_coefficients(K):
    # series of the geometric spectrum: lambda_0 = 1 - 2K + 8K^2, lambda_1 = 2K - 12K^2
    psi = gaussian_packet(GRID, 1.0)
    w, _ = build_rho_gauss(psi, K).spectrum
    lam = perturb_diag_1d(psi, K).eigenvalues
    assert (w[0] - lam[0]) / K**2 == pytest.approx(8.0, rel=0.1)
    assert (w[1] - lam[1]) / K**2 == pytest.approx(-12.0, rel=0.1)


def test_first_order_eigenvalue_error_is_second_order():
    psi = gaussian_packet(GRID, 1.0)
    errs = []
    for K in (1e-3, 2e-3):
        w, _ = build_rho_gauss(psi, K).spectrum
        errs.append(abs(w[0] - perturb_diag_1d(psi, K).eigenvalues[0]))
    assert errs[1] / errs[0] == pytest.approx(4.0, rel=0.02)


def test_box_states_match_brute_force():
    g = Grid1D.box(1.0, 201)
    for level in (1, 2):
        psi = box_eigenstate(g, 1.0, level)
        kappa = 1e-3 / position_moments(psi)[1]
        w, _ = build_rho_gauss(psi, kappa).spectrum
        np.testing.assert_allclose(w[:2], perturb_diag_1d(psi, kappa).eigenvalues, atol=1e-5)


def test_general_eigenpair_for_untagged_state():
    psi = gaussian_packet(GRID, 0.8, x0=0.7, p0=0.4)
    assert psi.parity_tag == "none"
    with pytest.raises(ValueError):
        perturb_diag_1d(psi, 1e-3)
    kappa = 1e-3
    lam, phi = general_first_eigenpair(psi, kappa)
    w, v = build_rho_gauss(psi, kappa).spectrum
    K = kappa * 0.64
    assert abs(w[0] - lam) <= 10 * K**2
    assert _infidelity(v[:, 0], phi, GRID.dx) <= 10 * K**2


def test_zero_kappa_is_pure():
    psi = gaussian_packet(GRID, 1.0)
    pert = perturb_diag_1d(psi, 0.0)
    assert pert.eigenvalues.tolist() == [1.0]


def test_product_eigenvalues_follow_centre_of_mass_factor():
    g = Grid1D.symmetric(5.0, 31)
    a, b = gaussian_packet(g, 0.7), gaussian_packet(g, 1.0)
    pert = perturb_diag_product([a, b], 1e-3)
    s = position_moments(a)[1] + position_moments(b)[1]
    assert pert.eigenvalues.tolist() == pytest.approx([1 - 2e-3 * s, 2e-3 * s])
    with pytest.raises(ValueError):
        perturb_diag_product([a, hermite_state(g, 1)], 1e-3)


def test_3d_first_order_matches_exact_factorized_spectrum():
    g = Grid1D.symmetric(6.0, 81)
    factors = [gaussian_packet(g, s) for s in (0.8, 1.0, 1.2)]
    r2 = sum(position_moments(f)[1] for f in factors)
    kappa = 1e-3 / r2
    exact, _, _ = separable_3d_spectrum(factors, kappa, keep=4)
    pert = perturb_diag_3d(factors, kappa)
    np.testing.assert_allclose(np.sort(exact)[::-1], np.sort(pert.eigenvalues)[::-1], atol=10 * 1e-6)
    for _, phi in pert.pairs:
        assert phi.norm == pytest.approx(1.0)


def test_3d_requires_three_even_factors():
    g = Grid1D.symmetric(6.0, 41)
    with pytest.raises(ValueError):
        perturb_diag_3d([gaussian_packet(g, 1.0)] * 2, 1e-3)
    with pytest.raises(ValueError):
        perturb_diag_3d([gaussian_packet(g, 1.0)] * 2 + [hermite_state(g, 1)], 1e-3)


# ---------------------------------------------------------------------------
# cat states

cats = st.builds(
    lambda p, phase, e: CatState(math.sqrt(p), math.sqrt(1 - p) * complex(math.cos(phase), math.sin(phase)), e),
    st.floats(0.0, 1.0),
    st.floats(0.0, 2 * math.pi),
    st.floats(0.0, 1.0),
)


@given(cats)
def test_cat_closed_form_reconstructs_matrix(cat):
    d = cat_exact_diag(cat)
    np.testing.assert_allclose(d.matrix(), cat_density_matrix(cat), atol=1e-12)
    assert d.A + d.B == pytest.approx(1.0)
    np.testing.assert_allclose([d.B, d.A], np.linalg.eigvalsh(cat_density_matrix(cat)), atol=1e-12)
    assert abs(np.vdot(d.phi1, d.phi2)) < 1e-12


def test_cat_kernel_events_match_closed_form():
    cat = CatState(math.sqrt(0.3), math.sqrt(0.7), math.exp(-9.0))
    g = Grid1D.symmetric(6.0, 241)
    rho, _, _ = cat_kernel(g, cat, 6.0, 2.0)
    ev = brute_force_events(rho)
    d = cat_exact_diag(cat)
    assert ev.probabilities[:2].tolist() == pytest.approx([d.A, d.B], abs=1e-10)


def test_cat_kernel_equal_weights_without_coherence_is_degenerate():
    cat = CatState(math.sqrt(0.5), math.sqrt(0.5), 0.0)
    rho, _, _ = cat_kernel(Grid1D.symmetric(6.0, 121), cat, 6.0, 2.0)
    ev = brute_force_events(rho)
    assert len(ev.events) == 1
    assert ev.events[0].multiplicity == 2
    assert ev.events[0].probability == pytest.approx(1.0, abs=1e-12)


def test_cat_validation():
    with pytest.raises(ValueError):
        CatState(1.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        CatState(1.0, 0.0, 1.5)
    with pytest.raises(ValueError):
        cat_kernel(GRID, CatState(1.0, 0.0, 0.0), 1.0, 2.0)


# ---------------------------------------------------------------------------
# beables


def test_parity_is_a_beable_for_even_state():
    psi = gaussian_packet(GRID, 1.0)
    rho = build_rho_gauss(psi, 1e-3)
    res = is_beable(ObservableKernel("parity"), rho)
    assert res["beable"]
    # every event has a definite parity of +-1
    np.testing.assert_allclose(np.abs(res["event_values"]), 1.0, atol=1e-6)
    val = beable_expectation(None, res["events"], res["event_values"])
    assert val == pytest.approx(expect_parity(rho), abs=1e-6)


def test_position_is_not_a_beable():
    rho = build_rho_gauss(gaussian_packet(GRID, 1.0), 1e-2)
    assert not is_beable(ObservableKernel.position(lambda x: x), rho)["beable"]


def test_density_operator_is_its_own_beable():
    rho = build_rho_gauss(gaussian_packet(GRID, 1.0, x0=0.4), 0.2)
    res = is_beable(rho, rho)
    assert res["beable"]
    lam = [e.eigenvalue for e in res["events"].events]
    np.testing.assert_allclose(res["event_values"], lam, rtol=1e-6, atol=1e-12)


def test_beable_expectation_needs_one_value_per_event():
    rho = build_rho_gauss(gaussian_packet(GRID, 1.0), 0.2)
    with pytest.raises(ValueError):
        beable_expectation(None, brute_force_events(rho), [1.0])

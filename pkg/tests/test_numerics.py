import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gravdeco.numerics import (
    Grid1D,
    HamiltonianSpec,
    QuadratureBudgetExceeded,
    QuadratureSpec,
    TrigPowerTail,
    adaptive_gauss_kronrod,
    expn_complex,
    hamiltonian_matrix,
    hermitian_spectrum,
    integrate_semiinfinite,
    momentum_operator,
    p2_operator,
    schrodinger_propagate,
)
from gravdeco.states import WaveFunction, box_eigenstate, gaussian_packet, position_moments


# ---------------------------------------------------------------------------
# grids


def test_box_grid_puts_walls_one_spacing_outside():
    g = Grid1D.box(1.0, 9)
    assert g.walls == pytest.approx((-1.0, 1.0), abs=1e-15)
    assert g.dx == pytest.approx(0.2)
    assert g.is_symmetric


def test_symmetric_grid_needs_odd_size():
    assert Grid1D.symmetric(2.0, 11).is_symmetric
    assert not Grid1D(-2.0, 2.0, 10).is_symmetric


@pytest.mark.parametrize("n", [0, 1])
def test_grid_rejects_tiny(n):
    with pytest.raises(ValueError):
        Grid1D(0.0, 1.0, n)


# ---------------------------------------------------------------------------
# quadrature


@pytest.mark.parametrize(
    "f, exact",
    [
        (np.exp, math.e - 1.0),
        (lambda x: np.sin(30 * x) ** 2, 0.5 - math.sin(60.0) / 120.0),
        (lambda x: np.sqrt(x), 2.0 / 3.0),
    ],
)
def test_gauss_kronrod_finite_interval(f, exact):
    total, err, _ = adaptive_gauss_kronrod(f, np.array([0.0, 1.0]), 1e-12, 1e-12, 10000)
    assert total == pytest.approx(exact, abs=1e-11)
    assert err < 1e-10


def test_gauss_kronrod_budget_is_enforced():
    with pytest.raises(QuadratureBudgetExceeded):
        adaptive_gauss_kronrod(lambda x: np.abs(x - 1.0 / 3.0) ** -0.9, np.array([0.0, 1.0]), 1e-14, 1e-14, 20)


@pytest.mark.parametrize("m", [1, 2, 5, 7, 9])
@pytest.mark.parametrize("z", [0.3 - 0.2j, -2.5j, -12.0j, 0.5 - 40.0j, 3.0 + 1.0j])
def test_generalized_exponential_integral_matches_mpmath(m, z):
    ref = complex(mpmath.expint(m, z))
    assert abs(expn_complex(m, z) - ref) <= 1e-13 * max(1.0, abs(ref))


def test_trig_power_tail_matches_direct_quadrature():
    tail = TrigPowerTail(((1.0, 3, 2.0), (0.5j, 4, 1.0), (0.7, 3, 0.0)))

    # closed form: int_K^inf k^-m e^{iwk} dk = K^{1-m} E_m(-iwK), evaluated in mpmath
    K = mpmath.mpf(10)
    ref = float(
        mpmath.re(K**-2 * mpmath.expint(3, -2j * K) + 0.5j * K**-3 * mpmath.expint(4, -1j * K)) + 0.7 / (2 * K**2)
    )
    assert tail(10.0) == pytest.approx(ref, rel=1e-9)


def test_semi_infinite_with_exact_tail():
    # int_0^inf (1 - cos 2k) / (2 k^2) dk = pi/2
    def f(k):
        k = np.asarray(k, dtype=float)
        small = k < 1e-3
        ks = np.where(small, 1.0, k)
        return np.where(small, 1.0 - k * k / 3.0, (1.0 - np.cos(2 * ks)) / (2 * ks * ks))

    tail = TrigPowerTail(((0.5, 2, 0.0), (-0.5, 2, 2.0)))
    val = integrate_semiinfinite(f, QuadratureSpec(1e-12, 1e-12, 8 * math.pi), tail=tail, period=math.pi)
    assert val == pytest.approx(math.pi / 2, abs=1e-11)


def test_semi_infinite_with_power_law_tail():
    def f(k):
        return np.sin(np.asarray(k)) ** 2 / (1.0 + np.asarray(k)) ** 2

    # substitute u = 1 + k and use sine/cosine integrals
    a = mpmath.cos(2) - 2 * (mpmath.pi / 2 - mpmath.si(2))
    b = mpmath.sin(2) - 2 * mpmath.ci(2)
    ref = float(0.5 - 0.5 * (mpmath.cos(2) * a + mpmath.sin(2) * b))
    val = integrate_semiinfinite(f, QuadratureSpec(1e-6, 1e-6, 200 * math.pi), period=math.pi, decay_power=2.0)
    assert val == pytest.approx(ref, abs=1e-5)


# ---------------------------------------------------------------------------
# eigensolver and operators


@given(st.integers(2, 12), st.integers(0, 2**31 - 1))
def test_hermitian_spectrum_sorted_and_reconstructs(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    h = a + a.conj().T
    w, v = hermitian_spectrum(h)
    assert np.all(np.diff(w) <= 1e-12)
    np.testing.assert_allclose(v @ np.diag(w) @ v.conj().T, h, atol=1e-10)


def test_momentum_operators_are_hermitian():
    g = Grid1D.symmetric(3.0, 41)
    p = momentum_operator(g)
    np.testing.assert_allclose(p, p.conj().T, atol=0)
    for order in (2, 4):
        p2 = p2_operator(g, order)
        np.testing.assert_allclose(p2, p2.T, atol=0)


def test_five_point_stencil_is_fourth_order():
    errs = []
    for n in (101, 201):
        g = Grid1D.symmetric(8.0, n)
        psi = gaussian_packet(g, 1.0, p0=0.8)
        a = psi.amplitudes
        val = np.vdot(a, p2_operator(g, 4) @ a).real * g.dx
        errs.append(abs(val - (0.8**2 + 0.25)))
    assert errs[0] / errs[1] > 12.0


def test_box_hamiltonian_ground_state_energy():
    g = Grid1D.box(1.0, 401)
    h = HamiltonianSpec.box(1.0, 1.0)
    w = np.linalg.eigvalsh(hamiltonian_matrix(h, g))
    assert w[0] == pytest.approx(math.pi**2 / 8.0, rel=1e-4)


def test_box_hamiltonian_rejects_mismatched_walls():
    with pytest.raises(ValueError):
        hamiltonian_matrix(HamiltonianSpec.box(1.0, 2.0), Grid1D.box(1.0, 11))


@pytest.mark.parametrize("kind", ["free", "harmonic"])
def test_hamiltonian_spec_validation(kind):
    with pytest.raises(ValueError):
        getattr(HamiltonianSpec, kind)(*([-1.0] if kind == "free" else [-1.0, 1.0]))


# ---------------------------------------------------------------------------
# propagation


@pytest.mark.parametrize("method", ["cn", "spectral"])
def test_free_gaussian_spreads_like_the_continuum(method):
    g = Grid1D.symmetric(25.0, 801)
    psi = gaussian_packet(g, 1.0)
    t = 3.0
    out = schrodinger_propagate(psi, HamiltonianSpec.free(1.0), t, method=method)
    assert out.norm == pytest.approx(1.0, abs=1e-10)
    assert position_moments(out)[1] == pytest.approx(1.0 + (t / 2.0) ** 2, rel=1e-3)


def test_box_eigenstate_is_stationary_up_to_phase():
    g = Grid1D.box(1.0, 101)
    psi = box_eigenstate(g, 1.0, 1)
    out = schrodinger_propagate(psi, HamiltonianSpec.box(1.0, 1.0), 2.0, method="spectral")
    assert abs(np.vdot(psi.amplitudes, out.amplitudes) * g.dx) == pytest.approx(1.0, abs=1e-12)


def test_harmonic_returns_after_period():
    g = Grid1D.symmetric(10.0, 401)
    h = HamiltonianSpec.harmonic(1.0, 1.0)
    psi = gaussian_packet(g, 0.5, x0=1.0)
    out = schrodinger_propagate(psi, h, h.period, method="spectral")
    assert abs(np.vdot(psi.amplitudes, out.amplitudes) * g.dx) == pytest.approx(1.0, abs=1e-3)


def test_forward_then_backward_is_identity():
    g = Grid1D.symmetric(10.0, 201)
    psi = gaussian_packet(g, 1.0, p0=0.5)
    h = HamiltonianSpec.free(1.0)
    back = schrodinger_propagate(schrodinger_propagate(psi, h, 1.3), h, -1.3)
    np.testing.assert_allclose(back.amplitudes, psi.amplitudes, atol=1e-10)


def test_unknown_propagation_method():
    g = Grid1D.symmetric(5.0, 51)
    with pytest.raises(ValueError):
        schrodinger_propagate(gaussian_packet(g, 1.0), HamiltonianSpec.free(1.0), 0.1, method="euler")


def test_propagation_preserves_wavefunction_type():
    g = Grid1D.symmetric(5.0, 51)
    psi = gaussian_packet(g, 1.0)
    out = schrodinger_propagate(psi, HamiltonianSpec.free(1.0), 0.1)
    assert isinstance(out, WaveFunction)

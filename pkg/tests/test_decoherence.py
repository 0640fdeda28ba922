import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from gravdeco.decoherence import (
    BallParams,
    DecoherenceSpec,
    NBodyConfig,
    PlanckUnits,
    SingularConfiguration,
    UnsupportedConfiguration,
    alpha,
    decoherence_integral,
    dexp,
    dexp_auto,
    dexp_exact,
    dexp_gaussian,
    dexp_log,
    dexp_nbody_gaussian,
    dexp_nbody_log,
    dexp_values,
    fit_gaussian_correction,
    load_constants,
    normalization_integral,
    planck_convert,
)
from gravdeco.numerics import QuadratureSpec


# ---------------------------------------------------------------------------
# independent real-space oracle
#
# In position space the k^-3 kernel is a logarithm, so I(u) is the mean of
# ln|r + u e| - ln|r| over the separation r of two points drawn uniformly from
# the unit ball, divided by 9. The separation length has density
# p(r) = 3 r^2 (1 - 3r/4 + r^3/16) on [0, 2]; the angular mean of ln|r + u e|
# has a closed form.


def _pair_density(r):
    return 3.0 * r * r * (1.0 - 0.75 * r + r**3 / 16.0)


def _angular_mean_log(r, u):
    def F(s):
        return s * math.log(s) - s if s > 0 else 0.0

    return (F((r + u) ** 2) - F((r - u) ** 2)) / (8.0 * r * u)


def real_space_integral(u):
    pts = [u] if u < 2 else None
    val, _ = quad(
        lambda r: _pair_density(r) * (_angular_mean_log(r, u) - math.log(r)),
        0.0,
        2.0,
        points=pts,
        epsabs=1e-14,
        epsrel=1e-13,
        limit=200,
    )
    return val / 9.0


def test_pair_density_is_normalized():
    assert quad(_pair_density, 0.0, 2.0)[0] == pytest.approx(1.0, abs=1e-13)


@pytest.mark.parametrize("u", [0.01, 0.05, 0.2, 0.5, 1.0, 1.7, 2.0, 2.5, 5.0, 30.0, 300.0])
def test_integral_matches_real_space_oracle(u):
    assert decoherence_integral(u) == pytest.approx(real_space_integral(u), rel=1e-9, abs=1e-15)


def test_integral_at_zero_and_negative():
    assert decoherence_integral(0.0) == 0.0
    with pytest.raises(ValueError):
        decoherence_integral(-0.1)


@given(st.floats(0.01, 50.0), st.floats(0.01, 50.0))
def test_integral_is_increasing(u, v):
    lo, hi = sorted((u, v))
    if hi - lo < 1e-6:
        return
    assert decoherence_integral(hi) > decoherence_integral(lo)


def test_cutoff_choice_does_not_change_result():
    ref = decoherence_integral(0.7)
    for cutoff in (2 * math.pi, 9 * math.pi, 30.0):
        val = decoherence_integral(0.7, QuadratureSpec(tail_cutoff=cutoff))
        assert val == pytest.approx(ref, rel=1e-9)


# ---------------------------------------------------------------------------
# normalization and asymptotes


def test_normalization_integral_is_one_quarter():
    assert normalization_integral() == pytest.approx(0.25, abs=1e-12)


def test_small_separation_is_gaussian():
    # I(u) -> u^2 / 24 so that D -> 9 M^2 u^2
    for u in (1e-3, 1e-2):
        assert decoherence_integral(u) / (u * u / 24.0) == pytest.approx(1.0, abs=5 * u * u)


def test_gaussian_regime_value():
    ball = BallParams(10.0, 1.0)
    assert dexp_exact(0.1, ball) == pytest.approx(8.9615, abs=5e-4)
    assert 8.55 <= dexp_exact(0.1, ball) <= 9.45
    assert dexp_gaussian(0.1, ball) == pytest.approx(9.0)


def test_large_separation_slope_is_24():
    ball = BallParams(1.0, 1.0)
    u = np.geomspace(50, 500, 9)
    d = [dexp_exact(x, ball) for x in u]
    slope = np.polyfit(np.log(u), d, 1)[0]
    assert slope == pytest.approx(24.0, rel=1e-3)


def test_log_form_offset_is_constant_at_large_separation():
    ball = BallParams(2.0, 1.0)
    offs = [dexp_exact(u, ball) - dexp_log(u, ball) for u in (200.0, 2000.0)]
    assert offs[0] == pytest.approx(offs[1], rel=1e-4)


def test_gaussian_correction_scales_like_u4_log_u():
    fit = fit_gaussian_correction(1.0, [0.01, 0.02, 0.04])
    assert 3.5 < fit["slope"] < 4.5
    assert all(c < 0 for c in fit["corrections"])


@given(st.floats(0.1, 100.0), st.floats(0.1, 10.0), st.floats(0.0, 5.0))
def test_exact_scales_with_mass_squared(M, R, u):
    a = u * R
    d1 = dexp_exact(a, BallParams(1.0, R))
    assert dexp_exact(a, BallParams(M, R)) == pytest.approx(M * M * d1, rel=1e-9, abs=1e-12)


def test_alpha():
    assert alpha(BallParams(3.0, 2.0)) == pytest.approx(9.0 * 9.0 / 4.0)


# ---------------------------------------------------------------------------
# dispatch


def test_auto_switches_at_threshold():
    ball = BallParams(1.0, 1.0)
    assert dexp_auto(0.2, ball) == dexp_gaussian(0.2, ball)
    assert dexp_auto(0.3, ball) == dexp_exact(0.3, ball)


@pytest.mark.parametrize("mode", ["exact", "gaussian", "logarithmic", "auto"])
def test_dispatch_matches_direct_call(mode):
    ball = BallParams(1.5, 0.5)
    direct = {"exact": dexp_exact, "gaussian": dexp_gaussian, "logarithmic": dexp_log, "auto": dexp_auto}[mode]
    assert dexp(3.0, DecoherenceSpec(mode, ball)) == direct(3.0, ball)


def test_dexp_values_vectorizes_and_is_symmetric():
    spec = DecoherenceSpec("exact", BallParams(1.0, 1.0))
    d = np.array([[0.0, 0.5], [-0.5, 2.0]])
    out = dexp_values(d, spec)
    assert out[0, 0] == 0.0
    assert out[0, 1] == out[1, 0]
    assert out[1, 1] == dexp_exact(2.0, spec.ball)


@pytest.mark.parametrize(
    "kwargs",
    [dict(mode="bogus", ball=BallParams(1, 1)), dict(mode="exact", ball=BallParams(1, 1), quad=None)],
)
def test_spec_validation(kwargs):
    with pytest.raises(ValueError):
        DecoherenceSpec(**kwargs)


@pytest.mark.parametrize("M, R", [(0.0, 1.0), (1.0, -1.0)])
def test_ball_validation(M, R):
    with pytest.raises(ValueError):
        BallParams(M, R)


def test_log_form_needs_positive_separation():
    with pytest.raises(ValueError):
        dexp_log(0.0, BallParams(1.0, 1.0))


# ---------------------------------------------------------------------------
# many balls


def test_nbody_gaussian_reduces_to_single_ball():
    cfg = NBodyConfig((2.0,), (1.0,))
    assert dexp_nbody_gaussian(cfg, [0.0], [0.3]) == pytest.approx(dexp_gaussian(0.3, BallParams(2.0, 1.0)))


def test_nbody_gaussian_depends_only_on_centre_of_mass():
    cfg = NBodyConfig((1.0, 3.0), (1.0, 1.0))
    # moving the light ball by +0.3 and the heavy one by -0.1 leaves the centre of mass fixed
    assert dexp_nbody_gaussian(cfg, [0.0, 2.0], [0.3, 1.9]) == pytest.approx(0.0, abs=1e-25)
    shift = 9.0 * 16.0 * 0.25**2
    assert dexp_nbody_gaussian(cfg, [[0, 0, 0], [1, 0, 0]], [[0, 0.25, 0], [1, 0.25, 0]]) == pytest.approx(shift)


def test_nbody_gaussian_rejects_unequal_radii():
    with pytest.raises(UnsupportedConfiguration):
        dexp_nbody_gaussian(NBodyConfig((1, 1), (1, 2)), [0, 1], [0, 1])


def test_nbody_log_single_ball_matches_log_form():
    ball = BallParams(1.5, 0.1)
    cfg = NBodyConfig((1.5,), (0.1,))
    assert dexp_nbody_log(cfg, [0.0], [40.0]) == pytest.approx(dexp_log(40.0, ball))


@given(st.lists(st.floats(-5, 5), min_size=2, max_size=2, unique=True), st.floats(50, 200))
def test_nbody_log_is_symmetric_under_swap(x, shift):
    cfg = NBodyConfig((1.0, 2.0), (0.1, 0.1))
    if abs(x[0] - x[1]) < 1e-3:
        return
    xp = [x[0] + shift, x[1] - shift]
    assert dexp_nbody_log(cfg, x, xp) == pytest.approx(dexp_nbody_log(cfg, xp, x), rel=1e-12)
    assert dexp_nbody_log(cfg, x, x) == 0.0


def test_nbody_log_detects_coincident_points():
    cfg = NBodyConfig((1.0, 1.0), (0.1, 0.1))
    with pytest.raises(SingularConfiguration):
        dexp_nbody_log(cfg, [0.0, 1.0], [1.0, 2.0])


def test_nbody_config_validation():
    with pytest.raises(ValueError):
        NBodyConfig((1.0, 2.0), (1.0,))


# ---------------------------------------------------------------------------
# units


def test_constants_file_parses():
    c = load_constants()
    assert c["planck_length_cm"] == pytest.approx(1.616255e-33)


def test_constants_file_rejects_bad_line(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("planck_length_cm 1.0\n")
    with pytest.raises(ValueError):
        load_constants(p)


@given(st.floats(1e-30, 1e30), st.sampled_from(["cm", "g", "s", "yr"]))
def test_planck_round_trip(value, unit):
    planck = {"cm": "lp", "g": "mp", "s": "tp", "yr": "tp"}[unit]
    back = planck_convert(planck_convert(value, unit, planck), planck, unit)
    assert back == pytest.approx(value, rel=1e-14)


def test_planck_conversion_values():
    assert planck_convert(1.616255e-33, "cm", "lp") == pytest.approx(1.0)
    assert planck_convert(1.0, "yr", "s") == pytest.approx(3.15576e7)
    units = PlanckUnits(2.0, 3.0, 5.0)
    assert planck_convert(10.0, "g", "mp", units) == pytest.approx(2.0)


def test_planck_conversion_rejects_mixed_dimensions():
    with pytest.raises(ValueError):
        planck_convert(1.0, "cm", "s")
    with pytest.raises(ValueError):
        planck_convert(1.0, "furlong", "cm")

import math
import struct

import numpy as np
import pytest
import sympy
from hypothesis import given, settings, strategies as st
from scipy import integrate

from decospace.errors import AliasingError
from decospace.grid import (
    GridSpec,
    PrototypeSpec,
    SampledField,
    WeightSpec,
    hat_derivative,
    interpolate,
    modulate_dilate,
    random_bandlimited,
    resample,
    weighted_lp_norm,
)

G1 = GridSpec(1, 1024, 16.0)
G2 = GridSpec(2, 64, 4.0)


def test_gridspec_geometry():
    g = GridSpec(1, 256, 4.0)
    assert g.h == 8.0 / 256
    assert g.size == 256
    assert g.nyquist == 256 / 16
    assert g.xi_axis.min() == -g.nyquist
    assert GridSpec(2, 16, 1.0).size == 256


@pytest.mark.parametrize("n, L", [(6, 1.0), (7, 1.0), (16, 0.0)])
def test_gridspec_rejects_bad_parameters(n, L):
    with pytest.raises(ValueError):
        GridSpec(1, n, L)


@pytest.mark.parametrize("g", [G1, G2])
def test_delta_transform_is_one(g):
    hat = SampledField.delta(g).hat
    np.testing.assert_allclose(hat, 1.0, atol=1e-12)


def test_zero_field_transform():
    assert np.all(SampledField.zeros(G1).hat == 0)


def test_gaussian_pair_matches_closed_form():
    # oracle: exp(-pi x^2) is its own Fourier transform
    x = G1.x_axis
    f = SampledField(G1, np.exp(-np.pi * x**2))
    np.testing.assert_allclose(f.hat, np.exp(-np.pi * G1.xi_axis**2), atol=1e-8)


@pytest.mark.parametrize("g", [G1, G2])
def test_round_trip_and_parseval(g):
    f = random_bandlimited(g, np.random.default_rng(1))
    back = SampledField.from_hat(g, f.hat)
    again = SampledField(g, back.values)
    assert (again - f).l2_norm() <= 1e-12 * f.l2_norm()
    spectral = math.sqrt(float(np.sum(np.abs(f.hat) ** 2)) * g.dxi**g.d)
    assert abs(spectral - f.l2_norm()) <= 1e-10 * f.l2_norm()


def test_lp_norm_constants():
    g = GridSpec(1, 64, 1.0)
    one = SampledField(g, np.ones(64))
    assert weighted_lp_norm(one, 2.0) == pytest.approx(math.sqrt(2.0), rel=1e-14)
    c = SampledField(g, np.full(64, -3.5))
    assert weighted_lp_norm(c, math.inf) == pytest.approx(3.5, rel=1e-15)


def test_lp_norm_rejects_nonpositive_p():
    with pytest.raises(ValueError):
        weighted_lp_norm(SampledField.zeros(G1), 0.0)


def test_weighted_l1_gaussian_against_dense_quadrature():
    g = GridSpec(1, 4096, 16.0)
    f = SampledField(g, np.exp(-np.pi * g.x_axis**2))
    val = weighted_lp_norm(f, 1.0, WeightSpec.bracket(2.0))
    x = np.linspace(-16, 16, 1_000_001)
    oracle = integrate.trapezoid((1 + x**2) * np.exp(-np.pi * x**2), x)
    assert val == pytest.approx(oracle, rel=1e-6)


def test_interpolation_of_bandlimited_field():
    f = random_bandlimited(G1, np.random.default_rng(2))
    x0 = np.array([[0.123], [-7.7], [15.01]])
    direct = np.array([np.sum(f.hat * np.exp(2j * np.pi * G1.xi_axis * x[0])) * G1.dxi for x in x0])
    np.testing.assert_allclose(interpolate(f, x0), direct, atol=1e-10 * np.abs(f.values).max())


def test_resample_round_trip():
    f = random_bandlimited(G2, np.random.default_rng(3))
    fine = resample(f, G2.refined(4))
    np.testing.assert_allclose(fine.values[::4, ::4], f.values, atol=1e-12 * np.abs(f.values).max())
    assert (resample(fine, G2) - f).l2_norm() <= 1e-12 * f.l2_norm()


def test_random_field_envelope_must_stay_trusted():
    with pytest.raises(AliasingError):
        random_bandlimited(G1, np.random.default_rng(0), edge=0.8)


# -- weights ----------------------------------------------------------------


@settings(max_examples=60, deadline=None)
@given(st.floats(-3, 3), st.lists(st.floats(-50, 50), min_size=4, max_size=4))
def test_weight_moderated_by_companion(mu, xy):
    v = WeightSpec.bracket(mu)
    v0 = v.companion()
    x, y = np.array([xy[:2]]), np.array([xy[2:]])
    assert v(x + y)[0] <= v(x)[0] * v0(y)[0] * (1 + 1e-12)
    assert v0(y)[0] >= 1.0
    assert v0(-y)[0] == pytest.approx(v0(y)[0])
    assert v0(x + y)[0] <= v0(x)[0] * v0(y)[0] * (1 + 1e-12)


def test_weight_constants():
    v = WeightSpec.bracket(-1.5)
    assert v.K == 1.5
    assert v.omega0 == 1.0
    assert v.omega1 == pytest.approx(2**1.5)


# -- norms: homogeneity and triangle inequalities ----------------------------


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([0.5, 1.0, 2.0, math.inf]), st.floats(-5, 5).filter(lambda c: abs(c) > 1e-3))
def test_norm_homogeneity(seed, p, c):
    f = random_bandlimited(GridSpec(1, 128, 4.0), np.random.default_rng(seed))
    assert weighted_lp_norm(f * c, p) == pytest.approx(abs(c) * weighted_lp_norm(f, p), rel=1e-14)


@pytest.mark.parametrize("p", [0.5, 1.0, 2.0, 3.0, math.inf])
def test_triangle_inequalities(p):
    g = GridSpec(1, 128, 4.0)
    rng = np.random.default_rng(5)
    for _ in range(100):
        f, h = random_bandlimited(g, rng), random_bandlimited(g, rng)
        a, b, s = weighted_lp_norm(f, p), weighted_lp_norm(h, p), weighted_lp_norm(f + h, p)
        if p >= 1:
            assert s <= (a + b) * (1 + 1e-12)
        else:
            assert s**p <= (a**p + b**p) * (1 + 1e-12)


# -- prototypes and derivatives ------------------------------------------------


def test_gaussian_hat_derivative_against_symbolic():
    x = sympy.symbols("x")
    expr = sympy.diff(sympy.exp(-sympy.pi * x**2), x)
    oracle = sympy.lambdify(x, expr, "numpy")(G1.xi_axis)
    got = hat_derivative(PrototypeSpec.gaussian(1.0), (1,), G1).hat
    np.testing.assert_allclose(got, oracle, atol=1e-14)


def test_gaussian_zeroth_derivative():
    got = hat_derivative(PrototypeSpec.gaussian(1.0), (0,), G1).hat
    np.testing.assert_allclose(got, np.exp(-np.pi * G1.xi_axis**2), atol=1e-15)


def test_bspline_second_derivative_against_finite_differences():
    spline = PrototypeSpec.bspline(3)
    xi = np.array([-2.3, -0.71, 0.05, 0.4, 1.37, 3.9])
    step = 1e-3

    def s4(t):
        return np.sinc(t) ** 4

    # fourth-order centered stencil for the second derivative
    fd = (-s4(xi + 2 * step) + 16 * s4(xi + step) - 30 * s4(xi) + 16 * s4(xi - step) - s4(xi - 2 * step)) / (12 * step**2)
    got = spline.hat(xi[:, None], (2,))
    np.testing.assert_allclose(got.real, fd, atol=1e-5)
    assert np.abs(got.imag).max() < 1e-14


def test_bspline_derivative_against_symbolic():
    t = sympy.symbols("t")
    expr = sympy.diff((sympy.sin(sympy.pi * t) / (sympy.pi * t)) ** 3, t, 3)
    fn = sympy.lambdify(t, expr, "numpy")
    xi = np.array([-1.7, -0.3, 0.45, 2.2])
    got = PrototypeSpec.bspline(2).hat(xi[:, None], (3,))
    np.testing.assert_allclose(got, fn(xi), rtol=1e-9, atol=1e-12)


def test_tabulated_derivative_matches_closed_form():
    g = GridSpec(1, 1024, 16.0)
    spline = PrototypeSpec.bspline(3)
    tab = PrototypeSpec.tabulated(SampledField(g, spline.space(g.x_points())))
    mask = g.trusted_mask()
    for alpha in [(0,), (1,), (2,)]:
        exact = spline.hat(g.xi_points(), alpha)
        got = hat_derivative(tab, alpha, g).hat
        assert np.abs(got - exact)[mask].max() <= 1e-6 * np.abs(exact).max()


def test_derivative_cap_and_boundary_support():
    with pytest.raises(ValueError):
        hat_derivative(PrototypeSpec.gaussian(1.0), (13,), G1)
    g = GridSpec(1, 64, 2.0)
    wide = PrototypeSpec.tabulated(SampledField(g, np.ones(64)))
    with pytest.raises(AliasingError):
        hat_derivative(wide, (1,), g)


def test_prototype_support_flags_are_honest():
    g = GridSpec(1, 2048, 16.0)
    for proto in (PrototypeSpec.bspline(3), PrototypeSpec.cutoff(6, 0.5, 1.5)):
        hw = proto.support_halfwidth
        vals = proto.space(g.x_points())
        assert np.abs(vals[np.abs(g.x_axis) > hw]).max(initial=0.0) <= 1e-14
        assert proto.is_real
    assert PrototypeSpec.gaussian(1.0).support_halfwidth is None


def test_cutoff_transform_matches_dft():
    g = GridSpec(2, 512, 4.0)
    proto = PrototypeSpec.cutoff(6, 0.5, 1.5, 2)
    sampled = SampledField(g, proto.space(g.x_points()))
    exact = proto.hat(g.xi_points())
    assert np.abs(exact - sampled.hat).max() <= 1e-8 * np.abs(exact).max()


# -- modulation and dilation ----------------------------------------------------


def test_modulate_dilate_identity():
    gauss = PrototypeSpec.gaussian(1.0)
    f = modulate_dilate(gauss, [[1.0]], [0.0], "l1", G1)
    np.testing.assert_allclose(f.values, np.exp(-np.pi * G1.x_axis**2), atol=1e-12)


def test_modulate_dilate_by_two():
    gauss = PrototypeSpec.gaussian(1.0)
    f = modulate_dilate(gauss, [[2.0]], [0.0], "l1", G1)
    np.testing.assert_allclose(f.values, 2 * np.exp(-np.pi * (2 * G1.x_axis) ** 2), atol=1e-12)
    np.testing.assert_allclose(f.hat, np.exp(-np.pi * (G1.xi_axis / 2) ** 2), atol=1e-15)


def test_l2_normalization_is_isometric():
    g = GridSpec(1, 2048, 16.0)
    gauss = PrototypeSpec.gaussian(1.0)
    base = SampledField(g, gauss.space(g.x_points())).l2_norm()
    f = modulate_dilate(gauss, [[4.0]], [8.0], "l2", g)
    assert f.l2_norm() == pytest.approx(base, rel=1e-8)
    # modulation: |gamma^[i]| is the dilate of |gamma| and the spectrum sits at b
    assert g.xi_axis[np.argmax(np.abs(f.hat))] == pytest.approx(8.0)


def test_modulate_dilate_rejects_singular():
    with pytest.raises(np.linalg.LinAlgError):
        modulate_dilate(PrototypeSpec.gaussian(1.0, 2), [[1.0, 2.0], [2.0, 4.0]], [0.0, 0.0], "l1", G2)


# -- serialization -------------------------------------------------------------


def test_binary_container_layout(tmp_path):
    g = GridSpec(2, 8, 1.5)
    f = random_bandlimited(g, np.random.default_rng(9))
    blob = f.to_bytes()
    assert blob[:4] == b"DSPF"
    assert struct.unpack("<IIId", blob[4:24]) == (1, 2, 8, 1.5)
    assert len(blob) == 24 + 16 * 64
    path = tmp_path / "f.dspf"
    f.save(path)
    back = SampledField.load(path)
    assert back.spec == g
    assert np.array_equal(back.values, f.values)
    csv = f.to_csv().splitlines()
    assert csv[0] == "index,re,im" and len(csv) == 65

import math
import warnings
from fractions import Fraction

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from decospace import criteria as cr
from decospace.config import load_config
from decospace.covering import ModerateWeightSpec, build_alpha_covering, build_besov_covering, sub_truncation, truncate
from decospace.errors import DecospaceError
from decospace.experiment import Setup
from decospace.grid import GridSpec, PrototypeSpec, SampledField

from pathlib import Path

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
GAUSS = PrototypeSpec.gaussian(1.0)
X = sp.symbols("x", real=True)


def sympy_envelope(expr, N):
    """``max_{a <= N} |d^a expr|`` for ``expr`` in one variable, as numpy callables."""
    fns = [sp.lambdify(X, sp.diff(expr, X, a), "numpy") for a in range(N + 1)]
    return lambda t: np.max([np.abs(np.broadcast_to(f(t), np.shape(t))) for f in fns], axis=0)


def gaussian_envelopes(N):
    base = sp.exp(-sp.pi * X**2)
    return [sympy_envelope(base, N), sympy_envelope(2 * sp.pi * sp.I * X * base, N)]


def quiet(fn, *args, **kwargs):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return fn(*args, **kwargs)


# -- parameters -----------------------------------------------------------------------------


def test_params_derived_quantities():
    P = cr.CriteriaParams(1, 1.0, 1.0, 0.5, 0.0)
    assert (P.N, P.tau, P.sigma_frame, P.theta) == (2, 1.0, 3.0, 0.0)
    Q = cr.CriteriaParams(2, 0.5, 2.0, 0.5, 1.0)
    assert Q.K == 1.0 and Q.N == math.ceil(1 + 2.5 / 0.5) and Q.tau == 0.5 and Q.theta == 1.0
    assert Q.sigma_frame == 0.5 * (2 / 0.5 + 1 + Q.N)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 3), st.floats(0.05, 1.0), st.floats(0.05, 4.0), st.floats(1e-3, 2.0), st.floats(-3, 3))
def test_params_N_at_least_d_plus_one(d, p, q, eps, mu):
    P = cr.CriteriaParams(d, p, q, eps, mu)
    assert P.N >= d + 1
    assert P.N >= P.K + (d + eps) / min(1, p) - 1e-9


# -- envelopes and bracket derivatives --------------------------------------------------------------


def test_derivative_envelope_matches_symbolic():
    t = np.linspace(-3, 3, 41)[:, None]
    for beta, env in zip([(0,), (1,)], gaussian_envelopes(3)):
        np.testing.assert_allclose(cr.derivative_envelope(GAUSS, t, 3, beta), env(t[:, 0]), rtol=1e-12, atol=1e-300)


@pytest.mark.parametrize("c, alpha", [(0.75, (0,)), (0.75, (1,)), (1.25, (3,)), (-1.5, (2,))])
def test_bracket_power_derivatives(c, alpha):
    t = np.linspace(-5, 5, 23)
    oracle = sp.lambdify(X, sp.diff((1 + X**2) ** sp.Rational(c).limit_denominator(8), X, alpha[0]), "numpy")(t)
    np.testing.assert_allclose(cr.bracket_power(t[:, None], c, alpha), oracle, rtol=1e-12)


def test_factor_prototype_leibniz():
    c = 1.25
    g1 = cr.FactorPrototype(GAUSS, c)
    expr = sp.exp(-sp.pi * X**2) * (1 + X**2) ** sp.Rational(5, 4)
    t = np.linspace(-2, 2, 17)
    for a in range(4):
        oracle = sp.lambdify(X, sp.diff(expr, X, a), "numpy")(t)
        np.testing.assert_allclose(g1.hat(t[:, None], (a,)).real, oracle, rtol=1e-10, atol=1e-14)


# -- Schur matrices ----------------------------------------------------------------------------------


def test_frame_entry_against_monte_carlo():
    P = cr.CriteriaParams(1)
    cov = build_alpha_covering(1, 0.0, 1.25)
    entry = cr.schur_matrix_frame(cov, sub_truncation(truncate(cov, 4.0), [(1,)]), GAUSS, P).values[0, 0]
    envs = gaussian_envelopes(P.N)
    estimates = []
    for seed in range(3):
        # Q_(1) is the ball of radius 1.25 about 1 and S_(1)^{-1} recentres it
        u = np.random.default_rng(seed).uniform(-1.25, 1.25, 10**6)
        estimates.append(2.0**P.sigma_frame * max(env(u).mean() * 2.5 for env in envs))
    assert max(estimates) <= 1.01 * min(estimates)
    assert entry == pytest.approx(np.mean(estimates), rel=0.02)


def test_uniform_diagonal_prefactor():
    # identity dilations and unit weight: every diagonal entry is 2^sigma times the same integral
    P = cr.CriteriaParams(1)
    cov = build_alpha_covering(1, 0.0, 1.25)
    idx = truncate(cov, 6.0)
    M = cr.schur_matrix_frame(cov, idx, GAUSS, P)
    eta, vol = cr.quadrature_nodes(cov, (0,), 64)
    integral = max(env(eta[:, 0]).sum() * vol for env in gaussian_envelopes(P.N))
    np.testing.assert_allclose(np.diag(M.values), 2.0**P.sigma_frame * integral, rtol=1e-12)


def test_besov_gaussian_column_grows():
    # no vanishing moments: M[j, 0] does not decay in j, so column sums grow with the truncation
    P = cr.CriteriaParams(1)
    cov = build_besov_covering(1)
    w = ModerateWeightSpec("dyadic", 1.0)
    M = quiet(cr.schur_matrix_frame, cov, truncate(cov, 1024.0), GAUSS, P, w)
    col = [M.values[M.indices.index(j), 0] for j in (4, 6, 8)]
    assert col[0] < col[1] < col[2]
    half = M.restrict(list(truncate(cov, 256.0)))
    assert M.values[:, 0].sum() >= 1.25 * half.values[:, 0].sum()


def test_atomic_p_one_has_no_determinant_factor():
    P = cr.CriteriaParams(1, 1.0, 1.0)
    assert P.theta == 0.0
    cov = build_besov_covering(1)
    idx = truncate(cov, 64.0)
    a = quiet(cr.schur_matrix_atomic, cov, idx, GAUSS, P)
    b = quiet(cr.schur_matrix_atomic, cov, idx, GAUSS, cr.CriteriaParams(1, 1.0, 1.0, 0.5, 0.0))
    np.testing.assert_array_equal(a.values, b.values)


def test_atomic_uniform_symmetry():
    cov = build_alpha_covering(1, 0.0, 1.25)
    N = quiet(cr.schur_matrix_atomic, cov, truncate(cov, 6.0), GAUSS, cr.CriteriaParams(1)).values
    big = N > 1e-200
    assert np.all(np.abs(N - N.T)[big] <= 0.02 * N[big])


def test_zero_prototype_gives_zero_matrix():
    cov = build_besov_covering(1)
    idx = truncate(cov, 16.0)
    P = cr.CriteriaParams(1)
    assert not cr.schur_matrix_frame(cov, idx, PrototypeSpec.zero(), P).values.any()
    assert not cr.schur_matrix_atomic(cov, idx, PrototypeSpec.zero(), P).values.any()


@pytest.mark.parametrize("name", ["alpha_half", "besov_frame_inadmissible"])
def test_quadrature_doubling_every_entry(name):
    cfg = load_config(CONFIGS / f"{name}.toml")
    setup = Setup(cfg)
    idx = truncate(setup.cov, cfg.criteria.xi)
    P = cr.CriteriaParams(1, cfg.criteria.p0, cfg.criteria.q0, cfg.criteria.eps, cfg.criteria.mu0)
    A = quiet(cr.schur_matrix_frame, setup.cov, idx, setup.prototype, P, nodes=cfg.criteria.nodes).values
    B = quiet(cr.schur_matrix_frame, setup.cov, idx, setup.prototype, P, nodes=2 * cfg.criteria.nodes).values
    live = A > 0
    assert np.all(np.abs(B - A)[live] < 0.01 * A[live])


@pytest.mark.parametrize("name", ["alpha_half", "besov_frame_inadmissible"])
def test_quadrature_doubling_sums_resolved(name):
    cfg = load_config(CONFIGS / f"{name}.toml")
    setup = Setup(cfg)
    idx = truncate(setup.cov, cfg.criteria.xi)
    P = cr.CriteriaParams(1)
    A, B = (quiet(cr.schur_matrix_frame, setup.cov, idx, setup.prototype, P, nodes=n).values for n in (256, 512))
    for ax in (0, 1):
        np.testing.assert_allclose(B.sum(axis=ax), A.sum(axis=ax), rtol=0.01)


# -- Schur sums and bounds ---------------------------------------------------------------------------


def test_schur_sums_identity():
    s = cr.schur_sums(cr.SchurMatrix(list(range(5)), np.eye(5), "frame"))
    assert (s.C1, s.C2, s.stability) == (1.0, 1.0, None)


def test_schur_sums_geometric():
    n = 20
    i = np.arange(n + 1)
    M = cr.SchurMatrix(list(i), 2.0 ** -np.abs(i[:, None] - i[None, :]), "frame")
    exact = max(sum(Fraction(1, 2 ** abs(a - b)) for b in range(n + 1)) for a in range(n + 1))
    assert exact == 3 - Fraction(1, 2**9)
    s = cr.schur_sums(M, M.restrict(list(range(11))))
    assert s.C1 == s.C2 == float(exact)
    half_exact = max(sum(Fraction(1, 2 ** abs(a - b)) for b in range(11)) for a in range(11))
    assert s.stability == pytest.approx(float(exact / half_exact), rel=1e-15)


def test_operator_bound_regimes():
    A = np.array([[1.0, 2.0], [2.0, 3.0]])  # column sums 3, 5; row sums 3, 5
    B = np.array([[1.0, 0.0], [2.0, 3.0]])  # column sums 3, 3; row sums 1, 5
    assert cr.schur_operator_bound(A, 2.0) == 5.0
    assert cr.schur_operator_bound(B, math.inf) == 5.0
    assert cr.schur_operator_bound(np.diag([1.0, 4.0, 9.0]), 0.5) == pytest.approx(9.0, rel=1e-15)
    assert cr.schur_operator_bound(B, 1.0) == 3.0
    with pytest.raises(ValueError):
        cr.schur_operator_bound(A, 0.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 12), st.integers(0, 2**31))
def test_schur_bound_dominates_l2_norm(n, seed):
    A = np.random.default_rng(seed).exponential(size=(n, n))
    assert cr.schur_operator_bound(A, 2.0) >= cr.power_norm_estimate(A) * (1 - 1e-12)


def test_schur_bound_dominates_l2_norm_on_config():
    cov = build_alpha_covering(1, 0.5, 1.25)
    M = quiet(cr.schur_matrix_frame, cov, truncate(cov, 32.0), GAUSS, cr.CriteriaParams(1))
    assert cr.schur_operator_bound(M, 2.0) >= cr.power_norm_estimate(M)


# -- thresholds ---------------------------------------------------------------------------------------


def test_alpha_thresholds_examples():
    t0 = cr.alpha_thresholds(1, 0.0, 1.0, 1.0, 0.0, 0.0, 1e-9)
    assert t0["N0_frame"] == pytest.approx(5.0)
    t = cr.alpha_thresholds(1, 0.5, 1.0, 1.0, 0.0, 0.0, 0.5)
    assert t["N0_frame"] == pytest.approx(7.0)
    assert t["Lambda"] == pytest.approx(2 * max(0.5, 0.5 * (math.ceil(1.5) - 1)))
    assert t["M0_atomic"] == pytest.approx(2 * (2 + 0.5 + 1) + t["Lambda"])
    with pytest.raises(ValueError):
        cr.alpha_thresholds(1, 1.0, 1.0, 1.0, 0.0, 0.0, 0.5)


def test_alpha_atomic_lambda_p_one():
    d, a, s0, mu0, eps = 2, 0.25, 0.5, 1.0, 0.5
    lam = cr.alpha_thresholds(d, a, 1.0, 0.5, s0, mu0, eps)["Lambda"]
    assert lam == pytest.approx(max(s0 + d * a, s0 + a * (math.ceil(mu0 + d + eps) - d)) / (1 - a))


def test_besov_thresholds_examples():
    t = cr.besov_thresholds(1, 1.0, 1.0, 0.0, 0.0, 0.0, 0.5)
    assert t["frame"]["theta"] == 3
    assert (t["frame"]["L_min"], t["frame"]["L1_min"], t["frame"]["L2_min"]) == (4, 4, 0)
    assert t["atomic"]["theta0"] == 0.0 and t["atomic"]["kappa"] == math.ceil(0 + 1 + 0.5)
    low = cr.besov_thresholds(1, 0.5, 0.5, 2.0, 2.0, 0.0, 0.5)["atomic"]
    assert low["theta0"] == 1.0 and low["L2_min"] < 0


# -- factorization ------------------------------------------------------------------------------------


def test_factorize_gaussian():
    g1, g2, rep = cr.factorize(GAUSS, 1.0, GridSpec(1, 1024, 16.0))
    assert rep.relative_error <= 1e-8 and rep.exponent == 1.5


def test_factorize_bracket_prototype_gives_flat_factor():
    grid = GridSpec(1, 1024, 16.0)
    c = (1 + 1 + 1.0) / 2
    gamma = PrototypeSpec.tabulated(SampledField.from_hat(grid, cr.bracket_power(grid.xi_points(), -c)))
    g1, g2, rep = cr.factorize(gamma, 1.0, grid)
    np.testing.assert_allclose(g1.hat, 1.0, atol=1e-10)
    assert rep.relative_error <= 1e-8


def test_factor_gamma2_decay_bounded():
    grid = GridSpec(1, 4096, 32.0)
    _, g2, _ = cr.factorize(GAUSS, 1.0, grid)
    x = np.abs(grid.x_axis)
    weighted = (1 + x) ** 2 * np.abs(g2.values)
    # the weighted profile stays bounded: no growth towards the box edge
    assert weighted[x > grid.L / 2].max() <= weighted[x <= grid.L / 2].max()


def test_factorize_rejects_slow_decay():
    grid = GridSpec(1, 512, 8.0)
    with pytest.raises(DecospaceError):
        cr.factorize(PrototypeSpec.tabulated(SampledField.delta(grid)), 0.5, grid)


# -- lattice series ----------------------------------------------------------------------------------


def test_lattice_series_d1():
    s = cr.lattice_series_bound(1)
    exact = 1 + 2 * (math.pi**2 / 6 - 1)
    assert s.partial <= exact <= s.upper
    assert s.tail <= 2 / 10_000
    assert exact - s.partial <= s.tail


@pytest.mark.parametrize("d", [2, 3])
def test_lattice_series_bounded(d):
    s = cr.lattice_series_bound(d, K=2000)
    assert s.upper <= 6**d
    # brute force over a box: partial sums from below
    K = 60 if d == 2 else 20
    pts = np.stack(np.meshgrid(*([np.arange(-K, K + 1)] * d), indexing="ij"), -1).reshape(-1, d)
    brute = np.sum((1.0 + np.abs(pts).max(axis=1)) ** -(d + 1.0))
    assert brute <= s.upper


def test_lattice_series_rejects_high_dimension():
    with pytest.raises(ValueError):
        cr.lattice_series_bound(4)


# -- end-to-end separation ----------------------------------------------------------------------------


def test_check_criteria_separates_shipped_configs():
    adm = quiet(cr.check_criteria, build_alpha_covering(1, 0.5, 1.25), 64.0, GAUSS)
    assert adm.verdict == "admissible" and math.isfinite(adm.C1) and math.isfinite(adm.C2) and adm.stability <= 1.05
    bad = quiet(cr.check_criteria, build_besov_covering(1), 64.0, GAUSS, s_range=(0.0, 1.0))
    assert bad.verdict == "inadmissible" and bad.stability >= 1.25
    assert set(bad.per_s) == {0.0, 1.0}


def test_pessimistic_delta0_is_tiny():
    val = cr.pessimistic_delta0(1, 0.0, 4.0, 1.0, 1.0, 1.0, 1.0, 10.0)
    assert 0 < val < 1e-20

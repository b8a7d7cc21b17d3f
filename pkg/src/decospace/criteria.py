"""Verifiable admissibility conditions: Schur-type matrices, operator bounds and parameter thresholds."""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import sympy
from scipy import special

from .covering import ModerateWeightSpec, StructuredCovering, TruncatedIndexSet, sub_truncation, truncate
from .errors import DecospaceError
from .grid import GridSpec, PrototypeSpec, SampledField, lp_of_samples


# --------------------------------------------------------------------------
# parameters
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CriteriaParams:
    """Integrability/weight parameters together with the derived Schur exponents."""

    d: int
    p: float = 1.0
    q: float = 1.0
    eps: float = 0.5
    mu: float = 0.0

    @property
    def K(self) -> float:
        return abs(self.mu)

    @property
    def r(self) -> float:
        return min(1.0, self.p)

    @property
    def N(self) -> int:
        return int(math.ceil(self.K + (self.d + self.eps) / self.r - 1e-12))

    @property
    def tau(self) -> float:
        return min(1.0, self.p, self.q)

    @property
    def sigma_frame(self) -> float:
        return self.tau * (self.d / self.r + self.K + self.N)

    @property
    def sigma_atomic(self) -> float:
        if self.p >= 1:
            return min(1.0, self.q) * math.ceil(self.K + self.d + self.eps - 1e-12)
        return min(self.p, self.q) * (self.d / self.p + self.K + math.ceil(self.K + (self.d + self.eps) / self.p - 1e-12))

    @property
    def theta(self) -> float:
        return max(0.0, 1.0 / self.p - 1.0)


# --------------------------------------------------------------------------
# derivative envelopes
# --------------------------------------------------------------------------


def multi_indices(d: int, order: int) -> list[tuple]:
    return [a for a in itertools.product(range(order + 1), repeat=d) if sum(a) <= order]


@lru_cache(maxsize=None)
def _bracket_power_fn(d: int, c: float, alpha: tuple):
    xs = sympy.symbols(f"x0:{d}", real=True)
    expr = (1 + sum(x**2 for x in xs)) ** sympy.nsimplify(c)
    for ax, k in enumerate(alpha):
        if k:
            expr = sympy.diff(expr, xs[ax], k)
    return sympy.lambdify(xs, expr, "numpy")


def bracket_power(xi: np.ndarray, c: float, alpha=None) -> np.ndarray:
    """``d^alpha {xi}^c`` with ``{xi} = 1 + |xi|^2``."""
    xi = np.asarray(xi, dtype=float)
    d = xi.shape[-1]
    alpha = tuple(alpha) if alpha is not None else (0,) * d
    fn = _bracket_power_fn(d, float(c), alpha)
    out = fn(*[xi[..., a] for a in range(d)])
    return np.broadcast_to(np.asarray(out, dtype=float), xi.shape[:-1]).copy()


class FactorPrototype:
    """``gamma_1`` of the factorization ``gamma = gamma_1 * gamma_2``: ``gamma_1^ = gamma^ {xi}^c``."""

    def __init__(self, base: PrototypeSpec, c: float):
        self.base = base
        self.c = float(c)
        self.d = base.d
        self.kind = "factor"

    def hat(self, xi, alpha=None) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        alpha = tuple(alpha) if alpha is not None else (0,) * self.d
        out = np.zeros(xi.shape[:-1], dtype=complex)
        for beta in itertools.product(*[range(a + 1) for a in alpha]):
            coef = math.prod(math.comb(a, b) for a, b in zip(alpha, beta))
            rest = tuple(a - b for a, b in zip(alpha, beta))
            out += coef * self.base.hat(xi, beta) * bracket_power(xi, self.c, rest)
        return out


def derivative_envelope(proto, zeta: np.ndarray, N: int, beta=None) -> np.ndarray:
    """``max_{|alpha| <= N} |d^alpha [(2 pi i zeta)^beta gamma^](zeta)|`` for ``|beta| <= 1``."""
    d = zeta.shape[-1]
    beta = tuple(beta) if beta is not None else (0,) * d
    cache: dict = {}

    def deriv(alpha):
        if alpha not in cache:
            cache[alpha] = proto.hat(zeta, alpha)
        return cache[alpha]

    best = np.zeros(zeta.shape[:-1])
    ell = next((ax for ax, b in enumerate(beta) if b), None)
    for alpha in multi_indices(d, N):
        if ell is None:
            val = deriv(alpha)
        else:
            # product rule for 2 pi i zeta_l * gamma^
            val = zeta[..., ell] * deriv(alpha)
            if alpha[ell]:
                lower = tuple(a - (ax == ell) for ax, a in enumerate(alpha))
                val = val + alpha[ell] * deriv(lower)
            val = 2.0 * np.pi * val
        np.maximum(best, np.abs(val), out=best)
    return best


# --------------------------------------------------------------------------
# Schur matrices
# --------------------------------------------------------------------------


@dataclass
class SchurMatrix:
    """Dense nonnegative matrix ``M[j, i]`` over a truncation (rows ``j``, columns ``i``)."""

    indices: list
    values: np.ndarray
    tag: str

    def restrict(self, indices) -> "SchurMatrix":
        pos = [self.indices.index(i) for i in indices]
        return SchurMatrix(list(indices), self.values[np.ix_(pos, pos)], self.tag)


def quadrature_nodes(cov: StructuredCovering, i, nodes: int) -> tuple[np.ndarray, float]:
    """Midpoint nodes of the base-set bounding box, masked to the base set, and the cell volume."""
    base = cov.base(i)
    R = base.outer
    d = cov.d
    t = -R + (np.arange(nodes) + 0.5) * (2 * R / nodes)
    pts = np.stack(np.meshgrid(*([t] * d), indexing="ij"), axis=-1).reshape(-1, d)
    return pts[base.contains(pts, closed=True)], (2 * R / nodes) ** d


def _integrals(cov, indices, proto_of, N, nodes, betas) -> np.ndarray:
    """``I[j, i] = max_beta int_{Q_i'} envelope_beta(S_j^{-1} S_i eta) d eta``."""
    n = len(indices)
    out = np.zeros((n, n))
    node_cache = {i: quadrature_nodes(cov, i, nodes) for i in indices}
    tiny = False
    for a, j in enumerate(indices):
        proto = proto_of(j)
        for b, i in enumerate(indices):
            eta, vol = node_cache[i]
            zeta = cov.to_normalized(j, cov.from_normalized(i, eta))
            best = 0.0
            for beta in betas:
                env = derivative_envelope(proto, zeta, N, beta)
                best = max(best, float(env.sum() * vol))
            if 0 < best < 1e-300:
                tiny = True
            out[a, b] = best
    if tiny:
        warnings.warn("Schur quadrature integrand underflows below 1e-300", RuntimeWarning)
    return out


def _proto_lookup(prototypes):
    if isinstance(prototypes, (PrototypeSpec, FactorPrototype)):
        return lambda i: prototypes
    if callable(prototypes):
        return prototypes
    return lambda i: prototypes[i]


def schur_matrix_frame(cov: StructuredCovering, idx, prototypes, params: CriteriaParams, w: ModerateWeightSpec | None = None, nodes: int = 64) -> SchurMatrix:
    """``M[j, i] = (w_j/w_i)^tau (1 + ||T_j^{-1} T_i||)^sigma max_beta (int ...)^tau``."""
    indices = list(idx)
    d = cov.d
    betas = [(0,) * d] + [tuple(int(a == ell) for a in range(d)) for ell in range(d)]
    integ = _integrals(cov, indices, _proto_lookup(prototypes), params.N, nodes, betas)
    return _assemble(cov, indices, integ, params, w, params.sigma_frame, 0.0, "frame")


def schur_matrix_atomic(cov: StructuredCovering, idx, prototypes_g1, params: CriteriaParams, w: ModerateWeightSpec | None = None, nodes: int = 64) -> SchurMatrix:
    """``N[i, j]`` stored as ``values[j, i]`` so that row/column conventions match the frame matrix."""
    indices = list(idx)
    integ = _integrals(cov, indices, _proto_lookup(prototypes_g1), params.N, nodes, [(0,) * cov.d])
    return _assemble(cov, indices, integ, params, w, params.sigma_atomic, params.theta, "atomic")


def _assemble(cov, indices, integ, params, w, sigma, theta, tag) -> SchurMatrix:
    w = w or ModerateWeightSpec()
    n = len(indices)
    vals = np.zeros((n, n))
    tau = params.tau
    for a, j in enumerate(indices):
        for b, i in enumerate(indices):
            dil = 1.0 + cov.scale(i) / cov.scale(j)
            if tag == "frame":
                pref = (w(j) / w(i)) ** tau
            else:
                pref = (w(i) / w(j) * (cov.det(j) / cov.det(i)) ** theta) ** tau
            vals[a, b] = pref * dil**sigma * integ[a, b] ** tau
    return SchurMatrix(indices, vals, tag)


@dataclass
class SchurSums:
    C1: float
    C2: float
    stability: float | None = None


def schur_sums(M: SchurMatrix, half: SchurMatrix | None = None) -> SchurSums:
    """``C1 = max_i sum_j M[j,i]``, ``C2 = max_j sum_i M[j,i]``; stability against a smaller truncation."""
    C1 = float(M.values.sum(axis=0).max(initial=0.0))
    C2 = float(M.values.sum(axis=1).max(initial=0.0))
    stab = None
    if half is not None:
        h = schur_sums(half)
        ratios = [a / b for a, b in ((C1, h.C1), (C2, h.C2)) if b > 0]
        stab = max(ratios) if ratios else 1.0
    return SchurSums(C1, C2, stab)


def schur_operator_bound(M, p: float) -> float:
    """Schur-test bound for the operator ``(Ac)_j = sum_i A[j,i] c_i`` on ``l^p``."""
    A = M.values if isinstance(M, SchurMatrix) else np.asarray(M, dtype=float)
    if not p > 0:
        raise ValueError("p must be positive")
    if math.isinf(p):
        return float(A.sum(axis=1).max(initial=0.0))
    if p <= 1:
        return float((A**p).sum(axis=0).max(initial=0.0) ** (1.0 / p))
    return max(float(A.sum(axis=0).max(initial=0.0)), float(A.sum(axis=1).max(initial=0.0)))


def power_norm_estimate(M, iterations: int = 200) -> float:
    A = M.values if isinstance(M, SchurMatrix) else np.asarray(M, dtype=float)
    return float(np.linalg.norm(A, 2))


# --------------------------------------------------------------------------
# thresholds
# --------------------------------------------------------------------------


def _ceil(x: float) -> int:
    return int(math.ceil(x - 1e-12))


def alpha_thresholds(d: int, alpha: float, p0: float, q0: float, s0: float, mu0: float, eps: float) -> dict:
    if not 0 <= alpha < 1:
        raise ValueError("alpha must lie in [0, 1)")
    m = min(p0, q0)
    k = 1.0 / (1.0 - alpha)
    N0 = d + 2 + (d + 1) / m + k * max(s0 + alpha * d, s0 + alpha * (d / p0 - d + mu0 + _ceil(mu0 + (d + eps) / p0)))
    if p0 >= 1:
        lam = k * max(s0 + d * alpha, s0 + alpha * (_ceil(mu0 + d + eps) - d))
    else:
        lam = k * (s0 + alpha * (mu0 + _ceil(mu0 + (d + eps) / p0)))
    M0 = (d + 1) * (2 + eps + 1.0 / m) + lam
    return {"N0_frame": N0, "M0_atomic": M0, "Lambda": lam}


def besov_thresholds(d: int, p0: float, q0: float, s0: float, s1: float, mu0: float, eps: float) -> dict:
    vt = d / p0 + mu0 + _ceil(mu0 + (d + eps) / p0)
    frame = {"L_min": 1 - s0 + vt, "L1_min": 1 - s0 + vt, "L2_min": s1, "theta": vt}
    if p0 >= 1:
        vt0, kappa = 0.0, _ceil(mu0 + d + eps)
    else:
        vt0, kappa = 1.0 / p0 - 1.0, d + mu0 + _ceil(mu0 + (d + eps) / p0)
    L_at = max(s1 + kappa + d + 1 + eps, 2 * d + 1 + 2 * eps)
    atomic = {"L_min": L_at, "L1_min": L_at, "L2_min": vt0 * d - s0, "theta0": vt0, "kappa": kappa}
    return {"frame": frame, "atomic": atomic}


# --------------------------------------------------------------------------
# factorization and series
# --------------------------------------------------------------------------


@dataclass
class FactorizationReport:
    exponent: float
    relative_error: float
    decay_ratio: float


def factorize(gamma: PrototypeSpec, eps: float, grid: GridSpec):
    """``gamma = gamma_1 * gamma_2`` with ``gamma_2^ = {xi}^{-(d+1+eps)/2}``."""
    d = grid.d
    c = (d + 1 + eps) / 2.0
    xi = grid.xi_points()
    ghat = gamma.hat(xi)
    bracket = bracket_power(xi, c)
    probe = np.abs(ghat) * bracket
    r = np.abs(xi).max(axis=-1)
    outer = r > 0.75 * grid.nyquist
    inner_max = float(probe[~outer].max(initial=0.0))
    outer_max = float(probe[outer].max(initial=0.0))
    ratio = outer_max / inner_max if inner_max > 0 else math.inf
    if ratio > 1.0 + 1e-9:
        raise DecospaceError(
            "prototype transform does not decay like (1+|xi|)^-(d+1+eps) on the grid", module="criteria", invariant="decay-probe"
        )
    g1 = SampledField.from_hat(grid, ghat * bracket)
    g2 = SampledField.from_hat(grid, 1.0 / bracket)
    direct = SampledField(grid, gamma.space(grid.x_points()))
    conv = SampledField.from_hat(grid, g1.hat * g2.hat)
    err = (direct - conv).l2_norm() / direct.l2_norm()
    return g1, g2, FactorizationReport(c, err, ratio)


@dataclass
class LatticeSeries:
    partial: float
    tail: float

    @property
    def upper(self) -> float:
        return self.partial + self.tail


def lattice_series_bound(d: int, K: int = 10_000) -> LatticeSeries:
    """``sum_{k in Z^d} (1 + ||k||_inf)^{-(d+1)}``: shells up to ``K`` plus a certified tail.

    Shell ``m`` has ``(2m+1)^d - (2m-1)^d <= d 2^d (1+m)^{d-1}`` points, so the
    tail beyond ``K`` is at most ``d 2^d / (1 + K)``.
    """
    if d > 3:
        raise ValueError("lattice series bound supports d <= 3")
    m = np.arange(1, K + 1, dtype=float)
    shells = (2 * m + 1) ** d - (2 * m - 1) ** d
    partial = 1.0 + float(np.sum(shells / (1 + m) ** (d + 1)))
    return LatticeSeries(partial, d * 2**d / (1.0 + K))


def sphere_measure(d: int) -> float:
    return 2.0 * math.pi ** (d / 2) / special.gamma(d / 2)


def pessimistic_delta0(d: int, K: float, R_Q: float, omega0: float, omega1: float, omega2: float, omega4: float, C_norm: float) -> float:
    """Explicit sufficient density from the constant chain (``p >= 1``); informational only."""
    log_inv = (
        math.log(2 * sphere_measure(d) / math.sqrt(d))
        + (K + d + 3) * math.log(2**17 * d**2 * (K + 2 + d))
        + (d + 1) * math.log(1 + R_Q)
        + 4 * K * math.log(omega0)
        + 4 * math.log(omega1)
        + math.log(max(omega2, 1e-300))
        + math.log(max(omega4, 1e-300))
        + math.log(max(C_norm, 1e-300))
    )
    return math.exp(-log_inv)


# --------------------------------------------------------------------------
# end-to-end admissibility check
# --------------------------------------------------------------------------


@dataclass
class CriteriaReport:
    C1: float
    C2: float
    stability: float
    verdict: str
    per_s: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    pessimistic_delta0: float | None = None


def check_criteria(
    cov: StructuredCovering,
    xi_max: float,
    prototypes,
    *,
    p0: float = 1.0,
    q0: float = 1.0,
    s_range: tuple = (0.0, 0.0),
    mu0: float = 0.0,
    eps: float = 0.5,
    nodes: int = 64,
    kind: str = "frame",
    threshold: float = 1.05,
) -> CriteriaReport:
    """Schur sums at truncation ``xi_max`` and their stability against ``xi_max / 2``.

    The weight is evaluated at both ends of the smoothness range and the worse
    stability is reported.
    """
    full = truncate(cov, xi_max)
    half = truncate(cov, xi_max / 2.0)
    params = CriteriaParams(cov.d, p0, q0, eps, mu0)
    per_s = {}
    worst = None
    for s in sorted(set(s_range)):
        w = ModerateWeightSpec.for_covering(cov, s)
        if kind == "frame":
            M = schur_matrix_frame(cov, full, prototypes, params, w, nodes)
        else:
            M = schur_matrix_atomic(cov, full, prototypes, params, w, nodes)
        sums = schur_sums(M, M.restrict(list(half)))
        per_s[s] = sums
        if worst is None or sums.stability > worst.stability:
            worst = sums
    verdict = "admissible" if worst.stability <= threshold else "inadmissible"
    info = {"p0": p0, "q0": q0, "s_range": list(s_range), "mu0": mu0, "eps": eps, "N": params.N, "tau": params.tau,
            "sigma": params.sigma_frame if kind == "frame" else params.sigma_atomic, "xi": xi_max, "nodes": nodes, "kind": kind}
    return CriteriaReport(worst.C1, worst.C2, worst.stability, verdict, per_s, info)

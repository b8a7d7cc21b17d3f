"""Smooth ramps, compactly supported cutoffs and partitions of unity subordinate to a covering."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np
from numpy.polynomial import Polynomial

from .covering import BaseSet, StructuredCovering, cluster_extension
from .errors import AliasingError, DecospaceError
from .grid import GridSpec, SampledField, WeightSpec, _smoothstep, weighted_lp_norm

RAMP_MAX_ORDER = 12


class RampPoly:
    """``p_N(x) = (1/C_N) int_0^x t^N (1-t)^N dt`` with exact rational coefficients."""

    def __init__(self, N: int):
        if not 1 <= N <= RAMP_MAX_ORDER:
            raise ValueError(f"ramp order must lie in [1, {RAMP_MAX_ORDER}], got {N}")
        self.N = N
        # integrate t^N (1-t)^N = sum_m C(N,m) (-1)^m t^{N+m}
        raw = {N + m + 1: Fraction((-1) ** m * math.comb(N, m), N + m + 1) for m in range(N + 1)}
        self.C_N = sum(raw.values(), Fraction(0))
        self.exact = {k: v / self.C_N for k, v in raw.items()}
        coef = [0.0] * (2 * N + 2)
        for k, v in self.exact.items():
            coef[k] = float(v)
        self.poly = Polynomial(coef)

    def __call__(self, x, deriv: int = 0) -> np.ndarray:
        """Evaluate ``p_N^{(deriv)}`` with the flat continuation (0 left of 0, 1 right of 1).

        The right half uses ``p_N(x) = 1 - p_N(1 - x)`` so values near 1 keep full precision.
        """
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        right = x > 0.5
        y = np.where(right, 1.0 - x, x)
        vals = self.poly.deriv(deriv)(y) if deriv else self.poly(y)
        if deriv == 0:
            return np.where(right, 1.0 - vals, vals)
        vals = np.where(right, -((-1.0) ** deriv) * vals, vals)
        return np.where((x > 0) & (x < 1), vals, 0.0)

    def derivative_bound(self) -> float:
        return 24.0 ** (self.N + 1) * math.factorial(self.N + 1)


def ramp_poly(N: int) -> RampPoly:
    return RampPoly(N)


class Cutoff:
    """Piecewise-ramp cutoff: 1 on ``[-R, R]^d``, supported in ``(-(R+s), R+s)^d``.

    The one-dimensional profile equals 1 for ``|t| <= R + s/3``, falls as
    ``p_N((3/s)(R + 2s/3 - |t|))`` and vanishes for ``|t| >= R + 2s/3``.
    ``profile`` selects a tensor product over axes or a radial profile.
    """

    def __init__(self, N: int, R: float, s: float, d: int = 1, profile: str = "tensor"):
        if not (R > 0 and s > 0):
            raise ValueError("cutoff requires R > 0 and s > 0")
        if profile not in ("tensor", "radial"):
            raise ValueError(f"unknown cutoff profile {profile!r}")
        if profile == "radial" and math.sqrt(d) * R > R + s / 3:
            raise ValueError("radial cutoff plateau R + s/3 must contain the cube [-R, R]^d (need sqrt(d) R <= R + s/3)")
        self.N, self.R, self.s, self.d, self.profile = N, float(R), float(s), d, profile
        self.ramp = RampPoly(N)

    def profile_1d(self, t, deriv: int = 0) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        a = 3.0 / self.s
        u = a * (self.R + 2.0 * self.s / 3.0 - np.abs(t))
        if deriv == 0:
            return self.ramp(u)
        return self.ramp(u, deriv) * (-a * np.sign(t)) ** deriv

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.profile == "radial":
            return self.profile_1d(np.sqrt(np.sum(x * x, axis=-1)))
        out = np.ones(x.shape[:-1])
        for ax in range(self.d):
            out = out * self.profile_1d(x[..., ax])
        return out

    def derivative_bound(self, order: int) -> float:
        return max(1.0, (3.0 / self.s) ** order) * self.ramp.derivative_bound()


def cutoff(N: int, R: float, s: float, d: int = 1, profile: str = "tensor") -> Cutoff:
    return Cutoff(N, R, s, d, profile)


# --------------------------------------------------------------------------
# bumps on base sets
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class BumpSpec:
    """Profile used to build ``u`` equal to 1 on the inner set and 0 off the base set.

    ``poly`` uses the ramp polynomial ``p_N`` (``C^N``); ``smooth`` uses a
    ``C^infinity`` exponential step.
    """

    kind: str = "poly"
    N: int = 6

    def __post_init__(self):
        if self.kind not in ("poly", "smooth"):
            raise ValueError(f"unknown bump kind {self.kind!r}")

    def step(self, t: np.ndarray) -> np.ndarray:
        """Monotone step: 0 for ``t <= 0``, 1 for ``t >= 1``."""
        if self.kind == "poly":
            return _ramp_cache(self.N)(t)
        return _smoothstep(np.clip(t, 0.0, 1.0))

    def on_base(self, base: BaseSet, inner: BaseSet, eta: np.ndarray) -> np.ndarray:
        """Bump in normalized coordinates ``eta`` (shape ``(..., d)``)."""
        eta = np.asarray(eta, dtype=float)
        if base.kind == "cube":
            out = np.ones(eta.shape[:-1])
            for ax in range(eta.shape[-1]):
                out = out * self.step((base.a - np.abs(eta[..., ax])) / (base.a - inner.a))
            return out
        r = np.sqrt(np.sum(eta * eta, axis=-1))
        if base.kind == "ball":
            return self.step((base.a - r) / (base.a - inner.a))
        lo = self.step((r - base.a) / (inner.a - base.a))
        hi = self.step((base.b - r) / (base.b - inner.b))
        return lo * hi


_RAMPS: dict[int, RampPoly] = {}


def _ramp_cache(N: int) -> RampPoly:
    if N not in _RAMPS:
        _RAMPS[N] = RampPoly(N)
    return _RAMPS[N]


# --------------------------------------------------------------------------
# partitions
# --------------------------------------------------------------------------


class Partition:
    """Normalized-sum partition ``phi_i = u_i / sum_l u_l`` over a truncation.

    ``u_i = u o S_i^{-1}`` with ``u`` the bump of the index's base set.  The
    denominator runs over the truncation extended by every covering set that
    meets one of its members, so each ``phi_i`` coincides with the profile of
    the untruncated partition.
    """

    def __init__(self, cov: StructuredCovering, idx, bump: BumpSpec = BumpSpec(), *, unit: bool = False):
        self.cov = cov
        self.idx = idx
        self.indices = list(idx)
        self.bump = bump
        self.unit = unit  # single-index partition with u = 1 everywhere
        self.extended = cluster_extension(cov, self.indices) if not unit else list(self.indices)
        self._grid_cache: dict = {}

    def u(self, i, xi: np.ndarray) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        if self.unit:
            return np.ones(xi.shape[:-1])
        eta = self.cov.to_normalized(i, xi)
        return self.bump.on_base(self.cov.base(i), self.cov.inner(i), eta)

    def denominator(self, xi: np.ndarray) -> np.ndarray:
        return sum(self.u(l, xi) for l in self.extended)

    def profile(self, i, xi: np.ndarray) -> np.ndarray:
        """Closed-form ``phi_i`` at arbitrary frequencies."""
        num = self.u(i, xi)
        den = self.denominator(xi)
        return np.divide(num, den, out=np.zeros_like(num), where=num > 0)

    def normalized_profile(self, i, eta: np.ndarray) -> np.ndarray:
        """``phi_i^natural = phi_i o S_i``."""
        return self.profile(i, self.cov.from_normalized(i, eta))

    # -- grid samples --------------------------------------------------------

    def _grid_data(self, grid: GridSpec):
        if grid not in self._grid_cache:
            xi = grid.xi_points()
            nums = {i: self.u(i, xi) for i in self.extended}
            den = sum(nums.values())
            covered = np.zeros(grid.shape, dtype=bool)
            for i in self.indices:
                covered |= self.cov.inner_region(i).contains(xi)
            if self.unit:
                covered[...] = True
            if np.any(den[covered] < 0.5):
                raise DecospaceError(
                    "partition denominator below 1/2 on a covered point", module="bapu", invariant="inner-family-covers"
                )
            phis = {}
            for i in self.indices:
                phis[i] = np.divide(nums[i], den, out=np.zeros(grid.shape), where=nums[i] > 0)
                phis[i].setflags(write=False)
            self._grid_cache[grid] = (phis, covered)
        return self._grid_cache[grid]

    def on_grid(self, i, grid: GridSpec) -> np.ndarray:
        """Frequency samples of ``phi_i`` in FFT order."""
        return self._grid_data(grid)[0][i]

    def covered_mask(self, grid: GridSpec) -> np.ndarray:
        """Grid frequencies covered by the inner family of the truncation."""
        return self._grid_data(grid)[1]

    def sum_on_grid(self, grid: GridSpec) -> np.ndarray:
        return sum(self.on_grid(i, grid) for i in self.indices)

    def cluster_sum(self, i, cl: dict, grid: GridSpec) -> np.ndarray:
        """``phi_{i*} = sum_{l in i*} phi_l``."""
        return sum(self.on_grid(l, grid) for l in cl[i])


def build_partition(cov: StructuredCovering, idx, bump: BumpSpec = BumpSpec(), grid: GridSpec | None = None) -> Partition:
    part = Partition(cov, idx, bump)
    if grid is not None:
        part._grid_data(grid)
    return part


def band_guard(cov: StructuredCovering, i, grid: GridSpec, what: str = "covering set") -> None:
    if cov.region(i).sup_norm_extent() > grid.trusted + 1e-12:
        raise AliasingError(f"{what} {i!r} exits the trusted band of the grid", module="bapu", invariant="trusted-band")


def bapu_constant(part: Partition, p: float, v0: WeightSpec, grid: GridSpec) -> tuple[float, dict]:
    """``sup_i |det T_i|^{max(1/p,1)-1} ||F^{-1} phi_i||_{L^{min(1,p)}_{v0}}`` and per-index values."""
    per = {}
    r = min(1.0, p)
    expo = max(1.0 / p, 1.0) - 1.0
    for i in part.indices:
        band_guard(part.cov, i, grid)
        piece = SampledField.from_hat(grid, part.on_grid(i, grid))
        per[i] = part.cov.det(i) ** expo * weighted_lp_norm(piece, r, v0)
    return max(per.values(), default=0.0), per


def partition_derivative_sups(part: Partition, order: int, *, n: int | None = None, pad: float = 1.25) -> dict:
    """``C^(alpha) = sup_i sup |d^alpha phi_i^natural|`` for every ``|alpha| <= order``.

    Each normalized profile is sampled on a periodic box around its base set
    and differentiated spectrally.
    """
    d = part.cov.d
    if n is None:
        n = 4096 if d == 1 else 512
    table: dict = {}
    for i in part.indices:
        for alpha, val in normalized_derivative_sups(part, i, order, n=n, pad=pad).items():
            table[alpha] = max(table.get(alpha, 0.0), val)
    return table


def normalized_derivative_sups(part: Partition, i, order: int, *, n: int = 4096, pad: float = 1.25, oversample: int = 2) -> dict:
    """Sup of each ``|d^alpha phi_i^natural|``.

    Derivatives are spectral. The sup is located on a trigonometric
    interpolant ``oversample`` times finer than the sampling grid and then
    refined by exact evaluation of the interpolant around the maximizer.
    """
    d = part.cov.d
    halfwidth = pad * part.cov.base(i).outer
    box = GridSpec(d, n, halfwidth)
    vals = part.normalized_profile(i, box.x_points())
    spec = np.fft.fftn(vals)
    m = n * oversample
    freqs = np.fft.fftfreq(n, d=box.h)
    k = [2j * np.pi * freqs.reshape([-1 if a == ax else 1 for a in range(d)]) for ax in range(d)]
    out = {}
    for alpha in _multi_indices(d, order):
        if not any(alpha):
            out[alpha] = float(np.abs(vals).max())
            continue
        mult = np.ones(box.shape, dtype=complex)
        for ax, a in enumerate(alpha):
            mult = mult * k[ax] ** a
        coef = spec * mult
        fine = np.abs(np.fft.ifftn(_zero_pad(coef, m))) * (m / n) ** d
        peak = np.unravel_index(int(np.argmax(fine)), fine.shape)
        step = 2 * halfwidth / m
        centre = [-halfwidth + p * step for p in peak]
        local = _evaluate_trig(coef / n**d, freqs, [c + np.linspace(-step, step, 33) + halfwidth for c in centre])
        out[alpha] = float(max(fine.max(), np.abs(local).max()))
    return out


def _evaluate_trig(coef: np.ndarray, freqs: np.ndarray, axes: list[np.ndarray]) -> np.ndarray:
    """Evaluate ``sum_k coef_k exp(2 pi i k.x)`` on the tensor grid ``axes`` (box-relative coordinates)."""
    out = coef
    for ax, pts in enumerate(axes):
        E = np.exp(2j * np.pi * np.outer(pts, freqs))
        out = np.moveaxis(np.tensordot(E, out, axes=([1], [ax])), 0, ax)
    return out


def _zero_pad(spec: np.ndarray, m: int) -> np.ndarray:
    """Embed an FFT-ordered spectrum into a larger one of side ``m``; the Nyquist row is split evenly."""
    n = spec.shape[0]
    out = spec
    for ax in range(spec.ndim):
        shape = list(out.shape)
        shape[ax] = m
        big = np.zeros(shape, dtype=complex)
        src = [slice(None)] * out.ndim
        dst = [slice(None)] * out.ndim
        src[ax] = dst[ax] = slice(0, n // 2)
        big[tuple(dst)] = out[tuple(src)]
        src[ax], dst[ax] = slice(n // 2 + 1, n), slice(m - n // 2 + 1, m)
        big[tuple(dst)] = out[tuple(src)]
        src[ax] = n // 2
        half = out[tuple(src)] / 2
        for pos in (n // 2, m - n // 2):
            dst[ax] = pos
            big[tuple(dst)] = half
        out = big
    return out


def _multi_indices(d: int, order: int):
    import itertools

    return [a for a in itertools.product(range(order + 1), repeat=d) if sum(a) <= order]

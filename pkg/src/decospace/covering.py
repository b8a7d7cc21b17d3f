"""Structured frequency coverings ``Q_i = T_i Q' + b_i`` and their admissibility data.

Three families are supported: the inhomogeneous dyadic (Besov) covering, the
alpha-modulation covering and the uniform covering by balls around integer
points.  All dilations are scalar multiples of the identity, so every covering
set is a ball, an origin-centered annulus or a cube, and intersections are
decided in closed form.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Hashable, Iterator

import numpy as np

from .grid import GridSpec

log = logging.getLogger(__name__)

Index = Hashable


@dataclass(frozen=True)
class BaseSet:
    """Open reference set: ``ball(r)``, ``annulus(a, b)`` or ``cube(c)``, centered at the origin."""

    kind: str
    a: float
    b: float = 0.0

    def __post_init__(self):
        if self.kind == "ball" or self.kind == "cube":
            if not self.a > 0:
                raise ValueError(f"{self.kind} size must be positive")
        elif self.kind == "annulus":
            if not 0 < self.a < self.b:
                raise ValueError("annulus requires 0 < a < b")
        else:
            raise ValueError(f"unknown base set kind {self.kind!r}")

    @classmethod
    def ball(cls, r: float) -> "BaseSet":
        return cls("ball", float(r))

    @classmethod
    def annulus(cls, a: float, b: float) -> "BaseSet":
        return cls("annulus", float(a), float(b))

    @classmethod
    def cube(cls, c: float) -> "BaseSet":
        return cls("cube", float(c))

    @property
    def outer(self) -> float:
        """Radius of the enclosing ball / cube in the set's own geometry."""
        return self.b if self.kind == "annulus" else self.a

    def bounding_radius(self, d: int) -> float:
        return self.a * math.sqrt(d) if self.kind == "cube" else self.outer

    def contains(self, eta, closed: bool = False) -> np.ndarray:
        eta = np.asarray(eta, dtype=float)
        lt = np.less_equal if closed else np.less
        if self.kind == "cube":
            return lt(np.abs(eta).max(axis=-1), self.a)
        r = np.sqrt(np.sum(eta * eta, axis=-1))
        if self.kind == "ball":
            return lt(r, self.a)
        return lt(self.a, r) & lt(r, self.b)

    def scaled(self, t: float) -> "BaseSet":
        return BaseSet(self.kind, self.a * t, self.b * t)


@dataclass(frozen=True)
class Region:
    """Affine image ``t * base + center`` of a base set (scalar dilation)."""

    base: BaseSet
    center: tuple

    @property
    def c(self) -> np.ndarray:
        return np.asarray(self.center, dtype=float)

    def contains(self, xi, closed: bool = False) -> np.ndarray:
        return self.base.contains(np.asarray(xi, dtype=float) - self.c, closed)

    def sup_norm_extent(self) -> float:
        """``max |xi|_inf`` over the closure."""
        return float(np.abs(self.c).max(initial=0.0)) + self.base.outer

    def _radial_range(self, point: np.ndarray) -> tuple[float, float]:
        dist = float(np.linalg.norm(point - self.c))
        lo = max(0.0, dist - self.base.outer)
        return lo, dist + self.base.outer

    def meets(self, other: "Region") -> bool:
        """Whether the two open sets intersect."""
        k1, k2 = self.base.kind, other.base.kind
        if k1 == "cube" or k2 == "cube":
            return _meets_with_cube(self, other)
        if k1 == "ball" and k2 == "ball":
            return float(np.linalg.norm(self.c - other.c)) < self.base.a + other.base.a
        if k1 == "annulus" and k2 == "annulus":
            if np.linalg.norm(self.c - other.c) > 0:
                raise NotImplementedError("annuli with distinct centers")
            return self.base.a < other.base.b and other.base.a < self.base.b
        ball, ann = (self, other) if k1 == "ball" else (other, self)
        dist = float(np.linalg.norm(ball.c - ann.c))
        rho = ball.base.a
        # distances to the annulus center attained by the open ball
        return max(0.0, dist - rho) < ann.base.b and dist + rho > ann.base.a

    def meets_box(self, xi_max: float) -> bool:
        """Whether the closure meets the closed box ``[-xi_max, xi_max]^d``."""
        c = self.c
        nearest = np.clip(c, -xi_max, xi_max)
        if self.base.kind == "cube":
            return bool(np.all(np.abs(c) - self.base.a <= xi_max))
        lo = float(np.linalg.norm(c - nearest))
        if self.base.kind == "ball":
            return lo <= self.base.a
        far = np.where(c >= 0, -xi_max, xi_max)
        hi = float(np.linalg.norm(c - far))
        return lo <= self.base.b and hi >= self.base.a


def _meets_with_cube(r1: Region, r2: Region) -> bool:
    if r1.base.kind == "cube" and r2.base.kind == "cube":
        return bool(np.all(np.abs(r1.c - r2.c) < r1.base.a + r2.base.a))
    cube, other = (r1, r2) if r1.base.kind == "cube" else (r2, r1)
    if other.base.kind != "ball":
        raise NotImplementedError("cube-annulus intersection")
    gap = np.maximum(np.abs(other.c - cube.c) - cube.base.a, 0.0)
    return float(np.linalg.norm(gap)) < other.base.a


@dataclass(frozen=True)
class StructuredCovering:
    """Covering ``Q_i = T_i Q' + b_i`` with scalar dilations ``T_i = t_i * id``.

    ``kind`` is ``besov`` (indices ``j >= 0``), ``alpha`` or ``uniform``
    (indices are integer tuples ``k``).
    """

    kind: str
    d: int
    alpha: float = 0.0
    r: float = 1.0

    def __post_init__(self):
        if self.kind not in ("besov", "alpha", "uniform"):
            raise ValueError(f"unknown covering kind {self.kind!r}")
        if self.kind != "besov" and not self.r > 0:
            raise ValueError("covering radius must be positive")
        if not 0 <= self.alpha < 1:
            raise ValueError(f"alpha must lie in [0, 1), got {self.alpha}")

    @property
    def alpha0(self) -> float:
        return self.alpha / (1.0 - self.alpha)

    # -- per-index geometry ------------------------------------------------

    def scale(self, i: Index) -> float:
        if self.kind == "besov":
            return 2.0**i
        if self.kind == "uniform":
            return 1.0
        nk = math.sqrt(sum(x * x for x in i))
        return nk**self.alpha0

    def T(self, i: Index) -> np.ndarray:
        return self.scale(i) * np.eye(self.d)

    def b(self, i: Index) -> np.ndarray:
        if self.kind == "besov":
            return np.zeros(self.d)
        return self.scale(i) * np.asarray(i, dtype=float)

    def det(self, i: Index) -> float:
        return self.scale(i) ** self.d

    def base(self, i: Index) -> BaseSet:
        if self.kind == "besov":
            return BaseSet.ball(2.0) if i == 0 else BaseSet.annulus(0.25, 4.0)
        return BaseSet.ball(self.r)

    def inner(self, i: Index) -> BaseSet:
        if self.kind == "besov":
            return BaseSet.ball(1.8) if i == 0 else BaseSet.annulus(0.3, 3.7)
        return BaseSet.ball(0.95 * self.r)

    def region(self, i: Index) -> Region:
        return Region(self.base(i).scaled(self.scale(i)), tuple(self.b(i)))

    def inner_region(self, i: Index) -> Region:
        return Region(self.inner(i).scaled(self.scale(i)), tuple(self.b(i)))

    def to_normalized(self, i: Index, xi: np.ndarray) -> np.ndarray:
        """``S_i^{-1} xi = T_i^{-1}(xi - b_i)``."""
        return (np.asarray(xi, dtype=float) - self.b(i)) / self.scale(i)

    def from_normalized(self, i: Index, eta: np.ndarray) -> np.ndarray:
        return self.scale(i) * np.asarray(eta, dtype=float) + self.b(i)

    # -- enumeration -------------------------------------------------------

    def _candidates(self, xi_max: float) -> Iterator[Index]:
        if self.kind == "besov":
            reach = xi_max * math.sqrt(self.d)
            yield 0
            j = 1
            while 2.0**j * 0.25 <= reach:
                yield j
                j += 1
            return
        r = self.r
        kmax = 0
        # |k|_inf^{alpha0} (|k|_inf - r) <= xi_max is necessary for Q_k to meet the box
        while (kmax + 1) ** self.alpha0 * (kmax + 1 - r) <= xi_max:
            kmax += 1
        for k in itertools.product(range(-kmax, kmax + 1), repeat=self.d):
            if self.kind == "alpha" and self.alpha > 0 and not any(k):
                continue
            yield k


def build_besov_covering(d: int) -> StructuredCovering:
    return StructuredCovering("besov", d)


def build_alpha_covering(d: int, alpha: float, r: float) -> StructuredCovering:
    if alpha >= 1:
        raise ValueError("alpha must be < 1")
    return StructuredCovering("alpha", d, float(alpha), float(r))


def build_uniform_covering(d: int, r: float) -> StructuredCovering:
    return StructuredCovering("uniform", d, 0.0, float(r))


@dataclass(frozen=True)
class TruncatedIndexSet:
    indices: tuple
    xi: float

    def __iter__(self):
        return iter(self.indices)

    def __len__(self) -> int:
        return len(self.indices)

    def __contains__(self, i) -> bool:
        return i in self.indices


def truncate(cov: StructuredCovering, xi_max: float) -> TruncatedIndexSet:
    """Indices whose (closed) covering set meets ``[-xi_max, xi_max]^d``."""
    if not xi_max > 0:
        raise ValueError("truncation half-width must be positive")
    idx = tuple(i for i in cov._candidates(xi_max) if cov.region(i).meets_box(xi_max))
    if not idx:
        log.warning("truncation at %g contains no covering sets", xi_max)
    return TruncatedIndexSet(idx, float(xi_max))


def sub_truncation(idx: TruncatedIndexSet, indices) -> TruncatedIndexSet:
    keep = set(indices)
    return TruncatedIndexSet(tuple(i for i in idx if i in keep), idx.xi)


def clusters(cov: StructuredCovering, idx) -> dict:
    """``i* = {l in idx : Q_l meets Q_i}``, as ordered lists."""
    indices = list(idx)
    regions = {i: cov.region(i) for i in indices}
    if cov.kind != "besov":
        return _ball_clusters(indices, regions)
    return {i: [l for l in indices if regions[i].meets(regions[l])] for i in indices}


def _ball_clusters(indices, regions) -> dict:
    centers = np.array([regions[i].c for i in indices])
    radii = np.array([regions[i].base.a for i in indices])
    dist = np.linalg.norm(centers[:, None, :] - centers[None, :, :], axis=-1)
    adj = dist < radii[:, None] + radii[None, :]
    return {i: [indices[m] for m in np.flatnonzero(adj[n])] for n, i in enumerate(indices)}


def cluster_extension(cov: StructuredCovering, idx) -> list:
    """``idx`` together with every covering index whose set meets some ``Q_i``, ``i in idx``."""
    indices = list(idx)
    if not indices:
        return []
    reach = max(cov.region(i).sup_norm_extent() for i in indices)
    wide = truncate(cov, reach)
    regions = {i: cov.region(i) for i in indices}
    extra = []
    have = set(indices)
    for l in wide:
        if l in have:
            continue
        rl = cov.region(l)
        if any(rl.meets(regions[i]) for i in indices):
            extra.append(l)
    return indices + extra


@dataclass(frozen=True)
class AdmissibilityConstants:
    N_Q: int
    R_Q: float
    C_Q: float


def admissibility_constants(cov: StructuredCovering, idx, cl: dict | None = None) -> AdmissibilityConstants:
    cl = clusters(cov, idx) if cl is None else cl
    n_q = max((len(v) for v in cl.values()), default=0)
    r_q = max(cov.base(i).bounding_radius(cov.d) for i in idx) if len(idx) else 0.0
    # scalar dilations: ||T_i^{-1} T_l|| = t_l / t_i
    c_q = max((cov.scale(l) / cov.scale(i) for i, nb in cl.items() for l in nb), default=1.0)
    return AdmissibilityConstants(n_q, r_q, c_q)


@dataclass(frozen=True)
class ModerateWeightSpec:
    """Frequency weight ``w_i``: ``alpha_power(s)`` ``<k>^{s/(1-alpha)}``, ``dyadic(s)`` ``2^{js}`` or ``one``."""

    kind: str = "one"
    s: float = 0.0
    alpha: float = 0.0

    def __post_init__(self):
        if self.kind not in ("one", "alpha_power", "dyadic"):
            raise ValueError(f"unknown moderate weight kind {self.kind!r}")

    @classmethod
    def for_covering(cls, cov: StructuredCovering, s: float) -> "ModerateWeightSpec":
        if cov.kind == "besov":
            return cls("dyadic", float(s))
        return cls("alpha_power", float(s), cov.alpha)

    def __call__(self, i: Index) -> float:
        if self.kind == "one":
            return 1.0
        if self.kind == "dyadic":
            return 2.0 ** (i * self.s)
        bracket = math.sqrt(1.0 + sum(x * x for x in i))
        return bracket ** (self.s / (1.0 - self.alpha))

    def ratio(self, i: Index, l: Index) -> float:
        """``w_i / w_l``; exact in the index difference for dyadic weights."""
        if self.kind == "dyadic":
            return 2.0 ** ((i - l) * self.s)
        return self(i) / self(l)


def weight_moderateness(cov: StructuredCovering, w: ModerateWeightSpec, idx, cl: dict | None = None) -> float:
    cl = clusters(cov, idx) if cl is None else cl
    return max((w.ratio(i, l) for i, nb in cl.items() for l in nb), default=1.0)


@dataclass
class CoveringReport:
    covered: bool
    inner_covered: bool
    uncovered: list = field(default_factory=list)
    checked: int = 0


def covering_check(cov: StructuredCovering, idx, grid: GridSpec, fraction: float = 0.75) -> CoveringReport:
    """Check that every trusted-band frequency point lies in some ``Q_i`` and some inner set."""
    if idx.xi + 1e-12 < fraction * grid.nyquist:
        raise ValueError("truncation does not reach the trusted band of the grid")
    pts = grid.xi_points()[grid.trusted_mask(fraction)]
    hit = np.zeros(len(pts), dtype=bool)
    hit_inner = np.zeros(len(pts), dtype=bool)
    for i in idx:
        hit |= cov.region(i).contains(pts)
        hit_inner |= cov.inner_region(i).contains(pts)
    miss = ~(hit & hit_inner)
    bad = [tuple(float(v) for v in p) for p in pts[miss][:10]]
    return CoveringReport(bool(hit.all()), bool(hit_inner.all()), bad, len(pts))

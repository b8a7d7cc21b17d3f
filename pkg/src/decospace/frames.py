"""Structured frame systems: analysis, synthesis and the three reconstruction pipelines.

For an index ``i`` the sampling lattice is ``x_k = delta * T_i^{-T} k``.  Since
all dilations are scalar, ``x_k = s_i k`` with step ``s_i = delta / t_i`` and the
lattice is a tensor product of one-dimensional lattices.  When ``2L / s_i`` is an
integer the lattice is periodic on the torus and all exponential sums reduce to
FFTs; otherwise the points inside ``[-L + 4h, L - 4h)`` are kept and sums are
evaluated directly.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Mapping

import numpy as np
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from .bapu import BumpSpec, Partition
from .covering import BaseSet, ModerateWeightSpec, StructuredCovering
from .errors import AliasingError, DecospaceError, LatticeOverflowError, MemoryBudgetError, NoContractionError
from .grid import ONE, GridSpec, PrototypeSpec, SampledField, WeightSpec, dilated_hat, lp_of_samples, random_bandlimited

LATTICE_CAP = 1 << 22
MEMORY_BUDGET = 1 << 28  # complex entries held by tuple iterations
_DIRECT_CHUNK = 1 << 22


# --------------------------------------------------------------------------
# lattices
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Lattice:
    """One-dimensional factor ``s * k`` for ``k = k0, ..., k0 + count - 1`` (repeated on every axis)."""

    step: float
    k0: int
    count: int
    periodic: bool
    d: int

    @property
    def k(self) -> np.ndarray:
        return np.arange(self.k0, self.k0 + self.count)

    @property
    def coords(self) -> np.ndarray:
        return self.step * self.k

    @property
    def shape(self) -> tuple:
        return (self.count,) * self.d

    def points(self) -> np.ndarray:
        grids = np.meshgrid(*([self.coords] * self.d), indexing="ij")
        return np.stack(grids, axis=-1)


def make_lattice(spec: GridSpec, step: float, *, cap: int = LATTICE_CAP, force_direct: bool = False) -> Lattice:
    ratio = 2.0 * spec.L / step
    n_per = int(round(ratio))
    if abs(ratio - n_per) < 1e-9 * max(1.0, ratio) and not force_direct:
        k0 = int(math.ceil(-spec.L / step - 1e-9))
        lat = Lattice(step, k0, n_per, True, spec.d)
    else:
        margin = 4 * spec.h
        k0 = int(math.ceil((-spec.L + margin) / step - 1e-9))
        k1 = int(math.ceil((spec.L - margin) / step - 1e-9))
        lat = Lattice(step, k0, max(0, k1 - k0), False, spec.d)
    if lat.count**spec.d > cap:
        raise LatticeOverflowError(
            f"lattice with {lat.count}^{spec.d} points exceeds the cap {cap}", module="frames", invariant="lattice-cap"
        )
    return lat


def _apply_axes(arr: np.ndarray, func, d: int) -> np.ndarray:
    for ax in range(d):
        arr = np.moveaxis(func(np.moveaxis(arr, ax, -1)), -1, ax)
    return arr


def lattice_eval(spec: GridSpec, lat: Lattice, ghat: np.ndarray) -> np.ndarray:
    """Values ``g(x_k)`` of the band-limited grid field with spectrum ``ghat``."""
    m = spec.m_axis
    if lat.periodic:
        N = lat.count
        fold_idx = np.mod(m, N)
        take_idx = np.mod(lat.k, N)

        def fn(a):
            folded = np.zeros(a.shape[:-1] + (N,), dtype=complex)
            np.add.at(folded, (slice(None),) * (a.ndim - 1) + (fold_idx,), a)
            return (N * np.fft.ifft(folded, axis=-1))[..., take_idx]

        out = _apply_axes(np.asarray(ghat, dtype=complex), fn, spec.d)
    else:
        out = _apply_axes(np.asarray(ghat, dtype=complex), lambda a: _direct(a, lat.coords, spec.xi_axis, +1), spec.d)
    return out / (2.0 * spec.L) ** spec.d


def lattice_sum(spec: GridSpec, lat: Lattice, c: np.ndarray) -> np.ndarray:
    """Grid spectrum of ``sum_k c_k delta_{x_k}``, i.e. ``sum_k c_k e^{-2 pi i x_k xi_m}``."""
    m = spec.m_axis
    if lat.periodic:
        N = lat.count
        place = np.mod(lat.k, N)
        take = np.mod(m, N)

        def fn(a):
            arranged = np.zeros(a.shape[:-1] + (N,), dtype=complex)
            arranged[..., place] = a
            return np.fft.fft(arranged, axis=-1)[..., take]

        return _apply_axes(np.asarray(c, dtype=complex), fn, spec.d)

    def fn_direct(a):
        return _direct(a, spec.xi_axis, lat.coords, -1)

    return _apply_axes(np.asarray(c, dtype=complex), fn_direct, spec.d)


def _direct(a: np.ndarray, out_pts: np.ndarray, in_pts: np.ndarray, sign: int) -> np.ndarray:
    """``out[..., r] = sum_c a[..., c] e^{sign 2 pi i out_pts[r] in_pts[c]}`` by blocks."""
    res = np.empty(a.shape[:-1] + (len(out_pts),), dtype=complex)
    step = max(1, _DIRECT_CHUNK // max(1, len(in_pts)))
    for s in range(0, len(out_pts), step):
        E = np.exp(sign * 2j * np.pi * np.outer(out_pts[s : s + step], in_pts))
        res[..., s : s + step] = a @ E.T
    return res


# --------------------------------------------------------------------------
# coefficients
# --------------------------------------------------------------------------


class CoefficientArray:
    """Coefficients ``c_k^(i)`` stored per index as arrays over the retained lattice."""

    def __init__(self, delta: float, data: Mapping, lattices: Mapping):
        self.delta = float(delta)
        self.data = {i: np.asarray(v, dtype=complex) for i, v in data.items()}
        self.lattices = dict(lattices)

    @classmethod
    def zeros(cls, system: "FrameSystem") -> "CoefficientArray":
        lats = {i: system.lattice(i) for i in system.indices}
        return cls(system.delta, {i: np.zeros(l.shape, dtype=complex) for i, l in lats.items()}, lats)

    @classmethod
    def random(cls, system: "FrameSystem", rng: np.random.Generator) -> "CoefficientArray":
        lats = {i: system.lattice(i) for i in system.indices}
        data = {i: rng.standard_normal(l.shape) + 1j * rng.standard_normal(l.shape) for i, l in lats.items()}
        return cls(system.delta, data, lats)

    def _combine(self, other, op):
        return CoefficientArray(self.delta, {i: op(v, other.data[i]) for i, v in self.data.items()}, self.lattices)

    def __add__(self, other):
        return self._combine(other, np.add)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, c):
        return CoefficientArray(self.delta, {i: c * v for i, v in self.data.items()}, self.lattices)

    __rmul__ = __mul__

    def pairing(self, other: "CoefficientArray") -> complex:
        """Flat complex pairing ``sum c conj(c')``."""
        return complex(sum(np.sum(v * np.conj(other.data[i])) for i, v in self.data.items()))

    def l2(self) -> float:
        return math.sqrt(sum(float(np.sum(np.abs(v) ** 2)) for v in self.data.values()))

    def size(self) -> int:
        return sum(v.size for v in self.data.values())

    # -- serialization -------------------------------------------------------

    def to_bytes(self) -> bytes:
        out = [b"DSCF", struct.pack("<dI", self.delta, len(self.data))]
        for i, arr in self.data.items():
            comps = (i,) if isinstance(i, (int, np.integer)) else tuple(i)
            lat = self.lattices[i]
            out.append(struct.pack("<I", len(comps)) + struct.pack(f"<{len(comps)}i", *comps))
            out.append(struct.pack("<IIiIdI", 1 if isinstance(i, (int, np.integer)) else 0, lat.d, lat.k0, lat.count, lat.step, int(lat.periodic)))
            out.append(np.ascontiguousarray(arr, dtype="<c16").tobytes())
        return b"".join(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> "CoefficientArray":
        if data[:4] != b"DSCF":
            raise DecospaceError("not a DSCF coefficient container", module="frames")
        delta, count = struct.unpack("<dI", data[4:16])
        pos = 16
        coeffs, lats = {}, {}
        for _ in range(count):
            (nc,) = struct.unpack("<I", data[pos : pos + 4])
            pos += 4
            comps = struct.unpack(f"<{nc}i", data[pos : pos + 4 * nc])
            pos += 4 * nc
            scalar, d, k0, cnt, step, periodic = struct.unpack("<IIiIdI", data[pos : pos + 28])
            pos += 28
            i = comps[0] if scalar else tuple(comps)
            lat = Lattice(step, k0, cnt, bool(periodic), d)
            size = cnt**d
            arr = np.frombuffer(data[pos : pos + 16 * size], dtype="<c16").reshape(lat.shape)
            pos += 16 * size
            coeffs[i], lats[i] = arr.copy(), lat
        return cls(delta, coeffs, lats)

    def to_csv(self) -> str:
        rows = []
        d = next(iter(self.lattices.values())).d if self.lattices else 1
        rows.append("i," + ",".join(f"k{a + 1}" for a in range(d)) + ",re,im")
        for i, arr in self.data.items():
            lat = self.lattices[i]
            tag = str(i) if isinstance(i, (int, np.integer)) else ":".join(str(x) for x in i)
            for pos, val in np.ndenumerate(arr):
                ks = ",".join(str(lat.k0 + p) for p in pos)
                rows.append(f"{tag},{ks},{val.real!r},{val.imag!r}")
        return "\n".join(rows) + "\n"


# --------------------------------------------------------------------------
# frame systems
# --------------------------------------------------------------------------


class FrameSystem:
    """Prototype family over a truncated covering, sampled with density ``delta``.

    ``prototypes`` is a single :class:`PrototypeSpec`, a mapping index -> prototype
    or a callable.  ``gamma^(i)`` uses the l1 normalization and ``gamma^[i]``
    the l2 one.
    """

    def __init__(
        self,
        cov: StructuredCovering,
        idx,
        prototypes,
        delta: float,
        grid: GridSpec,
        *,
        lattice_cap: int = LATTICE_CAP,
        force_direct: bool = False,
    ):
        if not 0 < delta <= 1:
            raise ValueError(f"delta must lie in (0, 1], got {delta}")
        self.cov = cov
        self.idx = idx
        self.indices = list(idx)
        self._protos = prototypes
        self.delta = float(delta)
        self.grid = grid
        self.lattice_cap = lattice_cap
        self.force_direct = force_direct
        self._hat_cache: dict = {}
        self._lat_cache: dict = {}

    def with_delta(self, delta: float) -> "FrameSystem":
        return FrameSystem(self.cov, self.idx, self._protos, delta, self.grid, lattice_cap=self.lattice_cap, force_direct=self.force_direct)

    def prototype(self, i) -> PrototypeSpec:
        p = self._protos
        if isinstance(p, PrototypeSpec):
            return p
        if callable(p) and not isinstance(p, Mapping):
            return p(i)
        return p[i]

    def gamma_hat(self, i) -> np.ndarray:
        """Grid samples of ``F[gamma^(i)]``."""
        if i not in self._hat_cache:
            h = dilated_hat(self.prototype(i), self.cov.T(i), self.cov.b(i), self.grid.xi_points(), "l1")
            h.setflags(write=False)
            self._hat_cache[i] = h
        return self._hat_cache[i]

    def gamma_hat_l2(self, i) -> np.ndarray:
        return self.gamma_hat(i) / math.sqrt(self.cov.det(i))

    def step(self, i) -> float:
        return self.delta / self.cov.scale(i)

    def lattice(self, i) -> Lattice:
        if i not in self._lat_cache:
            self._lat_cache[i] = make_lattice(self.grid, self.step(i), cap=self.lattice_cap, force_direct=self.force_direct)
        return self._lat_cache[i]

    def lattice_tail_report(self) -> dict:
        """Per-index largest atom value at the truncation margin (0 for periodic lattices)."""
        out = {}
        for i in self.indices:
            lat = self.lattice(i)
            if lat.periodic:
                out[i] = 0.0
                continue
            atom = SampledField.from_hat(self.grid, self.gamma_hat_l2(i)).values
            x = self.grid.x_points()
            edge = np.abs(x).max(axis=-1) >= self.grid.L - 4 * self.grid.h
            out[i] = float(np.abs(atom[edge]).max(initial=0.0) / max(np.abs(atom).max(), 1e-300))
        return out


def _require_band(f: SampledField, what: str = "field") -> None:
    scale = float(np.abs(f.hat).max(initial=0.0))
    if scale == 0:
        return
    if np.any(np.abs(f.hat[~f.spec.trusted_mask()]) > 1e-13 * scale):
        raise AliasingError(f"{what} is not band-limited to the trusted band", module="frames", invariant="trusted-band")


# --------------------------------------------------------------------------
# dual windows
# --------------------------------------------------------------------------


@dataclass
class NonvanishingReport:
    minima: dict
    passed: bool
    floor: float
    offending: dict = field(default_factory=dict)


def base_set_samples(base: BaseSet, d: int, dense: int | None = None) -> np.ndarray:
    """Dense sample of the closed base set, including boundary points (normalized coordinates)."""
    R = base.outer
    if d == 1:
        dense = dense or 8001
        t = np.linspace(-R, R, dense)
        bnd = [R, -R] + ([base.a, -base.a] if base.kind == "annulus" else [])
        pts = np.concatenate([t, np.array(bnd)])[:, None]
    else:
        dense = dense or 401
        t = np.linspace(-R, R, dense)
        X = np.stack(np.meshgrid(*([t] * d), indexing="ij"), axis=-1).reshape(-1, d)
        pts = [X]
        if d == 2 and base.kind != "cube":
            ang = np.linspace(0.0, 2 * np.pi, 10 * dense, endpoint=False)
            radii = [base.a, base.b] if base.kind == "annulus" else [base.a]
            for r in radii:
                pts.append(np.stack([r * np.cos(ang), r * np.sin(ang)], axis=-1))
        pts = np.concatenate(pts)
    return pts[base.contains(pts, closed=True) | _on_boundary(base, pts)]


def _on_boundary(base: BaseSet, pts: np.ndarray) -> np.ndarray:
    if base.kind == "cube":
        return np.abs(np.abs(pts).max(axis=-1) - base.a) < 1e-12
    r = np.sqrt(np.sum(pts * pts, axis=-1))
    radii = [base.a, base.b] if base.kind == "annulus" else [base.a]
    return np.any([np.abs(r - x) < 1e-9 for x in radii], axis=0)


def nonvanishing_check(system: FrameSystem, threshold: float = 1e-6) -> NonvanishingReport:
    """Minimum of ``|gamma_i^|`` over the closed normalized base set of every index."""
    minima, offending = {}, {}
    seen: dict = {}
    for i in system.indices:
        proto = system.prototype(i)
        base = system.cov.base(i)
        key = (id(proto), base)
        if key not in seen:
            pts = base_set_samples(base, system.cov.d)
            vals = np.abs(proto.hat(pts))
            at = int(np.argmin(vals))
            seen[key] = (float(vals[at]), tuple(float(x) for x in pts[at]))
        minima[i], where = seen[key]
        if minima[i] <= threshold:
            offending[i] = where
    floor = min(minima.values(), default=0.0)
    return NonvanishingReport(minima, not offending, floor, offending)


class DualWindows:
    """``theta_i = (eta / gamma_i^) o S_i^{-1}`` with ``eta`` equal to 1 on the closed base set."""

    ENLARGEMENTS = (0.5, 0.25, 0.125, 0.0625, 1.0 / 32, 1.0 / 64)

    def __init__(self, system: FrameSystem, margin: float | None = None, bump: BumpSpec = BumpSpec("poly", 6)):
        report = nonvanishing_check(system)
        if not report.passed:
            raise DecospaceError(
                f"prototype transform vanishes on a base set: {report.offending}", module="frames", invariant="nonvanishing"
            )
        self.system = system
        self.bump = bump
        self.floor = report.floor
        self.enlargement: dict = {}
        for i in system.indices:
            key = (id(system.prototype(i)), system.cov.base(i))
            if key not in self.enlargement:
                self.enlargement[key] = self._find_enlargement(system.prototype(i), system.cov.base(i), report.minima[i], margin)
        self._cache: dict = {}

    def _find_enlargement(self, proto: PrototypeSpec, base: BaseSet, c: float, margin) -> float:
        options = (margin,) if margin is not None else self.ENLARGEMENTS
        d = self.system.cov.d
        for eps in options:
            big = _enlarge(base, eps)
            vals = np.abs(proto.hat(base_set_samples(big, d)))
            if vals.min() > c / 2:
                return eps
        raise DecospaceError(
            "no neighborhood of the base set keeps |gamma^| above half the floor", module="frames", invariant="dual-margin"
        )

    def cutoff(self, i, eta: np.ndarray) -> np.ndarray:
        base = self.system.cov.base(i)
        eps = self.enlargement[(id(self.system.prototype(i)), base)]
        return self.bump.on_base(_enlarge(base, eps), base, eta)

    def on_grid(self, i) -> np.ndarray:
        if i not in self._cache:
            sys = self.system
            eta = sys.cov.to_normalized(i, sys.grid.xi_points())
            cut = self.cutoff(i, eta)
            gh = sys.gamma_hat(i)
            theta = np.zeros(sys.grid.shape, dtype=complex)
            nz = cut > 0
            theta[nz] = cut[nz] / gh[nz]
            theta.setflags(write=False)
            self._cache[i] = theta
        return self._cache[i]


def _enlarge(base: BaseSet, eps: float) -> BaseSet:
    if base.kind == "annulus":
        return BaseSet.annulus(base.a * (1 - eps), base.b * (1 + eps))
    return BaseSet(base.kind, base.a * (1 + eps))


def dual_windows(system: FrameSystem, margin: float | None = None) -> DualWindows:
    return DualWindows(system, margin)


# --------------------------------------------------------------------------
# analysis / synthesis
# --------------------------------------------------------------------------


def analyze(f: SampledField, system: FrameSystem) -> CoefficientArray:
    """``c_k^(i) = (gamma^[i] * f)(delta T_i^{-T} k)``."""
    _require_band(f)
    data, lats = {}, {}
    for i in system.indices:
        lat = system.lattice(i)
        lats[i] = lat
        data[i] = lattice_eval(system.grid, lat, system.gamma_hat_l2(i) * f.hat)
    return CoefficientArray(system.delta, data, lats)


def synthesize(C: CoefficientArray, system: FrameSystem) -> SampledField:
    """``sum_i sum_k c_k^(i) L_{x_k} gamma^[i]``, accumulated in frequency."""
    acc = np.zeros(system.grid.shape, dtype=complex)
    for i, c in C.data.items():
        if not np.any(c):
            continue
        acc += system.gamma_hat_l2(i) * lattice_sum(system.grid, system.lattice(i), c)
    return SampledField.from_hat(system.grid, acc)


def coefficient_norm(C: CoefficientArray, p: float, q: float, w=None, v: WeightSpec = ONE, cov: StructuredCovering | None = None) -> float:
    """Outer weighted ``l^q`` (weight ``|det T_i|^{1/2-1/p} w_i``) of inner ``l^p_v`` norms over ``k``."""
    if cov is None:
        raise ValueError("coefficient_norm needs the covering for the determinant weights")
    outer = {}
    inv_p = 0.0 if math.isinf(p) else 1.0 / p
    for i, c in C.data.items():
        lat = C.lattices[i]
        vals = np.abs(c)
        if v.kind != "one":
            vals = vals * v(lat.points())
        weight = cov.det(i) ** (0.5 - inv_p) * (w(i) if w is not None else 1.0)
        outer[i] = weight * lp_of_samples(vals, p)
    return lp_of_samples(np.array(list(outer.values())), q) if outer else 0.0


# --------------------------------------------------------------------------
# reconstruction pipelines
# --------------------------------------------------------------------------


def _piece_guard(grid: GridSpec, arr: np.ndarray, i, ref: float) -> None:
    if ref > 0 and np.any(np.abs(arr[~grid.trusted_mask()]) > 1e-13 * ref):
        raise AliasingError(f"piece {i!r} reaches outside the trusted band", module="frames", invariant="trusted-band")


def semidiscrete_reconstruct(f: SampledField, system: FrameSystem, partition: Partition, duals: DualWindows | None = None) -> SampledField:
    """``sum_i F^{-1}(phi_i theta_i gamma^(i) f^)``."""
    _check_pairing(system, partition)
    duals = duals or DualWindows(system)
    grid = system.grid
    ref = float(np.abs(f.hat).max(initial=0.0))
    acc = np.zeros(grid.shape, dtype=complex)
    for i in system.indices:
        piece = partition.on_grid(i, grid) * duals.on_grid(i) * system.gamma_hat(i) * f.hat
        _piece_guard(grid, piece, i, ref)
        acc += piece
    return SampledField.from_hat(grid, acc)


def _check_pairing(system: FrameSystem, partition: Partition) -> None:
    if partition.cov != system.cov or list(partition.indices) != system.indices:
        raise ValueError("partition and frame system use different truncations")


def coefficient_map(f: SampledField, system: FrameSystem, partition: Partition, duals: DualWindows, *, guard: bool = True) -> CoefficientArray:
    """``D^(delta) f = (delta^d |det T_j|^{-1/2} [F^{-1}(theta_j phi_j f^)](x_k))``."""
    grid = system.grid
    data, lats = {}, {}
    ref = float(np.abs(f.hat).max(initial=0.0))
    for j in system.indices:
        lat = system.lattice(j)
        ghat = duals.on_grid(j) * partition.on_grid(j, grid) * f.hat
        if guard:
            _piece_guard(grid, ghat, j, ref * max(1.0, float(np.abs(duals.on_grid(j)).max())))
        scale = system.delta**grid.d / math.sqrt(system.cov.det(j))
        data[j] = scale * lattice_eval(grid, lat, ghat)
        lats[j] = lat
    return CoefficientArray(system.delta, data, lats)


def atomic_step(f: SampledField, system: FrameSystem, partition: Partition, duals: DualWindows | None = None):
    """``(D^(delta) f, T^(delta) f)`` with ``T = S o D``."""
    _check_pairing(system, partition)
    duals = duals or DualWindows(system)
    C = coefficient_map(f, system, partition, duals)
    return C, synthesize(C, system)


def atomic_residual(f: SampledField, system: FrameSystem, partition: Partition, duals: DualWindows | None = None) -> float:
    nf = f.l2_norm()
    if nf == 0:
        return 0.0
    _, Tf = atomic_step(f, system, partition, duals)
    return (f - Tf).l2_norm() / nf


@dataclass
class NeumannReport:
    iterations: int
    residuals: list
    converged: bool

    @property
    def contraction(self) -> float:
        r = self.residuals
        if len(r) < 2 or r[0] == 0:
            return 0.0
        return (r[-1] / r[0]) ** (1.0 / (len(r) - 1))


def _neumann(apply_T, rhs, norm, tol: float, max_iter: int, stall: float = 0.98):
    """Solve ``T g = rhs`` by ``g <- g + (rhs - T g)`` starting from ``g = rhs``."""
    nr = norm(rhs)
    if nr == 0:
        return rhs, NeumannReport(0, [0.0], True)
    g = rhs
    res = rhs - apply_T(g)
    hist = [norm(res) / nr]
    if hist[0] >= 1.0:
        raise NoContractionError(
            f"initial residual {hist[0]:.3g} >= 1: not a contraction at this density", module="frames", invariant="contraction"
        )
    it = 0
    while hist[-1] > tol and it < max_iter:
        g = g + res
        res = rhs - apply_T(g)
        it += 1
        hist.append(norm(res) / nr)
        if hist[-1] >= stall * hist[-2]:
            raise NoContractionError(
                f"residual ratio {hist[-1] / hist[-2]:.3g} >= {stall} at iteration {it}", module="frames", invariant="contraction"
            )
    return g, NeumannReport(it, hist, hist[-1] <= tol)


def neumann_reconstruct(
    f: SampledField,
    system: FrameSystem,
    partition: Partition,
    tol: float = 1e-8,
    max_iter: int = 100,
    duals: DualWindows | None = None,
    *,
    guard_iterates: bool = True,
):
    """Atomic coefficients ``C = D (T)^{-1} f`` with ``synthesize(C) = f`` to ``tol``.

    With ``guard_iterates=False`` only ``f`` must stay inside the trusted band;
    the iterates are treated as exact grid fields, so the iteration inverts the
    grid-truncated operator.
    """
    _check_pairing(system, partition)
    duals = duals or DualWindows(system)
    _require_band(f)

    def apply_T(g):
        return synthesize(coefficient_map(g, system, partition, duals, guard=guard_iterates), system)

    g, report = _neumann(apply_T, f, SampledField.l2_norm, tol, max_iter)
    C = coefficient_map(g, system, partition, duals, guard=guard_iterates)
    return C, synthesize(C, system), report


class FieldTuple:
    """Finite tuple ``(f_i)_{i in idx}`` of grid fields, stored by spectra."""

    def __init__(self, parts: dict):
        self.parts = parts

    def __add__(self, other):
        return FieldTuple({i: v + other.parts[i] for i, v in self.parts.items()})

    def __sub__(self, other):
        return FieldTuple({i: v - other.parts[i] for i, v in self.parts.items()})

    def norm(self) -> float:
        """``l^2`` over the tuple of ``L^2`` norms (grid Parseval)."""
        return math.sqrt(sum(float(np.sum(np.abs(v) ** 2)) for v in self.parts.values()))


def _cell_transform(spec: GridSpec, step: float) -> np.ndarray:
    """Fourier transform of the indicator of ``step * [0, 1)^d`` on the grid."""
    out = np.full(spec.shape, step**spec.d, dtype=complex)
    for ax in range(spec.d):
        eta = step * spec.xi_axis
        fac = np.exp(-1j * np.pi * eta) * np.sinc(eta)
        shape = [1] * spec.d
        shape[ax] = spec.n
        out = out * fac.reshape(shape)
    return out


def banach_reconstruct(
    C_in: CoefficientArray,
    system: FrameSystem,
    partition: Partition,
    tol: float = 1e-8,
    max_iter: int = 300,
    duals: DualWindows | None = None,
    memory_budget: int = MEMORY_BUDGET,
) -> SampledField:
    """Left inverse of :func:`analyze`: ``[Synth_D o m_theta] o T^{-1} o F o Synth_delta``."""
    return banach_reconstruct_report(C_in, system, partition, tol, max_iter, duals, memory_budget)[0]


def banach_reconstruct_report(C_in, system, partition, tol=1e-8, max_iter=300, duals=None, memory_budget=MEMORY_BUDGET):
    _check_pairing(system, partition)
    grid = system.grid
    if len(system.indices) * grid.size * 3 > memory_budget:
        raise MemoryBudgetError("tuple iteration exceeds the memory budget", module="frames", invariant="memory-budget")
    duals = duals or DualWindows(system)
    mult = {i: partition.on_grid(i, grid) * duals.on_grid(i) for i in system.indices}
    cells = {i: _cell_transform(grid, system.step(i)) for i in system.indices}

    def synth_steps(coeffs: dict) -> FieldTuple:
        return FieldTuple({i: cells[i] * lattice_sum(grid, system.lattice(i), c) for i, c in coeffs.items()})

    def sample(t: FieldTuple) -> dict:
        return {i: lattice_eval(grid, system.lattice(i), v) for i, v in t.parts.items()}

    def project(t: FieldTuple) -> FieldTuple:
        u = sum(mult[i] * v for i, v in t.parts.items())
        return FieldTuple({j: system.gamma_hat(j) * u for j in system.indices})

    def apply_T(t: FieldTuple) -> FieldTuple:
        return project(synth_steps(sample(t)))

    # undo the l2 normalization so the step functions approximate gamma^(i) * f
    rhs = project(synth_steps({i: C_in.data[i] * math.sqrt(system.cov.det(i)) for i in system.indices}))
    g, report = _neumann(apply_T, rhs, FieldTuple.norm, tol, max_iter)
    out = sum(mult[i] * v for i, v in g.parts.items())
    return SampledField.from_hat(grid, out if not np.isscalar(out) else np.zeros(grid.shape)), report


# --------------------------------------------------------------------------
# frame bounds
# --------------------------------------------------------------------------


def frame_bounds_l2(system: FrameSystem, trials: int = 10, rng: np.random.Generator | None = None, iterations: int = 50) -> tuple[float, float]:
    """Extremes of ``<S A f, f> / <f, f>`` over the band-limited test subspace."""
    rng = rng or np.random.default_rng(0)
    grid = system.grid
    band = random_bandlimited(grid, np.random.default_rng(0)).hat != 0
    dim = int(band.sum())

    def op_vec(vec):
        hat = np.zeros(grid.shape, dtype=complex)
        hat[band] = vec
        f = SampledField.from_hat(grid, hat)
        out = synthesize(analyze(f, system), system).hat[band]
        return out

    def rq(vec):
        den = np.vdot(vec, vec).real
        return float(np.vdot(vec, op_vec(vec)).real / den) if den else 0.0

    quotients = []
    for _ in range(trials):
        f = random_bandlimited(grid, rng)
        quotients.append(rq(f.hat[band]))
    A, B = min(quotients), max(quotients)
    if max(abs(A), abs(B)) == 0.0:
        return 0.0, 0.0
    lin = LinearOperator((dim, dim), matvec=op_vec, dtype=complex)
    v0 = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    for which in ("LA", "SA"):
        try:
            val = eigsh(lin, k=1, which=which, v0=v0, maxiter=iterations * 10, tol=1e-10, return_eigenvectors=False)[0]
        except ArpackNoConvergence as exc:
            vals = exc.eigenvalues
            if len(vals) == 0:
                continue
            val = vals[0]
        if which == "LA":
            B = max(B, float(val))
        else:
            A = min(A, float(val))
    A = max(A, 0.0)
    if abs(A) < 1e-14 * max(1.0, B):
        A = 0.0
    if B < 1e-14:
        B = 0.0
    return A, max(A, B)

"""Sampled-function substrate: periodized fields on a uniform torus grid.

The torus is ``[-L, L)^d`` sampled with ``n`` points per axis, so the spatial
step is ``h = 2L/n`` and the frequency grid is ``xi_m = m / (2L)`` for
``m in {-n/2, ..., n/2 - 1}^d``.  The transform pair is normalized so that it
approximates the unitary Fourier transform ``f^(xi) = int f(x) e^{-2 pi i x xi} dx``::

    f^(xi_m) = h^d * sum_x f(x) e^{-2 pi i x xi_m}
    f(x)     = (2L)^{-d} * sum_m f^(xi_m) e^{2 pi i x xi_m}

Spatial arrays are stored in natural order (first sample at ``-L``); frequency
arrays are stored in numpy FFT order.  Use :meth:`GridSpec.xi_points` to get
the frequencies aligned with a frequency array.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy import special

from .errors import AliasingError, DecospaceError

TRUSTED_FRACTION = 0.75
DERIVATIVE_CAP = 12
_CHUNK = 1 << 22  # complex entries per direct-sum block


# --------------------------------------------------------------------------
# grid + fields
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid on the torus ``[-L, L)^d``."""

    d: int
    n: int
    L: float

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"dimension must be >= 1, got {self.d}")
        if self.n < 8 or self.n % 2 or self.n & (self.n - 1):
            raise ValueError(f"n must be a power of two >= 8, got {self.n}")
        if not self.L > 0:
            raise ValueError(f"L must be positive, got {self.L}")

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def size(self) -> int:
        return self.n**self.d

    @property
    def nyquist(self) -> float:
        """Half-width of the representable frequency band, ``n/(4L)``."""
        return self.n / (4.0 * self.L)

    @property
    def trusted(self) -> float:
        """Half-width of the trusted (inner 75%) frequency band."""
        return TRUSTED_FRACTION * self.nyquist

    @property
    def dxi(self) -> float:
        return 1.0 / (2.0 * self.L)

    @cached_property
    def x_axis(self) -> np.ndarray:
        return -self.L + self.h * np.arange(self.n)

    @cached_property
    def m_axis(self) -> np.ndarray:
        return np.fft.fftfreq(self.n, d=1.0 / self.n).astype(np.int64)

    @cached_property
    def xi_axis(self) -> np.ndarray:
        return self.m_axis / (2.0 * self.L)

    def x_points(self) -> np.ndarray:
        """Spatial sample points, shape ``shape + (d,)``."""
        return _mesh(self.x_axis, self.d)

    def xi_points(self) -> np.ndarray:
        """Frequency sample points in FFT order, shape ``shape + (d,)``."""
        return _mesh(self.xi_axis, self.d)

    @cached_property
    def _parity(self) -> np.ndarray:
        sign = np.where(self.m_axis % 2 == 0, 1.0, -1.0)
        out = np.ones(self.shape)
        for ax in range(self.d):
            out = out * sign.reshape(_axis_shape(self.d, ax, self.n))
        return out

    def trusted_mask(self, fraction: float = TRUSTED_FRACTION) -> np.ndarray:
        """Boolean mask of frequency samples with ``max_l |xi_l| <= fraction * nyquist``."""
        lim = fraction * self.nyquist + 1e-12
        mask = np.ones(self.shape, dtype=bool)
        for ax in range(self.d):
            mask &= (np.abs(self.xi_axis) <= lim).reshape(_axis_shape(self.d, ax, self.n))
        return mask

    def refined(self, factor: int = 2) -> "GridSpec":
        return GridSpec(self.d, self.n * factor, self.L)


def _axis_shape(d: int, ax: int, n: int) -> tuple[int, ...]:
    shp = [1] * d
    shp[ax] = n
    return tuple(shp)


def _mesh(axis: np.ndarray, d: int) -> np.ndarray:
    grids = np.meshgrid(*([axis] * d), indexing="ij")
    return np.stack(grids, axis=-1)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


class SampledField:
    """Immutable complex field on a :class:`GridSpec` with lazily paired spectrum.

    Construct from space samples (``values``) or frequency samples (``hat``);
    the other representation is computed on first access and cached.
    """

    __slots__ = ("spec", "_values", "_hat")

    def __init__(self, spec: GridSpec, values=None, *, hat=None):
        if (values is None) == (hat is None):
            raise ValueError("provide exactly one of values / hat")
        self.spec = spec
        self._values = None if values is None else _frozen(np.reshape(values, spec.shape))
        self._hat = None if hat is None else _frozen(np.reshape(hat, spec.shape))

    @classmethod
    def from_hat(cls, spec: GridSpec, hat) -> "SampledField":
        return cls(spec, hat=hat)

    @classmethod
    def zeros(cls, spec: GridSpec) -> "SampledField":
        return cls(spec, np.zeros(spec.shape))

    @classmethod
    def delta(cls, spec: GridSpec) -> "SampledField":
        """Discrete delta at the origin, value ``1/h^d``."""
        v = np.zeros(spec.shape)
        v[(spec.n // 2,) * spec.d] = 1.0 / spec.h**spec.d
        return cls(spec, v)

    @property
    def values(self) -> np.ndarray:
        if self._values is None:
            self._values = _frozen(_inverse(self.spec, self._hat))
        return self._values

    @property
    def hat(self) -> np.ndarray:
        if self._hat is None:
            self._hat = _frozen(_forward(self.spec, self._values))
        return self._hat

    def _binary(self, other, op):
        if isinstance(other, SampledField):
            if other.spec != self.spec:
                raise ValueError("fields live on different grids")
            if self._values is not None and other._values is not None:
                return SampledField(self.spec, op(self._values, other._values))
            return SampledField.from_hat(self.spec, op(self.hat, other.hat))
        if self._values is not None:
            return SampledField(self.spec, op(self._values, other))
        return SampledField.from_hat(self.spec, op(self._hat, other))

    def __add__(self, other):
        if not isinstance(other, SampledField):
            return NotImplemented
        return self._binary(other, np.add)

    def __sub__(self, other):
        if not isinstance(other, SampledField):
            return NotImplemented
        return self._binary(other, np.subtract)

    def __mul__(self, c):
        if isinstance(c, SampledField):
            return SampledField(self.spec, self.values * c.values)
        return self._binary(c, np.multiply)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.spec.h**self.spec.d))

    def inner(self, other: "SampledField") -> complex:
        """Grid inner product ``h^d sum f conj(g)``."""
        return complex(np.sum(self.values * np.conj(other.values)) * self.spec.h**self.spec.d)

    def __repr__(self) -> str:
        return f"SampledField(d={self.spec.d}, n={self.spec.n}, L={self.spec.L})"

    # -- serialization -----------------------------------------------------

    def to_bytes(self) -> bytes:
        s = self.spec
        header = b"DSPF" + struct.pack("<IIId", 1, s.d, s.n, s.L)
        return header + np.ascontiguousarray(self.values, dtype="<c16").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "SampledField":
        if data[:4] != b"DSPF":
            raise DecospaceError("not a DSPF field container", module="grid")
        version, d, n, L = struct.unpack("<IIId", data[4:24])
        if version != 1:
            raise DecospaceError(f"unsupported DSPF version {version}", module="grid")
        spec = GridSpec(d, n, L)
        vals = np.frombuffer(data[24:], dtype="<c16")
        if vals.size != spec.size:
            raise DecospaceError("DSPF payload size does not match header", module="grid")
        return cls(spec, vals.reshape(spec.shape))

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "SampledField":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())

    def to_csv(self) -> str:
        lines = ["index,re,im"]
        flat = self.values.reshape(-1)
        lines += [f"{i},{z.real!r},{z.imag!r}" for i, z in enumerate(flat)]
        return "\n".join(lines) + "\n"


def _forward(spec: GridSpec, values: np.ndarray) -> np.ndarray:
    return spec.h**spec.d * spec._parity * np.fft.fftn(values)


def _inverse(spec: GridSpec, hat: np.ndarray) -> np.ndarray:
    return (spec.n / (2.0 * spec.L)) ** spec.d * np.fft.ifftn(hat * spec._parity)


def dft(f: SampledField) -> np.ndarray:
    """Frequency samples of ``f`` (FFT order), approximating the unitary transform."""
    return f.hat


def idft(spec: GridSpec, hat) -> SampledField:
    return SampledField.from_hat(spec, hat)


def resample(f: SampledField, spec: GridSpec) -> SampledField:
    """Same trigonometric polynomial on a grid with the same torus and another point count."""
    src = f.spec
    if src.d != spec.d or src.L != spec.L:
        raise ValueError("resampling needs the same dimension and torus")
    m = src.m_axis.astype(int)
    keep = np.abs(m) < spec.n // 2
    hat = f.hat
    for ax in range(src.d):
        dropped = np.take(hat, np.flatnonzero(~keep), axis=ax)
        if dropped.size and np.abs(dropped).max() > 1e-13 * np.abs(f.hat).max(initial=0.0):
            raise AliasingError("resampling would drop spectral content", module="grid", invariant="trusted-band")
        hat = np.take(hat, np.flatnonzero(keep), axis=ax)
    out = np.zeros(spec.shape, dtype=complex)
    pos = np.mod(m[keep], spec.n)
    out[np.ix_(*([pos] * src.d))] = hat
    return SampledField.from_hat(spec, out)


def interpolate(f: SampledField, points) -> np.ndarray:
    """Trigonometric interpolation of ``f`` at arbitrary points of shape ``(N, d)``.

    Exact for fields whose spectrum vanishes at the Nyquist row.
    """
    spec = f.spec
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[-1] != spec.d:
        pts = pts.reshape(-1, spec.d)
    hat = f.hat
    mask = hat != 0
    coeff = hat[mask]
    xi = spec.xi_points()[mask]
    out = np.empty(len(pts), dtype=complex)
    step = max(1, _CHUNK // max(1, len(coeff)))
    for s in range(0, len(pts), step):
        ph = np.exp(2j * np.pi * (pts[s : s + step] @ xi.T))
        out[s : s + step] = ph @ coeff
    return out / (2.0 * spec.L) ** spec.d


def random_bandlimited(spec: GridSpec, rng: np.random.Generator, *, plateau: float = 0.5, edge: float = 0.7) -> SampledField:
    """Random field with complex Gaussian spectrum times a smooth envelope.

    The envelope equals one for ``max|xi_l| <= plateau * nyquist`` and vanishes
    for ``max|xi_l| >= edge * nyquist``; ``edge`` stays inside the trusted band.
    """
    if edge > TRUSTED_FRACTION:
        raise AliasingError("test-function envelope exits the trusted band", module="grid")
    xi = spec.xi_points()
    env = np.ones(spec.shape)
    a, b = plateau * spec.nyquist, edge * spec.nyquist
    for ax in range(spec.d):
        env = env * _smooth_window(np.abs(xi[..., ax]), a, b)
    z = rng.standard_normal(spec.shape) + 1j * rng.standard_normal(spec.shape)
    return SampledField.from_hat(spec, z * env)


def _smooth_window(r: np.ndarray, a: float, b: float) -> np.ndarray:
    t = np.clip((b - r) / (b - a), 0.0, 1.0)
    return _smoothstep(t)


def _smoothstep(t: np.ndarray) -> np.ndarray:
    """C-infinity step from 0 (t <= 0) to 1 (t >= 1)."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        f0 = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        s = 1.0 - t
        f1 = np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
    return f0 / (f0 + f1)


# --------------------------------------------------------------------------
# weights
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class WeightSpec:
    """Spatial weight: ``one``, ``bracket`` ``(1+|x|^2)^{mu/2}`` or its ``companion`` ``[2(1+|x|)]^{|mu|}``."""

    kind: str = "one"
    mu: float = 0.0

    def __post_init__(self):
        if self.kind not in ("one", "bracket", "companion"):
            raise ValueError(f"unknown weight kind {self.kind!r}")

    @classmethod
    def bracket(cls, mu: float) -> "WeightSpec":
        return cls("bracket", float(mu))

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "one":
            return np.ones(x.shape[:-1])
        r = np.sqrt(np.sum(x * x, axis=-1))
        if self.kind == "bracket":
            return (1.0 + r * r) ** (self.mu / 2.0)
        return (2.0 * (1.0 + r)) ** abs(self.mu)

    def companion(self) -> "WeightSpec":
        """The submultiplicative weight ``v0`` controlling translations of ``v``."""
        return WeightSpec("companion", abs(self.mu))

    @property
    def K(self) -> float:
        return abs(self.mu)

    @property
    def omega0(self) -> float:
        return 1.0

    @property
    def omega1(self) -> float:
        return 2.0 ** abs(self.mu)


ONE = WeightSpec()


def weighted_lp_norm(f: SampledField, p: float, w: WeightSpec = ONE) -> float:
    """Riemann-sum approximation of ``||w f||_{L^p}``; quasi-norm for ``p < 1``."""
    if not p > 0:
        raise ValueError(f"p must be positive, got {p}")
    spec = f.spec
    vals = np.abs(f.values)
    if w.kind != "one":
        vals = vals * w(spec.x_points())
    return lp_of_samples(vals, p, spec.h**spec.d)


def lp_of_samples(vals: np.ndarray, p: float, cell: float = 1.0) -> float:
    vals = np.abs(vals)
    if math.isinf(p):
        return float(vals.max(initial=0.0))
    m = float(vals.max(initial=0.0))
    if m == 0.0:
        return 0.0
    # rescale to avoid under/overflow for extreme p
    return m * float(np.sum((vals / m) ** p) * cell) ** (1.0 / p)


# --------------------------------------------------------------------------
# prototypes
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PrototypeSpec:
    """Space-domain generator ``gamma`` together with a rule for ``gamma^``.

    kinds
      * ``gaussian(a)``: ``gamma(x) = exp(-pi |x|^2 / a^2)``, ``gamma^(xi) = a^d exp(-pi a^2 |xi|^2)``
      * ``bspline(m)``: tensor cardinal B-spline of order ``m`` (``m+1`` box convolutions),
        ``gamma^ = prod sinc(xi_l)^{m+1}``
      * ``cutoff(N, R, s)``: the compactly supported piecewise-ramp cutoff; transform by direct sums
      * ``tabulated(field)``: arbitrary grid samples; transform by direct sums
    """

    kind: str
    d: int
    params: tuple = ()
    field_: SampledField | None = field(default=None, repr=False)

    @classmethod
    def gaussian(cls, a: float = 1.0, d: int = 1) -> "PrototypeSpec":
        return cls("gaussian", d, (float(a),))

    @classmethod
    def bspline(cls, order: int, d: int = 1) -> "PrototypeSpec":
        if order < 0:
            raise ValueError("bspline order must be >= 0")
        return cls("bspline", d, (int(order),))

    @classmethod
    def cutoff(cls, N: int, R: float, s: float, d: int = 1) -> "PrototypeSpec":
        return cls("cutoff", d, (int(N), float(R), float(s)))

    @classmethod
    def tabulated(cls, f: SampledField) -> "PrototypeSpec":
        return cls("tabulated", f.spec.d, (), f)

    @classmethod
    def zero(cls, d: int = 1) -> "PrototypeSpec":
        return cls("zero", d)

    # -- descriptors -------------------------------------------------------

    @property
    def closed_form(self) -> bool:
        return self.kind in ("gaussian", "bspline", "zero")

    @property
    def support_halfwidth(self) -> float | None:
        """Half-width of a cube containing the support, or ``None`` if not compact."""
        if self.kind == "bspline":
            return (self.params[0] + 1) / 2.0
        if self.kind == "cutoff":
            return self.params[1] + self.params[2]
        if self.kind == "zero":
            return 0.0
        if self.kind == "tabulated":
            spec = self.field_.spec
            nz = np.abs(self.field_.values) > 1e-14
            if not nz.any():
                return 0.0
            x = spec.x_points()[nz]
            return float(np.abs(x).max()) + spec.h
        return None

    @property
    def is_real(self) -> bool:
        if self.kind == "tabulated":
            return bool(np.all(np.abs(self.field_.values.imag) <= 1e-14))
        return True

    # -- space side --------------------------------------------------------

    def space(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "gaussian":
            a = self.params[0]
            return np.exp(-np.pi * np.sum(x * x, axis=-1) / a**2).astype(complex)
        if self.kind == "bspline":
            out = np.ones(x.shape[:-1])
            for ax in range(self.d):
                out = out * _bspline_1d(x[..., ax], self.params[0])
            return out.astype(complex)
        if self.kind == "cutoff":
            from .bapu import cutoff

            N, R, s = self.params
            return cutoff(N, R, s, self.d)(x).astype(complex)
        if self.kind == "zero":
            return np.zeros(x.shape[:-1], dtype=complex)
        return interpolate(self.field_, x.reshape(-1, self.d)).reshape(x.shape[:-1])

    # -- frequency side ----------------------------------------------------

    def hat(self, xi, alpha: Sequence[int] | None = None) -> np.ndarray:
        """``(d^alpha gamma^)(xi)`` at arbitrary points ``xi`` of shape ``(..., d)``."""
        xi = np.asarray(xi, dtype=float)
        alpha = tuple(alpha) if alpha is not None else (0,) * self.d
        if len(alpha) != self.d:
            raise ValueError("multi-index length must equal the dimension")
        if self.kind == "zero":
            return np.zeros(xi.shape[:-1], dtype=complex)
        if self.kind == "gaussian":
            a = self.params[0]
            out = np.full(xi.shape[:-1], a**self.d, dtype=complex)
            c = math.sqrt(math.pi) * a
            for ax, k in enumerate(alpha):
                t = c * xi[..., ax]
                out = out * ((-c) ** k * special.eval_hermite(k, t) * np.exp(-t * t))
            return out
        if self.kind == "bspline":
            m = self.params[0]
            out = np.ones(xi.shape[:-1], dtype=complex)
            for ax, k in enumerate(alpha):
                out = out * _sinc_power_derivative(xi[..., ax], m + 1, k)
            return out
        if self.kind == "tabulated":
            return _direct_hat(self.field_.spec, self.field_.values, xi, alpha)
        # the cutoff is a tensor product: multiply one-dimensional Fourier sums
        from .bapu import cutoff

        N, R, s = self.params
        ref = GridSpec(1, 4096, 2.0 * (R + s))
        samples = cutoff(N, R, s, 1)(ref.x_points())
        out = np.ones(xi.shape[:-1], dtype=complex)
        for ax, k in enumerate(alpha):
            uniq, inv = np.unique(xi[..., ax], return_inverse=True)
            vals = _direct_hat(ref, samples, uniq[:, None], (k,))
            out = out * vals[inv.reshape(xi.shape[:-1])]
        return out


def _direct_hat(spec: GridSpec, vals: np.ndarray, xi: np.ndarray, alpha) -> np.ndarray:
    """Fourier sum ``h^d sum_x (-2 pi i x)^alpha gamma(x) e^{-2 pi i x xi}`` at arbitrary ``xi``."""
    x = spec.x_points()
    weighted = np.asarray(vals, dtype=complex).copy()
    for ax, k in enumerate(alpha):
        if k:
            weighted = weighted * (-2j * np.pi * x[..., ax]) ** k
    nz = np.abs(weighted) > 0
    coeff = weighted[nz]
    xs = x[nz]
    pts = xi.reshape(-1, spec.d)
    out = np.empty(len(pts), dtype=complex)
    step = max(1, _CHUNK // max(1, len(coeff)))
    for s in range(0, len(pts), step):
        out[s : s + step] = np.exp(-2j * np.pi * (pts[s : s + step] @ xs.T)) @ coeff
    return (out * spec.h**spec.d).reshape(xi.shape[:-1])


def _bspline_1d(x: np.ndarray, m: int) -> np.ndarray:
    """Centered cardinal B-spline of order m (support [-(m+1)/2, (m+1)/2])."""
    out = np.zeros_like(x, dtype=float)
    shift = (m + 1) / 2.0
    for k in range(m + 2):
        t = x + shift - k
        if m == 0:
            term = (t >= 0).astype(float)
        else:
            term = np.where(t > 0, t, 0.0) ** m
        out += (-1) ** k * math.comb(m + 1, k) * term
    out /= math.factorial(m)
    out[np.abs(x) >= shift] = 0.0
    return out


def _sinc_derivatives(x: np.ndarray, kmax: int) -> list[np.ndarray]:
    """``sinc^{(k)}(x)`` for ``k = 0..kmax`` via ``sinc(x) = int_{-1/2}^{1/2} e^{-2 pi i x t} dt``."""
    x = np.asarray(x, dtype=float)
    flat = x.reshape(-1)
    res = [np.empty_like(flat) for _ in range(kmax + 1)]
    step = 4096
    for s in range(0, flat.size, step):
        xs = flat[s : s + step]
        q = int(math.ceil(math.pi * (np.abs(xs).max(initial=0.0)) / 2.0)) + kmax + 40
        t, wq = np.polynomial.legendre.leggauss(q)
        t = t / 2.0
        wq = wq / 2.0
        ph = np.exp(-2j * np.pi * np.outer(xs, t))
        for k in range(kmax + 1):
            res[k][s : s + step] = ((ph * ((-2j * np.pi * t) ** k)) @ wq).real
    return [r.reshape(x.shape) for r in res]


def _sinc_power_derivative(x: np.ndarray, power: int, k: int) -> np.ndarray:
    """k-th derivative of ``sinc(x)^power`` by repeated Leibniz products."""
    base = _sinc_derivatives(x, k)
    prod = base
    for _ in range(power - 1):
        prod = [sum(math.comb(j, i) * prod[i] * base[j - i] for i in range(j + 1)) for j in range(k + 1)]
    return prod[k]


# --------------------------------------------------------------------------
# operations on prototypes
# --------------------------------------------------------------------------


def hat_derivative(gamma: PrototypeSpec, alpha: Sequence[int], grid: GridSpec, cap: int = DERIVATIVE_CAP) -> SampledField:
    """Frequency samples of ``d^alpha gamma^`` on ``grid`` (as a field given by its spectrum)."""
    alpha = tuple(int(a) for a in alpha)
    if sum(alpha) > cap:
        raise ValueError(f"|alpha| = {sum(alpha)} exceeds the cap {cap}")
    if gamma.closed_form:
        return SampledField.from_hat(grid, gamma.hat(grid.xi_points(), alpha))
    if gamma.kind == "tabulated":
        if gamma.field_.spec != grid:
            raise ValueError("tabulated prototype must live on the requested grid")
        vals = np.asarray(gamma.field_.values)
    else:
        vals = gamma.space(grid.x_points())
    _check_interior_support(vals, grid)
    x = grid.x_points()
    weighted = vals.astype(complex)
    for ax, k in enumerate(alpha):
        if k:
            weighted = weighted * (-2j * np.pi * x[..., ax]) ** k
    return SampledField(grid, weighted)


def _check_interior_support(vals: np.ndarray, grid: GridSpec, margin_cells: int = 4) -> None:
    x = grid.x_points()
    edge = np.zeros(grid.shape, dtype=bool)
    lim = grid.L - margin_cells * grid.h
    for ax in range(grid.d):
        edge |= np.abs(x[..., ax]) >= lim
    if np.any(np.abs(vals[edge]) > 1e-14):
        raise AliasingError("prototype support touches the torus boundary", module="grid", invariant="interior-support")


def modulate_dilate(gamma: PrototypeSpec, T, b, normalization: str, grid: GridSpec) -> SampledField:
    """``gamma^(i) = |det T| M_b[gamma o T^T]`` (``l1``) or ``|det T|^{1/2} M_b[gamma o T^T]`` (``l2``).

    Built on the frequency side from ``F[gamma^(i)](xi) = gamma^(T^{-1}(xi - b))``.
    """
    hat = dilated_hat(gamma, T, b, grid.xi_points(), normalization)
    return SampledField.from_hat(grid, hat)


def dilated_hat(gamma: PrototypeSpec, T, b, xi: np.ndarray, normalization: str = "l1") -> np.ndarray:
    T = np.atleast_2d(np.asarray(T, dtype=float))
    det = abs(np.linalg.det(T))
    if det < 1e-300 or np.linalg.cond(T) > 1e14:
        raise np.linalg.LinAlgError("singular dilation matrix")
    b = np.broadcast_to(np.asarray(b, dtype=float), (T.shape[0],))
    eta = (xi - b) @ np.linalg.inv(T).T
    out = gamma.hat(eta)
    if normalization == "l2":
        out = out / math.sqrt(det)
    elif normalization != "l1":
        raise ValueError(f"normalization must be 'l1' or 'l2', got {normalization!r}")
    return out

"""Local maximal function, oscillation and Wiener amalgam norms on torus grids."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import DecospaceError
from .grid import GridSpec, SampledField, WeightSpec, ONE, weighted_lp_norm


@dataclass(frozen=True, eq=False)
class Window:
    """Unit neighborhood: ``cube(c) = [-c, c]^d`` or ``affine_cube(T, c) = T^{-T}[-c, c]^d``."""

    halfwidth: float
    T: np.ndarray | None = field(default=None)

    def __post_init__(self):
        if not self.halfwidth > 0:
            raise ValueError("window half-width must be positive")

    @classmethod
    def cube(cls, c: float) -> "Window":
        return cls(float(c))

    @classmethod
    def affine_cube(cls, T, c: float = 1.0) -> "Window":
        return cls(float(c), np.atleast_2d(np.asarray(T, dtype=float)))

    def scaled(self, factor: float) -> "Window":
        return Window(self.halfwidth * factor, self.T)

    def contains(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if self.T is not None:
            y = y @ self.T  # T^T y, row-vector form
        return np.abs(y).max(axis=-1) <= self.halfwidth * (1 + 1e-12)

    def extent(self, d: int) -> np.ndarray:
        """Per-axis half-extent of the window."""
        if self.T is None:
            return np.full(d, self.halfwidth)
        Tinv_T = np.linalg.inv(self.T).T
        return self.halfwidth * np.abs(Tinv_T).sum(axis=1)

    def diameter(self, d: int) -> float:
        if self.T is None:
            return 2.0 * self.halfwidth * np.sqrt(d)
        corners = np.array(list(itertools.product((-1.0, 1.0), repeat=d))) * self.halfwidth
        pts = corners @ np.linalg.inv(self.T)
        diff = pts[:, None, :] - pts[None, :, :]
        return float(np.sqrt((diff**2).sum(-1)).max())

    def offsets(self, spec: GridSpec) -> np.ndarray:
        """Integer grid offsets ``m`` with ``h m`` in the window."""
        ext = self.extent(spec.d)
        if np.any(ext >= spec.L):
            raise DecospaceError("window does not fit inside a half-torus", module="amalgam", invariant="window-size")
        reach = np.floor(ext / spec.h + 1e-9).astype(int)
        cand = np.array(list(itertools.product(*[range(-r, r + 1) for r in reach])), dtype=int)
        return cand[self.contains(cand * spec.h)]


def _is_box(win: Window, spec: GridSpec) -> bool:
    if win.T is None:
        return True
    return bool(np.allclose(win.T, np.diag(np.diag(win.T))))


def maximal_function(f: SampledField, win: Window) -> SampledField:
    """``(M_Q f)(x) = max_{grid y in x+Q} |f(y)|``."""
    spec = f.spec
    a = np.abs(f.values)
    if _is_box(win, spec):
        reach = np.floor(win.extent(spec.d) / spec.h + 1e-9).astype(int)
        if np.any(win.extent(spec.d) >= spec.L):
            raise DecospaceError("window does not fit inside a half-torus", module="amalgam", invariant="window-size")
        out = ndimage.maximum_filter(a, size=tuple(2 * reach + 1), mode="wrap")
    else:
        out = np.zeros_like(a)
        for m in win.offsets(spec):
            np.maximum(out, _shift(a, m), out=out)
    return SampledField(spec, out)


def _shift(a: np.ndarray, m) -> np.ndarray:
    """``b(x) = a(x + h m)`` on the torus."""
    return np.roll(a, tuple(-int(v) for v in m), axis=tuple(range(a.ndim)))


def wiener_norm(f: SampledField, win: Window, p: float, v: WeightSpec = ONE) -> float:
    return weighted_lp_norm(maximal_function(f, win), p, v)


def oscillation(f: SampledField, win: Window) -> SampledField:
    """``osc_Q f(x) = max_{grid y, z in x+Q} |f(y) - f(z)|``.

    Real fields reduce to max minus min over the window; complex fields use a
    pairwise reduction over the window offsets.
    """
    spec = f.spec
    vals = f.values
    if np.all(vals.imag == 0):
        re = vals.real
        if _is_box(win, spec):
            if np.any(win.extent(spec.d) >= spec.L):
                raise DecospaceError("window does not fit inside a half-torus", module="amalgam", invariant="window-size")
            size = tuple(2 * np.floor(win.extent(spec.d) / spec.h + 1e-9).astype(int) + 1)
            hi = ndimage.maximum_filter(re, size=size, mode="wrap")
            lo = ndimage.minimum_filter(re, size=size, mode="wrap")
            return SampledField(spec, hi - lo)
        offs = win.offsets(spec)
        shifted = [_shift(re, m) for m in offs]
        return SampledField(spec, np.max(shifted, axis=0) - np.min(shifted, axis=0))
    offs = win.offsets(spec)
    shifted = [_shift(vals, m) for m in offs]
    out = np.zeros(spec.shape)
    for a in range(len(shifted)):
        for b in range(a + 1, len(shifted)):
            np.maximum(out, np.abs(shifted[a] - shifted[b]), out=out)
    return SampledField(spec, out)


def spectral_gradient_norm(f: SampledField) -> SampledField:
    """Pointwise Euclidean norm of the gradient, by spectral differentiation."""
    spec = f.spec
    xi = spec.xi_points()
    sq = np.zeros(spec.shape)
    for ax in range(spec.d):
        g = SampledField.from_hat(spec, 2j * np.pi * xi[..., ax] * f.hat).values
        sq += np.abs(g) ** 2
    return SampledField(spec, np.sqrt(sq))


def spectral_hessian_sup(f: SampledField) -> float:
    spec = f.spec
    xi = spec.xi_points()
    best = 0.0
    for a in range(spec.d):
        for b in range(spec.d):
            g = SampledField.from_hat(spec, (2j * np.pi) ** 2 * xi[..., a] * xi[..., b] * f.hat).values
            best = max(best, float(np.abs(g).max()))
    return best

"""Decomposition-space quasi-norms, frequency pieces and the clustering map."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bapu import Partition
from .covering import ModerateWeightSpec, StructuredCovering
from .errors import AliasingError
from .grid import ONE, SampledField, WeightSpec, lp_of_samples, weighted_lp_norm


@dataclass
class SpaceConfig:
    cov: StructuredCovering
    partition: Partition
    p: float = 2.0
    q: float = 2.0
    w: ModerateWeightSpec = field(default_factory=ModerateWeightSpec)
    v: WeightSpec = ONE

    def __post_init__(self):
        if not (self.p > 0 and self.q > 0):
            raise ValueError("p and q must be positive")
        if self.partition.cov != self.cov:
            raise ValueError("partition is subordinate to a different covering")

    @property
    def indices(self) -> list:
        return self.partition.indices

    def with_exponents(self, p: float, q: float) -> "SpaceConfig":
        return SpaceConfig(self.cov, self.partition, p, q, self.w, self.v)


def frequency_piece(f: SampledField, cfg: SpaceConfig, i) -> SampledField:
    """``F^{-1}(phi_i f^)``."""
    spec = f.spec
    phi = cfg.partition.on_grid(i, spec)
    prod = phi * f.hat
    scale = float(np.abs(f.hat).max(initial=0.0))
    if scale > 0:
        active = np.abs(prod) > 1e-13 * scale
        if np.any(active & ~spec.trusted_mask()):
            raise AliasingError(f"piece {i!r} reaches outside the trusted band", module="decomp", invariant="trusted-band")
    return SampledField.from_hat(spec, prod)


def sequence_norm(values: dict, q: float, w=None) -> float:
    """Weighted ``l^q`` (quasi-)norm of a finitely supported sequence given as a dict."""
    if not values:
        return 0.0
    arr = np.array([abs(values[i]) * (w(i) if w is not None else 1.0) for i in values])
    return lp_of_samples(arr, q)


@dataclass
class NormReport:
    value: float
    piece_norms: dict
    weights: dict
    sup_index: object = None
    sup_interior: bool = True


def decomp_norm_report(f: SampledField, cfg: SpaceConfig) -> NormReport:
    pieces = {i: weighted_lp_norm(frequency_piece(f, cfg, i), cfg.p, cfg.v) for i in cfg.indices}
    weights = {i: cfg.w(i) for i in cfg.indices}
    value = sequence_norm(pieces, cfg.q, cfg.w)
    sup_index = max(pieces, key=lambda i: weights[i] * pieces[i]) if pieces else None
    edge = set(cfg.indices[-1:]) if cfg.cov.kind == "besov" else _edge_indices(cfg)
    return NormReport(value, pieces, weights, sup_index, sup_index not in edge)


def _edge_indices(cfg: SpaceConfig) -> set:
    from .covering import clusters

    cl = clusters(cfg.cov, cfg.partition.extended)
    have = set(cfg.indices)
    return {i for i in cfg.indices if any(l not in have for l in cl[i])}


def decomp_norm(f: SampledField, cfg: SpaceConfig) -> float:
    """``|| (||F^{-1}(phi_i f^)||_{L^p_v})_i ||_{l^q_w}``."""
    return decomp_norm_report(f, cfg).value


def clustering_map(c: dict, cl: dict) -> dict:
    """``(Gamma c)_i = sum_{l in i*} c_l``."""
    return {i: sum(c[l] for l in cl[i] if l in c) for i in c}


def clustering_bound(c_qw: float, n_q: int, q: float) -> float:
    """Norm bound ``C_{Q,w} N_Q^{1 + 1/q}`` of the clustering map on ``l^q_w``."""
    return c_qw * n_q ** (1.0 + (0.0 if math.isinf(q) else 1.0 / q))


def quasi_triangle_constant(p: float, q: float) -> float:
    return 2.0 ** (max(0.0, 1.0 / p - 1.0) + max(0.0, 1.0 / q - 1.0))

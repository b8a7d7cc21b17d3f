"""Turn an :class:`ExperimentConfig` into grids, coverings, partitions and frame systems."""

from __future__ import annotations

import copy
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .bapu import BumpSpec, Partition, build_partition
from .config import ExperimentConfig
from .covering import (
    ModerateWeightSpec,
    StructuredCovering,
    TruncatedIndexSet,
    build_alpha_covering,
    build_besov_covering,
    build_uniform_covering,
    sub_truncation,
    truncate,
)
from .decomp import SpaceConfig
from .frames import FrameSystem
from .errors import MemoryBudgetError
from .grid import GridSpec, PrototypeSpec, SampledField, WeightSpec, random_bandlimited, resample


def make_covering(cfg: ExperimentConfig) -> StructuredCovering:
    c, d = cfg.covering, cfg.grid.d
    if c.kind == "besov":
        return build_besov_covering(d)
    if c.kind == "uniform":
        return build_uniform_covering(d, c.r)
    return build_alpha_covering(d, c.alpha, c.r)


def make_prototype(cfg: ExperimentConfig) -> PrototypeSpec:
    p, d = cfg.prototype, cfg.grid.d
    if p.kind == "gaussian":
        return PrototypeSpec.gaussian(p.a, d)
    if p.kind == "bspline":
        return PrototypeSpec.bspline(p.order, d)
    return PrototypeSpec.cutoff(p.N, p.R, p.s, d)


def make_index_set(cfg: ExperimentConfig, cov: StructuredCovering, xi: float | None = None) -> TruncatedIndexSet:
    idx = truncate(cov, cfg.covering.xi if xi is None else xi)
    if cov.kind == "besov" and cfg.covering.j_max is not None:
        idx = sub_truncation(idx, range(cfg.covering.j_max + 1))
    return idx


@dataclass
class Setup:
    """Everything a pipeline needs, built lazily from one configuration."""

    cfg: ExperimentConfig

    @cached_property
    def grid(self) -> GridSpec:
        g = self.cfg.grid
        return GridSpec(g.d, g.n, float(g.L))

    @cached_property
    def cov(self) -> StructuredCovering:
        return make_covering(self.cfg)

    @cached_property
    def idx(self) -> TruncatedIndexSet:
        return make_index_set(self.cfg, self.cov)

    @cached_property
    def bump(self) -> BumpSpec:
        return BumpSpec(self.cfg.partition.kind, self.cfg.partition.N)

    @cached_property
    def partition(self) -> Partition:
        return build_partition(self.cov, self.idx, self.bump, self.grid)

    @cached_property
    def prototype(self) -> PrototypeSpec:
        return make_prototype(self.cfg)

    @cached_property
    def weight(self) -> ModerateWeightSpec:
        return ModerateWeightSpec.for_covering(self.cov, self.cfg.space.s)

    @cached_property
    def v(self) -> WeightSpec:
        mu = self.cfg.space.mu
        return WeightSpec("bracket", mu) if mu else WeightSpec()

    def space(self, p: float | None = None, q: float | None = None) -> SpaceConfig:
        s = self.cfg.space
        return SpaceConfig(self.cov, self.partition, s.p if p is None else p, s.q if q is None else q, self.weight, self.v)

    def system(self, delta: float | None = None) -> FrameSystem:
        return FrameSystem(self.cov, self.idx, self.prototype, self.cfg.frame.delta if delta is None else delta, self.grid)

    def fields(self, count: int | None = None, seed: int | None = None) -> list[SampledField]:
        seed = self.cfg.seeds.seed if seed is None else seed
        count = self.cfg.seeds.fields if count is None else count
        return [random_bandlimited(self.grid, np.random.default_rng([seed, k])) for k in range(count)]

    def enclosing(self, budget: int = 1 << 22) -> "Setup":
        """Same experiment on a grid refined until every covering set of the truncation fits its trusted band."""
        g = self.grid
        reach = max(self.cov.region(i).sup_norm_extent() for i in self.idx)
        n = g.n
        while g.trusted < reach:
            n *= 2
            g = GridSpec(g.d, n, g.L)
            if g.size > budget:
                raise MemoryBudgetError("no grid within budget encloses the covering sets", module="frames", invariant="memory-budget")
        cfg = copy.deepcopy(self.cfg)
        cfg.grid.n = n
        return Setup(cfg)

    def lift(self, f: SampledField) -> SampledField:
        """Move a field from any grid of the same torus onto this setup's grid."""
        return f if f.spec == self.grid else resample(f, self.grid)

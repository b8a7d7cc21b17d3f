"""Invariant suites run by ``decospace verify``; each returns a list of named checks."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import amalgam, bapu, covering, criteria, decomp, frames
from .experiment import Setup
from .grid import GridSpec, PrototypeSpec, SampledField, interpolate, random_bandlimited, weighted_lp_norm


@dataclass
class Check:
    suite: str
    name: str
    ok: bool
    value: float
    bound: float

    def as_row(self) -> dict:
        return {"suite": self.suite, "check": self.name, "ok": self.ok, "value": self.value, "bound": self.bound}


def _le(suite, name, value, bound) -> Check:
    value = float(value)
    return Check(suite, name, bool(value <= bound), value, float(bound))


def _ge(suite, name, value, bound) -> Check:
    value = float(value)
    return Check(suite, name, bool(value >= bound), value, float(bound))


def suite_grid(setup: Setup, rng: np.random.Generator) -> list[Check]:
    g = setup.grid
    f = random_bandlimited(g, rng)
    back = SampledField.from_hat(g, f.hat)
    out = [_le("grid", "dft round trip", (back - f).l2_norm() / f.l2_norm(), 1e-12)]
    parseval = abs(f.l2_norm() ** 2 - float(np.sum(np.abs(f.hat) ** 2)) * g.dxi**g.d) / f.l2_norm() ** 2
    out.append(_le("grid", "parseval", parseval, 1e-12))
    pts = g.x_points().reshape(-1, g.d)[:: max(1, g.size // 64)]
    err = np.abs(interpolate(f, pts) - f.values.reshape(-1)[:: max(1, g.size // 64)]).max()
    out.append(_le("grid", "interpolation reproduces samples", err / np.abs(f.values).max(), 1e-10))
    gauss = PrototypeSpec.gaussian(1.0, g.d)
    sampled = SampledField(g, gauss.space(g.x_points()))
    rel = np.abs(sampled.hat - gauss.hat(g.xi_points())).max()
    out.append(_le("grid", "gaussian transform matches closed form", rel, 1e-10))
    return out


def suite_covering(setup: Setup, rng: np.random.Generator) -> list[Check]:
    g, cov = setup.grid, setup.cov
    idx = covering.truncate(cov, max(setup.cfg.covering.xi, g.trusted))
    rep = covering.covering_check(cov, idx, g)
    out = [_ge("covering", "trusted band covered", float(rep.covered and rep.inner_covered), 1.0)]
    cl = covering.clusters(cov, idx)
    sym = all(i in cl[l] for i, nb in cl.items() for l in nb)
    out.append(_ge("covering", "clusters symmetric", float(sym), 1.0))
    consts = covering.admissibility_constants(cov, idx, cl)
    out.append(_le("covering", "finite overlap N_Q", consts.N_Q, 64))
    out.append(_le("covering", "weight moderateness", covering.weight_moderateness(cov, setup.weight, idx, cl), 1e6))
    return out


def suite_bapu(setup: Setup, rng: np.random.Generator) -> list[Check]:
    g, part = setup.grid, setup.partition
    mask = part.covered_mask(g) & g.trusted_mask()
    total = part.sum_on_grid(g)
    out = [_le("bapu", "partition sums to one on the band", np.abs(total[mask] - 1).max(initial=0.0), 1e-12)]
    low = min(float(part.on_grid(i, g).min()) for i in part.indices)
    out.append(_ge("bapu", "nonnegative", low, -1e-15))
    for N in range(1, 7):
        ramp = bapu.ramp_poly(N)
        t = np.linspace(0, 1, 20001)
        worst = max(np.abs(ramp(t, l)).max() for l in range(N + 1))
        out.append(_le("bapu", f"ramp derivative bound N={N}", worst, 24.0 ** (N + 1) * math.factorial(N + 1)))
    return out


def suite_amalgam(setup: Setup, rng: np.random.Generator) -> list[Check]:
    g = setup.grid
    f = random_bandlimited(g, rng)
    win = amalgam.Window.cube(min(1.0, g.L / 4))
    mf = amalgam.maximal_function(f, win)
    out = [_ge("amalgam", "maximal function dominates", float((mf.values.real - np.abs(f.values)).min()), -1e-15)]
    out.append(_ge("amalgam", "wiener norm dominates L2", amalgam.wiener_norm(f, win, 2.0) - weighted_lp_norm(f, 2.0), -1e-12))
    osc = amalgam.oscillation(f, win)
    out.append(_le("amalgam", "oscillation at most twice the maximal function", float((osc.values.real - 2 * mf.values.real).max()), 1e-12))
    return out


def suite_decomp(setup: Setup, rng: np.random.Generator) -> list[Check]:
    sp = setup.space(2.0, 2.0)
    f, g2 = random_bandlimited(setup.grid, rng), random_bandlimited(setup.grid, rng)
    nf = decomp.decomp_norm(f, sp)
    out = [_le("decomp", "homogeneity", abs(decomp.decomp_norm(f * 3.0, sp) - 3 * nf) / nf, 1e-12)]
    lhs = decomp.decomp_norm(f + g2, sp)
    rhs = decomp.quasi_triangle_constant(2, 2) * (nf + decomp.decomp_norm(g2, sp))
    out.append(_le("decomp", "triangle inequality", lhs / rhs, 1.0 + 1e-12))
    ratio = nf / f.l2_norm()
    out.append(_le("decomp", "L2 equivalence upper", ratio, 10.0))
    out.append(_ge("decomp", "L2 equivalence lower", ratio, 0.1))
    return out


def suite_frames(setup: Setup, rng: np.random.Generator) -> list[Check]:
    system = setup.system()
    f = random_bandlimited(setup.grid, rng)
    C = frames.analyze(f, system)
    D = frames.CoefficientArray.random(system, rng)
    lhs = C.pairing(D)
    rhs = f.inner(frames.synthesize(D, system))
    out = [_le("frames", "synthesis is the adjoint of analysis", abs(lhs - rhs) / max(abs(lhs), 1e-300), 1e-10)]
    rec = frames.semidiscrete_reconstruct(f, system, setup.partition)
    out.append(_le("frames", "semi-discrete reconstruction", (rec - f).l2_norm() / f.l2_norm(), 1e-8))
    nv = frames.nonvanishing_check(system)
    out.append(_ge("frames", "prototype transform nonvanishing", float(nv.passed), 1.0))
    return out


def suite_criteria(setup: Setup, rng: np.random.Generator) -> list[Check]:
    out = []
    for d in (1, 2, 3):
        out.append(_le("criteria", f"lattice series d={d}", criteria.lattice_series_bound(d).upper, 6.0**d))
    A = rng.random((12, 12))
    out.append(_le("criteria", "Schur bound dominates l2 norm", np.linalg.norm(A, 2) / criteria.schur_operator_bound(A, 2.0), 1.0 + 1e-12))
    th = criteria.alpha_thresholds(1, 0.5, 1, 1, 0, 0, 0.5)
    out.append(_le("criteria", "alpha threshold N0 at alpha=1/2", abs(th["N0_frame"] - 7.0), 1e-12))
    g = GridSpec(1, 1024, 16.0)
    _, _, rep = criteria.factorize(PrototypeSpec.gaussian(1.0), 1.0, g)
    out.append(_le("criteria", "factorization residual", rep.relative_error, 1e-8))
    return out


SUITES = {
    "grid": suite_grid,
    "covering": suite_covering,
    "bapu": suite_bapu,
    "amalgam": suite_amalgam,
    "decomp": suite_decomp,
    "frames": suite_frames,
    "criteria": suite_criteria,
}


def run_suites(setup: Setup, names, seed: int) -> list[Check]:
    checks: list[Check] = []
    for k, name in enumerate(names):
        checks.extend(SUITES[name](setup, np.random.default_rng([seed, k])))
    return checks

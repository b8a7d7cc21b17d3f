"""Command-line runner: ``decospace <command> [--config FILE] [--seed N] [--out-dir DIR] [--emit json|csv]``.

Exit codes: 0 success, 1 invariant failure, 2 configuration error, 3 numeric guard.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import bapu, covering, criteria, decomp, frames
from .config import ExperimentConfig, load_config, validate
from .errors import ConfigError, DecospaceError, InvariantFailure, NumericGuardError
from .experiment import Setup
from .grid import SampledField
from .verify import SUITES, run_suites

EXIT_OK, EXIT_INVARIANT, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def _index_key(i) -> str:
    return str(i) if isinstance(i, (int, np.integer)) else ":".join(str(x) for x in i)


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k) if not isinstance(k, tuple) else _index_key(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


class Report:
    """Collects a JSON summary and optional CSV rows, written once at the end."""

    def __init__(self, command: str, cfg: ExperimentConfig, seed: int):
        self.command = command
        self.summary: dict = {"command": command, "seed": seed, "config": cfg.as_dict()}
        self.rows: list[dict] = []

    def csv_text(self) -> str:
        if not self.rows:
            return ""
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(self.rows[0]), lineterminator="\n")
        writer.writeheader()
        for row in self.rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
        return buf.getvalue()

    def json_text(self) -> str:
        return json.dumps(_clean(self.summary), indent=2, sort_keys=True) + "\n"

    def write(self, out_dir: Path, emit: str, stream) -> None:
        out_dir.mkdir(parents=True, exist_ok=True)
        name = self.command.replace(" ", "_")
        (out_dir / f"{name}.json").write_text(self.json_text())
        if self.rows:
            (out_dir / f"{name}.csv").write_text(self.csv_text())
        stream.write(self.csv_text() if emit == "csv" and self.rows else self.json_text())


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_covering(setup: Setup, args, rep: Report) -> int:
    cov, g = setup.cov, setup.grid
    idx = setup.idx
    cl = covering.clusters(cov, idx)
    consts = covering.admissibility_constants(cov, idx, cl)
    full = covering.truncate(cov, max(setup.cfg.covering.xi, g.trusted))
    chk = covering.covering_check(cov, full, g)
    rep.summary.update(
        indices=[_index_key(i) for i in idx],
        clusters={_index_key(i): [_index_key(l) for l in nb] for i, nb in cl.items()},
        N_Q=consts.N_Q,
        R_Q=consts.R_Q,
        C_Q=consts.C_Q,
        C_Qw=covering.weight_moderateness(cov, setup.weight, idx, cl),
        covered=chk.covered,
        inner_covered=chk.inner_covered,
        uncovered=[list(map(float, np.atleast_1d(u))) for u in chk.uncovered[:10]],
    )
    for i in idx:
        rep.rows.append({"index": _index_key(i), "scale": cov.scale(i), "det": cov.det(i), "cluster_size": len(cl[i])})
    return EXIT_OK if chk.covered and chk.inner_covered else EXIT_INVARIANT


def cmd_bapu(setup: Setup, args, rep: Report) -> int:
    part, g = setup.partition, setup.grid
    mask = part.covered_mask(g) & g.trusted_mask()
    sum_err = float(np.abs(part.sum_on_grid(g)[mask] - 1).max(initial=0.0))
    big = setup.enclosing().grid
    const, per = bapu.bapu_constant(part, setup.cfg.space.p, setup.v.companion(), big)
    sups = bapu.partition_derivative_sups(part, args.order)
    rep.summary.update(
        bapu_constant=const,
        sum_error=sum_err,
        p=setup.cfg.space.p,
        constant_grid_n=big.n,
        derivative_sups={",".join(map(str, a)): v for a, v in sups.items()},
    )
    for i, val in per.items():
        rep.rows.append({"index": _index_key(i), "value": val})
    return EXIT_OK if sum_err <= 1e-12 else EXIT_INVARIANT


def cmd_norm(setup: Setup, args, rep: Report) -> int:
    sp = setup.space()
    if args.input:
        fields = [setup.lift(SampledField.load(args.input))]
    else:
        fields = setup.fields()
    norms = []
    for k, f in enumerate(fields):
        r = decomp.decomp_norm_report(f, sp)
        norms.append(r.value)
        for i in sp.indices:
            rep.rows.append({"field": k, "index": _index_key(i), "w": r.weights[i], "piece_norm": r.piece_norms[i]})
        rep.summary.setdefault("sup_index", []).append(_index_key(r.sup_index))
        rep.summary.setdefault("sup_interior", []).append(r.sup_interior)
    rep.summary.update(p=sp.p, q=sp.q, norms=norms, l2_norms=[f.l2_norm() for f in fields])
    return EXIT_OK


def cmd_frame(setup: Setup, args, rep: Report) -> int:
    system = setup.system()
    space = setup.cfg.space
    action = args.action
    rep.summary["delta"] = system.delta
    if action == "analyze":
        f = setup.fields(1)[0]
        C = frames.analyze(f, system)
        rep.summary.update(coefficients=C.size(), coeff_norm=frames.coefficient_norm(C, space.p, space.q, setup.weight, setup.v, setup.cov))
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "coefficients.dscf").write_bytes(C.to_bytes())
        return EXIT_OK
    if action == "synthesize":
        if args.coefficients:
            C = frames.CoefficientArray.from_bytes(Path(args.coefficients).read_bytes())
        else:
            C = frames.CoefficientArray.random(system, np.random.default_rng(args.seed))
        f = frames.synthesize(C, system)
        rep.summary.update(l2_norm=f.l2_norm(), coefficients=C.size())
        return EXIT_OK
    if action == "reconstruct":
        tol, max_iter = setup.cfg.frame.tol, setup.cfg.frame.max_iter
        worst = 0.0
        for k, f in enumerate(setup.fields()):
            row = {"field": k, "method": args.method}
            if args.method == "semidiscrete":
                rec = frames.semidiscrete_reconstruct(f, system, setup.partition)
                row["iterations"] = 0
            elif args.method == "neumann":
                _, rec, nrep = frames.neumann_reconstruct(f, system, setup.partition, tol, max_iter)
                row["iterations"] = nrep.iterations
            else:
                rec, nrep = frames.banach_reconstruct_report(frames.analyze(f, system), system, setup.partition, tol, max_iter)
                row["iterations"] = nrep.iterations
            row["error"] = (rec - f).l2_norm() / f.l2_norm()
            worst = max(worst, row["error"])
            rep.rows.append(row)
        rep.summary.update(method=args.method, max_error=worst)
        return EXIT_OK if worst <= args.tolerance else EXIT_INVARIANT
    A, B = frames.frame_bounds_l2(system, setup.cfg.frame.trials, np.random.default_rng(args.seed))
    rep.summary.update(A=A, B=B, ratio=B / A if A > 0 else math.inf)
    return EXIT_OK


def cmd_criteria(setup: Setup, args, rep: Report) -> int:
    c = setup.cfg.criteria
    xi = args.truncation if args.truncation is not None else c.xi
    proto = setup.prototype
    if c.kind == "atomic":
        proto = criteria.FactorPrototype(proto, (setup.grid.d + 1 + c.eps) / 2.0)
    res = criteria.check_criteria(
        setup.cov, xi, proto, p0=c.p0, q0=c.q0, s_range=(c.s0, c.s1), mu0=c.mu0, eps=c.eps, nodes=c.nodes, kind=c.kind, threshold=c.threshold
    )
    idx = covering.truncate(setup.cov, xi)
    consts = covering.admissibility_constants(setup.cov, idx)
    K = abs(c.mu0)
    delta0 = criteria.pessimistic_delta0(setup.grid.d, K, consts.R_Q, 1.0, 1.0, 1.0, 1.0, max(res.C1, res.C2))
    rep.summary.update(
        params=res.params,
        C1=res.C1,
        C2=res.C2,
        stability=res.stability,
        verdict=res.verdict,
        pessimistic_delta0=delta0,
        pessimistic_delta0_note="pessimistic theoretical bound over the truncation only; informational",
    )
    for s, sums in res.per_s.items():
        rep.rows.append({"s": s, "C1": sums.C1, "C2": sums.C2, "stability": sums.stability})
    return EXIT_OK


def sweep_rows(setup: Setup, deltas) -> tuple[list[dict], str]:
    space = setup.cfg.space
    fields = setup.fields()
    sp = setup.space()
    dnorms = [decomp.decomp_norm(f, sp) for f in fields]
    rows = []
    for delta in sorted(deltas, reverse=True):
        system = setup.system(delta)
        duals = frames.DualWindows(system)
        residual = max(frames.atomic_residual(f, system, setup.partition, duals) for f in fields)
        iters = ""
        if residual < 1:
            # iterates carry lattice alias copies up to the grid edge; they are exact grid fields
            iters = max(
                frames.neumann_reconstruct(f, system, setup.partition, setup.cfg.frame.tol, setup.cfg.frame.max_iter, duals, guard_iterates=False)[2].iterations
                for f in fields
            )
        cn = [frames.coefficient_norm(frames.analyze(f, system), space.p, space.q, setup.weight, setup.v, setup.cov) for f in fields]
        ratios = [a / b for a, b in zip(cn, dnorms)]
        rows.append({"delta": delta, "residual": residual, "iters": iters, "coeff_norm": float(np.mean(cn)), "decomp_norm": float(np.mean(dnorms)), "ratio": float(np.mean(ratios))})
    return rows, sweep_verdict(rows)


def sweep_verdict(rows: list[dict]) -> str:
    if len(rows) < 3:
        return "insufficient points"
    res = [r["residual"] for r in rows]
    its = [r["iters"] for r in rows if r["iters"] != ""]
    mono = all(b <= a for a, b in zip(res, res[1:]))
    its_ok = all(b <= a for a, b in zip(its, its[1:]))
    return "monotone" if mono and its_ok else "non-monotone"


def cmd_sweep(setup: Setup, args, rep: Report) -> int:
    deltas = [float(x) for x in args.deltas.split(",")] if args.deltas else setup.cfg.frame.deltas
    for d in deltas:
        if not 0 < d <= 1:
            raise ConfigError(f"--deltas: density must lie in (0, 1], got {d}", invariant="consistency")
    rows, verdict = sweep_rows(setup, deltas)
    rep.rows = rows
    rep.summary.update(verdict=verdict, deltas=sorted(deltas, reverse=True))
    return EXIT_INVARIANT if verdict == "non-monotone" else EXIT_OK


def cmd_verify(setup: Setup, args, rep: Report) -> int:
    names = list(SUITES) if args.suite == "all" else [args.suite]
    checks = run_suites(setup, names, args.seed)
    rep.rows = [c.as_row() for c in checks]
    failed = [f"{c.suite}: {c.name}" for c in checks if not c.ok]
    rep.summary.update(suites=names, checks=len(checks), failed=failed)
    return EXIT_INVARIANT if failed else EXIT_OK


COMMANDS = {
    "covering": cmd_covering,
    "bapu": cmd_bapu,
    "norm": cmd_norm,
    "frame": cmd_frame,
    "criteria": cmd_criteria,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
}


def apply_covering_flags(cfg: ExperimentConfig, args) -> None:
    for flag, section, key in (("kind", "covering", "kind"), ("d", "grid", "d"), ("alpha", "covering", "alpha"), ("r", "covering", "r"), ("xi", "covering", "xi")):
        val = getattr(args, flag)
        if val is not None:
            setattr(getattr(cfg, section), key, val)
    if args.kind is not None and args.kind != "besov":
        cfg.covering.j_max = None
    validate(cfg)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML experiment configuration")
    common.add_argument("--seed", type=int, help="override [seeds].seed")
    common.add_argument("--out-dir", help="override [output].dir")
    common.add_argument("--emit", choices=("json", "csv"), help="format printed to stdout")

    parser = argparse.ArgumentParser(prog="decospace", description="Decomposition-space frames and admissibility checks")
    sub = parser.add_subparsers(dest="command", required=True)
    co = sub.add_parser("covering", parents=[common], help="covering constants and band coverage")
    co.add_argument("--kind", choices=("besov", "alpha", "uniform"))
    co.add_argument("--d", type=int)
    co.add_argument("--alpha", type=float)
    co.add_argument("--r", type=float)
    co.add_argument("--xi", type=float)
    ba = sub.add_parser("bapu", parents=[common], help="partition of unity constant and derivative table")
    ba.add_argument("--bump-kind", choices=("poly", "smooth"), help="override [partition].kind")
    ba.add_argument("--bump-order", type=int, help="override [partition].N")
    ba.add_argument("--order", type=int, default=2, help="largest derivative order in the table")
    no = sub.add_parser("norm", parents=[common], help="decomposition norms of a field file or of seeded test fields")
    no.add_argument("--input", help="DSPF field file; defaults to [seeds].fields random fields")
    fr = sub.add_parser("frame", parents=[common], help="frame pipelines")
    fr.add_argument("action", choices=("analyze", "synthesize", "reconstruct", "bounds"))
    fr.add_argument("--method", choices=("semidiscrete", "neumann", "banach"), default="semidiscrete")
    fr.add_argument("--coefficients", help="DSCF file for synthesize")
    fr.add_argument("--tolerance", type=float, default=1e-6, help="pass threshold for reconstruct")
    cr = sub.add_parser("criteria", parents=[common], help="Schur-criteria admissibility check")
    cr.add_argument("--truncation", type=float, help="frequency truncation half-width")
    sw = sub.add_parser("sweep", parents=[common], help="atomic residual and iterations across densities")
    sw.add_argument("--deltas", help="comma-separated densities")
    ve = sub.add_parser("verify", parents=[common], help="invariant suites")
    ve.add_argument("suite", choices=(*SUITES, "all"))
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.command == "covering":
            apply_covering_flags(cfg, args)
        if args.command == "bapu":
            if args.bump_kind:
                cfg.partition.kind = args.bump_kind
            if args.bump_order is not None:
                cfg.partition.N = args.bump_order
            validate(cfg)
        if args.seed is not None:
            cfg.seeds.seed = args.seed
        args.seed = cfg.seeds.seed
        args.out_dir = args.out_dir or cfg.output.dir
        emit = args.emit or cfg.output.emit
        setup = Setup(cfg)
        name = args.command + (f" {args.action}" if args.command == "frame" else "")
        rep = Report(name, cfg, args.seed)
        code = COMMANDS[args.command](setup, args, rep)
        rep.summary["exit_code"] = code
        rep.write(Path(args.out_dir), emit, sys.stdout)
        return code
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericGuardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InvariantFailure, DecospaceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())

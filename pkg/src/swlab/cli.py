"""Command-line batch runner.

Subcommands write their records into ``--out``; JSON-lines bodies depend only
on the configuration and seed. Exit status:

    0  success
    1  invalid input or configuration
    3  a smallness gate failed
    4  the height approached the vacuum floor
    5  the solver diverged
    6  inconclusive (no convergence, or an experiment run failed)
    7  a verification verdict failed
"""

from __future__ import annotations

import argparse
import math
import re
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .besov import (
    BesovSpec,
    HybridBesovSpec,
    WeightParams,
    norm_record,
    plain_time_norm,
    time_space_norm,
    weighted_norm_E_hybrid,
)
from .config import RunConfig, load_config
from .errors import ConfigurationError, GateViolation, SolverDivergence, SwlabError, VacuumProximityError
from .io import JsonlWriter, SnapshotError, load_trajectory, read_snapshot, save_trajectory, write_csv
from .spectral import Grid2D, SpectralField2D, VectorField2D, dyadic_block, forward_transform, l2_norm, lp_norm

__all__ = ["main", "build_parser", "builtin_data", "parse_norm", "EXIT"]

EXIT = {
    "ok": 0,
    "error": 1,
    "gate": 3,
    "vacuum": 4,
    "diverged": 5,
    "inconclusive": 6,
    "failed": 7,
}


# --------------------------------------------------------------------------
# Data generators
# --------------------------------------------------------------------------


def _smooth_random(grid: Grid2D, rng: np.random.Generator, amplitude: float) -> SpectralField2D:
    """Gaussian-filtered random field with ``max |f| = amplitude``, supported in ``|xi| <= 1``."""
    r = grid.radius
    c = (rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)) * (r <= 1.0) * (r > 0) * np.exp(-r ** 2)
    f = SpectralField2D.from_coefficients(grid, c, 0.0)
    peak = float(np.max(np.abs(f.values())))
    return f * (amplitude / peak) if peak > 0 else f


def builtin_data(cfg: RunConfig, seed: int | None = None) -> tuple[SpectralField2D, VectorField2D]:
    """Smooth random initial data ``(h0, u0)`` with peak value ``iteration.amplitude``."""
    grid = cfg.make_grid()
    rng = np.random.default_rng([cfg.corpus.seed if seed is None else seed, 11])
    a = cfg.iteration.amplitude
    h0 = _smooth_random(grid, rng, a)
    u0 = VectorField2D(_smooth_random(grid, rng, a), _smooth_random(grid, rng, a))
    return h0, u0


def builtin_field(name: str, grid: Grid2D, k: int, seed: int) -> SpectralField2D:
    """``zero``, ``mode`` (one cosine at radius ``(3/2) 2^k``) or ``random``."""
    if name == "zero":
        return grid.zero()
    if name == "mode":
        m = int(round(1.5 * 2.0 ** k / grid.spacing))
        x1, _ = grid.coordinates()
        return forward_transform(np.cos(m * grid.spacing * x1), grid)
    if name == "random":
        return _smooth_random(grid, np.random.default_rng([seed, 13]), 1.0)
    raise ConfigurationError(f"unknown builtin field {name!r}")


# --------------------------------------------------------------------------
# Norm names
# --------------------------------------------------------------------------

_SPACE = re.compile(r"^(?:B(?P<s>-?[\d.]+)(?:,(?P<r>inf|[\d.]+))?|H(?P<hs>-?[\d.]+),(?P<hsig>-?[\d.]+))$")


def _space(text: str):
    m = _SPACE.match(text)
    if not m:
        raise ConfigurationError(f"cannot parse space {text!r} (use B<s>, B<s>,<r> or H<s>,<sigma>)")
    if m.group("s") is not None:
        r = m.group("r")
        return BesovSpec(float(m.group("s")), 2.0, math.inf if r == "inf" else float(r or 1.0))
    return HybridBesovSpec(float(m.group("hs")), float(m.group("hsig")))


def _rho(text: str) -> float:
    return math.inf if text == "inf" else float(text)


def parse_norm(name: str):
    """Parse ``<component>.<norm>``.

    ``<norm>`` is ``L<rho>:<space>`` (time norm outside), ``Lt<rho>:<space>``
    (Chemin-Lerner, time norm inside), ``E<s1>,<s2>`` (weighted) or a plain
    ``<space>`` evaluated at the last sample; spaces are ``B<s>``,
    ``B<s>,<r>`` and the hybrid ``H<s>,<sigma>``.
    """
    comp, _, rest = name.partition(".")
    if not rest:
        raise ConfigurationError(f"norm {name!r} needs a component prefix such as 'h.'")
    if rest.startswith("Lt"):
        rho, _, sp = rest[2:].partition(":")
        return comp, "tilde", _rho(rho), _space(sp)
    if rest.startswith("L"):
        rho, _, sp = rest[1:].partition(":")
        return comp, "bochner", _rho(rho), _space(sp)
    if rest.startswith("E"):
        s1, _, s2 = rest[1:].partition(",")
        return comp, "weighted", float(s1), float(s2 or s1)
    return comp, "final", None, _space(rest)


DEFAULT_NORMS = ("u.Linf:B0", "u.L1:B2", "u.L2:B1", "h.Linf:H0,1", "h.L1:H2,1", "h.E0,1")


def evaluate_norm(traj, name: str, cfg: RunConfig) -> dict:
    comp, kind, a, b = parse_norm(name)
    p = traj.partition
    if comp not in traj.components:
        raise ConfigurationError(f"trajectory has no component {comp!r}")
    if kind == "tilde":
        value = time_space_norm(traj, a, b, comp)
    elif kind == "bochner":
        value = plain_time_norm(traj, a, b, comp)
    elif kind == "weighted":
        wp = WeightParams(c=cfg.weights.c, T=traj.horizon, k_max=p.k_max)
        value = weighted_norm_E_hybrid(traj, a, b, wp, comp)
        b = {"kind": "weighted", "s1": a, "s2": b, "c": cfg.weights.c}
    else:
        ks = np.arange(p.k_min, p.k_max + 1)
        blocks = traj.blocks(comp)[-1]
        w = b.weights(ks) * blocks
        r = b.r
        value = float(np.max(w)) if math.isinf(r) else float(np.sum(w ** r) ** (1.0 / r))
    return norm_record(name, b, value, p, component=comp, T=traj.horizon)


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------


def _out_dir(args, cfg: RunConfig) -> Path:
    d = Path(args.out or cfg.output.directory)
    d.mkdir(parents=True, exist_ok=True)
    return d


def cmd_decompose(args, cfg: RunConfig) -> int:
    p = cfg.make_partition()
    if args.input:
        f = read_snapshot(args.input)
        if isinstance(f, VectorField2D):
            raise ConfigurationError("decompose expects a scalar snapshot")
        if f.grid != p.grid:
            raise ConfigurationError("snapshot grid differs from the configured grid")
    else:
        f = builtin_field(args.builtin, p.grid, args.k, cfg.corpus.seed)
    rows = []
    area = p.grid.period ** 2
    power = np.abs(f.coefficients) ** 2
    for k in p.block_indices:
        b = dyadic_block(f, k, p)
        pairing = area * float(np.sum(p.mask(k) * power))
        rows.append((k, l2_norm(b), lp_norm(b, math.inf), pairing))
    out = _out_dir(args, cfg)
    write_csv(out / "decompose.csv", ["k", "l2", "linf", "pairing"],
              [(k, repr(a), repr(b), repr(c)) for k, a, b, c in rows])
    total = area * float(np.sum(power))
    with open(out / "decompose.jsonl", "w") as fh:
        JsonlWriter(fh, "decompose").write({
            "schema": "swlab.decompose/1", "source": args.input or f"builtin:{args.builtin}",
            "blocks": [{"k": k, "l2": a, "linf": b, "pairing": c} for k, a, b, c in rows],
            "pairing_sum": sum(r[3] for r in rows), "l2_squared": total,
        })
    print(f"decompose: {len(rows)} blocks written to {out / 'decompose.csv'}")
    return EXIT["ok"]


def cmd_norms(args, cfg: RunConfig) -> int:
    try:
        traj = load_trajectory(args.input)
    except (SnapshotError, OSError, KeyError) as exc:
        raise ConfigurationError(f"cannot load trajectory {args.input}: {exc}") from exc
    names = args.norm or list(DEFAULT_NORMS)
    out = _out_dir(args, cfg)
    with open(out / "norms.jsonl", "w") as fh:
        w = JsonlWriter(fh, "norms")
        for name in names:
            w.write(evaluate_norm(traj, name, cfg))
    print(f"norms: {len(names)} records written to {out / 'norms.jsonl'}")
    return EXIT["ok"]


def cmd_solve(args, cfg: RunConfig) -> int:
    from .linear import LinearizedProblem, State, solve_linearized

    p = cfg.make_partition()
    h0, u0 = builtin_data(cfg, args.seed)
    v = u0 if args.transport == "data" else None
    problem = LinearizedProblem(State(0.0, h0, u0, cfg.solver.nu), cfg.solver.dt, cfg.weights.T, p, v=v,
                                c_cfl=cfg.solver.c_cfl,
                                weights=WeightParams(c=cfg.weights.c, T=cfg.weights.T, k_max=p.k_max))
    traj = solve_linearized(problem)
    out = _out_dir(args, cfg)
    save_trajectory(traj, out / "trajectory", nu=cfg.solver.nu, dt=cfg.solver.dt, snapshots=args.snapshots)
    with open(out / "solve.jsonl", "w") as fh:
        w = JsonlWriter(fh, "solve")
        w.write({"schema": "swlab.solve/1", "config": cfg.to_dict(), "transport": args.transport,
                 "monitors": traj.meta.get("monitors", {})})
        energy = traj.meta.get("energy")
        if energy is not None:
            for t, row in zip(traj.times, energy):
                w.write({"schema": "swlab.solve.energy/1", "t": float(t), "energy": [float(x) for x in row]})
    print(f"solve: {traj.times.size} samples, trajectory in {out / 'trajectory'}")
    return EXIT["ok"]


def cmd_iterate(args, cfg: RunConfig) -> int:
    from .iteration import picard_iterate

    p = cfg.make_partition()
    h0, u0 = builtin_data(cfg, args.seed)
    out = _out_dir(args, cfg)
    code = EXIT["ok"]
    report = traj = None
    try:
        report, traj = picard_iterate(h0, u0, cfg.iteration_config(), p)
    except GateViolation as exc:
        report, code = exc.report, EXIT["gate"]
    except VacuumProximityError as exc:
        report, code = exc.report, EXIT["vacuum"]
    except SolverDivergence:
        code = EXIT["diverged"]
    with open(out / "iterate.jsonl", "w") as fh:
        w = JsonlWriter(fh, "iterate")
        if report is not None:
            w.write_all(report.records())
            w.write(report.summary())
        else:
            w.write({"schema": "swlab.iterate.summary/1", "status": "diverged"})
    if traj is not None:
        save_trajectory(traj, out / "trajectory", nu=cfg.solver.nu, dt=cfg.solver.dt, snapshots=args.snapshots)
    if code == EXIT["ok"]:
        if not report.gates.all_pass:
            code = EXIT["gate"]
        elif not report.converged:
            code = EXIT["inconclusive"]
    status = report.status if report is not None else "diverged"
    print(f"iterate: status={status} iterations={len(report.iterates) if report else 0} exit={code}")
    return code


def cmd_verify(args, cfg: RunConfig) -> int:
    from .estimates import CorpusSpec, Corpus, run_harness

    spec = CorpusSpec(seed=cfg.corpus.seed, count=cfg.corpus.count, decay=cfg.corpus.decay)
    corpus = Corpus.default(spec, n_points=cfg.corpus.n_points)
    reports = run_harness(args.select, corpus=corpus, refine_count=cfg.corpus.refine_count,
                          c=cfg.weights.c, spec=spec)
    out = _out_dir(args, cfg)
    with open(out / "verify.jsonl", "w") as fh:
        w = JsonlWriter(fh, "verify")
        for r in reports:
            w.write_all(r.sample_records())
            w.write(r.summary())
    write_csv(out / "verify.csv",
              ["inequality", "params", "index", "ratio"],
              [(r.inequality, r.params, i, repr(x)) for r in reports for i, x in enumerate(r.ratios)])
    bad = [r for r in reports if not r.bounded]
    for r in reports:
        print(f"{r.inequality:32s} {r.params:40s} max={r.max_ratio:.4g} "
              f"drift={r.drift_corpus:.3f}/{r.drift_resolution:.3f} {r.verdict}")
    print(f"verify: {len(reports) - len(bad)}/{len(reports)} bounded")
    return EXIT["failed"] if bad else EXIT["ok"]


def cmd_uniqueness(args, cfg: RunConfig) -> int:
    from .estimates import uniqueness_experiment

    p = cfg.make_partition()
    h0, u0 = builtin_data(cfg, args.seed)
    rep = uniqueness_experiment(h0, u0, cfg.iteration_config(), p, args.perturbation,
                                seed=cfg.corpus.seed if args.seed is None else args.seed)
    out = _out_dir(args, cfg)
    with open(out / "uniqueness.jsonl", "w") as fh:
        w = JsonlWriter(fh, "uniqueness")
        w.write_all(rep.records())
        w.write(rep.summary())
    print(f"uniqueness: status={rep.status} Z(T)={rep.Z_T:.4g} bound={rep.osgood_bound:.4g} "
          f"identical={rep.identical}")
    if rep.status != "ok":
        return EXIT["inconclusive"]
    return EXIT["ok"] if rep.below_bound else EXIT["failed"]


# --------------------------------------------------------------------------
# Entry point
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI configuration file")
    common.add_argument("--seed", type=int, help="override corpus.seed")
    common.add_argument("--out", help="output directory (default: output.directory)")

    ap = argparse.ArgumentParser(prog="swlab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"swlab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    d = sub.add_parser("decompose", parents=[common], help="block spectrum of a field")
    d.add_argument("--input", help="scalar field snapshot (.swf)")
    d.add_argument("--builtin", default="random", choices=["zero", "mode", "random"])
    d.add_argument("--k", type=int, default=0, help="block of the builtin mode")

    n = sub.add_parser("norms", parents=[common], help="norms of a saved trajectory")
    n.add_argument("--input", required=True, help="trajectory directory")
    n.add_argument("--norm", action="append", help="norm name, repeatable (e.g. u.Linf:B0, h.Lt1:H2,1)")

    s = sub.add_parser("solve", parents=[common], help="linearized solve from builtin data")
    s.add_argument("--transport", default="none", choices=["none", "data"])
    s.add_argument("--snapshots", action="store_true", help="store field snapshots")

    it = sub.add_parser("iterate", parents=[common], help="Picard iteration from builtin data")
    it.add_argument("--snapshots", action="store_true", help="store field snapshots")

    v = sub.add_parser("verify", parents=[common], help="inequality harness")
    v.add_argument("--select", help="group, report id or prefix (default: all field harnesses)")

    u = sub.add_parser("uniqueness", parents=[common], help="perturbation experiment")
    u.add_argument("--perturbation", type=float, default=1e-10)
    u.add_argument("--select", help="experiment id (accepted for symmetry; only 'uniqueness' exists)")
    return ap


COMMANDS = {
    "decompose": cmd_decompose,
    "norms": cmd_norms,
    "solve": cmd_solve,
    "iterate": cmd_iterate,
    "verify": cmd_verify,
    "uniqueness": cmd_uniqueness,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config).with_seed(args.seed)
        if getattr(args, "select", None) not in (None, "uniqueness") and args.command == "uniqueness":
            raise ConfigurationError(f"unknown experiment {args.select!r}")
        return COMMANDS[args.command](args, cfg)
    except KeyError as exc:
        print(f"swlab: error: {exc.args[0] if exc.args else exc}", file=sys.stderr)
        return EXIT["error"]
    except (ConfigurationError, SnapshotError) as exc:
        print(f"swlab: error: {exc}", file=sys.stderr)
        return EXIT["error"]
    except SolverDivergence as exc:
        print(f"swlab: diverged: {exc}", file=sys.stderr)
        return EXIT["diverged"]
    except SwlabError as exc:
        print(f"swlab: error: {exc}", file=sys.stderr)
        return EXIT["error"]


if __name__ == "__main__":
    sys.exit(main())

"""
Command-line harness.

Every subcommand writes CSV (with a config-hash comment line) and/or
DBARF1 field files into ``--out``; ``--plot`` additionally renders PNG
figures next to them.  The exit status is 0 exactly when the subcommand's
checks pass.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
import warnings
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from . import experiments as ex
from .cgo import CgoConfig, Convention, Potential, solve_direct, solve_iterated
from .config import ConfigError, RunConfig, build_config, read_config_file, write_csv
from .direct import Diagnostics, TimeStepperConfig, evolve_direct
from .fieldio import read_field, write_field
from .grid import Field2D, Space, SpectralGrid2D
from .ist import (
    energy,
    evolve_reflection,
    forward_scattering,
    inverse_scattering,
    l2_norm,
)
from .krylov import GmresConfig
from .oracles import gaussian
from .regularizer import WnTable

log = logging.getLogger("dbarspec")

DEFAULTS: Dict[str, Dict[str, Any]] = {
    "dbar-convergence": {"n": 128, "l": 4.0},
    "shift-compare": {"l": 4.0},
    "cgo-solve": {"n": 64, "l": 3.2, "k": [0j]},
    "roundtrip": {},
    "ds2-ist": {"n": 64, "l": 2.1213},
    "ds2-direct": {"n": 64, "l": 2.1213},
    "ds2-compare": {"n": 64, "l": 2.1213},
}


def _common(p: argparse.ArgumentParser) -> None:
    a = p.add_argument
    a("--n", type=int, help="modes per direction (even)")
    a("--l", type=float, help="half-width scale of the box")
    a("--m", type=int, help="Taylor order M of the regulariser")
    a("--tol", type=float, help="GMRES relative tolerance")
    a("--maxit", type=int, help="GMRES iteration cap")
    a("--k", type=str, help="comma-separated spectral parameters, e.g. '0.5+0.5j,1'")
    a("--t", type=float, help="final time")
    a("--nt", type=int, help="number of time steps")
    a("--workers", type=int, help="worker processes for k/z sweeps (default $DBAR_NUM_WORKERS or 1)")
    a("--out", type=str, help="output directory")
    a("--config", type=str, help="flat key = value config file")
    a("--q0", type=str, help="initial data: a DBARF1 file or builtin:gaussian")
    a("--method", type=str, choices=("iterated", "direct"), help="CGO formulation")
    a("--sublattice", type=int, help="reconstruct only a centred block of this width")
    a("--stride", type=int, help="diagnostics sampling stride in time steps")
    a("--dispersion", type=float, help="dispersion coefficient of the direct solver")
    a("--seed", type=int, help="seed recorded in the config hash")
    a("--plot", action="store_true", default=None, help="also write PNG figures")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dbar", description=__doc__.strip().splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("dbar-convergence", "error of the d-bar inverse versus M and n"),
        ("shift-compare", "shifted versus unshifted inversion"),
        ("cgo-solve", "solve for CGO solutions at given k"),
        ("roundtrip", "forward and inverse scattering of a Gaussian"),
    ):
        p = sub.add_parser(name, help=help_)
        _common(p)
        if name == "cgo-solve":
            p.add_argument("--convention", choices=("full", "half"), default="full")
            p.add_argument("--dump-kernels", action="store_true", help="write the W_n kernels as DBARF1 files")
    ds2 = sub.add_parser("ds2", help="Davey-Stewartson II pipelines")
    ds2_sub = ds2.add_subparsers(dest="ds2_command", required=True)
    for name, help_ in (
        ("ist", "evolve by inverse scattering"),
        ("direct", "evolve with the pseudospectral stepper"),
        ("compare", "compare both evolutions"),
    ):
        _common(ds2_sub.add_parser(name, help=help_))
    return parser


def _config(args: argparse.Namespace, experiment: str) -> RunConfig:
    file_values = read_config_file(args.config) if args.config else {}
    overrides = {k: getattr(args, k, None) for k in ("n", "l", "m", "tol", "maxit", "k", "t", "nt", "workers", "out", "q0", "method", "sublattice", "stride", "dispersion", "seed", "plot")}
    return build_config(experiment, file_values, overrides, DEFAULTS.get(experiment, {}))


def _cgo_cfg(cfg: RunConfig) -> CgoConfig:
    return CgoConfig(M=cfg.m, gmres=GmresConfig(tol=cfg.tol, max_iters=cfg.maxit))


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_q0(cfg: RunConfig) -> Field2D:
    if cfg.q0.startswith("builtin:"):
        name = cfg.q0.split(":", 1)[1]
        if name != "gaussian":
            raise ConfigError(f"unknown builtin initial data {name!r}")
        if cfg.n is None or cfg.l is None:
            raise ConfigError("builtin initial data needs --n and --l")
        return gaussian(SpectralGrid2D.square(cfg.n, cfg.l))
    field = read_field(cfg.q0)
    if field.space is not Space.PHYSICAL:
        raise ConfigError(f"{cfg.q0}: initial data must be a physical-space field")
    return field


def _report(name: str, ok: bool, detail: str = "") -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {name}{': ' + detail if detail else ''}")


def cmd_dbar_convergence(cfg: RunConfig) -> int:
    res = ex.dbar_convergence(n_fixed=cfg.n, M_fixed=cfg.m, l=cfg.l)
    out = _outdir(cfg)
    path = write_csv(out / "dbar_convergence.csv", ["sweep_var", "value", "linf_error"], res.rows(), cfg)
    if cfg.plot:
        from .plotting import plot_convergence

        plot_convergence(out / "dbar_convergence.png", res.m_sweep, res.n_sweep)
    for name, ok in res.checks.items():
        _report(name, ok)
    print(path)
    return 0 if res.passed else 1


def cmd_shift_compare(cfg: RunConfig) -> int:
    rows = [r for r in ex.SHIFT_ROWS if cfg.n is None or r[0] == cfg.n]
    if not rows:
        raise ConfigError(f"no shift-comparison row for n={cfg.n}")
    rows = [(n, cfg.l, km, ke) for n, _, km, ke in rows]
    res, ok = ex.shift_comparison(rows, M=cfg.m)
    out = _outdir(cfg)
    path = write_csv(out / "shift_compare.csv", ["n", "k_re", "k_im", "err_unshifted", "err_shifted"], [(r.n, r.k.real, r.k.imag, r.err_unshifted, r.err_shifted) for r in res], cfg)
    if cfg.plot:
        from .plotting import plot_shift

        plot_shift(out / "shift_compare.png", res)
    _report("shifted << unshifted near the edge (n >= 64)", ok)
    print(path)
    return 0 if ok else 1


def cmd_cgo_solve(cfg: RunConfig, convention: str = "full", dump_kernels: bool = False) -> int:
    q0 = _load_q0(cfg)
    grid = q0.grid
    cc = _cgo_cfg(cfg)
    table = WnTable(grid, cc.M, cc.hybrid_radius)
    pot = Potential(q0, Convention(convention))
    out = _outdir(cfg)
    ok = True
    if dump_kernels:
        for n in range(table.M + 1):
            write_field(out / f"W{n}.dbarf", table.kernel(n))
    with open(out / "runlog.jsonl", "w") as logf:
        for i, k in enumerate(cfg.k or [0j]):
            solver = solve_iterated if cfg.method == "iterated" else solve_direct
            sol = solver(pot, k, cc, table=table)
            tag = f"k{i}"
            write_field(out / f"{tag}_{'h' if cfg.method == 'iterated' else 'S'}.dbarf", sol.unknown)
            write_field(out / f"{tag}_m.dbarf", sol.m)
            sol.report.write_csv(out / f"{tag}_residuals.csv", header=f"config_hash={cfg.hash()} experiment={cfg.experiment}")
            rec = {
                "k": [sol.k.real, sol.k.imag],
                "method": cfg.method,
                "iterations": sol.report.iterations,
                "residual": sol.report.residual,
                "converged": sol.report.converged,
                "wall_time": sol.wall_time,
                "config_hash": cfg.hash(),
            }
            logf.write(json.dumps(rec) + "\n")
            _report(f"k={sol.k}", sol.report.converged, f"{sol.report.iterations} iterations, residual {sol.report.residual:.2e}")
            ok = ok and sol.report.converged
            if cfg.plot:
                from .plotting import plot_field

                plot_field(out / f"{tag}_m.png", sol.m, f"|m|, k={sol.k}")
    return 0 if ok else 1


def cmd_roundtrip(cfg: RunConfig) -> int:
    rows = list(ex.ROUNDTRIP_ROWS[:5])
    if cfg.n is not None:
        rows = [r for r in ex.ROUNDTRIP_ROWS if r[0] == cfg.n]
        if not rows:
            rows = [(cfg.n, cfg.l or 1.0, float("nan"))]
        if cfg.l is not None:
            rows = [(n, cfg.l, pub) for n, _, pub in rows]
    res, _ = ex.roundtrip(rows, _cgo_cfg(cfg), workers=cfg.workers)
    out = _outdir(cfg)
    path = write_csv(out / "roundtrip.csv", ["n", "l", "error", "published", "seconds"], [(r.n, r.l, r.error, r.published, r.seconds) for r in res], cfg)
    ok = True
    for r in res:
        good = bool(np.isnan(r.published)) or r.within_10x
        ok = ok and good
        _report(f"n={r.n} l={r.l}", good, f"error {r.error:.3e} (published {r.published:.3e}), {r.seconds:.1f}s")
    if cfg.plot:
        from .plotting import plot_roundtrip

        plot_roundtrip(out / "roundtrip.png", res)
    print(path)
    return 0 if ok else 1


def cmd_ds2_ist(cfg: RunConfig) -> int:
    q0 = _load_q0(cfg)
    cc = _cgo_cfg(cfg)
    r0 = forward_scattering(q0, cc, method=cfg.method, workers=cfg.workers)
    rt = evolve_reflection(r0, cfg.t)
    mask = None
    if cfg.sublattice:
        from .ist import centered_sublattice

        mask = centered_sublattice(q0.grid, cfg.sublattice)
    state = inverse_scattering(rt, cc, method=cfg.method, workers=cfg.workers, mask=mask)
    out = _outdir(cfg)
    write_field(out / "r_k_0.dbarf", r0.r)
    write_field(out / "r_k_t.dbarf", rt.r)
    write_field(out / "q_t.dbarf", state.q)
    rows = [(0.0, l2_norm(q0), energy(q0))]
    if mask is None:
        rows.append((cfg.t, l2_norm(state.q), energy(state.q)))
    write_csv(out / "diagnostics.csv", ["t", "l2", "energy"], rows, cfg)
    if cfg.plot:
        from .plotting import plot_field

        plot_field(out / "q_t.png", state.q, f"|q| at t={cfg.t}")
    failed = int(r0.failed.sum() + state.failed.sum())
    _report("all CGO solves converged", failed == 0, f"{failed} flagged")
    return 0 if failed == 0 else 1


def cmd_ds2_direct(cfg: RunConfig) -> int:
    q0 = _load_q0(cfg)
    diags = Diagnostics()
    stride = cfg.stride if cfg.stride > 0 else cfg.nt
    state = evolve_direct(q0, TimeStepperConfig(n_t=cfg.nt, t_final=cfg.t, dispersion=cfg.dispersion, stride=stride), diagnostics=diags)
    out = _outdir(cfg)
    write_field(out / "q_t.dbarf", state.q)
    write_csv(out / "diagnostics.csv", ["t", "l2", "energy"], zip(diags.t, diags.l2, diags.energy), cfg)
    if cfg.plot:
        from .plotting import plot_diagnostics, plot_field

        plot_field(out / "q_t.png", state.q, f"|q| at t={cfg.t}")
        plot_diagnostics(out / "diagnostics.png", diags.t, diags.l2, diags.energy)
    ok = bool(np.all(np.isfinite(state.q.values)))
    _report("finite final state", ok)
    return 0 if ok else 1


def cmd_ds2_compare(cfg: RunConfig) -> int:
    q0 = _load_q0(cfg)
    g = q0.grid
    if not g.is_square:
        raise ConfigError("ds2 compare needs a square grid")
    res = ex.ds2_compare(
        g.n_x,
        g.l_x,
        cfg.t,
        cfg.nt,
        _cgo_cfg(cfg),
        sublattice=cfg.sublattice,
        workers=cfg.workers,
        dispersion=cfg.dispersion,
        stride=cfg.stride,
        q0=q0,
    )
    out = _outdir(cfg)
    write_field(out / "q_ist.dbarf", res.ist_state.q)
    write_field(out / "q_direct.dbarf", res.direct_state.q)
    write_csv(
        out / "compare.csv",
        ["n", "l", "t", "nt", "points", "max_diff", "energy_drift", "l2_drift"],
        [(res.n, res.l, res.t, res.n_t, res.points, res.max_diff, res.energy_drift, res.l2_drift)],
        cfg,
    )
    d = res.diagnostics
    if d.t:
        write_csv(out / "diagnostics.csv", ["t", "l2", "energy"], zip(d.t, d.l2, d.energy), cfg)
    if cfg.plot:
        from .plotting import plot_field

        plot_field(out / "q_ist.png", res.ist_state.q, "IST")
        plot_field(out / "q_direct.png", res.direct_state.q, "direct")
    _report("energy drift <= 1e-12", res.energy_drift <= 1e-12, f"{res.energy_drift:.2e}")
    _report("IST vs direct <= 1e-4", res.max_diff <= 1e-4, f"{res.max_diff:.2e} over {res.points} nodes")
    return 0 if res.passed else 1


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if not args.verbose:
        warnings.simplefilter("ignore")
    command = args.command if args.command != "ds2" else f"ds2-{args.ds2_command}"
    try:
        cfg = _config(args, command)
        t0 = time.perf_counter()
        if command == "dbar-convergence":
            rc = cmd_dbar_convergence(cfg)
        elif command == "shift-compare":
            rc = cmd_shift_compare(cfg)
        elif command == "cgo-solve":
            rc = cmd_cgo_solve(cfg, args.convention, args.dump_kernels)
        elif command == "roundtrip":
            rc = cmd_roundtrip(cfg)
        elif command == "ds2-ist":
            rc = cmd_ds2_ist(cfg)
        elif command == "ds2-direct":
            rc = cmd_ds2_direct(cfg)
        else:
            rc = cmd_ds2_compare(cfg)
        log.info("%s finished in %.1fs", command, time.perf_counter() - t0)
        return rc
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

"""Command-line driver: ``run``, ``converge`` and ``verify``.

Exit codes: 0 success, 1 verification failure, 2 usage or configuration
error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import diagnostics as diag
from . import storage
from .config import ConfigError, load_config
from .energy import GibbsDomainError
from .harness import build_initial, format_table, run_convergence_study
from .scheme import RunFailure, run
from .solver import SolverError

log = logging.getLogger("ternary_mmc")

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_SOLVER = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


class _UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ternary-mmc",
                     description="BDF2 solver for the ternary MMC Cahn-Hilliard system.")
    parser.add_argument("--log-level", default="INFO",
                        choices=("DEBUG", "INFO", "WARNING", "ERROR"))
    sub = parser.add_subparsers(dest="command", metavar="{run,converge,verify}",
                                parser_class=_Parser)
    p = sub.add_parser("run", help="integrate one configuration in time")
    p.add_argument("--config", required=True, help="configuration file")
    p.add_argument("--snapshots", help="snapshot directory (default: <output_dir>/snapshots)")
    p = sub.add_parser("converge", help="Cauchy-difference convergence study")
    p.add_argument("--config", required=True, help="configuration file")
    p = sub.add_parser("verify", help="randomized operator and gradient checks")
    p.add_argument("--seed", type=int, default=0)
    return parser


def _snap_name(step: int) -> str:
    return f"snap_{step:08d}.mmc"


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    grid = cfg.grid
    try:
        initial = build_initial(cfg.initial.kind, grid, cfg.initial.seed, cfg.initial.path,
                                cfg.initial.independent_noise)
    except (ValueError, OSError) as exc:
        raise ConfigError(f"cannot build initial data: {exc}") from None
    outdir = Path(cfg.output_dir)
    if not outdir.is_absolute():
        outdir = Path(args.config).resolve().parent / outdir
    snapdir = Path(args.snapshots) if args.snapshots else outdir / "snapshots"
    outdir.mkdir(parents=True, exist_ok=True)
    csv_path = outdir / "diagnostics.csv"
    csv_path.unlink(missing_ok=True)

    def write_row(state, rec):
        storage.append_diag_csv(csv_path, rec)

    def write_snapshot(state, rec):
        if cfg.snapshot_stride and state.step % cfg.snapshot_stride == 0:
            storage.store_snapshot(snapdir / _snap_name(state.step), state.current,
                                   grid.length, state.time, state.step)

    log.info("run: %d^2 cells, dt=%g, t_final=%g, A=(%g, %g) [%s]", grid.n, cfg.scheme.dt,
             cfg.t_final, cfg.scheme.a1, cfg.scheme.a2, cfg.a_preset)
    try:
        state, records = run(grid, initial, cfg.model, cfg.scheme, cfg.t_final,
                             callbacks=(write_row, write_snapshot), diag_stride=cfg.diag_stride)
    except RunFailure as exc:
        log.error("%s", exc)
        if exc.state is not None:
            path = outdir / "partial.mmc"
            storage.store_snapshot(path, exc.state.current, grid.length, exc.state.time,
                                   exc.state.step)
            log.error("last accepted state (step %d) saved to %s", exc.state.step, path)
        if cfg.plots and exc.records:
            _figures(exc.records, outdir, None, grid.length)
        return EXIT_SOLVER

    storage.store_snapshot(outdir / "final.mmc", state.current, grid.length, state.time,
                           state.step)
    if cfg.plots:
        _figures(records, outdir, state.current, grid.length)
    cert = diag.certify(records, diag.choose_energy(cfg.model, cfg.scheme))
    print(f"finished step {state.step} at t = {state.time:g}")
    print(cert.summary())
    print(f"diagnostics: {csv_path}")
    return EXIT_OK


def _figures(records, outdir, pair, length):
    from .plotting import run_report
    for path in run_report(records, outdir, pair, length):
        log.info("figure written: %s", path)


def cmd_converge(args) -> int:
    cfg = load_config(args.config)
    conv = cfg.converge
    outdir = Path(cfg.output_dir)
    if not outdir.is_absolute():
        outdir = Path(args.config).resolve().parent / outdir

    def progress(grid, state):
        log.info("grid %d^2 reached t = %g after %d steps", grid.n, state.time, state.step)

    try:
        rows, _ = run_convergence_study(conv.path, cfg.model, conv.kind, cfg.initial.seed,
                                        cfg.a_preset if cfg.a_preset != "explicit"
                                        else "paper-experiment",
                                        cfg.scheme.solver, conv.transfer, progress)
    except RunFailure as exc:
        log.error("convergence study aborted: %s", exc)
        return EXIT_SOLVER
    print(format_table(rows))
    storage.write_convergence_csv(outdir / "convergence.csv", rows)
    if cfg.plots:
        from .plotting import plot_convergence
        plot_convergence(rows, outdir / "convergence.png", list(conv.path.sizes[1:]))
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verification import run_checks
    checks = run_checks(args.seed)
    for c in checks:
        print(f"[{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.detail}")
    passed = sum(c.passed for c in checks)
    print(f"{passed}/{len(checks)} checks passed")
    return EXIT_OK if passed == len(checks) else EXIT_VERIFY


COMMANDS = {"run": cmd_run, "converge": cmd_converge, "verify": cmd_verify}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        print("ternary-mmc: error: a subcommand is required", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SolverError, GibbsDomainError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER

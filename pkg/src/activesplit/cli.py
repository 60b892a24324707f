"""Command line entry point: ``activesplit {evolve,study,admit} CONFIG``.

Exit codes: 0 success, 2 validation error, 3 blow-up guard trip,
4 reference certificate failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .config import ConfigError, ExperimentConfig, load_config
from .diagnostics import run_study
from .io import write_csv, write_diagnostics_csv, write_plot_script, write_snapshot
from .operators import check_admissibility
from .splitting import EvolutionAborted, ReferenceNotConverged, evolve
from .subflows import BlowUpError, SubstepLimitError

log = logging.getLogger("activesplit")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_GUARD = 3
EXIT_CERTIFICATE = 4


def _error(out: Path | None, kind: str, message: str, code: int, **extra) -> int:
    record = {"status": "error", "kind": kind, "exit_code": code, "message": message, **extra}
    text = json.dumps(record, sort_keys=True)
    print(text, file=sys.stderr)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "error.json").write_text(text + "\n", encoding="utf-8")
    return code


def _write_trajectory(traj, out: Path) -> None:
    for i, (t, u) in enumerate(zip(traj.times, traj.fields)):
        write_snapshot(u.to_real(), t, out / f"snapshot_{i:05d}.bin")
    write_diagnostics_csv(traj, out / "diagnostics.csv")


def cmd_evolve(cfg: ExperimentConfig, out: Path, seed, threads) -> int:
    u0 = cfg.initial_field(seed)
    try:
        traj = evolve(u0, cfg.split_config())
    except EvolutionAborted as exc:
        _write_trajectory(exc.trajectory, out)
        return _error(out, "guard_trip", str(exc), EXIT_GUARD, time=exc.cause.time)
    _write_trajectory(traj, out)
    log.info("evolve: %d snapshots, final time %.6g", len(traj.times), traj.times[-1])
    return EXIT_OK


def cmd_study(cfg: ExperimentConfig, out: Path, seed, threads) -> int:
    q = cfg.T / cfg.dt
    if abs(q - round(q)) > 1e-9 * q:
        return _error(out, "validation", f"split.dt={cfg.dt} must divide split.T={cfg.T}", EXIT_VALIDATION)
    u0 = cfg.initial_field(seed)
    for method in cfg.methods:
        try:
            run = run_study(
                u0,
                cfg.preset.a,
                cfg.preset.v,
                method,
                cfg.dt_list(),
                cfg.T,
                refinement=cfg.refinement,
                bflow=cfg.bflow,
                preset=cfg.preset.id,
                threads=threads,
            )
            names = []
            for s in cfg.norms:
                report = run.report(s)
                name = f"study_{method}_s{s:g}.csv"
                write_csv(report, out / name)
                names.append(name)
                log.info("%s", report.summary())
        except ReferenceNotConverged as exc:
            return _error(out, "reference_not_converged", str(exc), EXIT_CERTIFICATE, method=method)
        except (EvolutionAborted, BlowUpError) as exc:
            return _error(out, "guard_trip", f"reference run: {exc}", EXIT_GUARD, method=method)
        write_plot_script(names, out / f"plot_{method}.py", f"{cfg.preset.id} / {method}")
    return EXIT_OK


def cmd_admit(cfg: ExperimentConfig, out: Path, seed, threads) -> int:
    report = check_admissibility(
        cfg.preset.a,
        cfg.preset.v,
        cfg.grid,
        trials=cfg.admit_trials,
        seed=cfg.admit_seed if seed is None else seed,
        commutator_index=cfg.commutator_index,
    )
    text = json.dumps(report.as_dict(), sort_keys=True, indent=2)
    (out / "admissibility.json").write_text(text + "\n", encoding="utf-8")
    log.info("admit: %s, passed=%s", report.classification, report.passed)
    return EXIT_OK


COMMANDS = {"evolve": cmd_evolve, "study": cmd_study, "admit": cmd_admit}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="activesplit", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("config", help="configuration file (section.key = value lines)")
    p.add_argument("--out", help="output directory (overrides output.dir)")
    p.add_argument("--threads", type=int, default=1, help="parallel study rows")
    p.add_argument("--seed", type=int, help="override u0.seed (and admit.seed)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    out = Path(args.out) if args.out else None
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        return _error(out, "validation", str(exc), EXIT_VALIDATION, problems=exc.problems)
    except OSError as exc:
        return _error(out, "validation", f"cannot read config: {exc}", EXIT_VALIDATION)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, u0_seed=args.seed)
    if args.threads < 1:
        return _error(out, "validation", "--threads must be >= 1", EXIT_VALIDATION)
    out = out or Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        return COMMANDS[args.command](cfg, out, args.seed, args.threads)
    except SubstepLimitError as exc:
        return _error(out, "substep_limit", str(exc), EXIT_GUARD)
    except ValueError as exc:
        return _error(out, "validation", str(exc), EXIT_VALIDATION)


if __name__ == "__main__":
    sys.exit(main())

"""Command line entry point: ``semitransport {solve,converge,selftest,dump-config}``.

Exit codes: 0 success, 1 failed verification, 2 positivity (CFL) condition
violated, 3 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
import tempfile
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import PRESETS, ConvergenceStudyConfig, ScenarioConfig
from .conservation import check_conservation, check_pdf_conditions
from .distributions import poisson_limit_distance, total_variation
from .errors import CFLViolation, ConfigError, TransportError
from .timescale import TimeScale, make_grid
from .transport import TransportProblem, solve, space_section, time_section

log = logging.getLogger("semitransport")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CFL = 2
EXIT_CONFIG = 3


def _g(x: float) -> str:
    return f"{float(x):.17g}"


def write_atomic(out_dir: Path, files: dict[str, str]) -> list[Path]:
    """Write every file via temp + rename; nothing is written if rendering failed earlier."""
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, text in files.items():
        fd, tmp = tempfile.mkstemp(dir=out_dir, prefix=f".{name}.", suffix=".tmp")
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, out_dir / name)
        written.append(out_dir / name)
    return written


def render_scenario(cfg: ScenarioConfig) -> dict[str, str]:
    """Solve a scenario and render all requested outputs in memory."""
    problem = cfg.problem()
    out = cfg.outputs
    grid = make_grid(problem.scale, cfg.h_out, out.space_sections)
    field_ = solve(problem, grid)
    files: dict[str, str] = {}

    if out.field:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["m", "t", "u"])
        for g, p in enumerate(grid):
            s = field_.states[g]
            for j, v in enumerate(s.values.tolist()):
                w.writerow([s.lo + j, _g(p.t), _g(v)])
        files["field.csv"] = buf.getvalue()

    for m in out.time_sections:
        files[f"tsec_m{m}.csv"] = time_section(field_, m).to_csv()
    for t in out.space_sections:
        files[f"ssec_t{float(t)!r}.csv"] = space_section(field_, t).to_csv()

    if out.conservation:
        report = check_conservation(field_)
        quad = []
        for m in report.time.branches[:3]:
            q = problem.scale.delta_integral(lambda t, m=m: field_.value(m, t), 0.0, problem.scale.t_max, cfg.quad_tol)
            quad.append(abs(q - field_.time_integral(m)))
        files["conservation.txt"] = report.to_text() + (
            f"  quadrature cross-check of time integrals: max diff {max(quad, default=0.0):.3e}\n"
        )
        files["conservation.kv"] = report.to_kv() + f"time_quadrature_max_diff={_g(max(quad, default=0.0))}\n"
    if out.pdf_check:
        v = check_pdf_conditions(problem)
        files["pdf_check.kv"] = "".join(
            f"{k}={'true' if val is True else 'false' if val is False else val}\n"
            for k, val in (
                ("k_is_one", v.k_is_one),
                ("mass_is_one", v.mass_is_one),
                ("time_norm_is_one", v.time_norm_is_one),
                ("positivity", v.positivity),
                ("mu_below_mu_x", v.mu_below_mu_x),
                ("space_sections", v.space_sections),
                ("time_sections", v.time_sections),
                ("sections", v.sections),
            )
        )
    return files


def render_convergence(cfg: ConvergenceStudyConfig) -> str:
    for n in cfg.steps:
        # one step moves rate/n of the mass; the step rule needs this below 1
        if not cfg.rate / n < 1.0:
            raise CFLViolation(
                f"steps: n={n} gives k*mu_t/mu_x = {cfg.rate / n!r}; the positivity (CFL) condition needs < 1"
            )
    buf = io.StringIO()
    buf.write(f"# rate={_g(cfg.rate)} target_time={_g(cfg.target_time)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "tv_distance", "ratio", "tv_solver"])
    poisson = _poisson_section(cfg)
    prev = None
    for n in cfg.steps:
        d = poisson_limit_distance(n, cfg.rate)
        ratio = _g(d / prev[1]) if prev is not None and prev[1] > 0 and n == 2 * prev[0] else ""
        w.writerow([n, _g(d), ratio, _g(_binomial_section_tv(cfg, n, poisson))])
        prev = (n, d)
    return buf.getvalue()


def _poisson_section(cfg: ConvergenceStudyConfig) -> np.ndarray:
    """Space section at ``target_time`` on a continuous time line, ``k = rate / target_time``."""
    if cfg.rate == 0:
        return np.array([1.0])
    k = cfg.rate / cfg.target_time
    f = solve(TransportProblem(k, 1.0, TimeScale.interval(cfg.target_time)))
    return f.states[-1].values


def _binomial_section_tv(cfg: ConvergenceStudyConfig, n: int, poisson: np.ndarray) -> float:
    """Same section after ``n`` equal steps of ``target_time / n``."""
    if cfg.rate == 0:
        return 0.0
    k = cfg.rate / cfg.target_time
    f = solve(TransportProblem(k, 1.0, TimeScale.uniform(cfg.target_time / n, n)))
    return total_variation(f.states[-1].values, poisson)


def _apply_overrides(cfg: ScenarioConfig, args) -> ScenarioConfig:
    changes = {}
    if args.tail_tol is not None:
        if not args.tail_tol > 0:
            raise ConfigError("--tail-tol: must be > 0")
        changes["tail_tol"] = args.tail_tol
    if args.quad_tol is not None:
        if not args.quad_tol > 0:
            raise ConfigError("--quad-tol: must be > 0")
        changes["quad_tol"] = args.quad_tol
    return replace(cfg, **changes) if changes else cfg


def cmd_solve(args) -> int:
    cfg = _apply_overrides(ScenarioConfig.load(args.config), args)
    files = render_scenario(cfg)
    for p in write_atomic(Path(args.out_dir), files):
        print(p)
    return EXIT_OK


def cmd_converge(args) -> int:
    cfg = ConvergenceStudyConfig.load(args.config)
    text = render_convergence(cfg)
    for p in write_atomic(Path(args.out_dir), {"convergence.csv": text}):
        print(p)
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import run_all

    verdicts = run_all(fault=args.inject)
    failed = [v for v in verdicts if not v.ok]
    if failed:
        print(f"selftest FAILED: {failed[0].name}", file=sys.stderr)
        return EXIT_FAILED
    print("selftest passed")
    return EXIT_OK


def cmd_dump_config(args) -> int:
    sys.stdout.write(PRESETS[args.preset].dump())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semitransport",
        description="Exact transport on discrete space and time scales",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out-dir", default=".", help="directory for output files")
        p.add_argument("--tail-tol", type=float, default=None, help="spatial truncation tolerance")
        p.add_argument("--quad-tol", type=float, default=None, help="quadrature tolerance")

    p = sub.add_parser("solve", help="solve a scenario config")
    p.add_argument("config")
    common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("converge", help="binomial-to-Poisson convergence study")
    p.add_argument("config")
    common(p)
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("selftest", help="run the built-in verification suite")
    p.add_argument("--inject", choices=["sign-flip"], default=None, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_selftest)

    p = sub.add_parser("dump-config", help="print a preset scenario config")
    p.add_argument("preset", choices=sorted(PRESETS))
    p.set_defaults(func=cmd_dump_config)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CFLViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CFL
    except TransportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())

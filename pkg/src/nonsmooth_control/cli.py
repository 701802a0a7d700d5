"""Command-line entry point: one subcommand per study.

Every command writes into ``--out`` (default from the config): the resolved
configuration as ``config.ini``, CSV tables with a header row, grid-function
files, ``key: value`` text reports and, unless ``--no-figures``, PNG views of
the tables.  Files are staged in a temporary directory and moved into place
once the command has finished.

Exit codes: 0 success, 1 configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import plotting
from .config import (ConfigError, RunConfig, load_config, make_grid, make_problem,
                     resolve_field, schedule, t_sequence)
from .curvature import (Q_tilde_limit, key_limit_defect, onedim_lemma_study, probe_directions,
                        second_order_report, second_subderivative_check)
from .grid import format_grid_function, norm
from .levelset import GradientFloorError
from .optimizer import solve_continuation
from .pde import SolverError, solve_state, solve_state_mollified
from .stationarity import (build_stationarity, check_structure, sparsity_sweep, support_measure,
                           sweep_csv)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2


class NumericalFailure(RuntimeError):
    """A study ran but its numerical contract was not met; outputs are still written."""


class _Parser(argparse.ArgumentParser):
    """Usage errors count as configuration errors (exit 1), not numerical ones."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


class Outputs:
    """Files collected during a command and published together."""

    def __init__(self, cfg: RunConfig, figures: bool):
        self.cfg = cfg
        self.figures = figures
        self.stage = Path(tempfile.mkdtemp(prefix="nsc-"))
        self.text("config.ini", cfg.to_ini())

    def text(self, name: str, content: str) -> None:
        (self.stage / name).write_text(content)

    def field(self, name: str, grid, values) -> None:
        self.text(name, format_grid_function(grid, values))

    def figure(self, name: str, draw, *args, **kwargs) -> None:
        if self.figures:
            draw(self.stage / name, *args, **kwargs)

    def publish(self, directory: Path) -> list[Path]:
        directory.mkdir(parents=True, exist_ok=True)
        written = []
        for src in sorted(self.stage.iterdir()):
            dst = directory / src.name
            shutil.move(src, dst)
            written.append(dst)
        shutil.rmtree(self.stage, ignore_errors=True)
        return written

    def discard(self) -> None:
        shutil.rmtree(self.stage, ignore_errors=True)


def _kv(items: dict) -> str:
    def fmt(v):
        if isinstance(v, (bool, np.bool_)):
            return str(bool(v)).lower()
        if isinstance(v, (int, np.integer)):
            return str(int(v))
        if isinstance(v, (float, np.floating)):
            return f"{float(v):.17g}"
        return str(v)
    return "".join(f"{k}: {fmt(v)}\n" for k, v in items.items())


def _csv(header: list[str], columns: list) -> str:
    rows = [",".join(header)]
    for row in zip(*columns):
        rows.append(",".join(f"{v:.17g}" if isinstance(v, (float, np.floating)) else str(v)
                             for v in row))
    return "\n".join(rows) + "\n"


def _fields_csv(grid, fields: dict[str, np.ndarray]) -> str:
    coords = grid.coordinates()
    names = ["x"] if grid.dim == 1 else ["x1", "x2"]
    return _csv(names + list(fields), [*coords, *fields.values()])


def _loglog_slope(x, y) -> float:
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    ok = (x > 0) & (y > 0)
    if np.count_nonzero(ok) < 2:
        return float("nan")
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])


def _read_control(cfg: RunConfig, grid, path: str | None) -> np.ndarray:
    spec = cfg.problem.control if path is None else f"file:{Path(path).resolve()}"
    return resolve_field(cfg, grid, spec, "control")


# --- commands ---------------------------------------------------------------------------

def cmd_solve_state(cfg: RunConfig, out: Outputs, args) -> None:
    problem = make_problem(cfg)
    grid = problem.grid
    u = _read_control(cfg, grid, args.control)
    rep = solve_state(problem, u)
    out.field("control.txt", grid, u)
    out.field("state.txt", grid, rep.y)
    out.text("state_fields.csv", _fields_csv(grid, {"control": u, "state": rep.y}))
    out.text("residual_history.csv", rep.history_csv())
    out.text("state_report.txt", _kv({
        "method": rep.method, "iterations": rep.iterations, "residual": rep.residual,
        "tolerance": rep.tolerance, "state_sup": float(np.max(np.abs(rep.y))),
        "state_l2": norm(grid, rep.y)}))
    out.figure("state.png", plotting.plot_fields, grid, {"state y": rep.y}, "state")
    out.figure("residual_history.png", plotting.plot_series, np.arange(len(rep.history)),
               {"residual": rep.history}, "iteration", "max residual", logy=True)


def cmd_optimize(cfg: RunConfig, out: Outputs, args) -> None:
    problem = make_problem(cfg)
    grid = problem.grid
    s = cfg.solver
    u0 = _read_control(cfg, grid, args.control) if args.control else None
    rep = solve_continuation(problem, schedule(cfg), u0, s.max_iter, s.stage_tol, s.final_tol)
    stat = build_stationarity(problem, rep.control)
    out.field("control.txt", grid, rep.control)
    out.field("state.txt", grid, stat.state)
    out.field("adjoint.txt", grid, stat.adjoint)
    out.text("optimal_fields.csv", _fields_csv(
        grid, {"control": rep.control, "state": stat.state, "adjoint": stat.adjoint}))
    out.text("iterations.csv", rep.history_csv())
    dist = rep.distance_to_final(grid)
    drift = rep.drift(grid) + [float("nan")]
    out.text("stages.csv", _csv(["stage", "eps", "iterations", "status", "drift_next",
                                 "distance_to_final"],
                                [list(range(len(rep.eps_values))), rep.eps_values,
                                 rep.iterations, rep.status, drift, dist]))
    eps = np.array(rep.eps_values[:-1])
    rate = _loglog_slope(eps, dist[:-1])
    out.text("optimize_report.txt", _kv({
        "converged": rep.converged, "stationarity_residual": rep.residual,
        "stages": len(rep.eps_values), "total_iterations": int(sum(rep.iterations)),
        "final_stage_status": rep.status[-1], "drift_rate": rate,
        "objective": rep.history[-1].objective,
        "support_measure": support_measure(grid, rep.control),
        "control_min": float(np.min(rep.control)), "control_max": float(np.max(rep.control))}))
    out.figure("optimal_fields.png", plotting.plot_fields, grid,
               {"control u": rep.control, "state y": stat.state, "adjoint p": stat.adjoint},
               "computed stationary point")
    hist = rep.history
    out.figure("iterations.png", plotting.plot_history, np.array([r.stage for r in hist]),
               np.array([r.residual for r in hist]))
    out.figure("drift.png", plotting.plot_series, eps, {"||u_eps - u_final||": dist[:-1]},
               "eps", "L2 distance", logx=True, logy=True)
    if not rep.converged:
        raise NumericalFailure("continuation stages did not all converge: "
                               + ",".join(rep.status))


def cmd_check_foc(cfg: RunConfig, out: Outputs, args) -> None:
    problem = make_problem(cfg)
    grid = problem.grid
    u = _read_control(cfg, grid, args.control)
    rep = build_stationarity(problem, u)
    structure = check_structure(grid, rep.state, problem.f)
    out.text("stationarity_report.txt", rep.to_text())
    out.text("structure_report.txt", structure.to_text())
    out.text("structure_profile.csv", structure.profile_csv())
    out.text("stationarity_fields.csv", _fields_csv(grid, {
        "control": u, "state": rep.state, "adjoint": rep.adjoint,
        "multiplier": rep.multiplier, "d": rep.d, "chi": rep.chi}))
    out.field("adjoint.txt", grid, rep.adjoint)
    out.field("multiplier.txt", grid, rep.multiplier)
    out.figure("stationarity_fields.png", plotting.plot_fields, grid,
               {"adjoint p": rep.adjoint, "multiplier lambda": rep.multiplier, "d": rep.d},
               "first-order system")
    if np.any(structure.total > 0):
        out.figure("structure_profile.png", plotting.plot_series, structure.eps,
                   {"measure": structure.total}, "eps", "measure {|y - tau| < eps}",
                   logx=True, logy=True)


def cmd_check_soc(cfg: RunConfig, out: Outputs, args) -> None:
    problem = make_problem(cfg)
    grid = problem.grid
    u = _read_control(cfg, grid, args.control)
    rng = np.random.default_rng(cfg.solver.seed)
    rep = build_stationarity(problem, u)
    ts = t_sequence(cfg)
    dirs = probe_directions(problem, rep, cfg.solver.probe_count, rng)
    soc = second_order_report(problem, rep, dirs, rng=rng,
                              growth_samples=cfg.solver.growth_samples, t_sequence=ts)
    out.text("second_order_report.txt", soc.to_text())
    out.text("directions.csv", soc.to_csv())
    if dirs:
        h = dirs[0]
        table = second_subderivative_check(problem, u, h, ts, rep)
        out.text("subderivative.csv", table.to_csv())
        lim = Q_tilde_limit(problem, u, rep.adjoint, h, ts, rep.state)
        out.text("window_limit.csv", lim.to_csv())
        defects = [key_limit_defect(problem, u, rep.adjoint, h, t, rep.state) for t in ts]
        out.text("key_limit.csv", _csv(["t", "defect"], [ts, defects]))
        out.figure("subderivative.png", plotting.plot_series, table.t, {"D(t)": table.D},
                   "t", "second-order difference quotient", logx=True, reference=table.Q)
    if soc.verdict == "NECESSARY-VIOLATED":
        raise NumericalFailure("negative curvature along a critical direction")


def cmd_study_mollifier(cfg: RunConfig, out: Outputs, args) -> None:
    problem = make_problem(cfg)
    f = problem.f
    t = np.linspace(-10.0, 10.0, 20001)
    eps = np.array(cfg.solver.mollifier_eps)
    err, dmin = [], []
    for e in eps:
        fe = f.mollify(float(e))
        err.append(float(np.max(np.abs(fe.value(t) - f.value(t)))))
        dmin.append(float(np.min(fe.derivative(t))))
    out.text("mollifier_error.csv", _csv(["eps", "max_error", "min_derivative"], [eps, err, dmin]))
    items = {"function_rate": _loglog_slope(eps, err), "min_derivative": min(dmin)}
    out.figure("mollifier_error.png", plotting.plot_series, eps, {"max |f_eps - f|": err},
               "eps", "sup error on [-10, 10]", logx=True, logy=True)
    if args.with_states:
        grid = problem.grid
        u = _read_control(cfg, grid, args.control)
        y = solve_state(problem, u).y
        seps = np.array(cfg.solver.state_eps)
        serr = [float(np.max(np.abs(solve_state_mollified(problem, u, float(e), y0=y).y - y)))
                for e in seps]
        out.text("state_error.csv", _csv(["eps", "state_error_sup"], [seps, serr]))
        items["state_rate"] = _loglog_slope(seps, serr)
        out.figure("state_error.png", plotting.plot_series, seps,
                   {"||S_eps(u) - S(u)||_inf": serr}, "eps", "sup error",
                   logx=True, logy=True)
    out.text("mollifier_report.txt", _kv(items))


def cmd_study_onedim_lemma(cfg: RunConfig, out: Outputs, args) -> None:
    study = onedim_lemma_study(cfg.solver.lemma_n, t_sequence(cfg), cfg.solver.lemma_tau)
    out.text("onedim_lemma.csv", study.to_csv())
    out.text("onedim_lemma_report.txt", _kv({
        "n": study.n, "tau": study.tau, "exact": study.exact, "final_value": study.values[-1],
        "final_relative_error": study.relative_error[-1]}))
    out.figure("onedim_lemma.png", plotting.plot_series, study.t, {"(1/t^2) int p T": study.values},
               "t", "window quotient", logx=True, reference=study.exact)


def cmd_sweep_kappa(cfg: RunConfig, out: Outputs, args) -> None:
    problem = make_problem(cfg)
    rows = sparsity_sweep(problem, cfg.solver.kappas, schedule(cfg))
    out.text("kappa_sweep.csv", sweep_csv(rows))
    support = [r.support for r in rows]
    monotone = all(b <= a + problem.grid.weight for a, b in zip(support, support[1:]))
    out.text("kappa_sweep_report.txt", _kv({
        "support_nonincreasing": monotone, "largest_kappa_support": support[-1],
        "failed": sum(r.status != "ok" for r in rows)}))
    out.figure("kappa_sweep.png", plotting.plot_series, [r.kappa for r in rows],
               {"support measure": support, "L1 norm": [r.l1 for r in rows]},
               "kappa", "size of the control", logx=True)
    if any(r.status.startswith("failed") for r in rows):
        raise NumericalFailure("a state solve failed during the sweep")


COMMANDS = {
    "solve-state": (cmd_solve_state, "solve the state equation for the configured control"),
    "optimize": (cmd_optimize, "continuation solve for a stationary control"),
    "check-foc": (cmd_check_foc, "first-order system and structure diagnostics at a control"),
    "check-soc": (cmd_check_soc, "curvature on critical directions and growth probe"),
    "study-mollifier": (cmd_study_mollifier, "mollification error rates"),
    "study-onedim-lemma": (cmd_study_onedim_lemma, "window quotient against its 1D limit"),
    "sweep-kappa": (cmd_sweep_kappa, "support of the control over a range of kappa"),
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, help="INI configuration file")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--seed", type=int, help="seed for randomized probes")
    common.add_argument("--kappa", type=float, help="sparsity weight")
    common.add_argument("--nu", type=float, help="Tikhonov weight")
    common.add_argument("--n", type=int, nargs="+", help="interior nodes per axis")
    common.add_argument("--eps-floor", type=float, help="smallest positive mollification eps")
    common.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    parser = _Parser(prog="nonsmooth-control", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=text, description=text)
        if name in ("solve-state", "optimize", "check-foc", "check-soc", "study-mollifier"):
            required = name in ("check-foc", "check-soc")
            p.add_argument("--control", required=required,
                           help="grid-function file with the control"
                           + ("" if required else " (default: [problem] control)"))
        if name == "study-mollifier":
            p.add_argument("--with-states", action="store_true",
                           help="also measure ||S_eps(u) - S(u)|| over [solver] state_eps")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config).with_overrides(
            kappa=args.kappa, nu=args.nu, seed=args.seed, eps_floor=args.eps_floor,
            n=tuple(args.n) if args.n else None)
        make_grid(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    directory = args.out if args.out is not None else cfg.base_dir / cfg.output.directory
    out = Outputs(cfg, cfg.output.figures and not args.no_figures)
    handler = COMMANDS[args.command][0]
    code = EXIT_OK
    try:
        handler(cfg, out, args)
    except ConfigError as exc:
        out.discard()
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, GradientFloorError, np.linalg.LinAlgError) as exc:
        out.discard()
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        code = EXIT_NUMERIC
    for path in out.publish(directory):
        print(path)
    return code


if __name__ == "__main__":
    sys.exit(main())

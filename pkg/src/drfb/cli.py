"""``drfb`` command line: synthesize gains, simulate, run the observer, report bounds.

Exit codes: 0 ok, 1 configuration or input error, 2 no feasible gains,
3 the simulation or observer diverged.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import bounds, config, svg
from .battery import LinearCrossover, assemble_matrices, linear_crossover_callback, simulate
from .errors import (DivergenceError, DrfbError, InfeasibleError, InstabilityError,
                     NumericalFailureError)
from .observer import ObserverConfig, ObserverState, run
from .synthesis import GainSolution, certify, synthesize
from .telemetry import load_csv, trace_from_trajectory, write_csv

log = logging.getLogger("drfb")

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_DIVERGED = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors, which would read as "infeasible"
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _write_atomic(path, text):
    """Write via a temp file in the target directory, then rename into place."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _csv_text(header, columns):
    # repr gives the shortest string that round-trips each float
    rows = np.column_stack(columns).tolist()
    return ",".join(header) + "\n" + "".join(",".join(map(repr, r)) + "\n" for r in rows)


def _bounds_path(out):
    out = Path(out)
    return out.with_name(out.stem + ".bounds.json")


def _load_gains(path):
    try:
        return GainSolution.from_json(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise config.ConfigError(f"cannot read gains {path}: {exc}") from exc


def _bound_report(cfg: config.RunConfig, sol):
    m = assemble_matrices(cfg.params)
    return bounds.report(cfg.assumptions(), sol, m, cfg.basis, cfg.sigma, cfg.synthesis.beta)


def cmd_synthesize(args):
    cfg = config.load(args.config)
    m = assemble_matrices(cfg.params)
    sol = synthesize(cfg.synthesis, m)
    cert = certify(sol, cfg.synthesis, m)
    log.info("objective %.6g, L = %s, F = %.6g, min certified margin %.3g",
             sol.objective, np.array2string(sol.l_vec, precision=4), sol.f_scalar, cert.min_margin)
    _write_atomic(args.out, sol.to_json(indent=2) + "\n")
    rep = _bound_report(cfg, sol)
    _write_atomic(_bounds_path(args.out), rep.to_json(indent=2) + "\n")
    if not rep.compatible:
        log.warning("gamma^2 > alpha beta: the Lipschitz cross term is not dominated")
    return EXIT_OK


def cmd_simulate(args):
    cfg = config.load(args.config)
    sim = dict(cfg.sim)
    if args.dt is not None:
        sim["dt"] = args.dt
    if args.seed is not None:
        sim["seed"] = args.seed
    m = assemble_matrices(cfg.params)
    crossover = (linear_crossover_callback(LinearCrossover(sim["k_mt"]), cfg.params)
                 if args.mode == "linear" else None)
    traj = simulate(cfg.params, m, crossover, (0.0, sim["flow"]), sim["x0"], sim["dt"], sim["t_end"])
    _write_atomic(args.out, _csv_text(("t_s", "soc", "soc_cell", "voltage_V", "qx_mol_s"),
                                      (traj.t, traj.soc, traj.soc_cell, traj.voltage, traj.q_x)))
    if args.trace:
        trace = trace_from_trajectory(traj, sim["dt"], sim["noise_w"], sim["seed"])
        buf = Path(args.trace)
        tmp = buf.with_name(f".{buf.name}.tmp")
        write_csv(trace, tmp, comment=f"crossover={args.mode} noise_w={sim['noise_w']!r} seed={sim['seed']}")
        os.replace(tmp, buf)
    return EXIT_OK


def cmd_observe(args):
    cfg = config.load(args.config)
    sol = _load_gains(args.gains)
    dt = cfg.dt if args.dt is None else args.dt
    ocfg = ObserverConfig(sol.l_vec, sol.f_scalar, cfg.lambda_inv, cfg.sigma, dt)
    trace = load_csv(args.trace)
    m = assemble_matrices(cfg.params)
    series = run(ocfg, cfg.params, m, cfg.basis, trace, ObserverState(cfg.x_hat0, cfg.theta_hat0))
    header = ("t_s", "soc_hat", "soc_cell_hat", "y_tilde", "qx_hat_mol_s") + tuple(
        f"theta_{j + 1}" for j in range(cfg.m))
    cols = (series.t, series.x_hat[:, 0], series.x_hat[:, 1], series.y_tilde, series.q_x_hat,
            *series.theta_hat.T)
    _write_atomic(args.out, _csv_text(header, cols))
    if args.svg:
        _write_atomic(args.svg, svg.render(svg.estimate_panels(series, series.y)))
    if len(series):
        log.info("final estimate soc = %.6f, soc_cell = %.6f", *series.x_hat[-1])
    return EXIT_OK


def cmd_bounds(args):
    cfg = config.load(args.config)
    rep = _bound_report(cfg, _load_gains(args.gains))
    print(rep.to_json(indent=2))
    if not rep.compatible:
        log.warning("gamma^2 = %.3g exceeds alpha beta = %.3g", rep.gamma ** 2, rep.alpha * rep.beta)
    return EXIT_OK


def build_parser():
    p = _Parser(prog="drfb", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synthesize", help="solve for observer gains; writes OUT and OUT.bounds.json")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synthesize)

    s = sub.add_parser("simulate", help="forward-simulate the battery at open circuit")
    s.add_argument("--config", required=True)
    s.add_argument("--mode", choices=("linear", "zero"), default="linear",
                   help="crossover law: linear in cell SOC, or none")
    s.add_argument("--out", required=True, help="state CSV")
    s.add_argument("--trace", help="also write the sensor telemetry CSV here")
    s.add_argument("--seed", type=int, help="noise seed (overrides simulate.seed)")
    s.add_argument("--dt", type=float, help="step in s (overrides simulate.dt)")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("observe", help="run the adaptive observer over a telemetry CSV")
    s.add_argument("--config", required=True)
    s.add_argument("--gains", required=True)
    s.add_argument("--trace", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--svg", help="write summary charts here")
    s.add_argument("--dt", type=float, help="observer step in s (overrides observer.dt)")
    s.set_defaults(func=cmd_observe)

    s = sub.add_parser("bounds", help="print the ultimate-bound report as JSON")
    s.add_argument("--config", required=True)
    s.add_argument("--gains", required=True)
    s.set_defaults(func=cmd_bounds)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InfeasibleError as exc:
        print(f"drfb: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except NumericalFailureError as exc:
        print(f"drfb: solver failed: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (DivergenceError, InstabilityError) as exc:
        print(f"drfb: diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (DrfbError, OSError) as exc:
        print(f"drfb: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

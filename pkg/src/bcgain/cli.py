"""Command-line entry point: ``bcgain <subcommand> ...``.

Exit codes: 0 success, 1 configuration error, 2 numerical failure,
64 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import sys
from pathlib import Path

import numpy as np

from . import _backend
from .bounds import (FailureBoundQuery, amplification_index, failure_bound_terms,
                     r95_threshold)
from .canonical import REGIMES, RegimeQuad, continuous_position_variance
from .config import GridSpec, RunConfig, default_output_dir, load_config, parse_noise
from .dynamics import GainSetting, PlantModel, build_error_dynamics, zoh_discretize
from .errors import ConfigError, NumericalError
from .experiments import (TABLE1_COLUMNS, ExperimentConfig, convergence_slope,
                          envelopes_fig2, failure_curve, regime_rows, sweep_heatmap,
                          zoh_inheritance_study)
from .lyapunov import finite_horizon_proxy, stationary_proxy
from .montecarlo import EnsembleConfig, NoiseModel, simulate
from .output import dumps, to_csv, write_csv, write_json, write_manifest

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2, 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _pair(text):
    vals = _floats(text)
    if len(vals) != 2:
        raise argparse.ArgumentTypeError(f"expected two comma-separated numbers, got {text!r}")
    return tuple(vals)


def _add_system(p):
    p.add_argument("--config", type=Path, help="JSON run configuration")
    p.add_argument("--m", type=_floats, help="mass (scalar or comma list for a diagonal mass)")
    p.add_argument("--dt", type=float, help="control period in seconds")
    p.add_argument("--kp", type=_floats, help="stiffness gain(s)")
    p.add_argument("--kd", type=_floats, help="damping gain(s)")


def _add_output(p):
    p.add_argument("--output-dir", type=Path, default=None,
                   help="output directory (default $BCGAIN_OUTPUT_DIR or ./bcgain-out)")


def build_parser():
    parser = _Parser(prog="bcgain", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("discretize", help="exact ZOH closed loop of a plant/gain pair")
    _add_system(p)
    p.add_argument("--emit-json", action="store_true", help="print matrices as JSON")

    p = sub.add_parser("lyapunov", help="finite-horizon or stationary proxy")
    _add_system(p)
    p.add_argument("--sigma", type=_floats, help="action-error proxy (scalar or diagonal)")
    p.add_argument("--horizon", type=int, help="finite horizon t (stationary if omitted)")

    p = sub.add_parser("bound", help="horizon-T failure bound")
    _add_system(p)
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--T", type=int, required=True, dest="T")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--lva", type=float, required=True)
    p.add_argument("--eps", type=float, default=0.0)
    p.add_argument("--gamma", type=float, help="amplification index (computed if omitted)")

    p = sub.add_parser("simulate", help="Monte Carlo envelopes and failure rate")
    _add_system(p)
    _add_output(p)
    p.add_argument("--rollouts", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--radius", type=float)
    p.add_argument("--percentiles", type=_floats)
    p.add_argument("--parallel-width", type=int)

    p = sub.add_parser("regimes", help="four-regime table")
    p.add_argument("--alpha", type=_pair, default=(50.0, 100.0))
    p.add_argument("--beta", type=_pair, default=(20.0, 40.0))
    p.add_argument("--m", type=float, default=1.0)
    p.add_argument("--dt", type=float, default=0.02)
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--rollouts", type=int, default=0, help="add Monte Carlo failure rates")
    p.add_argument("--horizon", type=int, default=50)
    p.add_argument("--radius", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--json", action="store_true", help="print JSON instead of CSV")
    p.add_argument("--output-dir", type=Path, default=None)

    p = sub.add_parser("sweep", help="stationary proxy over a gain grid")
    _add_output(p)
    p.add_argument("--kp-range", type=_pair, default=(5.0, 200.0))
    p.add_argument("--kd-range", type=_pair, default=(5.0, 200.0))
    p.add_argument("--resolution", type=int, default=50)
    p.add_argument("--spacing", choices=("log", "linear"), default="log")
    p.add_argument("--m", type=float, default=1.0)
    p.add_argument("--dt", type=float, default=0.02)
    p.add_argument("--sigma2", type=float, default=1.0)

    p = sub.add_parser("reproduce", help="regenerate the published table and figure data")
    p.add_argument("target", choices=("table1", "fig2", "fig3", "fig4", "inheritance", "all"))
    _add_output(p)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--rollouts", type=int, default=50_000)
    p.add_argument("--parallel-width", type=int, default=1)
    return parser


def _system(args):
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    plant, gains = cfg.plant, cfg.gains
    if args.m is not None or args.dt is not None:
        m = args.m if args.m is not None else (np.diag(plant.m).tolist() if plant else None)
        dt = args.dt if args.dt is not None else (plant.dt if plant else None)
        if m is None or dt is None:
            raise ConfigError("plant needs both --m and --dt")
        plant = PlantModel.diagonal(m, dt) if len(m) > 1 else PlantModel.scalar(m[0], dt)
    if args.kp is not None or args.kd is not None:
        kp = args.kp if args.kp is not None else (gains.kp if gains else None)
        kd = args.kd if args.kd is not None else (gains.kd if gains else None)
        if kp is None or kd is None:
            raise ConfigError("gains need both --kp and --kd")
        gains = GainSetting(kp, kd)
    return cfg, plant, gains


def _loop(args):
    cfg, plant, gains = _system(args)
    if plant is None or gains is None:
        raise ConfigError("a plant (--m, --dt) and gains (--kp, --kd) are required")
    if plant.n != gains.n:
        raise ConfigError(f"plant has {plant.n} joints but gains have {gains.n}")
    sys_c = build_error_dynamics(plant, gains)
    return cfg, sys_c, zoh_discretize(sys_c, plant.dt)


def _out_dir(args, cfg=None):
    if args.output_dir is not None:
        return args.output_dir
    if cfg is not None and cfg.output_dir is not None:
        return cfg.output_dir
    return default_output_dir()


def cmd_discretize(args, out):
    _, sys_c, loop = _loop(args)
    payload = {"a_c": sys_c.a_c, "b_c": sys_c.b_c, "a": loop.a, "b": loop.b, "c": loop.c,
               "spectral_radius": loop.spectral_radius, "dt": loop.dt}
    if args.emit_json:
        out.write(dumps(payload))
    else:
        out.write(f"spectral_radius {loop.spectral_radius:.6f}\n")
        out.write(f"A_K =\n{np.array2string(loop.a, precision=6)}\n")
        out.write(f"B_K =\n{np.array2string(loop.b, precision=6)}\n")


def _sigma(args, cfg, n):
    if args.sigma is not None:
        s = args.sigma
        return np.diag(s) if len(s) > 1 else np.eye(n) * s[0]
    if cfg.noise is not None:
        return cfg.noise.sigma_roll
    return np.eye(n)


def cmd_lyapunov(args, out):
    cfg, _, loop = _loop(args)
    sigma = _sigma(args, cfg, loop.n_inputs)
    res = (finite_horizon_proxy(loop, sigma, args.horizon) if args.horizon
           else stationary_proxy(loop, sigma))
    out.write(dumps({"horizon": res.horizon, "s": res.s, "x": res.x, "residual": res.residual}))


def cmd_bound(args, out):
    query = FailureBoundQuery(r=args.r, t_horizon=args.T, l_va=args.lva, eps_gen=args.eps, n=args.n)
    if args.gamma is not None:
        gamma = args.gamma
    else:
        _, _, loop = _loop(args)
        gamma = amplification_index(loop, args.T).gamma
    terms = failure_bound_terms(query, gamma)
    out.write(dumps({"gamma": gamma, "exponent": terms.exponent,
                     "bound_raw": terms.raw, "bound_clipped": terms.clipped}))


def cmd_simulate(args, out):
    cfg, _, loop = _loop(args)
    noise = cfg.noise if cfg.noise is not None else NoiseModel.gaussian(np.eye(loop.n_inputs))
    base = cfg.mc or EnsembleConfig(50_000, 50, 0)
    mc = EnsembleConfig(
        n_rollouts=args.rollouts or base.n_rollouts,
        horizon=args.horizon or base.horizon,
        seed=base.seed if args.seed is None else args.seed,
        parallel_width=args.parallel_width or base.parallel_width,
    )
    radius = args.radius if args.radius is not None else (cfg.query.r if cfg.query else 0.3)
    levels = tuple(args.percentiles or (50.0, 95.0, 99.0))
    ens = simulate(loop, noise, mc)
    x_inf = stationary_proxy(loop, noise.sigma_roll).x
    try:
        r95 = r95_threshold(x_inf)
    except ConfigError:
        r95 = math.nan
    stats = ens.stats(radius, levels, r95_theory=r95)
    out_dir = _out_dir(args, cfg)
    header = ["t"] + [f"p{v:g}" for v in levels] + ["r95_theory"]
    rows = [[t, *stats.envelopes[t], r95] for t in range(mc.horizon + 1)]
    files = [write_csv(out_dir / "envelopes.csv", header, rows)]
    files.append(write_json(out_dir / "stats.json", {
        "failure_rate": stats.failure_rate, "ci_halfwidth": stats.ci_halfwidth,
        "radius": stats.radius, "max_abs_error": stats.max_abs_error,
        "r95_theory": r95, "n_rollouts": mc.n_rollouts, "horizon": mc.horizon,
        "backend": ens.backend,
    }))
    run = {"config": cfg.raw or {}, "mc": dataclasses.asdict(mc), "radius": radius,
           "levels": list(levels), "kp": args.kp, "kd": args.kd, "m": args.m, "dt": args.dt}
    files.append(write_manifest(out_dir, "simulate", run, mc.seed, files, ens.backend))
    out.write(f"failure_rate {stats.failure_rate:.6f} +- {stats.ci_halfwidth:.6f}\n")
    out.write(f"wrote {len(files)} files to {out_dir}\n")


def _regime_payload(rows):
    return to_csv(TABLE1_COLUMNS, [dataclasses.astuple(r) for r in rows])


def cmd_regimes(args, out):
    econf = ExperimentConfig(m=args.m, dt=args.dt, alpha_l=args.alpha[0], alpha_h=args.alpha[1],
                             beta_l=args.beta[0], beta_h=args.beta[1], sigma2=args.sigma2,
                             n_rollouts=max(args.rollouts, 1), horizon=args.horizon,
                             radius=args.radius, seed=args.seed)
    try:
        econf.quad
    except ConfigError as exc:
        raise ConfigError(f"--alpha/--beta: {exc}") from None
    rows = regime_rows(econf, simulate_failures=args.rollouts > 0)
    text = _regime_payload(rows)
    records = [dataclasses.asdict(r) for r in rows]
    out.write(dumps(records) if args.json else text)
    if args.output_dir is not None:
        files = [args.output_dir / "regimes.csv", args.output_dir / "regimes.json"]
        files[0].parent.mkdir(parents=True, exist_ok=True)
        files[0].write_text(text, encoding="utf-8")
        write_json(files[1], records)
        write_manifest(args.output_dir, "regimes", econf.to_dict(), econf.seed, files,
                       _backend.NAME)


SWEEP_COLUMNS = ["kp", "kd", "x_inf_d", "x_inf_normalized", "log10_normalized", "stable"]


def _sweep_rows(cells):
    return [[c.kp, c.kd, c.x_inf_d, c.x_inf_normalized, c.log10_normalized, int(c.stable)]
            for c in cells]


def cmd_sweep(args, out):
    cells = sweep_heatmap(args.kp_range, args.kd_range, args.resolution, m=args.m, dt=args.dt,
                          sigma2=args.sigma2, spacing=args.spacing)
    out_dir = _out_dir(args)
    files = [write_csv(out_dir / "sweep.csv", SWEEP_COLUMNS, _sweep_rows(cells))]
    run = {k: v for k, v in vars(args).items() if k not in ("output_dir", "func")}
    write_manifest(out_dir, "sweep", run, None, files, _backend.NAME)
    out.write(f"wrote {len(cells)} cells to {files[0]}\n")


R_GRID = tuple(round(0.1 * k, 10) for k in range(1, 11))


def reproduce(target, out_dir, config: ExperimentConfig):
    """Write the data behind the table/figures into ``out_dir``; returns the file list."""
    out_dir = Path(out_dir)
    files = []
    targets = ("table1", "fig2", "fig3", "fig4", "inheritance") if target == "all" else (target,)
    if "table1" in targets:
        rows = regime_rows(config)
        files.append(write_csv(out_dir / "table1.csv", TABLE1_COLUMNS,
                               [dataclasses.astuple(r) for r in rows]))
        files.append(write_json(out_dir / "table1.json", [dataclasses.asdict(r) for r in rows]))
    if "fig2" in targets:
        for regime, st in envelopes_fig2(config).items():
            header = ["t", "p50", "p95", "p99", "r95_theory"]
            rows = [[t, *st.envelopes[t], st.r95_theory] for t in range(config.horizon + 1)]
            files.append(write_csv(out_dir / f"fig2_envelopes_{regime}.csv", header, rows))
    if "fig3" in targets:
        cells = sweep_heatmap(m=config.m, dt=config.dt, sigma2=config.sigma2, quad=config.quad)
        files.append(write_csv(out_dir / "fig3_heatmap.csv", SWEEP_COLUMNS, _sweep_rows(cells)))
    if "fig4" in targets:
        curves = failure_curve(config.quad, R_GRID, config.ensemble, m=config.m, dt=config.dt,
                               sigma2=config.sigma2)
        rows = [[p.regime, p.r, p.empirical, p.std_error, p.bound, p.gamma]
                for regime in REGIMES for p in curves[regime]]
        files.append(write_csv(out_dir / "fig4_failure.csv",
                               ["regime", "r", "empirical", "std_error", "bound", "gamma"], rows))
    if "inheritance" in targets:
        rows, slopes = [], {}
        for regime in REGIMES:
            recs = zoh_inheritance_study(*config.quad.point(regime), m=config.m, sigma2=config.sigma2)
            slopes[regime] = convergence_slope(recs)
            rows += [[regime, r.dt, r.x_d_over_dt, r.x_c, r.rel_error] for r in recs]
        files.append(write_csv(out_dir / "inheritance.csv",
                               ["regime", "dt", "x_d_over_dt", "x_c", "rel_error"], rows))
        files.append(write_json(out_dir / "inheritance_slopes.json", slopes))
    run = config.to_dict()
    run["target"] = target
    files.append(write_manifest(out_dir, f"reproduce {target}", run, config.seed, files,
                                _backend.NAME))
    return files


def cmd_reproduce(args, out):
    config = ExperimentConfig(seed=args.seed, n_rollouts=args.rollouts,
                              parallel_width=args.parallel_width)
    out_dir = _out_dir(args)
    files = reproduce(args.target, out_dir, config)
    for f in files:
        out.write(f"{f}\n")


COMMANDS = {
    "discretize": cmd_discretize,
    "lyapunov": cmd_lyapunov,
    "bound": cmd_bound,
    "simulate": cmd_simulate,
    "regimes": cmd_regimes,
    "sweep": cmd_sweep,
    "reproduce": cmd_reproduce,
}


def run(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        COMMANDS[args.command](args, out)
    except ConfigError as exc:
        err.write(f"bcgain {args.command}: configuration error: {exc}\n")
        return EXIT_CONFIG
    except NumericalError as exc:
        err.write(f"bcgain {args.command}: numerical failure: {exc}\n")
        return EXIT_NUMERIC
    except OSError as exc:
        err.write(f"bcgain {args.command}: {exc}\n")
        return EXIT_CONFIG
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()

"""Command-line driver.

Subcommands::

    preyswitch simulate   integrate one of the models and write the trajectory
    preyswitch stability  steady state, eigenvalues and thresholds (or a grid)
    preyswitch synth      noisy synthetic predator observations
    preyswitch fit        ABC-PMC fit of a smooth model to a time series
    preyswitch summarize  weighted summary of an exported particle population

Exit codes: 0 on success, 1 on invalid parameters or input, 2 on numerical
failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dataio import (export_population, export_trajectory, fmt, generate_synthetic,
                     import_population, load_timeseries, normalize_l2, save_timeseries,
                     write_rows)
from .equilibria import (k1_curve, stability_map, stability_smooth1, stability_smooth2,
                         steady_state_smooth1, steady_state_smooth2)
from .errors import (ConvergenceFailure, InfeasibleSteadyState, IntegrationError,
                     ParameterError, ParseError, RejectCandidate, StarvedAcceptance,
                     ZeroVector)
from .fitting import (DEFAULT_BOUNDS, DEFAULT_TOLERANCE, FitConfig, PriorSpec, abc_pmc,
                      distance, initial_state, predict, progress_to_stderr,
                      sample_posterior, weighted_quantile)
from .integrate import IntegratorOptions, integrate_piecewise, integrate_smooth
from .models import ModelParams

EXIT_OK, EXIT_PARAM, EXIT_NUMERIC = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    """Argument errors are parameter errors (exit code 1)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_PARAM, f"{self.prog}: error: {message}\n")


class _Formatter(argparse.ArgumentDefaultsHelpFormatter, argparse.RawDescriptionHelpFormatter):
    """Show defaults for every option that has one worth printing."""

    def _get_help_string(self, action):
        text = action.help or ""
        if any(action.default is x for x in (None, False, argparse.SUPPRESS)) or "%(default)" in text:
            return text
        if action.option_strings or action.nargs in (argparse.OPTIONAL, argparse.ZERO_OR_MORE):
            text += " (default: %(default)s)"
        return text


# ---------------------------------------------------------------------------
# argument helpers


def parse_assignment(text: str) -> tuple[str, str]:
    name, sep, value = text.partition("=")
    if not sep or not name.strip() or not value.strip():
        raise ParameterError(f"expected name=value, got {text!r}")
    return name.strip(), value.strip()


def params_from_sets(sets: list[str] | None, base: ModelParams | None = None) -> ModelParams:
    """Apply ``--set name=value`` overrides to the default parameter set."""
    p = base or ModelParams()
    changes = {}
    for item in sets or []:
        name, value = parse_assignment(item)
        try:
            changes[name] = float(value)
        except ValueError:
            raise ParameterError(f"{name}: {value!r} is not a number") from None
    return p.replace(**changes)


def parse_range(text: str) -> np.ndarray:
    """``lo:hi:n`` -> ``n`` evenly spaced values."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ParameterError(f"expected lo:hi:n, got {text!r}")
    try:
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ParameterError(f"malformed range {text!r}") from None
    if n < 1 or not lo <= hi:
        raise ParameterError(f"range {text!r} needs lo <= hi and n >= 1")
    return np.linspace(lo, hi, n)


def parse_grid(text: str) -> tuple[np.ndarray, np.ndarray]:
    axes = {}
    for item in text.split(","):
        name, spec = parse_assignment(item)
        if name not in ("aq", "k"):
            raise ParameterError(f"grid axes are aq and k, got {name!r}")
        axes[name] = parse_range(spec)
    if set(axes) != {"aq", "k"}:
        raise ParameterError("grid needs both aq=lo:hi:n and k=lo:hi:n")
    return axes["aq"], axes["k"]


def parse_vector(text: str) -> np.ndarray:
    try:
        return np.array([float(x) for x in text.split(",")])
    except ValueError:
        raise ParameterError(f"malformed state vector {text!r}") from None


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _integrator_options(args) -> IntegratorOptions:
    return IntegratorOptions(rel_tol=args.rtol, abs_tol=args.atol, max_step=args.max_step)


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    p = params_from_sets(args.set)
    smooth = args.model != "piecewise"
    p.validate(smooth=smooth)
    if args.y0 == "steady":
        if args.model == "smooth2":
            y0 = np.array(steady_state_smooth2(p))
        else:
            y0 = np.array(steady_state_smooth1(p))
    elif args.y0 == "default":
        y0 = initial_state(args.model, p) if args.model == "smooth2" else np.ones(3)
    else:
        y0 = parse_vector(args.y0)
    opts = _integrator_options(args)
    span = (0.0, args.t_end)
    if args.model == "piecewise":
        traj = integrate_piecewise(y0, span, p, opts)
    else:
        traj = integrate_smooth(args.model, y0, span, p, opts)
    times = None
    if args.dt_out:
        n = int(math.floor(args.t_end / args.dt_out + 1e-9)) + 1
        times = np.arange(n) * args.dt_out
    out = Path(args.out) / "trajectory.csv"
    export_trajectory(traj, out, times)
    print(f"wrote {out}")
    for seg in traj.segments:
        print(f"segment {seg.label} {fmt(seg.t_start)} {fmt(seg.t_end)}")
    print("final " + " ".join(f"{c}={fmt(v)}" for c, v in zip(traj.columns, traj.states[-1])))
    return EXIT_OK


def cmd_stability(args) -> int:
    p = params_from_sets(args.set)
    p.validate(smooth=True)
    out = Path(args.out)
    if args.grid:
        if args.model != "smooth1":
            raise ParameterError("the (aq, k) grid applies to smooth1")
        aq_values, k_values = parse_grid(args.grid)
        rows = stability_map(p, aq_values, k_values)
        cols = ["aq", "k", "k0", "k1", "p1", "p2", "z", "feasible", "classification", "max_real"]
        write_rows(out / "stability_grid.csv", cols, ([r[c] for c in cols] for r in rows))
        curve = k1_curve(p, aq_values)
        write_rows(out / "k1_curve.csv", ["aq", "k1"], ([r["aq"], r["k1"]] for r in curve))
        counts = {}
        for r in rows:
            counts[r["classification"]] = counts.get(r["classification"], 0) + 1
        print(f"wrote {out / 'stability_grid.csv'} ({len(rows)} cells) and {out / 'k1_curve.csv'}")
        for name in sorted(counts):
            print(f"{name}: {counts[name]}")
        return EXIT_OK

    try:
        rep = stability_smooth1(p) if args.model == "smooth1" else stability_smooth2(p)
    except InfeasibleSteadyState as exc:
        print(f"classification: infeasible ({exc})")
        _write_json(out / "stability.json", {"model": args.model, "classification": "infeasible"})
        return EXIT_OK
    report = rep.to_dict()
    for key in sorted(report):
        value = report[key]
        if isinstance(value, list):
            value = ", ".join(fmt(v) for v in value)
        elif isinstance(value, float):
            value = fmt(value)
        print(f"{key}: {value}")
    _write_json(out / "stability.json", report)
    return EXIT_OK


def cmd_synth(args) -> int:
    p = params_from_sets(args.set)
    p.validate(smooth=True)
    times = np.linspace(0.0, args.window, args.n_points)
    ts = generate_synthetic(args.model, p, times, args.sigma, args.seed, phase=args.phase,
                            transient=args.transient, horizon=args.horizon)
    out = Path(args.out) / "data.csv"
    save_timeseries(ts, out)
    print(f"wrote {out} ({len(ts)} points)")
    return EXIT_OK


def _prior_from_args(model: str, items: list[str] | None) -> PriorSpec:
    prior = PriorSpec.default(model)
    bounds = {}
    for item in items or []:
        name, spec = parse_assignment(item)
        try:
            lo, hi = (float(x) for x in spec.split(":"))
        except ValueError:
            raise ParameterError(f"prior for {name} must be lo:hi, got {spec!r}") from None
        bounds[name] = (lo, hi)
    return prior.with_bounds(**bounds)


def _histogram_rows(values: np.ndarray, lo: float, hi: float, bins: int):
    if hi <= lo:
        hi = lo + 1.0
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    total = max(int(counts.sum()), 1)
    for i, c in enumerate(counts):
        yield [edges[i], edges[i + 1], int(c), c / total]


def cmd_fit(args) -> int:
    data = load_timeseries(args.data)
    fixed = {"e": 0.25, "q1": 1.0, "q2": 0.5, "beta1": 1.0, "beta2": 1.0}
    for item in args.set or []:
        name, value = parse_assignment(item)
        try:
            fixed[name] = float(value)
        except ValueError:
            raise ParameterError(f"{name}: {value!r} is not a number") from None
    prior = _prior_from_args(args.model, args.prior)
    cfg = FitConfig(model=args.model, n_particles=args.particles, n_iterations=args.iterations,
                    initial_tolerance=args.tolerance, quantile=args.quantile,
                    sim_horizon=args.horizon, transient=args.transient, seed=args.seed,
                    threads=args.threads, acceptance_floor=args.acceptance_floor,
                    fixed=fixed)
    cfg.base_params.validate(smooth=True)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def progress(pop):
        export_population(pop, out / f"population_{pop.iteration:02d}.csv")
        if not args.quiet:
            progress_to_stderr(pop)

    status = "complete"
    try:
        pops = abc_pmc(data, prior, cfg, progress=progress)
    except StarvedAcceptance as exc:
        print(f"error: {exc}", file=sys.stderr)
        pops = exc.populations
        status = "starved"
    summary = {"model": cfg.model, "status": status, "iterations_completed": len(pops),
               "seed": cfg.seed, "n_particles": cfg.n_particles, "data": str(args.data),
               "prior": {n: [lo, hi] for n, lo, hi in zip(prior.names, prior.lows, prior.highs)},
               "fixed": fixed, "tolerances": [pop.tolerance for pop in pops],
               "simulations": [pop.simulations for pop in pops]}
    if not pops:
        _write_json(out / "summary.json", summary)
        return EXIT_NUMERIC

    final = pops[-1]
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(10**6,)))
    sample = sample_posterior(final, args.samples, rng)
    write_rows(out / "posterior_sample.csv", list(final.names), sample)
    hist_names = ("k", "aq") if cfg.model == "smooth1" else ("nu",)
    for name in hist_names:
        if name in final.names:
            i = final.names.index(name)
            write_rows(out / f"histogram_{name}.csv", ["bin_lo", "bin_hi", "count", "frequency"],
                       _histogram_rows(sample[:, i], prior.lows[i], prior.highs[i], args.bins))

    theta, best_d = final.best()
    p_best = cfg.params_for(final.names, theta)
    summary.update(final_tolerance=final.tolerance, min_distance=best_d,
                   best_particle=dict(zip(final.names, map(float, theta))),
                   medians={n: final.weighted_median(n) for n in final.names},
                   quantiles_05_95={n: [weighted_quantile(final.particles[:, i], final.weights, q)
                                        for q in (0.05, 0.95)]
                                    for i, n in enumerate(final.names)})
    try:
        values, _, traj = predict(cfg.model, p_best, data, cfg)
    except RejectCandidate as exc:
        summary["best_noise_free_distance"] = None
        print(f"warning: best particle has no noise-free prediction ({exc})", file=sys.stderr)
    else:
        export_trajectory(traj, out / "best_trajectory.csv")
        write_rows(out / "best_fit.csv", ["t", "data_normalized", "model_normalized"],
                   zip(data.times, normalize_l2(data.values), normalize_l2(values)))
        summary["best_noise_free_distance"] = distance(values, data.values)
    _write_json(out / "summary.json", summary)
    print(f"final tolerance {fmt(final.tolerance)}, min distance {fmt(best_d)}")
    print(f"wrote {len(pops)} population files and summary to {out}")
    return EXIT_OK if status == "complete" else EXIT_NUMERIC


def cmd_summarize(args) -> int:
    pop = import_population(args.population)
    if len(pop) == 0:
        raise ParameterError("population file has no particles")
    w = pop.weights / pop.weights.sum()
    print(f"iteration {pop.iteration}, tolerance {fmt(pop.tolerance)}, "
          f"{len(pop)} particles, min distance {fmt(pop.distances.min())}")
    rows = []
    for i, name in enumerate(pop.names):
        col = pop.particles[:, i]
        qs = [weighted_quantile(col, w, q) for q in (0.05, 0.5, 0.95)]
        mean = float(w @ col)
        rows.append([name, mean, *qs])
        print(f"{name:>6s}  mean {mean:.6g}  median {qs[1]:.6g}  90% [{qs[0]:.6g}, {qs[2]:.6g}]")
    if args.out:
        write_rows(Path(args.out) / "summary.csv", ["parameter", "mean", "q05", "median", "q95"], rows)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _prior_help(model: str) -> str:
    b = DEFAULT_BOUNDS[model]
    return ", ".join(f"{n} in ({lo:g}, {hi:g})" for n, (lo, hi) in b.items())


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="preyswitch", description=__doc__.split("\n")[0],
                     formatter_class=_Formatter)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, models, default_model):
        sp.add_argument("--model", choices=models, default=default_model, help="model variant")
        sp.add_argument("--set", action="append", metavar="NAME=VALUE",
                        help="override a model parameter (repeatable); defaults: "
                             + ", ".join(f"{k}={v:g}" for k, v in ModelParams().to_dict().items()))
        sp.add_argument("--out", default=".", metavar="DIR", help="output directory")

    sp = sub.add_parser("simulate", help="integrate a model", formatter_class=_Formatter)
    common(sp, ["smooth1", "smooth2", "piecewise"], "smooth1")
    sp.add_argument("--y0", default="default",
                    help="initial state as comma list, 'steady', or 'default' "
                         "((1,1,1); smooth2 uses the perturbed coexistence state)")
    sp.add_argument("--t-end", type=float, default=400.0, help="simulated days")
    sp.add_argument("--dt-out", type=float, default=0.0,
                    help="resample the output on this grid (0 keeps integrator nodes)")
    sp.add_argument("--rtol", type=float, default=1e-9, help="relative error tolerance")
    sp.add_argument("--atol", type=float, default=1e-9, help="absolute error tolerance")
    sp.add_argument("--max-step", type=float, default=math.inf, help="largest step in days")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("stability", help="steady state and linear stability",
                        formatter_class=_Formatter)
    common(sp, ["smooth1", "smooth2"], "smooth1")
    sp.add_argument("--grid", metavar="aq=LO:HI:N,k=LO:HI:N",
                    help="evaluate smooth1 on an (aq, k) grid instead of a single point")
    sp.set_defaults(func=cmd_stability)

    sp = sub.add_parser("synth", help="synthetic noisy predator observations",
                        formatter_class=_Formatter)
    common(sp, ["smooth1", "smooth2"], "smooth1")
    sp.add_argument("--n-points", type=int, default=20, help="number of observations")
    sp.add_argument("--window", type=float, default=105.0, help="observation window in days")
    sp.add_argument("--sigma", type=float, default=0.02, help="relative noise scale")
    sp.add_argument("--phase", type=float, default=0.0,
                    help="days between the end of the transient and the first observation")
    sp.add_argument("--transient", type=float, default=60.0, help="discarded days")
    sp.add_argument("--horizon", type=float, default=400.0, help="shortest simulated run in days")
    sp.add_argument("--seed", type=int, default=0, help="noise seed")
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser(
        "fit", help="ABC-PMC parameter fit", formatter_class=_Formatter,
        epilog="default priors (uniform):\n  smooth1: " + _prior_help("smooth1")
               + "\n  smooth2: " + _prior_help("smooth2")
               + f"\ndefault initial tolerance: smooth1 {DEFAULT_TOLERANCE['smooth1']:g}, "
                 f"smooth2 {DEFAULT_TOLERANCE['smooth2']:g}"
               + "\nfixed: e=0.25, q1=1, q2=0.5, beta1=beta2=1; smooth2 also aq=q2")
    sp.add_argument("data", help="CSV file with header t,value")
    sp.add_argument("--model", choices=["smooth1", "smooth2"], default="smooth1",
                    help="model variant")
    sp.add_argument("--set", action="append", metavar="NAME=VALUE",
                    help="override a fixed (non-fitted) parameter (repeatable)")
    sp.add_argument("--prior", action="append", metavar="NAME=LO:HI",
                    help="override the uniform prior of a fitted parameter (repeatable)")
    sp.add_argument("--particles", type=int, default=2000, help="particles per population")
    sp.add_argument("--iterations", type=int, default=10, help="PMC iterations")
    sp.add_argument("--tolerance", type=float, default=None,
                    help="first-iteration tolerance (model default when omitted)")
    sp.add_argument("--quantile", type=float, default=0.10,
                    help="accepted-distance quantile setting the next tolerance")
    sp.add_argument("--horizon", type=float, default=400.0, help="simulated days")
    sp.add_argument("--transient", type=float, default=60.0, help="discarded days")
    sp.add_argument("--acceptance-floor", type=float, default=1e-5,
                    help="stop when a particle needs more than 1/floor simulations")
    sp.add_argument("--samples", type=int, default=10000, help="posterior sample size")
    sp.add_argument("--bins", type=int, default=20, help="histogram bins")
    sp.add_argument("--seed", type=int, default=0, help="master seed")
    sp.add_argument("--threads", type=int, default=None,
                    help="worker threads (default: available CPUs)")
    sp.add_argument("--out", default="fit_output", metavar="DIR", help="output directory")
    sp.add_argument("--quiet", action="store_true", help="no progress on stderr")
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("summarize", help="summarize a population CSV",
                        formatter_class=_Formatter)
    sp.add_argument("population", help="population CSV written by fit")
    sp.add_argument("--out", default=None, metavar="DIR", help="also write summary.csv here")
    sp.set_defaults(func=cmd_summarize)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParameterError, ParseError, ZeroVector, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAM
    except (IntegrationError, ConvergenceFailure, InfeasibleSteadyState, StarvedAcceptance) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

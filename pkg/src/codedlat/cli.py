"""Experiment front end: presets, CSV emission, plots, and the oracle suite.

Every figure command resolves a config (from a named preset or a JSON file),
runs the engines, writes CSV files plus a manifest, and renders SVG plots by
reading the CSVs back -- plots are a view of the emitted data, never a
second computation path.  Re-running a command from its own manifest
reproduces the CSV bytes exactly.

Exit codes: 0 success, 2 config error, 3 validation failure, 4 infeasible
optimization.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from . import __version__, analytic, ctmc, montecarlo, reliability, validation
from .model import ConstraintSet, DivisibilityError, RangeError, SystemParams
from .optimizer import TaskFamily, divisors_leq, sweep_epsilon

DEFAULT_SEED = 20240601

_EPS_HALF = [round(0.05 * i, 2) for i in range(11)]  # 0.0 .. 0.5


def _fig10(sub):
    return {
        "kind": "sweep",
        "n": 40, "m": 120, "mu1": 1.0, "mu2": 5.0,
        "gamma_t": 7, "tau_t": 10.0, "alpha": 0.05, "delta": 0.01,
        "eps_grid": _EPS_HALF,
        "subfigures": sub,
        "trials": 100000,
    }


PRESETS = {
    "fig2a": {
        "kind": "bounds_vs_n", "k": 500, "m": 500, "mu1": 10.0, "mu2": 1.0, "epsilon": 0.1,
        "n_grid": list(range(500, 1501, 100)),
        "assumed": {"n_grid": "axis range not stated; using 500..1500 step 100"},
    },
    "fig2b": {
        "kind": "bounds_vs_n", "k": 500, "m": 500, "mu1": 1.0, "mu2": 10.0, "epsilon": 0.1,
        "n_grid": list(range(500, 1501, 100)),
        "assumed": {"n_grid": "axis range not stated; using 500..1500 step 100"},
    },
    "fig3": {
        "kind": "bounds_vs_eps", "k": 500, "m": 500, "mu1": 10.0, "mu2": 1.0, "n": 750,
        "eps_grid": _EPS_HALF,
        "assumed": {"n": "fixed worker count not stated; using 750", "eps_grid": "0..0.5 step 0.05"},
    },
    "fig4": {
        "kind": "bound_gaps_vs_n", "k": 500, "m": 500, "mu1": 10.0, "mu2": 1.0, "epsilon": 0.1,
        "n_grid": list(range(500, 1501, 100)),
        "assumed": {"n_grid": "gap diagnostic over the same assumed grid as fig2a"},
    },
    "fig5": {
        "kind": "upper_vs_rate", "n": 100, "m": 500, "mu1": 1.0, "mu2": 10.0,
        "eps_list": [0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
        "assumed": {"eps_list": "curve family not enumerated; using 0..0.5 step 0.1"},
    },
    "fig6": {
        "kind": "rate_design_mc", "n": 100, "m": 500, "mu1": 1.0, "mu2": 10.0,
        "eps_list": [0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
        "trials": 20000,
        "assumed": {"eps_list": "curve family not enumerated; using 0..0.5 step 0.1"},
    },
    "fig6eps": {
        "kind": "success_vs_eps", "n": 40, "m": 120,
        "pairs": [[10, 14], [20, 10], [40, 7]],
        "eps_grid": [round(0.02 * i, 2) for i in range(31)],
        "assumed": {"pairs": "per-k caps not stated; chosen to keep the 2:1 bandwidth ratio of k=10 vs k=40"},
    },
    "fig7": {
        "kind": "success_vs_gamma", "n": 40, "m": 120, "epsilon": 0.3,
        "ks": [10, 20, 30, 40], "gamma_max": 25, "delta": 0.01,
    },
    "fig8": {
        "kind": "cdf_vs_k", "n": 40, "m": 120, "gamma": 13, "tau": 8.6, "epsilon": 0.3,
        "mu1": 1.0, "mu2": 5.0, "ks": [10, 12, 15, 20, 24, 30, 40], "trials": 100000,
        "assumed": {"ks": "all divisors of m with shard fitting the cap; captions show 10,20,30,40"},
    },
    "fig9": {
        "kind": "cdf_vs_gamma", "n": 40, "m": 120, "tau_t": 8.6, "epsilon": 0.3,
        "mu1": 1.0, "mu2": 5.0, "ks": [10, 20, 30, 40], "gamma_max": 20, "trials": 100000,
    },
    "fig10": _fig10(["a", "b", "c"]),
    "fig10a": _fig10(["a"]),
    "fig10b": _fig10(["b"]),
    "fig10c": _fig10(["c"]),
}

_COMMAND_KINDS = {
    "bounds": {"bounds_vs_n", "bounds_vs_eps", "bound_gaps_vs_n"},
    "ratedesign": {"upper_vs_rate", "rate_design_mc"},
    "reliability": {"success_vs_eps", "success_vs_gamma", "cdf_vs_k", "cdf_vs_gamma"},
    "optimize": {"sweep"},
}


class ConfigError(Exception):
    pass


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def read_csv(path: Path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _f(row, key):
    text = row.get(key, "")
    return None if text == "" else float(text)


def param_hash(params: SystemParams) -> str:
    blob = json.dumps(
        {"n": params.n, "k": params.k, "m": params.m, "mu1": params.mu1,
         "mu2": params.mu2, "epsilon": params.epsilon},
        sort_keys=True,
    ).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


# --- command implementations ---------------------------------------------------


def cmd_bounds(config, seed, trials, outdir: Path):
    kind = config["kind"]
    k, m = int(config["k"]), int(config.get("m", config["k"]))
    mu1, mu2 = float(config["mu1"]), float(config["mu2"])
    rows = []
    if kind in ("bounds_vs_n", "bound_gaps_vs_n"):
        epsilon = float(config["epsilon"])
        for n in config["n_grid"]:
            params = SystemParams(n=int(n), k=k, m=m, mu1=mu1, mu2=mu2, epsilon=epsilon)
            pair = analytic.bounds_general_k(params)
            markov = None
            if k == m:
                markov = ctmc.expected_hitting_time(ctmc.ChainSpec(int(n), k, mu1, params.comm_rate))
            rows.append((int(n), pair.lower, pair.upper, markov))
        if kind == "bounds_vs_n":
            path = outdir / "bounds_vs_n.csv"
            write_csv(path, ["n", "lower", "upper", "markov"], rows)
        else:
            path = outdir / "bound_gaps_vs_n.csv"
            gap_rows = [
                (n, lo, up, mk, None if mk is None else mk - lo, None if mk is None else up - mk)
                for n, lo, up, mk in rows
            ]
            write_csv(path, ["n", "lower", "upper", "markov", "gap_lower", "gap_upper"], gap_rows)
        return [path]
    if kind == "bounds_vs_eps":
        n = int(config["n"])
        for eps in config["eps_grid"]:
            params = SystemParams(n=n, k=k, m=m, mu1=mu1, mu2=mu2, epsilon=float(eps))
            pair = analytic.bounds_general_k(params)
            markov = None
            if k == m:
                markov = ctmc.expected_hitting_time(ctmc.ChainSpec(n, k, mu1, params.comm_rate))
            rows.append((float(eps), pair.lower, pair.upper, markov))
        path = outdir / "bounds_vs_eps.csv"
        write_csv(path, ["epsilon", "lower", "upper", "markov"], rows)
        return [path]
    raise ConfigError(f"bounds cannot run config kind {kind!r}")


def cmd_ratedesign(config, seed, trials, outdir: Path):
    kind = config["kind"]
    n, m = int(config["n"]), int(config["m"])
    mu1, mu2 = float(config["mu1"]), float(config["mu2"])
    ks = divisors_leq(m, n)
    rows, mc_rows = [], []
    for eps in config["eps_list"]:
        uppers = {}
        for k in ks:
            params = SystemParams(n=n, k=k, m=m, mu1=mu1, mu2=mu2, epsilon=float(eps))
            uppers[k] = analytic.bounds_general_k(params).upper
        k_star = min(ks, key=lambda k: (uppers[k], k))
        for k in ks:
            entry = [float(eps), k, k / n, uppers[k], int(k == k_star)]
            if kind == "rate_design_mc":
                params = SystemParams(n=n, k=k, m=m, mu1=mu1, mu2=mu2, epsilon=float(eps))
                est = montecarlo.estimate_expected_runtime(params, trials, seed)
                entry += [est.mean, est.std_error]
                mc_rows.append(
                    (param_hash(params), n, k, m, mu1, mu2, float(eps), trials, seed, est.mean, est.std_error)
                )
            rows.append(tuple(entry))
    if kind == "upper_vs_rate":
        path = outdir / "upper_vs_rate.csv"
        write_csv(path, ["epsilon", "k", "rate", "upper", "is_rate_star"], rows)
        return [path]
    path = outdir / "rate_design_mc.csv"
    write_csv(
        path,
        ["epsilon", "k", "rate", "upper", "is_rate_star", "mc_mean", "mc_stderr"],
        [(r[0], r[1], r[2], r[3], r[4], r[5], r[6]) for r in rows],
    )
    est_path = outdir / "mc_estimates.csv"
    write_csv(
        est_path,
        ["param_hash", "n", "k", "m", "mu1", "mu2", "epsilon", "trials", "seed", "mean", "std_error"],
        mc_rows,
    )
    return [path, est_path]


def cmd_reliability(config, seed, trials, outdir: Path):
    kind = config["kind"]
    n, m = int(config["n"]), int(config["m"])
    if kind == "success_vs_eps":
        rows = []
        for eps in config["eps_grid"]:
            for k, gamma in config["pairs"]:
                params = SystemParams(n=n, k=int(k), m=m, mu1=1.0, mu2=1.0, epsilon=float(eps))
                profile = reliability.system_success_prob(params, int(gamma))
                rows.append((float(eps), int(k), int(gamma), profile.p, profile.p_s))
        path = outdir / "success_vs_eps.csv"
        write_csv(path, ["epsilon", "k", "gamma", "p", "p_s"], rows)
        return [path]
    if kind == "success_vs_gamma":
        eps, delta = float(config["epsilon"]), float(config["delta"])
        rows = []
        for k in config["ks"]:
            params = SystemParams(n=n, k=int(k), m=m, mu1=1.0, mu2=1.0, epsilon=eps)
            min_gamma = None
            for gamma in range(1, int(config["gamma_max"]) + 1):
                p_s = reliability.system_success_prob(params, gamma).p_s
                if min_gamma is None and p_s >= 1.0 - delta:
                    min_gamma = gamma
                rows.append((int(k), gamma, p_s, int(gamma == min_gamma)))
        path = outdir / "success_vs_gamma.csv"
        write_csv(path, ["k", "gamma", "p_s", "is_min_gamma"], rows)
        return [path]
    mu1, mu2, eps = float(config["mu1"]), float(config["mu2"]), float(config["epsilon"])
    if kind == "cdf_vs_k":
        gamma, tau = int(config["gamma"]), float(config["tau"])
        rows = []
        for k in config["ks"]:
            params = SystemParams(n=n, k=int(k), m=m, mu1=mu1, mu2=mu2, epsilon=eps)
            est = reliability.runtime_cdf(params, gamma, tau, trials, seed)
            rows.append((int(k), est.mean, est.std_error))
        path = outdir / "cdf_vs_k.csv"
        write_csv(path, ["k", "prob", "stderr"], rows)
        return [path]
    if kind == "cdf_vs_gamma":
        tau_t = float(config["tau_t"])
        gamma_max = int(config["gamma_max"])
        rows = []
        for k in config["ks"]:
            params = SystemParams(n=n, k=int(k), m=m, mu1=mu1, mu2=mu2, epsilon=eps)
            gammas = list(range(params.shard_size, gamma_max + 1))
            for gamma, est in zip(gammas, reliability.runtime_cdf_curve(params, gammas, tau_t, trials, seed)):
                rows.append((int(k), gamma, est.mean, est.std_error))
        path = outdir / "cdf_vs_gamma.csv"
        write_csv(path, ["k", "gamma", "prob", "stderr"], rows)
        return [path]
    raise ConfigError(f"reliability cannot run config kind {kind!r}")


def cmd_optimize(config, seed, trials, outdir: Path):
    family = TaskFamily(
        n=int(config["n"]), m=int(config["m"]), mu1=float(config["mu1"]),
        mu2=float(config["mu2"]), epsilon=0.0,
    )
    constraints = ConstraintSet(
        alpha=float(config["alpha"]), delta=float(config["delta"]), tau_t=float(config["tau_t"])
    )
    gamma_t = int(config["gamma_t"])
    curves = sweep_epsilon(family, constraints, gamma_t, config["eps_grid"], trials, seed)
    paths = []
    feasible_any = False
    subfigures = config.get("subfigures", ["a", "b", "c"])
    if "a" in subfigures:
        path = outdir / "fig10a.csv"
        rows = [
            (p.epsilon, p.t_alpha, p.k_star, p.gamma_star, int(p.k_star is not None))
            for p in curves["min_latency"]
        ]
        feasible_any = feasible_any or any(r[4] for r in rows)
        write_csv(path, ["epsilon", "t_alpha", "k_star", "gamma_star", "feasible"], rows)
        paths.append(path)
    if "b" in subfigures:
        path = outdir / "fig10b.csv"
        rows = [(p.epsilon, p.gamma_star, p.k_star) for p in curves["min_bandwidth"]]
        feasible_any = feasible_any or any(r[1] is not None for r in rows)
        write_csv(path, ["epsilon", "gamma_star", "k_star"], rows)
        paths.append(path)
    if "c" in subfigures:
        path = outdir / "fig10c.csv"
        rows = [(p.epsilon, p.p_s, p.k_star, p.gamma_star) for p in curves["max_success"]]
        feasible_any = feasible_any or any(r[1] > 0 for r in rows)
        write_csv(path, ["epsilon", "p_s", "k_star", "gamma_star"], rows)
        paths.append(path)
    return paths, feasible_any


def cmd_dot(args, outdir: Path):
    spec = ctmc.ChainSpec(
        n=args.n, k=args.k, comp_rate=args.mu1, comm_rate=(1.0 - args.epsilon) * args.mu2
    )
    path = outdir / "chain.dot"
    path.write_text(ctmc.to_dot(spec))
    return [path]


# --- plotting (from the CSVs, never from engine state) -------------------------


def _finish(fig, ax, xlabel, ylabel, out, legend=True):
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if legend and ax.get_legend_handles_labels()[0]:
        ax.legend(fontsize=8)
    ax.grid(True, alpha=0.4)
    fig.tight_layout()
    fig.savefig(out)
    plt.close(fig)


def _plot_lines(rows, x_key, series_key, y_key, xlabel, ylabel, out):
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    keys = sorted({row[series_key] for row in rows}, key=float) if series_key else [None]
    for key in keys:
        sel = rows if key is None else [r for r in rows if r[series_key] == key]
        xs = [_f(r, x_key) for r in sel]
        ys = [_f(r, y_key) for r in sel]
        pts = [(x, y) for x, y in zip(xs, ys) if y is not None and math.isfinite(y)]
        if not pts:
            continue
        label = None if key is None else f"{series_key}={key}"
        ax.plot(*zip(*pts), marker="o", markersize=3, label=label)
    _finish(fig, ax, xlabel, ylabel, out)


def _plot_band(rows, x_key, xlabel, out):
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    for key in ("lower", "markov", "upper"):
        pts = [(float(r[x_key]), _f(r, key)) for r in rows if _f(r, key) is not None]
        if pts:
            ax.plot(*zip(*pts), marker="o", markersize=3, label=key)
    _finish(fig, ax, xlabel, "expected run-time", out)


def render_plot(csv_path: Path) -> Path | None:
    rows = read_csv(csv_path)
    out = csv_path.with_suffix(".svg")
    name = csv_path.name
    if not rows:
        return None
    if name in ("bounds_vs_n.csv", "bound_gaps_vs_n.csv"):
        _plot_band(rows, "n", "workers n", out)
    elif name == "bounds_vs_eps.csv":
        _plot_band(rows, "epsilon", "erasure probability", out)
    elif name in ("upper_vs_rate.csv", "rate_design_mc.csv"):
        fig, ax = plt.subplots(figsize=(5.0, 3.6))
        eps_values = sorted({r["epsilon"] for r in rows}, key=float)
        for eps in eps_values:
            sel = sorted((r for r in rows if r["epsilon"] == eps), key=lambda r: float(r["rate"]))
            ax.plot([float(r["rate"]) for r in sel], [float(r["upper"]) for r in sel],
                    marker=".", label=f"eps={eps}")
            stars = [r for r in sel if r["is_rate_star"] == "1"]
            ax.plot([float(r["rate"]) for r in stars], [float(r["upper"]) for r in stars], "k*", markersize=10)
            if name == "rate_design_mc.csv":
                ax.plot([float(r["rate"]) for r in sel], [float(r["mc_mean"]) for r in sel], "--", alpha=0.6)
        ax.set_yscale("log")
        _finish(fig, ax, "code rate k/n", "expected run-time (upper bound)", out)
    elif name == "success_vs_eps.csv":
        fig, ax = plt.subplots(figsize=(5.0, 3.6))
        pairs = sorted({(r["k"], r["gamma"]) for r in rows}, key=lambda t: (float(t[0]), float(t[1])))
        for k, gamma in pairs:
            sel = [r for r in rows if r["k"] == k and r["gamma"] == gamma]
            ax.plot([float(r["epsilon"]) for r in sel], [float(r["p_s"]) for r in sel],
                    marker=".", label=f"k={k}, cap={gamma}")
        _finish(fig, ax, "erasure probability", "success probability", out)
    elif name == "success_vs_gamma.csv":
        _plot_lines(rows, "gamma", "k", "p_s", "transmission cap", "success probability", out)
    elif name == "cdf_vs_k.csv":
        _plot_lines(rows, "k", None, "prob", "code dimension k", "Pr[run-time <= tau]", out)
    elif name == "cdf_vs_gamma.csv":
        _plot_lines(rows, "gamma", "k", "prob", "transmission cap", "Pr[run-time <= budget]", out)
    elif name == "fig10a.csv":
        _plot_lines(rows, "epsilon", None, "t_alpha", "erasure probability", "latency quantile", out)
    elif name == "fig10b.csv":
        _plot_lines(rows, "epsilon", None, "gamma_star", "erasure probability", "optimal cap", out)
    elif name == "fig10c.csv":
        _plot_lines(rows, "epsilon", None, "p_s", "erasure probability", "success probability", out)
    else:
        return None
    return out


# --- manifest and entry point ---------------------------------------------------


def _resolve_config(args):
    if args.preset is not None:
        if args.preset not in PRESETS:
            raise ConfigError(f"unknown preset {args.preset!r}; choose from {sorted(PRESETS)}")
        return dict(PRESETS[args.preset]), args.preset
    if args.config is not None:
        with open(args.config) as fh:
            doc = json.load(fh)
        if "config" in doc and isinstance(doc["config"], dict):  # a manifest
            config = dict(doc["config"])
            config.setdefault("seed", doc.get("seed"))
            config.setdefault("trials", doc.get("trials"))
            return config, doc.get("preset")
        return doc, None
    raise ConfigError("provide --preset or --config")


def _run_figure_command(args) -> int:
    config, preset = _resolve_config(args)
    kind = config.get("kind")
    if kind not in _COMMAND_KINDS[args.command]:
        raise ConfigError(
            f"command {args.command!r} expects a config kind in "
            f"{sorted(_COMMAND_KINDS[args.command])}, got {kind!r}"
        )
    seed = args.seed if args.seed is not None else int(config.get("seed") or DEFAULT_SEED)
    trials = args.trials if args.trials is not None else int(config.get("trials") or 50000)
    outdir = Path(args.out) if args.out else Path("out") / (preset or args.command)
    outdir.mkdir(parents=True, exist_ok=True)

    feasible_any = True
    if args.command == "bounds":
        paths = cmd_bounds(config, seed, trials, outdir)
    elif args.command == "ratedesign":
        paths = cmd_ratedesign(config, seed, trials, outdir)
    elif args.command == "reliability":
        paths = cmd_reliability(config, seed, trials, outdir)
    elif args.command == "optimize":
        paths, feasible_any = cmd_optimize(config, seed, trials, outdir)
    else:  # pragma: no cover
        raise ConfigError(f"unknown command {args.command!r}")

    manifest = {
        "command": args.command,
        "preset": preset,
        "config": {key: value for key, value in config.items() if key not in ("seed", "trials")},
        "seed": seed,
        "trials": trials,
        "outputs": [p.name for p in paths],
        "version": __version__,
    }
    manifest_path = outdir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    for path in paths:
        rendered = render_plot(path)
        if rendered is not None:
            print(f"wrote {path} and {rendered}")
        else:
            print(f"wrote {path}")
    print(f"wrote {manifest_path}")
    if not feasible_any:
        print("optimization infeasible over the whole grid", file=sys.stderr)
        return 4
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="codedlat",
        description="MDS-coded distributed computing latency/reliability experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("bounds", "closed-form bounds and exact chain values over n or erasure grids"),
        ("ratedesign", "upper bound versus code rate, with optional Monte Carlo check"),
        ("reliability", "success probabilities and censored-latency curves"),
        ("optimize", "achievable curves for the three constrained problems"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--preset", help=f"one of {sorted(k for k, v in PRESETS.items() if v['kind'] in _COMMAND_KINDS[name])}")
        p.add_argument("--config", help="JSON config or a previously written manifest")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--trials", type=int, default=None)
        p.add_argument("--out", help="output directory (default out/<preset>)")
    v = sub.add_parser("validate", help="run the cross-engine oracle suite")
    v.add_argument("--seed", type=int, default=DEFAULT_SEED)
    v.add_argument("--trials", type=int, default=20000)
    v.add_argument("--inject-fault", action="store_true",
                   help="negative control: corrupt the chain's communication rate; the suite must fail")
    d = sub.add_parser("dot", help="GraphViz dump of a small transition diagram")
    d.add_argument("--n", type=int, required=True)
    d.add_argument("--k", type=int, required=True)
    d.add_argument("--mu1", type=float, default=1.0)
    d.add_argument("--mu2", type=float, default=1.0)
    d.add_argument("--epsilon", type=float, default=0.0)
    d.add_argument("--out", default="out/dot")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            report = validation.run_validation(
                seed=args.seed, trials=args.trials, inject_comm_fault=args.inject_fault
            )
            print(report.render())
            return 0 if report.ok else 3
        if args.command == "dot":
            outdir = Path(args.out)
            outdir.mkdir(parents=True, exist_ok=True)
            for path in cmd_dot(args, outdir):
                print(f"wrote {path}")
            return 0
        return _run_figure_command(args)
    except (ConfigError, RangeError, DivisibilityError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

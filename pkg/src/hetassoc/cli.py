"""Command-line entry point: ``hetassoc <subcommand> [options]``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .dual_solver import run_dual
from .experiments import (SCHEMES, ExperimentConfig, bias_sweep, export_report, export_sweep,
                          rate_bias_for, run_comparison, sinr_bias_search, write_summary)
from .fua_solver import solve_fua
from .topology import InvalidConfigError, compute_link_table, generate_scenario

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_STRICT = 2


def _config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    changes = {}
    if args.seed is not None:
        changes["seed_base"] = args.seed
    if args.trials is not None:
        changes["trials"] = args.trials
    if args.tol is not None:
        changes["tol"] = args.tol
    if getattr(args, "schemes", None):
        changes["schemes"] = tuple(s.strip() for s in args.schemes.split(",") if s.strip())
    if args.out is not None:
        changes["out_dir"] = args.out
    return replace(cfg, **changes) if changes else cfg


def _out_dir(args, cfg: ExperimentConfig) -> Path:
    return Path(args.out or cfg.out_dir or "out")


def cmd_gen(args) -> int:
    cfg = _config(args)
    seed = cfg.seed_base
    scenario = generate_scenario(cfg.scenario, seed)
    links = compute_link_table(scenario)
    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    write_summary(scenario.to_dict(), out / "scenario.json")
    links.to_csv(out / "links.csv")
    print(f"scenario seed {seed}: {scenario.n_bs} BSs, {scenario.n_users} users -> {out}")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _config(args)
    report = run_comparison(cfg)
    out = _out_dir(args, cfg)
    export_report(report, out)
    for name, m in report.schemes.items():
        ratios = " ".join(f"p{p:g}={r:.3f}" for p, r in m.ratios.items())
        print(f"{name:12s} utility {m.utility:12.4f}  {ratios}")
    problems = report.violations + report.nonconverged
    for p in problems:
        print(f"warning: {p}", file=sys.stderr)
    return EXIT_STRICT if args.strict and problems else EXIT_OK


def cmd_bias_search(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    links = [compute_link_table(generate_scenario(cfg.scenario, s)) for s in cfg.seeds]
    fua = [solve_fua(lt, tol=cfg.tol, max_iter=cfg.max_iter) for lt in links]
    found = sinr_bias_search(cfg, float(np.mean([f.utility for f in fua])), links=links)
    rate = rate_bias_for(cfg)
    write_summary({
        "sinr_bias": list(found.bias.sinr), "sinr_bias_db": list(found.bias.sinr_db),
        "sinr_bias_utility": found.utility, "max_sinr_utility": found.baseline_utility,
        "fua_gap": found.fua_gap, "rate_bias": list(rate.rate),
        "n_evaluated": found.n_evaluated,
    }, out / "summary.json")
    with open(out / "bias.csv", "w") as f:
        f.write("kind,tier,factor\n")
        for k, a in enumerate(found.bias.sinr):
            f.write(f"sinr,{k + 1},{a!r}\n")
        for k, b in enumerate(rate.rate):
            f.write(f"rate,{k + 1},{b!r}\n")
    print("sinr bias (dB):", " ".join(f"{a:.1f}" for a in found.bias.sinr_db))
    print("rate bias:     ", " ".join(f"{b:.3f}" for b in rate.rate))
    nonconv = [i for i, f in enumerate(fua) if not f.converged]
    return EXIT_STRICT if args.strict and nonconv else EXIT_OK


def cmd_bias_sweep(args) -> int:
    cfg = _config(args)
    values = [float(v) for v in args.values.split(",")]
    rep = bias_sweep(cfg, args.param, args.tier - 1, values, include_sinr=args.with_sinr)
    export_sweep(rep, _out_dir(args, cfg))
    for v, b in zip(rep.values, rep.rate_bias):
        print(f"{args.param}={v:g}: " + " ".join(f"{x:.3f}" for x in b))
    return EXIT_OK


def cmd_dual_trace(args) -> int:
    cfg = _config(args)
    links = compute_link_table(generate_scenario(cfg.scenario, cfg.seed_base))
    d_ref = solve_fua(links, tol=cfg.tol, max_iter=cfg.max_iter).utility
    res = run_dual(links, max_iter=cfg.dual_max_iter, d_ref=d_ref)
    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    res.trace.to_csv(out / "dual_trace.csv")
    with open(out / "mu.csv", "w") as f:
        f.write("bs_id,tier,mu_final,mu_best\n")
        for j in range(links.n_bs):
            f.write(f"{int(links.bs_ids[j])},{int(links.bs_tier[j]) + 1},"
                    f"{float(res.state.mu[j])!r},{float(res.state.best_mu[j])!r}\n")
    write_summary({
        "stop_reason": res.stop_reason, "iterations": res.iterations,
        "balanced_at": res.balanced_at, "best_dual": res.best_dual, "fua_utility": d_ref,
        "bound_ok": res.bound_ok, "unbalanced_bs": res.unbalanced_bs.tolist(),
        "eps_min": res.params.eps_min,
    }, out / "summary.json")
    print(f"dual: {res.stop_reason} after {res.iterations} rounds, "
          f"best D = {res.best_dual:.4f}, FUA = {d_ref:.4f}")
    bad = (not res.converged) or res.bound_ok is False
    return EXIT_STRICT if args.strict and bad else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hetassoc",
                                description="Load-aware user association in multi-tier cellular networks.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, schemes=False):
        sp.add_argument("--config", help="experiment or scenario config (JSON)")
        sp.add_argument("--seed", type=int, help="seed (base seed for multi-trial commands)")
        sp.add_argument("--trials", type=int, help="number of trials")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--tol", type=float, help="Frank-Wolfe gap tolerance")
        sp.add_argument("--strict", action="store_true",
                        help="exit nonzero on invariant violations or non-convergence")
        if schemes:
            sp.add_argument("--schemes", help="comma-separated subset of " + ",".join(SCHEMES))

    sp = sub.add_parser("gen", help="generate one scenario and its link table")
    common(sp)
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("run", help="compare association schemes over seeded trials")
    common(sp, schemes=True)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("bias-search", help="find SINR and rate bias factors")
    common(sp)
    sp.set_defaults(func=cmd_bias_search)

    sp = sub.add_parser("bias-sweep", help="bias factors versus small-cell density or power")
    common(sp)
    sp.add_argument("--param", choices=("density", "power"), default="density")
    sp.add_argument("--tier", type=int, default=2, help="1-based tier index")
    sp.add_argument("--values", required=True, help="comma-separated sweep values")
    sp.add_argument("--with-sinr", action="store_true", help="also rerun the SINR bias search")
    sp.set_defaults(func=cmd_bias_sweep)

    sp = sub.add_parser("dual-trace", help="run the distributed algorithm on one scenario")
    common(sp)
    sp.set_defaults(func=cmd_dual_trace)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InvalidConfigError, ValueError, OSError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

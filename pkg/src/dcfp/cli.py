"""Command-line entry point: ``dcfp {sweep,summarize,solve,variation,mc}``."""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import categorical as cat
from .experiment import ALGOS, ExperimentConfig, read_results, run_experiment, tradeoff_table, write_tradeoff
from .linsolve import SingularSystemError
from .mrp import build_env, empirical_model, sample_dataset
from .oracle import cached_mc_returns
from .quantile import qdp_solve
from .sccdf import check_corollary_bound, check_scc_inequality, phi_to_csv, sample_phi_batch, variation_vectors

# flag name -> ExperimentConfig field
_SWEEP_FIELDS = {
    "env": "env", "gamma": "gammas", "m": "ms", "n": "ns", "algo": "algos", "support": "support_mode",
    "reps": "reps", "seed": "seed", "mc_eps": "mc_eps", "mc_samples": "mc_samples",
    "cdp_iters": "cdp_max_iters", "out": "out_path", "workers": "workers", "cache_dir": "cache_dir",
}


def _add_model_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--env", default="two_state", help="benchmark name or path to an MRP JSON file")
    p.add_argument("--gamma", type=float, default=0.9)
    p.add_argument("--n", type=int, default=0, help="generative samples per state (0 = exact model)")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dcfp", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sw = sub.add_parser("sweep", help="run an experiment sweep and write result rows to CSV")
    sw.add_argument("--config", help="JSON file with ExperimentConfig fields; flags override it")
    sw.add_argument("--env")
    sw.add_argument("--gamma", type=float, action="append")
    sw.add_argument("--m", type=int, action="append")
    sw.add_argument("--n", type=int, action="append", help="0 means the exact transition model")
    sw.add_argument("--algo", action="append", choices=ALGOS)
    sw.add_argument("--support", choices=("global", "env"))
    sw.add_argument("--reps", type=int)
    sw.add_argument("--seed", type=int)
    sw.add_argument("--mc-eps", type=float, help="truncation tolerance of the oracle (default 1e-4)")
    sw.add_argument("--mc-samples", type=int, help="oracle rollouts per state (default 10000)")
    sw.add_argument("--cdp-iters", type=int, action="append",
                    help="iterations for cdp/qdp (default 30000); repeat for trade-off checkpoints")
    sw.add_argument("--out", help="result CSV path")
    sw.add_argument("--summary", help="also write the aggregated trade-off table here")
    sw.add_argument("--workers", type=int)
    sw.add_argument("--cache-dir", help="directory for cached oracle samples")

    sm = sub.add_parser("summarize", help="aggregate a result CSV into the trade-off table")
    sm.add_argument("results")
    sm.add_argument("--out", required=True)
    sm.add_argument("--level", type=float, default=0.95)
    sm.add_argument("--n-boot", type=int, default=2000)
    sm.add_argument("--seed", type=int, default=0)

    so = sub.add_parser("solve", help="compute one fixed point and write its table")
    _add_model_args(so)
    so.add_argument("--m", type=int, default=100)
    so.add_argument("--algo", choices=ALGOS, default="dcfp")
    so.add_argument("--support", choices=("global", "env"), default="global")
    so.add_argument("--iters", type=int, help="cdp/qdp iterations (default: the eps=1e-6 count)")
    so.add_argument("--out", required=True)

    va = sub.add_parser("variation", help="local/global variation vectors of the random CDF table")
    _add_model_args(va)
    va.add_argument("--m", type=int, default=401)
    va.add_argument("--n-phi", type=int, default=2000)
    va.add_argument("--depth", type=int, help="composition depth (default: the eps=1e-6 count)")
    va.add_argument("--out", required=True)
    va.add_argument("--phi-out", help="CSV path for sampled tables")
    va.add_argument("--phi-count", type=int, default=5, help="number of tables written to --phi-out")

    mc = sub.add_parser("mc", help="write Monte Carlo oracle return samples")
    _add_model_args(mc)
    mc.add_argument("--mc-eps", type=float, default=1e-4)
    mc.add_argument("--mc-samples", type=int, default=10_000)
    mc.add_argument("--out", required=True)
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    for flag, attr in _SWEEP_FIELDS.items():
        value = getattr(args, flag)
        if value is not None:
            setattr(cfg, attr, value)
    cfg.__post_init__()
    return cfg


def _model(args):
    mrp = build_env(args.env, args.gamma)
    if args.n > 0:
        return mrp, empirical_model(sample_dataset(mrp, args.n, args.seed)).to_mrp()
    return mrp, mrp


def cmd_sweep(args) -> int:
    cfg = config_from_args(args)
    if not cfg.out_path:
        raise SystemExit("sweep needs --out or out_path in the config")
    rows = run_experiment(cfg)
    print(f"wrote {len(rows)} rows to {cfg.out_path}")
    if args.summary:
        write_tradeoff(tradeoff_table(rows, seed=cfg.seed), args.summary)
    return 0


def cmd_summarize(args) -> int:
    table = tradeoff_table(read_results(args.results), args.level, args.n_boot, args.seed)
    write_tradeoff(table, args.out)
    print(f"wrote {len(table)} cells to {args.out}")
    return 0


def cmd_solve(args) -> int:
    mrp, model = _model(args)
    grid = cat.support_grid(mrp, args.m, args.support)
    k = cat.cdp_iterations(mrp.gamma) if args.iters is None else args.iters
    if args.algo == "qdp":
        lo, hi = (grid.lo, grid.hi) if args.support == "env" else (None, None)
        table, _ = qdp_solve(model, args.m, k, lo, hi)
        table.to_csv(args.out)
        return 0
    if args.algo in ("dcfp", "d-dcfp"):
        table, report = cat.dcfp_solve(model, grid, "sparse" if args.algo == "dcfp" else "dense")
        print(f"residual {report.residual_inf:.3e}")
    else:
        op = cat.build_operator(model, grid, reduced=False)
        table, _ = cat.cdp_solve(op, cat.initial_table(mrp.n_states, grid), k,
                                 dense=args.algo == "d-cdp", track=False)
    table.to_csv(args.out)
    return 0


def cmd_variation(args) -> int:
    mrp, model = _model(args)
    grid = cat.make_grid(args.m, mrp.gamma)
    op = cat.build_operator(model, grid)
    fq, _ = cat.dcfp_solve(model, grid, op=op)
    rng = np.random.default_rng(args.seed)
    vv = variation_vectors(op, fq, args.n_phi, args.depth, rng)
    slack, _ = check_scc_inequality(op, vv)
    vv.to_csv(args.out, slack)
    try:
        value, ok = check_corollary_bound(op, vv.sigma)
        print(f"resolvent bound {value:.6g} ({'ok' if ok else 'violated'})")
    except ValueError as exc:
        print(f"resolvent bound check skipped: {exc}")
    if args.phi_out:
        phi_to_csv(sample_phi_batch(op, fq, args.phi_count, args.depth, rng), grid, args.phi_out)
    return 0


def cmd_mc(args) -> int:
    mrp = build_env(args.env, args.gamma)
    cached_mc_returns(mrp, args.mc_eps, args.mc_samples, args.seed).to_csv(args.out)
    return 0


COMMANDS = {"sweep": cmd_sweep, "summarize": cmd_summarize, "solve": cmd_solve,
            "variation": cmd_variation, "mc": cmd_mc}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ValueError, OSError, SingularSystemError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

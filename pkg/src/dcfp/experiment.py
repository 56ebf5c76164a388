"""Algorithm x environment x (gamma, m, N) sweeps against a Monte Carlo oracle."""

from __future__ import annotations

import csv
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from itertools import groupby
from typing import Iterable, Iterator

import numpy as np

from . import categorical as cat
from .metrics import per_state
from .mrp import build_env, empirical_model, sample_dataset
from .oracle import cached_mc_returns
from .quantile import qdp_solve, qdp_step

log = logging.getLogger(__name__)

ALGOS = ("dcfp", "d-dcfp", "cdp", "d-cdp", "qdp")
SUPPORTS = ("global", "env", "env_specific")
CSV_HEADER = ["env", "gamma", "m", "n", "rep", "algo", "support", "iterations",
              "wallclock_ms", "sup_w1", "sup_cramer", "residual"]
TRADEOFF_HEADER = ["env", "gamma", "m", "n", "algo", "support", "iterations", "count",
                   "mean_sup_w1", "ci_lo", "ci_hi", "mean_sup_cramer", "mean_wallclock_ms"]


@dataclass
class ExperimentConfig:
    env: str = "two_state"
    gammas: list = field(default_factory=lambda: [0.9])
    ms: list = field(default_factory=lambda: [100])
    ns: list = field(default_factory=lambda: [1_000_000])
    algos: list = field(default_factory=lambda: ["dcfp", "qdp"])
    support_mode: str = "global"
    reps: int = 30
    seed: int = 0
    mc_eps: float = 1e-4
    mc_samples: int = 10_000
    cdp_max_iters: list = field(default_factory=lambda: [30_000])
    out_path: str | None = None
    workers: int = 1
    cache_dir: str | None = None

    def __post_init__(self):
        if isinstance(self.cdp_max_iters, int):
            self.cdp_max_iters = [self.cdp_max_iters]

    def validate(self) -> None:
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if not self.algos:
            raise ValueError("at least one algorithm is required")
        bad = [a for a in self.algos if a not in ALGOS]
        if bad:
            raise ValueError(f"unknown algorithms {bad}; choose from {ALGOS}")
        if any(not 0 <= g < 1 for g in self.gammas):
            raise ValueError("every gamma must lie in [0, 1)")
        if any(m < 2 for m in self.ms):
            raise ValueError("every m must be at least 2")
        if any(n < 0 for n in self.ns):
            raise ValueError("sample counts must be non-negative (0 means exact model)")
        if self.support_mode not in SUPPORTS:
            raise ValueError(f"support must be one of {SUPPORTS}")
        if not self.cdp_max_iters or any(k < 0 for k in self.cdp_max_iters):
            raise ValueError("iteration counts must be non-negative")
        if self.mc_eps <= 0 or self.mc_samples < 1:
            raise ValueError("mc_eps must be positive and mc_samples at least 1")

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            doc = json.load(fh)
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)


@dataclass
class ResultRow:
    env: str
    gamma: float
    m: int
    n: int
    rep: int
    algo: str
    support: str
    iterations: int
    wallclock_ms: float
    sup_w1: float
    sup_cramer: float
    residual: float | None = None

    def as_csv(self) -> list:
        d = asdict(self)
        d["residual"] = "" if self.residual is None else repr(self.residual)
        for k in ("gamma", "wallclock_ms", "sup_w1", "sup_cramer"):
            d[k] = repr(float(d[k]))
        return [d[k] for k in CSV_HEADER]


def dataset_seed(seed: int, gamma_index: int, n: int, rep: int) -> int:
    return int(np.random.SeedSequence([seed, gamma_index, n, rep]).generate_state(1)[0])


def _errors(dists, oracle) -> tuple[float, float]:
    return float(per_state(dists, oracle, "w1").max()), float(per_state(dists, oracle, "cramer").max())


def _run_cell(task) -> list[ResultRow]:
    """All (m, algo) rows for one (gamma, n, rep), sharing one dataset."""
    cfg, gamma_index, gamma, n, rep, oracle = task
    mrp = build_env(cfg.env, gamma)
    if n == 0:
        model = mrp
    else:
        model = empirical_model(sample_dataset(mrp, n, dataset_seed(cfg.seed, gamma_index, n, rep))).to_mrp()
    rows = []
    checkpoints = sorted(set(cfg.cdp_max_iters))
    needs_solve = any(a.endswith("dcfp") for a in cfg.algos)
    for m in cfg.ms:
        grid = cat.support_grid(mrp, m, cfg.support_mode)
        base = dict(env=mrp.name, gamma=gamma, m=m, n=n, rep=rep, support=cfg.support_mode)
        op = None
        for algo in cfg.algos:
            if algo != "qdp" and op is None:
                op = cat.build_operator(model, grid, reduced=needs_solve)
            if algo in ("dcfp", "d-dcfp"):
                t0 = time.perf_counter()
                table, report = cat.dcfp_solve(model, grid, "sparse" if algo == "dcfp" else "dense", op=op)
                ms_ = 1e3 * (time.perf_counter() - t0)
                w1, cr = _errors(table.distributions(), oracle)
                rows.append(ResultRow(**base, algo=algo, iterations=0, wallclock_ms=ms_,
                                      sup_w1=w1, sup_cramer=cr, residual=report.residual_inf))
            elif algo in ("cdp", "d-cdp"):
                dense = algo == "d-cdp"
                if dense:
                    op.dense_matrix()
                F = cat.initial_table(mrp.n_states, grid)
                done, elapsed = 0, 0.0
                for k in checkpoints:
                    t0 = time.perf_counter()
                    F, _ = cat.cdp_solve(op, F, k - done, dense=dense, track=False)
                    elapsed += time.perf_counter() - t0
                    done = k
                    w1, cr = _errors(F.distributions(), oracle)
                    rows.append(ResultRow(**base, algo=algo, iterations=k, wallclock_ms=1e3 * elapsed,
                                          sup_w1=w1, sup_cramer=cr))
            elif algo == "qdp":
                lo, hi = (grid.lo, grid.hi) if cfg.support_mode != "global" else (None, None)
                done, elapsed, table = 0, 0.0, None
                for k in checkpoints:
                    t0 = time.perf_counter()
                    table = _qdp_continue(model, m, k - done, table, lo, hi)
                    elapsed += time.perf_counter() - t0
                    done = k
                    w1, cr = _errors(table.distributions(), oracle)
                    rows.append(ResultRow(**base, algo=algo, iterations=k, wallclock_ms=1e3 * elapsed,
                                          sup_w1=w1, sup_cramer=cr))
    return rows


def _qdp_continue(model, m, k, table, lo, hi):
    if table is None:
        table, _ = qdp_solve(model, m, 0, lo, hi)
    for _ in range(k):
        table = qdp_step(model, table)
    return table


def iter_experiment(cfg: ExperimentConfig) -> Iterator[ResultRow]:
    """Yield result rows in a fixed order; MC oracles are computed once per gamma."""
    cfg.validate()
    tasks = []
    for gi, gamma in enumerate(cfg.gammas):
        mrp = build_env(cfg.env, gamma)
        t0 = time.perf_counter()
        oracle = cached_mc_returns(mrp, cfg.mc_eps, cfg.mc_samples, cfg.seed, cfg.cache_dir).distributions()
        log.info("MC oracle for %s gamma=%s in %.1fs", mrp.name, gamma, time.perf_counter() - t0)
        for n in cfg.ns:
            for rep in range(cfg.reps):
                tasks.append((cfg, gi, gamma, n, rep, oracle))
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            for rows in pool.map(_run_cell, tasks):
                yield from rows
    else:
        for task in tasks:
            yield from _run_cell(task)


def run_experiment(cfg: ExperimentConfig) -> list[ResultRow]:
    """Run the full sweep, appending rows to ``cfg.out_path`` as they complete."""
    rows = []
    writer = fh = None
    if cfg.out_path:
        parent = os.path.dirname(os.path.abspath(cfg.out_path))
        if not os.access(parent, os.W_OK):
            raise OSError(f"cannot write to {cfg.out_path}")
        fh = open(cfg.out_path, "w", newline="")
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
    try:
        for row in iter_experiment(cfg):
            rows.append(row)
            if writer:
                writer.writerow(row.as_csv())
                fh.flush()
    finally:
        if fh:
            fh.close()
    return rows


def read_results(path) -> list[ResultRow]:
    out = []
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            out.append(ResultRow(
                env=r["env"], gamma=float(r["gamma"]), m=int(r["m"]), n=int(r["n"]), rep=int(r["rep"]),
                algo=r["algo"], support=r["support"], iterations=int(r["iterations"]),
                wallclock_ms=float(r["wallclock_ms"]), sup_w1=float(r["sup_w1"]),
                sup_cramer=float(r["sup_cramer"]),
                residual=float(r["residual"]) if r["residual"] else None))
    return out


def bootstrap_ci(values, level: float = 0.95, n_boot: int = 10_000, seed: int = 0) -> tuple[float, float]:
    """Percentile bootstrap interval for the mean."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("cannot bootstrap an empty sample")
    rng = np.random.default_rng(seed)
    means = v[rng.integers(0, v.size, size=(n_boot, v.size))].mean(axis=1)
    alpha = (1 - level) / 2
    lo, hi = np.quantile(means, [alpha, 1 - alpha])
    # keep degenerate samples exactly degenerate
    return float(min(lo, v.mean())), float(max(hi, v.mean()))


def tradeoff_table(rows: Iterable[ResultRow], level: float = 0.95, n_boot: int = 2000,
                   seed: int = 0) -> list[dict]:
    """Mean error with bootstrap CI and mean wallclock per configuration cell."""
    def key(r):
        return (r.env, r.gamma, r.m, r.n, r.algo, r.support, r.iterations)

    out = []
    for k, group in groupby(sorted(rows, key=key), key=key):
        group = list(group)
        w1 = [r.sup_w1 for r in group]
        lo, hi = bootstrap_ci(w1, level, n_boot, seed)
        out.append(dict(zip(TRADEOFF_HEADER, [*k, len(group), float(np.mean(w1)), lo, hi,
                                              float(np.mean([r.sup_cramer for r in group])),
                                              float(np.mean([r.wallclock_ms for r in group]))])))
    return out


def write_tradeoff(table: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=TRADEOFF_HEADER)
        w.writeheader()
        w.writerows(table)

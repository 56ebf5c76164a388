"""Quantile dynamic programming baseline."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .metrics import DiscreteDistribution
from .mrp import as_mrp

# slack on the cumulative-mass comparison, guards against summation drift
_TAU_TOL = 1e-12


def midpoint_levels(m: int) -> np.ndarray:
    return (2 * np.arange(1, m + 1) - 1) / (2 * m)


@dataclass(eq=False)
class QuantileTable:
    theta: np.ndarray

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        if self.theta.ndim != 2:
            raise ValueError("theta must be (n_states, m)")

    @property
    def m(self) -> int:
        return self.theta.shape[1]

    @property
    def taus(self) -> np.ndarray:
        return midpoint_levels(self.m)

    def distributions(self) -> list[DiscreteDistribution]:
        w = np.full(self.m, 1.0 / self.m)
        return [DiscreteDistribution.from_weighted(row, w) for row in self.theta]

    def to_csv(self, path) -> None:
        taus = self.taus
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["state", "tau", "theta"])
            for x, row in enumerate(self.theta):
                for tau, th in zip(taus, row):
                    w.writerow([x, repr(float(tau)), repr(float(th))])


def _quantiles(values: np.ndarray, weights: np.ndarray, taus: np.ndarray) -> np.ndarray:
    """Left-continuous inverse CDF of a finite mixture at every level in ``taus``."""
    order = np.argsort(values, kind="stable")
    cum = np.cumsum(weights[order])
    idx = np.searchsorted(cum, taus - _TAU_TOL, side="left")
    return values[order][np.minimum(idx, len(values) - 1)]


def qdp_step(model, table: QuantileTable) -> QuantileTable:
    """One quantile backup: taus-quantiles of the mixture of r(x) + gamma theta_j(y)."""
    mrp = as_mrp(model)
    theta = table.theta
    X, m = theta.shape
    taus = midpoint_levels(m)
    P = mrp.transition
    out = np.empty_like(theta)
    succ = np.repeat(np.arange(X), m)
    scaled = mrp.gamma * theta.ravel()
    if mrp.deterministic_rewards:
        # the ordering of gamma * theta is shared by every state
        order = np.argsort(scaled, kind="stable")
        sorted_vals = scaled[order]
        succ_sorted = succ[order]
        r = mrp.mean_rewards
        for x in range(X):
            cum = np.cumsum(P[x, succ_sorted] / m)
            idx = np.searchsorted(cum, taus - _TAU_TOL, side="left")
            out[x] = r[x] + sorted_vals[np.minimum(idx, len(cum) - 1)]
    else:
        for x in range(X):
            atoms, probs = mrp.reward_atoms[x], mrp.reward_probs[x]
            vals = (atoms[:, None] + scaled[None, :]).ravel()
            wts = (probs[:, None] * (P[x, succ] / m)[None, :]).ravel()
            out[x] = _quantiles(vals, wts, taus)
    return QuantileTable(out)


def qdp_solve(model, m: int, k: int, lo: float | None = None, hi: float | None = None,
              ) -> tuple[QuantileTable, float]:
    """k quantile backups from the midpoint of [lo, hi].

    The range defaults to [0, 1/(1 - gamma)]. Returns the final table and
    the sup-w1 size of the last step (0 when ``k == 0``).
    """
    if m < 1 or k < 0:
        raise ValueError("need m >= 1 and k >= 0")
    mrp = as_mrp(model)
    lo = 0.0 if lo is None else lo
    hi = 1.0 / (1.0 - mrp.gamma) if hi is None else hi
    table = QuantileTable(np.full((mrp.n_states, m), 0.5 * (lo + hi)))
    last = 0.0
    for _ in range(k):
        new = qdp_step(mrp, table)
        last = float(np.max(np.mean(np.abs(new.theta - table.theta), axis=1)))
        table = new
    return table, last

"""Ground-truth return distributions by truncated Monte Carlo rollouts."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .metrics import DiscreteDistribution
from .mrp import Mrp


def truncation_horizon(gamma: float, r_max: float = 1.0, eps: float = 1e-4) -> int:
    """Smallest T with gamma^T * r_max / (1 - gamma) < eps."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    tail = r_max / (1.0 - gamma)
    if eps >= tail:
        return 0
    T = max(0, math.floor(math.log(eps / tail) / math.log(gamma)) - 1) if gamma > 0 else 1
    while gamma ** T * tail >= eps:
        T += 1
    return T


@dataclass(frozen=True, eq=False)
class ReturnSampleSet:
    samples: np.ndarray  # (n_states, n_samples)
    horizon: int
    eps: float

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def n_states(self) -> int:
        return self.samples.shape[0]

    def distributions(self) -> list[DiscreteDistribution]:
        return empirical_distribution(self.samples)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["state", "sample"])
            for x, row in enumerate(self.samples):
                for s in row:
                    w.writerow([x, repr(float(s))])

    @classmethod
    def from_csv(cls, path, horizon: int = -1, eps: float = float("nan")) -> "ReturnSampleSet":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        states = data[:, 0].astype(int)
        X = states.max() + 1
        samples = np.stack([data[states == x, 1] for x in range(X)])
        return cls(samples, horizon, eps)


def mc_returns(mrp: Mrp, eps: float = 1e-4, n_samples: int = 10_000, seed: int = 0) -> ReturnSampleSet:
    """Truncated discounted returns from every start state.

    All rollouts advance in lockstep; each start state draws from its own
    child stream of the seed so per-state samples are reproducible.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    X = mrp.n_states
    T = truncation_horizon(mrp.gamma, 1.0, eps)
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(X)]

    cum = np.cumsum(mrp.transition, axis=1)
    cum[:, -1] = 1.0
    K = max(len(a) for a in mrp.reward_atoms)
    r_vals = np.zeros((X, K))
    r_cum = np.ones((X, K))
    for x, (a, p) in enumerate(zip(mrp.reward_atoms, mrp.reward_probs)):
        r_vals[x, :len(a)] = a
        r_vals[x, len(a):] = a[-1]
        r_cum[x, :len(a)] = np.cumsum(p)
    r_cum[:, -1] = 1.0
    stochastic = not mrp.deterministic_rewards
    mean_r = mrp.mean_rewards

    out = np.zeros((X, n_samples))
    for x0 in range(X):
        rng = streams[x0]
        state = np.full(n_samples, x0, dtype=np.intp)
        discount = 1.0
        for t in range(max(T, 1)):
            if stochastic:
                u = rng.random(n_samples)
                k = (u[:, None] >= r_cum[state]).sum(axis=1)
                reward = r_vals[state, np.minimum(k, K - 1)]
            else:
                reward = mean_r[state]
            out[x0] += discount * reward
            discount *= mrp.gamma
            if t + 1 >= T:
                break
            u = rng.random(n_samples)
            state = (u[:, None] >= cum[state]).sum(axis=1)
            np.minimum(state, X - 1, out=state)
    return ReturnSampleSet(out, T, eps)


def empirical_distribution(samples) -> list[DiscreteDistribution]:
    """Uniform mass over each state's samples, duplicates merged."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.size == 0:
        raise ValueError("no samples")
    return [DiscreteDistribution.from_samples(row) for row in samples]


def cached_mc_returns(mrp: Mrp, eps: float, n_samples: int, seed: int,
                      cache_dir=None) -> ReturnSampleSet:
    """mc_returns with an optional on-disk CSV cache keyed by the arguments."""
    if cache_dir is None:
        return mc_returns(mrp, eps, n_samples, seed)
    path = Path(cache_dir) / f"mc_{mrp.name}_g{mrp.gamma!r}_e{eps!r}_n{n_samples}_s{seed}.csv"
    if path.exists():
        return ReturnSampleSet.from_csv(path, truncation_horizon(mrp.gamma, 1.0, eps), eps)
    result = mc_returns(mrp, eps, n_samples, seed)
    path.parent.mkdir(parents=True, exist_ok=True)
    result.to_csv(path)
    return result

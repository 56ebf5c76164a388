"""Exact Cramer and Wasserstein-1 distances between finite distributions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

PROB_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    atoms: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float).ravel()
        probs = np.asarray(self.probs, dtype=float).ravel()
        if atoms.shape != probs.shape or len(atoms) == 0:
            raise ValueError("atoms and probs must be non-empty and of equal length")
        if np.any(np.diff(atoms) <= 0):
            raise ValueError("atoms must be strictly increasing")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > PROB_TOL:
            raise ValueError(f"probs must be non-negative and sum to 1 (sum={probs.sum()!r})")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def point(cls, z: float) -> "DiscreteDistribution":
        return cls(np.array([z]), np.array([1.0]))

    @classmethod
    def from_samples(cls, samples) -> "DiscreteDistribution":
        samples = np.asarray(samples, dtype=float).ravel()
        if samples.size == 0:
            raise ValueError("cannot build a distribution from no samples")
        atoms, counts = np.unique(samples, return_counts=True)
        return cls(atoms, counts / samples.size)

    @classmethod
    def from_weighted(cls, atoms, weights) -> "DiscreteDistribution":
        """Sort, merge duplicate atoms and renormalize."""
        atoms = np.asarray(atoms, dtype=float).ravel()
        weights = np.asarray(weights, dtype=float).ravel()
        u, inv = np.unique(atoms, return_inverse=True)
        w = np.zeros(len(u))
        np.add.at(w, inv, weights)
        return cls(u, w / w.sum())

    def mean(self) -> float:
        return float(self.atoms @ self.probs)

    def cdf(self, t) -> np.ndarray:
        cum = np.concatenate([[0.0], np.cumsum(self.probs)])
        return cum[np.searchsorted(self.atoms, t, side="right")]


def _cdf_gaps(nu: DiscreteDistribution, nu2: DiscreteDistribution) -> tuple[np.ndarray, np.ndarray]:
    """CDF differences on each piece of the merged support, and piece widths."""
    grid = np.union1d(nu.atoms, nu2.atoms)
    if len(grid) < 2:
        return np.zeros(0), np.zeros(0)
    left = grid[:-1]
    return nu.cdf(left) - nu2.cdf(left), np.diff(grid)


def cramer(nu: DiscreteDistribution, nu2: DiscreteDistribution) -> float:
    gap, width = _cdf_gaps(nu, nu2)
    return float(np.sqrt(np.sum(gap * gap * width)))


def wasserstein1(nu: DiscreteDistribution, nu2: DiscreteDistribution) -> float:
    gap, width = _cdf_gaps(nu, nu2)
    return float(np.sum(np.abs(gap) * width))


METRICS = {"cramer": cramer, "w1": wasserstein1}


def per_state(a: Sequence[DiscreteDistribution], b: Sequence[DiscreteDistribution], which: str = "w1") -> np.ndarray:
    if len(a) != len(b):
        raise ValueError(f"state counts differ: {len(a)} vs {len(b)}")
    try:
        fn = METRICS[which]
    except KeyError:
        raise ValueError(f"unknown metric {which!r}") from None
    return np.array([fn(p, q) for p, q in zip(a, b)])


def sup_metric(a: Sequence[DiscreteDistribution], b: Sequence[DiscreteDistribution], which: str = "w1") -> float:
    """Maximum over states of the chosen metric."""
    return float(np.max(per_state(a, b, which)))


def check_w1_cramer_bound(nu: DiscreteDistribution, nu2: DiscreteDistribution, gamma: float) -> tuple[bool, float]:
    """Check w1 <= (1 - gamma)^(-1/2) * cramer for laws on [0, 1/(1 - gamma)].

    Returns ``(holds, slack)`` with ``slack = bound - w1``.
    """
    hi = 1.0 / (1.0 - gamma)
    for d in (nu, nu2):
        if d.atoms[0] < -1e-12 or d.atoms[-1] > hi * (1 + 1e-12):
            raise ValueError(f"support must lie in [0, {hi}]")
    w1 = wasserstein1(nu, nu2)
    bound = cramer(nu, nu2) / np.sqrt(1.0 - gamma)
    slack = bound - w1
    return bool(slack >= -1e-12 * max(1.0, bound)), float(slack)

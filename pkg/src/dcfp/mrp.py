"""Markov reward processes, benchmark environments and generative-model data.

All randomness goes through ``numpy.random.Generator`` backed by PCG64,
seeded with ``numpy.random.default_rng(seed)``. Given the same numpy
version, datasets are bit-reproducible across platforms.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

ROW_SUM_TOL = 1e-12

# Seed used to draw the fixed "low random" / "high random" benchmark MRPs.
BENCHMARK_SEED = 0

ENV_NAMES = ("chain", "low_random", "high_random", "two_state")


def _normalize_reward_spec(spec) -> tuple[np.ndarray, np.ndarray]:
    """Turn a scalar or a list of ``(value, prob)`` pairs into (atoms, probs)."""
    if np.ndim(spec) == 0:
        return np.array([float(spec)]), np.array([1.0])
    pairs = np.asarray(spec, dtype=float).reshape(-1, 2)
    values, probs = pairs[:, 0], pairs[:, 1]
    order = np.argsort(values, kind="stable")
    values, probs = values[order], probs[order]
    # merge repeated values
    atoms, inverse = np.unique(values, return_inverse=True)
    merged = np.zeros(len(atoms))
    np.add.at(merged, inverse, probs)
    return atoms, merged


@dataclass(frozen=True, eq=False)
class Mrp:
    """Finite-state Markov reward process.

    ``rewards`` holds one entry per state: either a scalar (deterministic
    reward) or a sequence of ``(value, prob)`` pairs. After construction the
    normalized form is available as ``reward_atoms`` / ``reward_probs``.

    Terminal states never loop on themselves: they carry their reward once
    and move to a zero-reward absorbing sink (see :func:`build_chain`).
    """

    transition: np.ndarray
    rewards: Sequence
    gamma: float
    terminal_mask: np.ndarray | None = None
    name: str = "mrp"
    return_bounds: tuple[float, float] | None = None
    reward_atoms: tuple[np.ndarray, ...] = field(init=False, repr=False)
    reward_probs: tuple[np.ndarray, ...] = field(init=False, repr=False)

    def __post_init__(self):
        P = np.array(self.transition, dtype=float)
        if P.ndim == 1:
            n = int(round(np.sqrt(P.size)))
            P = P.reshape(n, n)
        if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] < 1:
            raise ValueError(f"transition must be a square matrix, got shape {P.shape}")
        n = P.shape[0]
        if np.any(P < 0):
            raise ValueError("transition probabilities must be non-negative")
        sums = P.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > ROW_SUM_TOL):
            bad = int(np.argmax(np.abs(sums - 1.0)))
            raise ValueError(f"transition row {bad} sums to {sums[bad]!r}, expected 1")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")

        rewards = self.rewards
        if isinstance(rewards, np.ndarray) and rewards.ndim == 1:
            rewards = list(rewards)
        if len(rewards) != n:
            raise ValueError(f"expected {n} reward entries, got {len(rewards)}")
        atoms, probs = zip(*(_normalize_reward_spec(r) for r in rewards))
        for x, (a, p) in enumerate(zip(atoms, probs)):
            if np.any(a < 0.0) or np.any(a > 1.0):
                raise ValueError(f"reward support of state {x} leaves [0, 1]")
            if np.any(p < 0) or abs(p.sum() - 1.0) > ROW_SUM_TOL:
                raise ValueError(f"reward probabilities of state {x} do not form a distribution")

        mask = np.zeros(n, dtype=bool) if self.terminal_mask is None else np.asarray(self.terminal_mask, dtype=bool)
        if mask.shape != (n,):
            raise ValueError("terminal_mask must have one entry per state")

        P.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "terminal_mask", mask)
        object.__setattr__(self, "reward_atoms", tuple(atoms))
        object.__setattr__(self, "reward_probs", tuple(probs))
        object.__setattr__(self, "rewards", tuple(
            float(a[0]) if len(a) == 1 else tuple(zip(a.tolist(), p.tolist()))
            for a, p in zip(atoms, probs)
        ))

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def deterministic_rewards(self) -> bool:
        return all(len(a) == 1 for a in self.reward_atoms)

    @property
    def mean_rewards(self) -> np.ndarray:
        return np.array([a @ p for a, p in zip(self.reward_atoms, self.reward_probs)])

    @property
    def reward_range(self) -> tuple[float, float]:
        lo = min(a.min() for a in self.reward_atoms)
        hi = max(a.max() for a in self.reward_atoms)
        return float(lo), float(hi)

    def with_gamma(self, gamma: float) -> "Mrp":
        return replace(self, gamma=gamma)

    def value_function(self) -> np.ndarray:
        """Exact expected return, (I - gamma P)^-1 r."""
        n = self.n_states
        return np.linalg.solve(np.eye(n) - self.gamma * self.transition, self.mean_rewards)

    def return_range(self) -> tuple[float, float]:
        """A priori interval containing every return (environment-specific support)."""
        if self.return_bounds is not None:
            return self.return_bounds
        lo, hi = self.reward_range
        return lo / (1.0 - self.gamma), hi / (1.0 - self.gamma)


def build_chain(gamma: float = 0.9) -> Mrp:
    """Ten-state chain; the two end states are terminal, only the right end pays 1.

    States 0..9 form the chain and index 10 is the absorbing zero-reward sink
    that both terminal states feed into, so the returned MRP has 11 states.
    """
    n = 11
    sink = 10
    P = np.zeros((n, n))
    for x in range(1, 9):
        P[x, x - 1] = 0.5
        P[x, x + 1] = 0.5
    P[0, sink] = P[9, sink] = P[sink, sink] = 1.0
    rewards = np.zeros(n)
    rewards[9] = 1.0
    terminal = np.zeros(n, dtype=bool)
    terminal[[0, 9]] = True
    # reward is only collected on reaching the right end, so returns lie in [0, 1]
    return Mrp(P, rewards, gamma, terminal, name="chain", return_bounds=(0.0, 1.0))


def _dirichlet_rows(rng: np.random.Generator, n_rows: int, n_cols: int, concentration: float) -> np.ndarray:
    # Gamma(a) = Gamma(a + 1) * U^(1/a), taken in log space so that tiny
    # concentrations do not underflow every draw in a row to zero.
    log_g = np.log(rng.gamma(concentration + 1.0, size=(n_rows, n_cols)))
    log_g += np.log(rng.random(size=(n_rows, n_cols))) / concentration
    log_g -= log_g.max(axis=1, keepdims=True)
    w = np.exp(log_g)
    return w / w.sum(axis=1, keepdims=True)


def build_random_dirichlet(n_states: int, concentration: float, seed: int, gamma: float = 0.9,
                           name: str = "random") -> Mrp:
    """Rows ~ Dirichlet(concentration, ..., concentration), rewards ~ Uniform[0, 1]."""
    if n_states < 1:
        raise ValueError("n_states must be positive")
    if not concentration > 0:
        raise ValueError(f"concentration must be positive, got {concentration}")
    rng = np.random.default_rng(seed)
    P = _dirichlet_rows(rng, n_states, n_states, concentration)
    rewards = rng.random(n_states)
    return Mrp(P, rewards, gamma, name=name)


def build_two_state(gamma: float = 0.9) -> Mrp:
    P = np.array([[0.6, 0.4], [0.8, 0.2]])
    return Mrp(P, np.array([0.0, 1.0]), gamma, name="two_state")


def build_env(name: str, gamma: float = 0.9) -> Mrp:
    """Look up a benchmark environment by name, or load one from a JSON file."""
    if name == "chain":
        return build_chain(gamma)
    if name == "two_state":
        return build_two_state(gamma)
    if name == "low_random":
        return build_random_dirichlet(5, 0.01, BENCHMARK_SEED, gamma, name="low_random")
    if name == "high_random":
        return build_random_dirichlet(5, 10.0, BENCHMARK_SEED, gamma, name="high_random")
    path = Path(name)
    if path.exists():
        mrp = load_mrp(path)
        return mrp.with_gamma(gamma)
    raise ValueError(f"unknown environment {name!r}; expected one of {ENV_NAMES} or a file path")


def load_mrp(path) -> Mrp:
    """Read an MRP from JSON.

    Keys: ``n_states``, ``transition`` (row-major, flat or nested),
    ``rewards`` (per state: scalar or list of ``[value, prob]`` pairs),
    ``gamma``; optional ``name``, ``terminal`` (list of state indices) and
    ``return_bounds`` (``[lo, hi]``).
    """
    with open(path) as fh:
        doc = json.load(fh)
    n = int(doc["n_states"])
    P = np.asarray(doc["transition"], dtype=float).reshape(n, n)
    mask = np.zeros(n, dtype=bool)
    mask[list(doc.get("terminal", []))] = True
    bounds = doc.get("return_bounds")
    return Mrp(P, list(doc["rewards"]), float(doc["gamma"]), mask,
               name=doc.get("name", Path(path).stem),
               return_bounds=tuple(bounds) if bounds is not None else None)


def save_mrp(mrp: Mrp, path) -> None:
    doc = {
        "name": mrp.name,
        "n_states": mrp.n_states,
        "transition": mrp.transition.ravel().tolist(),
        "rewards": [r if isinstance(r, float) else [list(p) for p in r] for r in mrp.rewards],
        "gamma": mrp.gamma,
        "terminal": np.flatnonzero(mrp.terminal_mask).tolist(),
    }
    if mrp.return_bounds is not None:
        doc["return_bounds"] = list(mrp.return_bounds)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)


@dataclass(frozen=True, eq=False)
class GenerativeDataset:
    """N i.i.d. successor (and reward) samples for every state.

    ``next_states`` and ``sampled_rewards`` have shape (n_states, n_per_state).
    """

    n_per_state: int
    next_states: np.ndarray
    sampled_rewards: np.ndarray
    seed: int
    gamma: float
    terminal_mask: np.ndarray
    return_bounds: tuple[float, float] | None = None
    name: str = "mrp"

    @property
    def n_states(self) -> int:
        return self.next_states.shape[0]


def sample_dataset(mrp: Mrp, n: int, seed: int) -> GenerativeDataset:
    if n < 1:
        raise ValueError("need at least one sample per state")
    rng = np.random.default_rng(seed)
    X = mrp.n_states
    cum = np.cumsum(mrp.transition, axis=1)
    cum[:, -1] = 1.0
    next_states = np.empty((X, n), dtype=np.int32)
    for x in range(X):
        u = rng.random(n)
        next_states[x] = np.searchsorted(cum[x], u, side="right")
    np.minimum(next_states, X - 1, out=next_states)

    if mrp.deterministic_rewards:
        sampled = np.broadcast_to(mrp.mean_rewards[:, None], (X, n))
    else:
        sampled = np.empty((X, n))
        for x in range(X):
            atoms, probs = mrp.reward_atoms[x], mrp.reward_probs[x]
            sampled[x] = atoms[rng.choice(len(atoms), size=n, p=probs)]
    next_states.setflags(write=False)
    return GenerativeDataset(n, next_states, sampled, seed, mrp.gamma, mrp.terminal_mask,
                             mrp.return_bounds, mrp.name)


@dataclass(frozen=True, eq=False)
class EmpiricalModel:
    p_hat: np.ndarray
    reward_atoms: tuple[np.ndarray, ...]
    reward_probs: tuple[np.ndarray, ...]
    gamma: float
    n: int
    terminal_mask: np.ndarray
    return_bounds: tuple[float, float] | None = None
    name: str = "mrp"

    def to_mrp(self) -> Mrp:
        rewards = [list(zip(a, p)) if len(a) > 1 else float(a[0])
                   for a, p in zip(self.reward_atoms, self.reward_probs)]
        return Mrp(self.p_hat, rewards, self.gamma, self.terminal_mask,
                   name=self.name, return_bounds=self.return_bounds)


def empirical_model(dataset: GenerativeDataset) -> EmpiricalModel:
    """Certainty-equivalent model: successor frequencies and empirical reward laws."""
    X, n = dataset.n_states, dataset.n_per_state
    if n < 1:
        raise ValueError("empty dataset")
    counts = np.zeros((X, X))
    for x in range(X):
        counts[x] = np.bincount(dataset.next_states[x], minlength=X)
    p_hat = counts / n
    atoms, probs = [], []
    for x in range(X):
        a, c = np.unique(dataset.sampled_rewards[x], return_counts=True)
        atoms.append(a)
        probs.append(c / n)
    return EmpiricalModel(p_hat, tuple(atoms), tuple(probs), dataset.gamma, n,
                          dataset.terminal_mask, dataset.return_bounds, dataset.name)


def as_mrp(model) -> Mrp:
    """Accept either an :class:`Mrp` or an :class:`EmpiricalModel`."""
    if isinstance(model, Mrp):
        return model
    if isinstance(model, EmpiricalModel):
        return model.to_mrp()
    raise TypeError(f"expected Mrp or EmpiricalModel, got {type(model).__name__}")

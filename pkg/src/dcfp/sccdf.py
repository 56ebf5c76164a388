"""Random CDF tables from compositions of single-sample categorical operators.

A single-sample operator keeps the reward blocks ``B_x`` of the exact
operator but replaces each transition row by a one-hot draw. Composing many
independent draws starting from the categorical fixed point samples the
fixed point of the stochastic categorical CDF equation; its spread around
the fixed point is summarized by local and global squared-Cramer variations.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .categorical import CategoricalOperator, CdfTable, cdp_iterations, cramer_rows

CHUNK = 2048


@dataclass(frozen=True, eq=False)
class SingleSampleOperator:
    base: CategoricalOperator
    successors: np.ndarray

    @property
    def transition(self) -> np.ndarray:
        Q = np.zeros((len(self.successors),) * 2)
        Q[np.arange(len(self.successors)), self.successors] = 1.0
        return Q

    def apply(self, f: CdfTable) -> CdfTable:
        F = f.values
        out = np.empty_like(F)
        for x, b in enumerate(self.base.blocks):
            out[x] = b @ F[self.successors[x]]
        return CdfTable(out, f.grid)


def _successor_cdf(op: CategoricalOperator) -> np.ndarray:
    cum = np.cumsum(op.transition, axis=1)
    cum[:, -1] = 1.0
    return cum


def _draw_successors(cum: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """(n, X) successor indices, one independent draw per state and row."""
    X = cum.shape[0]
    u = rng.random((n, X))
    succ = np.empty((n, X), dtype=np.intp)
    for x in range(X):
        succ[:, x] = np.searchsorted(cum[x], u[:, x], side="right")
    return np.minimum(succ, X - 1)


def draw_single_sample_operator(op: CategoricalOperator, rng: np.random.Generator) -> SingleSampleOperator:
    succ = _draw_successors(_successor_cdf(op), 1, rng)[0]
    return SingleSampleOperator(op, succ)


def _apply_batch(op: CategoricalOperator, F: np.ndarray, succ: np.ndarray) -> np.ndarray:
    """Apply a different single-sample operator to each table in the batch F (n, X, m)."""
    n = F.shape[0]
    rows = np.arange(n)
    out = np.empty_like(F)
    for x, b in enumerate(op.blocks):
        G = F[rows, succ[:, x], :]
        out[:, x, :] = (b @ G.T).T
    return out


@dataclass(frozen=True, eq=False)
class PhiSample:
    table: CdfTable
    k_used: int


def sample_phi_batch(op: CategoricalOperator, fq: CdfTable, n: int, k: int | None = None,
                     rng: np.random.Generator | None = None) -> np.ndarray:
    """``n`` independent draws of the random CDF table, shape (n, X, m).

    Each draw composes ``k`` independent single-sample operators applied to
    the fixed point ``fq``; ``k`` defaults to the CDP iteration count for
    eps = 1e-6.
    """
    if k is None:
        k = cdp_iterations(op.gamma, 1e-6)
    if k < 1:
        raise ValueError("composition depth must be at least 1")
    rng = np.random.default_rng() if rng is None else rng
    cum = _successor_cdf(op)
    out = np.empty((n, op.n_states, op.m))
    for start in range(0, n, CHUNK):
        size = min(CHUNK, n - start)
        F = np.broadcast_to(fq.values, (size,) + fq.values.shape).copy()
        for _ in range(k):
            F = _apply_batch(op, F, _draw_successors(cum, size, rng))
        out[start:start + size] = F
    return out


def sample_phi(op: CategoricalOperator, fq: CdfTable, k: int | None = None,
               rng: np.random.Generator | None = None) -> PhiSample:
    if k is None:
        k = cdp_iterations(op.gamma, 1e-6)
    F = sample_phi_batch(op, fq, 1, k, rng)[0]
    return PhiSample(CdfTable(F, fq.grid), k)


def local_variation_exact(op: CategoricalOperator, fq: CdfTable) -> np.ndarray:
    """sigma(x) = sum_y Q(y|x) * cramer^2(B_x F(y), F(x)), summed exactly."""
    F = fq.values
    X = op.n_states
    sigma = np.zeros(X)
    for x, b in enumerate(op.blocks):
        support = np.flatnonzero(op.transition[x])
        backed = (b @ F[support].T).T
        d2 = cramer_rows(backed, F[x][None, :], op.grid) ** 2
        sigma[x] = op.transition[x, support] @ d2
    return sigma


@dataclass(frozen=True, eq=False)
class VariationVectors:
    sigma: np.ndarray
    sigma_global: np.ndarray
    stderr: np.ndarray
    n_phi: int
    sq_dists: np.ndarray | None = None  # (n_phi, X) per-draw squared distances

    def to_csv(self, path, slack: np.ndarray | None = None) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["state", "sigma", "sigma_global", "stderr", "slack"])
            for x in range(len(self.sigma)):
                s = "" if slack is None else repr(float(slack[x]))
                w.writerow([x, repr(float(self.sigma[x])), repr(float(self.sigma_global[x])),
                            repr(float(self.stderr[x])), s])


def global_variation_mc(op: CategoricalOperator, fq: CdfTable, n_phi: int, k: int | None = None,
                        rng: np.random.Generator | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Monte Carlo estimate of E[cramer^2(Phi(x), F(x))]; returns (mean, stderr, per-draw values)."""
    if n_phi < 1:
        raise ValueError("n_phi must be positive")
    phis = sample_phi_batch(op, fq, n_phi, k, rng)
    d2 = cramer_rows(phis, fq.values[None, :, :], op.grid) ** 2
    mean = d2.mean(axis=0)
    se = d2.std(axis=0, ddof=1) / np.sqrt(n_phi) if n_phi > 1 else np.full(op.n_states, np.inf)
    return mean, se, d2


def variation_vectors(op: CategoricalOperator, fq: CdfTable, n_phi: int, k: int | None = None,
                      rng: np.random.Generator | None = None) -> VariationVectors:
    sigma = local_variation_exact(op, fq)
    mean, se, d2 = global_variation_mc(op, fq, n_phi, k, rng)
    return VariationVectors(sigma, mean, se, n_phi, d2)


def scc_correction(m: int, gamma: float) -> float:
    return 2.0 / (m * np.sqrt(1.0 - gamma)) + 1.0 / (m ** 2 * (1.0 - gamma) ** 2)


def check_scc_inequality(op: CategoricalOperator, vv: VariationVectors) -> tuple[np.ndarray, np.ndarray]:
    """Per-state slack of Sigma >= sigma + gamma Q Sigma - correction, with its MC standard error."""
    Q, g = op.transition, op.gamma
    c = scc_correction(op.m, g)
    slack = vv.sigma_global - vv.sigma - g * Q @ vv.sigma_global + c
    if vv.sq_dists is not None and vv.n_phi > 1:
        per_draw = vv.sq_dists - g * vv.sq_dists @ Q.T
        se = per_draw.std(axis=0, ddof=1) / np.sqrt(vv.n_phi)
    else:
        se = vv.stderr * (1 + g)
    return slack, se


def check_corollary_bound(op: CategoricalOperator, sigma: np.ndarray, eps: float = 1.0) -> tuple[float, bool]:
    """Compute ||(I - gamma Q)^-1 sigma||_inf and compare it with 2 / (1 - gamma)."""
    g = op.gamma
    if not 0 < eps < 1 + 1e-12:
        raise ValueError("eps must lie in (0, 1]")
    needed = 4.0 / ((1 - g) ** 2 * eps ** 2) + 1
    if op.m < needed - 1e-9:
        raise ValueError(f"m={op.m} is below the required {needed:.1f} atoms")
    v = np.linalg.solve(np.eye(op.n_states) - g * op.transition, sigma)
    value = float(np.max(np.abs(v)))
    return value, value <= 2.0 / (1.0 - g)


def coupled_gaps(op: CategoricalOperator, fa: CdfTable, fb: CdfTable, k: int, n: int,
                 rng: np.random.Generator) -> np.ndarray:
    """sup-Cramer gap between paired composites sharing successor draws, shape (n, k + 1)."""
    cum = _successor_cdf(op)
    A = np.broadcast_to(fa.values, (n,) + fa.values.shape).copy()
    B = np.broadcast_to(fb.values, (n,) + fb.values.shape).copy()
    gaps = np.empty((n, k + 1))
    gaps[:, 0] = cramer_rows(A, B, op.grid).max(axis=1)
    for t in range(k):
        succ = _draw_successors(cum, n, rng)
        A = _apply_batch(op, A, succ)
        B = _apply_batch(op, B, succ)
        gaps[:, t + 1] = cramer_rows(A, B, op.grid).max(axis=1)
    return gaps


def phi_to_csv(phis: np.ndarray, grid, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample", "state", "atom_index", "z", "cdf"])
        for s, table in enumerate(phis):
            for x, row in enumerate(table):
                for i, v in enumerate(row):
                    w.writerow([s, x, i, repr(float(grid.z[i])), repr(float(v))])

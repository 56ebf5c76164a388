"""Categorical return-distribution machinery on equally spaced grids.

CDF tables are ``(n_states, m)`` arrays of cumulative masses over the grid.
The projected Bellman backup is linear in this representation: row ``x`` of
the new table is ``B_x @ (P @ F)[x]`` where ``B_x`` only depends on the
reward at ``x``, the discount and the grid. The direct solver removes the
constant last coordinate and solves the remaining square system.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .linsolve import SolveReport, solve_dense, solve_sparse
from .metrics import DiscreteDistribution
from .mrp import Mrp, as_mrp

# Grid positions within this many spacings of an atom snap onto it, so that
# a backup landing on an atom puts all its mass there.
SNAP_TOL = 1e-9

# Below this many unknowns "auto" uses the dense solver.
DENSE_CUTOFF = 2000


@dataclass(frozen=True, eq=False)
class SupportGrid:
    z: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        if z.ndim != 1 or len(z) < 2:
            raise ValueError("a support grid needs at least two atoms")
        gaps = np.diff(z)
        if np.any(gaps <= 0):
            raise ValueError("atoms must be strictly increasing")
        spacing = (z[-1] - z[0]) / (len(z) - 1)
        if np.any(np.abs(gaps - spacing) > 1e-12 * max(1.0, abs(z[-1]))):
            raise ValueError("atoms must be equally spaced")
        if z[0] < 0:
            raise ValueError("returns are non-negative; the grid must start at z_1 >= 0")
        z.setflags(write=False)
        object.__setattr__(self, "z", z)

    @property
    def m(self) -> int:
        return len(self.z)

    @property
    def spacing(self) -> float:
        return (self.z[-1] - self.z[0]) / (self.m - 1)

    @property
    def lo(self) -> float:
        return float(self.z[0])

    @property
    def hi(self) -> float:
        return float(self.z[-1])


def make_grid(m: int, gamma: float) -> SupportGrid:
    """Global grid on [0, 1/(1 - gamma)]."""
    if m < 2:
        raise ValueError(f"need m >= 2 atoms, got {m}")
    return SupportGrid(np.arange(m) / (m - 1) / (1.0 - gamma))


def make_grid_ranged(m: int, lo: float, hi: float) -> SupportGrid:
    if m < 2:
        raise ValueError(f"need m >= 2 atoms, got {m}")
    if not lo < hi:
        raise ValueError(f"empty range [{lo}, {hi}]")
    return SupportGrid(lo + (hi - lo) * np.arange(m) / (m - 1))


def support_grid(mrp: Mrp, m: int, mode: str = "global") -> SupportGrid:
    """Grid for ``mrp``: the global range or the environment-specific one."""
    if mode == "global":
        return make_grid(m, mrp.gamma)
    if mode in ("env", "env_specific"):
        lo, hi = mrp.return_range()
        if hi - lo <= 0:
            return make_grid(m, mrp.gamma)
        return make_grid_ranged(m, lo, hi)
    raise ValueError(f"unknown support mode {mode!r}")


def _locate(grid: SupportGrid, v) -> tuple[np.ndarray, np.ndarray]:
    """Lower atom index and interpolation weight towards the upper atom."""
    v = np.clip(np.asarray(v, dtype=float), grid.lo, grid.hi)
    t = (v - grid.lo) / grid.spacing
    r = np.rint(t)
    t = np.where(np.abs(t - r) <= SNAP_TOL, r, t)
    lower = np.clip(np.floor(t), 0, grid.m - 2).astype(np.intp)
    frac = np.clip(t - lower, 0.0, 1.0)
    return lower, frac


def hat(grid: SupportGrid, i: int, zval: float) -> float:
    """Tent function of atom ``i`` (0-based) evaluated at ``zval``."""
    lower, frac = _locate(grid, zval)
    if i == lower:
        return float(1.0 - frac)
    if i == lower + 1:
        return float(frac)
    return 0.0


def project_dirac(grid: SupportGrid, zval: float) -> tuple[np.ndarray, np.ndarray]:
    """Projection of a point mass: (atom indices, masses), at most two atoms."""
    lower, frac = _locate(grid, zval)
    lower, frac = int(lower), float(frac)
    if frac == 0.0:
        return np.array([lower]), np.array([1.0])
    if frac == 1.0:
        return np.array([lower + 1]), np.array([1.0])
    return np.array([lower, lower + 1]), np.array([1.0 - frac, frac])


def project_distribution(grid: SupportGrid, dist: DiscreteDistribution) -> np.ndarray:
    """pmf over the grid with mass E[h_i(Z)] at atom i."""
    lower, frac = _locate(grid, dist.atoms)
    p = np.zeros(grid.m)
    np.add.at(p, lower, dist.probs * (1.0 - frac))
    np.add.at(p, lower + 1, dist.probs * frac)
    return p


def cumulative_hat(model, grid: SupportGrid) -> np.ndarray:
    """H[x, i, j] = sum_{l <= i} E[h_l(R_x + gamma z_j)] with shape (X, m, m).

    The column ``j = m + 1`` of the mathematical definition is identically
    zero and is not stored.
    """
    mrp = as_mrp(model)
    m = grid.m
    rows = np.arange(m)[:, None]
    H = np.zeros((mrp.n_states, m, m))
    for x in range(mrp.n_states):
        atoms, weights = mrp.reward_atoms[x], mrp.reward_probs[x]
        for r, w in zip(atoms, weights):
            lower, frac = _locate(grid, r + mrp.gamma * grid.z)
            step = (rows > lower[None, :]).astype(float)
            step += (rows == lower[None, :]) * (1.0 - frac[None, :])
            if len(atoms) == 1:
                H[x] = step
            else:
                H[x] += w * step
    return H


def blocks_from_cumulative(H: np.ndarray) -> np.ndarray:
    """B[x, i, j] = H[x, i, j] - H[x, i, j + 1] with the zero column appended."""
    B = H.copy()
    B[:, :, :-1] -= H[:, :, 1:]
    return B


@dataclass(eq=False)
class CdfTable:
    """Per-state CDF values over a shared support grid."""

    values: np.ndarray
    grid: SupportGrid

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[1] != self.grid.m:
            raise ValueError(f"table shape {self.values.shape} does not match grid size {self.grid.m}")

    @property
    def n_states(self) -> int:
        return self.values.shape[0]

    def check(self, tol: float = 1e-10) -> None:
        F = self.values
        if np.any(F < -tol) or np.any(F > 1 + tol):
            raise ValueError("CDF values leave [0, 1]")
        if np.any(np.diff(F, axis=1) < -tol):
            raise ValueError("CDF values decrease")
        if np.any(np.abs(F[:, -1] - 1.0) > tol):
            raise ValueError("CDF does not reach 1 at the last atom")

    def is_valid(self, tol: float = 1e-10) -> bool:
        try:
            self.check(tol)
        except ValueError:
            return False
        return True

    def pmf(self) -> np.ndarray:
        return decode_pmf(self)

    def distributions(self) -> list[DiscreteDistribution]:
        p = np.clip(self.pmf(), 0.0, None)
        return [DiscreteDistribution(self.grid.z, row / row.sum()) for row in p]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["state", "atom_index", "z", "cdf"])
            for x in range(self.n_states):
                for i in range(self.grid.m):
                    w.writerow([x, i, repr(float(self.grid.z[i])), repr(float(self.values[x, i]))])

    @classmethod
    def from_csv(cls, path) -> "CdfTable":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        X = 1 + max(int(r["state"]) for r in rows)
        m = 1 + max(int(r["atom_index"]) for r in rows)
        values = np.zeros((X, m))
        z = np.zeros(m)
        for r in rows:
            x, i = int(r["state"]), int(r["atom_index"])
            values[x, i] = float(r["cdf"])
            z[i] = float(r["z"])
        return cls(values, SupportGrid(z))


def decode_pmf(f: CdfTable) -> np.ndarray:
    F = f.values if isinstance(f, CdfTable) else np.asarray(f)
    return np.diff(F, axis=1, prepend=0.0)


def encode_pmf(p: np.ndarray, grid: SupportGrid) -> CdfTable:
    F = np.cumsum(np.asarray(p, dtype=float), axis=1)
    F[:, -1] = 1.0
    return CdfTable(F, grid)


def cramer_rows(a: np.ndarray, b: np.ndarray, grid: SupportGrid) -> np.ndarray:
    """Exact per-state Cramer distance between two tables on the same grid.

    The CDF is piecewise constant with value F_i on [z_i, z_{i+1}); beyond
    z_m both tables equal one. Works for difference tables too.
    """
    d = np.atleast_2d(a)[..., :-1] - np.atleast_2d(b)[..., :-1]
    return np.sqrt(grid.spacing * np.sum(d * d, axis=-1))


def sup_cramer(a, b, grid: SupportGrid | None = None) -> float:
    if isinstance(a, CdfTable):
        grid = a.grid
        a = a.values
    if isinstance(b, CdfTable):
        b = b.values
    return float(np.max(cramer_rows(a, b, grid)))


@dataclass(eq=False)
class CategoricalOperator:
    """Sparse CDF Bellman operator for one model and grid.

    ``blocks[x]`` is the m x m matrix B_x in CSR form. ``reduced_matrix`` is
    I - T~ over the first m - 1 atoms of every state and ``reduced_rhs`` the
    matching constant vector (H^x_{i,m} for i < m).
    """

    blocks: list
    transition: np.ndarray
    grid: SupportGrid
    gamma: float
    cumulative: np.ndarray = field(repr=False)
    reduced_matrix: sp.csr_matrix | None = field(default=None, repr=False)
    reduced_rhs: np.ndarray | None = field(default=None, repr=False)
    build_time: float = 0.0
    _block_diag: sp.csr_matrix | None = field(default=None, repr=False)
    _dense: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def m(self) -> int:
        return self.grid.m

    @property
    def block_diag(self) -> sp.csr_matrix:
        if self._block_diag is None:
            self._block_diag = sp.block_diag(self.blocks, format="csr")
        return self._block_diag

    def full_matrix(self) -> sp.csr_matrix:
        """T_P as an (X m) x (X m) sparse matrix, rows/cols ordered (state, atom)."""
        mix = sp.kron(sp.csr_matrix(self.transition), sp.identity(self.m), format="csr")
        return (self.block_diag @ mix).tocsr()

    def dense_matrix(self) -> np.ndarray:
        if self._dense is None:
            self._dense = self.full_matrix().toarray()
        return self._dense

    def reduced_blocks(self) -> list:
        k = self.m - 1
        return [b[:k, :k] for b in self.blocks]

    def apply(self, F: np.ndarray, dense: bool = False) -> np.ndarray:
        if dense:
            return (self.dense_matrix() @ F.ravel()).reshape(F.shape)
        mixed = self.transition @ F
        return (self.block_diag @ mixed.ravel()).reshape(F.shape)


def build_operator(model, grid: SupportGrid, reduced: bool = True) -> CategoricalOperator:
    mrp = as_mrp(model)
    t0 = time.perf_counter()
    H = cumulative_hat(mrp, grid)
    B = blocks_from_cumulative(H)
    blocks = [sp.csr_matrix(b) for b in B]
    op = CategoricalOperator(blocks, mrp.transition, grid, mrp.gamma, H)
    if reduced:
        k = grid.m - 1
        X = mrp.n_states
        bd = sp.block_diag(op.reduced_blocks(), format="csr")
        mix = sp.kron(sp.csr_matrix(mrp.transition), sp.identity(k), format="csr")
        t_red = (bd @ mix).tocsr()
        op.reduced_matrix = (sp.identity(X * k, format="csr") - t_red).tocsr()
        op.reduced_matrix.eliminate_zeros()
        op.reduced_matrix.sort_indices()
        op.reduced_rhs = H[:, :k, -1].ravel().copy()
    op.build_time = time.perf_counter() - t0
    return op


def sparsity_profile(op: CategoricalOperator) -> tuple[int, int]:
    """Largest column and row nonzero counts over the reduced blocks B~_x."""
    col_max = row_max = 0
    for b in op.reduced_blocks():
        b = sp.csr_matrix(b)
        b.eliminate_zeros()
        if b.nnz:
            row_max = max(row_max, int(np.diff(b.indptr).max()))
            col_max = max(col_max, int(np.bincount(b.indices, minlength=b.shape[1]).max()))
    return col_max, row_max


def row_nnz_bound(gamma: float) -> int:
    return math.ceil(2.0 / gamma) + 2


def apply_operator(op: CategoricalOperator, f: CdfTable, dense: bool = False) -> CdfTable:
    return CdfTable(op.apply(f.values, dense=dense), op.grid)


def cdp_iterations(gamma: float, eps: float = 1e-6) -> int:
    """Iteration count after which CDP is within eps in sup-Wasserstein of its fixed point."""
    if gamma == 0.0:
        return 1
    k = (2 * math.log(1 / eps) + 3 * math.log(1 / (1 - gamma))) / math.log(1 / gamma)
    return max(0, math.ceil(k))


def initial_table(n_states: int, grid: SupportGrid) -> CdfTable:
    """Point mass at the lowest atom for every state."""
    return CdfTable(np.ones((n_states, grid.m)), grid)


def cdp_solve(op: CategoricalOperator, f0: CdfTable, k: int, dense: bool = False,
              track: bool = True) -> tuple[CdfTable, np.ndarray]:
    """k applications of the operator; also returns the sup-Cramer size of every step."""
    if k < 0:
        raise ValueError("iteration count must be non-negative")
    F = f0.values.copy()
    steps = np.zeros(k)
    for it in range(k):
        G = op.apply(F, dense=dense)
        if track:
            steps[it] = np.max(cramer_rows(G, F, op.grid))
        F = G
    return CdfTable(F, op.grid), steps


def dcfp_solve(model, grid: SupportGrid, solver: str = "auto",
               op: CategoricalOperator | None = None) -> tuple[CdfTable, SolveReport]:
    """Direct categorical fixed point via one linear solve.

    ``solver`` is ``"dense"``, ``"sparse"`` or ``"auto"`` (dense up to
    ``DENSE_CUTOFF`` unknowns). The report's residual refers to the raw
    solution; the returned table is clipped to [0, 1] and made monotone.
    """
    if op is None:
        op = build_operator(model, grid)
    if op.reduced_matrix is None:
        raise ValueError("operator was built without the reduced system")
    n_unknowns = op.reduced_matrix.shape[0]
    if solver == "auto":
        solver = "dense" if n_unknowns <= DENSE_CUTOFF else "sparse"
    if solver == "dense":
        sol, report = solve_dense(op.reduced_matrix.toarray(), op.reduced_rhs)
    elif solver == "sparse":
        sol, report = solve_sparse(op.reduced_matrix, op.reduced_rhs)
    else:
        raise ValueError(f"unknown solver {solver!r}")
    return CdfTable(finalize_solution(sol, op.n_states, grid.m), grid), report


def finalize_solution(sol: np.ndarray, n_states: int, m: int) -> np.ndarray:
    F = np.ones((n_states, m))
    F[:, :-1] = np.clip(sol.reshape(n_states, m - 1), 0.0, 1.0)
    return np.maximum.accumulate(F, axis=1)

"""Brute-force reference computations for cross-checking the solver.

Everything here is exponential in the problem size and meant for desk-scale
instances only (a handful of units, two or three users). None of it calls
into the closed-form envelope, the simplex projection or the gradient code
it is used to check.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np


class OracleBudgetError(RuntimeError):
    """Requested enumeration exceeds the evaluation budget."""


@dataclass(frozen=True)
class OracleBudget:
    max_evaluations: int = 2_000_000
    grid_steps: int = 72

    def __post_init__(self):
        if self.max_evaluations < 1 or self.grid_steps < 1:
            raise ValueError("budget caps must be positive")

    def require(self, evaluations: int, what: str) -> None:
        if evaluations > self.max_evaluations:
            raise OracleBudgetError(
                f"{what} needs {evaluations} evaluations, budget is {self.max_evaluations}")


def _min_weighted(h, alpha, omegas) -> np.ndarray:
    """Row-wise ``min_k alpha_k |sum_i h_ik e^{j w_i}|^2`` for a batch of phase rows."""
    s = np.exp(1j * omegas) @ h
    return np.min(alpha * np.abs(s) ** 2, axis=1)


def _scan(h, alpha, levels, n_free, fixed_first, chunk=65536):
    best_val, best_idx = -np.inf, None
    combos = itertools.product(range(len(levels)), repeat=n_free)
    while True:
        block = np.array(list(itertools.islice(combos, chunk)), dtype=np.int64)
        if block.size == 0:
            break
        block = block.reshape(-1, n_free)
        om = levels[block]
        if fixed_first:
            om = np.hstack([np.zeros((om.shape[0], 1)), om])
        vals = _min_weighted(h, alpha, om)
        j = int(np.argmax(vals))  # first maximizer: lexicographic tie-break
        if vals[j] > best_val:
            best_val, best_idx = float(vals[j]), om[j].copy()
    return best_idx, best_val


def exhaustive_discrete(H, weights, bits: int, budget: OracleBudget | None = None,
                        tx_power: float = 1.0):
    """Globally best ``2**bits``-level configuration by full enumeration.

    Returns ``(omega, min weighted power)``.
    """
    budget = budget or OracleBudget()
    h = np.asarray(getattr(H, "entries", H), dtype=complex)
    alpha = np.asarray(weights, dtype=float)
    n = h.shape[0]
    budget.require((2 ** bits) ** n, f"{bits}-bit enumeration over {n} units")
    levels = 2 * np.pi * np.arange(2 ** bits) / 2 ** bits
    omega, val = _scan(h, alpha, levels, n, fixed_first=False)
    return omega, tx_power * val


def grid_continuous(H, weights, grid_steps: int | None = None, budget: OracleBudget | None = None,
                    tx_power: float = 1.0):
    """Best point of a uniform phase grid with the first phase pinned to 0.

    Pinning is exact because a common phase offset leaves every power unchanged.
    """
    budget = budget or OracleBudget()
    steps = grid_steps or budget.grid_steps
    h = np.asarray(getattr(H, "entries", H), dtype=complex)
    alpha = np.asarray(weights, dtype=float)
    n = h.shape[0]
    budget.require(steps ** (n - 1), f"{steps}-step grid over {n - 1} free phases")
    if n == 1:
        return np.zeros(1), tx_power * float(_min_weighted(h, alpha, np.zeros((1, 1)))[0])
    levels = 2 * np.pi * np.arange(steps) / steps
    omega, val = _scan(h, alpha, levels, n - 1, fixed_first=True)
    return omega, tx_power * val


def moreau_direct(x, lambda_smooth: float, grid_steps: int = 2000, refinements: int = 6,
                  budget: OracleBudget | None = None) -> float:
    """``min_z max(z) + lam ||z - x||^2`` by dense grid search.

    The first pass covers the box ``[min x - 1/lam, max x + 1/lam]^n``; each
    refinement re-grids a box of a few cells around the incumbent.
    """
    budget = budget or OracleBudget(max_evaluations=10_000_000)
    x = np.asarray(x, dtype=float).ravel()
    n = x.size
    if n > 3:
        raise OracleBudgetError("dense envelope search supports n <= 3")
    steps = grid_steps if n <= 2 else min(grid_steps, 200)
    budget.require(steps ** n, f"{steps}-step envelope grid in {n} dims")

    def phi(z):
        return z.max(axis=-1) + lambda_smooth * ((z - x) ** 2).sum(axis=-1)

    lo = np.full(n, x.min() - 1.0 / lambda_smooth)
    hi = np.full(n, x.max() + 1.0 / lambda_smooth)
    best_z, best = None, np.inf
    for _ in range(refinements + 1):
        axes = [np.linspace(lo[d], hi[d], steps) for d in range(n)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
        vals = phi(pts)
        j = int(np.argmin(vals))
        if vals[j] < best:
            best, best_z = float(vals[j]), pts[j]
        cell = (hi - lo) / (steps - 1)
        lo, hi = best_z - 4 * cell, best_z + 4 * cell
    return best


def projection_dense(x, grid_steps: int = 200, budget: OracleBudget | None = None) -> np.ndarray:
    """Closest point to ``x`` among barycentric grid points ``m / grid_steps`` of the simplex."""
    budget = budget or OracleBudget()
    x = np.asarray(x, dtype=float).ravel()
    n = x.size
    if n > 3:
        raise OracleBudgetError("dense simplex search supports n <= 3")
    if n == 1:
        return np.ones(1)
    budget.require((grid_steps + 1) ** (n - 1), "barycentric grid")
    axes = np.arange(grid_steps + 1)
    if n == 2:
        m = np.column_stack([axes, grid_steps - axes])
    else:
        a, b = np.meshgrid(axes, axes, indexing="ij")
        keep = a + b <= grid_steps
        m = np.column_stack([a[keep], b[keep], grid_steps - a[keep] - b[keep]])
    pts = m / grid_steps
    j = int(np.argmin(((pts - x) ** 2).sum(axis=1)))
    return pts[j]


def kkt_residual(x, p) -> float:
    """Largest violation of the threshold form ``p_i = max(x_i - t, 0)``.

    ``t`` is recovered from the support of ``p`` (independent of how ``p``
    was computed); also checks ``x_i <= t`` off the support.
    """
    x, p = np.asarray(x, float), np.asarray(p, float)
    support = p > 0
    t = np.mean(x[support] - p[support])
    res = np.abs(p[support] - (x[support] - t))
    off = np.maximum(x[~support] - t, 0.0)
    return float(max(res.max(initial=0.0), off.max(initial=0.0)))

"""Weighted max-min phase design with a Moreau-Yosida smoothed max.

The problem solved is

    maximize over phases  min_k  alpha_k * |sum_i h[i, k] exp(j w_i)|^2

written as ``min_w max_k f_k(w)`` with ``f_k = -alpha_k |s_k|^2``. The max is
replaced by its Moreau envelope ``M_lam``, minimized by an accelerated
gradient method, and ``lam`` is raised from the spread of the active
components until that spread falls below ``tau``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelMatrix

log = logging.getLogger(__name__)

TWO_PI = 2 * np.pi
# minimum relative gap decrease per outer step before the stall guard counts it
STALL_DECREASE = 0.10


# ---------------------------------------------------------------- containers

@dataclass(frozen=True)
class PhaseConfig:
    """Per-unit phase shifts in radians, normalized to ``[0, 2 pi)``."""

    omega: np.ndarray
    bit_depth: int | None = None

    def __post_init__(self):
        w = np.mod(np.asarray(self.omega, dtype=float).ravel(), TWO_PI)
        w[w >= TWO_PI] = 0.0
        w.setflags(write=False)
        object.__setattr__(self, "omega", w)
        if self.bit_depth is not None and self.bit_depth < 1:
            raise ValueError("bit_depth must be a positive integer")

    def __len__(self):
        return self.omega.size

    @property
    def reflection(self) -> np.ndarray:
        return np.exp(1j * self.omega)


@dataclass(frozen=True)
class SolverOptions:
    """Knobs for :func:`solve_maxmin`.

    ``tau`` is in objective units (transmit power factored out). When it is
    None the tolerance is ``rel_tau`` times ``min_k alpha_k (sum_i |h_ik|)^2``,
    an upper bound on the optimal min-weighted value.
    """

    tau: float | None = None
    rel_tau: float = 1e-4
    lambda0: float = 1e-3
    inner_max_iters: int = 5000
    inner_grad_tol: float | None = None
    outer_max_iters: int = 100
    restarts: int = 1
    seed: int = 0
    active_eps: float = 1e-12

    def __post_init__(self):
        if self.tau is not None and not self.tau > 0:
            raise ValueError("tau must be positive")
        if not self.rel_tau > 0:
            raise ValueError("rel_tau must be positive")
        if not self.lambda0 > 0:
            raise ValueError("lambda0 must be positive")
        if self.inner_grad_tol is not None and not self.inner_grad_tol > 0:
            raise ValueError("inner_grad_tol must be positive")
        for name in ("inner_max_iters", "outer_max_iters", "restarts"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


@dataclass(frozen=True)
class InnerResult:
    omega: np.ndarray
    value: float
    grad_norm: float
    iterations: int
    converged: bool


@dataclass
class Solution:
    phases: PhaseConfig
    user_powers: np.ndarray
    weighted_values: np.ndarray
    active_set: list[int]
    gap: float
    tau: float
    status: str = "converged"
    lambda_trace: list[float] = field(default_factory=list)
    gap_trace: list[float] = field(default_factory=list)
    update_rules: list[str] = field(default_factory=list)
    inner_iterations: int = 0
    restart_index: int = 0

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    @property
    def min_weighted_power(self) -> float:
        return float(np.min(self.weighted_values))

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "gap": self.gap,
            "tau": self.tau,
            "lambda_trace": list(self.lambda_trace),
            "gap_trace": list(self.gap_trace),
            "update_rules": list(self.update_rules),
            "omega": self.phases.omega.tolist(),
            "bit_depth": self.phases.bit_depth,
            "user_powers": self.user_powers.tolist(),
            "weighted_values": self.weighted_values.tolist(),
            "active_set": list(self.active_set),
            "inner_iterations": self.inner_iterations,
            "restart_index": self.restart_index,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Solution":
        return cls(
            phases=PhaseConfig(np.asarray(d["omega"], dtype=float), d.get("bit_depth")),
            user_powers=np.asarray(d["user_powers"], dtype=float),
            weighted_values=np.asarray(d["weighted_values"], dtype=float),
            active_set=[int(k) for k in d["active_set"]],
            gap=float(d["gap"]),
            tau=float(d.get("tau", float("nan"))),
            status=d["status"],
            lambda_trace=[float(v) for v in d.get("lambda_trace", [])],
            gap_trace=[float(v) for v in d.get("gap_trace", [])],
            update_rules=list(d.get("update_rules", [])),
            inner_iterations=int(d.get("inner_iterations", 0)),
            restart_index=int(d.get("restart_index", 0)),
        )


def _channel(H) -> np.ndarray:
    if isinstance(H, ChannelMatrix):
        return H.entries
    h = np.asarray(H, dtype=complex)
    if h.ndim != 2:
        raise ValueError("channel must be an N x K matrix")
    return h


def _omega(phases) -> np.ndarray:
    if isinstance(phases, PhaseConfig):
        return phases.omega
    return np.asarray(phases, dtype=float).ravel()


def _check_dims(h: np.ndarray, omega: np.ndarray, weights=None) -> None:
    if omega.size != h.shape[0]:
        raise ValueError(f"{omega.size} phases for a channel with {h.shape[0]} units")
    if weights is not None and np.size(weights) != h.shape[1]:
        raise ValueError(f"{np.size(weights)} weights for {h.shape[1]} users")


# ------------------------------------------------------ simplex and envelope

def project_simplex(x) -> np.ndarray:
    """Euclidean projection onto ``{p >= 0, sum p = 1}`` (sort and threshold)."""
    x = np.asarray(x, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("cannot project an empty vector")
    if not np.all(np.isfinite(x)):
        raise ValueError("input contains non-finite entries")
    u = np.sort(x)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, x.size + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    threshold = css[rho] / (rho + 1)
    p = np.maximum(x - threshold, 0.0)
    return p / p.sum()


def max_fn(x) -> float:
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise ValueError("max of an empty vector")
    return float(np.max(x))


def moreau_value(x, lambda_smooth: float) -> float:
    """Envelope ``min_z max(z) + lam ||z - x||^2`` in closed form.

    With ``p`` the projection of ``2 lam x`` onto the simplex, the closed form
    ``lam ||x||^2 - ||2 lam x - p||^2 / (4 lam)`` expands to
    ``<x, p> - ||p||^2 / (4 lam)``; the expanded form avoids cancelling two
    large terms when ``lam`` is big.
    """
    if not lambda_smooth > 0:
        raise ValueError("lambda_smooth must be positive")
    x = np.asarray(x, dtype=float).ravel()
    p = project_simplex(2.0 * lambda_smooth * x)
    return float(x @ p - (p @ p) / (4.0 * lambda_smooth))


def moreau_gradient(x, lambda_smooth: float) -> np.ndarray:
    if not lambda_smooth > 0:
        raise ValueError("lambda_smooth must be positive")
    return project_simplex(2.0 * lambda_smooth * np.asarray(x, dtype=float))


# ------------------------------------------------------------ objective

def user_powers(H, phases, tx_power: float = 1.0) -> np.ndarray:
    """Received power ``P |sum_i h_ik exp(j w_i)|^2`` for every user."""
    h, w = _channel(H), _omega(phases)
    _check_dims(h, w)
    s = np.exp(1j * w) @ h
    return tx_power * np.abs(s) ** 2


def objective_components(H, phases, weights) -> np.ndarray:
    """``f_k = -alpha_k |s_k|^2`` (transmit power factored out)."""
    h, w = _channel(H), _omega(phases)
    alpha = np.asarray(weights, dtype=float)
    _check_dims(h, w, alpha)
    if np.any(alpha <= 0):
        raise ValueError("weights must be positive")
    return -alpha * user_powers(h, w)


def objective_jacobian(H, phases, weights) -> np.ndarray:
    """``J[i, k] = d f_k / d w_i = 2 alpha_k Im(h_ik exp(j w_i) conj(s_k))``."""
    h, w = _channel(H), _omega(phases)
    alpha = np.asarray(weights, dtype=float)
    _check_dims(h, w, alpha)
    e = np.exp(1j * w)
    s = e @ h
    return 2.0 * alpha * np.imag(h * e[:, None] * np.conj(s))


def _smoothed(h, alpha, lam, w):
    """Value, gradient, components and simplex weights in one pass."""
    e = np.exp(1j * w)
    s = e @ h
    f = -alpha * (s.real ** 2 + s.imag ** 2)
    p = project_simplex(2.0 * lam * f)
    value = f @ p - (p @ p) / (4.0 * lam)
    grad = 2.0 * np.imag(e * (h @ (alpha * p * np.conj(s))))
    return value, grad, f, p


def smoothed_objective(H, phases, weights, lambda_smooth: float):
    """Return ``(M_lam(f(w)), grad_w M_lam(f(w)))``.

    The gradient is the Jacobian of ``f`` applied to ``P_simplex(2 lam f)``.
    """
    if not lambda_smooth > 0:
        raise ValueError("lambda_smooth must be positive")
    h, w = _channel(H), _omega(phases)
    alpha = np.asarray(weights, dtype=float)
    _check_dims(h, w, alpha)
    value, grad, _, _ = _smoothed(h, alpha, lambda_smooth, w)
    return float(value), grad


# ------------------------------------------------------------ inner solver

def agd_minimize(H, weights, lambda_smooth, omega0, opts: SolverOptions | None = None,
                 ) -> InnerResult:
    """Accelerated gradient descent on the smoothed objective.

    Backtracking halves the step until a sufficient decrease holds and grows
    it by 1.2 after each accepted step; momentum is reset whenever the new
    iterate is worse than the previous one, so values never increase.
    Stops when ``max|grad| <= tol``, after ``inner_max_iters`` steps, or at
    the round-off floor (no decrease found, or 25 steps in a row that leave
    the value unchanged to machine precision).
    """
    opts = opts or SolverOptions()
    h = _channel(H)
    alpha = np.asarray(weights, dtype=float)
    x = np.array(_omega(omega0), dtype=float)
    _check_dims(h, x, alpha)

    def F(w):
        v, g, f, _ = _smoothed(h, alpha, lambda_smooth, w)
        return v, g, f

    fx, gx, comps = F(x)
    tol = opts.inner_grad_tol
    if tol is None:
        tol = 1e-8 * max(1.0, float(np.max(np.abs(comps))))
    gnorm = float(np.max(np.abs(gx)))
    if gnorm <= tol:
        return InnerResult(x, float(fx), gnorm, 0, True)

    y, fy, gy = x.copy(), fx, gx
    t = 1.0
    step = 0.1 / gnorm
    min_step = step * 1e-14
    it = 0
    flat = 0
    converged = False
    while it < opts.inner_max_iters:
        g2 = gy @ gy
        while True:
            x_new = y - step * gy
            f_new, g_new, _ = F(x_new)
            if f_new <= fy - 0.5 * step * g2:
                break
            step *= 0.5
            if step < min_step:
                break
        if step < min_step:
            if y is x:
                break  # no descent left from the current iterate
            y, fy, gy, t = x, fx, gx, 1.0
            step = min_step * 1e14
            continue
        it += 1
        if f_new > fx:
            y, fy, gy, t = x, fx, gx, 1.0
            continue
        # round-off floor: the value stopped moving even though tol is not met
        flat = flat + 1 if fx - f_new <= 4e-16 * max(1.0, abs(fx)) else 0
        if flat >= 25:
            x, fx, gx = x_new, f_new, g_new
            break
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        x_prev = x
        x, fx, gx = x_new, f_new, g_new
        gnorm = float(np.max(np.abs(gx)))
        if gnorm <= tol:
            converged = True
            break
        mom = (t - 1.0) / t_new
        if mom > 0:
            y = x + mom * (x - x_prev)
            fy, gy, _ = F(y)
        else:
            y, fy, gy = x, fx, gx
        t = t_new
        step *= 1.2
    gnorm = float(np.max(np.abs(gx)))
    return InnerResult(x, float(fx), gnorm, it, converged or gnorm <= tol)


# ------------------------------------------------------------ outer loop

def default_tau(H, weights, rel_tau: float = 1e-4) -> float:
    beta_sum = np.abs(_channel(H)).sum(axis=0)
    return float(rel_tau * np.min(np.asarray(weights, dtype=float) * beta_sum ** 2))


def aligned_phases(H, user: int = 0) -> PhaseConfig:
    """Phases putting every path to ``user`` in phase: ``w_i = -psi_ik``."""
    return PhaseConfig(-np.angle(_channel(H)[:, user]))


def active_set(f, lambda_smooth, eps: float = 1e-12):
    p = project_simplex(2.0 * lambda_smooth * np.asarray(f, dtype=float))
    return np.nonzero(p > eps)[0], p


def _run_outer(h, alpha, opts, tau_s, omega, lam_s):
    lam_trace, gap_trace, rules = [], [], []
    rule = "init"
    total_inner = 0
    stalled = 0
    prev_gap = math.inf
    best = None
    status = "not_converged"
    for _ in range(opts.outer_max_iters):
        inner = agd_minimize(h, alpha, lam_s, omega, opts)
        omega = inner.omega
        total_inner += inner.iterations
        f = -alpha * np.abs(np.exp(1j * omega) @ h) ** 2
        idx, _ = active_set(f, lam_s, opts.active_eps)
        gap = float(f[idx].max() - f[idx].min())
        lam_trace.append(lam_s)
        gap_trace.append(gap)
        rules.append(rule)
        score = -float(f.max())
        if best is None or score > best[0]:
            best = (score, omega, idx, gap)
        if gap <= tau_s:
            status = "converged"
            best = (score, omega, idx, gap)
            break
        stalled = stalled + 1 if gap > (1.0 - STALL_DECREASE) * prev_gap else 0
        prev_gap = gap
        if stalled >= 3:
            lam_s *= 10.0
            rule = "stall"
            stalled = 0
        else:
            lam_s = 1.0 / (2.0 * gap)
            rule = "gap"
    _, omega, idx, gap = best
    return status, omega, idx, gap, lam_trace, gap_trace, rules, total_inner


def solve_maxmin(H, weights, opts: SolverOptions | None = None,
                 tx_power: float = 1.0) -> Solution:
    """Maximize ``min_k alpha_k P_k`` over continuous phases.

    Starts from all-zero phases (plus ``opts.restarts - 1`` seeded random
    starts) with ``lam = opts.lambda0``; after each inner solve the smoothing
    parameter becomes ``1 / (2 gap)`` where ``gap`` is the spread of ``f`` over
    the users with positive simplex weight. If the gap stalls (less than
    ``STALL_DECREASE`` relative decrease three times running) ``lam`` is
    multiplied by 10 instead.

    Internally the channel is rescaled so the largest per-user amplitude
    bound is 1; ``lambda_trace``, ``gap`` and ``tau`` are reported in the
    original units, where ``lam = 1 / (2 gap)`` still holds exactly.
    """
    opts = opts or SolverOptions()
    h = _channel(H)
    alpha = np.asarray(weights, dtype=float).ravel()
    if alpha.size != h.shape[1]:
        raise ValueError(f"{alpha.size} weights for {h.shape[1]} users")
    if np.any(alpha <= 0) or not np.all(np.isfinite(alpha)):
        raise ValueError("weights must be positive and finite")
    if not tx_power > 0:
        raise ValueError("tx_power must be positive")
    tau = opts.tau if opts.tau is not None else default_tau(h, alpha, opts.rel_tau)

    def finish(omega, idx, gap, status, lam_trace, gap_trace, rules, inner, restart,
               scale2=1.0, bits=None):
        phases = PhaseConfig(omega, bits)
        pw = user_powers(h, phases, tx_power)
        return Solution(
            phases=phases, user_powers=pw, weighted_values=alpha * pw,
            active_set=[int(i) for i in idx], gap=gap * scale2, tau=tau,
            status=status, lambda_trace=[lam / scale2 for lam in lam_trace],
            gap_trace=[g * scale2 for g in gap_trace], update_rules=rules,
            inner_iterations=inner, restart_index=restart)

    if h.shape[1] == 1:
        return finish(aligned_phases(h).omega, [0], 0.0, "converged", [], [], [], 0, 0)

    scale = float(np.abs(h).sum(axis=0).max())
    if not scale > 0:
        raise ValueError("channel is identically zero")
    hs = h / scale
    scale2 = scale * scale
    tau_s = tau / scale2
    lam_s = opts.lambda0 * scale2

    rng = np.random.default_rng(opts.seed)
    starts = [np.zeros(h.shape[0])]
    starts += [rng.uniform(0.0, TWO_PI, h.shape[0]) for _ in range(opts.restarts - 1)]

    best = None
    for r, omega0 in enumerate(starts):
        status, omega, idx, gap, lt, gt, rules, inner = _run_outer(
            hs, alpha, opts, tau_s, omega0, lam_s)
        sol = finish(omega, idx, gap, status, lt, gt, rules, inner, r, scale2)
        log.debug("start %d: %s gap=%.3e min weighted=%.6e", r, status, sol.gap,
                  sol.min_weighted_power)
        if best is None or sol.min_weighted_power > best.min_weighted_power:
            best = sol
    return best


def evaluate(H, weights, phases, tx_power: float = 1.0, tau: float = float("nan"),
             status: str = "evaluated", lambda_smooth: float | None = None) -> Solution:
    """Wrap fixed phases into a :class:`Solution` (used after quantization).

    The active set is taken from ``P_simplex(2 lam f)``; with no ``lam`` given
    it is the set of users attaining the minimum weighted power.
    """
    h = _channel(H)
    alpha = np.asarray(weights, dtype=float)
    phases = phases if isinstance(phases, PhaseConfig) else PhaseConfig(phases)
    pw = user_powers(h, phases, tx_power)
    f = -alpha * pw / tx_power
    if lambda_smooth is None:
        idx = np.nonzero(f >= f.max() - 1e-12 * abs(f.max()))[0]
    else:
        idx, _ = active_set(f, lambda_smooth)
    gap = float(f[idx].max() - f[idx].min())
    return Solution(phases=phases, user_powers=pw, weighted_values=alpha * pw,
                    active_set=[int(i) for i in idx], gap=gap, tau=tau, status=status)

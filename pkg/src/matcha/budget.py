"""Activation probabilities that maximise the algebraic connectivity of the
expected topology under a communication budget.

The problem is

    maximise   lambda_2(sum_j p_j L_j)
    subject to sum_j p_j <= C_b * M,   0 <= p_j <= 1,

a concave maximisation over a box intersected with a half-space.  It is
solved by projected supergradient ascent with diminishing steps
``a / sqrt(t)`` and best-iterate tracking, started from the uniform point
``p_j = C_b``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import Disconnected, InvalidBudget
from .graph import CONNECTIVITY_TOL
from .linalg import deflated_eigh
from .matching import MatchingDecomposition

BUDGET_SLACK = 1e-9


@dataclass(frozen=True)
class OptimizerOptions:
    iterations: int = 2000
    step_scale: float | None = None  # default 1 / max_j ||L_j||_2
    patience: int = 100
    min_improvement: float = 1e-10
    multiplicity_gap: float = 1e-8


@dataclass(frozen=True)
class ActivationPlan:
    probabilities: np.ndarray
    budget: float
    lambda2: float
    history: tuple = field(default=(), compare=False, repr=False)

    @property
    def expected_comm_time(self) -> float:
        """Expected number of active matchings per iteration (link-time units)."""
        return float(np.sum(self.probabilities))

    def to_dict(self) -> dict:
        return {
            "C_b": float(self.budget),
            "p": [float(x) for x in self.probabilities],
            "lambda2": float(self.lambda2),
            "expected_comm_time": self.expected_comm_time,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def project_box_budget(q, cap: float, tol: float = 1e-10) -> np.ndarray:
    """Euclidean projection of q onto {p : 0 <= p <= 1, sum(p) <= cap}.

    If clipping to the box already satisfies the budget that is the answer;
    otherwise the budget is active and the projection is clip(q - tau, 0, 1)
    with tau > 0 chosen so that the sum equals ``cap``.  The sum is piecewise
    linear in tau with kinks at q_i and q_i - 1, so tau is bracketed between
    two kinks by binary search and then solved exactly on that segment; plain
    bisection is the fallback if rounding leaves the sum off by more than tol.
    """
    if cap < 0:
        raise ValueError("cap must be non-negative")
    q = np.asarray(q, dtype=float)
    p = np.clip(q, 0.0, 1.0)
    if p.sum() <= cap:
        return p
    kinks = np.unique(np.concatenate(([0.0], q, q - 1.0)))
    kinks = kinks[kinks >= 0.0]
    sums = np.clip(q[None, :] - kinks[:, None], 0.0, 1.0).sum(axis=1)
    k = int(np.searchsorted(-sums, -cap, side="left"))  # first kink with sum <= cap
    t0, t1, s0, s1 = kinks[k - 1], kinks[k], sums[k - 1], sums[k]
    tau = t1 if s0 == s1 else t0 + (s0 - cap) * (t1 - t0) / (s0 - s1)
    p = np.clip(q - tau, 0.0, 1.0)
    if abs(p.sum() - cap) <= tol and p.sum() <= cap + BUDGET_SLACK:
        return p
    lo, hi = 0.0, float(q.max())
    for _ in range(200):
        tau = 0.5 * (lo + hi)
        s = np.clip(q - tau, 0.0, 1.0).sum()
        if s > cap:
            lo = tau
        else:
            hi = tau
        if hi - lo <= 1e-16 * max(1.0, abs(hi)) or abs(s - cap) <= 0.1 * tol:
            break
    # hi is always on the feasible side
    return np.clip(q - hi, 0.0, 1.0)


def expected_lambda2(decomp: MatchingDecomposition, p) -> float:
    w, _ = deflated_eigh(decomp.weighted_laplacian(p))
    return float(w[0]) if w.size else 0.0


def _supergradient(decomp, w, vecs, gap):
    r = int(np.sum(w - w[0] < gap))
    u = vecs[:, :r]
    return np.einsum("ak,jab,bk->j", u, decomp.laplacians, u) / r


def lambda2_supergradient(decomp: MatchingDecomposition, p, gap: float = 1e-8) -> np.ndarray:
    """Supergradient of p -> lambda_2(sum_j p_j L_j).

    With a simple Fiedler value this is the gradient v^T L_j v.  When the
    smallest eigenvalue on 1-perp is repeated (gap below ``gap``) the entries
    are averaged over an orthonormal basis of that eigenspace.
    """
    w, vecs = deflated_eigh(decomp.weighted_laplacian(p))
    return _supergradient(decomp, w, vecs, gap)


def optimize_probabilities(
    decomp: MatchingDecomposition, budget: float, options: OptimizerOptions | None = None
) -> ActivationPlan:
    opts = options or OptimizerOptions()
    if not 0.0 < budget <= 1.0:
        raise InvalidBudget(f"communication budget must lie in (0, 1], got {budget}")
    if decomp.m == 1:
        return ActivationPlan(np.ones(0), float(budget), 0.0, (0.0,))
    if expected_lambda2(decomp, np.ones(decomp.M)) <= CONNECTIVITY_TOL:
        raise Disconnected("base graph is not connected")
    cap = budget * decomp.M
    if budget >= 1.0:
        p = np.ones(decomp.M)
        lam = expected_lambda2(decomp, p)
        return ActivationPlan(p, float(budget), lam, (lam,))

    norms = [np.linalg.norm(lap, 2) for lap in decomp.laplacians]
    scale = opts.step_scale if opts.step_scale is not None else 1.0 / max(norms)

    p = project_box_budget(np.full(decomp.M, float(budget)), cap)
    w, vecs = deflated_eigh(decomp.weighted_laplacian(p))
    best_p, best = p, float(w[0])
    history = [best]
    stall = 0
    for t in range(1, opts.iterations + 1):
        g = _supergradient(decomp, w, vecs, opts.multiplicity_gap)
        p = project_box_budget(p + (scale / np.sqrt(t)) * g, cap)
        w, vecs = deflated_eigh(decomp.weighted_laplacian(p))
        value = float(w[0])
        if value > best + opts.min_improvement:
            best_p, best = p, value
            stall = 0
        else:
            if value > best:
                best_p, best = p, value
            stall += 1
        history.append(best)
        if stall >= opts.patience:
            break
    return ActivationPlan(best_p, float(budget), best, tuple(history))


def uniform_plan(decomp: MatchingDecomposition, budget: float) -> ActivationPlan:
    """The naive plan p_j = C_b (always feasible)."""
    p = np.full(decomp.M, float(budget))
    return ActivationPlan(p, float(budget), expected_lambda2(decomp, p))


def plan_from_dict(data: dict, decomp: MatchingDecomposition) -> ActivationPlan:
    p = np.asarray(data["p"], dtype=float)
    if p.shape != (decomp.M,):
        raise ValueError("plan length does not match the decomposition")
    return ActivationPlan(p, float(data["C_b"]), expected_lambda2(decomp, p))

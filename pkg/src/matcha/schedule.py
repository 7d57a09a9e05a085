"""Pre-generated topology sequences for MATCHA and the two baselines.

MATCHA activates matching j at iteration k when an independent
Bernoulli(p_j) draw succeeds.  VANILLA uses every matching every iteration.
PERIODIC activates the whole base graph with probability C_b per iteration.
Uniforms are drawn iteration-major, matching index ascending, from the
schedule stream of :mod:`matcha.rng`.
"""
from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .budget import ActivationPlan, optimize_probabilities, OptimizerOptions
from .errors import IndexOutOfRange, InvalidPolicyParams
from .graph import algebraic_connectivity
from .matching import MatchingDecomposition, decomposition_to_dict
from .mixing import (
    MixingParams,
    optimize_alpha,
    optimize_alpha_moments,
    periodic_moments,
    vanilla_moments,
)
from .rng import schedule_rng


class Policy(str, enum.Enum):
    MATCHA = "matcha"
    VANILLA = "vanilla"
    PERIODIC = "periodic"


@dataclass(frozen=True)
class CommTimeModel:
    """Linear delay model: each active matching costs ``t_link``; every local
    SGD step costs ``t_comp``."""

    t_link: float = 1.0
    t_comp: float = 0.0

    def __post_init__(self):
        if self.t_link < 0 or self.t_comp < 0:
            raise ValueError("time constants must be non-negative")


@dataclass(frozen=True)
class Schedule:
    policy: Policy
    seed: int
    iterations: int
    alpha: float
    decomposition: MatchingDecomposition
    activations: np.ndarray | None  # (K, M) MATCHA, (K, 1) PERIODIC, None VANILLA
    probabilities: np.ndarray | None = None
    budget: float = 1.0

    def _check(self, k: int) -> None:
        if not 0 <= k < self.iterations:
            raise IndexOutOfRange(f"iteration {k} outside [0, {self.iterations})")

    def active(self, k: int) -> np.ndarray:
        """Boolean mask over matchings for iteration k."""
        self._check(k)
        M = self.decomposition.M
        if self.policy is Policy.VANILLA:
            return np.ones(M, dtype=bool)
        if self.policy is Policy.PERIODIC:
            return np.full(M, bool(self.activations[k, 0]))
        return self.activations[k].copy()

    def active_counts(self) -> np.ndarray:
        """Number of active matchings at every iteration."""
        M = self.decomposition.M
        if self.policy is Policy.VANILLA:
            return np.full(self.iterations, M, dtype=int)
        if self.policy is Policy.PERIODIC:
            return self.activations[:, 0].astype(int) * M
        return self.activations.sum(axis=1)


def prepare_policy(
    policy: Policy,
    decomp: MatchingDecomposition,
    budget: float = 1.0,
    plan: ActivationPlan | None = None,
    options: OptimizerOptions | None = None,
    tol: float = 1e-8,
):
    """Activation plan and optimised mixing parameters for a policy.

    Each policy gets its own alpha: MATCHA from its plan's moments, VANILLA
    from (L, 0), PERIODIC from (C_b L, C_b (1 - C_b) L^2 / 2).
    Returns ``(plan, mixing)``.
    """
    policy = Policy(policy)
    if policy is Policy.MATCHA:
        if plan is None:
            plan = optimize_probabilities(decomp, budget, options)
        return plan, optimize_alpha(decomp, plan, tol)
    lap = decomp.base_laplacian()
    if policy is Policy.VANILLA:
        ones = np.ones(decomp.M)
        plan = ActivationPlan(ones, 1.0, algebraic_connectivity(lap))
        return plan, optimize_alpha_moments(*vanilla_moments(lap), tol=tol)
    if not isinstance(budget, (int, float)) or not 0.0 < budget <= 1.0:
        raise InvalidPolicyParams("PERIODIC needs a scalar budget in (0, 1]")
    full = np.full(decomp.M, float(budget))
    plan = ActivationPlan(full, float(budget), float(budget) * algebraic_connectivity(lap))
    return plan, optimize_alpha_moments(*periodic_moments(lap, budget), tol=tol)


def generate_schedule(
    policy: Policy,
    decomp: MatchingDecomposition,
    mixing: MixingParams,
    iterations: int,
    seed: int,
    plan: ActivationPlan | None = None,
    budget: float | None = None,
) -> Schedule:
    policy = Policy(policy)
    if iterations < 1:
        raise ValueError("need at least one iteration")
    rng = schedule_rng(seed)
    if policy is Policy.MATCHA:
        if plan is None:
            raise InvalidPolicyParams("MATCHA needs an activation plan")
        p = np.asarray(plan.probabilities, dtype=float)
        table = rng.random((iterations, decomp.M)) < p[None, :]
        return Schedule(policy, seed, iterations, mixing.alpha, decomp, table, p, plan.budget)
    if policy is Policy.PERIODIC:
        if budget is None or isinstance(budget, bool) or not isinstance(budget, (int, float)):
            raise InvalidPolicyParams("PERIODIC needs a scalar budget")
        if not 0.0 < budget <= 1.0:
            raise InvalidPolicyParams("PERIODIC budget must lie in (0, 1]")
        table = rng.random((iterations, 1)) < budget
        return Schedule(policy, seed, iterations, mixing.alpha, decomp, table, None, float(budget))
    return Schedule(policy, seed, iterations, mixing.alpha, decomp, None, None, 1.0)


def laplacian_at(schedule: Schedule, k: int) -> np.ndarray:
    return schedule.decomposition.weighted_laplacian(schedule.active(k))


def mixing_matrix_at(schedule: Schedule, k: int) -> np.ndarray:
    """W^(k) = I - alpha L^(k)."""
    return np.eye(schedule.decomposition.m) - schedule.alpha * laplacian_at(schedule, k)


def comm_time_at(schedule: Schedule, k: int, model: CommTimeModel = CommTimeModel()) -> float:
    """Active matchings communicate one after another: count * t_link."""
    return float(np.count_nonzero(schedule.active(k))) * model.t_link


def comm_times(schedule: Schedule, model: CommTimeModel = CommTimeModel()) -> np.ndarray:
    return schedule.active_counts() * model.t_link


def plan_hash(schedule: Schedule) -> str:
    payload = {
        "policy": schedule.policy.value,
        "decomposition": decomposition_to_dict(schedule.decomposition),
        "p": None if schedule.probabilities is None else [float(x) for x in schedule.probabilities],
        "C_b": float(schedule.budget),
        "alpha": float(schedule.alpha),
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


def schedule_to_dict(schedule: Schedule, include_table: bool = False) -> dict:
    out = {
        "policy": schedule.policy.value,
        "seed": int(schedule.seed),
        "iterations": int(schedule.iterations),
        "alpha": float(schedule.alpha),
        "C_b": float(schedule.budget),
        "M": schedule.decomposition.M,
        "p": None if schedule.probabilities is None else [float(x) for x in schedule.probabilities],
        "plan_hash": plan_hash(schedule),
    }
    if include_table and schedule.activations is not None:
        out["activations"] = schedule.activations.astype(int).tolist()
    return out

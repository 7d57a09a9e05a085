"""Decentralized SGD over a pre-generated schedule.

Worker models are the rows of ``X``.  One iteration is a local stochastic
gradient step followed by a consensus step with the iteration's mixing
matrix: ``X <- W^(k) (X - lr * G^(k))``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NonFinite, StepSizeViolation
from .objectives import Objective
from .rng import noise_rng
from .schedule import CommTimeModel, Schedule, comm_times, mixing_matrix_at


@dataclass(frozen=True)
class TrainState:
    X: np.ndarray  # (m, d)
    k: int
    lr: float
    sim_time: float = 0.0

    @property
    def x_bar(self) -> np.ndarray:
        return self.X.mean(axis=0)


def init_state(objective: Objective, lr: float, x0=None) -> TrainState:
    """All workers start from the same point (zeros unless ``x0`` is given).

    ``x0`` may also be a full (m, d) matrix, e.g. for consensus-only runs.
    """
    m, d = objective.num_workers, objective.dim
    if x0 is None:
        X = np.zeros((m, d))
    else:
        x0 = np.asarray(x0, dtype=float)
        X = np.tile(x0, (m, 1)) if x0.ndim == 1 else x0.copy()
    if X.shape != (m, d):
        raise ValueError(f"initial models have shape {X.shape}, expected {(m, d)}")
    return TrainState(X, 0, float(lr), 0.0)


def consensus_distance(X) -> float:
    """||X (I - J)||_F^2 in worker-per-row layout: sum of squared deviations from the mean."""
    D = X - X.mean(axis=0)
    return float(np.sum(D * D))


def sgd_step(
    state: TrainState,
    schedule: Schedule,
    objective: Objective,
    k: int,
    model: CommTimeModel = CommTimeModel(),
    noise_seed: int | None = None,
    gradients=None,
) -> TrainState:
    """One decentralized SGD iteration using W^(k) from the schedule.

    Gradient noise comes from the (seed, k) noise stream, ``seed`` being the
    schedule's seed unless ``noise_seed`` is given.  ``gradients`` overrides
    the sampled G^(k) (used by tests).
    """
    if gradients is None:
        rng = noise_rng(schedule.seed if noise_seed is None else noise_seed, k)
        gradients = objective.stochastic_gradients(state.X, rng)
    W = mixing_matrix_at(schedule, k)
    with np.errstate(over="ignore", invalid="ignore"):
        X = W @ (state.X - state.lr * gradients)
    if not np.all(np.isfinite(X)):
        raise NonFinite(f"non-finite model at iteration {k}", iteration=k)
    elapsed = model.t_comp + float(np.count_nonzero(schedule.active(k))) * model.t_link
    return TrainState(X, state.k + 1, state.lr, state.sim_time + elapsed)


@dataclass(frozen=True)
class MetricRecord:
    k: int
    sim_time: float
    loss_avg_model: float
    grad_norm_sq: float
    consensus_sq: float
    comm_time_iter: float


@dataclass
class RunMetrics:
    policy: str
    budget: float
    seed: int
    records: list = field(default_factory=list)
    avg_grad_norm_sq: float = float("nan")  # (1/K) sum_{k=1..K} ||grad F(x_bar^(k))||^2
    total_comm_time: float = 0.0
    iterations: int = 0
    final_state: TrainState | None = None

    @property
    def final_loss(self) -> float:
        return self.records[-1].loss_avg_model

    @property
    def mean_comm_time(self) -> float:
        return self.total_comm_time / self.iterations if self.iterations else 0.0


@dataclass(frozen=True)
class RunConfig:
    schedule: Schedule
    objective: Objective
    lr: float
    log_interval: int = 1
    model: CommTimeModel = CommTimeModel()
    x0: np.ndarray | None = None


def theory_learning_rate(num_workers: int, iterations: int) -> float:
    """eta = sqrt(m / K)."""
    return math.sqrt(num_workers / iterations)


def run(config: RunConfig) -> RunMetrics:
    """Run K = schedule.iterations steps, logging every ``log_interval``.

    Record k describes the state after k steps (k = 0 is the start).  On
    divergence a :class:`NonFinite` is raised carrying the partial metrics
    in its ``metrics`` attribute.
    """
    sched, obj = config.schedule, config.objective
    state = init_state(obj, config.lr, config.x0)
    per_iter = comm_times(sched, config.model)
    metrics = RunMetrics(sched.policy.value, float(sched.budget), int(sched.seed))

    def record(st, comm):
        with np.errstate(over="ignore", invalid="ignore"):  # huge but finite iterates
            xb = st.x_bar
            g = obj.gradient(xb)
            gsq = float(g @ g)
            metrics.records.append(
                MetricRecord(st.k, st.sim_time, obj.loss(xb), gsq, consensus_distance(st.X), comm)
            )
        return gsq

    grad_sum = record(state, 0.0)
    K = sched.iterations
    for k in range(K):
        try:
            state = sgd_step(state, sched, obj, k, config.model)
        except NonFinite as exc:
            metrics.iterations = k
            exc.metrics = metrics
            raise
        metrics.total_comm_time += float(per_iter[k])
        logged = state.k % config.log_interval == 0 or state.k == K
        if logged:
            gsq = record(state, float(per_iter[k]))
        if state.k < K:
            if not logged:
                with np.errstate(over="ignore", invalid="ignore"):
                    g = obj.gradient(state.x_bar)
                    gsq = float(g @ g)
            grad_sum += gsq
    metrics.avg_grad_norm_sq = grad_sum / K
    metrics.iterations = K
    metrics.final_state = state
    return metrics


@dataclass(frozen=True)
class TheoryConstants:
    f_gap: float  # F(x_bar^(1)) - F_inf
    lipschitz: float
    sigma2: float
    zeta2: float
    num_workers: int
    iterations: int
    lr: float


def theorem2_bound(c: TheoryConstants, rho: float) -> float:
    """Upper bound on (1/K) sum_k E||grad F(x_bar^(k))||^2 for decentralized SGD.

    Valid when lr * L <= min(1, (rho^-1/2 - 1) / 4); raises
    :class:`StepSizeViolation` otherwise.
    """
    if not 0.0 <= rho < 1.0:
        raise StepSizeViolation(f"rho must lie in [0, 1), got {rho}")
    eta, L = c.lr, c.lipschitz
    sr = math.sqrt(rho)
    limit = 1.0 if rho == 0 else min(1.0, (1.0 / sr - 1.0) / 4.0)
    if eta * L > limit:
        raise StepSizeViolation(f"lr * L = {eta * L:.4g} exceeds {limit:.4g}")
    D = 6.0 * eta ** 2 * L ** 2 * rho / (1.0 - sr) ** 2
    if D >= 0.5:
        raise StepSizeViolation(f"D = {D:.4g} is not below 1/2")
    first = 2.0 * c.f_gap / (eta * c.iterations) + eta * L * c.sigma2 / c.num_workers
    second = (2.0 * eta ** 2 * L ** 2 * rho / (1.0 - sr)) * (
        c.sigma2 / (1.0 + sr) + 3.0 * c.zeta2 / (1.0 - sr)
    )
    return (first + second) / (1.0 - 2.0 * D)


def theory_constants(objective: Objective, iterations: int, lr: float, x0=None) -> TheoryConstants:
    """Constants for :func:`theorem2_bound`; the objective must publish them."""
    missing = [n for n in ("lipschitz", "sigma2", "zeta2", "f_inf") if getattr(objective, n) is None]
    if missing:
        raise ValueError(f"objective does not publish {', '.join(missing)}")
    x1 = np.zeros(objective.dim) if x0 is None else np.asarray(x0, dtype=float)
    return TheoryConstants(
        objective.loss(x1) - objective.f_inf,
        objective.lipschitz,
        objective.sigma2,
        objective.zeta2,
        objective.num_workers,
        iterations,
        lr,
    )

"""Consensus weight selection for W = I - alpha * L^(k).

With i.i.d. Bernoulli(p_j) activations the second moment of the mixing
matrix is

    E[W^T W] = I - 2 alpha Lbar + alpha^2 (Lbar^2 + 2 Ltilde),

where Lbar = sum_j p_j L_j and Ltilde = 1/2 sum_j p_j (1 - p_j) L_j^2.
For matchings L_j^2 = 2 L_j, so Ltilde reduces to sum_j p_j (1 - p_j) L_j.
The contraction factor is rho = ||E[W^T W] - J||_2.  Each Rayleigh quotient
of E[W^T W] on 1-perp is a convex quadratic in alpha, so rho(alpha) is
convex; it is minimised by golden-section search on [0, 2 / lambda_2(Lbar)]
(rho(0) = 1 and every direction is back above 1 at the right end).  The
minimiser is then certified against the semidefinite program in
(rho, alpha, beta) with beta = alpha^2.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePlan, Disconnected
from .graph import CONNECTIVITY_TOL
from .linalg import averaging_matrix, restrict_to_ones_complement
from .matching import MatchingDecomposition

DEGENERATE_TOL = 1e-12
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class MixingParams:
    alpha: float
    rho: float
    L_bar: np.ndarray
    L_tilde: np.ndarray
    beta: float

    def to_dict(self, budget=None, expected_comm_time=None) -> dict:
        return {
            "alpha": float(self.alpha),
            "rho": float(self.rho),
            "C_b": None if budget is None else float(budget),
            "expected_comm_time": None if expected_comm_time is None else float(expected_comm_time),
        }

    def to_json(self, budget=None, expected_comm_time=None) -> str:
        return json.dumps(self.to_dict(budget, expected_comm_time))


def expected_moments(decomp: MatchingDecomposition, p):
    """(Lbar, Ltilde) for independent Bernoulli(p_j) activation of each block."""
    p = np.asarray(p, dtype=float)
    lbar = decomp.weighted_laplacian(p)
    var = p * (1.0 - p)
    squares = np.einsum("jab,jbc->jac", decomp.laplacians, decomp.laplacians)
    ltilde = 0.5 * np.tensordot(var, squares, axes=1)
    return lbar, ltilde


def periodic_moments(lap, budget: float):
    """Whole graph active with probability C_b: Lbar = C_b L, Ltilde = C_b(1-C_b) L^2 / 2."""
    lap = np.asarray(lap, dtype=float)
    return budget * lap, 0.5 * budget * (1.0 - budget) * (lap @ lap)


def vanilla_moments(lap):
    lap = np.asarray(lap, dtype=float)
    return lap.copy(), np.zeros_like(lap)


def second_moment(L_bar, L_tilde, alpha: float) -> np.ndarray:
    """E[W^T W] = I - 2 alpha Lbar + alpha^2 (Lbar^2 + 2 Ltilde)."""
    m = L_bar.shape[0]
    return np.eye(m) - 2.0 * alpha * L_bar + alpha * alpha * (L_bar @ L_bar + 2.0 * L_tilde)


class _RhoCurve:
    """rho(alpha) with the quadratic's coefficients pre-compressed onto 1-perp."""

    def __init__(self, L_bar, L_tilde):
        self.lin = restrict_to_ones_complement(L_bar)
        self.quad = restrict_to_ones_complement(L_bar @ L_bar + 2.0 * L_tilde)
        self.eye = np.eye(self.lin.shape[0])

    def __call__(self, alpha: float) -> float:
        if self.lin.shape[0] == 0:
            return 0.0
        w = np.linalg.eigvalsh(self.eye - 2.0 * alpha * self.lin + alpha * alpha * self.quad)
        return float(max(abs(w[0]), abs(w[-1])))


def rho_from_moments(L_bar, L_tilde, alpha: float) -> float:
    """Spectral norm of E[W^T W] - J, computed on 1-perp."""
    return _RhoCurve(L_bar, L_tilde)(alpha)


def rho_full_matrix(L_bar, L_tilde, alpha: float) -> float:
    """Same quantity via ||E[W^T W] - J||_2 on the full m x m matrix."""
    mat = second_moment(L_bar, L_tilde, alpha) - averaging_matrix(L_bar.shape[0])
    w = np.linalg.eigvalsh((mat + mat.T) / 2.0)
    return float(max(abs(w[0]), abs(w[-1])))


def rho_of_alpha(decomp: MatchingDecomposition, plan, alpha: float) -> float:
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    return rho_from_moments(*expected_moments(decomp, plan.probabilities), alpha)


def golden_section(f, lo: float, hi: float, tol: float):
    """Minimise a unimodal f on [lo, hi]; returns (x, f(x))."""
    a, b = lo, hi
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    fx = f(x)
    best = min(((fx, x), (fc, c), (fd, d)))
    return best[1], best[0]


def optimize_alpha_moments(L_bar, L_tilde, tol: float = 1e-8) -> MixingParams:
    curve = _RhoCurve(L_bar, L_tilde)
    if curve.lin.size == 0:
        # a single node is already averaged: W = I = J for every alpha
        return MixingParams(0.0, 0.0, L_bar, L_tilde, 0.0)
    lam2 = float(np.linalg.eigvalsh(curve.lin)[0])
    if lam2 <= DEGENERATE_TOL:
        raise DegeneratePlan(f"lambda_2 of the expected Laplacian is {lam2:.3e}")
    hi = 2.0 / lam2
    assert curve(hi) >= curve(0.5 * hi) - 1e-12, "rho minimiser outside search bracket"
    alpha, rho = golden_section(curve, 0.0, hi, tol)
    return MixingParams(float(alpha), float(rho), L_bar, L_tilde, float(alpha * alpha))


def optimize_alpha(decomp: MatchingDecomposition, plan, tol: float = 1e-8) -> MixingParams:
    """alpha minimising rho for a MATCHA activation plan."""
    base = restrict_to_ones_complement(decomp.base_laplacian())
    if base.size and np.linalg.eigvalsh(base)[0] <= CONNECTIVITY_TOL:
        raise Disconnected("base graph is not connected")
    return optimize_alpha_moments(*expected_moments(decomp, plan.probabilities), tol=tol)


def sdp_constraint_slack(params: MixingParams):
    """Violation of the two SDP constraints at (rho, alpha, beta).

    Returns ``(alpha^2 - beta, lambda_max(I - 2 alpha Lbar + beta (Lbar^2 +
    2 Ltilde) - J - rho I))``; both are <= 0 for a feasible point.
    """
    m = params.L_bar.shape[0]
    lmi = (
        np.eye(m)
        - 2.0 * params.alpha * params.L_bar
        + params.beta * (params.L_bar @ params.L_bar + 2.0 * params.L_tilde)
        - averaging_matrix(m)
        - params.rho * np.eye(m)
    )
    return params.alpha ** 2 - params.beta, float(np.linalg.eigvalsh((lmi + lmi.T) / 2.0)[-1])


def rho_upper_bound(plan, lambda2_bar: float, alpha: float) -> float:
    """1 - 2 alpha lambda_2(Lbar) + 4 alpha^2 S^2 + 4 alpha^2 S, S = sum_j p_j."""
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    s = float(np.sum(plan.probabilities))
    return 1.0 - 2.0 * alpha * lambda2_bar + 4.0 * alpha ** 2 * s ** 2 + 4.0 * alpha ** 2 * s


def contraction_interval(L_bar, L_tilde) -> float:
    """Right end of an alpha interval (0, a) on which rho < 1 is guaranteed.

    With zeta = ||Ltilde||_2 and lambda_2, lambda_m the extreme nonzero
    eigenvalues of Lbar, h_lam(alpha) = (1 - alpha lam)^2 + 2 alpha^2 zeta is
    below 1 for alpha < 2 lam / (lam^2 + 2 zeta); rho is bounded by the larger
    of h at the two extremes.
    """
    w = np.linalg.eigvalsh(restrict_to_ones_complement(L_bar))
    zeta = float(np.linalg.norm(L_tilde, 2))
    lam2, lamm = float(w[0]), float(w[-1])
    return min(2.0 * lam2 / (lam2 ** 2 + 2.0 * zeta), 2.0 * lamm / (lamm ** 2 + 2.0 * zeta))


def mixing_matrix(decomp: MatchingDecomposition, active, alpha: float) -> np.ndarray:
    """W = I - alpha * sum_j active_j L_j."""
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    active = np.asarray(active, dtype=float)
    return np.eye(decomp.m) - alpha * decomp.weighted_laplacian(active)

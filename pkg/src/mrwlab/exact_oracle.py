"""Exact, simulation-free laws and moments of the walk at small scale.

The one-step law depends on the past only through (m, S_m), so the full
distribution of S_n follows from a forward dynamic program over (step,
count) states in O(n^2). The same collapse applies to the urn with the
draw-then-respond mixture written literally, giving an independent route to
what must be the identical law. Mean and raw moments follow O(n) recursions
and serve as oracles at horizons far beyond the DP bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core_process import ModelParams
from .martingale_sequences import build_sequences, sequence_checkpoints

__all__ = [
    "DP_BOUND",
    "ExactDistribution",
    "exact_distribution",
    "exact_urn_distribution",
    "total_variation",
    "urn_walk_equivalence_check",
    "exact_mean_recursion",
    "exact_mean_checkpoints",
    "moment_recursion",
    "conditional_moment_S",
    "conditional_moment_eps",
    "two_point_moment_S",
    "two_point_moment_eps",
    "exact_covariance_S",
]

# The DP touches ~n^2/2 states; 10^4 keeps it comfortably sub-second.
DP_BOUND = 10_000


@dataclass
class ExactDistribution:
    """The law of S_n: probs[j] = P(S_n = j) for j = 0..n."""

    n: int
    probs: np.ndarray

    def validate(self) -> None:
        if len(self.probs) != self.n + 1:
            raise AssertionError("probs must have length n+1")
        if np.any(self.probs < 0):
            raise AssertionError("probabilities must be nonnegative")
        if abs(float(self.probs.sum()) - 1.0) > 1e-12:
            raise AssertionError("probabilities must sum to 1 within 1e-12")

    def support(self) -> np.ndarray:
        return np.arange(self.n + 1, dtype=np.float64)

    def mean(self) -> float:
        return float(np.dot(self.support(), self.probs))

    def moment(self, order: int) -> float:
        return float(np.dot(self.support() ** order, self.probs))

    def variance(self) -> float:
        m = self.mean()
        return self.moment(2) - m * m

    def cdf(self) -> np.ndarray:
        return np.cumsum(self.probs)


def _forward_dp(s: float, n: int, step_prob) -> np.ndarray:
    """Run the (step, count) DP; step_prob(m, j) is the move-up probability."""
    probs = np.zeros(n + 1, dtype=np.float64)
    probs[0] = 1.0 - s
    if n >= 1:
        probs[1] = s
    for m in range(1, n):
        j = np.arange(m + 1, dtype=np.float64)
        up = step_prob(m, j)
        cur = probs[: m + 1]
        new = np.zeros(m + 2, dtype=np.float64)
        new[1:] += cur * up
        new[: m + 1] += cur * (1.0 - up)
        probs[: m + 2] = new
    return probs


def exact_distribution(params: ModelParams, n: int, dp_bound: int = DP_BOUND) -> ExactDistribution:
    """Exact law of S_n via the conditional one-step form q + alpha*j/m."""
    if not (1 <= n <= dp_bound):
        raise ValueError(f"n must lie in [1, {dp_bound}] for the exact DP")
    q, alpha = params.q, params.alpha

    def step_prob(m, j):
        return q + alpha * j / m

    return ExactDistribution(n=n, probs=_forward_dp(params.s, n, step_prob))


def exact_urn_distribution(params: ModelParams, n: int, dp_bound: int = DP_BOUND) -> ExactDistribution:
    """Exact law of the blue count via the urn's literal draw/respond mixture.

    The move-up probability is written as (j/m)*p + (1-j/m)*q: draw blue
    then add blue with probability p, or draw red then add blue with
    probability q. Deliberately not simplified, so this is an independent
    computation of the law that exact_distribution produces.
    """
    if not (1 <= n <= dp_bound):
        raise ValueError(f"n must lie in [1, {dp_bound}] for the exact DP")
    q, p = params.q, params.p

    def step_prob(m, j):
        frac_blue = j / m
        return frac_blue * p + (1.0 - frac_blue) * q

    return ExactDistribution(n=n, probs=_forward_dp(params.s, n, step_prob))


def total_variation(first: np.ndarray, second: np.ndarray) -> float:
    """TV distance between two pmfs on {0, 1, ...}; lengths may differ."""
    size = max(len(first), len(second))
    a = np.zeros(size)
    b = np.zeros(size)
    a[: len(first)] = first
    b[: len(second)] = second
    return 0.5 * float(np.abs(a - b).sum())


def urn_walk_equivalence_check(params: ModelParams, n: int) -> float:
    """TV distance between the urn blue-count law and the walk law at step n."""
    walk = exact_distribution(params, n)
    urn = exact_urn_distribution(params, n)
    return total_variation(walk.probs, urn.probs)


def exact_mean_recursion(params: ModelParams, n: int) -> np.ndarray:
    """E[S_m] for m = 1..n (index-aligned array of length n+1, entry 0 = 0).

    The defining recursion is E[S_1] = s, E[S_{m+1}] = q + gamma_m E[S_m]
    with gamma_m = (m+alpha)/m. It telescopes against the weight sequence to
    the closed form E[S_m] = (s - q + q A_m) / a_m, which is what is
    evaluated here (vectorized, and the recursion itself is asserted in the
    tests). Horizons above the materialization bound should use
    exact_mean_checkpoints.
    """
    cache = build_sequences(params, n)
    out = np.empty(n + 1, dtype=np.float64)
    out[0] = 0.0
    out[1:] = (params.s - params.q + params.q * cache.A[1:]) / cache.a[1:]
    return out


def exact_mean_checkpoints(params: ModelParams, checkpoints: Sequence[int]) -> np.ndarray:
    """E[S_m] at selected steps, streamed in constant memory (horizons to 10^8)."""
    seqs = sequence_checkpoints(params, checkpoints)
    return (params.s - params.q + params.q * seqs["A"]) / seqs["a"]


def moment_recursion(params: ModelParams, n: int, order: int) -> np.ndarray:
    """Raw moments E[S_m^j] for j = 0..order, m = 0..n; shape (order+1, n+1).

    One application of the conditional expansion (with X^k = X for binary
    steps) per step:

        E[S_{m+1}^j] = E[S_m^j] + q * sum_{i<j} C(j,i) E[S_m^i]
                                + (alpha/m) * sum_{i<j} C(j,i) E[S_m^{i+1}]
    """
    if order < 1:
        raise ValueError("order must be at least 1")
    if n < 1:
        raise ValueError("n must be at least 1")
    binom = np.zeros((order + 1, order + 1))
    for j in range(order + 1):
        for i in range(j + 1):
            binom[j, i] = math.comb(j, i)
    mom = np.zeros((order + 1, n + 1), dtype=np.float64)
    mom[0, :] = 1.0
    mom[1:, 1] = params.s
    q, alpha = params.q, params.alpha
    for m in range(1, n):
        prev = mom[:, m]
        cur = mom[:, m + 1]
        for j in range(order, 0, -1):
            c = binom[j, :j]
            cur[j] = prev[j] + q * float(c @ prev[:j]) + (alpha / m) * float(c @ prev[1 : j + 1])
    return mom


def _check_state(n: int, s_state: float) -> None:
    if n < 1:
        raise ValueError("n must be at least 1")
    if not (0 <= s_state <= n):
        raise ValueError(f"state {s_state} is not reachable at step {n}")


def _pi(params: ModelParams, n: int, s_state: float) -> float:
    return params.q + params.alpha * s_state / n


def conditional_moment_S(params: ModelParams, n: int, s_state: float, k: int) -> float:
    """E[S_{n+1}^(2k) | S_n = s_state] by the binomial-sum identity.

    Evaluates s^{2k} + pi * sum_{j=1..2k} C(2k,j) s^{2k-j} with
    pi = q + alpha*s/n; must agree with the direct two-point expectation.
    """
    _check_state(n, s_state)
    if k < 1:
        raise ValueError("moment order k must be at least 1")
    pi = _pi(params, n, s_state)
    tail = sum(math.comb(2 * k, j) * s_state ** (2 * k - j) for j in range(1, 2 * k + 1))
    return s_state ** (2 * k) + pi * tail


def conditional_moment_eps(params: ModelParams, n: int, s_state: float, k: int) -> float:
    """E[eps_{n+1}^k | S_n = s_state] for the centered step eps = X - pi.

    Evaluates sum_{j=0..k-2} C(k,j) pi^{j+1} (-1)^j + (-1)^{k-1} pi^k (k-1);
    must agree with pi(1-pi)^k + (1-pi)(-pi)^k.
    """
    _check_state(n, s_state)
    if k < 2:
        raise ValueError("eps moments are defined here for order k >= 2")
    pi = _pi(params, n, s_state)
    head = sum(math.comb(k, j) * pi ** (j + 1) * (-1) ** j for j in range(k - 1))
    return head + (-1) ** (k - 1) * pi**k * (k - 1)


def two_point_moment_S(params: ModelParams, n: int, s_state: float, k: int) -> float:
    """Direct two-point expectation of S_{n+1}^(2k) given S_n = s_state."""
    _check_state(n, s_state)
    pi = _pi(params, n, s_state)
    return pi * (s_state + 1.0) ** (2 * k) + (1.0 - pi) * s_state ** (2 * k)


def two_point_moment_eps(params: ModelParams, n: int, s_state: float, k: int) -> float:
    """Direct two-point expectation of eps_{n+1}^k given S_n = s_state."""
    _check_state(n, s_state)
    pi = _pi(params, n, s_state)
    return pi * (1.0 - pi) ** k + (1.0 - pi) * (-pi) ** k


def exact_covariance_S(params: ModelParams, m: int, big_m: int) -> float:
    """Exact Cov(S_m, S_M) for m <= M.

    Conditioning on step m gives E[S_M | F_m] = (a_m/a_M) S_m + const, so
    the covariance is (a_m/a_M) Var(S_m), with Var(S_m) from the moment
    recursion.
    """
    if not (1 <= m <= big_m):
        raise ValueError("need 1 <= m <= M")
    mom = moment_recursion(params, m, 2)
    var_m = mom[2, m] - mom[1, m] ** 2
    cache = build_sequences(params, big_m)
    return float(cache.a[m] / cache.a[big_m] * var_m)

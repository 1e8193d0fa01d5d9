"""Closed-form convergence bound for over-the-air federated averaging.

The expected squared distance to the optimum obeys a linear recursion
e(t+1) <= A(t) e(t) + B(t) whose coefficients depend on the task
constants (mu, smoothness, gradient bound, heterogeneity), the local
step count and schedules, and four network constants derived from the
covariances and serving clusters: worst-pair true-channel leakage
(gamma), worst-pair estimation-error leakage (gamma_tilde), and the
two noise-amplification averages (kappa, kappa_tilde).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BoundConstants:
    gamma: float
    gamma_tilde: float
    kappa: float
    kappa_tilde: float


@dataclass(frozen=True)
class BoundInputs:
    """Task, schedule and channel scalars entering the recursion.

    ``eta`` and ``alpha`` may be scalars (constant schedules) or
    sequences indexed by round.
    """

    dim: int
    num_clients: int
    mu: float
    smoothness: float
    grad_bound: float
    heterogeneity: float
    local_steps: int
    eta: float | np.ndarray
    alpha: float | np.ndarray
    noise_std: float

    def __post_init__(self):
        if self.mu <= 0 or self.smoothness < self.mu:
            raise ValueError("need 0 < mu <= smoothness")
        if self.local_steps < 1:
            raise ValueError("local_steps must be >= 1")
        if self.grad_bound < 0 or self.heterogeneity < 0 or self.noise_std < 0:
            raise ValueError("grad_bound, heterogeneity, noise_std must be >= 0")

    def eta_at(self, t):
        return _schedule_value(self.eta, t)

    def alpha_at(self, t):
        return _schedule_value(self.alpha, t)


def _schedule_value(sched, t):
    if np.ndim(sched) == 0:
        return float(sched)
    return float(np.asarray(sched)[t])


def compute_constants(correlations, assoc):
    """Leakage and noise constants from covariances and clusters.

    gamma       = max_{n,n'} (1/c_n^2) sum_{l in K_n} tr(R_{n,l} R_{n',l})
    gamma_tilde = max_{n,n'} (1/c_n^2) sum_{l in K_n} tr(C_{n,l} R_{n',l})
    kappa       = (1/N) sum_n 1/c_n
    kappa_tilde = (1/N) sum_n (sum_{l in K_n} tr C_{n,l}) / c_n^2

    The maxima include n' = n.  All traces are real for Hermitian PSD
    factors; block masking reduces the collective-matrix traces to sums
    over serving links.
    """
    r, c = correlations.R, correlations.C
    mask = assoc.mask.astype(np.float64)
    inv_c = 1.0 / assoc.c

    rr = np.einsum("nlij,plji,nl->np", r, r, mask).real
    cr = np.einsum("nlij,plji,nl->np", c, r, mask).real
    gamma = float(np.max(rr * inv_c[:, None] ** 2))
    gamma_tilde = float(np.max(cr * inv_c[:, None] ** 2))

    trace_c = np.trace(c, axis1=-2, axis2=-1).real  # (N, L)
    kappa = float(np.mean(inv_c))
    kappa_tilde = float(np.mean((trace_c * mask).sum(axis=1) * inv_c**2))
    return BoundConstants(
        gamma=gamma, gamma_tilde=gamma_tilde, kappa=kappa, kappa_tilde=kappa_tilde
    )


def a_coeff(eta, mu, local_steps):
    """Per-round contraction factor 1 - mu eta (tau - eta (tau - 1))."""
    tau = local_steps
    return 1.0 - mu * eta * (tau - eta * (tau - 1))


def b_coeff(inputs, constants, t):
    """Per-round offset: drift, leakage and noise contributions."""
    eta = inputs.eta_at(t)
    alpha = inputs.alpha_at(t)
    tau = inputs.local_steps
    g2 = inputs.grad_bound**2
    n = inputs.num_clients
    leak = (
        2.0 / n
        + (constants.gamma_tilde + constants.gamma) / (2.0 * n)
        - constants.gamma / (2.0 * n**2)
    )
    drift = 2.0 * eta * (tau - 1) * inputs.heterogeneity
    curv = (
        (1.0 + inputs.mu * (1.0 - eta))
        * eta**2
        * g2
        * tau
        * (tau - 1)
        * (2 * tau - 1)
        / 6.0
    )
    local = eta**2 * (tau**2 + tau - 1) * g2
    ota = leak * eta**2 * tau**2 * g2
    noise = (
        inputs.dim
        * (constants.kappa + constants.kappa_tilde)
        * inputs.noise_std**2
        / (2.0 * n * alpha**2)
    )
    return drift + curv + local + ota + noise


def bound_trajectory(inputs, constants, rounds, initial_dist_sq):
    """Iterate e(t+1) = A(t) e(t) + B(t); returns e(0..rounds)."""
    e = np.empty(rounds + 1)
    e[0] = initial_dist_sq
    for t in range(rounds):
        a = a_coeff(inputs.eta_at(t), inputs.mu, inputs.local_steps)
        e[t + 1] = a * e[t] + b_coeff(inputs, constants, t)
    return e


def bound_trajectory_direct(inputs, constants, rounds, initial_dist_sq):
    """Unrolled product form of the same recursion (cross-check path)."""
    a = np.array(
        [
            a_coeff(inputs.eta_at(t), inputs.mu, inputs.local_steps)
            for t in range(rounds)
        ]
    )
    b = np.array([b_coeff(inputs, constants, t) for t in range(rounds)])
    e = np.empty(rounds + 1)
    for t in range(rounds + 1):
        prod = float(np.prod(a[:t]))
        tail = 0.0
        for s in range(t):
            tail += b[s] * float(np.prod(a[s + 1 : t]))
        e[t] = initial_dist_sq * prod + tail
    return e


def loss_gap_bound(dist_sq_bound, smoothness):
    """Loss-gap bound (smoothness/2) * distance bound, elementwise."""
    return 0.5 * smoothness * np.asarray(dist_sq_bound)


def plateau_limit(inputs, constants):
    """Asymptotic distance plateau for tau = 1, constant eta and alpha.

    Equals (1/(mu eta)) [ eta^2 G^2 (1 + leakage factor) + noise term ],
    which is exactly the fixed point B / (1 - A) of the recursion.
    """
    if inputs.local_steps != 1:
        raise ValueError("plateau limit assumes a single local step")
    if np.ndim(inputs.eta) != 0 or np.ndim(inputs.alpha) != 0:
        raise ValueError("plateau limit assumes constant schedules")
    eta = float(inputs.eta)
    b = b_coeff(inputs, constants, 0)
    return b / (inputs.mu * eta)


def admissible_eta(mu, local_steps):
    """Largest step size the recursion analysis admits."""
    return min(1.0, 1.0 / (mu * local_steps))


def check_step_size(eta, mu, local_steps):
    """Raise when any scheduled step exceeds the admissible range."""
    arr = np.atleast_1d(np.asarray(eta, dtype=np.float64))
    limit = admissible_eta(mu, local_steps)
    if np.any(arr <= 0) or np.any(arr > limit):
        raise ValueError(
            f"step size must lie in (0, {limit:.6g}] for mu={mu:.6g}, "
            f"tau={local_steps}"
        )

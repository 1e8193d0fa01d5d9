"""Federated objectives with known constants.

Both task families expose the same surface to the training loop and
the bound machinery: per-client stochastic gradients, the global loss,
strong-convexity and smoothness constants, a gradient-norm envelope
valid on a stated region, and the heterogeneity gap
F(theta*) - (1/N) sum_n min F_n.
"""

from __future__ import annotations

import numpy as np


class QuadraticTask:
    """Per-client quadratics around anchor points, diagonal curvature.

    Client n holds anchors b_{n,j} and positive curvature weights
    q_n (one per coordinate); its loss is the anchor-averaged quadratic
    0.5 (theta - b)^T diag(q_n) (theta - b).  Everything of interest
    has a closed form, which makes this the reference task for
    validating the convergence bound.
    """

    def __init__(self, anchors, curvatures):
        anchors = np.asarray(anchors, dtype=np.float64)
        curvatures = np.asarray(curvatures, dtype=np.float64)
        if anchors.ndim != 3:
            raise ValueError("anchors must be (clients, anchors, dim)")
        if curvatures.shape != (anchors.shape[0], anchors.shape[2]):
            raise ValueError("curvatures must be (clients, dim)")
        if np.any(curvatures <= 0):
            raise ValueError("curvatures must be positive")
        self.anchors = anchors
        self.curvatures = curvatures
        self.num_clients, self.anchors_per_client, self.dim = anchors.shape

        self.centers = anchors.mean(axis=1)  # (N, d)
        total_curv = curvatures.sum(axis=0)
        self.theta_star = (curvatures * self.centers).sum(axis=0) / total_curv
        self.mu = float(curvatures.min())
        self.smoothness = float(curvatures.max())
        # Residual loss at each client's own optimum (anchor scatter).
        diff = anchors - self.centers[:, None, :]
        self._local_min = 0.5 * np.mean(
            (diff**2 * curvatures[:, None, :]).sum(axis=2), axis=1
        )
        self._anchor_radius = float(
            np.sqrt((diff**2).sum(axis=2)).max(initial=0.0)
        )
        self.heterogeneity = float(
            self.loss(self.theta_star) - self._local_min.mean()
        )

    @classmethod
    def synthetic(cls, dim, num_clients, gen, *, center_scale=1.0,
                  anchor_spread=0.5, anchors_per_client=16,
                  curvature_range=(0.5, 1.5)):
        """Random instance: client centers of scale ``center_scale``."""
        centers = center_scale * gen.standard_normal((num_clients, dim))
        anchors = centers[:, None, :] + anchor_spread * gen.standard_normal(
            (num_clients, anchors_per_client, dim)
        )
        lo, hi = curvature_range
        curv = gen.uniform(lo, hi, size=(num_clients, dim))
        return cls(anchors=anchors, curvatures=curv)

    def local_loss(self, client, theta):
        diff = theta[None, :] - self.anchors[client]
        return 0.5 * float(
            np.mean((diff**2 * self.curvatures[client]).sum(axis=1))
        )

    def loss(self, theta):
        theta = np.asarray(theta, dtype=np.float64)
        diff = theta[None, None, :] - self.anchors
        per_client = 0.5 * np.mean(
            (diff**2 * self.curvatures[:, None, :]).sum(axis=2), axis=1
        )
        return float(per_client.mean())

    def full_gradient(self, client, theta):
        return self.curvatures[client] * (theta - self.centers[client])

    def stochastic_gradient(self, client, theta, gen, batch_size):
        idx = gen.integers(0, self.anchors_per_client, size=batch_size)
        target = self.anchors[client, idx].mean(axis=0)
        return self.curvatures[client] * (theta - target)

    def grad_bound(self, radius):
        """Envelope on ||stochastic gradient|| within ``radius`` of the
        optimum: smoothness * (radius + center offset + anchor scatter).
        """
        offset = float(
            np.linalg.norm(self.centers - self.theta_star, axis=1).max()
        )
        return self.smoothness * (radius + offset + self._anchor_radius)

    def test_accuracy(self, theta):
        return None


def _sigmoid(u):
    return 0.5 * (1.0 + np.tanh(0.5 * u))


class LogisticTask:
    """L2-regularized binary logistic regression over client shards."""

    def __init__(self, features, labels, lam, holdout=None):
        # features: list of (m_n, d); labels: list of (m_n,) in {-1, +1}
        self.features = [np.asarray(x, dtype=np.float64) for x in features]
        self.labels = [np.asarray(y, dtype=np.float64) for y in labels]
        if lam <= 0:
            raise ValueError("lam must be positive for strong convexity")
        self.lam = float(lam)
        self.num_clients = len(self.features)
        self.dim = self.features[0].shape[1]
        self.holdout = holdout  # (X, y) or None
        self.mu = self.lam
        smooth = 0.0
        for x in self.features:
            gram = x.T @ x / (4.0 * x.shape[0])
            smooth = max(smooth, float(np.linalg.eigvalsh(gram)[-1]))
        self.smoothness = self.lam + smooth
        self._theta_star = None
        self._heterogeneity = None

    @classmethod
    def synthetic(cls, dim, num_clients, samples_per_client, gen, *,
                  lam=0.1, class_sep=2.0, split="iid", holdout=200):
        """Two Gaussian blobs at +-class_sep/2 along a random direction."""
        from .fl import split_data

        total = num_clients * samples_per_client
        direction = gen.standard_normal(dim)
        direction /= np.linalg.norm(direction)
        y = np.where(gen.uniform(size=total + holdout) < 0.5, -1.0, 1.0)
        x = gen.standard_normal((total + holdout, dim))
        x += np.outer(y * class_sep / 2.0, direction)
        x_test, y_test = x[total:], y[total:]
        x, y = x[:total], y[:total]
        shards = split_data((y > 0).astype(int), num_clients, split, gen)
        feats = [x[idx] for idx in shards]
        labs = [y[idx] for idx in shards]
        return cls(feats, labs, lam, holdout=(x_test, y_test))

    def _client_loss(self, client, theta):
        margins = self.labels[client] * (self.features[client] @ theta)
        return float(
            np.mean(np.logaddexp(0.0, -margins))
            + 0.5 * self.lam * theta @ theta
        )

    def local_loss(self, client, theta):
        return self._client_loss(client, np.asarray(theta, dtype=np.float64))

    def loss(self, theta):
        theta = np.asarray(theta, dtype=np.float64)
        return float(
            np.mean([self._client_loss(n, theta) for n in range(self.num_clients)])
        )

    def _grad(self, x, y, theta):
        margins = y * (x @ theta)
        coef = -y * _sigmoid(-margins)
        return x.T @ coef / x.shape[0] + self.lam * theta

    def full_gradient(self, client, theta):
        return self._grad(self.features[client], self.labels[client], theta)

    def stochastic_gradient(self, client, theta, gen, batch_size):
        m = self.features[client].shape[0]
        idx = gen.integers(0, m, size=batch_size)
        return self._grad(
            self.features[client][idx], self.labels[client][idx], theta
        )

    def _global_gradient(self, theta):
        grads = [self.full_gradient(n, theta) for n in range(self.num_clients)]
        return np.mean(grads, axis=0)

    @property
    def theta_star(self):
        if self._theta_star is None:
            self._theta_star = self._solve(self.loss, self._global_gradient)
        return self._theta_star

    def _solve(self, fun, jac):
        from scipy.optimize import minimize

        res = minimize(
            fun,
            np.zeros(self.dim),
            jac=jac,
            method="L-BFGS-B",
            options={"maxiter": 2000, "ftol": 1e-15, "gtol": 1e-12},
        )
        return res.x

    @property
    def heterogeneity(self):
        if self._heterogeneity is None:
            mins = [
                self._client_loss(
                    n,
                    self._solve(
                        lambda th, n=n: self._client_loss(n, th),
                        lambda th, n=n: self.full_gradient(n, th),
                    ),
                )
                for n in range(self.num_clients)
            ]
            self._heterogeneity = max(
                0.0, self.loss(self.theta_star) - float(np.mean(mins))
            )
        return self._heterogeneity

    def grad_bound(self, radius):
        """Envelope max_j ||x_j|| + lam (||theta*|| + radius); the data
        term holds for any minibatch because |sigmoid| <= 1, |y| = 1."""
        row_max = max(
            float(np.linalg.norm(x, axis=1).max()) for x in self.features
        )
        return row_max + self.lam * (
            float(np.linalg.norm(self.theta_star)) + radius
        )

    def test_accuracy(self, theta):
        if self.holdout is None:
            return None
        x, y = self.holdout
        return float(np.mean(np.sign(x @ theta) == np.sign(y)))

"""Stochastic objectives F(x) = (1/m) sum_i F_i(x) for the simulator.

All gradient routines are batched over workers: ``X`` has one row per worker
and the result has the same shape.
"""
from __future__ import annotations

import numpy as np


class Objective:
    """Interface shared by every objective.

    Subclasses set ``num_workers`` and ``dim`` and implement
    :meth:`local_gradients`, :meth:`loss` and :meth:`gradient`.  The
    constants ``lipschitz``, ``sigma2``, ``zeta2`` and ``f_inf`` are ``None``
    when not known analytically.
    """

    num_workers: int
    dim: int
    lipschitz: float | None = None
    sigma2: float | None = None
    zeta2: float | None = None
    f_inf: float | None = None

    def local_gradients(self, X) -> np.ndarray:
        raise NotImplementedError

    def stochastic_gradients(self, X, rng: np.random.Generator) -> np.ndarray:
        """Exact local gradients plus isotropic Gaussian noise with E||noise||^2 = sigma2."""
        G = self.local_gradients(X)
        if self.sigma2:
            G = G + np.sqrt(self.sigma2 / self.dim) * rng.standard_normal(G.shape)
        return G

    def loss(self, x) -> float:
        raise NotImplementedError

    def gradient(self, x) -> np.ndarray:
        raise NotImplementedError


class ZeroObjective(Objective):
    """F_i = 0: the simulator reduces to pure gossip averaging."""

    def __init__(self, num_workers: int, dim: int):
        self.num_workers = num_workers
        self.dim = dim
        self.lipschitz = 0.0
        self.sigma2 = 0.0
        self.zeta2 = 0.0
        self.f_inf = 0.0

    def local_gradients(self, X):
        return np.zeros_like(np.asarray(X, dtype=float))

    def loss(self, x):
        return 0.0

    def gradient(self, x):
        return np.zeros(self.dim)


class QuadraticObjective(Objective):
    """F_i(x) = 1/2 ||A_i x - b_i||^2.

    ``generate`` builds A_i = diag(sqrt(eig_i)) Q^T with a shared rotation Q.
    The base spectrum is spread linearly over [mu, L]; with
    ``hessian_spread = s > 0`` each worker scales it by independent factors
    drawn from [1 - s, 1].  The b_i are solved for so that the local
    gradients at x = 0 have mean-square deviation exactly zeta^2.

    When all Hessians coincide, grad F_i - grad F does not depend on x, so
    ``zeta2`` is a global bound; otherwise ``zeta2`` is ``None`` and only
    ``zeta2_at_zero`` is meaningful.
    """

    def __init__(self, A, b, sigma: float = 0.0):
        A = np.asarray(A, dtype=float)
        self.b = np.atleast_2d(np.asarray(b, dtype=float))
        self.num_workers = self.b.shape[0]
        self.A = np.broadcast_to(A, (self.num_workers,) + A.shape[-2:]).copy()
        self.dim = self.A.shape[2]
        self.hessians = np.einsum("mki,mkj->mij", self.A, self.A)
        self.mean_hessian = self.hessians.mean(axis=0)
        self.Atb = np.einsum("mki,mk->mi", self.A, self.b)  # row i is A_i^T b_i
        self.lipschitz = float(max(np.linalg.eigvalsh(h)[-1] for h in self.hessians))
        self.sigma2 = float(sigma) ** 2
        dev = self.Atb - self.Atb.mean(axis=0)
        self.zeta2_at_zero = float(np.mean(np.sum(dev * dev, axis=1)))
        shared = np.allclose(self.hessians, self.hessians[0], rtol=0.0, atol=1e-12)
        self.zeta2 = self.zeta2_at_zero if shared else None
        self.x_star = np.linalg.solve(self.mean_hessian, self.Atb.mean(axis=0))
        self.f_inf = self.loss(self.x_star)

    @classmethod
    def generate(cls, num_workers, dim, lipschitz=1.0, mu=0.1, sigma=0.0, zeta=0.0,
                 hessian_spread=0.0, seed=0):
        if not 0 < mu <= lipschitz:
            raise ValueError("need 0 < mu <= lipschitz")
        if not 0.0 <= hessian_spread < 1.0:
            raise ValueError("hessian_spread must lie in [0, 1)")
        rng = np.random.default_rng(seed)
        q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
        base = np.linspace(mu, lipschitz, dim) if dim > 1 else np.array([lipschitz])
        factors = 1.0 - hessian_spread * rng.random((num_workers, dim))
        eig = base[None, :] * factors
        A = np.sqrt(eig)[:, :, None] * q.T[None, :, :]
        h_mean = rng.standard_normal(dim)
        offsets = rng.standard_normal((num_workers, dim))
        offsets -= offsets.mean(axis=0)
        spread = np.mean(np.sum(offsets * offsets, axis=1))
        if zeta > 0 and spread == 0:
            raise ValueError("zeta > 0 needs at least two workers")
        offsets *= (zeta / np.sqrt(spread)) if zeta > 0 else 0.0
        targets = h_mean[None, :] + offsets  # desired A_i^T b_i
        b = np.stack([np.linalg.solve(A[i].T, targets[i]) for i in range(num_workers)])
        return cls(A, b, sigma=sigma)

    def local_gradients(self, X):
        return np.einsum("mij,mj->mi", self.hessians, np.asarray(X, dtype=float)) - self.Atb

    def local_losses(self, X):
        R = np.einsum("mki,mi->mk", self.A, np.asarray(X, dtype=float)) - self.b
        return 0.5 * np.sum(R * R, axis=1)

    def loss(self, x):
        r = self.A @ np.asarray(x, dtype=float) - self.b
        return float(0.5 * np.mean(np.sum(r * r, axis=1)))

    def gradient(self, x):
        return self.mean_hessian @ np.asarray(x, dtype=float) - self.Atb.mean(axis=0)


class LogisticObjective(Objective):
    """L2-regularised binary logistic regression on Gaussian blobs.

    Worker i holds ``samples_per_worker`` points whose positive-label share
    moves linearly from ``(1 - skew) / 2`` on worker 0 to ``(1 + skew) / 2``
    on the last worker; ``skew = 0`` is IID and ``skew = 1`` gives single-label
    workers.  Stochastic gradients use minibatches drawn with replacement.
    """

    def __init__(self, features, labels, batch_size: int = 8, reg: float = 1e-3):
        self.features = np.asarray(features, dtype=float)  # (m, n, d)
        self.labels = np.asarray(labels, dtype=float)  # (m, n), entries +-1
        self.num_workers, self.n, self.dim = self.features.shape
        self.batch_size = batch_size
        self.reg = reg
        per_worker = [
            np.linalg.eigvalsh(f.T @ f / self.n)[-1] / 4.0 + reg for f in self.features
        ]
        self.lipschitz = float(max(per_worker))

    @classmethod
    def generate(cls, num_workers, dim, samples_per_worker=64, skew=0.5, separation=1.0,
                 batch_size=8, reg=1e-3, seed=0):
        rng = np.random.default_rng(seed)
        centre = rng.standard_normal(dim)
        centre *= separation / np.linalg.norm(centre)
        feats = np.empty((num_workers, samples_per_worker, dim))
        labels = np.empty((num_workers, samples_per_worker))
        for i in range(num_workers):
            frac = 0.5 + skew * ((i / (num_workers - 1)) - 0.5 if num_workers > 1 else 0.0)
            pos = int(round(frac * samples_per_worker))
            y = np.concatenate([np.ones(pos), -np.ones(samples_per_worker - pos)])
            feats[i] = y[:, None] * centre + rng.standard_normal((samples_per_worker, dim))
            labels[i] = y
        return cls(feats, labels, batch_size=batch_size, reg=reg)

    @staticmethod
    def _grad(X, feats, labels, reg):
        # X (m, d), feats (m, n, d), labels (m, n)
        margins = labels * np.einsum("mnd,md->mn", feats, X)
        coef = -labels / (1.0 + np.exp(margins))
        return np.einsum("mn,mnd->md", coef, feats) / feats.shape[1] + reg * X

    def local_gradients(self, X):
        return self._grad(np.asarray(X, dtype=float), self.features, self.labels, self.reg)

    def stochastic_gradients(self, X, rng):
        idx = rng.integers(0, self.n, size=(self.num_workers, self.batch_size))
        rows = np.arange(self.num_workers)[:, None]
        return self._grad(np.asarray(X, dtype=float), self.features[rows, idx],
                          self.labels[rows, idx], self.reg)

    def loss(self, x):
        margins = self.labels * (self.features @ np.asarray(x, dtype=float))
        return float(np.mean(np.logaddexp(0.0, -margins)) + 0.5 * self.reg * np.dot(x, x))

    def gradient(self, x):
        X = np.tile(np.asarray(x, dtype=float), (self.num_workers, 1))
        return self.local_gradients(X).mean(axis=0)


def make_objective(spec: dict, num_workers: int) -> Objective:
    """Build an objective from a config mapping with a ``kind`` key."""
    spec = dict(spec)
    kind = spec.pop("kind", "quadratic")
    if kind == "quadratic":
        return QuadraticObjective.generate(num_workers, **spec)
    if kind == "logistic":
        return LogisticObjective.generate(num_workers, **spec)
    if kind == "zero":
        return ZeroObjective(num_workers, spec.get("dim", 1))
    raise ValueError(f"unknown objective kind {kind!r}")

"""Covariance matrix adaptation evolution strategy, maximization convention.

A compact self-contained implementation of the standard algorithm: weighted
recombination of the best half of the population, cumulative step-size
adaptation, and rank-one plus rank-mu covariance updates.  The covariance is
kept symmetric positive definite by symmetrizing and clamping eigenvalues
after every update.
"""

from __future__ import annotations

import math
import warnings

import numpy as np

EIGENVALUE_FLOOR = 1e-20


class CmaEs:
    """Distribution state and update rules; `ask` samples, `tell` adapts.

    Fitness values are maximized.  Strategy constants follow the standard
    defaults for the given dimension and population size.
    """

    def __init__(self, x0: np.ndarray, sigma0: float, population: int):
        x0 = np.asarray(x0, dtype=np.float64)
        if x0.ndim != 1:
            raise ValueError("x0 must be a vector")
        if sigma0 <= 0:
            raise ValueError("sigma0 must be positive")
        if population < 4:
            raise ValueError("population must be at least 4")
        n = x0.size
        self.dim = n
        self.lam = int(population)
        self.mu = self.lam // 2

        w = np.log(self.lam / 2 + 0.5) - np.log(np.arange(1, self.mu + 1))
        self.weights = w / w.sum()
        self.mu_eff = 1.0 / np.sum(self.weights**2)

        self.c_sigma = (self.mu_eff + 2) / (n + self.mu_eff + 5)
        self.d_sigma = (1 + 2 * max(0.0, math.sqrt((self.mu_eff - 1) / (n + 1)) - 1)
                        + self.c_sigma)
        self.c_c = (4 + self.mu_eff / n) / (n + 4 + 2 * self.mu_eff / n)
        self.c_1 = 2 / ((n + 1.3) ** 2 + self.mu_eff)
        self.c_mu = min(1 - self.c_1,
                        2 * (self.mu_eff - 2 + 1 / self.mu_eff) / ((n + 2) ** 2 + self.mu_eff))
        self.chi_n = math.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n * n))

        self.mean = x0.copy()
        self.sigma = float(sigma0)
        self.cov = np.eye(n)
        self.p_sigma = np.zeros(n)
        self.p_c = np.zeros(n)
        self.generation = 0
        self._decompose()

    # -- internals -----------------------------------------------------------

    def _decompose(self) -> None:
        self.cov = (self.cov + self.cov.T) / 2.0
        eigvals, eigvecs = np.linalg.eigh(self.cov)
        if eigvals[0] < EIGENVALUE_FLOOR:  # repair: clamp and rebuild
            eigvals = np.maximum(eigvals, EIGENVALUE_FLOOR)
            self.cov = (eigvecs * eigvals) @ eigvecs.T
            self.cov = (self.cov + self.cov.T) / 2.0
        self._eigvals = eigvals
        self._eigvecs = eigvecs
        self._sqrt_vals = np.sqrt(eigvals)

    def _cov_invsqrt_dot(self, v: np.ndarray) -> np.ndarray:
        return self._eigvecs @ ((self._eigvecs.T @ v) / self._sqrt_vals)

    # -- public interface ------------------------------------------------------

    def ask(self, rng: np.random.Generator) -> np.ndarray:
        """Sample lam candidates from N(mean, sigma^2 C); shape (lam, dim)."""
        z = rng.standard_normal((self.lam, self.dim))
        y = (z * self._sqrt_vals) @ self._eigvecs.T
        return self.mean + self.sigma * y

    def tell(self, candidates: np.ndarray, fitnesses) -> None:
        """Update mean, evolution paths, covariance, and step size."""
        candidates = np.asarray(candidates, dtype=np.float64)
        fitnesses = np.asarray(fitnesses, dtype=np.float64)
        if candidates.shape != (self.lam, self.dim) or fitnesses.shape != (self.lam,):
            raise ValueError("need lam candidates with one fitness each")
        if not np.all(np.isfinite(fitnesses)):
            warnings.warn("non-finite fitness values ranked last", RuntimeWarning,
                          stacklevel=2)
            fitnesses = np.where(np.isfinite(fitnesses), fitnesses, -np.inf)

        order = np.argsort(-fitnesses, kind="stable")
        selected = candidates[order[:self.mu]]

        mean_old = self.mean
        self.mean = self.weights @ selected
        y_mean = (self.mean - mean_old) / self.sigma

        self.p_sigma = ((1 - self.c_sigma) * self.p_sigma
                        + math.sqrt(self.c_sigma * (2 - self.c_sigma) * self.mu_eff)
                        * self._cov_invsqrt_dot(y_mean))
        ps_norm = float(np.linalg.norm(self.p_sigma))
        self.generation += 1
        expected = math.sqrt(1 - (1 - self.c_sigma) ** (2 * self.generation))
        h_sigma = 1.0 if ps_norm / expected / self.chi_n < 1.4 + 2 / (self.dim + 1) else 0.0

        self.p_c = ((1 - self.c_c) * self.p_c
                    + h_sigma * math.sqrt(self.c_c * (2 - self.c_c) * self.mu_eff) * y_mean)

        y_sel = (selected - mean_old) / self.sigma
        rank_mu = (y_sel.T * self.weights) @ y_sel
        c1_adjust = (1 - h_sigma) * self.c_c * (2 - self.c_c)
        self.cov = ((1 - self.c_1 - self.c_mu) * self.cov
                    + self.c_1 * (np.outer(self.p_c, self.p_c) + c1_adjust * self.cov)
                    + self.c_mu * rank_mu)

        self.sigma *= math.exp((self.c_sigma / self.d_sigma)
                               * (ps_norm / self.chi_n - 1))
        self._decompose()

    # -- serialization ---------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "population": self.lam,
            "generation": self.generation,
            "mean": self.mean.tolist(),
            "sigma": self.sigma,
            "cov": self.cov.tolist(),
            "p_sigma": self.p_sigma.tolist(),
            "p_c": self.p_c.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CmaEs":
        es = cls(np.array(d["mean"], dtype=np.float64), float(d["sigma"]),
                 int(d["population"]))
        es.generation = int(d["generation"])
        es.cov = np.array(d["cov"], dtype=np.float64)
        es.p_sigma = np.array(d["p_sigma"], dtype=np.float64)
        es.p_c = np.array(d["p_c"], dtype=np.float64)
        es._decompose()
        return es

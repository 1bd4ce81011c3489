"""Unnormalized log-posterior over pressure knot vectors.

Uniform box prior, independent Gaussian errors on the convergence readings
and, when present, on the hoop-force reading. Out-of-box vectors get the
``-inf`` sentinel from the prior and never reach the forward model.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .response import ObservationSet, ResponseOperator, baselines_at

__all__ = [
    "PriorSpec",
    "LikelihoodSpec",
    "LogPosterior",
    "log_prior",
    "log_likelihood",
    "log_posterior",
]

_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class PriorSpec:
    """Independent Uniform(q_min, q_max) on each of n knots (kPa)."""

    q_min: float
    q_max: float
    n: int

    def __post_init__(self):
        if not self.q_min < self.q_max:
            raise ValueError("q_min must be below q_max")
        if self.n < 1:
            raise ValueError("dimension must be positive")

    @property
    def log_density(self) -> float:
        return -self.n * np.log(self.q_max - self.q_min)

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.q_min + self.q_max)

    def contains(self, q) -> np.ndarray:
        q = np.asarray(q)
        return np.all((q >= self.q_min) & (q <= self.q_max), axis=-1)

    def sample(self, rng: np.random.Generator, size=None) -> np.ndarray:
        shape = (self.n,) if size is None else (size, self.n)
        return rng.uniform(self.q_min, self.q_max, size=shape)


@dataclass(frozen=True, eq=False)
class LikelihoodSpec:
    """Gaussian likelihood of an observation set under a linear forward model.

    Parameters
    ----------
    observations : ObservationSet
        Readings on baselines of ``operator.mesh``.
    operator : ResponseOperator
        Forward model for the knot dimension being sampled.
    sigma : float, optional
        Convergence error std (mm); defaults to ``observations.sigma``.
    force_sigma : float, optional
        Force error std (kN); defaults to ``observations.force_sigma``.
    use_force : bool
        Include the force reading when the set has one.
    """

    observations: ObservationSet
    operator: ResponseOperator
    sigma: float | None = None
    force_sigma: float | None = None
    use_force: bool = True
    G: np.ndarray = field(init=False, repr=False)
    h: np.ndarray | None = field(init=False, repr=False)

    def __post_init__(self):
        obs = self.observations
        sigma = obs.sigma if self.sigma is None else self.sigma
        if not sigma > 0:
            raise ValueError("sigma must be positive")
        object.__setattr__(self, "sigma", float(sigma))
        baselines = baselines_at(self.operator.mesh, obs.angles)
        object.__setattr__(self, "G", self.operator.convergence_matrix(baselines))
        h = None
        if self.use_force and obs.has_force:
            fs = obs.force_sigma if self.force_sigma is None else self.force_sigma
            if not fs > 0:
                raise ValueError("force_sigma must be positive")
            object.__setattr__(self, "force_sigma", float(fs))
            h = self.operator.hoop_row(obs.force_angle)
        object.__setattr__(self, "h", h)

    @property
    def n(self) -> int:
        return self.operator.n_knots

    @property
    def has_force(self) -> bool:
        return self.h is not None

    def predict(self, q):
        """Predicted convergence (mm) and, if used, hoop force (kN)."""
        q = np.asarray(q, dtype=float)
        d = q @ self.G.T
        N = q @ self.h if self.h is not None else None
        return d, N

    def max_log_likelihood(self) -> float:
        """Value reached when every residual is zero."""
        out = -0.5 * self.G.shape[0] * (_LOG_2PI + 2 * np.log(self.sigma))
        if self.has_force:
            out -= 0.5 * (_LOG_2PI + 2 * np.log(self.force_sigma))
        return float(out)

    def __call__(self, q):
        q = np.asarray(q, dtype=float)
        d, N = self.predict(q)
        e = self.observations.readings - d
        out = self.max_log_likelihood() - 0.5 * np.sum(e * e, axis=-1) / self.sigma**2
        if N is not None:
            out = out - 0.5 * ((N - self.observations.force) / self.force_sigma) ** 2
        return out


def log_prior(q, prior: PriorSpec):
    """Log density of the box prior; ``-inf`` outside. Accepts (n,) or (m, n)."""
    q = np.asarray(q, dtype=float)
    if q.shape[-1] != prior.n:
        raise ValueError(f"expected {prior.n} knots, got {q.shape[-1]}")
    inside = prior.contains(q)
    out = np.where(inside, prior.log_density, -np.inf)
    return float(out) if out.ndim == 0 else out


def log_likelihood(q, spec: LikelihoodSpec):
    """Gaussian log-likelihood of the observations given knots `q`."""
    q = np.asarray(q, dtype=float)
    if q.shape[-1] != spec.n:
        raise ValueError(f"expected {spec.n} knots, got {q.shape[-1]}")
    out = spec(q)
    return float(out) if np.ndim(out) == 0 else out


def log_posterior(q, prior: PriorSpec, spec: LikelihoodSpec | None):
    """Unnormalized log-posterior; the likelihood is skipped outside the box.

    ``spec=None`` gives the prior alone.
    """
    q = np.asarray(q, dtype=float)
    lp = np.asarray(log_prior(q, prior), dtype=float)
    if spec is None:
        return float(lp) if lp.ndim == 0 else lp
    if lp.ndim == 0:
        return float(lp) if lp == -np.inf else float(lp + spec(q))
    out = np.full(lp.shape, -np.inf)
    ok = np.isfinite(lp)
    if ok.any():
        out[ok] = lp[ok] + spec(q[ok])
    return out


@dataclass(frozen=True)
class LogPosterior:
    """Callable ``q -> log_posterior(q, prior, likelihood)`` for the sampler."""

    prior: PriorSpec
    likelihood: LikelihoodSpec | None = None

    def __call__(self, q):
        return log_posterior(q, self.prior, self.likelihood)

"""Differential Evolution Markov Chain sampler with Gelman-Rubin monitoring.

Each of T chains proposes ``x_i + lam * (x_a - x_b) + jitter`` using two other
chains a != b and accepts by the Metropolis rule. Random numbers come from
one counter-based (Philox) stream per chain, spawned from the master seed,
and are drawn in fixed-size blocks; a run is bitwise reproducible for a
given seed.

Two update schemes are offered. ``"sequential"`` updates the chains one
after another within a generation, each seeing the already-updated states
of the others; every single-chain update then leaves the joint target
invariant. ``"snapshot"`` proposes all chains from the generation-start
states, which allows one batched posterior evaluation per generation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .bayes import PriorSpec
from .parameterization import interpolation_matrix

__all__ = [
    "ConfigurationError",
    "DegenerateVarianceError",
    "InvalidStateError",
    "SamplerConfig",
    "ChainEnsemble",
    "PosteriorSummary",
    "default_jump_rate",
    "propose",
    "accept_step",
    "run",
    "gelman_rubin",
    "gelman_rubin_statistic",
    "summarize",
    "summarize_samples",
]

log = logging.getLogger(__name__)

_BLOCK = 256  # generations of random numbers drawn per refill
QUANTILES = (0.05, 0.50, 0.95)


class ConfigurationError(ValueError):
    pass


class DegenerateVarianceError(ValueError):
    """All retained samples of a parameter are identical."""


class InvalidStateError(ValueError):
    """A chain sits where the posterior is zero."""


def default_jump_rate(n: int) -> float:
    return 2.38 / np.sqrt(2.0 * n)


@dataclass(frozen=True)
class SamplerConfig:
    """DE-MC settings.

    `jump_rate` defaults to 2.38 / sqrt(2 n) and `jitter` to 1e-5 of the
    prior width when left as None. `rhat_every` is the generation stride of
    the convergence trace.
    """

    n_chains: int = 44
    iterations: int = 20000
    jump_rate: float | None = None
    jitter: float | None = None
    burn_in: float = 0.5
    thin: int = 1
    seed: int = 0
    update: str = "sequential"
    rhat_every: int = 100

    def __post_init__(self):
        if self.n_chains < 3:
            raise ConfigurationError("DE-MC needs at least 3 chains")
        if self.iterations < 1:
            raise ConfigurationError("iterations must be >= 1")
        if not 0 <= self.burn_in < 1:
            raise ConfigurationError("burn_in must lie in [0, 1)")
        if self.jump_rate is not None and not self.jump_rate > 0:
            raise ConfigurationError("jump_rate must be positive")
        if self.jitter is not None and not self.jitter > 0:
            raise ConfigurationError("jitter must be positive")
        if self.thin < 1 or self.rhat_every < 1:
            raise ConfigurationError("thin and rhat_every must be >= 1")
        if self.update not in ("sequential", "snapshot"):
            raise ConfigurationError(f"unknown update scheme {self.update!r}")

    def resolved(self, prior: PriorSpec) -> "SamplerConfig":
        """Fill in the prior-dependent defaults and check T >= 2n."""
        if self.n_chains < 2 * prior.n:
            raise ConfigurationError(
                f"{self.n_chains} chains for {prior.n} parameters; at least {2 * prior.n} needed"
            )
        lam = default_jump_rate(prior.n) if self.jump_rate is None else self.jump_rate
        c = 1e-5 * (prior.q_max - prior.q_min) if self.jitter is None else self.jitter
        return replace(self, jump_rate=float(lam), jitter=float(c))


@dataclass(eq=False)
class ChainEnsemble:
    """States, stored history and diagnostics of a DE-MC run.

    Attributes
    ----------
    states : (T, n) array
        Current chain states.
    log_post : (T,) array
        Log-posterior at `states`.
    history : (S, T, n) array
        Stored states after thinning; ``history_iterations[s]`` is the
        generation (1-based) each slice was taken at.
    accepted : (iterations,) int array
        Number of accepted proposals per generation.
    rhat_iterations, rhat : arrays
        Convergence trace: R-hat per parameter at each checkpoint.
    """

    config: SamplerConfig
    states: np.ndarray
    log_post: np.ndarray
    history: np.ndarray
    history_iterations: np.ndarray
    accepted: np.ndarray
    rhat_iterations: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    rhat: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    @property
    def n_chains(self) -> int:
        return self.states.shape[0]

    @property
    def n_params(self) -> int:
        return self.states.shape[1]

    def acceptance_rate(self, after_burn_in: bool = True) -> float:
        acc = self.accepted
        if after_burn_in:
            acc = acc[int(self.config.burn_in * acc.size):]
        return float(acc.sum() / (max(acc.size, 1) * self.n_chains))

    def retained(self) -> np.ndarray:
        """History with the burn-in fraction dropped, shape (t, T, n)."""
        start = int(np.floor(self.config.burn_in * self.history.shape[0]))
        return self.history[start:]

    def samples(self) -> np.ndarray:
        """Retained samples pooled over chains, shape (t * T, n)."""
        r = self.retained()
        return r.reshape(-1, r.shape[-1])

    def final_rhat(self) -> np.ndarray:
        return np.array([gelman_rubin(self, k) for k in range(self.n_params)])


def _partners(i: int, T: int, u_a: float, u_b: float):
    """Two distinct chain indices, both != i, from two uniforms in [0, 1)."""
    a = int(u_a * (T - 1))
    a += a >= i
    b = int(u_b * (T - 2))
    lo, hi = min(i, a), max(i, a)
    b += b >= lo
    b += b >= hi
    return a, b


def _candidate(states, i, u_a, u_b, z, lam, c):
    a, b = _partners(i, states.shape[0], u_a, u_b)
    return states[i] + lam * (states[a] - states[b]) + c * z


def propose(i: int, states: np.ndarray, config: SamplerConfig, rng: np.random.Generator):
    """Differential-evolution proposal for chain `i` given all chain `states`."""
    states = np.asarray(states, dtype=float)
    T, n = states.shape
    if T < 3:
        raise ConfigurationError("DE-MC needs at least 3 chains")
    lam = default_jump_rate(n) if config.jump_rate is None else config.jump_rate
    c = 0.0 if config.jitter is None else config.jitter
    u = rng.random(2)
    return _candidate(states, i, u[0], u[1], rng.standard_normal(n), lam, c)


def accept_step(current, candidate, log_post_current, log_post_candidate, rng_or_u):
    """Metropolis decision; returns (new_state, new_log_post, accepted).

    `rng_or_u` is a Generator or a pre-drawn uniform in [0, 1).
    """
    if not np.isfinite(log_post_current):
        raise InvalidStateError("current state has zero posterior density")
    u = rng_or_u.random() if isinstance(rng_or_u, np.random.Generator) else rng_or_u
    if log_post_candidate >= log_post_current or (
        np.isfinite(log_post_candidate) and np.log(u) < log_post_candidate - log_post_current
    ):
        return candidate, log_post_candidate, True
    return current, log_post_current, False


class _Streams:
    """Per-chain Philox streams drawn in blocks of _BLOCK generations."""

    def __init__(self, seed_seqs, n):
        self.gens = [np.random.Generator(np.random.Philox(s)) for s in seed_seqs]
        self.n = n
        self.pos = _BLOCK

    def next(self):
        if self.pos == _BLOCK:
            self.u = np.stack([g.random((_BLOCK, 3)) for g in self.gens], axis=1)
            self.z = np.stack([g.standard_normal((_BLOCK, self.n)) for g in self.gens], axis=1)
            self.pos = 0
        k = self.pos
        self.pos += 1
        return self.u[k], self.z[k]


def _evaluate(log_posterior, X, vectorized):
    if vectorized:
        return np.asarray(log_posterior(X), dtype=float)
    return np.array([log_posterior(x) for x in X], dtype=float)


def run(log_posterior, prior: PriorSpec, config: SamplerConfig, vectorized: bool = False,
        initial: np.ndarray | None = None) -> ChainEnsemble:
    """Run DE-MC on ``log_posterior`` over the prior box.

    Parameters
    ----------
    log_posterior : callable
        Maps a knot vector (n,) to a log density, or a batch (m, n) to (m,)
        when `vectorized` is set. Must return ``-inf`` outside the box.
    prior : PriorSpec
        Box the chains are initialized in (i.i.d. uniform draws).
    config : SamplerConfig
    initial : (T, n) array, optional
        Starting states instead of prior draws.
    """
    cfg = config.resolved(prior)
    T, n = cfg.n_chains, prior.n
    lam, c = cfg.jump_rate, cfg.jitter

    root = np.random.SeedSequence(cfg.seed)
    init_seq, *chain_seqs = root.spawn(T + 1)
    if initial is None:
        states = prior.sample(np.random.Generator(np.random.Philox(init_seq)), T)
    else:
        states = np.array(initial, dtype=float).reshape(T, n)
    logp = _evaluate(log_posterior, states, vectorized)
    if not np.all(np.isfinite(logp)):
        raise InvalidStateError("initial states must have positive posterior density")

    streams = _Streams(chain_seqs, n)
    n_store = cfg.iterations // cfg.thin
    history = np.empty((n_store, T, n))
    hist_iter = np.empty(n_store, dtype=int)
    accepted = np.zeros(cfg.iterations, dtype=int)
    rhat_it, rhat = [], []
    stored = 0

    for t in range(1, cfg.iterations + 1):
        u, z = streams.next()
        if cfg.update == "snapshot":
            snap = states.copy()
            cand = np.array([
                _candidate(snap, i, u[i, 0], u[i, 1], z[i], lam, c) for i in range(T)
            ])
            lp_c = _evaluate(log_posterior, cand, vectorized)
            with np.errstate(invalid="ignore"):
                take = (lp_c >= logp) | (np.log(u[:, 2]) < lp_c - logp)
            take &= np.isfinite(lp_c)
            states[take] = cand[take]
            logp[take] = lp_c[take]
            accepted[t - 1] = int(take.sum())
        else:
            acc = 0
            for i in range(T):
                x = _candidate(states, i, u[i, 0], u[i, 1], z[i], lam, c)
                lp = float(log_posterior(x[None])[0]) if vectorized else float(log_posterior(x))
                if lp >= logp[i] or (np.isfinite(lp) and np.log(u[i, 2]) < lp - logp[i]):
                    states[i] = x
                    logp[i] = lp
                    acc += 1
            accepted[t - 1] = acc

        if t % cfg.thin == 0 and stored < n_store:
            history[stored] = states
            hist_iter[stored] = t
            stored += 1
            if stored % max(1, cfg.rhat_every // cfg.thin) == 0:
                window = history[int(cfg.burn_in * stored):stored]
                if window.shape[0] >= 2:
                    rhat_it.append(t)
                    rhat.append(_rhat_all(window))

    ens = ChainEnsemble(
        config=cfg,
        states=states,
        log_post=logp,
        history=history[:stored],
        history_iterations=hist_iter[:stored],
        accepted=accepted,
        rhat_iterations=np.array(rhat_it, dtype=int),
        rhat=np.array(rhat) if rhat else np.zeros((0, n)),
    )
    log.info("DE-MC finished: %d generations, acceptance %.3f", cfg.iterations,
             ens.acceptance_rate())
    return ens


def gelman_rubin_statistic(x: np.ndarray) -> float:
    """Scale-reduction factor for samples ``x`` of shape (t, chains).

    B is t times the variance of the chain means and W the mean
    within-chain variance; returns
    ``sqrt((t - 1) / t + (T + 1) / (T t) * B / W)``.
    """
    x = np.asarray(x, dtype=float)
    t, T = x.shape
    if t < 2 or T < 2:
        raise ValueError("need at least 2 chains with 2 samples each")
    means = x.mean(axis=0)
    W = x.var(axis=0, ddof=1).mean()
    if W == 0:
        raise DegenerateVarianceError("within-chain variance is zero")
    B = t * means.var(ddof=1)
    return float(np.sqrt((t - 1) / t + (T + 1) / (T * t) * B / W))


def _rhat_all(window: np.ndarray) -> np.ndarray:
    """R-hat for every parameter of a (t, T, n) window; nan where degenerate."""
    t, T, _ = window.shape
    means = window.mean(axis=0)
    W = window.var(axis=0, ddof=1).mean(axis=0)
    B = t * means.var(axis=0, ddof=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.sqrt((t - 1) / t + (T + 1) / (T * t) * B / W)
    return np.where(W > 0, r, np.nan)


def gelman_rubin(ensemble: ChainEnsemble, parameter: int) -> float:
    """R-hat of one parameter over the retained (post burn-in) history."""
    return gelman_rubin_statistic(ensemble.retained()[:, :, parameter])


@dataclass(frozen=True, eq=False)
class PosteriorSummary:
    """Per-angle posterior statistics of a pressure curve.

    `density` has one row per angle holding a histogram over the bins
    ``bin_edges``; each row sums to 1 (values outside the grid are counted in
    the end bins).
    """

    angles: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    quantiles: np.ndarray
    quantile_levels: tuple
    bin_edges: np.ndarray
    density: np.ndarray
    mean_knots: np.ndarray
    n_samples: int

    @property
    def bin_centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])


def summarize_samples(samples: np.ndarray, matrix: np.ndarray, angles, pressure_grid,
                      chunk: int = 10) -> PosteriorSummary:
    """Summaries of the curves ``matrix @ q_s`` over samples ``q_s``.

    `matrix` (M, n) maps knots to the M monitored values; ``pressure_grid``
    gives the histogram bin edges (kPa).
    """
    samples = np.asarray(samples, dtype=float)
    if samples.shape[0] == 0:
        raise ValueError("no retained samples to summarize")
    matrix = np.asarray(matrix, dtype=float)
    edges = np.asarray(pressure_grid, dtype=float)
    M, K = matrix.shape[0], edges.size - 1
    mean = np.empty(M)
    std = np.empty(M)
    quant = np.empty((len(QUANTILES), M))
    density = np.empty((M, K))
    S = samples.shape[0]
    for lo in range(0, M, chunk):
        vals = samples @ matrix[lo:lo + chunk].T  # (S, m)
        mean[lo:lo + chunk] = vals.mean(axis=0)
        std[lo:lo + chunk] = vals.std(axis=0)
        quant[:, lo:lo + chunk] = np.quantile(vals, QUANTILES, axis=0)
        bins = np.clip(np.searchsorted(edges, vals, side="right") - 1, 0, K - 1)
        for k in range(vals.shape[1]):
            density[lo + k] = np.bincount(bins[:, k], minlength=K) / S
    return PosteriorSummary(
        angles=np.asarray(angles, dtype=float),
        mean=mean,
        std=std,
        quantiles=quant,
        quantile_levels=QUANTILES,
        bin_edges=edges,
        density=density,
        mean_knots=samples.mean(axis=0),
        n_samples=S,
    )


def summarize(ensemble: ChainEnsemble, template, angles, pressure_grid) -> PosteriorSummary:
    """Posterior of the interpolated pressure at `angles` from retained samples.

    `template` is a PressureField (or a knot count) fixing the interpolation.
    """
    n = template if isinstance(template, (int, np.integer)) else template.n
    matrix = interpolation_matrix(n, angles)
    return summarize_samples(ensemble.samples(), matrix, angles, pressure_grid)

"""Seeded stochastic generation of measurement records and Bayesian runs.

All randomness flows through counter-based Philox4x64-10 generators keyed by
(seed, stream_id), so every output is a pure function of the seed, the stream
index, and the physical parameters, on any platform. Distinct stream ids give
statistically independent streams; round k of an experiment uses stream k.

Two samplers produce on-off records: direct inverse-CDF draws (one uniform
per observation, exactly the target distribution) and an independence-chain
Metropolis walk with uniform proposals over the four symbols, whose
acceptance ratio compares the candidate against the *current* state. A
variant that keeps the very first observation in the denominator throughout
would not be a standard Metropolis chain and is deliberately not implemented.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import measurement
from .errors import DegenerateChainError
from .measurement import PipelineConfig
from .outcomes import ON_OFF_SYMBOLS, OnOffProbs

__all__ = [
    "RngStream",
    "Trajectory",
    "categorical_sample",
    "categorical_draws",
    "metropolis_chain",
    "run_round",
    "run_experiment",
    "checkpoint_schedule",
]

METROPOLIS_BURN_IN = 1000


@dataclass(frozen=True)
class RngStream:
    """Identity of one reproducible random stream."""

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng)}")


def categorical_draws(probs: OnOffProbs, rng, size: int) -> np.ndarray:
    """Vector of outcome indices with exactly the given probabilities.

    Inverse-CDF on one uniform draw per observation, in the fixed symbol
    order of :data:`ON_OFF_SYMBOLS`.
    """
    gen = _as_generator(rng)
    edges = np.cumsum(probs.as_array())
    edges[-1] = 1.0
    u = gen.random(size)
    return np.searchsorted(edges, u, side="right").astype(np.int8)


def categorical_sample(probs: OnOffProbs, rng) -> str:
    """One on-off symbol drawn with the given probabilities."""
    return ON_OFF_SYMBOLS[int(categorical_draws(probs, rng, 1)[0])]


def metropolis_chain(
    probs: OnOffProbs,
    rng,
    n_steps: int = 100_000,
    start: int | str | None = None,
    burn_in: int = 0,
) -> np.ndarray:
    """Independence-chain Metropolis record of on-off outcome indices.

    Each step proposes one of the four symbols uniformly, accepts with
    probability min(1, P(candidate) / P(current)), and repeats the current
    state on rejection. ``start`` defaults to the most probable symbol;
    ``burn_in`` initial states are discarded from the returned record.
    """
    if n_steps < 1:
        raise ValueError(f"n_steps must be at least 1, got {n_steps}")
    gen = _as_generator(rng)
    p = probs.as_array()
    if start is None:
        current = int(np.argmax(p))
    elif isinstance(start, str):
        current = ON_OFF_SYMBOLS.index(start)
    else:
        current = int(start)
    if p[current] <= 0.0:
        raise DegenerateChainError(
            f"chain started in zero-probability state {ON_OFF_SYMBOLS[current]}"
        )
    total = burn_in + n_steps
    proposals = gen.integers(0, 4, size=total)
    uniforms = gen.random(total)
    out = np.empty(total, dtype=np.int8)
    for t in range(total):
        cand = proposals[t]
        # Acceptance ratio against the current state; p[current] > 0 is
        # maintained inductively.
        if uniforms[t] * p[current] <= p[cand]:
            current = cand
        out[t] = current
    return out[burn_in:]


@dataclass
class Trajectory:
    """Per-checkpoint estimates of one simulated experiment round.

    ``records`` holds rows (m, alpha_hat, var_hat) at each checkpoint;
    ``tallies`` counts the four on-off symbols over all M observations.
    """

    records: np.ndarray
    tallies: np.ndarray
    m_total: int

    def final(self) -> tuple[float, float]:
        return float(self.records[-1, 1]), float(self.records[-1, 2])


def checkpoint_schedule(m_total: int) -> np.ndarray:
    """The prior (m = 0), powers of two up to m_total, and m_total itself."""
    points = [0]
    m = 1
    while m < m_total:
        points.append(m)
        m *= 2
    points.append(m_total)
    return np.array(points, dtype=np.int64)


def _log_likelihood_table(cfg: PipelineConfig, grid: np.ndarray) -> np.ndarray:
    """log P(outcome | alpha) on the grid, shape (4, len(grid)); -inf at zeros."""
    table = measurement.onoff_probs_grid(cfg, grid).T
    with np.errstate(divide="ignore"):
        return np.log(table)


def _posterior_from_counts(
    counts: np.ndarray, log_like: np.ndarray, grid: np.ndarray
) -> tuple[float, float]:
    """Posterior mean/variance after observing the given outcome counts.

    Likelihoods multiply, so the posterior depends on the record only through
    the four counts; 0 * log(0) is treated as 0 (unseen impossible outcomes
    do not kill grid points).
    """
    logw = np.zeros(grid.size)
    for k in range(4):
        if counts[k] > 0:
            logw += counts[k] * log_like[k]
    logw -= logw.max()
    w = np.exp(logw)
    z = np.trapezoid(w, grid)
    mean = np.trapezoid(grid * w, grid) / z
    second = np.trapezoid(grid**2 * w, grid) / z
    return float(mean), float(max(0.0, second - mean**2))


def run_round(
    cfg: PipelineConfig,
    alpha_true: float,
    M: int,
    rng,
    sampler: str = "direct",
    grid_points: int = 2001,
    log_like: np.ndarray | None = None,
    grid: np.ndarray | None = None,
) -> Trajectory:
    """One simulated experiment: M observations, sequential Bayes updates.

    Estimates are recorded at power-of-two checkpoints and at M. The
    sequential updates commute (likelihoods multiply), so the posterior at a
    checkpoint is computed from the cumulative outcome counts; this is exact,
    not an approximation.
    """
    if M < 1:
        raise ValueError(f"M must be at least 1, got {M}")
    if sampler not in ("direct", "metropolis"):
        raise ValueError(f"sampler must be 'direct' or 'metropolis', got {sampler!r}")
    gen = _as_generator(rng)
    probs = measurement.onoff_probs(cfg, alpha_true)
    if sampler == "direct":
        outcomes = categorical_draws(probs, gen, M)
    else:
        outcomes = metropolis_chain(probs, gen, n_steps=M, burn_in=METROPOLIS_BURN_IN)

    if grid is None:
        grid = np.linspace(0.0, 1.0, grid_points)
    if log_like is None:
        log_like = _log_likelihood_table(cfg, grid)

    one_hot = np.zeros((M + 1, 4), dtype=np.int64)
    one_hot[np.arange(1, M + 1), outcomes] = 1
    cumulative = np.cumsum(one_hot, axis=0)

    records = []
    for m in checkpoint_schedule(M):
        mean, var = _posterior_from_counts(cumulative[m], log_like, grid)
        records.append((m, mean, var))
    return Trajectory(
        records=np.array(records, dtype=float),
        tallies=cumulative[M].copy(),
        m_total=M,
    )


def run_experiment(
    cfg: PipelineConfig,
    alpha_true: float,
    M: int,
    rounds: int,
    base_seed: int,
    sampler: str = "direct",
    grid_points: int = 2001,
) -> list[Trajectory]:
    """Independent rounds with stream_id = round index; deterministic in base_seed.

    The likelihood table is computed once and shared read-only by all rounds,
    which keeps long chains cheap; rounds are independent and could run
    concurrently without changing any output.
    """
    if rounds < 1:
        raise ValueError(f"rounds must be at least 1, got {rounds}")
    grid = np.linspace(0.0, 1.0, grid_points)
    log_like = _log_likelihood_table(cfg, grid)
    return [
        run_round(
            cfg,
            alpha_true,
            M,
            RngStream(seed=base_seed, stream_id=k),
            sampler=sampler,
            log_like=log_like,
            grid=grid,
        )
        for k in range(rounds)
    ]

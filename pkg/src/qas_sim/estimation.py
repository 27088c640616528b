"""Estimator mathematics: Bayesian grid inference, Fisher information, bounds.

The absorption coefficient lives on [0, 1]; posteriors are densities on a
uniform grid over that interval with trapezoid quadrature. Fisher information
of any outcome family is computed by central finite differences of its
probability table; the quantum bound has both a closed form and an
independent numeric oracle built on state fidelities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import fock_core, measurement
from .errors import DegenerateUpdateError, PoleError, SingularEstimatorError
from .fock_core import geometric_required_cutoff
from .measurement import PipelineConfig
from .outcomes import ON_OFF_INDEX, OnOffProbs

__all__ = [
    "Posterior",
    "EstimateReport",
    "uniform_posterior",
    "bayes_update",
    "posterior_stats",
    "fisher_information",
    "onoff_fisher_information",
    "qas_full_counting_fisher_information",
    "cas_full_counting_fisher_information",
    "cas_intensity_fisher_information",
    "qfi_closed_form",
    "qfi_numeric",
    "qfi_numeric_reduced",
    "cramer_rao",
    "shot_noise_limit",
    "cas_variance",
    "cas_estimator",
    "cas_crossover_photon_number",
]

DEFAULT_GRID_POINTS = 2001


@dataclass
class Posterior:
    """Discretized density over the absorption coefficient on [0, 1]."""

    grid: np.ndarray
    weights: np.ndarray
    updates: int = 0

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.grid.shape != self.weights.shape:
            raise ValueError("grid and weights shapes differ")
        if self.grid[0] != 0.0 or self.grid[-1] != 1.0:
            raise ValueError("grid must span [0, 1] inclusive")

    def normalization(self) -> float:
        return float(np.trapezoid(self.weights, self.grid))


@dataclass(frozen=True)
class EstimateReport:
    """Posterior mean, posterior variance, and the number of updates used."""

    alpha_hat: float
    var_hat: float
    m_used: int


def uniform_posterior(num_points: int = DEFAULT_GRID_POINTS) -> Posterior:
    """Uniform prior on [0, 1]."""
    if num_points < 3:
        raise ValueError("grid needs at least 3 points")
    return Posterior(grid=np.linspace(0.0, 1.0, num_points), weights=np.ones(num_points))


def bayes_update(
    post: Posterior,
    outcome: int | str,
    likelihood: Callable[[float], OnOffProbs],
) -> Posterior:
    """Multiply the posterior by one outcome's likelihood curve and renormalize."""
    k = ON_OFF_INDEX[outcome] if isinstance(outcome, str) else int(outcome)
    if not 0 <= k < 4:
        raise ValueError(f"outcome must be one of the four on-off symbols, got {outcome}")
    curve = np.array([likelihood(float(a)).as_array()[k] for a in post.grid])
    weights = post.weights * curve
    z = float(np.trapezoid(weights, post.grid))
    if not z > 0.0:
        raise DegenerateUpdateError(
            "outcome has zero likelihood at every grid point; posterior vanished"
        )
    return Posterior(grid=post.grid, weights=weights / z, updates=post.updates + 1)


def posterior_stats(post: Posterior) -> EstimateReport:
    """Trapezoid-rule posterior mean and variance."""
    z = post.normalization()
    mean = float(np.trapezoid(post.grid * post.weights, post.grid) / z)
    second = float(np.trapezoid(post.grid**2 * post.weights, post.grid) / z)
    return EstimateReport(alpha_hat=mean, var_hat=max(0.0, second - mean**2), m_used=post.updates)


# ---------------------------------------------------------------------------
# Classical Fisher information
# ---------------------------------------------------------------------------


def fisher_information(
    probs_of_alpha: Callable[[float], Sequence[float]],
    alpha: float,
    step: float = 1e-5,
) -> float:
    """F = sum_k (d P_k / d alpha)^2 / P_k by central finite differences.

    Outcomes with vanishing probability and vanishing derivative are dropped;
    a vanishing probability with a live derivative would make F diverge and
    raises instead.
    """
    if step <= 0.0:
        raise ValueError(f"step must be positive, got {step}")
    if alpha - step < 0.0 or alpha + step > 1.0:
        suggested = min(alpha, 1.0 - alpha) / 2.0
        raise ValueError(
            f"alpha={alpha} too close to the boundary for step={step}; "
            f"use step <= {suggested:.3e}"
        )
    p0 = np.asarray(probs_of_alpha(alpha), dtype=float).ravel()
    pp = np.asarray(probs_of_alpha(alpha + step), dtype=float).ravel()
    pm = np.asarray(probs_of_alpha(alpha - step), dtype=float).ravel()
    dp = (pp - pm) / (2.0 * step)
    alive = p0 > 1e-14
    dead_but_moving = ~alive & (np.abs(dp) * step > 1e-9)
    if np.any(dead_but_moving):
        raise ValueError(
            "outcome with vanishing probability but non-vanishing derivative; "
            "Fisher information diverges at this alpha"
        )
    return float(np.sum(dp[alive] ** 2 / p0[alive]))


def onoff_fisher_information(cfg: PipelineConfig, alpha: float, step: float = 1e-5) -> float:
    """Fisher information of the four on-off outcomes about alpha."""
    return fisher_information(
        lambda a: measurement.onoff_probs(cfg, a).as_array(), alpha, step
    )


def qas_full_counting_fisher_information(
    cfg: PipelineConfig, alpha: float, step: float = 2e-4, tail_tol: float = 1e-9
) -> float:
    """Fisher information of the full joint counting table about alpha.

    The outcome cutoff is fixed at the central alpha so the three finite
    difference evaluations share one outcome family.
    """
    center = measurement.qas_full_distribution(cfg, alpha, tail_tol=tail_tol)
    out_dim = center.pair_table().shape[0]

    def table(a: float) -> np.ndarray:
        return measurement.qas_full_distribution(
            cfg, a, out_dim=out_dim, tail_tol=10.0 * tail_tol
        ).probs

    return fisher_information(table, alpha, step)


def cas_full_counting_fisher_information(
    n_a: float, alpha: float, n_th: float, step: float = 2e-4, tail_tol: float = 1e-10
) -> float:
    """Fisher information of number-resolved counting on the CAS output."""
    center = measurement.cas_full_distribution(n_a, alpha, n_th, tail_tol=tail_tol)
    cutoff = len(center.support)

    def table(a: float) -> np.ndarray:
        return measurement.cas_full_distribution(
            n_a, a, n_th, cutoff=cutoff, tail_tol=10.0 * tail_tol
        ).probs

    return fisher_information(table, alpha, step)


def cas_intensity_fisher_information(n_a: float, alpha: float, n_th: float) -> float:
    """Per-measurement information of the CAS intensity read-out, 1 / variance."""
    return 1.0 / cas_variance(n_a, alpha, n_th)


# ---------------------------------------------------------------------------
# Quantum Fisher information
# ---------------------------------------------------------------------------


def qfi_closed_form(n_a: float, n_th: float, alpha: float) -> float:
    """Closed-form quantum bound (n_a + n_th + 2 n_a n_th) / (alpha (1 - alpha)).

    This is the quantum Fisher information of the purified pipeline family
    (see :func:`qfi_numeric`); it diverges at the endpoints.
    """
    if not 0.0 < alpha < 1.0:
        raise PoleError(f"closed-form QFI has poles at alpha in {{0, 1}}; got {alpha}")
    return (n_a + n_th + 2.0 * n_a * n_th) / (alpha * (1.0 - alpha))


def _dilation_cutoffs(cfg: PipelineConfig, alpha: float, tol: float = 1e-12) -> tuple[int, int]:
    alpha_eff, n_eff = measurement._effective_signal_channel(cfg, alpha)
    C = geometric_required_cutoff(cfg.n_a / (cfg.n_a + 1.0), tol) if cfg.n_a > 0 else 2
    F = geometric_required_cutoff(n_eff / (n_eff + 1.0), tol) if n_eff > 0 else 2
    return C, F


def qfi_numeric(cfg: PipelineConfig, alpha: float, eps: float = 1e-3) -> float:
    """Numeric oracle for the closed-form quantum bound, via state fidelity.

    Uses the Bures relation QFI = 8 (1 - sqrt(F(rho_alpha, rho_alpha+eps))) / eps^2,
    symmetrized over +/- eps, on the *purified* pipeline family: the loss
    channel realized as a beam splitter onto a purified thermal ancilla, with
    the ancilla modes kept. For these pure states the fidelity is the squared
    overlap. The reduced signal-idler family has strictly smaller information
    whenever thermal noise is present; see :func:`qfi_numeric_reduced`.
    """
    if not 0.0 < alpha - eps < alpha + eps < 1.0:
        raise ValueError(f"need 0 < alpha - eps and alpha + eps < 1, got {alpha} +/- {eps}")
    C, F = _dilation_cutoffs(cfg, alpha)
    v0 = measurement.dilated_pipeline_vector(cfg, alpha, C, F).ravel()
    qfi = 0.0
    for sign in (+1.0, -1.0):
        v = measurement.dilated_pipeline_vector(cfg, alpha + sign * eps, C, F).ravel()
        overlap = abs(np.vdot(v0, v)) / math.sqrt(
            (np.vdot(v0, v0).real) * (np.vdot(v, v).real)
        )
        qfi += 8.0 * (1.0 - overlap) / eps**2
    return qfi / 2.0


def qfi_numeric_reduced(
    cfg: PipelineConfig, alpha: float, eps: float = 1e-3, cutoff: int = 36
) -> float:
    """Bures QFI of the accessible signal-idler state family.

    Computed with the Uhlmann fidelity of the reduced density matrices after
    the sample channel (the fixed OPA cannot change it). This is the bound
    attainable by measurements on the two output beams alone.
    """
    if not 0.0 < alpha - eps < alpha + eps < 1.0:
        raise ValueError(f"need 0 < alpha - eps and alpha + eps < 1, got {alpha} +/- {eps}")

    def rho(a: float):
        state = fock_core.tmsv_fock(cfg.n_a, cutoff, tail_tol=1e-8)
        if cfg.eta_s < 1.0:
            state = fock_core.apply_loss_fock(state, 0, 1.0 - cfg.eta_s, 0.0, tail_tol=1e-8)
        if cfg.eta_i < 1.0:
            state = fock_core.apply_loss_fock(state, 1, 1.0 - cfg.eta_i, 0.0, tail_tol=1e-8)
        return fock_core.apply_loss_fock(state, 0, a, cfg.n_th, tail_tol=1e-8)

    r0 = rho(alpha)
    qfi = 0.0
    for sign in (+1.0, -1.0):
        f = fock_core.fidelity(r0, rho(alpha + sign * eps))
        qfi += 8.0 * (1.0 - math.sqrt(min(1.0, f))) / eps**2
    return qfi / 2.0


# ---------------------------------------------------------------------------
# Bounds and the intensity estimator
# ---------------------------------------------------------------------------


def cramer_rao(M: int, F: float) -> float:
    """Cramer-Rao variance bound 1 / (M F) for M repetitions."""
    if M < 1:
        raise ValueError(f"M must be a positive integer, got {M}")
    if F <= 0.0:
        raise ValueError(f"Fisher information must be positive, got {F}")
    return 1.0 / (M * F)


def shot_noise_limit(alpha: float, n_a: float) -> float:
    """Coherent-probe precision floor (1 - alpha) / n_a."""
    if n_a <= 0.0:
        raise ValueError(f"n_a must be positive, got {n_a}")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"absorption must lie in [0, 1], got {alpha}")
    return (1.0 - alpha) / n_a


def cas_variance(n_a: float, alpha: float, n_th: float) -> float:
    """Single-measurement variance of the CAS intensity estimator.

    Error propagation: Var(n_out) / (d<n_out>/d alpha)^2 with the derivative
    n_th - n_a. Exactly the shot-noise limit when n_th = 0; undefined when
    n_a = n_th, where the mean intensity carries no first-order information.
    """
    if abs(n_a - n_th) < 1e-12:
        raise SingularEstimatorError(
            f"intensity estimator is singular at n_a = n_th = {n_a}"
        )
    _, var_out = measurement.cas_intensity_stats(n_a, alpha, n_th)
    return var_out / (n_a - n_th) ** 2


def cas_estimator(mean_in: float, mean_out: float) -> float:
    """Intensity estimate of the absorption: 1 - <n>_out / <n>_in (unclamped)."""
    if mean_in <= 0.0:
        raise ValueError(f"mean input photon number must be positive, got {mean_in}")
    return 1.0 - mean_out / mean_in


def cas_crossover_photon_number(precision: float, alpha: float, n_th: float) -> float:
    """Smallest n_a at which the CAS intensity variance reaches ``precision``.

    Solves cas_variance(n_a, alpha, n_th) = precision for n_a > n_th; the
    variance is a ratio of a linear and a quadratic polynomial in n_a, so the
    crossover is the larger root of a quadratic.
    """
    if precision <= 0.0:
        raise ValueError(f"precision target must be positive, got {precision}")
    lin = (1.0 - alpha) * (2.0 * alpha * n_th + 1.0)
    const = alpha * n_th * (alpha * n_th + 1.0)
    # precision * (n - n_th)^2 = lin * n + const
    a = precision
    b = -(2.0 * precision * n_th + lin)
    c = precision * n_th**2 - const
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        raise ValueError("no crossover: intensity variance never reaches the target")
    return (-b + math.sqrt(disc)) / (2.0 * a)

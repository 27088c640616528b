"""Measurement pipelines: correlated-photon (QAS) and coherent-light (CAS).

The QAS chain is: two-mode squeezed source (signal + idler), optional input
transmissions on each arm, the thermal-loss sample channel on the signal,
an anti-squeezing OPA across (signal, idler), then photon counting. The CAS
chain is a coherent signal through the same sample channel with intensity
read-out.

Two independent routes produce every counting probability:

* the exact Gaussian route (``gaussian_core``), used in production for
  on-off probabilities, zero-photon probabilities, and intensity moments;
* the truncated Fock route (``fock_core``), the brute-force oracle, which
  also supplies the full joint counting table P(n1, n2 | alpha).

For the ideal-idler pipeline the Fock route exploits the chain's conserved
quantities (the loss beam splitter preserves signal+ancilla photons, the OPA
preserves signal-idler difference, and the source populates only |n, n>), so
the joint table is assembled diagonal-by-diagonal from small unitary blocks
instead of evolving a full density matrix. A dense density-matrix fallback
covers idler input loss and doubles as a cross-check of the fast path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import fock_core, gaussian_core
from .errors import TruncationError
from .fock_core import (
    DEFAULT_TAIL_TOL,
    beam_splitter_blocks,
    geometric_required_cutoff,
    loss_mixing_angle,
    thermal_weights,
    tmsv_amplitudes,
    two_mode_squeeze_block,
)
from .gaussian_core import GaussianState, SqueezeParams
from .outcomes import OnOffProbs, OutcomeDistribution

__all__ = [
    "PipelineConfig",
    "qas_output_state",
    "qas_post_loss_state",
    "qas_full_distribution",
    "qas_full_distribution_dense",
    "onoff_from_full",
    "onoff_probs",
    "onoff_probs_grid",
    "apply_dark_counts",
    "zpp",
    "cas_zpp",
    "cas_output_state",
    "cas_intensity_stats",
    "cas_full_distribution",
    "dilated_pipeline_vector",
]

SIGNAL, IDLER = 0, 1


@dataclass(frozen=True)
class PipelineConfig:
    """Physical parameters of one QAS pipeline.

    ``n_a`` sets the source squeeze magnitude through n_a = sinh^2|xi|;
    ``opa`` defaults to the matched anti-squeeze (equal magnitude, phase
    shifted by pi). ``eta_s``/``eta_i`` are input transmissions of the two
    arms (vacuum environments, applied before the sample), and ``dark_p`` is
    a per-detector dark-count click probability applied to the on-off
    outcomes. Defaults reproduce the ideal pipeline.
    """

    n_a: float = 1.0
    n_th: float = 1.0
    opa: SqueezeParams | None = None
    eta_s: float = 1.0
    eta_i: float = 1.0
    dark_p: float = 0.0

    def __post_init__(self):
        if self.n_a < 0:
            raise ValueError(f"n_a must be non-negative, got {self.n_a}")
        if self.n_th < 0:
            raise ValueError(f"n_th must be non-negative, got {self.n_th}")
        for name in ("eta_s", "eta_i"):
            val = getattr(self, name)
            if not 0.0 <= val <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {val}")
        if not 0.0 <= self.dark_p <= 1.0:
            raise ValueError(f"dark_p must lie in [0, 1], got {self.dark_p}")

    def source_params(self) -> SqueezeParams:
        return SqueezeParams.from_mean_photons(self.n_a)

    def opa_params(self) -> SqueezeParams:
        if self.opa is not None:
            return self.opa
        return self.source_params().inverse()

    @property
    def is_ideal(self) -> bool:
        return self.eta_s == 1.0 and self.eta_i == 1.0 and self.dark_p == 0.0


# ---------------------------------------------------------------------------
# Gaussian route
# ---------------------------------------------------------------------------


def qas_post_loss_state(cfg: PipelineConfig, alpha: float) -> GaussianState:
    """Signal-idler Gaussian state after the sample channel, before the OPA."""
    state = gaussian_core.vacuum(2)
    state = gaussian_core.apply_two_mode_squeeze(state, SIGNAL, IDLER, cfg.source_params())
    if cfg.eta_s < 1.0:
        state = gaussian_core.apply_thermal_loss(state, SIGNAL, 1.0 - cfg.eta_s, 0.0)
    if cfg.eta_i < 1.0:
        state = gaussian_core.apply_thermal_loss(state, IDLER, 1.0 - cfg.eta_i, 0.0)
    return gaussian_core.apply_thermal_loss(state, SIGNAL, alpha, cfg.n_th)


def qas_output_state(cfg: PipelineConfig, alpha: float) -> GaussianState:
    """Gaussian state arriving at the detectors."""
    state = qas_post_loss_state(cfg, alpha)
    return gaussian_core.apply_two_mode_squeeze(state, SIGNAL, IDLER, cfg.opa_params())


def zpp(cfg: PipelineConfig, alpha: float) -> float:
    """Zero-photon probability P({0,0} | alpha) of the QAS output.

    Fast path through the Gaussian vacuum-probability formula; equals the
    (0, 0) entry of :func:`qas_full_distribution` to oracle accuracy.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"absorption must lie in [0, 1], got {alpha}")
    return gaussian_core.vacuum_probability(qas_output_state(cfg, alpha))


def cas_output_state(n_a: float, alpha: float, n_th: float) -> GaussianState:
    """Coherent probe with n_a mean photons after the sample channel."""
    state = gaussian_core.vacuum(1)
    state = gaussian_core.apply_displacement(state, 0, 2.0 * math.sqrt(n_a), 0.0)
    return gaussian_core.apply_thermal_loss(state, 0, alpha, n_th)


def cas_zpp(n_a: float, alpha: float, n_th: float) -> float:
    """Zero-photon probability of the CAS output (comparison curve)."""
    return gaussian_core.vacuum_probability(cas_output_state(n_a, alpha, n_th))


def cas_intensity_stats(n_a: float, alpha: float, n_th: float) -> tuple[float, float]:
    """Mean and variance of the output photon number in CAS.

    mean = (1 - alpha) n_a + alpha n_th; the variance follows from the exact
    Gaussian moments and is cross-checked against the Fock oracle.
    """
    state = cas_output_state(n_a, alpha, n_th)
    return (
        gaussian_core.mean_photon(state, 0),
        gaussian_core.photon_number_variance(state, 0),
    )


def onoff_probs(cfg: PipelineConfig, alpha: float) -> OnOffProbs:
    """The four on-off outcome probabilities at one absorption value.

    P(no click on a detector) is the vacuum probability of that mode's
    marginal, so all four probabilities follow from three Gaussian vacuum
    probabilities plus normalization. Dark counts, when configured, are
    overlaid afterwards.
    """
    out = qas_output_state(cfg, alpha)
    p00 = gaussian_core.vacuum_probability(out)
    p_s0 = gaussian_core.vacuum_probability(gaussian_core.reduced_state(out, [SIGNAL]))
    p_i0 = gaussian_core.vacuum_probability(gaussian_core.reduced_state(out, [IDLER]))
    p0c = max(0.0, p_s0 - p00)
    pc0 = max(0.0, p_i0 - p00)
    pcc = max(0.0, 1.0 - p00 - p0c - pc0)
    probs = OnOffProbs(p00=p00, p0c=p0c, pc0=pc0, pcc=pcc)
    if cfg.dark_p > 0.0:
        probs = apply_dark_counts(probs, cfg.dark_p)
    return probs


def onoff_probs_grid(cfg: PipelineConfig, alphas: np.ndarray) -> np.ndarray:
    """On-off probabilities for every alpha in a grid; shape (len(alphas), 4)."""
    return np.array([onoff_probs(cfg, float(a)).as_array() for a in np.asarray(alphas)])


def onoff_from_full(dist: OutcomeDistribution) -> OnOffProbs:
    """Coarse-grain a joint counting table into the four on-off outcomes.

    The truncated table's residual tail is assigned to the both-click
    outcome, which keeps the four probabilities normalization-exact.
    """
    table = dist.pair_table()
    p00 = float(table[0, 0])
    p0c = float(table[0, 1:].sum())
    pc0 = float(table[1:, 0].sum())
    pcc = max(0.0, 1.0 - p00 - p0c - pc0)
    return OnOffProbs(p00=p00, p0c=p0c, pc0=pc0, pcc=pcc)


def apply_dark_counts(p: OnOffProbs, dark_p: float) -> OnOffProbs:
    """Overlay independent per-detector dark counts on the on-off outcomes.

    Each detector's no-click survives with probability (1 - dark_p),
    independently per shot and per detector.
    """
    if not 0.0 <= dark_p <= 1.0:
        raise ValueError(f"dark_p must lie in [0, 1], got {dark_p}")
    if dark_p == 0.0:
        return p
    keep = 1.0 - dark_p
    p00 = p.p00 * keep * keep
    p0c = p.p0c * keep + p.p00 * keep * dark_p
    pc0 = p.pc0 * keep + p.p00 * keep * dark_p
    pcc = 1.0 - p00 - p0c - pc0
    return OnOffProbs(p00=p00, p0c=p0c, pc0=pc0, pcc=max(0.0, pcc))


# ---------------------------------------------------------------------------
# Fock route
# ---------------------------------------------------------------------------


def _effective_signal_channel(cfg: PipelineConfig, alpha: float) -> tuple[float, float]:
    """Fold the signal input transmission into one thermal-loss channel.

    A vacuum loss of transmission eta_s followed by the sample channel of
    absorption alpha and occupation n_th equals a single thermal-loss channel
    with absorption alpha_eff and occupation n_eff given here.
    """
    transmission = cfg.eta_s * (1.0 - alpha)
    alpha_eff = 1.0 - transmission
    if alpha_eff == 0.0:
        return 0.0, 0.0
    added_noise = (1.0 - alpha) * (1.0 - cfg.eta_s) + alpha * (2.0 * cfg.n_th + 1.0)
    n_eff = 0.5 * (added_noise / alpha_eff - 1.0)
    return alpha_eff, max(0.0, n_eff)


_OPA_BLOCK_MEMO: dict[tuple, dict[int, np.ndarray]] = {}


def _opa_blocks(r: float, phase: float, dim: int) -> dict[int, np.ndarray]:
    """Memoized per-difference squeezer blocks on a quantized ladder length."""
    dim = ((dim + 15) // 16) * 16
    key = (r, phase, dim)
    if key not in _OPA_BLOCK_MEMO:
        if len(_OPA_BLOCK_MEMO) > 2:
            _OPA_BLOCK_MEMO.clear()
        _OPA_BLOCK_MEMO[key] = {}
    return _OPA_BLOCK_MEMO[key]


def _opa_block(cache: dict[int, np.ndarray], r: float, phase: float, d: int, dim: int) -> np.ndarray:
    dim = ((dim + 15) // 16) * 16
    if d not in cache:
        cache[d] = two_mode_squeeze_block(r, phase, d, dim)
    return cache[d]


def _qas_table_sparse(
    n_a: float,
    alpha_eff: float,
    n_eff: float,
    opa: SqueezeParams,
    out_dim: int,
    source_cutoff: int,
    env_cutoff: int,
) -> np.ndarray:
    """Joint counting table of the ideal-idler pipeline, diagonal by diagonal.

    For outcome difference d = n1 - n2 and environment purifier occupation f,
    the amplitude collapses to a single coherent sum over the source photon
    number n (every other index is fixed by the conserved quantities), so each
    table diagonal is one small matrix product.
    """
    C, F = source_cutoff, env_cutoff
    c = tmsv_amplitudes(n_a, C)
    t_sqrt = np.sqrt(thermal_weights(n_eff, F))
    theta = loss_mixing_angle(alpha_eff)
    bs = beam_splitter_blocks(theta, C - 1 + F - 1)
    ladder = max(C, out_dim) + fock_core.SQUEEZE_BUFFER
    opa_cache = _opa_blocks(opa.r, opa.phase, ladder)

    table = np.zeros((out_dim, out_dim))
    for d in range(-(out_dim - 1), out_dim):
        n_lo = max(0, -d)
        # The loss beam splitter cannot raise the signal by more than the
        # ancilla held, so diagonals d > 0 draw only on purifiers f >= d.
        f_lo = max(0, d)
        if n_lo >= C or f_lo >= F:
            continue
        n = np.arange(n_lo, C)
        f_idx = np.arange(f_lo, F)[:, None]
        # W[f, n] = t_f c_n <n+d, (n+f)-(n+d) | BS | n, f>
        W = t_sqrt[f_lo:, None] * c[None, n] * bs[n[None, :] + f_idx, (n + d)[None, :], n[None, :]]
        k_in = n if d >= 0 else n + d
        n_out = out_dim - abs(d)
        U = _opa_block(opa_cache, opa.r, opa.phase, abs(d), ladder)
        amps = W @ U[:n_out, k_in].T
        p_diag = np.einsum("fk,fk->k", amps, amps.conj()).real
        k = np.arange(n_out)
        table[k + max(d, 0), k + max(-d, 0)] += p_diag
    return table


def qas_full_distribution(
    cfg: PipelineConfig,
    alpha: float,
    out_dim: int | None = None,
    tail_tol: float = 1e-9,
) -> OutcomeDistribution:
    """Joint photon-counting distribution P(n1, n2 | alpha) at the detectors.

    Grows the outcome cutoff until the table's missing mass is below
    ``tail_tol``. Dark counts do not apply here (they are an on-off detector
    property); idler input loss routes through the dense fallback.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"absorption must lie in [0, 1], got {alpha}")
    if cfg.eta_i < 1.0:
        source = geometric_required_cutoff(cfg.n_a / (cfg.n_a + 1.0), tail_tol / 10.0)
        return qas_full_distribution_dense(
            cfg, alpha, source_cutoff=source, out_cutoff=source + 16, tail_tol=tail_tol
        )

    alpha_eff, n_eff = _effective_signal_channel(cfg, alpha)
    ctol = tail_tol / 16.0
    C = geometric_required_cutoff(cfg.n_a / (cfg.n_a + 1.0), ctol) if cfg.n_a > 0 else 1
    F = geometric_required_cutoff(n_eff / (n_eff + 1.0), ctol) if n_eff > 0 else 1

    if out_dim is None:
        out = qas_output_state(cfg, alpha)
        n_max = max(
            gaussian_core.mean_photon(out, SIGNAL), gaussian_core.mean_photon(out, IDLER)
        )
        out_dim = geometric_required_cutoff(n_max / (n_max + 1.0), ctol) + 8 if n_max > 0 else 8
        out_dim = max(out_dim, 8)
        for _ in range(8):
            table = _qas_table_sparse(
                cfg.n_a, alpha_eff, n_eff, cfg.opa_params(), out_dim, C, F
            )
            if 1.0 - table.sum() <= tail_tol:
                break
            out_dim = int(out_dim * 1.4) + 4
        else:
            raise TruncationError(
                f"joint table misses {1.0 - table.sum():.3e} mass at cutoff {out_dim}"
            )
    else:
        table = _qas_table_sparse(cfg.n_a, alpha_eff, n_eff, cfg.opa_params(), out_dim, C, F)
        if 1.0 - table.sum() > tail_tol:
            raise TruncationError(
                f"joint table misses {1.0 - table.sum():.3e} mass at cutoff {out_dim}"
            )
    return OutcomeDistribution.from_pair_table(table)


def qas_post_loss_distribution(
    cfg: PipelineConfig, alpha: float, source_cutoff: int, env_cutoff: int
) -> np.ndarray:
    """Joint counting table of the signal-idler state before the OPA.

    Conservation pins every environment index, so each entry is a plain sum
    over the purifier occupation; no matrix products at all.
    """
    alpha_eff, n_eff = _effective_signal_channel(cfg, alpha)
    C, F = source_cutoff, env_cutoff
    c2 = tmsv_amplitudes(cfg.n_a, C) ** 2
    t = thermal_weights(n_eff, F)
    bs = beam_splitter_blocks(loss_mixing_angle(alpha_eff), C - 1 + F - 1)
    s = np.arange(C + F - 1)
    n = np.arange(C)
    f = np.arange(F)
    K = n[None, :, None] + f[None, None, :]
    amp2 = bs[K, s[:, None, None], n[None, :, None]] ** 2
    return np.einsum("snf,n,f->sn", amp2, c2, t)


def qas_zpp_fock(
    cfg: PipelineConfig,
    alpha: float,
    source_cutoff: int = 40,
    env_cutoff: int = 40,
) -> float:
    """P({0,0} | alpha) from the Fock oracle alone, without the full table.

    Only the zero-difference OPA block's first row enters, which makes this
    cheap enough for dense cross-check grids against the Gaussian route.
    """
    if cfg.eta_i < 1.0:
        raise NotImplementedError("fast Fock ZPP supports ideal idler input only")
    alpha_eff, n_eff = _effective_signal_channel(cfg, alpha)
    C, F = source_cutoff, env_cutoff
    c = tmsv_amplitudes(cfg.n_a, C)
    t_sqrt = np.sqrt(thermal_weights(n_eff, F))
    bs = beam_splitter_blocks(loss_mixing_angle(alpha_eff), C - 1 + F - 1)
    n = np.arange(C)
    f = np.arange(F)
    W = t_sqrt[:, None] * c[None, :] * bs[n[None, :] + f[:, None], n[None, :], n[None, :]]
    opa = cfg.opa_params()
    ladder = C + fock_core.SQUEEZE_BUFFER
    row0 = two_mode_squeeze_block(opa.r, opa.phase, 0, ladder)[0, :C]
    amps = W @ row0
    return float(np.real(amps @ amps.conj()))


def qas_full_distribution_dense(
    cfg: PipelineConfig,
    alpha: float,
    source_cutoff: int = 24,
    out_cutoff: int = 36,
    tail_tol: float = 1e-9,
) -> OutcomeDistribution:
    """Joint counting table via generic density-matrix operations.

    Slower than the sparse route but fully general (handles idler input
    loss); also serves as an independent check that the generic operations
    compose into the same pipeline.
    """
    state = fock_core.tmsv_fock(cfg.n_a, source_cutoff, tail_tol=tail_tol)
    if cfg.eta_s < 1.0:
        state = fock_core.apply_loss_fock(state, SIGNAL, 1.0 - cfg.eta_s, 0.0, tail_tol=tail_tol)
    if cfg.eta_i < 1.0:
        state = fock_core.apply_loss_fock(state, IDLER, 1.0 - cfg.eta_i, 0.0, tail_tol=tail_tol)
    state = fock_core.apply_loss_fock(state, SIGNAL, alpha, cfg.n_th, tail_tol=tail_tol)
    state = fock_core.pad_fock(state, (out_cutoff, out_cutoff))
    state = fock_core.apply_two_mode_squeeze_fock(
        state, SIGNAL, IDLER, cfg.opa_params(), tail_tol=tail_tol
    )
    return fock_core.joint_number_distribution(state)


def cas_full_distribution(
    n_a: float, alpha: float, n_th: float, cutoff: int | None = None, tail_tol: float = 1e-10
) -> OutcomeDistribution:
    """Photon-number distribution of the CAS output, via the Fock oracle."""
    if cutoff is None:
        # Coherent part needs ~mean + O(sqrt(mean) log(1/tol)) levels; the
        # thermal admixture adds a geometric tail that second moments weight
        # by n^2, so size for that explicitly.
        mean_out = (1.0 - alpha) * n_a + alpha * n_th
        geometric = fock_core.geometric_moment_cutoff(
            mean_out / (mean_out + 1.0), tail_tol / 10.0
        )
        cutoff = int(n_a + 12.0 * math.sqrt(n_a + 1.0)) + geometric + 12
    env_cutoff = fock_core.geometric_moment_cutoff(n_th / (n_th + 1.0), tail_tol / 10.0)
    amplitudes = fock_core.coherent_amplitudes(n_a, cutoff)
    tail = float(1.0 - amplitudes @ amplitudes)
    if tail > tail_tol:
        raise TruncationError(f"coherent tail {tail:.3e} exceeds tolerance at cutoff {cutoff}")
    probs = fock_core.lossy_pure_number_distribution(
        amplitudes, alpha, n_th, out_dim=cutoff, env_cutoff=env_cutoff
    )
    return OutcomeDistribution(support=list(range(cutoff)), probs=probs)


def dilated_pipeline_vector(
    cfg: PipelineConfig,
    alpha: float,
    source_cutoff: int,
    env_cutoff: int,
) -> np.ndarray:
    """Pure state of the pipeline with its loss environments kept coherent.

    The thermal-loss channel is realized inside the pipeline as a beam
    splitter onto a purified thermal ancilla; keeping (ancilla, purifier)
    instead of tracing them out yields the pure dilated family whose overlap
    defines the channel's purified quantum Fisher information. Indices are
    (signal', source n, purifier f); the ancilla occupation is fixed by the
    conserved total as n + f - signal'.
    """
    if cfg.eta_i < 1.0:
        raise NotImplementedError("dilated vector supports ideal idler input only")
    alpha_eff, n_eff = _effective_signal_channel(cfg, alpha)
    C, F = source_cutoff, env_cutoff
    c = tmsv_amplitudes(cfg.n_a, C)
    t_sqrt = np.sqrt(thermal_weights(n_eff, F))
    theta = loss_mixing_angle(alpha_eff)
    bs = beam_splitter_blocks(theta, C - 1 + F - 1)
    s_dim = C + F - 1
    s = np.arange(s_dim)
    n = np.arange(C)
    f = np.arange(F)
    # psi[s', n, f] = c_n t_f <s', n+f-s' | BS | n, f>, zero when s' > n+f.
    K = n[None, :, None] + f[None, None, :]
    psi = c[None, :, None] * t_sqrt[None, None, :] * bs[K, s[:, None, None], n[None, :, None]]
    return psi

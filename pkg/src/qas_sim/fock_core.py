"""Truncated number-basis density-matrix simulator.

This module is the brute-force oracle for photon-counting statistics: every
probability produced by the exact Gaussian path has an independent check here,
computed from explicit density matrices in the tensor-product Fock basis.

Two structural facts keep the linear algebra honest and fast:

* The beam splitter that realizes the thermal-loss channel conserves the
  total photon number of the (mode, environment) pair, so its unitary is
  block-diagonal over that total. Each block is exponentiated exactly; no
  global dense matrix exponential is ever formed.
* The two-mode squeezer conserves the photon-number *difference* of its two
  modes, so the same trick applies with difference blocks.

Truncation is tracked explicitly: every state carries ``tail_bound``, an
upper estimate of the probability mass ignored by its cutoffs, and operations
raise :class:`TruncationError` when their own contribution exceeds the
requested tolerance instead of silently degrading.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg as sla
from scipy import stats

from .errors import TruncationError
from .gaussian_core import SqueezeParams
from .outcomes import OutcomeDistribution

__all__ = [
    "FockDensityMatrix",
    "DEFAULT_TAIL_TOL",
    "tmsv_fock",
    "coherent_fock",
    "thermal_fock",
    "apply_loss_fock",
    "apply_two_mode_squeeze_fock",
    "joint_number_distribution",
    "number_distribution",
    "fidelity",
    "pad_fock",
    "mean_photon_fock",
    "photon_number_variance_fock",
]

DEFAULT_TAIL_TOL = 1e-10

#: Extra levels granted to the two-mode squeezer before re-truncation.
SQUEEZE_BUFFER = 12


@dataclass
class FockDensityMatrix:
    """Density operator on a truncated multimode Fock space.

    ``dims`` are the per-mode truncation dimensions (occupations 0..dim-1);
    ``matrix`` is the (prod dims) x (prod dims) complex matrix in the
    tensor-product basis with the last mode varying fastest. ``tail_bound``
    accumulates an upper estimate of the probability mass lost to truncation
    over the state's history.
    """

    dims: tuple[int, ...]
    matrix: np.ndarray
    tail_bound: float = 0.0

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        d = int(np.prod(self.dims))
        self.matrix = np.asarray(self.matrix, dtype=complex)
        if self.matrix.shape != (d, d):
            raise ValueError(f"matrix shape {self.matrix.shape} does not match dims {self.dims}")

    @property
    def n_modes(self) -> int:
        return len(self.dims)

    def trace(self) -> float:
        return float(self.matrix.trace().real)

    def probabilities(self) -> np.ndarray:
        """Joint occupation probabilities, shaped like ``dims`` (clipped at 0)."""
        p = np.real(np.diagonal(self.matrix)).reshape(self.dims)
        return np.clip(p, 0.0, None)

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T)).min())


# ---------------------------------------------------------------------------
# Closed-form source states
# ---------------------------------------------------------------------------


def geometric_required_cutoff(ratio: float, tol: float) -> int:
    """Smallest cutoff with geometric tail ratio**cutoff <= tol."""
    if ratio <= 0.0:
        return 1
    return max(1, math.ceil(math.log(tol) / math.log(ratio)))


def geometric_moment_cutoff(ratio: float, tol: float) -> int:
    """Cutoff keeping the n^2-weighted geometric tail below tol.

    Second moments weight the tail by occupation squared, so plain mass
    bounds undershoot; this iterates k until ratio**k * k^2 <= tol.
    """
    if ratio <= 0.0:
        return 1
    k = geometric_required_cutoff(ratio, tol)
    while ratio**k * k * k > tol:
        k = int(k * 1.25) + 1
    return k


def tmsv_amplitudes(n_a: float, cutoff: int) -> np.ndarray:
    """Number-basis amplitudes c_n of the two-mode squeezed vacuum.

    Only the perfectly correlated |n, n> components are populated:
    c_n = (-tanh r)^n / cosh r with n_a = sinh^2 r (source phase 0).
    """
    r = math.asinh(math.sqrt(n_a))
    n = np.arange(cutoff)
    return (-math.tanh(r)) ** n / math.cosh(r)


def tmsv_fock(n_a: float, cutoff: int, tail_tol: float = DEFAULT_TAIL_TOL) -> FockDensityMatrix:
    """Two-mode squeezed vacuum with n_a photons per mode, as a density matrix."""
    if n_a < 0:
        raise ValueError(f"mean photon number must be non-negative, got {n_a}")
    q = n_a / (n_a + 1.0)
    tail = q**cutoff
    if tail > tail_tol:
        raise TruncationError(
            f"TMSV tail {tail:.3e} exceeds tolerance {tail_tol:.1e} at cutoff {cutoff}",
            required_cutoff=geometric_required_cutoff(q, tail_tol),
        )
    c = tmsv_amplitudes(n_a, cutoff)
    psi = np.zeros((cutoff, cutoff), dtype=complex)
    np.fill_diagonal(psi, c)
    psi = psi.ravel()
    return FockDensityMatrix(dims=(cutoff, cutoff), matrix=np.outer(psi, psi.conj()), tail_bound=tail)


def coherent_amplitudes(n_a: float, cutoff: int) -> np.ndarray:
    """Number-basis amplitudes of a coherent state with n_a mean photons.

    exp(-n_a/2) * beta^n / sqrt(n!) with beta = sqrt(n_a), evaluated in log
    space so large n_a stays finite.
    """
    if n_a == 0.0:
        amp = np.zeros(cutoff)
        amp[0] = 1.0
        return amp
    n = np.arange(cutoff)
    logs = -0.5 * n_a + 0.5 * (n * math.log(n_a) - np.cumsum(np.log(np.maximum(n, 1))))
    return np.exp(logs)


def coherent_fock(n_a: float, cutoff: int, tail_tol: float = DEFAULT_TAIL_TOL) -> FockDensityMatrix:
    """Coherent state with n_a mean photons (Poisson counting statistics)."""
    if n_a < 0:
        raise ValueError(f"mean photon number must be non-negative, got {n_a}")
    tail = float(stats.poisson.sf(cutoff - 1, n_a))
    if tail > tail_tol:
        need = int(stats.poisson.isf(tail_tol, n_a)) + 2
        raise TruncationError(
            f"Poisson tail {tail:.3e} exceeds tolerance {tail_tol:.1e} at cutoff {cutoff}",
            required_cutoff=need,
        )
    amp = coherent_amplitudes(n_a, cutoff)
    return FockDensityMatrix(dims=(cutoff,), matrix=np.outer(amp, amp), tail_bound=tail)


def thermal_weights(n_th: float, cutoff: int) -> np.ndarray:
    """Geometric occupation probabilities of a thermal state."""
    if n_th < 0:
        raise ValueError(f"thermal occupation must be non-negative, got {n_th}")
    if n_th == 0.0:
        w = np.zeros(cutoff)
        w[0] = 1.0
        return w
    q = n_th / (n_th + 1.0)
    return (1.0 - q) * q ** np.arange(cutoff)


def thermal_fock(n_th: float, cutoff: int, tail_tol: float = DEFAULT_TAIL_TOL) -> FockDensityMatrix:
    """Thermal state with mean occupation n_th."""
    q = n_th / (n_th + 1.0) if n_th > 0 else 0.0
    tail = q**cutoff if n_th > 0 else 0.0
    if tail > tail_tol:
        raise TruncationError(
            f"thermal tail {tail:.3e} exceeds tolerance {tail_tol:.1e} at cutoff {cutoff}",
            required_cutoff=geometric_required_cutoff(q, tail_tol),
        )
    return FockDensityMatrix(
        dims=(cutoff,), matrix=np.diag(thermal_weights(n_th, cutoff)).astype(complex), tail_bound=tail
    )


# ---------------------------------------------------------------------------
# Blockwise unitaries
# ---------------------------------------------------------------------------


@lru_cache(maxsize=4)
def beam_splitter_blocks(theta: float, k_max: int) -> np.ndarray:
    """Unitary blocks of exp(theta (a^dag e - a e^dag)), one per total photon number.

    Returns a padded array ``B[K, s_out, s_in]`` where block K acts on the
    basis |s, K - s> for s = 0..K. Each block is the exact exponential of the
    (K+1)-dimensional generator, so the unitary is exact on every block; mode
    cutoffs only enter later, when amplitudes are gathered.
    """
    out = np.zeros((k_max + 1, k_max + 1, k_max + 1))
    out[0, 0, 0] = 1.0
    for K in range(1, k_max + 1):
        s = np.arange(K)
        g = theta * np.sqrt((s + 1.0) * (K - s))
        G = np.zeros((K + 1, K + 1))
        G[s + 1, s] = g
        G[s, s + 1] = -g
        out[K, : K + 1, : K + 1] = sla.expm(G)
    return out


def two_mode_squeeze_block(r: float, phase: float, delta: int, dim: int) -> np.ndarray:
    """Unitary block of exp(xi^* ab - xi a^dag b^dag) at photon-number difference delta.

    The block basis is |k + delta, k> for delta >= 0 (mirror image for the
    negative differences; the generator is symmetric under swapping the two
    modes), with k = 0..dim-1. Entry [k_out, k_in] is the transition
    amplitude.
    """
    xi = r * complex(math.cos(phase), math.sin(phase))
    k = np.arange(dim - 1)
    low = np.sqrt((k + 1.0 + abs(delta)) * (k + 1.0))
    G = np.zeros((dim, dim), dtype=complex)
    G[k, k + 1] = np.conj(xi) * low
    G[k + 1, k] = -xi * low
    return sla.expm(G)


@lru_cache(maxsize=4)
def two_mode_squeeze_block_family(r: float, phase: float, dim: int) -> dict[int, np.ndarray]:
    """All difference blocks of the squeezer on a dim x dim two-mode space."""
    return {d: two_mode_squeeze_block(r, phase, d, dim - d) for d in range(dim)}


def loss_mixing_angle(alpha: float) -> float:
    """Beam-splitter angle with intensity transmission 1 - alpha."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"absorption must lie in [0, 1], got {alpha}")
    return math.acos(math.sqrt(1.0 - alpha))


# ---------------------------------------------------------------------------
# Thermal-loss channel: ancilla + beam splitter + partial trace
# ---------------------------------------------------------------------------


@lru_cache(maxsize=32)
def _loss_transfer_diagonals(alpha: float, n_th: float, dim: int, env_cutoff: int):
    """Per-shift transfer planes T_j of the thermal-loss channel on one mode.

    The channel rho -> Tr_env[U (rho x rho_th) U^dag] is phase covariant, so
    its action decomposes over the coherence shift j:

        rho'[s, s'] = sum_j T_j[s, s'] * rho[s + j, s' + j].

    T_j is assembled from the beam-splitter blocks and the thermal weights of
    the ancilla; the ancilla mode itself is never materialized.
    """
    theta = loss_mixing_angle(alpha)
    k_max = dim - 1 + env_cutoff - 1
    blocks = beam_splitter_blocks(theta, k_max)
    t = thermal_weights(n_th, env_cutoff)
    planes = {}
    for j in range(-(env_cutoff - 1), dim):
        T = np.zeros((dim, dim))
        s_lo = max(0, -j)
        s_hi = dim - max(0, j)
        s = np.arange(s_lo, s_hi)
        if s.size == 0:
            continue
        for m in range(env_cutoff):
            if m + j < 0 or t[m] == 0.0:
                continue
            u = blocks[s + m + j, s, s + j]
            T[np.ix_(s, s)] += t[m] * np.outer(u, u)
        planes[j] = T
    return planes


def apply_loss_fock(
    state: FockDensityMatrix,
    mode: int,
    alpha: float,
    n_th: float,
    env_cutoff: int | None = None,
    tail_tol: float = DEFAULT_TAIL_TOL,
) -> FockDensityMatrix:
    """Send one mode through the thermal-loss channel of absorption alpha.

    Realized by adjoining a thermal ancilla, applying the beam splitter of
    transmission 1 - alpha between the mode and the ancilla, and tracing the
    ancilla out. Output mass pushed above the mode's cutoff appears as trace
    loss and is added to ``tail_bound``; the thermal ancilla's own geometric
    tail is accounted for analytically.
    """
    if not 0 <= mode < state.n_modes:
        raise ValueError(f"mode index {mode} out of range")
    if n_th < 0:
        raise ValueError(f"thermal occupation must be non-negative, got {n_th}")
    dim = state.dims[mode]
    if env_cutoff is None:
        # Headroom factor 4 leaves room for the output-truncation trace loss
        # within the same tolerance budget.
        q = n_th / (n_th + 1.0) if n_th > 0 else 0.0
        env_cutoff = geometric_required_cutoff(q, tail_tol / 4.0) if n_th > 0 else 1
    env_tail = (n_th / (n_th + 1.0)) ** env_cutoff if n_th > 0 else 0.0

    if alpha == 0.0:
        return FockDensityMatrix(state.dims, state.matrix.copy(), state.tail_bound)

    planes = _loss_transfer_diagonals(alpha, n_th, dim, env_cutoff)

    # View rho with the target mode's ket/bra axes pulled to the front.
    other = [d for i, d in enumerate(state.dims) if i != mode]
    rest = int(np.prod(other)) if other else 1
    order = (
        [mode]
        + [a for a in range(state.n_modes) if a != mode]
        + [state.n_modes + mode]
        + [a + state.n_modes for a in range(state.n_modes) if a != mode]
    )
    rho = state.matrix.reshape(state.dims + state.dims).transpose(order)
    rho = np.ascontiguousarray(rho).reshape(dim, rest, dim, rest)

    out = np.zeros_like(rho)
    for j, T in planes.items():
        s_lo = max(0, -j)
        s_hi = dim - max(0, j)
        out[s_lo:s_hi, :, s_lo:s_hi, :] += (
            T[s_lo:s_hi, s_lo:s_hi][:, None, :, None]
            * rho[s_lo + j : s_hi + j, :, s_lo + j : s_hi + j, :]
        )

    perm_shape = tuple([dim] + other + [dim] + other)
    out = out.reshape(perm_shape).transpose(np.argsort(order)).reshape(state.matrix.shape)

    trace_in = state.trace()
    result = FockDensityMatrix(state.dims, out, state.tail_bound)
    trace_loss = max(0.0, trace_in - result.trace())
    contribution = env_tail + trace_loss
    if contribution > tail_tol:
        raise TruncationError(
            f"loss channel lost {trace_loss:.3e} trace (env tail {env_tail:.3e}) "
            f"at cutoff {dim}; exceeds tolerance {tail_tol:.1e}"
        )
    result.tail_bound += contribution
    return result


# ---------------------------------------------------------------------------
# Two-mode squeezing on density matrices
# ---------------------------------------------------------------------------


def _difference_block_indices(dim: int):
    """Flat-index lists of the |k+d, k> ladders of a dim x dim two-mode space."""
    idx = {}
    for d in range(-(dim - 1), dim):
        k = np.arange(dim - abs(d))
        rows = k + max(d, 0)
        cols = k + max(-d, 0)
        idx[d] = rows * dim + cols
    return idx


def apply_two_mode_squeeze_fock(
    state: FockDensityMatrix,
    mode_i: int,
    mode_j: int,
    params: SqueezeParams,
    buffer: int = SQUEEZE_BUFFER,
    tail_tol: float = DEFAULT_TAIL_TOL,
) -> FockDensityMatrix:
    """Apply a two-mode squeezer, computed on a buffered space then re-truncated.

    Supported for two-mode states (the only case the pipeline needs). The
    unitary is applied block-by-block over the conserved photon-number
    difference; the buffer absorbs the squeezer's spread before the state is
    cut back to its original dims, and the re-truncation trace loss is the
    operation's tail contribution.
    """
    if state.n_modes != 2:
        raise ValueError("two-mode squeeze is implemented for two-mode states")
    if {mode_i, mode_j} != {0, 1}:
        raise ValueError(f"mode indices must be 0 and 1, got {mode_i}, {mode_j}")
    if mode_i == mode_j:
        raise ValueError("two-mode squeeze needs two distinct modes")

    d0, d1 = state.dims
    big = max(d0, d1) + buffer
    rho = np.zeros((big, big, big, big), dtype=complex)
    rho[:d0, :d1, :d0, :d1] = state.matrix.reshape(d0, d1, d0, d1)
    rho = rho.reshape(big * big, big * big)

    # The generator is symmetric under mode exchange, so (mode_i, mode_j)
    # ordering does not matter beyond index bookkeeping.
    idx = _difference_block_indices(big)
    family = two_mode_squeeze_block_family(params.r, params.phase, big)
    unitaries = {d: family[abs(d)] for d in idx}
    out = np.zeros_like(rho)
    for da, ixa in idx.items():
        Ua = unitaries[da]
        for db, ixb in idx.items():
            Ub = unitaries[db]
            out[np.ix_(ixa, ixb)] = Ua @ rho[np.ix_(ixa, ixb)] @ Ub.conj().T

    out = out.reshape(big, big, big, big)[:d0, :d1, :d0, :d1].reshape(d0 * d1, d0 * d1)
    trace_in = state.trace()
    result = FockDensityMatrix(state.dims, out, state.tail_bound)
    trace_loss = max(0.0, trace_in - result.trace())
    if trace_loss > tail_tol:
        raise TruncationError(
            f"squeeze re-truncation lost {trace_loss:.3e} trace at dims {state.dims}; "
            f"exceeds tolerance {tail_tol:.1e}; increase cutoffs or buffer"
        )
    result.tail_bound += trace_loss
    return result


# ---------------------------------------------------------------------------
# Read-outs
# ---------------------------------------------------------------------------


def joint_number_distribution(state: FockDensityMatrix) -> OutcomeDistribution:
    """Joint photon-number table P(n1, n2) of a two-mode state."""
    if state.n_modes != 2:
        raise ValueError("joint distribution requires a two-mode state")
    p = np.real(np.diagonal(state.matrix)).reshape(state.dims)
    if p.min() < -1e-12:
        raise ValueError(f"negative probability {p.min():.3e} beyond tolerance")
    return OutcomeDistribution.from_pair_table(np.clip(p, 0.0, None))


def number_distribution(state: FockDensityMatrix) -> OutcomeDistribution:
    """Photon-number distribution of a single-mode state."""
    if state.n_modes != 1:
        raise ValueError("number distribution requires a single-mode state")
    p = np.clip(np.real(np.diagonal(state.matrix)), 0.0, None)
    return OutcomeDistribution(support=list(range(state.dims[0])), probs=p)


def mean_photon_fock(state: FockDensityMatrix, mode: int) -> float:
    """<n> of one mode from the truncated distribution."""
    p = np.real(np.diagonal(state.matrix)).reshape(state.dims)
    n = np.arange(state.dims[mode])
    marg = np.moveaxis(p, mode, 0).reshape(state.dims[mode], -1).sum(axis=1)
    return float(n @ marg)


def photon_number_variance_fock(state: FockDensityMatrix, mode: int) -> float:
    """Var(n) of one mode from the truncated distribution."""
    p = np.real(np.diagonal(state.matrix)).reshape(state.dims)
    n = np.arange(state.dims[mode])
    marg = np.moveaxis(p, mode, 0).reshape(state.dims[mode], -1).sum(axis=1)
    m1 = n @ marg
    return float(n**2 @ marg - m1**2)


def lossy_pure_number_distribution(
    amplitudes: np.ndarray,
    alpha: float,
    n_th: float,
    out_dim: int,
    env_cutoff: int,
) -> np.ndarray:
    """Counting distribution of a pure single-mode state after thermal loss.

    For a pure input the beam-splitter output amplitude onto |n, e> draws on
    exactly one input level per ancilla occupation, so the whole read-out is
    an elementwise gather over the unitary blocks: no density matrix is ever
    formed. Equivalent to apply_loss_fock + number_distribution, much faster.
    """
    psi = np.asarray(amplitudes, dtype=complex)
    dim_in = psi.size
    t = thermal_weights(n_th, env_cutoff)
    blocks = beam_splitter_blocks(loss_mixing_angle(alpha), dim_in - 1 + env_cutoff - 1)
    k_max = blocks.shape[0] - 1
    n = np.arange(out_dim)[:, None, None]
    e = np.arange(k_max + 1)[None, :, None]
    m = np.arange(env_cutoff)[None, None, :]
    src = n + e - m
    valid = (src >= 0) & (src < dim_in) & (n + e <= k_max)
    src_c = np.where(valid, src, 0)
    amp = blocks[np.minimum(n + e, k_max), np.broadcast_to(n, src.shape), src_c] * np.where(
        valid, psi[src_c], 0.0
    )
    return np.einsum("nem,nem,m->n", amp, amp.conj(), t).real


def pad_fock(state: FockDensityMatrix, dims: tuple[int, ...]) -> FockDensityMatrix:
    """Embed the state in a larger Fock space (cutoffs may only grow)."""
    if len(dims) != state.n_modes or any(d < s for d, s in zip(dims, state.dims)):
        raise ValueError(f"cannot pad dims {state.dims} to {dims}")
    big = np.zeros(tuple(dims) + tuple(dims), dtype=complex)
    sl = tuple(slice(0, d) for d in state.dims)
    big[sl + sl] = state.matrix.reshape(state.dims + state.dims)
    d = int(np.prod(dims))
    return FockDensityMatrix(tuple(dims), big.reshape(d, d), state.tail_bound)


def _psd_sqrt(matrix: np.ndarray, psd_tol: float, label: str) -> np.ndarray:
    w, V = np.linalg.eigh(0.5 * (matrix + matrix.conj().T))
    if w.min() < -psd_tol:
        raise ValueError(f"{label} has eigenvalue {w.min():.3e} below -{psd_tol:.1e}")
    # Zero out eigenvalue noise at the numerical floor: sqrt() would amplify
    # O(1e-17) residues of rank-deficient states to O(1e-9) contributions.
    w = np.where(w > w.max() * 1e-14, w, 0.0)
    return (V * np.sqrt(w)) @ V.conj().T


def fidelity(rho: FockDensityMatrix, sigma: FockDensityMatrix, psd_tol: float = 1e-9) -> float:
    """Uhlmann fidelity F = (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.

    Evaluated as the squared trace norm of sqrt(rho) sqrt(sigma), which is
    the same quantity but keeps full precision for nearly-singular states
    (singular values enter linearly instead of under a square root).
    Eigenvalues in [-psd_tol, 0) are treated as zero; anything more negative
    means the input is not a state and raises.
    """
    if rho.dims != sigma.dims:
        raise ValueError(f"dimension mismatch: {rho.dims} vs {sigma.dims}")
    product = _psd_sqrt(rho.matrix, psd_tol, "rho") @ _psd_sqrt(sigma.matrix, psd_tol, "sigma")
    return float(np.linalg.svd(product, compute_uv=False).sum() ** 2)

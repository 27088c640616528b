"""Exact Gaussian (covariance-matrix) representation of the optical pipeline.

Conventions, fixed repo-wide:
    x = a + a^dag,  p = -i (a - a^dag),  so [x, p] = 2i and the vacuum
    covariance matrix is the identity. Quadratures are ordered
    (x_1, p_1, x_2, p_2, ...). A state is (mean vector, covariance matrix).

Every state reachable by the pipeline (two-mode squeezed vacuum, coherent
input, thermal-loss output, anti-squeezed output) is Gaussian, so first and
second moments, photon-number statistics, and zero-photon probabilities are
all exact here, with no Fock cutoff. The truncated number-basis simulator in
``fock_core`` serves as the independent brute-force oracle for these values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import NumericFailureError

__all__ = [
    "GaussianState",
    "SqueezeParams",
    "vacuum",
    "apply_two_mode_squeeze",
    "apply_thermal_loss",
    "apply_displacement",
    "mean_photon",
    "photon_number_variance",
    "vacuum_probability",
    "reduced_state",
    "symplectic_form",
    "two_mode_squeeze_symplectic",
]


@dataclass(frozen=True)
class SqueezeParams:
    """Magnitude and phase of a two-mode squeeze, xi = r * exp(i * phase)."""

    r: float
    phase: float = 0.0

    def __post_init__(self):
        if self.r < 0:
            raise ValueError(f"squeeze magnitude must be non-negative, got {self.r}")

    @classmethod
    def from_mean_photons(cls, n_a: float, phase: float = 0.0) -> "SqueezeParams":
        """Squeeze magnitude giving n_a = sinh^2(r) photons per mode."""
        if n_a < 0:
            raise ValueError(f"mean photon number must be non-negative, got {n_a}")
        return cls(r=math.asinh(math.sqrt(n_a)), phase=phase)

    @property
    def mean_photons(self) -> float:
        """Photons per mode when acting on vacuum: sinh^2(r)."""
        return math.sinh(self.r) ** 2

    def inverse(self) -> "SqueezeParams":
        """Parameters of the inverse squeeze (same r, phase shifted by pi)."""
        return SqueezeParams(r=self.r, phase=self.phase + math.pi)


@dataclass
class GaussianState:
    """Mean vector and covariance matrix of an N-mode bosonic state."""

    n_modes: int
    mean: NDArray[np.float64]
    cov: NDArray[np.float64]

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.cov = np.asarray(self.cov, dtype=float)
        d = 2 * self.n_modes
        if self.mean.shape != (d,):
            raise ValueError(f"mean must have shape ({d},), got {self.mean.shape}")
        if self.cov.shape != (d, d):
            raise ValueError(f"cov must have shape ({d}, {d}), got {self.cov.shape}")

    def check_mode(self, mode: int) -> None:
        if not 0 <= mode < self.n_modes:
            raise ValueError(f"mode index {mode} out of range for {self.n_modes} modes")

    def symmetry_defect(self) -> float:
        return float(np.max(np.abs(self.cov - self.cov.T)))

    def physicality_defect(self) -> float:
        """Most negative eigenvalue of cov + i*Omega (0 for physical states)."""
        omega = symplectic_form(self.n_modes)
        ev = np.linalg.eigvalsh(self.cov + 1j * omega)
        return float(min(ev.min(), 0.0))


def symplectic_form(n_modes: int) -> NDArray[np.float64]:
    """Block-diagonal symplectic form Omega for the (x, p) ordering."""
    block = np.array([[0.0, 1.0], [-1.0, 0.0]])
    omega = np.zeros((2 * n_modes, 2 * n_modes))
    for k in range(n_modes):
        omega[2 * k : 2 * k + 2, 2 * k : 2 * k + 2] = block
    return omega


def vacuum(n_modes: int) -> GaussianState:
    """N-mode vacuum: zero mean, identity covariance."""
    if n_modes < 1:
        raise ValueError(f"need at least one mode, got {n_modes}")
    return GaussianState(n_modes=n_modes, mean=np.zeros(2 * n_modes), cov=np.eye(2 * n_modes))


def two_mode_squeeze_symplectic(params: SqueezeParams) -> NDArray[np.float64]:
    """4x4 symplectic matrix of exp(xi^* a b - xi a^dag b^dag) on (x1,p1,x2,p2).

    Heisenberg picture: a -> a cosh r - e^{i phase} b^dag sinh r, and the
    same with a and b exchanged.
    """
    c, s = math.cos(params.phase), math.sin(params.phase)
    ch, sh = math.cosh(params.r), math.sinh(params.r)
    return np.array(
        [
            [ch, 0.0, -sh * c, -sh * s],
            [0.0, ch, -sh * s, sh * c],
            [-sh * c, -sh * s, ch, 0.0],
            [-sh * s, sh * c, 0.0, ch],
        ]
    )


def _embed_two_mode(n_modes: int, mode_i: int, mode_j: int, block: np.ndarray) -> np.ndarray:
    """Expand a 4x4 two-mode matrix to the full 2N x 2N identity-padded form."""
    full = np.eye(2 * n_modes)
    idx = [2 * mode_i, 2 * mode_i + 1, 2 * mode_j, 2 * mode_j + 1]
    full[np.ix_(idx, idx)] = block
    return full


def apply_two_mode_squeeze(
    state: GaussianState, mode_i: int, mode_j: int, params: SqueezeParams
) -> GaussianState:
    """Apply a two-mode squeezer between two modes of the state."""
    state.check_mode(mode_i)
    state.check_mode(mode_j)
    if mode_i == mode_j:
        raise ValueError("two-mode squeeze needs two distinct modes")
    S = _embed_two_mode(state.n_modes, mode_i, mode_j, two_mode_squeeze_symplectic(params))
    return GaussianState(state.n_modes, S @ state.mean, S @ state.cov @ S.T)


def apply_thermal_loss(
    state: GaussianState, mode: int, alpha: float, n_th: float
) -> GaussianState:
    """Mix one mode with a thermal environment: a -> sqrt(1-alpha) a + sqrt(alpha) e.

    ``alpha`` is the absorbed fraction; the environment mode carries ``n_th``
    photons on average. alpha = 0 is the identity, alpha = 1 swaps the mode
    for a thermal state.
    """
    state.check_mode(mode)
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"absorption must lie in [0, 1], got {alpha}")
    if n_th < 0:
        raise ValueError(f"thermal occupation must be non-negative, got {n_th}")
    d = 2 * state.n_modes
    sl = slice(2 * mode, 2 * mode + 2)
    X = np.eye(d)
    X[sl, sl] = math.sqrt(1.0 - alpha) * np.eye(2)
    Y = np.zeros((d, d))
    Y[sl, sl] = alpha * (2.0 * n_th + 1.0) * np.eye(2)
    return GaussianState(state.n_modes, X @ state.mean, X @ state.cov @ X.T + Y)


def apply_displacement(
    state: GaussianState, mode: int, amp_x: float, amp_p: float
) -> GaussianState:
    """Shift the mean of one mode; covariance is untouched.

    A coherent state with n photons is vacuum displaced by amp_x = 2 sqrt(n)
    (mean photon number (amp_x^2 + amp_p^2) / 4 in this convention).
    """
    state.check_mode(mode)
    mean = state.mean.copy()
    mean[2 * mode] += amp_x
    mean[2 * mode + 1] += amp_p
    return GaussianState(state.n_modes, mean, state.cov.copy())


def reduced_state(state: GaussianState, modes: list[int]) -> GaussianState:
    """Marginal state of a subset of modes (partial trace over the rest)."""
    for m in modes:
        state.check_mode(m)
    idx = [q for m in modes for q in (2 * m, 2 * m + 1)]
    return GaussianState(len(modes), state.mean[idx], state.cov[np.ix_(idx, idx)])


def mean_photon(state: GaussianState, mode: int) -> float:
    """<a^dag a> of one mode from the covariance block and mean."""
    state.check_mode(mode)
    sl = slice(2 * mode, 2 * mode + 2)
    V = state.cov[sl, sl]
    d = state.mean[sl]
    return float((V[0, 0] + V[1, 1] - 2.0) / 4.0 + (d[0] ** 2 + d[1] ** 2) / 4.0)


def photon_number_variance(state: GaussianState, mode: int) -> float:
    """Variance of a^dag a on one mode, via Wick expansion of the moments.

    Exact for any Gaussian state: Poisson (= <n>) for coherent states,
    n_th (n_th + 1) for thermal states. No Fock cutoff is involved; the
    number-basis oracle cross-checks this.
    """
    state.check_mode(mode)
    sl = slice(2 * mode, 2 * mode + 2)
    V = state.cov[sl, sl]
    d = state.mean[sl]
    # Fluctuation moments of the annihilation operator: n_f = <da^dag da>,
    # m = <da da>; abar = <a>.
    n_f = (V[0, 0] + V[1, 1] - 2.0) / 4.0
    m = (V[0, 0] - V[1, 1] + 1j * (V[0, 1] + V[1, 0])) / 4.0
    abar = (d[0] + 1j * d[1]) / 2.0
    var = (
        2.0 * (np.conj(abar) ** 2 * m).real
        + abs(abar) ** 2 * (2.0 * n_f + 1.0)
        + n_f * (n_f + 1.0)
        + abs(m) ** 2
    )
    return float(var)


def vacuum_probability(state: GaussianState) -> float:
    """Probability that every mode reads zero photons.

    For covariance V and mean d (vacuum covariance = identity):

        P(0...0) = 2^N / sqrt(det(V + I)) * exp(-d^T (V + I)^{-1} d / 2).

    The 1/2 in the exponent makes the formula consistent with the Fock
    oracle (coherent state with n photons gives exp(-n)).
    """
    n = state.n_modes
    A = state.cov + np.eye(2 * n)
    try:
        chol = np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise NumericFailureError("V + I is not positive definite; unphysical state") from exc
    logdet = 2.0 * float(np.sum(np.log(np.diagonal(chol))))
    y = np.linalg.solve(chol, state.mean)
    quad = float(y @ y)
    value = float(2**n * math.exp(-0.5 * (logdet + quad)))
    if value > 1.0 + 1e-9:
        raise NumericFailureError(f"vacuum probability {value} exceeds 1; unphysical state")
    return min(1.0, value)

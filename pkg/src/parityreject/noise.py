"""Noise and imperfection models.

Three knobs cover the whole experiment: a single-photon Pauli channel (or
the wave-plate sandwich that physically realizes a bit flip), Bell-diagonal
entangled-pair sources, and an interference-visibility parameter for the
parity checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import (
    ATOL,
    DensityOperator,
    Ket,
    Operator,
    PAULI_I,
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    embed,
)
from .bench import HALF, QUARTER, jones_matrix

PROB_TOL = 1e-12


class CalibrationError(ValueError):
    """Requested imperfection targets cannot be met by this model."""


# Pauli draw order shared by every sampler: I, X, Y, Z.
PAULI_LABELS = ("I", "X", "Y", "Z")
PAULI_MATRICES = (PAULI_I.array, PAULI_X.array, PAULI_Y.array, PAULI_Z.array)
# bit-flip / phase-flip component of each Pauli (Y = iXZ carries both)
PAULI_XBIT = (0, 1, 1, 0)
PAULI_ZBIT = (0, 0, 1, 1)


@dataclass(frozen=True)
class PauliChannel:
    """Single-photon channel rho -> sum_k p_k sigma_k rho sigma_k."""

    p_i: float
    p_x: float
    p_y: float = 0.0
    p_z: float = 0.0

    def __post_init__(self):
        probs = self.probs
        if np.any(probs < -PROB_TOL):
            raise ValueError(f"negative Pauli probability in {probs}")
        if abs(probs.sum() - 1.0) > PROB_TOL:
            raise ValueError(f"Pauli probabilities sum to {probs.sum()}, not 1")

    @property
    def probs(self) -> np.ndarray:
        return np.array([self.p_i, self.p_x, self.p_y, self.p_z], dtype=float)

    @classmethod
    def identity(cls) -> "PauliChannel":
        return cls(1.0, 0.0)

    @classmethod
    def bit_flip(cls, p: float) -> "PauliChannel":
        return cls(1.0 - p, p)

    @classmethod
    def phase_flip(cls, p: float) -> "PauliChannel":
        return cls(1.0 - p, 0.0, 0.0, p)

    def cumulative(self) -> np.ndarray:
        """Cumulative probabilities in draw order, for samplers."""
        return np.cumsum(self.probs)

    def kraus(self) -> list[np.ndarray]:
        """Weighted Kraus operators sqrt(p_k)*sigma_k (zero-weight terms dropped)."""
        return [np.sqrt(p) * mat
                for p, mat in zip(self.probs, PAULI_MATRICES) if p > 0.0]

    def conjugated_by_hadamard(self) -> "PauliChannel":
        # H X H = Z and H Z H = X; Y picks up only a sign
        return PauliChannel(self.p_i, self.p_z, self.p_y, self.p_x)


def pauli_apply(channel: PauliChannel, rho: DensityOperator,
                photon: int) -> DensityOperator:
    """Apply the channel to one photon of a register."""
    n = rho.n_photons
    out = np.zeros_like(rho.array)
    for p, sigma in zip(channel.probs, PAULI_MATRICES):
        if p == 0.0:
            continue
        big = embed(sigma, [photon], n)
        out += p * (big @ rho.array @ big.conj().T)
    return DensityOperator(out)


@dataclass(frozen=True)
class WaveplateSandwich:
    """QWP(90°) · HWP(±theta) · QWP(90°): a physical bit-flip channel.

    With the HWP sign drawn fairly at random the induced channel is exactly
    the Pauli bit-flip channel with p = sin²(2·theta).
    """

    theta_deg: float
    sign_random: bool = True

    def __post_init__(self):
        if not 0.0 <= self.theta_deg <= 45.0:
            raise ValueError(f"sandwich angle {self.theta_deg} outside [0, 45]")

    @property
    def flip_probability(self) -> float:
        return float(np.sin(np.deg2rad(2.0 * self.theta_deg)) ** 2)

    @classmethod
    def for_flip_probability(cls, p: float) -> "WaveplateSandwich":
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"flip probability {p} outside [0, 1]")
        theta = np.rad2deg(np.arcsin(np.sqrt(p))) / 2.0
        return cls(float(theta))

    def unitary(self, sign: int = +1) -> Operator:
        if sign not in (+1, -1):
            raise ValueError("sign must be +1 or -1")
        q = jones_matrix(QUARTER, 90.0).array
        h = jones_matrix(HALF, sign * self.theta_deg).array
        return Operator(q @ h @ q, assert_unitary=True)

    def kraus(self) -> list[np.ndarray]:
        if not self.sign_random:
            return [self.unitary(+1).array]
        w = np.sqrt(0.5)
        return [w * self.unitary(+1).array, w * self.unitary(-1).array]


def sandwich_as_channel(s: WaveplateSandwich) -> PauliChannel:
    """The ±theta-averaged channel: pure bit flip with p = sin²(2·theta)."""
    return PauliChannel.bit_flip(s.flip_probability)


def sample_sandwich(s: WaveplateSandwich, rng) -> Operator:
    """Draw one realized sandwich unitary (fair ± sign when sign_random)."""
    sign = +1
    if s.sign_random and rng.random() >= 0.5:
        sign = -1
    return s.unitary(sign)


def choi_matrix(kraus: list[np.ndarray]) -> np.ndarray:
    """Choi state (channel ⊗ id)(|φ⁺⟩⟨φ⁺|) of a single-photon channel."""
    phi = np.zeros(4, dtype=complex)
    phi[0b00] = phi[0b11] = np.sqrt(0.5)
    rho = np.outer(phi, phi.conj())
    out = np.zeros((4, 4), dtype=complex)
    eye = np.eye(2)
    for k in kraus:
        big = np.kron(np.asarray(k, dtype=complex), eye)
        out += big @ rho @ big.conj().T
    return out


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    """(1/2)·||a − b||₁ for hermitian matrices."""
    diff = np.asarray(a, dtype=complex) - np.asarray(b, dtype=complex)
    return float(0.5 * np.abs(np.linalg.eigvalsh(diff)).sum())


# ---------------------------------------------------------------------------
# entangled-pair sources

BELL_LABELS = ("phi+", "phi-", "psi+", "psi-")


def bell_ket(kind: str) -> Ket:
    amp = np.sqrt(0.5)
    vec = np.zeros(4, dtype=complex)
    if kind == "phi+":
        vec[0b00], vec[0b11] = amp, amp
    elif kind == "phi-":
        vec[0b00], vec[0b11] = amp, -amp
    elif kind == "psi+":
        vec[0b01], vec[0b10] = amp, amp
    elif kind == "psi-":
        vec[0b01], vec[0b10] = amp, -amp
    else:
        raise ValueError(f"unknown Bell state {kind!r}")
    return Ket(vec)


@dataclass(frozen=True)
class BellDiagonalSource:
    """Pair source emitting a mixture over {φ⁺, φ⁻, ψ⁺, ψ⁻}."""

    lambdas: tuple[float, float, float, float]

    def __post_init__(self):
        lam = np.array(self.lambdas, dtype=float)
        if lam.shape != (4,):
            raise ValueError("need exactly four Bell weights")
        if np.any(lam < -PROB_TOL):
            raise ValueError(f"negative Bell weight in {self.lambdas}")
        if abs(lam.sum() - 1.0) > PROB_TOL:
            raise ValueError(f"Bell weights sum to {lam.sum()}, not 1")

    @classmethod
    def ideal(cls) -> "BellDiagonalSource":
        return cls((1.0, 0.0, 0.0, 0.0))

    @property
    def visibility_hv(self) -> float:
        l1, l2, l3, l4 = self.lambdas
        return l1 + l2 - l3 - l4

    @property
    def visibility_pm(self) -> float:
        l1, l2, l3, l4 = self.lambdas
        return l1 - l2 + l3 - l4

    def cumulative(self) -> np.ndarray:
        return np.cumsum(np.array(self.lambdas, dtype=float))


def bell_diagonal_rho(src: BellDiagonalSource) -> DensityOperator:
    out = np.zeros((4, 4), dtype=complex)
    for lam, kind in zip(src.lambdas, BELL_LABELS):
        if lam == 0.0:
            continue
        vec = bell_ket(kind).array
        out += lam * np.outer(vec, vec.conj())
    return DensityOperator(out)


def visibility(rho: DensityOperator, basis: str) -> float:
    """Two-photon correlation visibility from outcome probabilities.

    basis "hv": P(HH)+P(VV)−P(HV)−P(VH); basis "pm": the same combination
    with both photons measured in |±⟩.
    """
    if rho.array.shape != (4, 4):
        raise ValueError("visibility is defined for two-photon states")
    if basis == "hv":
        single = [np.array([1.0, 0.0]), np.array([0.0, 1.0])]
    elif basis == "pm":
        single = [np.array([1.0, 1.0]) / np.sqrt(2), np.array([1.0, -1.0]) / np.sqrt(2)]
    else:
        raise ValueError(f"unknown visibility basis {basis!r}")
    total = 0.0
    for i, a in enumerate(single):
        for j, b in enumerate(single):
            ket = np.kron(a, b).astype(complex)
            prob = float(np.real(ket.conj() @ rho.array @ ket))
            total += prob if i == j else -prob
    return total


def calibrate_from_visibilities(v_hv: float, v_pm: float) -> BellDiagonalSource:
    """Invert the visibility formulas with the ψ⁻ weight pinned to zero."""
    l1 = (v_hv + v_pm) / 2.0
    l2 = (1.0 - v_pm) / 2.0
    l3 = (1.0 - v_hv) / 2.0
    l4 = 0.0
    lams = (l1, l2, l3, l4)
    if any(l < -PROB_TOL or l > 1.0 + PROB_TOL for l in lams):
        raise CalibrationError(
            f"visibilities (hv={v_hv}, pm={v_pm}) imply weights {lams}"
        )
    return BellDiagonalSource(lams)


# ---------------------------------------------------------------------------
# parity-check interference quality


def parity_branch_projectors(n_photons: int, pair=(0, 1)) -> tuple[Operator, Operator]:
    """Projectors onto the all-H and all-V branches of a parity check.

    The pair argument names the two photons that met at the beam splitter;
    the projectors act on their |HH⟩ / |VV⟩ subspaces, identity elsewhere.
    """
    hh = np.zeros((4, 4), dtype=complex)
    hh[0, 0] = 1.0
    vv = np.zeros((4, 4), dtype=complex)
    vv[3, 3] = 1.0
    p0 = embed(hh, list(pair), n_photons)
    p1 = embed(vv, list(pair), n_photons)
    return (Operator(p0, assert_hermitian=True),
            Operator(p1, assert_hermitian=True))


def degrade_parity_coherence(rho: DensityOperator, v: float,
                             branch_projectors) -> DensityOperator:
    """Scale the coherences between the two parity branches by v.

    Implemented as the mixture (1+v)/2 · rho + (1−v)/2 · K rho K with the
    unitary K = I − 2·P₁, which multiplies every P₀↔P₁ cross block by v,
    leaves the diagonal blocks alone, and is trace preserving and
    completely positive by construction.
    """
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"visibility {v} outside [0, 1]")
    p0, p1 = branch_projectors
    a0 = p0.array if isinstance(p0, Operator) else np.asarray(p0, dtype=complex)
    a1 = p1.array if isinstance(p1, Operator) else np.asarray(p1, dtype=complex)
    for name, a in (("first", a0), ("second", a1)):
        if np.abs(a @ a - a).max() > ATOL:
            raise ValueError(f"{name} branch projector is not idempotent")
    if np.abs(a0 @ a1).max() > ATOL:
        raise ValueError("branch projectors are not orthogonal")
    if v == 1.0:
        return rho
    k = np.eye(a0.shape[0], dtype=complex) - 2.0 * a1
    mixed = 0.5 * (1.0 + v) * rho.array + 0.5 * (1.0 - v) * (k @ rho.array @ k)
    return DensityOperator(mixed)

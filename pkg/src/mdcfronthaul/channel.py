"""Uplink channel model and the achievable-rate functions of the layered scheme.

All rates are in bits per channel use (bits/symbol).  The noise covariance is
assumed positive definite, so every log-det argument below is positive
definite for PSD quantization noise.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .linalg import as_hermitian, log2det


def pathloss(distance, ref_dist=30.0, exponent=3.0):
    """Large-scale gain ``1 / (1 + (d / d0)**exponent)``."""
    return 1.0 / (1.0 + (np.asarray(distance, dtype=float) / ref_dist) ** exponent)


@dataclass(frozen=True)
class UplinkChannel:
    """Flat-fading uplink from ``N_U`` UEs to one multi-antenna RRH.

    Attributes
    ----------
    H_k : tuple of ndarray
        Per-UE channel matrices, each ``n_R x n_{U,k}``.
    noise_cov : ndarray
        Noise covariance ``Sigma_z`` (``n_R x n_R``, positive definite).
    power_P : float
        Per-UE symbol power budget; every UE transmits with covariance
        ``P * I``.
    """

    H_k: tuple
    noise_cov: np.ndarray
    power_P: float

    def __post_init__(self):
        hk = tuple(np.atleast_2d(np.asarray(h, dtype=complex)) for h in self.H_k)
        if not hk:
            raise ParameterError("at least one UE is required")
        n_R = hk[0].shape[0]
        if any(h.shape[0] != n_R or h.shape[1] < 1 for h in hk):
            raise ParameterError("every H_k must have n_R rows and >= 1 column")
        for h in hk:
            h.setflags(write=False)
        object.__setattr__(self, "H_k", hk)
        cov = as_hermitian(self.noise_cov, psd=True, name="noise_cov")
        if cov.shape[0] != n_R:
            raise ParameterError("noise_cov must be n_R x n_R")
        object.__setattr__(self, "noise_cov", cov)
        if not self.power_P > 0:
            raise ParameterError("power_P must be positive")
        object.__setattr__(self, "power_P", float(self.power_P))

    @property
    def n_R(self):
        return self.H_k[0].shape[0]

    @property
    def n_Uk(self):
        return tuple(h.shape[1] for h in self.H_k)

    @property
    def N_U(self):
        return len(self.H_k)

    @property
    def H(self):
        return np.hstack(self.H_k)

    def gram(self):
        """Per-UE Gram matrices ``H_k H_k^H``, shape ``(N_U, n_R, n_R)``."""
        return np.array([h @ h.conj().T for h in self.H_k])

    def with_power(self, power_P):
        return UplinkChannel(self.H_k, self.noise_cov, power_P)


@dataclass(frozen=True)
class PowerSplit:
    """Per-UE power of the two superposition layers."""

    P_k1: np.ndarray
    P_k2: np.ndarray

    def __post_init__(self):
        p1 = np.atleast_1d(np.asarray(self.P_k1, dtype=float)).copy()
        p2 = np.atleast_1d(np.asarray(self.P_k2, dtype=float)).copy()
        if p1.shape != p2.shape:
            raise ParameterError("P_k1 and P_k2 must have the same length")
        if (p1 < 0).any() or (p2 < 0).any():
            raise ParameterError("layer powers must be nonnegative")
        p1.setflags(write=False)
        p2.setflags(write=False)
        object.__setattr__(self, "P_k1", p1)
        object.__setattr__(self, "P_k2", p2)

    @classmethod
    def from_layer1(cls, P_k1, power_P):
        """Split with ``P_k2 = power_P - P_k1`` (tiny negatives clipped)."""
        p1 = np.clip(np.atleast_1d(np.asarray(P_k1, dtype=float)), 0.0, power_P)
        return cls(p1, power_P - p1)

    def check(self, power_P, rtol=1e-9):
        total = self.P_k1 + self.P_k2
        if np.abs(total - power_P).max() > rtol * power_P:
            raise ParameterError("P_k1 + P_k2 must equal the power budget")


def sample_channel(n_Uk, n_R, power_P, noise_power=1.0, radius=100.0,
                   ref_dist=30.0, pathloss_exp=3.0, seed=None):
    """Draw a random uplink channel.

    UE and RRH positions are uniform over a disc of ``radius`` metres and the
    entries of ``H_k`` are i.i.d. ``CN(0, rho_k)`` with ``rho_k`` the path
    loss at the RRH-UE distance.  The result is a pure function of ``seed``.

    Parameters
    ----------
    n_Uk : sequence of int
        Antennas per UE; ``len(n_Uk)`` is the number of UEs.
    n_R : int
        Antennas at the RRH.
    power_P, noise_power : float
        Per-UE power and noise level ``N0`` (``Sigma_z = N0 * I``).
    """
    n_Uk = [int(n) for n in np.atleast_1d(n_Uk)]
    if len(n_Uk) < 1 or min(n_Uk) < 1 or int(n_R) < 1:
        raise ParameterError("all sizes must be >= 1")
    if radius <= 0 or ref_dist <= 0:
        raise ParameterError("radius and reference distance must be positive")
    if not (noise_power > 0 and power_P > 0):
        raise ParameterError("noise power and power_P must be positive")
    n_R = int(n_R)
    rng = np.random.default_rng(seed)

    def draw_positions(n):
        r = radius * np.sqrt(rng.random(n))
        ang = 2 * np.pi * rng.random(n)
        return np.stack([r * np.cos(ang), r * np.sin(ang)], axis=1)

    rrh = draw_positions(1)[0]
    ues = draw_positions(len(n_Uk))
    rho = pathloss(np.linalg.norm(ues - rrh, axis=1), ref_dist, pathloss_exp)
    H_k = []
    for rho_k, n in zip(rho, n_Uk):
        g = rng.standard_normal((n_R, n)) + 1j * rng.standard_normal((n_R, n))
        H_k.append(np.sqrt(rho_k / 2) * g)
    return UplinkChannel(tuple(H_k), noise_power * np.eye(n_R), power_P)


def received_covariance(ch):
    """``Sigma_y = P H H^H + Sigma_z``."""
    H = ch.H
    return as_hermitian(ch.power_P * H @ H.conj().T + ch.noise_cov)


def _layer2_signal(ch, split):
    gram = ch.gram()
    return np.einsum("k,kij->ij", split.P_k2, gram)


def layer1_sum_rate(ch, split, Omega):
    """Sum-rate of the first layer decoded from one description.

    ``log2det(Sigma_y + Omega) - log2det(H P2 H^H + Sigma_z + Omega)``, the
    second layer being treated as noise.
    """
    Omega = np.asarray(Omega, dtype=complex)
    sy = received_covariance(ch)
    interf = _layer2_signal(ch, split) + ch.noise_cov + Omega
    return max(log2det(sy + Omega) - log2det(interf), 0.0)


def layer2_sum_rate(ch, split, Omega0):
    """Sum-rate of the second layer after cancelling the first (central description)."""
    Omega0 = np.asarray(Omega0, dtype=complex)
    base = ch.noise_cov + Omega0
    return max(log2det(_layer2_signal(ch, split) + base) - log2det(base), 0.0)


def pd_sum_rate(ch, Omega):
    """Joint-decoding sum-rate with all power in one layer and noise ``Omega``."""
    Omega = np.asarray(Omega, dtype=complex)
    sy = received_covariance(ch)
    return max(log2det(sy + Omega) - log2det(ch.noise_cov + Omega), 0.0)

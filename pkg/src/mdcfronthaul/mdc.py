"""Compression-rate functions of two-description Gaussian MDC and their
convex majorants.

With Gaussian test channels ``yhat_l = y + q_l`` the side descriptions carry
noise ``Omega`` and the central reconstruction noise ``Omega0``.  The rate
functions are differences of log-dets; the majorants replace every concave
``log2det`` term by its tangent plane ``phi`` at a linearization point.
"""

from dataclasses import dataclass

import numpy as np

from .channel import PowerSplit, received_covariance
from .errors import DomainError
from .linalg import LN2, as_hermitian, block_diag, log2det, replication


@dataclass(frozen=True)
class MdcQuantizer:
    """Side (``Omega``) and central (``Omega0``) quantization noise covariances."""

    Omega: np.ndarray
    Omega0: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "Omega", as_hermitian(self.Omega, psd=True, name="Omega"))
        object.__setattr__(self, "Omega0", as_hermitian(self.Omega0, psd=True, name="Omega0"))
        if self.Omega.shape != self.Omega0.shape:
            raise ValueError("Omega and Omega0 must have the same dimension")


@dataclass(frozen=True)
class LinearizationPoint:
    split_t: PowerSplit
    Omega_t: np.ndarray
    Omega0_t: np.ndarray

    @property
    def quantizer(self):
        return MdcQuantizer(self.Omega_t, self.Omega0_t)


def _singular(a):
    try:
        np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        return True
    return False


def phi(A, B):
    """First-order expansion of ``log2det`` at ``B`` evaluated at ``A``.

    ``log2det(B) + tr(B^-1 (A - B)) / ln 2``; an upper bound on
    ``log2det(A)`` by concavity.
    """
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    ld = log2det(B)
    step = np.linalg.solve(B, A - B)
    return ld + np.trace(step, axis1=-2, axis2=-1).real / LN2


def g_individual(Sigma_y, q):
    """Rate of one side description, ``I(y; y + q_l)``.

    Returns ``inf`` if ``Omega`` is singular while ``Sigma_y`` is not zero on
    its null space (infinitely fine quantization).
    """
    sy = np.asarray(Sigma_y, dtype=complex)
    if _singular(q.Omega):
        if _singular(sy + q.Omega):
            raise DomainError("Sigma_y + Omega is singular")
        return np.inf
    return log2det(sy + q.Omega) - log2det(q.Omega)


def _mdc_blocks(sy, Omega, Omega0):
    n = sy.shape[-1]
    A2, A3, A4 = (replication(m, n) for m in (2, 3, 4))
    omega_bar = block_diag(Omega0, Omega, Omega)
    cov3 = A3 @ sy @ A3.conj().T + omega_bar
    cov4 = A4 @ sy @ A4.conj().T + block_diag(np.zeros((n, n), complex), omega_bar)
    cov2 = A2 @ sy @ A2.conj().T + block_diag(Omega, Omega)
    return cov2, cov3, cov4


def g_sum(Sigma_y, q):
    """Sum-rate requirement of both descriptions.

    ``I(y; yhat_0, yhat_1, yhat_2) + I(yhat_1; yhat_2)`` written as a
    combination of log-dets of the joint covariances.  Requires
    ``Sigma_y > 0``; singular quantization noise gives ``inf``.
    """
    sy = np.asarray(Sigma_y, dtype=complex)
    if _singular(sy):
        raise DomainError("Sigma_y must be positive definite")
    if _singular(q.Omega) or _singular(q.Omega0):
        return np.inf
    cov2, cov3, cov4 = _mdc_blocks(sy, q.Omega, q.Omega0)
    return (log2det(sy) + log2det(cov3) - log2det(cov4)
            + 2 * log2det(sy + q.Omega) - log2det(cov2))


def surrogate_g1(q, at, Sigma_y):
    """Convex majorant of ``g_individual``, tangent at ``at``."""
    sy = np.asarray(Sigma_y, dtype=complex)
    return phi(sy + q.Omega, sy + at.Omega_t) - log2det(q.Omega)


def surrogate_gsum(q, at, Sigma_y):
    """Convex majorant of ``g_sum``, tangent at ``at``."""
    sy = np.asarray(Sigma_y, dtype=complex)
    cov2, cov3, cov4 = _mdc_blocks(sy, q.Omega, q.Omega0)
    _, cov3_t, _ = _mdc_blocks(sy, at.Omega_t, at.Omega0_t)
    return (log2det(sy) + phi(cov3, cov3_t) - log2det(cov4)
            + 2 * phi(sy + q.Omega, sy + at.Omega_t) - log2det(cov2))


def surrogate_objective(split, q, at, weights, ch):
    """Concave minorant of the weighted layer sum-rate, tangent at ``at``.

    ``weights`` are the probabilities that at least one / both descriptions
    arrive.
    """
    w1, w2 = weights
    sy = received_covariance(ch)
    gram = ch.gram()
    sz = ch.noise_cov
    interf = np.einsum("k,kij->ij", split.P_k2, gram) + sz
    interf_t = np.einsum("k,kij->ij", at.split_t.P_k2, gram) + sz
    val = 0.0
    if w1:
        val += w1 * (log2det(sy + q.Omega) - phi(interf + q.Omega, interf_t + at.Omega_t))
    if w2:
        val += w2 * (log2det(interf + q.Omega0) - phi(sz + q.Omega0, sz + at.Omega0_t))
    return val

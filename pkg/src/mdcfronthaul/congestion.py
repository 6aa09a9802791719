"""Slotted fronthaul congestion model.

Each packet on route ``l`` needs a geometric number of slots (success
probability ``1 - eps_l`` per slot), so a description of ``N_F`` packets is
delivered by the deadline ``T_F`` with negative-binomial probability.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

MAX_ENUM_PATHS = 20


@dataclass(frozen=True)
class FronthaulConfig:
    """Packet fronthaul parameters.

    Attributes
    ----------
    B_F : int
        Payload bits per fronthaul packet (slot).
    L_W : int
        Channel uses per wireless frame.
    C_F : float
        Fronthaul capacity in bit/s.
    T_max : float
        Maximum tolerable fronthaul delay in seconds.
    eps : tuple of float
        Per-route, per-slot failure probabilities.
    """

    B_F: int = 6000
    L_W: int = 5000
    C_F: float = 100e6
    T_max: float = 1e-3
    eps: tuple = (0.5, 0.5)

    def __post_init__(self):
        eps = tuple(float(e) for e in np.atleast_1d(self.eps))
        object.__setattr__(self, "eps", eps)
        if int(self.B_F) != self.B_F or self.B_F <= 0:
            raise ParameterError("B_F must be a positive integer")
        if int(self.L_W) != self.L_W or self.L_W <= 0:
            raise ParameterError("L_W must be a positive integer")
        if not (self.C_F > 0 and self.T_max > 0):
            raise ParameterError("C_F and T_max must be positive")
        if not eps or any(not 0.0 <= e < 1.0 for e in eps):
            raise ParameterError("route failure probabilities must lie in [0, 1)")

    @classmethod
    def symmetric(cls, eps_F, n_paths=2, **kw):
        return cls(eps=(eps_F,) * n_paths, **kw)

    @property
    def rate_step(self):
        """Compression rate per fronthaul packet, ``B_F / L_W`` bits/symbol."""
        return self.B_F / self.L_W


def packets_per_description(R_F, cfg):
    """Packets needed for one description, ``ceil(L_W * R_F / B_F)``.

    Ratios within 1e-9 (relative) of an integer are snapped to it, so grid
    rates ``k * B_F / L_W`` map to exactly ``k`` packets.
    """
    if not R_F > 0:
        raise ParameterError("R_F must be positive")
    x = cfg.L_W * R_F / cfg.B_F
    k = round(x)
    if abs(x - k) <= 1e-9 * max(x, 1.0):
        return max(int(k), 1)
    return int(math.ceil(x))


def deadline_slots(cfg):
    """Deadline in packet durations, ``floor(T_max / (B_F / C_F))``."""
    x = cfg.T_max * cfg.C_F / cfg.B_F
    k = round(x)
    if abs(x - k) <= 1e-9 * max(x, 1.0):
        return int(k)
    return int(math.floor(x))


def regularized_incomplete_beta(x, a, b):
    """``I_x(a, b)`` for positive integer ``a`` and ``b``.

    Uses the finite binomial identity
    ``I_x(a, b) = sum_{j=a}^{n} C(n, j) x^j (1-x)^(n-j)`` with ``n = a+b-1``.
    """
    if not 0.0 <= x <= 1.0:
        raise ParameterError("x must lie in [0, 1]")
    if int(a) != a or int(b) != b or a < 1 or b < 1:
        raise ParameterError("a and b must be positive integers")
    a, b = int(a), int(b)
    n = a + b - 1
    return min(1.0, math.fsum(math.comb(n, j) * x ** j * (1.0 - x) ** (n - j)
                              for j in range(a, n + 1)))


def delivery_probability(eps_l, N_F, T_F):
    """Probability that ``N_F`` packets all arrive within ``T_F`` slots.

    ``1 - I_eps(T_F - N_F + 1, N_F)``; exactly 0 when ``N_F > T_F``.
    """
    if N_F < 1:
        raise ParameterError("N_F must be >= 1")
    if N_F > T_F:
        return 0.0
    return 1.0 - regularized_incomplete_beta(eps_l, T_F - N_F + 1, N_F)


def description_pmf_2path(P1c, P2c):
    """PMF of the number of descriptions (0, 1, 2) received over two routes."""
    none = (1 - P1c) * (1 - P2c)
    both = P1c * P2c
    one = P1c * (1 - P2c) + P2c * (1 - P1c)
    return np.array([none, one, both])


def description_pmf_general(Plc):
    """PMF of the number of delivered descriptions over ``N_P`` routes.

    Sums the product of per-route outcome probabilities over all
    ``2**N_P`` delivery patterns.
    """
    p = [float(x) for x in Plc]
    if len(p) > MAX_ENUM_PATHS:
        raise ParameterError(f"at most {MAX_ENUM_PATHS} routes can be enumerated")
    if any(not 0.0 <= x <= 1.0 for x in p):
        raise ParameterError("probabilities must lie in [0, 1]")
    pmf = np.zeros(len(p) + 1)
    for pattern in itertools.product((0, 1), repeat=len(p)):
        prob = 1.0
        for c, pl in zip(pattern, p):
            prob *= pl if c else 1.0 - pl
        pmf[sum(pattern)] += prob
    return pmf


def description_pmf(R_F, cfg):
    """Description-count PMF for compression rate ``R_F`` under ``cfg``."""
    N_F = packets_per_description(R_F, cfg)
    T_F = deadline_slots(cfg)
    probs = [delivery_probability(e, N_F, T_F) for e in cfg.eps]
    if len(probs) == 2:
        return description_pmf_2path(*probs)
    return description_pmf_general(probs)


def layer_weights(pmf):
    """Probabilities that at least one / both descriptions arrive."""
    return float(pmf[1] + pmf[2]), float(pmf[2])

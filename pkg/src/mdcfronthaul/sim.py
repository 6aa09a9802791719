"""Slot-level Monte Carlo simulation of the multi-route fronthaul.

Every packet on route ``l`` takes a geometric number of slots (success
probability ``1 - eps_l`` per slot); a route delivers its description when
the ``N_F`` packet delays sum to at most ``T_F``.

Random numbers are drawn in fixed blocks of ``BLOCK`` trials.  Block ``b``
uses the generator spawned from ``SeedSequence(seed, spawn_key=(b,))`` so a
trial's draws depend only on ``(seed, trial index)``; disjoint trial ranges
simulated separately and merged with ``merge`` reproduce a serial run.
"""

from dataclasses import dataclass

import numpy as np

from .congestion import deadline_slots, packets_per_description
from .errors import ParameterError

BLOCK = 1 << 14


@dataclass
class SimOutcome:
    """Counts and summary statistics of a simulation run.

    ``counts[m]`` is the number of trials in which exactly ``m`` descriptions
    arrived; ``route_counts[l]`` the number in which route ``l`` delivered.
    ``values[m]`` is the rate credited when ``m`` descriptions arrive (all
    zeros for a pure delivery run).
    """

    trials: int
    counts: np.ndarray
    route_counts: np.ndarray
    values: np.ndarray

    @property
    def empirical_pmf(self):
        return self.counts / self.trials

    @property
    def route_frequency(self):
        return self.route_counts / self.trials

    @property
    def empirical_expected_rate(self):
        return float(np.dot(self.empirical_pmf, self.values))

    @property
    def std_error_rate(self):
        n = self.trials
        if n < 2:
            return 0.0
        mean = self.empirical_expected_rate
        var = np.dot(self.counts, (self.values - mean) ** 2) / (n - 1)
        return float(np.sqrt(var / n))


def geometric_delays(u, eps):
    """Inverse-CDF geometric draws ``ceil(ln u / ln eps)`` (at least one slot).

    ``u`` must lie in ``(0, 1]``; ``eps = 0`` always gives one slot.
    """
    if eps <= 0.0:
        return np.ones(u.shape, dtype=np.int64)
    t = np.ceil(np.log(u) / np.log(eps))
    return np.maximum(t, 1.0)


def _block_rng(seed, b):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(b,)))


def _delivered(eps, N_F, T_F, start, stop, seed):
    """Boolean ``(stop - start, N_P)`` array of per-route delivery."""
    n_p = len(eps)
    out = np.zeros((stop - start, n_p), dtype=bool)
    b0, b1 = start // BLOCK, (stop - 1) // BLOCK
    for b in range(b0, b1 + 1):
        lo = max(start, b * BLOCK)
        hi = min(stop, (b + 1) * BLOCK)
        u = 1.0 - _block_rng(seed, b).random((hi - b * BLOCK, n_p, N_F))
        u = u[lo - b * BLOCK:]
        for l, e in enumerate(eps):
            total = geometric_delays(u[:, l, :], e).sum(axis=1)
            out[lo - start:hi - start, l] = total <= T_F
    return out


def simulate_delivery(eps, N_F, T_F, trials, seed=0, start=0):
    """Simulate trials ``start .. start + trials - 1`` of description delivery.

    Returns a ``SimOutcome`` whose ``counts`` histogram the number of routes
    that delivered by the deadline.
    """
    eps = [float(e) for e in np.atleast_1d(eps)]
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    if N_F < 1 or T_F < 0:
        raise ParameterError("need N_F >= 1 and T_F >= 0")
    hit = _delivered(eps, int(N_F), int(T_F), start, start + trials, seed)
    m = hit.sum(axis=1)
    counts = np.bincount(m, minlength=len(eps) + 1)
    return SimOutcome(trials, counts, hit.sum(axis=0), np.zeros(len(eps) + 1))


def merge(*outcomes):
    """Combine outcomes of disjoint trial ranges (same inputs and seed)."""
    first = outcomes[0]
    return SimOutcome(sum(o.trials for o in outcomes),
                      sum(o.counts for o in outcomes),
                      sum(o.route_counts for o in outcomes),
                      first.values.copy())


def credited_rates(sol, n_paths):
    """Rate credited for each number of delivered descriptions."""
    values = np.zeros(n_paths + 1)
    if getattr(sol, "scheme", "mdc") == "pd":
        values[1:] = sol.rate_layer1
    else:
        values[1:] = sol.rate_layer1
        values[2:] += sol.rate_layer2
    return values


def simulate_expected_rate(sol, ch, cfg, trials, seed=0, start=0):
    """Monte Carlo estimate of the expected sum-rate of an optimized solution.

    The credited rates are the ones stored in ``sol``; ``ch`` is the channel
    it was optimized for and is only checked for a matching dimension.

    Per trial the number ``M`` of delivered descriptions is sampled; MDC
    credits the first-layer rate when ``M >= 1`` and adds the second-layer
    rate when ``M >= 2``; path diversity credits its sum-rate when
    ``M >= 1``.
    """
    if np.shape(sol.Omega) != (ch.n_R, ch.n_R):
        raise ParameterError("solution does not match the channel dimension")
    n_p = len(cfg.eps)
    values = credited_rates(sol, n_p)
    if sol.R_F <= 0:
        counts = np.zeros(n_p + 1, dtype=np.int64)
        counts[0] = trials
        return SimOutcome(trials, counts, np.zeros(n_p, dtype=np.int64), values)
    N_F = packets_per_description(sol.R_F, cfg)
    out = simulate_delivery(cfg.eps, N_F, deadline_slots(cfg), trials, seed, start)
    out.values = values
    return out

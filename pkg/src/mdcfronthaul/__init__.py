"""Layered MDC uplink compression over a congested packet fronthaul.

The package models an uplink C-RAN link whose radio head compresses its
received signal into two descriptions sent over independent congested
routes.  It optimizes superposition power splits, quantization noise
covariances and the compression rate to maximize the expected sum-rate, and
compares against duplicating one description on both routes (path
diversity).
"""

from .channel import (PowerSplit, UplinkChannel, layer1_sum_rate, layer2_sum_rate, pathloss,
                      pd_sum_rate, received_covariance, sample_channel)
from .congestion import (FronthaulConfig, deadline_slots, delivery_probability,
                         description_pmf, description_pmf_2path, description_pmf_general,
                         layer_weights, packets_per_description, regularized_incomplete_beta)
from .errors import ConfigError, DomainError, InfeasibleStartError, ParameterError
from .linalg import as_hermitian, block_diag, is_psd, log2det, replication
from .mdc import (LinearizationPoint, MdcQuantizer, g_individual, g_sum, phi, surrogate_g1,
                  surrogate_gsum, surrogate_objective)
from .optimize import (DEFAULT_CONFIG, MdcSolution, PdSolution, SolverConfig, cccp_fixed_rf,
                       cccp_fixed_rf_batch, constraint_violation, expected_sum_rate_mdc,
                       expected_sum_rate_pd, linearization_point, optimize_pd, pd_fixed_rf,
                       pd_fixed_rf_batch, rate_grid, search_rf_batch, search_rf_mdc,
                       solve_inner_convex)
from .sim import SimOutcome, merge, simulate_delivery, simulate_expected_rate

__version__ = "0.1.0"

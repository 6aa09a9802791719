"""Joint optimization of layer powers, quantization noise and compression rate.

For a fixed compression rate the problem is a difference of convex programs
in ``(P_k1, Omega, Omega0)``.  The concave-convex procedure linearizes every
log-det term of the wrong curvature at the current iterate and solves the
resulting convex program with a log-barrier method; the compression rate is
then chosen by a discrete search over integer packet counts.

All solvers work on batches of independent instances (same antenna
configuration) so that grids of rates and channel draws run in one
vectorized pass; the single-instance functions are thin wrappers.
"""

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import _barrier
from .channel import (PowerSplit, UplinkChannel, layer1_sum_rate, layer2_sum_rate,
                      pd_sum_rate, received_covariance)
from .congestion import (FronthaulConfig, deadline_slots, description_pmf,
                         layer_weights)
from .errors import InfeasibleStartError, ParameterError
from .linalg import as_hermitian, hermitian_basis, hermitian_coords, log2det, replication
from .mdc import LinearizationPoint, MdcQuantizer, g_individual, g_sum

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances and budgets of the CCCP / barrier solvers.

    ``corner_starts`` adds two MDC starts next to the single-layer corners
    (almost all power in layer 1, or in layer 2), built from path-diversity
    solutions at rates ``R_F`` and ``2 R_F``.  ``n_starts`` adds extra starts from ``c * I`` with
    ``c`` jittered by random powers of two drawn from ``start_seed``.  When
    there are several starts each one is run for ``screen_outer`` outer
    iterations and only the best one per instance is continued.
    """

    rel_tol: float = 1e-6
    max_outer: int = 100
    feasibility_tol: float = 1e-6
    kkt_tol: float = 1e-6
    max_newton: int = 500
    gap_tol: float = 1e-9
    barrier_mu: float = 16.0
    barrier_t0: float = 1e3
    extrapolate: bool = True
    max_extrapolation: float = 256.0
    corner_starts: bool = True
    screen_outer: int = 3
    n_starts: int = 1
    start_seed: int = 0


DEFAULT_CONFIG = SolverConfig()


@dataclass
class MdcSolution:
    """Optimized MDC / broadcast-coding operating point at rate ``R_F``."""

    R_F: float
    split: PowerSplit
    Omega: np.ndarray
    Omega0: np.ndarray
    rate_layer1: float
    rate_layer2: float
    expected_sum_rate: float
    pmf: np.ndarray
    iterations: int = 0
    converged: bool = True
    diagnostics: list = field(default_factory=list)
    history: list = field(default_factory=list)
    kkt_residual: float = 0.0

    scheme = "mdc"

    @property
    def weights(self):
        return layer_weights(self.pmf)


@dataclass
class PdSolution:
    """Optimized path-diversity operating point at rate ``R_F``."""

    R_F: float
    Omega: np.ndarray
    sum_rate: float
    expected_sum_rate: float
    pmf: np.ndarray
    iterations: int = 0
    converged: bool = True
    diagnostics: list = field(default_factory=list)
    history: list = field(default_factory=list)
    kkt_residual: float = 0.0

    scheme = "pd"

    @property
    def delivery_probability(self):
        """``Pr[D = 1]``: at least one copy arrives."""
        return float(1.0 - self.pmf[0])

    # uniform accessors shared with MdcSolution
    @property
    def rate_layer1(self):
        return self.sum_rate

    @property
    def rate_layer2(self):
        return 0.0


# ---------------------------------------------------------------------------
# exact objectives


def expected_sum_rate_mdc(R_F, split, q, ch, cfg):
    """Expected sum-rate of the layered scheme at compression rate ``R_F``."""
    w1, w2 = layer_weights(description_pmf(R_F, cfg))
    r1 = layer1_sum_rate(ch, split, q.Omega) if w1 else 0.0
    r2 = layer2_sum_rate(ch, split, q.Omega0) if w2 else 0.0
    return w1 * r1 + w2 * r2


def expected_sum_rate_pd(R_F, Omega, ch, cfg):
    pmf = description_pmf(R_F, cfg)
    return (1.0 - pmf[0]) * pd_sum_rate(ch, Omega)


def rate_grid(cfg):
    """Candidate rates ``k * B_F / L_W`` for ``k = 1 .. T_F + 1``."""
    T_F = deadline_slots(cfg)
    return cfg.rate_step * np.arange(1, T_F + 2)


# ---------------------------------------------------------------------------
# batched problem construction


class _Layout:
    """Packing of ``(P_k1, Omega, Omega0)`` into a real vector."""

    def __init__(self, N_U, n_R, power=True, central=True):
        nb = n_R * n_R
        self.n_R = n_R
        self.idx_p = np.arange(N_U) if power else np.arange(0)
        off = self.idx_p.size
        self.idx_w = off + np.arange(nb)
        self.idx_w0 = off + nb + np.arange(nb) if central else np.arange(0)
        self.n = off + nb + self.idx_w0.size
        self.basis = hermitian_basis(n_R)

    def pack(self, p1=None, Omega=None, Omega0=None, B=1):
        theta = np.zeros((B, self.n))
        if self.idx_p.size:
            theta[:, self.idx_p] = p1
        theta[:, self.idx_w] = hermitian_coords(np.asarray(Omega))
        if self.idx_w0.size:
            theta[:, self.idx_w0] = hermitian_coords(np.asarray(Omega0))
        return theta

    def omega(self, theta):
        return np.einsum("bk,kij->bij", theta[:, self.idx_w], self.basis)

    def omega0(self, theta):
        return np.einsum("bk,kij->bij", theta[:, self.idx_w0], self.basis)


class _Instances:
    """Channel data of a batch stacked into arrays."""

    def __init__(self, channels):
        if not channels:
            raise ParameterError("empty batch")
        n_R, N_U = channels[0].n_R, channels[0].N_U
        if any(c.n_R != n_R or c.N_U != N_U for c in channels):
            raise ParameterError("batched channels must share n_R and N_U")
        self.channels = list(channels)
        self.B = len(channels)
        self.n_R, self.N_U = n_R, N_U
        self.Sz = np.array([c.noise_cov for c in channels])
        self.G = np.array([c.gram() for c in channels])
        self.P = np.array([c.power_P for c in channels])
        self.Sy = np.array([received_covariance(c) for c in channels])
        self.delta = 1e-8 * np.trace(self.Sy, axis1=1, axis2=2).real / n_R
        self.ld_Sy = log2det(self.Sy)


def _mdc_functions(inst, lay, weights):
    """Exact objective, constraint functions, cones and box of the MDC problem."""
    B, n = inst.B, inst.n_R
    full_interf = inst.Sz + np.einsum("b,bkij->bij", inst.P, inst.G)
    negG = -inst.G.astype(complex)

    def A(M0, *groups, dense=None):
        return _barrier.Affine(M0, lay.basis, groups, dense)

    w, w0 = lay.idx_w, lay.idx_w0
    sy_w = A(inst.Sy, (w, [0]))
    int_w = A(full_interf, (w, [0]), dense=(negG, lay.idx_p))
    int_w0 = A(full_interf, (w0, [0]), dense=(negG, lay.idx_p))
    sz_w0 = A(inst.Sz, (w0, [0]))
    w_only = A(np.zeros_like(inst.Sz), (w, [0]))

    A2, A3, A4 = (replication(m, n) for m in (2, 3, 4))
    rep = lambda Am: Am @ inst.Sy @ Am.conj().T
    cov3 = A(rep(A3), (w, [n, 2 * n]), (w0, [0]))
    cov4 = A(rep(A4), (w, [2 * n, 3 * n]), (w0, [n]))
    cov2 = A(rep(A2), (w, [0, n]))

    w1, w2 = weights[:, 0].copy(), weights[:, 1].copy()
    one = np.ones(B)
    DC = _barrier.DCFunction
    objective = DC([(w1, sy_w), (-w1, int_w), (w2, int_w0), (-w2, sz_w0)], np.zeros(B), lay.n)
    g1 = DC([(one, sy_w), (-one, w_only)], np.zeros(B), lay.n)
    gs = DC([(one, cov3), (-one, cov4), (2 * one, sy_w), (-one, cov2)], inst.ld_Sy.copy(), lay.n)
    shift = -inst.delta[:, None, None] * np.eye(n)
    cones = [A(shift, (w, [0])), A(shift.copy(), (w0, [0]))]
    box_hi = np.repeat(inst.P[:, None], inst.N_U, axis=1)
    return objective, [g1, gs], cones, (lay.idx_p, np.zeros_like(box_hi), box_hi)


def _pd_functions(inst, lay):
    B, n = inst.B, inst.n_R

    def A(M0):
        return _barrier.Affine(M0, lay.basis, [(lay.idx_w, [0])])

    sy_w, sz_w, w_only = A(inst.Sy), A(inst.Sz), A(np.zeros_like(inst.Sz))
    one = np.ones(B)
    DC = _barrier.DCFunction
    objective = DC([(one, sy_w), (-one, sz_w)], np.zeros(B), lay.n)
    g = DC([(one, sy_w), (-one, w_only)], np.zeros(B), lay.n)
    shift = -inst.delta[:, None, None] * np.eye(n)
    cones = [A(shift)]
    return objective, [g], cones, (np.arange(0), np.zeros((B, 0)), np.zeros((B, 0)))


def _take_box(box, sel):
    idx, lo, hi = box
    return idx, lo[sel], hi[sel]


def _barrier_problem(objective, constraints, bounds, cones, box, theta_t):
    obj = objective.surrogate(theta_t, "max")
    cons = [(g.surrogate(theta_t, "min"), b) for g, b in zip(constraints, bounds)]
    idx, lo, hi = box
    return _barrier.BarrierProblem(obj, cons, cones, idx, lo, hi)


def _cccp_batch(objective, constraints, bounds, cones, box, theta0, config, path=None):
    """Run the concave-convex procedure on a batch from feasible starts.

    Returns the final iterates and per-instance records.  An inner solution
    is accepted only if it does not decrease the exact objective and keeps
    the exact constraints; otherwise the instance stops at its current point.

    With ``config.extrapolate`` each accepted step ``x_prev -> x`` is
    stretched by the factors ``2, 4, .., max_extrapolation``, along straight
    lines and, if given, along ``path(x_prev, x, s, box)``; the best
    stretched point replaces ``x`` if it is strictly feasible and raises the
    exact objective, so the objective sequence stays nondecreasing.
    """
    theta = np.array(theta0, dtype=float, copy=True)
    B = theta.shape[0]
    f = objective.value(theta)
    history = [[v] for v in f]
    iterations = np.zeros(B, dtype=int)
    converged = np.zeros(B, dtype=bool)
    inner_ok = np.ones(B, dtype=bool)
    kkt = np.zeros(B)
    centers = theta.copy()
    active = np.arange(B)
    t0 = config.barrier_t0
    for _ in range(config.max_outer):
        if not active.size:
            break
        x = theta[active]
        problem = _barrier_problem(*_take_all(objective, constraints, bounds, cones, box, active),
                                   x)
        # the previous centered iterate is a better start than the boundary point x
        start = centers[active]
        far = ~problem.feasible(start)
        start[far] = x[far]
        stuck = far & ~problem.feasible(x)
        if stuck.any():
            # x sits on the boundary up to round-off: no strictly feasible start remains
            converged[active[stuck]] = True
            active, start = active[~stuck], start[~stuck]
            if not active.size:
                break
            x = theta[active]
            problem = problem.take(np.flatnonzero(~stuck))
        sub_obj, sub_cons, sub_bounds, sub_cones, sub_box = \
            _take_all(objective, constraints, bounds, cones, box, active)
        new, info = _barrier.barrier_maximize(problem, start, t0=t0, mu=config.barrier_mu,
                                              gap_tol=config.gap_tol,
                                              max_newton=config.max_newton)
        centers[active] = info["center"]
        f_old = f[active]
        f_new = sub_obj.value(new)
        feasible = np.ones(active.size, dtype=bool)
        for g, b in zip(sub_cons, sub_bounds):
            feasible &= g.value(new) <= b + config.feasibility_tol
        accept = np.isfinite(f_new) & feasible & (f_new >= f_old)
        f_acc = np.where(accept, f_new, f_old)
        if config.extrapolate and accept.any():
            sel = np.flatnonzero(accept)
            z, f_z = _extrapolate(x[sel], new[sel], f_acc[sel], sel, sub_obj, sub_cons,
                                  sub_bounds, sub_cones, sub_box, config.max_extrapolation, path)
            new[sel] = z
            f_acc[sel] = f_z
        theta[active[accept]] = new[accept]
        f[active] = f_acc
        iterations[active] += 1
        kkt[active] = info["kkt"]
        inner_ok[active] &= info["converged"]
        for i, b in enumerate(active):
            history[b].append(f_acc[i])
        rel = (f_acc - f_old) / np.maximum(np.abs(f_old), 1e-12)
        done = ~accept | (rel < config.rel_tol)
        converged[active[done]] = True
        active = active[~done]
    return theta, {"objective": f, "history": history, "iterations": iterations,
                   "converged": converged & inner_ok, "kkt": kkt}


def _extrapolate(x, new, f_new, sel, objective, constraints, bounds, cones, box, max_factor,
                 path=None):
    """Best strictly feasible stretch of the step ``x -> new`` (factors 2, 4, ..)."""
    factors = 2.0 ** np.arange(1, int(np.log2(max_factor)) + 1)
    if not factors.size:
        return new, f_new
    m = len(sel)
    sub_box = _take_box(box, sel)
    cands = [x + s * (new - x) for s in factors]
    if path is not None:
        cands += [path(x, new, s, sub_box) for s in factors]
    k = len(cands)
    rep = np.tile(sel, k)
    z = np.concatenate(cands)
    # far stretches may overflow; such candidates are simply rejected
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        f_z = objective.take(rep).value(z)
        ok = np.isfinite(f_z)
        ok &= _strictly_feasible(z, [g.take(rep) for g in constraints], [b[rep] for b in bounds],
                                 [c.take(rep) for c in cones], _take_box(box, rep), max_cond=1e12)
    f_z = np.where(ok, f_z, -np.inf).reshape(k, m)
    j = np.argmax(f_z, axis=0)
    f_best = f_z[j, np.arange(m)]
    better = f_best > f_new
    z = z.reshape(k, m, -1)[j, np.arange(m)]
    return np.where(better[:, None], z, new), np.where(better, f_best, f_new)


def _geodesic(X, N, s):
    """``X^(1/2) (X^(-1/2) N X^(-1/2))^s X^(1/2)`` for stacks of positive definite matrices."""
    e, U = np.linalg.eigh(X)
    e = np.maximum(e, 1e-300)
    half = np.einsum("bij,bj,bkj->bik", U, np.sqrt(e), U.conj())
    ihalf = np.einsum("bij,bj,bkj->bik", U, 1.0 / np.sqrt(e), U.conj())
    l, V = np.linalg.eigh(ihalf @ N @ ihalf)
    with np.errstate(over="ignore", invalid="ignore"):
        inner = np.einsum("bij,bj,bkj->bik", V, np.maximum(l, 1e-300) ** s, V.conj())
        return half @ inner @ half


def _geometric_path(lay):
    """Multiplicative stretch: powers move towards their nearer bound geometrically and
    covariances follow the matrix geodesic, so positivity is kept automatically."""
    blocks = [i for i in (lay.idx_w, lay.idx_w0) if i.size]

    def path(x, new, s, box):
        z = np.array(new, copy=True)
        idx, lo, hi = box
        if idx.size:
            a, b = x[:, idx], new[:, idx]
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                down = lo + (a - lo) * ((b - lo) / (a - lo)) ** s
                up = hi - (hi - a) * ((hi - b) / (hi - a)) ** s
            # stay a float-resolvable distance off the bounds (corners are scored exactly)
            gap = 1e-12 * (hi - lo)
            z[:, idx] = np.clip(np.where(b <= a, down, up), lo + gap, hi - gap)
        for i in blocks:
            X = np.einsum("bk,kij->bij", x[:, i], lay.basis)
            N = np.einsum("bk,kij->bij", new[:, i], lay.basis)
            z[:, i] = hermitian_coords(_geodesic(X, N, s))
        return np.where(np.isfinite(z), z, new)

    return path


def _best_start(runs):
    """Per instance, the run with the highest final objective (first wins ties)."""
    best_theta, best_rec = runs[0]
    best_theta = best_theta.copy()
    best_rec = {k: (list(v) if k == "history" else v.copy()) for k, v in best_rec.items()}
    for theta, rec in runs[1:]:
        better = rec["objective"] > best_rec["objective"]
        best_theta[better] = theta[better]
        for key in ("objective", "iterations", "converged", "kkt"):
            best_rec[key][better] = rec[key][better]
        for b in np.flatnonzero(better):
            best_rec["history"][b] = rec["history"][b]
    return best_theta, best_rec


def _take_all(objective, constraints, bounds, cones, box, sel):
    return (objective.take(sel), [g.take(sel) for g in constraints], [b[sel] for b in bounds],
            [c.take(sel) for c in cones], _take_box(box, sel))


def _strictly_feasible(theta, constraints, bounds, cones, box, max_cond=None):
    """Strict feasibility; with ``max_cond`` the cone matrices must also be that well
    conditioned (far larger spreads are not resolvable in double precision)."""
    ok = np.ones(theta.shape[0], dtype=bool)
    for g, b in zip(constraints, bounds):
        v = g.value(theta)
        ok &= np.isfinite(v) & (v < b)
    for c in cones:
        M = c.at(theta)
        ok &= _barrier._lndet_checked(M)[1]
        if max_cond is not None:
            good = np.isfinite(M).all(axis=(1, 2))
            lam = np.zeros((M.shape[0], M.shape[1]))
            lam[good] = np.linalg.eigvalsh(M[good])
            ok &= good & (lam[:, 0] > 0) & (lam[:, -1] / max_cond <= lam[:, 0])
    idx, lo, hi = box
    if idx.size:
        x = theta[:, idx]
        ok &= ((x > lo) & (x < hi)).all(axis=1)
    return ok


def _power_of_two_start(values, bounds, delta, B, required=True):
    """Smallest ``c = 2**j`` making every constraint strictly feasible at ``c * I``.

    ``values(c)`` returns the list of constraint values for a ``(B,)`` array
    of scales ``c``.  With ``required=False`` instances without such a ``c``
    get NaN instead of raising.
    """
    c = np.full(B, np.nan)
    for j in range(-60, 400):
        pending = np.isnan(c)
        if not pending.any():
            break
        trial = np.full(B, 2.0 ** j)
        ok = trial >= 2 * delta
        for v, b in zip(values(trial), bounds):
            ok &= v < b
        c[pending & ok] = 2.0 ** j
    if required and np.isnan(c).any():
        raise InfeasibleStartError("no feasible scaled-identity start found")
    return c


def _mdc_start(inst, lay, constraints, R_F, scale=1.0):
    eye = np.eye(inst.n_R)
    half = 0.5 * inst.P[:, None] * np.ones((inst.B, inst.N_U))

    def values(c):
        th = lay.pack(half, c[:, None, None] * eye, c[:, None, None] * eye, inst.B)
        return [g.value(th) for g in constraints]

    c = _power_of_two_start(values, [R_F, 2 * R_F], inst.delta, inst.B) * scale
    cI = c[:, None, None] * eye
    return lay.pack(half, cI, cI, inst.B)


def _mdc_corner_start(inst, lay, constraints, R_F, layer, Omega_pd, inflate=1e-3, share=1e-3,
                      required=True):
    """Start next to a single-layer corner of the MDC problem.

    With all power in layer 1 and a very coarse central description the
    problem is path diversity at rate ``R_F``; with all power in layer 2
    and very coarse side descriptions it is path diversity at ``2 R_F``.
    ``Omega_pd`` is the path-diversity solution of the matching problem; it
    is inflated by ``1 + inflate`` to leave room for the coarse covariance,
    which is the smallest feasible power of two times ``I``.  With
    ``share=0`` the point sits exactly on the corner (it is then only used as
    a candidate, never as a barrier start).  ``required=False`` leaves NaN
    rows where no strictly feasible coarse covariance exists.
    """
    eye = np.eye(inst.n_R)
    frac = 1.0 - share if layer == 1 else share
    p1 = frac * inst.P[:, None] * np.ones((inst.B, inst.N_U))
    fine = (1.0 + inflate) * np.asarray(Omega_pd)

    def pack(c):
        coarse = c[:, None, None] * eye
        return lay.pack(p1, fine, coarse, inst.B) if layer == 1 else \
            lay.pack(p1, coarse, fine, inst.B)

    c = _power_of_two_start(lambda c: [g.value(pack(c)) for g in constraints],
                            [R_F, 2 * R_F], inst.delta, inst.B, required)
    return pack(c)


def _pd_start(inst, lay, constraints, R_F):
    """Eigenmode start for path diversity, or ``c I`` if it is not strictly feasible."""
    eye = np.eye(inst.n_R)

    def values(c):
        return [g.value(lay.pack(None, c[:, None, None] * eye, None, inst.B)) for g in constraints]

    c = _power_of_two_start(values, [R_F], inst.delta, inst.B)
    theta = lay.pack(None, c[:, None, None] * eye, None, inst.B)
    modes = lay.pack(None, eigenmode_noise(inst.Sy, inst.Sz, R_F, inst.delta), None, inst.B)
    ok = np.isfinite(modes).all(axis=1)
    ok[ok] = (constraints[0].take(np.flatnonzero(ok)).value(modes[ok]) < R_F[ok])
    theta[ok] = modes[ok]
    return theta


def eigenmode_noise(Sy, Sz, R_F, floor=0.0, margin=1e-6, coarse=1e6):
    """Stationary quantization noise of single-description compression.

    Maximizes ``log2det(Sy + W) - log2det(Sz + W)`` subject to
    ``log2det(Sy + W) - log2det(W) <= R_F``.  After whitening with
    ``Sz^(-1/2)`` both functions depend only on the eigenvalues ``lam`` of
    the whitened ``Sy`` and a noise diagonal in the same basis; the
    stationarity condition gives ``w = mu lam / (lam (1 - mu) - 1)`` for
    modes with ``lam (1 - mu) > 1``, the rest are made ``coarse`` times
    ``lam``.  ``mu`` is found by bisection so that the rate is
    ``R_F (1 - margin)``; noise levels are kept at least ``2 floor``.

    Works on stacks ``(B, n, n)``; returns ``(B, n, n)`` covariances.
    """
    Sy, Sz = np.asarray(Sy), np.asarray(Sz)
    R = np.asarray(R_F, dtype=float) * (1.0 - margin)
    ez, Uz = np.linalg.eigh(Sz)
    half = np.einsum("bij,bj,bkj->bik", Uz, np.sqrt(ez), Uz.conj())
    ihalf = np.einsum("bij,bj,bkj->bik", Uz, 1.0 / np.sqrt(ez), Uz.conj())
    lam, V = np.linalg.eigh(ihalf @ Sy @ ihalf)
    lam = np.maximum(lam, 1.0 + 1e-15)
    lo_w = 2.0 * np.asarray(floor, dtype=float)[:, None] / ez.min(axis=1)[:, None] \
        if np.ndim(floor) else np.full(lam.shape, 2.0 * floor)
    lo_w = np.broadcast_to(lo_w, lam.shape)

    def levels(mu):
        m = mu[:, None]
        den = lam * (1.0 - m) - 1.0
        w = np.where(den > 0, m * lam / np.where(den > 0, den, 1.0), coarse * lam)
        return np.clip(w, lo_w, coarse * lam)

    def rate(mu):
        w = levels(mu)
        return np.log2(1.0 + lam / w).sum(axis=1)

    lo, hi = np.zeros(lam.shape[0]), np.ones(lam.shape[0])
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        over = rate(mid) > R
        lo = np.where(over, mid, lo)
        hi = np.where(over, hi, mid)
    w = levels(hi)
    W = np.einsum("bij,bj,bkj->bik", V, w, V.conj())
    return half @ W @ half


def _check_batch(R_F, channels, cfgs):
    R_F = np.atleast_1d(np.asarray(R_F, dtype=float))
    if isinstance(channels, UplinkChannel):
        channels = [channels] * R_F.size
    if isinstance(cfgs, FronthaulConfig):
        cfgs = [cfgs] * R_F.size
    if not (R_F.size == len(channels) == len(cfgs)):
        raise ParameterError("R_F, channels and cfgs must have equal length")
    if (R_F <= 0).any():
        raise ParameterError("R_F must be positive")
    return R_F, list(channels), list(cfgs)


# ---------------------------------------------------------------------------
# public solvers


def _layer1_from_central(ch, split, Omega0):
    return layer1_sum_rate(ch, split, Omega0)


def _mdc_solution(R_F, ch, cfg, p1, Omega, Omega0, rec):
    split = PowerSplit.from_layer1(p1, ch.power_P)
    pmf = description_pmf(R_F, cfg)
    w1, w2 = layer_weights(pmf)
    Omega = as_hermitian(Omega)
    Omega0 = as_hermitian(Omega0)
    r1 = layer1_sum_rate(ch, split, Omega)
    r2 = layer2_sum_rate(ch, split, Omega0)
    sol = MdcSolution(R_F=float(R_F), split=split, Omega=Omega, Omega0=Omega0,
                      rate_layer1=r1, rate_layer2=r2,
                      expected_sum_rate=w1 * r1 + w2 * r2, pmf=pmf,
                      iterations=int(rec["iterations"]), converged=bool(rec["converged"]),
                      history=list(rec["history"]), kkt_residual=float(rec["kkt"]))
    if not sol.converged:
        sol.diagnostics.append("cccp: not converged within the iteration budget")
    if _layer1_from_central(ch, split, Omega0) < r1 - 1e-9:
        sol.diagnostics.append("layer-1 rate exceeds I(x1; yhat0): Omega0 noisier than Omega")
    return sol


def cccp_fixed_rf_batch(R_F, channels, cfgs, init=None, config=DEFAULT_CONFIG, pd_init=None,
                        pd_double=None):
    """CCCP for a batch of fixed-rate MDC problems.

    Parameters
    ----------
    R_F : array_like
        Compression rate of each instance.
    channels, cfgs : sequence or single object
        Per-instance channel and fronthaul configuration (a single object is
        broadcast).  All channels must share ``n_R`` and ``N_U``.
    init : sequence of LinearizationPoint, optional
        Starting points; they replace the default, corner and jittered
        starts.  By default ``Omega = Omega0 = c I`` with ``c`` the smallest
        feasible power of two and equal layer powers.
    pd_init : sequence of ndarray, optional
        Path-diversity noise covariances at the same rates, reused for the
        layer-1 corner start instead of solving for them again.
    pd_double : sequence of ndarray, optional
        Same at rates ``2 R_F`` (layer-2 corner start).

    Returns
    -------
    list of MdcSolution
    """
    R_F, channels, cfgs = _check_batch(R_F, channels, cfgs)
    inst = _Instances(channels)
    lay = _Layout(inst.N_U, inst.n_R)
    weights = np.array([layer_weights(description_pmf(r, c)) for r, c in zip(R_F, cfgs)])
    objective, constraints, cones, box = _mdc_functions(inst, lay, weights)
    bounds = [R_F, 2 * R_F]

    starts = []
    if init is not None:
        starts.append(np.vstack([lay.pack(p.split_t.P_k1, p.Omega_t, p.Omega0_t) for p in init]))
        for g, b in zip(constraints, bounds):
            if not (g.value(starts[0]) < b).all():
                raise InfeasibleStartError("initial point violates the rate constraints")
    else:
        starts.append(_mdc_start(inst, lay, constraints, R_F))
    rng = np.random.default_rng(config.start_seed)
    for _ in range(max(config.n_starts, 1) - 1 if init is None else 0):
        scale = 2.0 ** rng.integers(0, 8, size=inst.B)
        starts.append(_mdc_start(inst, lay, constraints, R_F, scale=scale))
    corners = config.corner_starts and init is None
    if corners:
        if pd_init is None:
            pd_init = [x.Omega for x in pd_fixed_rf_batch(R_F, channels, cfgs, config)]
        if pd_double is None:
            pd_double = [x.Omega for x in pd_fixed_rf_batch(2 * R_F, channels, cfgs, config)]
        starts.append(_mdc_corner_start(inst, lay, constraints, R_F, 1, pd_init))
        starts.append(_mdc_corner_start(inst, lay, constraints, R_F, 2, pd_double))
    path = _geometric_path(lay)
    run = lambda th, cfg: _cccp_batch(objective, constraints, bounds, cones, box, th, cfg, path)
    if len(starts) == 1:
        best_theta, best_rec = run(starts[0], config)
    else:
        screen = min(config.screen_outer, config.max_outer) if config.screen_outer > 0 \
            else config.max_outer
        best_theta, best_rec = _best_start([run(th, replace(config, max_outer=screen))
                                            for th in starts])
        left = config.max_outer - screen
        if left > 0:
            # continue only the instances the screening did not settle
            cont = np.flatnonzero(~best_rec["converged"] | (best_rec["iterations"] >= screen))
            if cont.size:
                sub = _take_all(objective, constraints, bounds, cones, box, cont)
                theta, rec = _cccp_batch(*sub, best_theta[cont], replace(config, max_outer=left), path)
                best_theta[cont] = theta
                for i, b in enumerate(cont):
                    best_rec["objective"][b] = rec["objective"][i]
                    best_rec["iterations"][b] += rec["iterations"][i]
                    best_rec["converged"][b] = rec["converged"][i]
                    best_rec["kkt"][b] = rec["kkt"][i]
                    best_rec["history"][b] = best_rec["history"][b] + rec["history"][i][1:]

    if corners:
        # the corner suprema are approached only in the limit; CCCP may creep towards
        # them for many iterations, so near-exact corner points are compared directly
        for layer, Om_pd in ((1, pd_init), (2, pd_double)):
            z = _mdc_corner_start(inst, lay, constraints, R_F, layer, Om_pd, inflate=1e-9,
                                  share=0.0, required=False)
            # with so little slack round-off can leave no feasible corner point
            ok = np.flatnonzero(np.isfinite(z).all(axis=1))
            f_z = np.full(inst.B, -np.inf)
            if ok.size:
                f_z[ok] = objective.take(ok).value(z[ok])
            for b in np.flatnonzero(np.isfinite(f_z) & (f_z > best_rec["objective"])):
                best_theta[b] = z[b]
                best_rec["objective"][b] = f_z[b]
                best_rec["history"][b] = best_rec["history"][b] + [f_z[b]]

    Om, Om0 = lay.omega(best_theta), lay.omega0(best_theta)
    out = []
    for b in range(inst.B):
        rec = {k: best_rec[k][b] for k in ("iterations", "converged", "kkt", "history")}
        out.append(_mdc_solution(R_F[b], channels[b], cfgs[b], best_theta[b, lay.idx_p],
                                 Om[b], Om0[b], rec))
    return out


def cccp_fixed_rf(R_F, ch, cfg, init=None, config=DEFAULT_CONFIG):
    """Maximize the MDC expected sum-rate at a fixed compression rate."""
    return cccp_fixed_rf_batch([R_F], [ch], [cfg],
                               init=None if init is None else [init], config=config)[0]


def solve_inner_convex(R_F, weights, ch, at, config=DEFAULT_CONFIG):
    """Solve one convexified subproblem around ``at``.

    Returns ``(split, quantizer, info)``; ``info`` carries the barrier's
    first-order residual (``kkt``), Newton-step count and the surrogate
    objective at the start and at the solution.
    """
    inst = _Instances([ch])
    lay = _Layout(inst.N_U, inst.n_R)
    weights = np.atleast_2d(np.asarray(weights, dtype=float))
    objective, constraints, cones, box = _mdc_functions(inst, lay, weights)
    R_F = np.array([float(R_F)])
    x = lay.pack(at.split_t.P_k1, at.Omega_t, at.Omega0_t)
    problem = _barrier_problem(objective, constraints, [R_F, 2 * R_F], cones, box, x)
    if not problem.feasible(x).all():
        raise InfeasibleStartError("linearization point is not strictly feasible")
    theta, info = _barrier.barrier_maximize(problem, x, mu=config.barrier_mu,
                                            gap_tol=config.gap_tol,
                                            max_newton=config.max_newton,
                                            kkt_tol=config.kkt_tol)
    f_start = problem.objective.value(x)[0][0]
    f_end = problem.objective.value(theta)[0][0]
    if f_end < f_start:
        theta, f_end = x, f_start
    split = PowerSplit.from_layer1(theta[0, lay.idx_p], ch.power_P)
    q = MdcQuantizer(lay.omega(theta)[0], lay.omega0(theta)[0])
    return split, q, {"kkt": float(info["kkt"][0]), "newton_steps": int(info["newton_steps"][0]),
                      "converged": bool(info["converged"][0]),
                      "surrogate_start": float(f_start), "surrogate_end": float(f_end)}


def pd_fixed_rf_batch(R_F, channels, cfgs, config=DEFAULT_CONFIG):
    """CCCP for a batch of fixed-rate path-diversity problems."""
    R_F, channels, cfgs = _check_batch(R_F, channels, cfgs)
    inst = _Instances(channels)
    lay = _Layout(inst.N_U, inst.n_R, power=False, central=False)
    objective, constraints, cones, box = _pd_functions(inst, lay)
    theta0 = _pd_start(inst, lay, constraints, R_F)
    theta, rec = _cccp_batch(objective, constraints, [R_F], cones, box, theta0, config,
                             _geometric_path(lay))
    Om = lay.omega(theta)
    out = []
    for b in range(inst.B):
        pmf = description_pmf(R_F[b], cfgs[b])
        Omega = as_hermitian(Om[b])
        rate = pd_sum_rate(channels[b], Omega)
        sol = PdSolution(R_F=float(R_F[b]), Omega=Omega, sum_rate=rate,
                         expected_sum_rate=(1.0 - pmf[0]) * rate, pmf=pmf,
                         iterations=int(rec["iterations"][b]),
                         converged=bool(rec["converged"][b]),
                         history=list(rec["history"][b]), kkt_residual=float(rec["kkt"][b]))
        if not sol.converged:
            sol.diagnostics.append("cccp: not converged within the iteration budget")
        out.append(sol)
    return out


def pd_fixed_rf(R_F, ch, cfg, config=DEFAULT_CONFIG):
    """Maximize the path-diversity sum-rate at a fixed compression rate."""
    return pd_fixed_rf_batch([R_F], [ch], [cfg], config=config)[0]


def zero_solution(ch, scheme="mdc"):
    """Zero-rate fallback of the rate search (nothing is sent, expected rate 0)."""
    n = ch.n_R
    nan = np.full((n, n), np.nan)
    pmf = np.array([1.0, 0.0, 0.0])
    if scheme == "pd":
        return PdSolution(R_F=0.0, Omega=nan, sum_rate=0.0, expected_sum_rate=0.0, pmf=pmf,
                          diagnostics=["zero-rate fallback"])
    if scheme != "mdc":
        raise ParameterError(f"unknown scheme {scheme!r}")
    split = PowerSplit.from_layer1(np.full(ch.N_U, ch.power_P), ch.power_P)
    return MdcSolution(R_F=0.0, split=split, Omega=nan, Omega0=nan.copy(),
                       rate_layer1=0.0, rate_layer2=0.0, expected_sum_rate=0.0,
                       pmf=pmf, diagnostics=["zero-rate fallback"])


def best_of(solutions, fallback):
    """Best expected sum-rate; ``solutions`` ascend in ``R_F`` so ties go to the lower rate."""
    best = fallback
    for sol in solutions:
        if sol.expected_sum_rate > best.expected_sum_rate:
            best = sol
    return best


def rescore(sol, cfg):
    """Path-diversity solution re-weighted for another congestion level.

    The path-diversity optimum at a given rate does not depend on the route
    statistics, only its delivery probability does.
    """
    pmf = description_pmf(sol.R_F, cfg)
    return replace(sol, pmf=pmf, expected_sum_rate=(1.0 - pmf[0]) * sol.sum_rate,
                   diagnostics=list(sol.diagnostics), history=list(sol.history))


def check_deadline(cfg):
    if deadline_slots(cfg) < 1:
        raise ParameterError("the deadline must allow at least one packet (T_F >= 1)")


def search_rf_batch(channels, cfgs, scheme="mdc", config=DEFAULT_CONFIG, return_grid=False):
    """Rate search for several channels at once.

    For each ``(channel, cfg)`` pair the fixed-rate problem is solved at every
    grid rate ``k * B_F / L_W``, ``k = 1 .. T_F + 1``, and the best point
    (or the zero-rate fallback) is returned.  With ``scheme='mdc'`` and
    ``config.corner_starts`` the path-diversity solutions at ``R_F`` and ``2 R_F`` seed
    the corner starts.
    """
    if isinstance(cfgs, FronthaulConfig):
        cfgs = [cfgs] * len(channels)
    if scheme not in ("mdc", "pd"):
        raise ParameterError(f"unknown scheme {scheme!r}")
    rows, idx = [], []
    for i, (ch, cfg) in enumerate(zip(channels, cfgs)):
        check_deadline(cfg)
        for r in rate_grid(cfg):
            rows.append((r, ch, cfg))
            idx.append(i)
    R = [r[0] for r in rows]
    chs = [r[1] for r in rows]
    cf = [r[2] for r in rows]
    pd = pd_fixed_rf_batch(R, chs, cf, config=config) \
        if scheme == "pd" or config.corner_starts else None
    if scheme == "pd":
        grid = pd
    else:
        pd_init = [s.Omega for s in pd] if pd is not None else None
        grid = cccp_fixed_rf_batch(R, chs, cf, config=config, pd_init=pd_init)
    best, per_channel = [], []
    for i, ch in enumerate(channels):
        sols = [s for s, j in zip(grid, idx) if j == i]
        per_channel.append(sols)
        best.append(best_of(sols, zero_solution(ch, scheme)))
    if return_grid:
        return best, per_channel
    return best


def search_rf_mdc(ch, cfg, config=DEFAULT_CONFIG):
    """Jointly optimize the compression rate, powers and quantization noise (MDC)."""
    return search_rf_batch([ch], [cfg], "mdc", config)[0]


def optimize_pd(ch, cfg, config=DEFAULT_CONFIG):
    """Jointly optimize the compression rate and quantization noise (path diversity)."""
    return search_rf_batch([ch], [cfg], "pd", config)[0]


def constraint_violation(sol, ch):
    """Largest violation of the rate, PSD and power constraints at ``sol`` (bits or watts)."""
    sy = received_covariance(ch)
    if isinstance(sol, PdSolution):
        g = g_individual(sy, MdcQuantizer(sol.Omega, sol.Omega))
        return max(g - sol.R_F, -np.linalg.eigvalsh(sol.Omega).min(), 0.0)
    q = MdcQuantizer(sol.Omega, sol.Omega0)
    viol = [g_individual(sy, q) - sol.R_F, g_sum(sy, q) - 2 * sol.R_F,
            -np.linalg.eigvalsh(sol.Omega).min(), -np.linalg.eigvalsh(sol.Omega0).min(),
            np.abs(sol.split.P_k1 + sol.split.P_k2 - ch.power_P).max(),
            -sol.split.P_k1.min(), -sol.split.P_k2.min(), 0.0]
    return max(viol)


def linearization_point(sol):
    return LinearizationPoint(sol.split, sol.Omega, sol.Omega0)


def with_config(config=None, **kw):
    return replace(config or DEFAULT_CONFIG, **kw)

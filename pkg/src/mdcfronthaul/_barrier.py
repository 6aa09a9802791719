"""Batched log-barrier Newton solver for sums of log-dets of affine maps.

Every function handled here has the form

    f(theta) = sum_j c_j * log2det(M0_j + sum_i theta_i E_ji) + lin . theta + const

with real variables ``theta`` (``(B, n)`` for a batch of ``B`` independent
instances).  A difference-of-convex function of this form is turned into a
convex surrogate by replacing each log-det term of the wrong sign with its
tangent plane.  The barrier solver then maximizes a concave surrogate subject
to convex surrogate constraints, PSD cones and box bounds.

Everything is vectorized over the batch; instances that finish early are
dropped from the active set.
"""

import numpy as np

from .linalg import LN2


def _cholesky_masked(X):
    """Column-by-column Cholesky of a Hermitian stack that flags failures instead of raising."""
    B, d = X.shape[0], X.shape[-1]
    L = np.zeros_like(X)
    ok = np.ones(B, dtype=bool)
    logdiag = np.zeros(B)
    with np.errstate(over="ignore", invalid="ignore"):
        for j in range(d):
            row = L[:, j, :j]
            piv = X[:, j, j].real - (row.real ** 2 + row.imag ** 2).sum(axis=1)
            ok &= piv > 0
            piv = np.where(ok, piv, 1.0)
            r = np.sqrt(piv)
            logdiag += np.log(r)
            L[:, j, j] = r
            if j + 1 < d:
                below = X[:, j + 1:, j] - (L[:, j + 1:, :j] @ row.conj()[:, :, None])[:, :, 0]
                L[:, j + 1:, j] = np.where(ok[:, None], below / r[:, None], 0.0)
    return 2.0 * logdiag, ok


def _lndet_checked(X):
    """Natural log-det and positive-definiteness flag for a stack of Hermitian matrices."""
    try:
        L = np.linalg.cholesky(X)
    except np.linalg.LinAlgError:
        return _cholesky_masked(X)
    d = np.diagonal(L, axis1=-2, axis2=-1).real
    return 2.0 * np.log(d).sum(axis=1), np.ones(X.shape[0], dtype=bool)


class Affine:
    """Affine Hermitian map ``theta -> M0 + sum_k theta[idx_k] E_k`` over a batch.

    ``M0`` has shape ``(B, d, d)``.  The directions come in groups sharing
    one ``(n, n)`` basis ``basis`` (shape ``(k, n, n)``): group ``(idx,
    offsets)`` adds ``sum_k theta[idx_k] basis_k`` to every diagonal block
    starting at an offset in ``offsets``.  ``dense = (E, idx)`` adds
    per-instance directions ``E`` of shape ``(B, k_b, d, d)``.

    Derivatives of block-embedded directions only touch ``n x n`` blocks of
    the inverse, which keeps the Hessian cheap for the large stacked
    covariances.
    """

    def __init__(self, M0, basis, groups, dense=None):
        self.M0 = np.asarray(M0, dtype=complex)
        self.d = M0.shape[-1]
        self.basis = basis
        self.groups = [(np.asarray(i, dtype=int), tuple(o)) for i, o in groups]
        k, n, _ = basis.shape
        self.n = n
        self._T = basis.reshape(k, n * n).T.copy()          # (n*n, k)
        if dense is None:
            self.Eb = np.zeros((M0.shape[0], 0, self.d, self.d), complex)
            self.idx_b = np.zeros(0, dtype=int)
        else:
            self.Eb, self.idx_b = dense[0], np.asarray(dense[1], dtype=int)
        self.idx = np.concatenate([g[0] for g in self.groups] + [self.idx_b])

    def take(self, sel):
        return Affine(self.M0[sel], self.basis, self.groups, (self.Eb[sel], self.idx_b))

    def at(self, theta):
        B, n = theta.shape[0], self.n
        X = self.M0.copy()
        for idx, offsets in self.groups:
            W = (theta[:, idx] @ self._T.T).reshape(B, n, n)
            for o in offsets:
                X[:, o:o + n, o:o + n] += W
        if self.idx_b.size:
            X += np.einsum("bk,bkij->bij", theta[:, self.idx_b], self.Eb)
        return X

    def _block_traces(self, M, offsets):
        """``tr(M E_k)`` for one group: diagonal blocks of ``M`` against the basis."""
        n = self.n
        S = sum(M[..., o:o + n, o:o + n] for o in offsets)
        return (np.swapaxes(S, -1, -2).reshape(S.shape[:-2] + (n * n,)) @ self._T).real

    def _traces(self, M):
        parts = [self._block_traces(M, o) for _, o in self.groups]
        if self.idx_b.size:
            parts.append(np.einsum("bij,bkji->bk", M, self.Eb).real)
        return np.concatenate(parts, axis=1)

    def tangent(self, theta_t):
        """Tangent plane of ``log2det`` at ``theta_t``: ``(const, lin over idx)``."""
        X = self.at(theta_t)
        Xinv = np.linalg.inv(X)
        ld = np.linalg.slogdet(X)[1]
        tr_m0 = np.einsum("bij,bji->b", Xinv, self.M0).real
        return (ld + tr_m0 - self.d) / LN2, self._traces(Xinv) / LN2

    def derivs(self, theta):
        """Natural log-det, gradient and Hessian with respect to ``theta[idx]``."""
        X = self.at(theta)
        Xinv = np.linalg.inv(X)
        ld = _lndet_checked(X)[0]
        grad = self._traces(Xinv)
        B, n, T = X.shape[0], self.n, self._T
        sizes = [g[0].size for g in self.groups] + [self.idx_b.size]
        cuts = np.concatenate([[0], np.cumsum(sizes)])
        hess = np.empty((B, cuts[-1], cuts[-1]))
        for gi, (_, off_g) in enumerate(self.groups):
            for hi in range(gi, len(self.groups)):
                off_h = self.groups[hi][1]
                # tr(A_ts E_k C_st E_l) = sum_{abce} E_k[a,b] E_l[c,e] A[e,a] C[b,c]
                K = 0
                for s_ in off_g:
                    for t_ in off_h:
                        A = Xinv[:, t_:t_ + n, s_:s_ + n]
                        C = Xinv[:, s_:s_ + n, t_:t_ + n]
                        K = K + np.swapaxes(A, 1, 2)[:, :, None, None, :] * C[:, None, :, :, None]
                K = K.reshape(B * n * n, n * n) @ T
                K = np.swapaxes(K.reshape(B, n * n, -1), 1, 2) @ T
                blk = -K.real                       # blk[l, k]
                sg, sh = slice(cuts[gi], cuts[gi + 1]), slice(cuts[hi], cuts[hi + 1])
                hess[:, sh, sg] = blk
                if hi != gi:
                    hess[:, sg, sh] = np.swapaxes(blk, 1, 2)
        if self.idx_b.size:
            sb = slice(cuts[-2], cuts[-1])
            kb, d = self.idx_b.size, self.d
            Y = Xinv[:, None] @ self.Eb
            Yf = Y.reshape(B, kb, d * d)
            Ytf = np.swapaxes(Y, -1, -2).reshape(B, kb, d * d)
            hess[:, sb, sb] = -(Yf @ np.swapaxes(Ytf, -1, -2)).real
            if self.groups:
                Z = Y @ Xinv[:, None]
                for gi, (_, off) in enumerate(self.groups):
                    sg = slice(cuts[gi], cuts[gi + 1])
                    cross = -self._block_traces(Z, off)          # (B, kb, k_g)
                    hess[:, sb, sg] = cross
                    hess[:, sg, sb] = np.swapaxes(cross, 1, 2)
        return ld, grad, hess


class DCFunction:
    """``sum_j coef_j * log2det(A_j(theta)) + const`` with per-instance coefficients."""

    def __init__(self, terms, const, n):
        self.terms = terms
        self.const = const
        self.n = n

    def take(self, sel):
        return DCFunction([(c[sel], a.take(sel)) for c, a in self.terms],
                          self.const[sel], self.n)

    def value(self, theta):
        val = self.const.copy()
        for coef, aff in self.terms:
            ld, ok = _lndet_checked(aff.at(theta))
            val += np.where(ok, coef * ld / LN2, np.where(coef == 0, 0.0, np.nan))
        return val

    def surrogate(self, theta_t, sense):
        """Convex (``sense='min'``) or concave (``'max'``) tangent surrogate at ``theta_t``."""
        B = theta_t.shape[0]
        lin = np.zeros((B, self.n))
        const = self.const.copy()
        kept = []
        for coef, aff in self.terms:
            flip = coef < 0 if sense == "max" else coef > 0
            if np.any(flip):
                if not np.all(flip | (coef == 0)):
                    raise ValueError("a term must have the same sign across the batch")
                c0, g = aff.tangent(theta_t)
                const += coef * c0
                lin[:, aff.idx] += coef[:, None] * g
            else:
                kept.append((coef, aff))
        return Surrogate(kept, lin, const, self.n)


class Surrogate:
    """``sum_j coef_j log2det(A_j(theta)) + lin . theta + const``; convex or concave."""

    def __init__(self, terms, lin, const, n):
        self.terms = terms
        self.lin = lin
        self.const = const
        self.n = n

    def take(self, sel):
        return Surrogate([(c[sel], a.take(sel)) for c, a in self.terms],
                         self.lin[sel], self.const[sel], self.n)

    def value(self, theta):
        val = self.const + (self.lin * theta).sum(axis=1)
        ok = np.ones(theta.shape[0], dtype=bool)
        for coef, aff in self.terms:
            ld, good = _lndet_checked(aff.at(theta))
            ok &= good | (coef == 0)
            val = val + coef * ld / LN2
        return val, ok

    def derivs(self, theta):
        b = theta.shape[0]
        val = self.const + (self.lin * theta).sum(axis=1)
        grad = self.lin.copy()
        hess = np.zeros((b, self.n, self.n))
        for coef, aff in self.terms:
            ld, g, h = aff.derivs(theta)
            c = coef / LN2
            val = val + c * ld
            grad[:, aff.idx] += c[:, None] * g
            hess[:, aff.idx[:, None], aff.idx] += c[:, None, None] * h
        return val, grad, hess


class BarrierProblem:
    """maximize ``objective(theta)`` s.t. ``cons_j(theta) <= bound_j``,
    ``cone_k(theta) > 0`` (PSD) and ``lo < theta[box_idx] < hi``.

    ``objective`` must be a concave ``Surrogate`` and each constraint a convex
    one.
    """

    def __init__(self, objective, constraints, cones, box_idx=(), lo=None, hi=None):
        self.objective = objective
        self.constraints = constraints
        self.cones = cones
        self.box_idx = np.asarray(box_idx, dtype=int)
        B = objective.const.shape[0]
        nb = self.box_idx.size
        self.lo = np.zeros((B, nb)) if lo is None else lo
        self.hi = np.zeros((B, nb)) if hi is None else hi
        self.n = objective.n

    @property
    def degree(self):
        """Barrier parameter ``m``: the duality gap after centering is ``m / t``."""
        return len(self.constraints) + sum(c.d for c in self.cones) + 2 * self.box_idx.size

    def take(self, sel):
        return BarrierProblem(self.objective.take(sel),
                              [(g.take(sel), b[sel]) for g, b in self.constraints],
                              [c.take(sel) for c in self.cones],
                              self.box_idx, self.lo[sel], self.hi[sel])

    def feasible(self, theta):
        return np.isfinite(self.value(theta, 1.0))

    def value(self, theta, t):
        """Barrier function ``-t f - sum log(slacks)``; ``inf`` where infeasible."""
        f, ok = self.objective.value(theta)
        psi = -t * f
        for g, bound in self.constraints:
            gv, good = g.value(theta)
            slack = bound - gv
            ok &= good & (slack > 0)
            psi = psi - np.log(np.where(slack > 0, slack, 1.0))
        for cone in self.cones:
            ld, good = _lndet_checked(cone.at(theta))
            ok &= good
            psi = psi - ld
        if self.box_idx.size:
            x = theta[:, self.box_idx]
            s1, s2 = x - self.lo, self.hi - x
            good = (s1 > 0).all(axis=1) & (s2 > 0).all(axis=1)
            ok &= good
            psi = psi - np.log(np.where(s1 > 0, s1, 1.0)).sum(axis=1) \
                - np.log(np.where(s2 > 0, s2, 1.0)).sum(axis=1)
        return np.where(ok, psi, np.inf)

    def derivs(self, theta, t):
        f, gf, hf = self.objective.derivs(theta)
        psi = -t * f
        grad = -t * gf
        hess = -t * hf
        for g, bound in self.constraints:
            gv, gg, gh = g.derivs(theta)
            # round-off can put a point that value() accepted on the boundary here;
            # the resulting nan step is then rejected by the line search
            s = bound - gv
            with np.errstate(invalid="ignore", divide="ignore"):
                psi = psi - np.log(s)
            grad = grad + gg / s[:, None]
            hess = hess + gh / s[:, None, None] \
                + gg[:, :, None] * gg[:, None, :] / (s * s)[:, None, None]
        for cone in self.cones:
            ld, g, h = cone.derivs(theta)
            psi = psi - ld
            grad[:, cone.idx] -= g
            hess[:, cone.idx[:, None], cone.idx] -= h
        if self.box_idx.size:
            x = theta[:, self.box_idx]
            s1, s2 = x - self.lo, self.hi - x
            psi = psi - np.log(s1).sum(axis=1) - np.log(s2).sum(axis=1)
            grad[:, self.box_idx] += -1.0 / s1 + 1.0 / s2
            i = self.box_idx
            hess[:, i, i] += 1.0 / s1 ** 2 + 1.0 / s2 ** 2
        return psi, grad, hess


def _newton_direction(grad, hess, floor=1e-13):
    """Newton step ``-H^{-1} g`` for a batch of positive definite Hessians.

    The Hessian is Jacobi-scaled and solved directly; near an active
    constraint it is dominated by a rank-one term and a direct solve keeps
    the small curvatures that an eigenvalue cutoff would throw away.  Where
    the solve fails or does not give a descent direction, eigenvalues below
    ``floor`` times the largest are raised to that level instead.
    """
    diag = np.abs(np.einsum("bii->bi", hess))
    d = np.sqrt(np.where((diag > 1e-300) & np.isfinite(diag), diag, 1.0))
    with np.errstate(all="ignore"):
        hs = hess / (d[:, :, None] * d[:, None, :])
        gs = grad / d
        try:
            y = np.linalg.solve(hs, gs[:, :, None])[:, :, 0]
        except np.linalg.LinAlgError:
            # one singular member fails the whole batch; retry one by one
            y = np.full_like(gs, np.nan)
            for b in range(gs.shape[0]):
                try:
                    y[b] = np.linalg.solve(hs[b], gs[b])
                except np.linalg.LinAlgError:
                    pass
        bad = ~np.isfinite(y).all(axis=1) | ((gs * y).sum(axis=1) <= 0)
        if bad.any():
            sub = hs[bad]
            sub[~np.isfinite(sub).all(axis=(1, 2))] = np.eye(hs.shape[1])
            lam, Q = np.linalg.eigh(sub)
            lam = np.maximum(lam, np.maximum(floor * lam[:, -1:], 1e-300))
            y[bad] = np.einsum("bij,bj->bi", Q, np.einsum("bji,bj->bi", Q, gs[bad]) / lam)
    return -y / d


def barrier_maximize(problem, theta0, t0=1.0, mu=16.0, gap_tol=1e-9,
                     newton_tol=1e-11, obj_tol=1e-12, max_newton=500, kkt_tol=None):
    """Maximize a batched ``BarrierProblem`` from a strictly feasible start.

    Returns ``(theta, info)`` where ``info`` holds per-instance Newton-step
    counts, the final barrier parameter, the first-order residual
    ``||grad f + grad(barrier) / t||`` at the last centering and a
    ``converged`` flag (false if the Newton budget ran out).  ``center`` is
    the iterate centered at ``t0``, a well-interior warm start for a nearby
    problem.  With ``kkt_tol`` the last centering also continues until the
    first-order residual is below it.
    """
    theta = np.array(theta0, dtype=float, copy=True)
    B = theta.shape[0]
    if not problem.feasible(theta).all():
        raise ValueError("barrier start is not strictly feasible")
    m = problem.degree
    steps = np.zeros(B, dtype=int)
    kkt = np.zeros(B)
    converged = np.ones(B, dtype=bool)
    t = t0
    stage_steps = []
    center = None
    while True:
        before = steps.sum()
        last = m / t <= gap_tol
        active = np.arange(B)
        sub = problem
        while active.size:
            if steps[active].max() >= max_newton:
                over = steps[active] >= max_newton
                converged[active[over]] = False
                keep = ~over
                active = active[keep]
                if not active.size:
                    break
                sub = sub.take(keep)
            x = theta[active]
            with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
                psi, grad, hess = sub.derivs(x, t)
            # curvature overflow right at a bound: the point cannot be improved in floats
            broken = ~(np.isfinite(psi) & np.isfinite(grad).all(axis=1)
                       & np.isfinite(hess).all(axis=(1, 2)))
            if broken.any():
                grad[broken] = 0.0
                hess[broken] = np.eye(hess.shape[1])
            step = _newton_direction(grad, hess)
            slope = (grad * step).sum(axis=1)
            lam2 = -slope
            kkt[active] = np.where(broken, np.inf, np.linalg.norm(grad, axis=1) / t)
            # lam2 / (2 t) bounds the objective error left by centering
            done = lam2 <= 2 * max(newton_tol, obj_tol * t)
            if last and kkt_tol is not None:
                done &= kkt[active] <= kkt_tol
            # same evaluation path as the trial values, so round-off cannot fake a decrease
            base = sub.value(x, t) if (~done).any() else psi
            polish = last and kkt_tol is not None
            alpha = np.ones(active.size)
            moved = np.zeros(active.size, dtype=bool)
            pending = ~done
            for _ in range(80):
                if not pending.any():
                    break
                idx = np.flatnonzero(pending)
                cand = x[idx] + alpha[idx, None] * step[idx]
                val = sub.take(idx).value(cand, t)
                # deep in the quadratic region round-off dominates the decrease test
                accept = np.isfinite(val) & (
                    (val <= psi[idx] + 0.25 * alpha[idx] * slope[idx])
                    | ((lam2[idx] < 1e-6) & (val <= psi[idx] + 1e-12 * np.abs(psi[idx]))))
                pending[idx[accept]] = False
                # while a residual target is pending, round-off level moves still count
                moved[idx[accept]] = (val[accept] < base[idx[accept]]) | polish
                alpha[idx[~accept]] *= 0.5
            alpha[pending] = 0.0
            # steps accepted without a strict decrease only shuffle round-off
            # and a rejected full step on a tiny decrement means the values are round-off
            noisy = (lam2 < 1e-6) & (alpha < 1.0)
            if last and kkt_tol is not None:
                noisy &= kkt[active] <= kkt_tol
            stalled = (~done) & (~moved | (alpha[:, None] * step + x == x).all(axis=1) | noisy)
            theta[active[moved]] = x[moved] + alpha[moved, None] * step[moved]
            steps[active[~done]] += 1
            keep = ~(done | stalled)
            if not keep.all():
                active = active[keep]
                if active.size:
                    sub = sub.take(keep)
        stage_steps.append(int(steps.sum() - before))
        if center is None:
            center = theta.copy()
        if m / t <= gap_tol:
            break
        t *= mu
    return theta, {"newton_steps": steps, "t": t, "kkt": kkt, "converged": converged,
                   "gap": m / t, "stage_steps": stage_steps, "center": center}

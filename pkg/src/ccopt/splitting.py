"""Operator-splitting solver for small dense convex quadratic programs.

Solves

    minimize    0.5 x'Px + q'x
    subject to  l <= Cx <= u

with the ADMM splitting z = Cx: a linear solve for x, a projection of z onto
[l, u], and a multiplier update, with over-relaxation and Ruiz diagonal
equilibration.  Candidate solutions are polished by solving the equality
constrained problem on the guessed active set.  Divergent runs are handed to a
recession search (itself a strictly convex QP solved by the same loop) and
infeasible runs to a linear-programming feasibility test, so that Unbounded and
Infeasible are only ever reported with a verified witness.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linprog, nnls

from .certificate import IndeterminateError

OPTIMAL = "Optimal"
UNBOUNDED = "Unbounded"
INFEASIBLE = "Infeasible"


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-8
    max_iter: int = 100000
    divergence_threshold: float = 1e6
    alpha: float = 1.6
    rho: float = 0.1
    sigma: float = 1e-6
    scaling_iters: int = 10
    check_every: int = 10
    detect_tol: float = 1e-4


@dataclass
class QPResult:
    status: str
    x: np.ndarray = None
    y: np.ndarray = None
    value: float = np.nan
    iterations: int = 0
    residuals: tuple = (np.inf, np.inf, np.inf)
    direction: np.ndarray = None
    farkas: np.ndarray = None


def _inf_norm(v):
    return float(np.max(np.abs(v))) if np.size(v) else 0.0


def qp_residuals(P, q, C, l, u, x, y):
    """Return (stationarity, complementarity, feasibility) in the infinity norm.

    Sign errors of the multipliers (y_i > 0 needs a finite upper bound and
    y_i < 0 a finite lower bound) are charged to complementarity.
    """
    Cx = C @ x
    feas = max(_inf_norm(np.maximum(Cx - u, 0.0)), _inf_norm(np.maximum(l - Cx, 0.0)))
    stat = _inf_norm(P @ x + q + C.T @ y)
    yp = np.maximum(y, 0.0)
    yn = np.maximum(-y, 0.0)
    with np.errstate(invalid="ignore"):
        gap_u = np.where(np.isfinite(u), np.abs(u - Cx), np.inf)
        gap_l = np.where(np.isfinite(l), np.abs(Cx - l), np.inf)
        comp_u = np.where(yp > 0, yp * gap_u, 0.0)
        comp_l = np.where(yn > 0, yn * gap_l, 0.0)
    comp = max(_inf_norm(comp_u), _inf_norm(comp_l))
    return stat, comp, feas


def _ruiz(P, q, C, iters):
    n, m = P.shape[0], C.shape[0]
    D = np.ones(n)
    E = np.ones(m)
    c = 1.0
    Ps, qs, Cs = P.copy(), q.copy(), C.copy()
    for _ in range(iters):
        col = np.max(np.abs(Ps), axis=0) if n else np.zeros(0)
        if m:
            col = np.maximum(col, np.max(np.abs(Cs), axis=0))
            row = np.max(np.abs(Cs), axis=1)
        else:
            row = np.zeros(0)
        col = np.where(col < 1e-4, 1.0, np.minimum(col, 1e4))
        row = np.where(row < 1e-4, 1.0, np.minimum(row, 1e4))
        dx = 1.0 / np.sqrt(col)
        dc = 1.0 / np.sqrt(row)
        Ps = dx[:, None] * Ps * dx[None, :]
        qs = dx * qs
        Cs = dc[:, None] * Cs * dx[None, :]
        D *= dx
        E *= dc
        pn = np.mean(np.max(np.abs(Ps), axis=0)) if n else 0.0
        scale = max(pn, _inf_norm(qs))
        scale = 1.0 if scale < 1e-4 else min(scale, 1e4)
        Ps /= scale
        qs /= scale
        c /= scale
    return Ps, qs, Cs, D, E, c


class _Workspace:
    def __init__(self, P, q, C, l, u, cfg):
        self.P, self.q, self.C, self.l, self.u = P, q, C, l, u
        self.cfg = cfg
        self.n, self.m = P.shape[0], C.shape[0]
        self.Ps, self.qs, self.Cs, self.D, self.E, self.c = _ruiz(P, q, C, cfg.scaling_iters)
        with np.errstate(invalid="ignore", over="ignore"):
            self.ls = np.where(np.isfinite(l), l * self.E, -np.inf)
            self.us = np.where(np.isfinite(u), u * self.E, np.inf)
        self.eq = np.isfinite(l) & np.isfinite(u) & (np.abs(u - l) <= 1e-12 * (1 + np.abs(l)))
        self.set_rho(cfg.rho)
        self.data_scale = 1.0 + max(_inf_norm(P), _inf_norm(q), _inf_norm(C),
                                    _inf_norm(l[np.isfinite(l)]), _inf_norm(u[np.isfinite(u)]))

    def set_rho(self, rho):
        self.rho = rho
        self.rho_vec = np.where(self.eq, 1e3 * rho, rho)
        K = self.Ps + self.cfg.sigma * np.eye(self.n) + self.Cs.T @ (self.rho_vec[:, None] * self.Cs)
        self.factor = sla.cho_factor(K)

    def unscale(self, xs, ys, zs):
        x = self.D * xs
        y = self.E * ys / self.c
        z = zs / self.E
        return x, y, z

    def tolerances(self, x, y):
        tol = self.cfg.tol
        return tol * self.data_scale * (1.0 + _inf_norm(x)), tol * self.data_scale * (1.0 + _inf_norm(y))


def _objective(P, q, x):
    return float(0.5 * x @ P @ x + q @ x)


def _accept(ws, x, y):
    stat, comp, feas = qp_residuals(ws.P, ws.q, ws.C, ws.l, ws.u, x, y)
    tp, td = ws.tolerances(x, y)
    ok = feas <= tp and stat <= td and comp <= max(tp, td)
    return ok, (stat, comp, feas)


def _polish(ws, x0, lower, upper):
    """Solve the equality-constrained QP on the active rows nearest to x0."""
    P, q, C, l, u = ws.P, ws.q, ws.C, ws.l, ws.u
    act = lower | upper | ws.eq
    idx = np.flatnonzero(act)
    bound = np.where(upper | ws.eq, u, l)[idx]
    n, k = ws.n, idx.size
    A = C[idx]
    K = np.zeros((n + k, n + k))
    K[:n, :n] = P
    K[:n, n:] = A.T
    K[n:, :n] = A
    rhs = np.concatenate([-q - P @ x0, bound - A @ x0])
    sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    x = x0 + sol[:n]
    y = np.zeros(ws.m)
    y[idx] = sol[n:]
    # one refinement step against roundoff in ill-conditioned systems
    res = np.concatenate([-q - P @ x - A.T @ y[idx], bound - A @ x])
    corr = np.linalg.lstsq(K, res, rcond=None)[0]
    x = x + corr[:n]
    y[idx] += corr[n:]
    # multipliers must be >= 0 on upper rows and <= 0 on lower rows
    sign = np.where(ws.eq[idx], 0.0, np.where(upper[idx], 1.0, -1.0))
    yk = y[idx]
    roundoff = 1e-12 * (1.0 + _inf_norm(yk))
    yk = np.where((sign * yk < 0) & (sign * yk >= -roundoff), 0.0, yk)
    if np.any(sign * yk < 0):
        # dependent active rows leave the multipliers non-unique; refit with the signs imposed
        free = sign == 0
        M = np.hstack([A.T * np.where(free, 1.0, sign), -A.T[:, free]])
        coef = nnls(M, -q - P @ x)[0]
        yk = np.where(free, 1.0, sign) * coef[:k]
        yk[free] -= coef[k:]
    y[idx] = yk
    return x, y


def _polish_candidates(ws, x, y, z):
    scale = max(1.0, _inf_norm(y))
    thr = 1e-7 * scale
    zt = 1e-7 * (1.0 + _inf_norm(z))
    finite_u = np.isfinite(ws.u)
    finite_l = np.isfinite(ws.l)
    by_mult = (y > thr) & finite_u, (y < -thr) & finite_l
    at_u = finite_u & (np.abs(np.where(finite_u, ws.u, 0.0) - z) <= zt)
    at_l = finite_l & (np.abs(z - np.where(finite_l, ws.l, 0.0)) <= zt)
    by_bound = at_u & (y >= -thr), at_l & (y <= thr) & ~at_u
    union = by_mult[0] | by_bound[0], (by_mult[1] | by_bound[1]) & ~(by_mult[0] | by_bound[0])
    return [by_mult, union, by_bound]


def _try_polish(ws, x, y, z, tried):
    for upper, lower in _polish_candidates(ws, x, y, z):
        key = (upper.tobytes(), lower.tobytes())
        if key in tried:
            continue
        tried.add(key)
        xp, yp = _polish(ws, x, lower, upper)
        ok, res = _accept(ws, xp, yp)
        if ok:
            return xp, yp, res
    return None


def _dual_infeasibility_hint(ws, dx, eps):
    nd = _inf_norm(dx)
    if nd < 1e-12:
        return False
    if _inf_norm(ws.P @ dx) > eps * nd or ws.q @ dx > -eps * nd:
        return False
    Cd = ws.C @ dx
    up = np.isfinite(ws.u) & (Cd > eps * nd)
    lo = np.isfinite(ws.l) & (Cd < -eps * nd)
    return not (up.any() or lo.any())


def _primal_infeasibility_hint(ws, dy, eps):
    nd = _inf_norm(dy)
    if nd < 1e-12:
        return False
    if _inf_norm(ws.C.T @ dy) > eps * nd:
        return False
    pos = np.maximum(dy, 0.0)
    neg = np.minimum(dy, 0.0)
    if np.any(~np.isfinite(ws.u) & (pos > eps * nd)) or np.any(~np.isfinite(ws.l) & (neg < -eps * nd)):
        return False
    val = np.sum(np.where(np.isfinite(ws.u), ws.u, 0.0) * pos) + np.sum(np.where(np.isfinite(ws.l), ws.l, 0.0) * neg)
    return val < -eps * nd


def recession_direction(P, q, C, l, u, cfg):
    """Search for d with Pd = 0, q'd <= -1 and Cd in the recession cone of [l, u].

    Returns the minimum-norm such d, or None when the system is infeasible.
    """
    n = P.shape[0]
    rows = [P, q[None, :]]
    lo = [np.zeros(n), [-np.inf]]
    hi = [np.zeros(n), [-1.0]]
    fu, fl = np.isfinite(u), np.isfinite(l)
    keep = fu | fl
    if keep.any():
        rows.append(C[keep])
        lo.append(np.where(fl[keep], 0.0, -np.inf))
        hi.append(np.where(fu[keep], 0.0, np.inf))
    R = np.vstack(rows)
    res = solve_qp(np.eye(n), np.zeros(n), R, np.concatenate(lo), np.concatenate(hi), cfg)
    if res.status != OPTIMAL:
        return None
    return res.x


def verify_recession(P, q, C, l, u, x0, d, tol):
    """Arithmetic check that x0 + t d is feasible and the objective decreases."""
    nd = max(_inf_norm(d), 1e-300)
    scale = 1.0 + max(_inf_norm(P), _inf_norm(q), _inf_norm(C))
    if _inf_norm(P @ d) > tol * scale * nd or q @ d >= -tol * nd:
        return False
    Cd = C @ d
    if np.any(np.isfinite(u) & (Cd > tol * scale * nd)) or np.any(np.isfinite(l) & (Cd < -tol * scale * nd)):
        return False
    vals = [_objective(P, q, x0 + t * d) for t in (0.0, 10.0, 100.0, 1000.0)]
    return all(b < a for a, b in zip(vals, vals[1:]))


def _certify_unbounded(ws, cfg):
    feas = box_feasibility(ws.C, ws.l, ws.u)
    if not feas.feasible:
        return None
    d = recession_direction(ws.P, ws.q, ws.C, ws.l, ws.u, cfg)
    if d is None:
        return None
    if not verify_recession(ws.P, ws.q, ws.C, ws.l, ws.u, feas.point, d, max(cfg.tol, 1e-9)):
        return None
    return feas.point, d


def solve_qp(P, q, C, l, u, cfg=SolverConfig()):
    """Solve the QP; raises IndeterminateError if nothing certifies within budget."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    q = np.asarray(q, dtype=float).ravel()
    n = q.size
    P = P.reshape(n, n)
    C = np.asarray(C, dtype=float).reshape(-1, n)
    l = np.asarray(l, dtype=float).ravel()
    u = np.asarray(u, dtype=float).ravel()
    if n == 0:
        feasible = bool(np.all(l <= 0) and np.all(u >= 0))
        if feasible:
            return QPResult(OPTIMAL, np.zeros(0), np.zeros(C.shape[0]), 0.0, 0, (0.0, 0.0, 0.0))
        return QPResult(INFEASIBLE, farkas=box_feasibility(C, l, u).farkas)

    ws = _Workspace(P, q, C, l, u, cfg)
    xs = np.zeros(n)
    zs = np.clip(np.zeros(ws.m), ws.ls, ws.us)
    ys = np.zeros(ws.m)
    tried = set()
    next_unbounded_try = 0
    next_infeasible_try = 0
    alpha, sigma = cfg.alpha, cfg.sigma

    for it in range(1, cfg.max_iter + 1):
        rhs = sigma * xs - ws.qs + ws.Cs.T @ (ws.rho_vec * zs - ys)
        xt = sla.cho_solve(ws.factor, rhs)
        zt = ws.Cs @ xt
        xn = alpha * xt + (1 - alpha) * xs
        zh = alpha * zt + (1 - alpha) * zs
        zn = np.clip(zh + ys / ws.rho_vec, ws.ls, ws.us)
        yn = ys + ws.rho_vec * (zh - zn)
        dxs, dys = xn - xs, yn - ys
        xs, zs, ys = xn, zn, yn

        if it % cfg.check_every:
            continue
        x, y, z = ws.unscale(xs, ys, zs)
        ok, res = _accept(ws, x, y)
        polished = _try_polish(ws, x, y, z, tried)
        if ok and (polished is None or max(polished[2]) > max(res)):
            # the ADMM iterate is only feasible to tolerance; a polished point sits exactly on its active rows
            return QPResult(OPTIMAL, x, y, _objective(P, q, x), it, res)
        if polished is not None:
            xp, yp, res = polished
            return QPResult(OPTIMAL, xp, yp, _objective(P, q, xp), it, res)

        dx = ws.D * dxs
        dy = ws.E * dys / ws.c
        diverging = _inf_norm(x) > cfg.divergence_threshold
        if it >= next_unbounded_try and (diverging or _dual_infeasibility_hint(ws, dx, cfg.detect_tol)):
            cert = _certify_unbounded(ws, cfg)
            if cert is not None:
                x0, d = cert
                return QPResult(UNBOUNDED, x0, None, -np.inf, it, direction=d)
            next_unbounded_try = 2 * it
        if it >= next_infeasible_try and (_inf_norm(y) > cfg.divergence_threshold
                                          or _primal_infeasibility_hint(ws, dy, cfg.detect_tol)):
            feas = box_feasibility(C, l, u)
            if not feas.feasible:
                return QPResult(INFEASIBLE, value=np.inf, iterations=it, farkas=feas.farkas)
            next_infeasible_try = 2 * it

        if it % (5 * cfg.check_every) == 0:
            _adapt_rho(ws, xs, ys, zs)

    feas = box_feasibility(C, l, u)
    if not feas.feasible:
        return QPResult(INFEASIBLE, value=np.inf, iterations=cfg.max_iter, farkas=feas.farkas)
    cert = _certify_unbounded(ws, cfg)
    if cert is not None:
        return QPResult(UNBOUNDED, cert[0], None, -np.inf, cfg.max_iter, direction=cert[1])
    raise IndeterminateError(f"no solution or certificate after {cfg.max_iter} iterations")


def _adapt_rho(ws, xs, ys, zs):
    Cx = ws.Cs @ xs
    Px = ws.Ps @ xs
    Cty = ws.Cs.T @ ys
    rp = _inf_norm(Cx - zs) / max(_inf_norm(Cx), _inf_norm(zs), 1e-10)
    rd = _inf_norm(Px + ws.qs + Cty) / max(_inf_norm(Px), _inf_norm(Cty), _inf_norm(ws.qs), 1e-10)
    new = ws.rho * np.sqrt(rp / max(rd, 1e-12))
    new = float(np.clip(new, 1e-6, 1e6))
    if new > 5 * ws.rho or new < ws.rho / 5:
        ws.set_rho(new)


@dataclass
class FeasibilityResult:
    feasible: bool
    point: np.ndarray = None
    farkas: np.ndarray = None
    rows: dict = field(default_factory=dict)


def halfspace_feasibility(C, c, eq_rows=(), strict_rows=(), margin=0.0):
    """Decide {x : C x <= c, equality on eq_rows, slack >= margin on strict_rows}.

    A feasible answer returns a point that maximises the smallest inequality
    slack (capped at 1) with a light l1 pull toward the origin.  An infeasible
    answer returns y with y >= 0 off the equality rows, C'y = 0 and c'y < 0.
    """
    C = np.atleast_2d(np.asarray(C, dtype=float))
    c = np.asarray(c, dtype=float).ravel()
    k, n = C.shape
    eq = np.zeros(k, dtype=bool)
    eq[list(eq_rows)] = True
    strict = np.zeros(k, dtype=bool)
    strict[list(strict_rows)] = True
    shift = np.where(strict & ~eq, margin, 0.0)
    cc = c - shift
    ineq = ~eq
    if k == 0:
        return FeasibilityResult(True, np.zeros(n))

    # variables [x+, x-, t]
    nv = 2 * n + 1
    obj = np.concatenate([1e-6 * np.ones(2 * n), [-1.0]])
    A_ub = np.zeros((int(ineq.sum()), nv))
    A_ub[:, :n] = C[ineq]
    A_ub[:, n:2 * n] = -C[ineq]
    A_ub[:, -1] = 1.0
    b_ub = cc[ineq]
    A_eq = np.zeros((int(eq.sum()), nv))
    A_eq[:, :n] = C[eq]
    A_eq[:, n:2 * n] = -C[eq]
    b_eq = cc[eq]
    bounds = [(0, None)] * (2 * n) + [(0, 1)]
    res = linprog(obj, A_ub=A_ub if A_ub.size else None, b_ub=b_ub if A_ub.size else None,
                  A_eq=A_eq if A_eq.size else None, b_eq=b_eq if A_eq.size else None,
                  bounds=bounds, method="highs")
    if res.status == 0:
        x = res.x[:n] - res.x[n:2 * n]
        return FeasibilityResult(True, x)
    return FeasibilityResult(False, farkas=_farkas(C, cc, eq))


def _farkas(C, c, eq):
    k, n = C.shape
    # y = y+ - y-, with y- forced to zero on inequality rows
    obj = np.concatenate([c, -c])
    A_eq = np.hstack([C.T, -C.T])
    b_eq = np.zeros(n)
    A_ub = np.ones((1, 2 * k))
    bounds = [(0, None)] * k + [(0, None) if e else (0, 0) for e in eq]
    res = linprog(obj, A_ub=A_ub, b_ub=[1.0], A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs")
    if res.status != 0:
        return None
    y = res.x[:k] - res.x[k:]
    return y


def box_feasibility(C, l, u, margin=0.0):
    """Feasibility of l <= Cx <= u, reported through the halfspace form."""
    C = np.asarray(C, dtype=float)
    k, n = C.shape
    rows, rhs, eq_rows, origin = [], [], [], []
    for i in range(k):
        if np.isfinite(l[i]) and np.isfinite(u[i]) and l[i] == u[i]:
            eq_rows.append(len(rows))
            rows.append(C[i])
            rhs.append(u[i])
            origin.append((i, 1.0))
            continue
        if np.isfinite(u[i]):
            rows.append(C[i])
            rhs.append(u[i])
            origin.append((i, 1.0))
        if np.isfinite(l[i]):
            rows.append(-C[i])
            rhs.append(-l[i])
            origin.append((i, -1.0))
    if not rows:
        return FeasibilityResult(True, np.zeros(n))
    res = halfspace_feasibility(np.array(rows), np.array(rhs), eq_rows,
                                strict_rows=range(len(rows)) if margin > 0 else (), margin=margin)
    if not res.feasible and res.farkas is not None:
        folded = np.zeros(k)
        for (i, sgn), val in zip(origin, res.farkas):
            folded[i] += sgn * val
        res.farkas = folded
    return res

"""Restricted convex programs, their KKT residuals, and LP feasibility.

A restricted program fixes the support pattern of the cardinality term:

    primal, inequality:  min Theta(x)  s.t. (Bx - b)_i <= 0 for i not in S
    primal, equality:    min Theta(x)  s.t. (Bx - b)_i  = 0 for i not in S
    dual, plus:          min Xi(w)     s.t. z_i = 0 off S, z_i >= 0 on S
    dual, zero:          min Xi(w)     s.t. z_i = 0 off S

Each is compiled into a quadratic program over the original variables plus
epigraph variables for the l1 and box-support atoms, then handed to the
splitting solver.  Multipliers are reported per cardinality row: for the primal
they are the z of the KKT system (nonnegative on inequality rows), for the
dual they are u = Bx - b (nonpositive on the rows of S under the plus variant).
"""

from dataclasses import dataclass, field

import numpy as np

from . import atoms
from .certificate import Certificate, DimensionError, UnsupportedAtomError, Verdict
from .model import DualModel, PrimalModel, theta, xi
from .splitting import (INFEASIBLE, OPTIMAL, UNBOUNDED, SolverConfig, halfspace_feasibility,
                        solve_qp)

INEQUALITY = "InequalityOnComplement"
EQUALITY = "EqualityOnComplement"
DUAL_PLUS = "DualPlus"
DUAL_ZERO = "DualZero"

__all__ = [
    "INEQUALITY", "EQUALITY", "DUAL_PLUS", "DUAL_ZERO", "OPTIMAL", "UNBOUNDED", "INFEASIBLE",
    "SolverConfig", "RestrictedProgram", "SolveOutcome", "solve_restricted", "kkt_residual",
    "lp_feasibility", "restricted_program",
]


@dataclass(frozen=True, eq=False)
class RestrictedProgram:
    model: object
    subset: tuple
    flavor: str

    def __post_init__(self):
        r = self.model.r
        s = tuple(sorted(set(int(i) for i in self.subset)))
        if any(i < 0 or i >= r for i in s):
            raise DimensionError(f"subset {s} is not inside range({r})")
        object.__setattr__(self, "subset", s)
        primal = isinstance(self.model, PrimalModel)
        if primal and self.flavor not in (INEQUALITY, EQUALITY):
            raise ValueError(f"{self.flavor} is not a primal restriction")
        if not primal and self.flavor not in (DUAL_PLUS, DUAL_ZERO):
            raise ValueError(f"{self.flavor} is not a dual restriction")

    @property
    def is_primal(self):
        return isinstance(self.model, PrimalModel)

    @property
    def in_subset(self):
        mask = np.zeros(self.model.r, dtype=bool)
        mask[list(self.subset)] = True
        return mask


def restricted_program(model, subset):
    """The restriction matching the model's own cardinality variant."""
    zero_variant = model.variant == "Zero"
    if isinstance(model, PrimalModel):
        return RestrictedProgram(model, subset, EQUALITY if zero_variant else INEQUALITY)
    return RestrictedProgram(model, subset, DUAL_ZERO if zero_variant else DUAL_PLUS)


@dataclass
class SolveOutcome:
    status: str
    point: np.ndarray = None
    multipliers: np.ndarray = None
    value: float = np.nan
    kkt_residuals: tuple = (np.inf, np.inf, np.inf)
    iterations: int = 0
    witness: dict = field(default_factory=dict)


class _Lift:
    """Accumulates 0.5 v'Pv + q'v + const and rows lo <= Mv <= hi over growing v."""

    def __init__(self, nvar):
        self.nv = nvar
        self.quads = []
        self.lins = []
        self.const = 0.0
        self.rows = []

    def aux(self, k):
        start = self.nv
        self.nv += k
        return np.arange(start, start + k)

    def _pad(self, M):
        M = np.atleast_2d(M)
        if M.shape[1] < self.nv:
            M = np.hstack([M, np.zeros((M.shape[0], self.nv - M.shape[1]))])
        return M

    def quad(self, M, c):
        """Add 0.5 ||Mv + c||^2 through auxiliaries t = Mv + c.

        Forming M'M would square the conditioning of M; with the auxiliaries
        the Hessian is an identity block and M enters only as constraint rows.
        """
        k = M.shape[0]
        if not k:
            return
        t = self.aux(k)
        rows = self._pad(M)
        rows[:, t] = -np.eye(k)
        self.row(rows, -c, -c)
        sel = np.zeros((k, self.nv))
        sel[np.arange(k), t] = 1.0
        self.quads.append((sel, np.zeros(k)))

    def lin(self, coef, const=0.0):
        self.lins.append(coef)
        self.const += const

    def row(self, M, lo, hi):
        start = sum(r[0].shape[0] for r in self.rows)
        if M.shape[0]:
            self.rows.append((M, np.asarray(lo, float), np.asarray(hi, float)))
        return np.arange(start, start + M.shape[0])

    def assemble(self):
        nv = self.nv
        P = np.zeros((nv, nv))
        q = np.zeros(nv)
        const = self.const
        for M, c in self.quads:
            M = self._pad(M)
            P += M.T @ M
            q += M.T @ c
            const += 0.5 * float(c @ c)
        for coef in self.lins:
            q[: coef.size] += coef
        if self.rows:
            C = np.vstack([self._pad(M) for M, _, _ in self.rows])
            lo = np.concatenate([r[1] for r in self.rows])
            hi = np.concatenate([r[2] for r in self.rows])
        else:
            C, lo, hi = np.zeros((0, nv)), np.zeros(0), np.zeros(0)
        return P, q, const, C, lo, hi


def _add_atom(lift, atom, M, c):
    """Add psi(Mv + c) for the atom psi."""
    k, p, d = atom.kind, atom.params, atom.dim
    if d == 0 or k == atoms.ZERO:
        return
    if k == atoms.QUADRATIC:
        m = p["mask"]
        lift.quad(M[m], c[m] - p["center"][m])
        return
    if k == atoms.QUADRATIC_CONJ:
        m = p["mask"]
        a = p["center"][m]
        lift.quad(M[m], c[m])
        lift.lin(M[m].T @ a, float(a @ c[m]))
        lift.row(M[~m], -c[~m], -c[~m])
        return
    if k == atoms.L1:
        a = p["center"]
        t = lift.aux(d)
        T = np.zeros((d, lift.nv))
        T[np.arange(d), t] = 1.0
        Mp = lift._pad(M)
        lift.row(Mp - T, np.full(d, -np.inf), a - c)
        lift.row(-Mp - T, np.full(d, -np.inf), c - a)
        coef = np.zeros(lift.nv)
        coef[t] = 1.0
        lift.lin(coef)
        return
    if k == atoms.LINEAR_INF_BALL:
        a = p["center"]
        lift.lin(M.T @ a, float(a @ c))
        lift.row(M, -1.0 - c, 1.0 - c)
        return
    if k in (atoms.BOX, atoms.NONNEG, atoms.ZERO_SET):
        lo, hi = atoms._bounds(atom)
        keep = np.isfinite(lo) | np.isfinite(hi)
        lift.row(M[keep], (lo - c)[keep], (hi - c)[keep])
        return
    if k == atoms.POLYHEDRON:
        C, c0 = p["C"], p["c"]
        lift.row(C @ M, np.full(c0.size, -np.inf), c0 - C @ c)
        return
    if k == atoms.BOX_SUPPORT:
        _add_box_support(lift, p["lower"], p["upper"], M, c)
        return
    raise UnsupportedAtomError(f"{k} cannot enter a restricted program")


def _add_box_support(lift, lo, hi, M, c):
    for i in range(lo.size):
        Mi, ci = M[i:i + 1], c[i]
        fl, fh = np.isfinite(lo[i]), np.isfinite(hi[i])
        if fl and fh and lo[i] == hi[i]:
            lift.lin(Mi[0] * lo[i], lo[i] * ci)
        elif fl and fh:
            t = lift.aux(1)[0]
            Mp = lift._pad(Mi)
            for bound in (lo[i], hi[i]):
                row = bound * Mp
                row[0, t] = -1.0
                lift.row(row, [-np.inf], [-bound * ci])
            coef = np.zeros(lift.nv)
            coef[t] = 1.0
            lift.lin(coef)
        elif fh:
            lift.lin(Mi[0] * hi[i], hi[i] * ci)
            lift.row(Mi, [-ci], [np.inf])
        elif fl:
            lift.lin(Mi[0] * lo[i], lo[i] * ci)
            lift.row(Mi, [-np.inf], [-ci])
        else:
            lift.row(Mi, [-ci], [-ci])


def _compile(prog):
    """QP data plus the row indices that carry the cardinality multipliers."""
    model = prog.model
    r = model.r
    inside = prog.in_subset
    if prog.is_primal:
        n = model.n
        lift = _Lift(n)
        _add_atom(lift, model.f, np.eye(n), np.zeros(n))
        _add_atom(lift, model.g, model.A, np.zeros(model.m))
        out = np.flatnonzero(~inside)
        lo = model.b[out] if prog.flavor == EQUALITY else np.full(out.size, -np.inf)
        rows = lift.row(model.B[out], lo, model.b[out])
        return lift, n, out, rows
    m = model.m
    nw = m + r
    lift = _Lift(nw)
    _add_atom(lift, model.f_conj, -model.Q.T, np.zeros(model.n))
    _add_atom(lift, model.g_conj, np.eye(m, nw), np.zeros(m))
    coef = np.zeros(nw)
    coef[m:] = model.b
    lift.lin(coef)
    eye_z = np.eye(nw)[m:]
    if prog.flavor == DUAL_PLUS:
        idx = np.arange(r)
        lo = np.zeros(r)
        hi = np.where(inside, np.inf, 0.0)
    else:
        idx = np.flatnonzero(~inside)
        lo = hi = np.zeros(idx.size)
    rows = lift.row(eye_z[idx], lo, hi)
    return lift, nw, idx, rows


def solve_restricted(prog, cfg=SolverConfig()):
    """Solve one restricted program; raises IndeterminateError on budget exhaustion."""
    lift, nvar, card_rows, qp_rows = _compile(prog)
    P, q, const, C, lo, hi = lift.assemble()
    res = solve_qp(P, q, C, lo, hi, cfg)
    r = prog.model.r
    if res.status == INFEASIBLE:
        return SolveOutcome(INFEASIBLE, value=np.inf, iterations=res.iterations,
                            witness={"farkas": res.farkas})
    if res.status == UNBOUNDED:
        return SolveOutcome(UNBOUNDED, point=res.x[:nvar], value=-np.inf, iterations=res.iterations,
                            witness={"base_point": res.x[:nvar], "direction": res.direction[:nvar]})
    point = res.x[:nvar]
    mult = np.zeros(r)
    mult[card_rows] = res.y[qp_rows]
    value = theta(prog.model, point) if prog.is_primal else xi(prog.model, point)
    if not np.isfinite(value):
        value = float(0.5 * res.x @ P @ res.x + q @ res.x + const)
    kkt = kkt_residual(prog, point, mult, cfg)
    return SolveOutcome(OPTIMAL, point, mult, value, kkt, res.iterations)


def _combine(*parts):
    """Minkowski-style combination of linear images of SubdiffSets."""
    offset = sum(L @ s.offset for L, s in parts)
    basis = np.hstack([L @ s.basis for L, s in parts])
    lower = np.concatenate([s.lower for _, s in parts])
    upper = np.concatenate([s.upper for _, s in parts])
    return atoms.SubdiffSet(offset, basis, lower, upper)


def kkt_residual(prog, point, multipliers, cfg=SolverConfig()):
    """(stationarity, complementarity, feasibility) of a restricted program.

    Stationarity is the distance from zero to the set of Lagrangian
    subgradients, minimised over the subdifferentials of the atoms.
    """
    model = prog.model
    point = np.asarray(point, dtype=float).ravel()
    m_vec = np.asarray(multipliers, dtype=float).ravel()
    inside = prog.in_subset
    if prog.is_primal:
        x = point
        sf = atoms.subdifferential(model.f, x)
        sg = atoms.subdifferential(model.g, model.A @ x)
        if sf is None or sg is None:
            return (np.inf, np.inf, np.inf)
        total = _combine((np.eye(model.n), sf), (model.A.T, sg))
        stat = atoms.distance_to_set(total, -model.B.T @ m_vec, cfg)[0]
        u = model.B @ x - model.b
        out = ~inside
        if prog.flavor == EQUALITY:
            feas = np.max(np.abs(u[out]), initial=0.0)
            comp = np.max(np.abs(m_vec[inside]), initial=0.0)
        else:
            feas = np.max(np.maximum(u[out], 0.0), initial=0.0)
            comp = max(np.max(np.abs(m_vec[out] * u[out]), initial=0.0),
                       np.max(np.maximum(-m_vec[out], 0.0), initial=0.0),
                       np.max(np.abs(m_vec[inside]), initial=0.0))
        return float(stat), float(comp), float(feas)

    y, z = model.split(point)
    qv = -(model.A.T @ y) - model.B.T @ z
    sf = atoms.subdifferential(model.f_conj, qv)
    sg = atoms.subdifferential(model.g_conj, y)
    if sf is None or sg is None:
        return (np.inf, np.inf, np.inf)
    m, r = model.m, model.r
    L1 = np.vstack([-model.A, -model.B])
    L2 = np.vstack([np.eye(m), np.zeros((r, m))])
    total = _combine((L1, sf), (L2, sg))
    total.offset = total.offset + np.concatenate([np.zeros(m), model.b + m_vec])
    stat = atoms.distance_to_set(total, np.zeros(m + r), cfg)[0]
    feas = np.max(np.abs(z[~inside]), initial=0.0)
    if prog.flavor == DUAL_PLUS:
        feas = max(feas, np.max(np.maximum(-z[inside], 0.0), initial=0.0))
        comp = max(np.max(np.abs(m_vec[inside] * z[inside]), initial=0.0),
                   np.max(np.maximum(m_vec[inside], 0.0), initial=0.0))
    else:
        comp = np.max(np.abs(m_vec[inside]), initial=0.0)
    return float(stat), float(comp), float(feas)


def lp_feasibility(C_mat, c_vec, eq_rows=(), strict_rows=(), margin=0.0):
    """Certificate for {x | C x <= c, equality on eq_rows, slack >= margin on strict_rows}.

    Pass carries a point checked by substitution; fail carries y >= 0 (free on
    equality rows) with C'y = 0 and (c - margin on strict rows)'y < 0.
    """
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    C = np.atleast_2d(np.asarray(C_mat, dtype=float))
    c = np.asarray(c_vec, dtype=float).ravel()
    if C.shape[0] != c.size:
        raise DimensionError("C_mat and c_vec disagree on the number of rows")
    res = halfspace_feasibility(C, c, eq_rows, strict_rows, margin)
    eq = np.zeros(c.size, dtype=bool)
    eq[list(eq_rows)] = True
    strict = np.zeros(c.size, dtype=bool)
    strict[list(strict_rows)] = True
    rhs = c - np.where(strict & ~eq, margin, 0.0)
    if res.feasible:
        x = res.point
        slack = rhs - C @ x
        tol = atoms.domain_slack(x) * (1.0 + np.max(np.abs(C), initial=0.0))
        viol = max(np.max(-slack[~eq], initial=0.0), np.max(np.abs(slack[eq]), initial=0.0))
        verdict = Verdict.PASS if viol <= tol else Verdict.INDETERMINATE
        return Certificate(verdict, {"point": x, "slack": slack}, float(viol))
    y = res.farkas
    if y is None:
        return Certificate(Verdict.INDETERMINATE, message="LP solver returned neither point nor certificate")
    resid = float(np.max(np.abs(C.T @ y), initial=0.0))
    return Certificate(Verdict.FAIL, {"farkas": y, "value": float(rhs @ y)}, resid,
                       ("infeasible",), "Farkas alternative holds")

"""Global solutions by subset enumeration, threshold values and the mu rule.

For the dual, min G = min over S of (min Xi on the restriction for S) + sum of
mu over S.  The same identity with lambda and the primal restrictions gives the
primal global value.  Subsets are visited by increasing size and then
lexicographically, and ties keep the earlier subset.
"""

import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cardinality import card_eval_rows, support
from .certificate import IndeterminateError
from .model import DUAL_SIDE, PRIMAL_SIDE, DualModel, PrimalModel, xi
from . import atoms
from .splitting import SolverConfig
from .subsolver import OPTIMAL, UNBOUNDED, restricted_program, solve_restricted

INDETERMINATE = "Indeterminate"
DEFAULT_CAP = 20


@dataclass
class SubsetRecord:
    subset: tuple
    status: str
    value: float
    total: float
    point: np.ndarray = None

    @property
    def bitmask(self):
        return sum(1 << i for i in self.subset)


@dataclass
class GlobalReport:
    which: str
    best_value: float
    best_point: np.ndarray
    best_subset: tuple
    per_subset: list
    attained: bool
    indeterminate: list = field(default_factory=list)

    def record(self, subset):
        key = tuple(sorted(subset))
        for rec in self.per_subset:
            if rec.subset == key:
                return rec
        raise KeyError(key)

    def to_json(self):
        from .certificate import to_jsonable

        return {
            "which": self.which,
            "best_value": to_jsonable(self.best_value),
            "best_point": to_jsonable(self.best_point) if self.best_point is not None else None,
            "best_subset": list(self.best_subset),
            "attained": self.attained,
            "indeterminate_subsets": [list(s) for s in self.indeterminate],
            "per_subset": [
                {"subset": list(rec.subset), "bitmask": rec.bitmask, "status": rec.status,
                 "value": to_jsonable(rec.value), "total": to_jsonable(rec.total)}
                for rec in self.per_subset
            ],
        }

    def to_csv(self):
        lines = ["bitmask,status,value"]
        for rec in self.per_subset:
            lines.append(f"{rec.bitmask},{rec.status},{rec.value!r}")
        return "\n".join(lines) + "\n"


def subsets_in_order(r):
    for k in range(r + 1):
        yield from itertools.combinations(range(r), k)


def thread_count(threads=None):
    if threads is not None:
        return max(1, int(threads))
    return max(1, int(os.environ.get("CCOPT_THREADS", "1")))


def _solve_one(model, subset, weights, cfg):
    try:
        out = solve_restricted(restricted_program(model, subset), cfg)
    except IndeterminateError:
        return SubsetRecord(subset, INDETERMINATE, np.nan, np.nan)
    total = out.value + float(np.sum(weights[list(subset)]))
    return SubsetRecord(subset, out.status, out.value, total, out.point)


def _check_side(which, model):
    if which == PRIMAL_SIDE and isinstance(model, PrimalModel):
        return model.lam
    if which == DUAL_SIDE and isinstance(model, DualModel):
        return model.mu
    raise ValueError(f"which={which!r} does not match a {type(model).__name__}")


def enumerate_global(which, model, cap=DEFAULT_CAP, cfg=SolverConfig(), threads=None):
    """Global value of (P) or (D) over all 2^r support patterns."""
    weights = _check_side(which, model)
    r = model.r
    if r > cap:
        raise ValueError(f"r = {r} exceeds the enumeration cap {cap}")
    subsets = list(subsets_in_order(r))
    workers = thread_count(threads)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(lambda s: _solve_one(model, s, weights, cfg), subsets))
    else:
        records = [_solve_one(model, s, weights, cfg) for s in subsets]

    indeterminate = [rec.subset for rec in records if rec.status == INDETERMINATE]
    unbounded = [rec for rec in records if rec.status == UNBOUNDED]
    if unbounded:
        return GlobalReport(which, -np.inf, None, unbounded[0].subset, records, False, indeterminate)
    best = None
    for rec in records:
        if rec.status == OPTIMAL and (best is None or rec.total < best.total - 1e-9 * (1.0 + abs(best.total))):
            best = rec
    if best is None:
        return GlobalReport(which, np.inf, None, (), records, False, indeterminate)
    return GlobalReport(which, best.total, best.point, best.subset, records, True, indeterminate)


@dataclass
class Thresholds:
    eta0: float
    eta1: float
    eta2: float
    T_star: tuple

    # the zero variant names the same three values xi0, xi1, xi2
    @property
    def xi0(self):
        return self.eta0

    @property
    def xi1(self):
        return self.eta1

    @property
    def xi2(self):
        return self.eta2


def _family_min(records, keep):
    vals = [(-np.inf if rec.status == UNBOUNDED else rec.value) for rec in records
            if keep(set(rec.subset)) and rec.status in (OPTIMAL, UNBOUNDED)]
    return float(min(vals)) if vals else np.inf


def compute_thresholds(dual, T_star, cfg=SolverConfig(), report=None, reference_point=None):
    """eta0 (S = T*), eta1 (S a proper subset of T*), eta2 (S not inside T*).

    These are unweighted restricted values of Xi.  An empty family gives +inf.
    When reference_point is supplied it must have support T* and be a
    smallest-cardinality solution: Xi there equals eta0 and eta1 > eta0.
    """
    T = set(int(i) for i in T_star)
    if report is None:
        report = enumerate_global(DUAL_SIDE, dual, cfg=cfg)
    if any(rec.status == INDETERMINATE for rec in report.per_subset):
        raise IndeterminateError("some restricted programs were indeterminate")
    eta0 = _family_min(report.per_subset, lambda S: S == T)
    eta1 = _family_min(report.per_subset, lambda S: S < T)
    eta2 = _family_min(report.per_subset, lambda S: not S <= T)
    th = Thresholds(eta0, eta1, eta2, tuple(sorted(T)))
    if reference_point is not None:
        _, z = dual.split(reference_point)
        if set(support(z).tolist()) != T:
            raise ValueError("reference point does not have support T*")
        val = xi(dual, reference_point)
        if abs(val - eta0) > 1e-6 * (1.0 + abs(eta0)):
            raise ValueError(f"reference point value {val} differs from eta0 = {eta0}")
        if not eta1 > eta0:
            raise ValueError("reference point is not of smallest cardinality (eta1 <= eta0)")
    return th


def select_mu(th, r, slack=0.25):
    """Weights mu that make the reference dual point a global minimizer.

    sum over T* of mu equals (eta1 - eta0) / (1 + slack), and every mu_j off T*
    exceeds max(eta1 - eta2, 0) by slack * (1 + |eta1 - eta2|).
    """
    if not slack > 0:
        raise ValueError("slack must be positive for the strict bound off T*")
    T = list(th.T_star)
    if not th.eta1 > th.eta0:
        raise ValueError("eta1 <= eta0: the reference point is not of smallest cardinality")
    off = [j for j in range(r) if j not in set(T)]
    mu = np.empty(r)
    if T:
        mu[T] = (th.eta1 - th.eta0) / (len(T) * (1.0 + slack))
    if off:
        if th.eta2 == -np.inf:
            raise ValueError("eta2 = -inf: no finite mu satisfies the bound off T*")
        gap = th.eta1 - th.eta2
        mu[off] = max(gap, 0.0) + slack * (1.0 + abs(gap))
    if not np.all(np.isfinite(mu)) or not np.all(mu > 0):
        raise ValueError(f"selection rule gives non-finite or nonpositive weights {mu}")
    return mu


def mu_rule_holds(th, mu):
    """Exact check of the two selection inequalities."""
    T = set(th.T_star)
    inside = sum(mu[i] for i in T) <= th.eta1 - th.eta0
    bound = max(th.eta1 - th.eta2, 0.0)
    outside = all(mu[j] > bound for j in range(mu.size) if j not in T)
    return bool(inside and outside)


def brute_force_grid(which, model, box, points_per_axis):
    """Minimum of F or G over a uniform lattice on the box (test oracle)."""
    _check_side(which, model)
    dim = model.n if which == PRIMAL_SIDE else model.m + model.r
    if dim > 4:
        raise ValueError(f"grid oracle supports dimension <= 4, got {dim}")
    if points_per_axis > 201 or points_per_axis < 2:
        raise ValueError("points_per_axis must lie in [2, 201]")
    low, high = (np.broadcast_to(np.asarray(v, dtype=float), (dim,)) for v in box)
    axes = [np.linspace(lo, hi, points_per_axis) for lo, hi in zip(low, high)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
    best = np.inf
    for chunk in np.array_split(mesh, max(1, mesh.shape[0] // 200000)):
        if which == PRIMAL_SIDE:
            vals = (atoms.atom_eval_rows(model.f, chunk) + atoms.atom_eval_rows(model.g, chunk @ model.A.T)
                    + card_eval_rows(model.card, chunk @ model.B.T - model.b))
        else:
            Y, Z = chunk[:, : model.m], chunk[:, model.m:]
            Qt = -(Y @ model.A) - Z @ model.B
            vals = (atoms.atom_eval_rows(model.f_conj, Qt) + atoms.atom_eval_rows(model.g_conj, Y)
                    + Z @ model.b + card_eval_rows(model.card, Z))
        best = min(best, float(np.min(vals)))
    return best

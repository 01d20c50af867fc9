"""Sufficient conditions for the existence of global solutions.

Asymptotic level stability is not decided in general.  It is granted to atom
classes known to have it: convex piecewise linear-quadratic functions, which
covers every catalog atom and both derived conjugates.
"""

import numpy as np

from . import atoms
from .certificate import Certificate, DimensionError, Verdict
from .model import PrimalModel
from .stationarity import P_PLUS, P_ZERO, feasibility_system
from .subsolver import lp_feasibility

_PLQ = atoms.CATALOG + atoms.DERIVED
_INDICATORS = (atoms.BOX, atoms.NONNEG, atoms.ZERO_SET, atoms.POLYHEDRON, atoms.EXP_EPIGRAPH)


def bounded_below(atom):
    """True, False, or None when the class is not in the registry."""
    if atom.kind == atoms.BOX_SUPPORT:
        lo, hi = atom.params["lower"], atom.params["upper"]
        return bool(np.all(lo <= 0) and np.all(hi >= 0))
    if atom.kind in _PLQ or atom.kind in atoms.OUTSIDE_CATALOG:
        return True
    return None


def is_als(atom):
    return atom.kind in _PLQ


def _domain_point(p, rows_support):
    """LP feasibility of {x in dom f, Ax in dom g} plus the B rows off rows_support."""
    C, c, eq = feasibility_system(P_ZERO if p.variant == "Zero" else P_PLUS, p, rows_support)
    return lp_feasibility(C, c, eq)


def existence_check_primal(p):
    """Verdict on the four sufficient conditions for a global primal solution.

    An indicator f gives the constraint set C = dom f.  A piecewise
    linear-quadratic f is folded into g, with C the whole space.
    """
    if not isinstance(p, PrimalModel):
        raise TypeError("existence_check_primal expects a PrimalModel")
    if p.f.kind in _INDICATORS:
        route = "indicator"
        loss = (p.g,)
    elif p.f.kind in _PLQ:
        route = "plq"
        loss = (p.f, p.g)
    else:
        return Certificate(Verdict.INDETERMINATE, {"route": None}, flags=("unsupported_f",),
                           message=f"no existence rule for f of kind {p.f.kind}")
    polyhedral = atoms.has_polyhedral_domain(p.f)
    below = [bounded_below(a) for a in loss]
    conditions = {
        "polyhedral_constraint": polyhedral,
        "als": all(is_als(a) for a in loss),
        "asymptotic_nonnegative": all(b is True for b in below),
    }
    if not polyhedral:
        conditions["feasible"] = None
        return Certificate(Verdict.FAIL, {"route": route, "conditions": conditions},
                           flags=("non_polyhedral_constraint",),
                           message="the constraint set is not polyhedral")
    if any(b is None for b in below):
        return Certificate(Verdict.INDETERMINATE, {"route": route, "conditions": conditions},
                           flags=("bounded_below_undecidable",))
    lp = _domain_point(p, range(p.r))
    conditions["feasible"] = lp.verdict is Verdict.PASS
    witness = {"route": route, "conditions": conditions}
    witness.update(lp.witness)
    verdict = Verdict.PASS if all(conditions.values()) else Verdict.FAIL
    failed = tuple(k for k, v in conditions.items() if not v)
    return Certificate(verdict, witness, lp.residual, failed)


def existence_check_dual(p, variant=None):
    """Sufficient condition for a global solution of the stationary dual of p.

    F must be bounded below and {x in dom f, Ax in dom g, Bx <= b} (plus
    variant) or {..., Bx = b} (zero variant) must be nonempty.  Every catalog
    domain is polyhedral, where relative interiors can be dropped.
    """
    if not isinstance(p, PrimalModel):
        raise TypeError("existence_check_dual expects a PrimalModel")
    variant = p.variant if variant is None else variant.capitalize()
    below = [bounded_below(a) for a in (p.f, p.g)]
    if any(b is None for b in below):
        return Certificate(Verdict.INDETERMINATE, flags=("bounded_below_undecidable",))
    if not (atoms.has_polyhedral_domain(p.f) and atoms.has_polyhedral_domain(p.g)):
        return Certificate(Verdict.INDETERMINATE, flags=("relative_interior_undecidable",))
    C, c, eq = feasibility_system(P_ZERO if variant == "Zero" else P_PLUS, p, ())
    lp = lp_feasibility(C, c, eq)
    if not all(below):
        return Certificate(Verdict.FAIL, lp.witness, lp.residual, ("not_bounded_below",))
    return lp


def svm_separability(points, labels):
    """Is there (omega, omega0) with c_i (<omega, q_i> + omega0) >= 1 for all i?

    On success the witness is rescaled so that the smallest margin equals 1.
    """
    Qm = np.atleast_2d(np.asarray(points, dtype=float))
    c = np.asarray(labels, dtype=float).ravel()
    if Qm.shape[0] != c.size:
        raise DimensionError(f"{Qm.shape[0]} points but {c.size} labels")
    if not np.all(np.isin(c, (-1.0, 1.0))):
        raise ValueError("labels must be -1 or +1")
    Qbar = np.hstack([Qm, np.ones((c.size, 1))])
    margin_rows = c[:, None] * Qbar
    cert = lp_feasibility(-margin_rows, -np.ones(c.size))
    if cert.verdict is Verdict.PASS:
        x = cert.witness["point"]
        x = x / np.min(margin_rows @ x)
        cert.witness = {"omega": x[:-1], "omega0": float(x[-1]), "margins": margin_rows @ x}
    return cert

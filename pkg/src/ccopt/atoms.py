"""Catalog of proper lsc convex functions used as f and g.

Every atom evaluates, proxes, and reports membership in its domain.  Atoms
with a registered closed-form conjugate return it as another atom (two derived
kinds, ``QuadraticConjugate`` and ``BoxSupport``, exist for that purpose), so
conjugate evaluation is plain evaluation of the conjugate atom.
"""

from dataclasses import dataclass, field

import numpy as np

from .certificate import Certificate, DimensionError, UnsupportedAtomError, Verdict

ZERO = "Zero"
QUADRATIC = "QuadraticHalfSqNorm"
L1 = "L1Norm"
BOX = "IndicatorBox"
NONNEG = "IndicatorNonneg"
ZERO_SET = "IndicatorZero"
POLYHEDRON = "IndicatorPolyhedron"
LINEAR_INF_BALL = "LinearPlusIndicatorInfBall"
QUADRATIC_CONJ = "QuadraticConjugate"
BOX_SUPPORT = "BoxSupport"
EXP_EPIGRAPH = "IndicatorExpEpigraph"

CATALOG = (ZERO, QUADRATIC, L1, BOX, NONNEG, ZERO_SET, POLYHEDRON, LINEAR_INF_BALL)
DERIVED = (QUADRATIC_CONJ, BOX_SUPPORT)
# Present only so the existence diagnostics can be shown a non-polyhedral set.
OUTSIDE_CATALOG = (EXP_EPIGRAPH,)

_POLYHEDRAL_DOMAIN = CATALOG + DERIVED
_FULL_DOMAIN = (ZERO, QUADRATIC, L1)


@dataclass(frozen=True, eq=False)
class ConvexAtom:
    kind: str
    dim: int
    params: dict = field(default_factory=dict)

    def __repr__(self):
        return f"ConvexAtom({self.kind}, dim={self.dim})"


def _vec(x, n=None, name="vector"):
    v = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
    if n is not None and v.size != n:
        raise DimensionError(f"{name} has length {v.size}, expected {n}")
    return v


def zero(n):
    return ConvexAtom(ZERO, int(n))


def quadratic(center, mask=None):
    """Half squared distance to ``center`` on the coordinates selected by ``mask``."""
    a = _vec(center)
    m = np.ones(a.size, dtype=bool) if mask is None else np.asarray(mask, dtype=bool).ravel()
    if m.size != a.size:
        raise DimensionError("mask and center lengths differ")
    return ConvexAtom(QUADRATIC, a.size, {"center": a, "mask": m})


def l1_norm(center):
    a = _vec(center)
    return ConvexAtom(L1, a.size, {"center": a})


def box(lower, upper):
    lo, hi = _vec(lower), _vec(upper)
    if lo.size != hi.size:
        raise DimensionError("box bounds have different lengths")
    if np.any(lo > hi) or np.any(lo == np.inf) or np.any(hi == -np.inf):
        raise ValueError("box needs lower <= upper with a nonempty interval per coordinate")
    return ConvexAtom(BOX, lo.size, {"lower": lo, "upper": hi})


def nonneg(n):
    return ConvexAtom(NONNEG, int(n))


def zero_set(n):
    return ConvexAtom(ZERO_SET, int(n))


def polyhedron(C_mat, c_vec):
    """Indicator of {x | C_mat x <= c_vec}; the set must be nonempty."""
    C = np.atleast_2d(np.asarray(C_mat, dtype=float))
    c = _vec(c_vec, C.shape[0], "c_vec")
    from .splitting import halfspace_feasibility

    if not halfspace_feasibility(C, c).feasible:
        raise ValueError("polyhedron is empty")
    return ConvexAtom(POLYHEDRON, C.shape[1], {"C": C, "c": c})


def linear_inf_ball(center):
    """<center, x> plus the indicator of the unit l-infinity ball."""
    a = _vec(center)
    return ConvexAtom(LINEAR_INF_BALL, a.size, {"center": a})


def exp_epigraph():
    """Indicator of {x in R^2 | x2 >= exp(x1)}: closed, convex, not polyhedral."""
    return ConvexAtom(EXP_EPIGRAPH, 2)


def _quadratic_conj(center, mask):
    return ConvexAtom(QUADRATIC_CONJ, center.size, {"center": center, "mask": mask})


def _box_support(lower, upper):
    return ConvexAtom(BOX_SUPPORT, lower.size, {"lower": lower, "upper": upper})


def _bounds(atom):
    """Box-type atoms as (lower, upper) vectors, else None."""
    n = atom.dim
    if atom.kind == BOX:
        return atom.params["lower"], atom.params["upper"]
    if atom.kind == NONNEG:
        return np.zeros(n), np.full(n, np.inf)
    if atom.kind == ZERO_SET:
        return np.zeros(n), np.zeros(n)
    if atom.kind == LINEAR_INF_BALL:
        return -np.ones(n), np.ones(n)
    return None


def conjugate_atom(atom):
    """Closed-form Fenchel conjugate as an atom; raises UnsupportedAtomError."""
    k, n, p = atom.kind, atom.dim, atom.params
    if k == ZERO:
        return zero_set(n)
    if k == ZERO_SET:
        return zero(n)
    if k == QUADRATIC:
        return _quadratic_conj(p["center"], p["mask"])
    if k == QUADRATIC_CONJ:
        return quadratic(p["center"], p["mask"])
    if k == L1:
        return linear_inf_ball(p["center"])
    if k == LINEAR_INF_BALL:
        return l1_norm(p["center"])
    if k == NONNEG:
        return box(np.full(n, -np.inf), np.zeros(n))
    if k == BOX:
        return _box_support(p["lower"], p["upper"])
    if k == BOX_SUPPORT:
        return box(p["lower"], p["upper"])
    raise UnsupportedAtomError(f"no closed-form conjugate registered for {k}")


def has_conjugate(atom):
    return atom.kind not in (POLYHEDRON, EXP_EPIGRAPH)


def domain_slack(x):
    return 1e-9 * (1.0 + (np.max(np.abs(x)) if np.size(x) else 0.0))


def _rows_in_domain(atom, X):
    """Domain membership for each row of X, with the polyhedral slack rule."""
    k, p = atom.kind, atom.params
    slack = 1e-9 * (1.0 + np.max(np.abs(X), axis=1, initial=0.0))
    s = slack[:, None]
    b = _bounds(atom)
    if b is not None:
        return np.all((X >= b[0] - s) & (X <= b[1] + s), axis=1)
    if k == POLYHEDRON:
        return np.all(X @ p["C"].T <= p["c"] + s, axis=1)
    if k == QUADRATIC_CONJ:
        return np.all(np.abs(X[:, ~p["mask"]]) <= s, axis=1)
    if k == BOX_SUPPORT:
        lo, hi = p["lower"], p["upper"]
        return np.all(((X <= s) | np.isfinite(hi)) & ((X >= -s) | np.isfinite(lo)), axis=1)
    if k == EXP_EPIGRAPH:
        return X[:, 1] >= np.exp(np.minimum(X[:, 0], 700.0)) - slack
    return np.ones(X.shape[0], dtype=bool)


def _in_domain(atom, x):
    return bool(_rows_in_domain(atom, x[None, :])[0])


def atom_eval_rows(atom, X):
    """psi at every row of X; +inf for rows outside the domain."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != atom.dim:
        raise DimensionError(f"points have length {X.shape[1]}, expected {atom.dim}")
    k, p = atom.kind, atom.params
    if k == QUADRATIC:
        d = (X - p["center"])[:, p["mask"]]
        val = 0.5 * np.sum(d * d, axis=1)
    elif k == QUADRATIC_CONJ:
        m = p["mask"]
        val = 0.5 * np.sum(X[:, m] ** 2, axis=1) + X[:, m] @ p["center"][m]
    elif k == L1:
        val = np.sum(np.abs(X - p["center"]), axis=1)
    elif k == LINEAR_INF_BALL:
        val = X @ p["center"]
    elif k == BOX_SUPPORT:
        hi = np.where(np.isfinite(p["upper"]), p["upper"], 0.0)
        lo = np.where(np.isfinite(p["lower"]), p["lower"], 0.0)
        val = np.sum(np.where(X > 0, hi * X, lo * X), axis=1)
    else:
        val = np.zeros(X.shape[0])
    return np.where(_rows_in_domain(atom, X), val, np.inf)


def atom_eval(atom, x):
    """psi(x) as a float, +inf exactly when x is outside the domain."""
    x = _vec(x, atom.dim, "point")
    return float(atom_eval_rows(atom, x[None, :])[0])


def atom_conjugate_eval(atom, q):
    return atom_eval(conjugate_atom(atom), _vec(q, atom.dim, "point"))


def atom_prox(atom, v, t):
    """argmin_p psi(p) + ||p - v||^2 / (2t)."""
    v = _vec(v, atom.dim, "point")
    if not t > 0:
        raise ValueError("prox step must be positive")
    k, p = atom.kind, atom.params
    if k == ZERO:
        return v.copy()
    if k == QUADRATIC:
        out = v.copy()
        m = p["mask"]
        out[m] = (v[m] + t * p["center"][m]) / (1.0 + t)
        return out
    if k == QUADRATIC_CONJ:
        out = np.zeros_like(v)
        m = p["mask"]
        out[m] = (v[m] - t * p["center"][m]) / (1.0 + t)
        return out
    if k == L1:
        d = v - p["center"]
        return p["center"] + np.sign(d) * np.maximum(np.abs(d) - t, 0.0)
    if k == LINEAR_INF_BALL:
        return np.clip(v - t * p["center"], -1.0, 1.0)
    b = _bounds(atom)
    if b is not None:
        return np.clip(v, b[0], b[1])
    if k == BOX_SUPPORT:
        # Moreau decomposition: prox of a support function from the projection
        return v - t * np.clip(v / t, p["lower"], p["upper"])
    if k == POLYHEDRON:
        from .splitting import solve_qp

        n = atom.dim
        res = solve_qp(np.eye(n), -v, p["C"], np.full(p["c"].size, -np.inf), p["c"])
        return res.x
    raise UnsupportedAtomError(f"no prox registered for {k}")


@dataclass
class SubdiffSet:
    """The set {offset + basis @ theta : lower <= theta <= upper}."""

    offset: np.ndarray
    basis: np.ndarray
    lower: np.ndarray
    upper: np.ndarray


def _coordinate_set(offset, lower, upper, free):
    idx = np.flatnonzero(free)
    basis = np.zeros((offset.size, idx.size))
    basis[idx, np.arange(idx.size)] = 1.0
    return SubdiffSet(offset, basis, lower[idx], upper[idx])


def _normal_cone_box(x, lo, hi, tol):
    n = x.size
    at_lo = np.isfinite(lo) & (x - lo <= tol)
    at_hi = np.isfinite(hi) & (hi - x <= tol)
    lower = np.where(at_lo, -np.inf, 0.0)
    upper = np.where(at_hi, np.inf, 0.0)
    return _coordinate_set(np.zeros(n), lower, upper, at_lo | at_hi)


def subdifferential(atom, x, active_tol=None):
    """The convex subdifferential at x as a SubdiffSet, or None off the domain.

    Coordinates within ``active_tol`` of a kink or bound are treated as on it.
    """
    x = _vec(x, atom.dim, "point")
    if not _in_domain(atom, x):
        return None
    tol = active_tol if active_tol is not None else 1e-8 * (1.0 + np.max(np.abs(x), initial=0.0))
    k, p, n = atom.kind, atom.params, atom.dim
    if k == ZERO:
        return _coordinate_set(np.zeros(n), np.zeros(n), np.zeros(n), np.zeros(n, bool))
    if k == QUADRATIC:
        g = np.where(p["mask"], x - p["center"], 0.0)
        return _coordinate_set(g, np.zeros(n), np.zeros(n), np.zeros(n, bool))
    if k == QUADRATIC_CONJ:
        m = p["mask"]
        g = np.where(m, x + p["center"], 0.0)
        return _coordinate_set(g, np.full(n, -np.inf), np.full(n, np.inf), ~m)
    if k == L1:
        d = x - p["center"]
        kink = np.abs(d) <= tol
        g = np.where(kink, 0.0, np.sign(d))
        return _coordinate_set(g, -np.ones(n), np.ones(n), kink)
    if k == LINEAR_INF_BALL:
        s = _normal_cone_box(x, -np.ones(n), np.ones(n), tol)
        s.offset = s.offset + p["center"]
        return s
    b = _bounds(atom)
    if b is not None:
        return _normal_cone_box(x, b[0], b[1], tol)
    if k == BOX_SUPPORT:
        lo, hi = p["lower"], p["upper"]
        flat = np.abs(x) <= tol
        g = np.where(flat, 0.0, np.where(x > 0, np.where(np.isfinite(hi), hi, 0.0),
                                           np.where(np.isfinite(lo), lo, 0.0)))
        return _coordinate_set(g, lo, hi, flat)
    if k == POLYHEDRON:
        C, c = p["C"], p["c"]
        act = C @ x >= c - tol * (1.0 + np.abs(c))
        G = C[act].T
        return SubdiffSet(np.zeros(n), G, np.zeros(G.shape[1]), np.full(G.shape[1], np.inf))
    raise UnsupportedAtomError(f"no subdifferential registered for {k}")


def distance_to_set(s, target, cfg=None):
    """Distance from target to a SubdiffSet, the nearest member and its parameters."""
    from .splitting import SolverConfig, solve_qp

    r = s.offset - target
    G = s.basis
    if G.shape[1] == 0:
        return float(np.linalg.norm(r)), s.offset.copy(), np.zeros(0)
    # minimise 0.5 |t|^2 with t = r + G theta; avoids squaring the conditioning of G
    k, d = G.shape[1], r.size
    P = np.zeros((k + d, k + d))
    P[k:, k:] = np.eye(d)
    C = np.vstack([np.hstack([np.eye(k), np.zeros((k, d))]), np.hstack([-G, np.eye(d)])])
    lo = np.concatenate([s.lower, r])
    hi = np.concatenate([s.upper, r])
    res = solve_qp(P, np.zeros(k + d), C, lo, hi, cfg or SolverConfig())
    theta = np.clip(res.x[:k], s.lower, s.upper)
    member = s.offset + G @ theta
    return float(np.linalg.norm(member - target)), member, theta


def atom_subdiff_check(atom, x, q, tol=1e-8):
    """Is q a subgradient of atom at x?  Fenchel-Young residual test.

    Atoms without a registered conjugate fall back to the distance from q to
    the subdifferential computed from its closed-form description.
    """
    x = _vec(x, atom.dim, "point")
    q = _vec(q, atom.dim, "subgradient")
    fx = atom_eval(atom, x)
    if not np.isfinite(fx):
        return Certificate(Verdict.FAIL, {"x": x, "q": q}, np.inf, ("domain_violation",), "x outside dom")
    if has_conjugate(atom):
        fq = atom_conjugate_eval(atom, q)
        resid = abs(fx + fq - float(x @ q)) if np.isfinite(fq) else np.inf
    else:
        resid = distance_to_set(subdifferential(atom, x), q)[0]
    verdict = Verdict.PASS if resid <= tol else Verdict.FAIL
    return Certificate(verdict, {"x": x, "q": q}, resid)


def atom_domain_check(atom, x, want_relative_interior=False):
    """Membership in dom psi, or in its relative interior when asked.

    Polyhedral domains answer plain membership for the relative interior (the
    function is polyhedral or has full domain); the exponential epigraph is
    tested for strict interiority.
    """
    x = _vec(x, atom.dim, "point")
    inside = _in_domain(atom, x)
    flags = ()
    if inside and want_relative_interior and atom.kind == EXP_EPIGRAPH:
        inside = bool(x[1] > np.exp(min(x[0], 700.0)))
        flags = ("strict_interior",)
    return Certificate(Verdict.PASS if inside else Verdict.FAIL, {"x": x}, 0.0 if inside else np.inf, flags)


def has_polyhedral_domain(atom):
    return atom.kind in _POLYHEDRAL_DOMAIN


def has_full_domain(atom):
    return atom.kind in _FULL_DOMAIN


def domain_rows(atom):
    """dom psi as (M, lower, upper) with lower <= M x <= upper."""
    n, k, p = atom.dim, atom.kind, atom.params
    b = _bounds(atom)
    if b is not None:
        keep = np.isfinite(b[0]) | np.isfinite(b[1])
        return np.eye(n)[keep], b[0][keep], b[1][keep]
    if k == POLYHEDRON:
        return p["C"], np.full(p["c"].size, -np.inf), p["c"]
    if k == QUADRATIC_CONJ:
        m = ~p["mask"]
        return np.eye(n)[m], np.zeros(m.sum()), np.zeros(m.sum())
    if k == BOX_SUPPORT:
        lo, hi = p["lower"], p["upper"]
        keep = ~np.isfinite(lo) | ~np.isfinite(hi)
        lower = np.where(np.isfinite(lo), -np.inf, 0.0)
        upper = np.where(np.isfinite(hi), np.inf, 0.0)
        return np.eye(n)[keep], lower[keep], upper[keep]
    if k == EXP_EPIGRAPH:
        raise UnsupportedAtomError("exponential epigraph has no linear description")
    return np.zeros((0, n)), np.zeros(0), np.zeros(0)


def atom_to_json(atom):
    params = {}
    for key, val in atom.params.items():
        params[key] = val.tolist() if isinstance(val, np.ndarray) else val
    return {"kind": atom.kind, "dim": atom.dim, "params": _encode_inf(params)}


def _encode_inf(obj):
    if isinstance(obj, dict):
        return {k: _encode_inf(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_encode_inf(v) for v in obj]
    if isinstance(obj, float) and np.isinf(obj):
        return "inf" if obj > 0 else "-inf"
    return obj


def atom_from_json(obj):
    kind, n = obj["kind"], int(obj["dim"])
    p = obj.get("params", {})

    def arr(key):
        return np.array(p[key], dtype=float)

    if kind == ZERO:
        atom = zero(n)
    elif kind == NONNEG:
        atom = nonneg(n)
    elif kind == ZERO_SET:
        atom = zero_set(n)
    elif kind == QUADRATIC:
        atom = quadratic(arr("center"), np.asarray(p.get("mask", [True] * n), dtype=bool))
    elif kind == QUADRATIC_CONJ:
        atom = _quadratic_conj(arr("center"), np.asarray(p["mask"], dtype=bool))
    elif kind == L1:
        atom = l1_norm(arr("center"))
    elif kind == LINEAR_INF_BALL:
        atom = linear_inf_ball(arr("center"))
    elif kind == BOX:
        atom = box(arr("lower"), arr("upper"))
    elif kind == BOX_SUPPORT:
        atom = _box_support(arr("lower"), arr("upper"))
    elif kind == POLYHEDRON:
        atom = polyhedron(arr("C"), arr("c"))
    elif kind == EXP_EPIGRAPH:
        atom = exp_epigraph()
    else:
        raise ValueError(f"unknown atom kind {kind!r}")
    if atom.dim != n:
        raise DimensionError(f"atom {kind} declares dim {n} but its parameters give {atom.dim}")
    return atom

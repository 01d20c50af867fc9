"""Containers for the primal and stationary dual problems.

Primal:  F(x) = f(x) + g(Ax) + Phi_lambda(Bx - b)
Dual:    G(w) = <b, z> + f*(-A'y - B'z) + g*(y) + Psi_mu(z),   w = [y; z]

The convex parts are Theta(x) = f(x) + g(Ax) and
Xi(w) = f*(-Q'w) + g*(y) + <b, z> with Q = [A; B].
"""

from dataclasses import dataclass

import numpy as np

from . import atoms
from .cardinality import DUAL, PLUS, PRIMAL, ZERO, CardFlavor, card_eval
from .certificate import DimensionError

PRIMAL_SIDE = "primal"
DUAL_SIDE = "dual"


def ext_sum(*terms):
    """Sum of extended reals; +inf absorbs, and inf - inf is a hard error."""
    vals = [float(t) for t in terms]
    if any(v == np.inf for v in vals) and any(v == -np.inf for v in vals):
        raise ArithmeticError("inf - inf in an objective sum")
    return float(sum(vals))


@dataclass(frozen=True, eq=False)
class PrimalModel:
    f: atoms.ConvexAtom
    g: atoms.ConvexAtom
    A: np.ndarray
    B: np.ndarray
    b: np.ndarray
    card: CardFlavor

    @property
    def n(self):
        return self.f.dim

    @property
    def m(self):
        return self.g.dim

    @property
    def r(self):
        return self.b.size

    @property
    def variant(self):
        return self.card.variant

    @property
    def lam(self):
        return self.card.weights

    def data_scale(self):
        return _data_scale(self.A, self.B, self.b, self.f, self.g)


@dataclass(frozen=True, eq=False)
class DualModel:
    f_conj: atoms.ConvexAtom
    g_conj: atoms.ConvexAtom
    A: np.ndarray
    B: np.ndarray
    b: np.ndarray
    card: CardFlavor
    primal: PrimalModel = None

    @property
    def n(self):
        return self.f_conj.dim

    @property
    def m(self):
        return self.g_conj.dim

    @property
    def r(self):
        return self.b.size

    @property
    def variant(self):
        return self.card.variant

    @property
    def mu(self):
        return self.card.weights

    @property
    def Q(self):
        return np.vstack([self.A, self.B])

    def split(self, w):
        w = np.asarray(w, dtype=float).ravel()
        if w.size != self.m + self.r:
            raise DimensionError(f"dual point has length {w.size}, expected {self.m + self.r}")
        return w[: self.m], w[self.m:]

    def data_scale(self):
        return _data_scale(self.A, self.B, self.b, self.f_conj, self.g_conj)


def _data_scale(A, B, b, *atom_list):
    vals = [np.max(np.abs(M), initial=0.0) for M in (A, B, b)]
    for a in atom_list:
        for v in a.params.values():
            if isinstance(v, np.ndarray) and v.dtype != bool:
                fin = v[np.isfinite(v)]
                vals.append(np.max(np.abs(fin), initial=0.0))
    return float(max(vals))


def _matrix(M, rows, cols, name):
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        M = M.reshape(rows, cols)
    M = np.atleast_2d(M)
    if M.shape != (rows, cols):
        raise DimensionError(f"{name} has shape {M.shape}, expected {(rows, cols)}")
    return M


def build_primal(f, g, A, B, b, variant, lam):
    """Validated primal model; lam may be a scalar (broadcast to all r rows)."""
    b = np.atleast_1d(np.asarray(b, dtype=float)).ravel()
    n, m, r = f.dim, g.dim, b.size
    A = _matrix(A, m, n, "A")
    B = _matrix(B, r, n, "B")
    lam = np.asarray(lam, dtype=float)
    if lam.ndim == 0:
        lam = np.full(r, float(lam))
    if lam.size != r:
        raise DimensionError(f"lambda has length {lam.size}, expected {r}")
    variant = _variant(variant)
    return PrimalModel(f, g, A, B, b, CardFlavor(PRIMAL, variant, lam))


def _variant(v):
    key = str(v).lower()
    if key in ("zero", "0"):
        return ZERO
    if key in ("plus", "+"):
        return PLUS
    raise ValueError(f"variant must be 'zero' or 'plus', got {v!r}")


def derive_dual(p, mu=None):
    """Stationary dual of p with weights mu (defaults to lambda).

    Pairs Phi_plus with Psi_plus and Phi_zero with Psi_zero.
    """
    mu = p.lam.copy() if mu is None else np.asarray(mu, dtype=float)
    if mu.ndim == 0:
        mu = np.full(p.r, float(mu))
    if mu.size != p.r:
        raise DimensionError(f"mu has length {mu.size}, expected {p.r}")
    return DualModel(atoms.conjugate_atom(p.f), atoms.conjugate_atom(p.g), p.A, p.B, p.b,
                     CardFlavor(DUAL, p.variant, mu), p)


def with_mu(d, mu):
    return DualModel(d.f_conj, d.g_conj, d.A, d.B, d.b, CardFlavor(DUAL, d.variant, mu), d.primal)


def theta(p, x):
    x = np.asarray(x, dtype=float).ravel()
    if x.size != p.n:
        raise DimensionError(f"primal point has length {x.size}, expected {p.n}")
    return ext_sum(atoms.atom_eval(p.f, x), atoms.atom_eval(p.g, p.A @ x))


def xi(d, w):
    y, z = d.split(w)
    q = -(d.A.T @ y) - d.B.T @ z
    return ext_sum(atoms.atom_eval(d.f_conj, q), atoms.atom_eval(d.g_conj, y), float(d.b @ z))


@dataclass
class Objective:
    value: float
    convex: float
    cardinality: float


def objective_eval(which, model, point, zero_tol=None):
    """F(x) or G(w) together with the convex part and the cardinality part."""
    point = np.asarray(point, dtype=float).ravel()
    if which == PRIMAL_SIDE:
        conv = theta(model, point)
        card = card_eval(model.card, model.B @ point - model.b, zero_tol)
    elif which == DUAL_SIDE:
        conv = xi(model, point)
        card = card_eval(model.card, model.split(point)[1], zero_tol)
    else:
        raise ValueError(f"which must be 'primal' or 'dual', got {which!r}")
    return Objective(ext_sum(conv, card), conv, card)


def _arr(M):
    return np.asarray(M, dtype=float).tolist()


def primal_to_json(p, mu=None):
    out = {
        "f": atoms.atom_to_json(p.f),
        "g": atoms.atom_to_json(p.g),
        "A": _arr(p.A),
        "B": _arr(p.B),
        "b": _arr(p.b),
        "variant": p.variant.lower(),
        "lambda": _arr(p.lam),
    }
    if mu is not None:
        out["mu"] = _arr(mu)
    return out


def primal_from_json(obj):
    """Primal model from its JSON form; returns (model, mu or None)."""
    missing = [k for k in ("f", "g", "A", "B", "b", "variant", "lambda") if k not in obj]
    if missing:
        raise KeyError(f"model is missing field(s): {', '.join(missing)}")
    f = atoms.atom_from_json(obj["f"])
    g = atoms.atom_from_json(obj["g"])
    n, m = f.dim, g.dim
    A = np.array(obj["A"], dtype=float).reshape(m, n) if m * n == 0 else np.array(obj["A"], dtype=float)
    b = np.array(obj["b"], dtype=float)
    B = np.array(obj["B"], dtype=float)
    if B.size == 0:
        B = B.reshape(b.size, n)
    p = build_primal(f, g, A, B, b, obj["variant"], np.array(obj["lambda"], dtype=float))
    mu = np.array(obj["mu"], dtype=float) if "mu" in obj else None
    return p, mu

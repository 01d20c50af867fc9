"""Weighted cardinality penalties and their limiting subdifferentials.

Primal side (applied to u = Bx - b):
    zero variant  counts nonzero entries,   sum lambda_i [u_i != 0]
    plus variant  counts positive entries,  sum lambda_i [u_i > 0]
Dual side (applied to z):
    zero variant  sum mu_i [z_i != 0]
    plus variant  the same plus the indicator of z >= 0

Subdifferentials are products of {0}, half-lines and lines, so they are
represented by their per-coordinate pattern and never built as sets.
"""

from dataclasses import dataclass

import numpy as np

from .certificate import Certificate, DimensionError, Verdict

PRIMAL = "PrimalPhi"
DUAL = "DualPsi"
ZERO = "Zero"
PLUS = "Plus"

# per-coordinate admissible sets for a subgradient candidate
_FIXED, _FREE, _NONNEG = 0, 1, 2


@dataclass(frozen=True, eq=False)
class CardFlavor:
    side: str
    variant: str
    weights: np.ndarray

    def __post_init__(self):
        if self.side not in (PRIMAL, DUAL) or self.variant not in (ZERO, PLUS):
            raise ValueError(f"unknown flavor {self.side}/{self.variant}")
        w = np.atleast_1d(np.asarray(self.weights, dtype=float)).ravel()
        if not np.all(w > 0) or not np.all(np.isfinite(w)):
            raise ValueError("cardinality weights must be finite and strictly positive")
        object.__setattr__(self, "weights", w)

    @property
    def r(self):
        return self.weights.size

    def paired(self, weights):
        """The flavor on the other side with the same variant."""
        return CardFlavor(DUAL if self.side == PRIMAL else PRIMAL, self.variant, weights)

    def to_json(self):
        return {"side": self.side, "variant": self.variant, "weights": self.weights.tolist()}

    @classmethod
    def from_json(cls, obj):
        return cls(obj["side"], obj["variant"], np.asarray(obj["weights"], dtype=float))


def default_zero_tol(point):
    return 1e-8 * (1.0 + (np.max(np.abs(point)) if np.size(point) else 0.0))


def _check(flavor, u):
    u = np.atleast_1d(np.asarray(u, dtype=float)).ravel()
    if u.size != flavor.r:
        raise DimensionError(f"vector has length {u.size}, expected {flavor.r}")
    return u


def support(u, zero_tol=None):
    """Indices of entries that are nonzero beyond zero_tol."""
    tol = default_zero_tol(u) if zero_tol is None else zero_tol
    return np.flatnonzero(np.abs(u) > tol)


def card_eval(flavor, u, zero_tol=None):
    u = _check(flavor, u)
    tol = default_zero_tol(u) if zero_tol is None else zero_tol
    w = flavor.weights
    if flavor.side == DUAL and flavor.variant == PLUS and np.any(u < -tol):
        return np.inf
    if flavor.side == PRIMAL and flavor.variant == PLUS:
        return float(np.sum(w[u > tol]))
    return float(np.sum(w[np.abs(u) > tol]))


def card_eval_rows(flavor, U):
    """card_eval applied to every row of U with the default zero_tol per row."""
    U = np.asarray(U, dtype=float)
    if U.ndim == 1:
        U = U[None, :]
    if U.shape[1] != flavor.r:
        raise DimensionError(f"rows have length {U.shape[1]}, expected {flavor.r}")
    tol = (1e-8 * (1.0 + np.max(np.abs(U), axis=1, initial=0.0)))[:, None]
    w = flavor.weights
    if flavor.side == PRIMAL and flavor.variant == PLUS:
        return (U > tol) @ w
    val = (np.abs(U) > tol) @ w
    if flavor.side == DUAL and flavor.variant == PLUS:
        val = np.where(np.any(U < -tol, axis=1), np.inf, val)
    return val


def _pattern(flavor, point, tol):
    """Per-coordinate admissible set of the limiting subdifferential at point."""
    at_zero = np.abs(point) <= tol
    if flavor.side == PRIMAL and flavor.variant == PLUS:
        return np.where(at_zero, _NONNEG, _FIXED)
    return np.where(at_zero, _FREE, _FIXED)


def in_domain(flavor, point, zero_tol=None):
    tol = default_zero_tol(point) if zero_tol is None else zero_tol
    return not (flavor.side == DUAL and flavor.variant == PLUS and np.any(point < -tol))


def card_subdiff_check(flavor, point, candidate, zero_tol=None):
    """Membership of candidate in the limiting subdifferential at point.

    ``zero_tol`` identifies the zero entries of point; candidate entries are
    compared exactly against the pattern.  The residual is the largest
    violation.
    """
    point = _check(flavor, point)
    cand = _check(flavor, candidate)
    tol = default_zero_tol(point) if zero_tol is None else zero_tol
    if not in_domain(flavor, point, tol):
        return Certificate(Verdict.FAIL, {"point": point, "candidate": cand}, np.inf,
                           ("domain_violation",), "point has a negative entry")
    pat = _pattern(flavor, point, tol)
    viol = np.where(pat == _FIXED, np.abs(cand), np.where(pat == _NONNEG, np.maximum(-cand, 0.0), 0.0))
    resid = float(np.max(viol, initial=0.0))
    verdict = Verdict.PASS if resid == 0.0 else Verdict.FAIL
    return Certificate(verdict, {"point": point, "candidate": cand}, resid)


def card_subgradient_select(flavor, point, target=None, zero_tol=None):
    """Member of the limiting subdifferential nearest to target (zero if absent)."""
    point = _check(flavor, point)
    tol = default_zero_tol(point) if zero_tol is None else zero_tol
    if not in_domain(flavor, point, tol):
        raise ValueError("subdifferential is empty: point has a negative entry")
    if target is None:
        return np.zeros(flavor.r)
    target = _check(flavor, target)
    pat = _pattern(flavor, point, tol)
    return np.where(pat == _FIXED, 0.0, np.where(pat == _NONNEG, np.maximum(target, 0.0), target))


def pattern_bounds(flavor, point, zero_tol=None):
    """The subdifferential as per-coordinate intervals (lower, upper)."""
    point = _check(flavor, point)
    tol = default_zero_tol(point) if zero_tol is None else zero_tol
    pat = _pattern(flavor, point, tol)
    lower = np.where(pat == _FREE, -np.inf, 0.0)
    upper = np.where(pat == _FIXED, 0.0, np.inf)
    return lower, upper

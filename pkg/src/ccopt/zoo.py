"""Worked example models and deterministic synthetic data."""

import numpy as np

from . import atoms
from .model import build_primal, derive_dual

EXAMPLES = ("heaviside_svm", "sparse_svm_dual", "energy_min", "edge_denoising", "calcium", "l1_energy")
DATA_KINDS = ("separable_2class", "nonseparable_2class", "piecewise_signal", "spike_train")


def difference_operator(n, edges):
    """One row per edge (i, j), i < j, computing x_j - x_i."""
    D = np.zeros((len(edges), n))
    for k, (i, j) in enumerate(edges):
        i, j = int(i), int(j)
        if not 0 <= i < j < n:
            raise ValueError(f"edge {(i, j)} must satisfy 0 <= i < j < {n}")
        D[k, i], D[k, j] = -1.0, 1.0
    return D


def line_graph(n):
    return [(i, i + 1) for i in range(n - 1)]


def _vector(params, key):
    if key not in params:
        raise ValueError(f"missing parameter {key!r}")
    return np.atleast_1d(np.asarray(params[key], dtype=float)).ravel()


def _svm(params):
    Qm = np.atleast_2d(np.asarray(params["points"], dtype=float))
    c = _vector(params, "labels")
    if Qm.shape[0] != c.size:
        raise ValueError(f"{Qm.shape[0]} points but {c.size} labels")
    if not np.all(np.isin(c, (-1.0, 1.0))):
        raise ValueError("labels must be -1 or +1")
    s = Qm.shape[1]
    Qbar = np.hstack([Qm, np.ones((c.size, 1))])
    f = atoms.quadratic(np.zeros(s + 1), np.r_[np.ones(s, dtype=bool), False])
    return build_primal(f, atoms.zero(0), np.zeros((0, s + 1)), -c[:, None] * Qbar,
                        -np.ones(c.size), "plus", params.get("lam", 1.0))


def _energy(params):
    A = np.atleast_2d(np.asarray(params["A"], dtype=float))
    a = _vector(params, "a")
    D = np.atleast_2d(np.asarray(params["D"], dtype=float))
    n = A.shape[1]
    if "gamma" in params:
        gamma = np.broadcast_to(np.asarray(params["gamma"], dtype=float), (n,))
        if not np.all(gamma > 0):
            raise ValueError("box bound gamma must be positive")
        f = atoms.box(np.zeros(n), gamma)
    else:
        f = atoms.nonneg(n)
    return build_primal(f, atoms.quadratic(a), A, D, np.zeros(D.shape[0]), "zero", params.get("lam", 1.0))


def _edge(params):
    beta = _vector(params, "beta")
    n = beta.size
    D = difference_operator(n, params.get("edges", line_graph(n)))
    return build_primal(atoms.zero(n), atoms.quadratic(beta), np.eye(n), D, np.zeros(D.shape[0]),
                        "zero", params.get("lam", 1.0))


def _calcium(params):
    beta = _vector(params, "beta")
    n = beta.size
    D = difference_operator(n, line_graph(n))
    return build_primal(atoms.nonneg(n), atoms.quadratic(beta), np.eye(n), D, np.zeros(n - 1),
                        "plus", params.get("lam", 1.0))


def _l1_energy(params):
    A = np.atleast_2d(np.asarray(params["A"], dtype=float))
    a = _vector(params, "a")
    D = np.atleast_2d(np.asarray(params["D"], dtype=float))
    return build_primal(atoms.nonneg(A.shape[1]), atoms.l1_norm(a), A, D, np.zeros(D.shape[0]),
                        "zero", params.get("lam", 1.0))


def build_example(example_id, params):
    """Model for one of EXAMPLES.

    heaviside_svm, sparse_svm_dual: points (r x s), labels in {-1, +1}, lam, mu
    energy_min, l1_energy: A, a, D, lam, and gamma for a box in place of x >= 0
    edge_denoising: beta, optional edges (default line graph), lam
    calcium: beta, lam
    """
    builders = {"heaviside_svm": _svm, "energy_min": _energy, "edge_denoising": _edge,
                "calcium": _calcium, "l1_energy": _l1_energy}
    if example_id == "sparse_svm_dual":
        return derive_dual(_svm(params), params.get("mu"))
    if example_id not in builders:
        raise ValueError(f"unknown example {example_id!r}; choose from {', '.join(EXAMPLES)}")
    return builders[example_id](params)


def _two_class(rng, dim, n, margin):
    normal = rng.standard_normal(dim)
    normal /= np.linalg.norm(normal)
    labels = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    along = labels * (margin + rng.exponential(1.0, n))
    noise = rng.standard_normal((n, dim))
    noise -= np.outer(noise @ normal, normal)
    return along[:, None] * normal + noise, labels, normal


def generate_data(kind, params=None, seed=0):
    """Deterministic dataset as a dict of numpy arrays."""
    params = dict(params or {})
    rng = np.random.default_rng(seed)
    if kind == "separable_2class":
        dim, n, margin = int(params.get("dim", 2)), int(params.get("n", 10)), float(params.get("margin", 1.0))
        if margin <= 0:
            raise ValueError("margin must be positive")
        points, labels, normal = _two_class(rng, dim, n, margin)
        # <normal, q> * c >= margin, so (normal / margin, 0) separates with unit margin
        return {"points": points, "labels": labels, "omega": normal / margin, "omega0": 0.0}
    if kind == "nonseparable_2class":
        dim, n = int(params.get("dim", 2)), int(params.get("n", 10))
        if n < 2:
            raise ValueError("need at least two points for a coincident pair")
        points, labels, _ = _two_class(rng, dim, n, float(params.get("margin", 1.0)))
        i = int(rng.integers(n))
        j = int(rng.choice(np.flatnonzero(labels != labels[i])))
        points[j] = points[i]
        return {"points": points, "labels": labels, "coincident_pair": np.array([i, j])}
    if kind == "piecewise_signal":
        n = int(params.get("n", 20))
        levels = np.asarray(params.get("levels", [0.0, 4.0]), dtype=float)
        sigma = float(params.get("sigma", 0.0))
        jumps = np.sort(rng.choice(np.arange(1, n), size=levels.size - 1, replace=False))
        clean = levels[np.searchsorted(jumps, np.arange(n), side="right")]
        return {"clean": clean, "beta": clean + sigma * rng.standard_normal(n), "jumps": jumps}
    if kind == "spike_train":
        n = int(params.get("n", 20))
        decay = float(params.get("decay", 0.9))
        rate = float(params.get("rate", 0.1))
        sigma = float(params.get("sigma", 0.0))
        spikes = rng.random(n) < rate
        amplitude = spikes * rng.uniform(1.0, 2.0, n)
        clean = np.empty(n)
        level = 0.0
        for t in range(n):
            level = decay * level + amplitude[t]
            clean[t] = level
        return {"clean": clean, "beta": clean + sigma * rng.standard_normal(n), "spikes": np.flatnonzero(spikes)}
    raise ValueError(f"unknown data kind {kind!r}; choose from {', '.join(DATA_KINDS)}")

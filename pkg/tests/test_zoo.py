import json

import numpy as np
import pytest

from ccopt import zoo
from ccopt.diagnostics import svm_separability
from ccopt.model import build_primal, derive_dual, primal_from_json, primal_to_json, xi


def test_edge_denoising_operator():
    p = zoo.build_example("edge_denoising", {"beta": [0.0, 0.0, 4.0, 4.0]})
    np.testing.assert_array_equal(p.B, [[-1, 1, 0, 0], [0, -1, 1, 0], [0, 0, -1, 1]])
    assert p.variant == "Zero"


def test_edges_must_be_ordered():
    with pytest.raises(ValueError):
        zoo.difference_operator(3, [(2, 1)])


def test_calcium_accepts_negative_data():
    p = zoo.build_example("calcium", {"beta": [1.0, -2.0, 0.5]})
    assert p.variant == "Plus" and p.f.kind == "IndicatorNonneg"


def test_svm_rejects_bad_labels():
    with pytest.raises(ValueError):
        zoo.build_example("heaviside_svm", {"points": [[1.0], [2.0]], "labels": [1, 2]})


def test_svm_model_matches_formula():
    Q = np.array([[1.0, 2.0], [-1.0, 0.5], [0.0, -3.0]])
    c = np.array([1.0, -1.0, -1.0])
    p = zoo.build_example("heaviside_svm", {"points": Q, "labels": c, "lam": 2.0})
    Qbar = np.hstack([Q, np.ones((3, 1))])
    np.testing.assert_array_equal(p.B, -c[:, None] * Qbar)
    np.testing.assert_array_equal(p.b, -np.ones(3))
    np.testing.assert_array_equal(p.lam, [2.0, 2.0, 2.0])
    assert p.f.params["mask"].tolist() == [True, True, False]


def test_sparse_svm_dual_equals_derived_dual_value_for_value():
    data = zoo.generate_data("separable_2class", {"dim": 3, "n": 6}, 4)
    direct = zoo.build_example("sparse_svm_dual", dict(data, mu=0.5))
    derived = derive_dual(zoo.build_example("heaviside_svm", data), 0.5)
    rng = np.random.default_rng(0)
    for _ in range(20):
        z = np.where(rng.random(6) < 0.4, 0.0, rng.random(6))
        assert xi(direct, z) == xi(derived, z)


def test_unknown_example_rejected():
    with pytest.raises(ValueError):
        zoo.build_example("lasso", {})


@pytest.mark.parametrize("example", ["heaviside_svm", "energy_min", "edge_denoising", "calcium", "l1_energy"])
def test_models_round_trip_through_json(example):
    D = zoo.difference_operator(3, zoo.line_graph(3))
    params = {"heaviside_svm": zoo.generate_data("separable_2class", {}, 1),
              "energy_min": {"A": np.eye(3) * 0.7, "a": [0.1, 0.2, 0.3], "D": D, "gamma": 1.5},
              "edge_denoising": {"beta": [0.3, 0.1, 0.7]},
              "calcium": {"beta": [0.3, 0.1, 0.7]},
              "l1_energy": {"A": np.eye(3) / 3, "a": [0.1, 0.2, 0.3], "D": D}}[example]
    p = zoo.build_example(example, params)
    back, _ = primal_from_json(json.loads(json.dumps(primal_to_json(p))))
    for name in ("A", "B", "b", "lam"):
        assert getattr(back, name).tobytes() == getattr(p, name).tobytes()


def test_generators_are_deterministic():
    for kind in zoo.DATA_KINDS:
        a, b = zoo.generate_data(kind, {}, 5), zoo.generate_data(kind, {}, 5)
        for key in a:
            np.testing.assert_array_equal(a[key], b[key])


def test_separable_data_ships_a_witness():
    data = zoo.generate_data("separable_2class", {"dim": 2, "n": 10, "margin": 1.0}, 7)
    margins = data["labels"] * (data["points"] @ data["omega"] + data["omega0"])
    assert margins.min() >= 1 - 1e-12
    assert svm_separability(data["points"], data["labels"]).passed


def test_nonseparable_data_has_coincident_pair():
    data = zoo.generate_data("nonseparable_2class", {}, 7)
    i, j = data["coincident_pair"]
    np.testing.assert_array_equal(data["points"][i], data["points"][j])
    assert data["labels"][i] != data["labels"][j]
    assert not svm_separability(data["points"], data["labels"]).passed


def test_noiseless_piecewise_signal_is_a_step_function():
    data = zoo.generate_data("piecewise_signal", {"n": 12, "levels": [1.0, 3.0, -1.0], "sigma": 0.0}, 2)
    np.testing.assert_array_equal(data["beta"], data["clean"])
    assert np.count_nonzero(np.diff(data["clean"])) == 2

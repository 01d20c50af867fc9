import numpy as np
import pytest

from ccopt import atoms, zoo
from ccopt.certificate import DimensionError, Verdict
from ccopt.model import xi
from ccopt.subsolver import (DUAL_PLUS, EQUALITY, INEQUALITY, OPTIMAL, UNBOUNDED, RestrictedProgram, kkt_residual,
                             lp_feasibility, restricted_program, solve_restricted)

BETA = np.array([0.0, 0.0, 4.0, 4.0])


def edge_model():
    return zoo.build_example("edge_denoising", {"beta": BETA})


def projection_onto_equal_blocks(beta, D_rows):
    """Closed form: projection of beta onto {x | D_rows x = 0} via the normal equations."""
    N = D_rows
    return beta - N.T @ np.linalg.lstsq(N @ N.T, N @ beta, rcond=None)[0]


@pytest.mark.parametrize("subset,expected_value", [((1,), 0.0), ((), 8.0)])
def test_edge_denoising_restrictions(subset, expected_value):
    p = edge_model()
    prog = restricted_program(p, subset)
    assert prog.flavor == EQUALITY
    out = solve_restricted(prog)
    closed = projection_onto_equal_blocks(BETA, np.delete(p.B, list(subset), axis=0))
    assert out.status == OPTIMAL
    np.testing.assert_allclose(out.point, closed, atol=1e-8)
    assert out.value == pytest.approx(expected_value, abs=1e-8)
    assert max(out.kkt_residuals) <= 1e-7


def test_kkt_residual_examples():
    prog = restricted_program(edge_model(), (1,))
    assert kkt_residual(prog, BETA, np.zeros(3)) == (0.0, 0.0, 0.0)
    stat, _, _ = kkt_residual(prog, BETA + [0.1, 0, 0, 0], np.zeros(3))
    assert stat >= 0.05


def test_nonseparable_svm_dual_is_unbounded():
    d = zoo.build_example("sparse_svm_dual", {"points": [[1.0], [1.0]], "labels": [1, -1]})
    out = solve_restricted(restricted_program(d, (0, 1)))
    assert out.status == UNBOUNDED and out.value == -np.inf
    base, direction = out.witness["base_point"], out.witness["direction"]
    assert direction[0] == pytest.approx(direction[1]) and direction[0] > 0
    values = [xi(d, base + t * direction) for t in (10, 100, 1000)]
    assert values[0] > values[1] > values[2]


def test_separable_svm_programs():
    data = {"points": [[2.0], [-2.0]], "labels": [1, -1], "lam": 10.0}
    p = zoo.build_example("heaviside_svm", data)
    out = solve_restricted(restricted_program(p, ()))
    assert restricted_program(p, ()).flavor == INEQUALITY
    np.testing.assert_allclose(out.point, [0.5, 0.0], atol=1e-8)
    assert out.value == pytest.approx(0.125)
    assert np.all(out.multipliers >= -1e-8)
    d = zoo.build_example("sparse_svm_dual", data)
    out = solve_restricted(restricted_program(d, (0, 1)))
    assert restricted_program(d, (0, 1)).flavor == DUAL_PLUS
    np.testing.assert_allclose(out.point, [0.125, 0.125], atol=1e-8)
    assert out.value == pytest.approx(-0.125)


def test_inequality_multipliers_sign_and_complementarity():
    rng = np.random.default_rng(4)
    for seed in range(10):
        beta = rng.normal(1.0, 1.5, 4)
        p = zoo.build_example("calcium", {"beta": beta})
        for subset in [(), (0,), (1, 2)]:
            out = solve_restricted(restricted_program(p, subset))
            u = p.B @ out.point - p.b
            assert np.all(out.multipliers >= -1e-8)
            assert np.max(np.abs(out.multipliers * u)) <= 1e-7
            assert max(out.kkt_residuals) <= 1e-7


def test_subset_validation():
    with pytest.raises(DimensionError):
        restricted_program(edge_model(), (5,))
    with pytest.raises(ValueError):
        RestrictedProgram(edge_model(), (), DUAL_PLUS)


def test_lp_feasibility_examples():
    cert = lp_feasibility([[-1.0], [1.0]], [-1.0, 2.0])
    assert cert.verdict is Verdict.PASS and cert.witness["point"] == pytest.approx([1.5])
    cert = lp_feasibility([[-1.0], [1.0]], [-1.0, 0.0])
    assert cert.verdict is Verdict.FAIL
    y = cert.witness["farkas"]
    assert np.all(y >= 0) and abs(np.array([-1.0, 1.0]) @ y) < 1e-12 and np.array([-1.0, 0.0]) @ y < 0
    Qbar = np.array([[2.0, 1.0], [-2.0, 1.0]])
    c = np.array([1.0, -1.0])
    cert = lp_feasibility(-c[:, None] * Qbar, -np.ones(2))
    assert cert.passed
    assert np.all(c * (Qbar @ cert.witness["point"]) >= 1 - 1e-9)
    # the stated witness (0.5, 0) satisfies the system by substitution
    assert np.all(c * (Qbar @ [0.5, 0.0]) >= 1)


def test_equality_rows_and_margin():
    # x1 + x2 = 1, x >= 0 strictly by 0.2
    C = np.array([[1.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
    cert = lp_feasibility(C, [1.0, 0.0, 0.0], eq_rows=[0], strict_rows=[1, 2], margin=0.2)
    x = cert.witness["point"]
    assert cert.passed and x.sum() == pytest.approx(1.0) and x.min() >= 0.2 - 1e-9
    assert not lp_feasibility(C, [1.0, 0.0, 0.0], eq_rows=[0], strict_rows=[1, 2], margin=0.6).passed


def test_restricted_programs_with_every_catalog_atom_solve():
    rng = np.random.default_rng(9)
    D = zoo.difference_operator(3, zoo.line_graph(3))
    fs = [atoms.zero(3), atoms.nonneg(3), atoms.box([0, -1, 0], [2, 1, 3]),
          atoms.polyhedron([[1.0, 1.0, 1.0]], [4.0]), atoms.quadratic([1.0, 0.0, -1.0])]
    gs = [atoms.quadratic([1.0, 2.0, 0.5]), atoms.l1_norm([1.0, -1.0, 0.0])]
    from ccopt.model import build_primal, derive_dual

    for f in fs:
        for g in gs:
            p = build_primal(f, g, np.eye(3) + 0.1 * rng.standard_normal((3, 3)), D, np.zeros(2), "plus", 1.0)
            for subset in [(), (0,), (0, 1)]:
                out = solve_restricted(restricted_program(p, subset))
                assert out.status == OPTIMAL and max(out.kkt_residuals) <= 1e-6
            if atoms.has_conjugate(f):
                d = derive_dual(p)
                for subset in [(), (1,)]:
                    out = solve_restricted(restricted_program(d, subset))
                    if out.status == OPTIMAL:
                        assert max(out.kkt_residuals) <= 1e-6

"""Smoke tests for the compiled python bindings."""

import pytest

import latree


def test_simulate_decompose_recovers_topology():
    sim = latree.simulate(5, 7)
    assert len(sim["rho"]) == 5
    assert len(sim["marginals"]) == 5
    dec = latree.decompose(sim["rho"], sim["marginals"])
    truth = latree.simplify_tree(sim["model"]["tree"])
    assert latree.trees_equivalent(dec["tree"], truth)
    assert len(dec["trace"]["steps"]) >= 1


def test_fit_reproduces_exact_correlations():
    sim = latree.simulate(5, 11)
    dec = latree.decompose(sim["rho"], sim["marginals"])
    result = latree.fit(sim["rho"], sim["marginals"], dec["tree"])
    assert len(result["edges"]) == 2 * 5 - 3
    diag = result["diagnostics"]
    assert diag["max_reconstruction_error"] <= 1e-8
    assert diag["sign_consistent"] is True
    for node in result["hidden"]:
        assert 0.0 <= node["prior"] <= 1.0
        for cond in node["conditional"]:
            assert 0.0 <= cond["p"] <= 1.0


def test_star_decompose_closed_form():
    rho = [[1.0, 0.72, 0.48], [0.72, 1.0, 0.54], [0.48, 0.54, 1.0]]
    out = latree.star_decompose_3(rho, [0.5, 0.5, 0.5])
    assert out["edge_rho"][0] == pytest.approx(0.8, abs=1e-12)
    assert out["edge_rho"][1] == pytest.approx(0.9, abs=1e-12)
    assert out["edge_rho"][2] == pytest.approx(0.6, abs=1e-12)


def test_quad_error_vanishes_on_true_pairing():
    rho = [
        [1.0, 0.56, 0.24, 0.36],
        [0.56, 1.0, 0.21, 0.315],
        [0.24, 0.21, 1.0, 0.54],
        [0.36, 0.315, 0.54, 1.0],
    ]
    marg = [0.5] * 4
    assert latree.quad_error(rho, marg, 0, 1, 2, 3) == pytest.approx(0.0, abs=1e-15)
    assert latree.quad_error(rho, marg, 0, 2, 1, 3) == pytest.approx(0.2268, abs=1e-12)


def test_compute_correlations_from_counts():
    rows = [[0, 0]] * 3 + [[0, 1], [1, 0]] + [[1, 1]] * 3
    out = latree.compute_correlations(rows)
    assert out["rho"][0][1] == pytest.approx(0.5, abs=0.0)
    assert out["marginals"] == [0.5, 0.5]


def test_errors_map_to_python_exceptions():
    with pytest.raises(ValueError):
        latree.decompose([[1.0, 0.5], [0.5, 1.0]], [0.5, 0.5])
    with pytest.raises(ArithmeticError):
        latree.star_decompose_3(
            [[1.0, -0.5, 0.5], [-0.5, 1.0, 0.5], [0.5, 0.5, 1.0]], [0.5, 0.5, 0.5]
        )

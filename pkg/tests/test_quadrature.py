from math import factorial

import numpy as np
import pytest

from hpdg.quadrature import edge_rule, triangle_rule


def monomial_exact(a, b):
    return factorial(a) * factorial(b) / factorial(a + b + 2)


@pytest.mark.parametrize("exactness", [0, 1, 2, 5, 8, 13, 20])
def test_triangle_rule_integrates_all_monomials(exactness):
    rule = triangle_rule(exactness)
    x, y = rule.points.T
    for n in range(exactness + 1):
        for b in range(n + 1):
            a = n - b
            assert np.sum(rule.weights * x**a * y**b) == pytest.approx(monomial_exact(a, b), rel=1e-13, abs=1e-16)


def test_triangle_rule_points_inside_and_positive_weights():
    rule = triangle_rule(12)
    assert np.all(rule.weights > 0)
    x, y = rule.points.T
    assert np.all((x > 0) & (y > 0) & (x + y < 1))


@pytest.mark.parametrize("exactness", [0, 3, 7, 16])
def test_edge_rule(exactness):
    rule = edge_rule(exactness)
    for d in range(exactness + 1):
        assert np.sum(rule.weights * rule.points**d) == pytest.approx(1.0 / (d + 1), rel=1e-13)
    assert rule.size == exactness // 2 + 1


def test_rules_are_cached_and_read_only():
    r = triangle_rule(6)
    assert triangle_rule(6) is r
    with pytest.raises(ValueError):
        r.points[0, 0] = 1.0


def test_negative_exactness_rejected():
    with pytest.raises(ValueError):
        edge_rule(-1)
    with pytest.raises(ValueError):
        triangle_rule(-2)


def test_known_values():
    rule = triangle_rule(4)
    x, y = rule.points.T
    assert rule.weights.sum() == pytest.approx(0.5, abs=1e-15)
    assert np.sum(rule.weights * x**2 * y**2) == pytest.approx(1 / 180, rel=1e-13)

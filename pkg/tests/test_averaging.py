import math

import numpy as np
import pytest

from averon.averaging import (
    NoTransverseBlock,
    averaged_data,
    averaged_function,
    check_h1,
    check_h2,
    displacement,
    g0_jacobian_blocks,
)

from conftest import load_a, load_b


def displayed_g1(rho, r, a):
    s, c = math.sin(a), math.cos(a)
    g1 = (r * c * (4 * rho**2 + r**2 + 2) + rho * (rho**2 - 3 * r**2 + 2)) / 54
    g2 = ((29 * rho * s - 8 * r**3 + 9 * rho**2 * r * math.cos(2 * a) - 14 * rho**2 * r + 2 * r) / 54
          - rho * c / 47088 * (11719 * rho**2 + 21417 * r**2 - 1744))
    g3 = (-(29 * rho + r * (r**2 + 2) * s) / (54 * rho)
          + rho / (47088 * r) * (s * (11719 * rho**2 + 17929 * r**2 - 1744)
                                 - 872 * c * (18 * rho * r * s - 29)))
    return np.array([g1, g2, g3])


def test_fixture_a_first_average_matches_closed_form(rng):
    sys = load_a().system
    for _ in range(5):
        z = rng.uniform([0.6, 0.6, 0.5], [1.4, 1.4, 2.5])
        assert np.allclose(averaged_function(sys, z, 1), displayed_g1(*z), atol=1e-9)


def test_fixture_a_zero_of_first_average():
    sys = load_a().system
    assert np.max(np.abs(averaged_function(sys, [1.0, 1.0, math.pi / 2], 1))) < 1e-10


def test_fixture_a_unperturbed_flow_is_identity():
    loaded = load_a()
    data = averaged_data(loaded.system, [0.9, 1.2, 1.4], k=1, jacobians=True)
    assert np.allclose(data.g[0], 0.0, atol=1e-12)
    assert np.allclose(data.jacobians[0], 0.0, atol=1e-12)
    assert check_h1(loaded.system, loaded.manifold, points=2).ok
    with pytest.raises(NoTransverseBlock):
        g0_jacobian_blocks(loaded.system, loaded.manifold, [1.0, 1.0, 1.5])


def test_fixture_b_first_average_is_odd_in_z(rng):
    sys = load_b().system
    a = rng.uniform([3.2, 0.2], [4.8, 1.8])
    plus = averaged_function(sys, [a[0], a[1], 0.0], 1)
    minus = averaged_function(sys, [a[0], -a[1], 0.0], 1)
    assert np.allclose(plus[:2] * [1, -1], minus[:2], atol=1e-10)


def test_fixture_b_hypotheses():
    loaded = load_b()
    h1 = check_h1(loaded.system, loaded.manifold, points=2)
    h2 = check_h2(loaded.system, loaded.manifold, points=2)
    assert h1.ok and h1.worst < 1e-9
    assert h2.ok and abs(h2.worst - (1 - math.exp(-2 * math.pi))) < 1e-8
    Gamma, Delta = g0_jacobian_blocks(loaded.system, loaded.manifold, [4.0, 1.0])
    assert np.allclose(Gamma, 0.0, atol=1e-12)
    assert np.allclose(Delta, [[math.exp(-2 * math.pi) - 1]], atol=1e-10)


def test_displacement_vanishes_on_the_manifold_at_eps_zero():
    sys = load_b().system
    assert np.max(np.abs(displacement(sys, [3.5, -0.4, 0.0], 0.0))) < 1e-10
    assert abs(displacement(sys, [3.5, -0.4, 0.2], 0.0)[2] - 0.2 * (math.exp(-2 * math.pi) - 1)) < 1e-10


def test_order_guards():
    sys = load_b().system
    with pytest.raises(ValueError):
        averaged_function(sys, [4, 1, 0], -1)
    with pytest.raises(ValueError):
        averaged_function(sys, [4, 1, 0], sys.order + 1)

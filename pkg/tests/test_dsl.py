import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from averon.dsl import (
    ParseError,
    TransformError,
    differentiate,
    load_system,
    parse_expr,
    parse_system,
    to_source,
)
from averon.dsl.compile import evaluate
from averon.jets import extract, jet_lift

from conftest import SYSTEM_A, SYSTEM_B, load_a, load_b


def _fields(man):
    return (man.states, man.period, man.params, man.orders, man.manifold, man.transform, man.time)


@pytest.mark.parametrize("path", [SYSTEM_A, SYSTEM_B])
def test_fixture_files_round_trip(path):
    man = parse_system(path.read_text())
    again = parse_system(man.to_text())
    assert _fields(again) == _fields(man)


def test_expression_round_trip():
    e = parse_expr("x^2*y + sin(t)")
    assert to_source(e) == "x^2*y + sin(t)"
    assert parse_expr(to_source(e)) == e


def test_fraction_literals_stay_exact():
    man = parse_system(SYSTEM_A.read_text())
    omega = man.params["omega"]
    assert abs(evaluate(omega, {}) - 54 * math.pi / 7) < 1e-12
    first = man.orders[0][0]
    assert to_source(first) == "-omega*y"


def test_malformed_expression_points_at_the_star():
    with pytest.raises(ParseError) as info:
        parse_expr("x + * y")
    assert (info.value.line, info.value.col) == (1, 5)


def test_unknown_identifier_is_located():
    text = "[states]\nx\n[period]\n1\n[order 0]\ndx/dt = -x + q\n"
    with pytest.raises(ParseError) as info:
        parse_system(text)
    assert "unknown identifier 'q'" in str(info.value)
    assert (info.value.line, info.value.col) == (6, 14)


def test_function_arity_is_checked():
    with pytest.raises(ParseError):
        parse_expr("sin(x, y)")
    with pytest.raises(ParseError):
        parse_expr("cos")


def test_block_size_mismatch():
    text = "[states]\nx y\n[period]\n1\n[order 0]\ndx/dt = y\n"
    with pytest.raises(ParseError):
        parse_system(text)


def test_power_binds_tighter_than_unary_minus():
    assert evaluate(parse_expr("-2^2"), {}) == -4
    assert evaluate(parse_expr("2^3^2"), {}) == 512
    assert evaluate(parse_expr("8/2/2"), {}) == 2


def test_symbolic_derivative():
    e = parse_expr("x^3*sin(x)")
    d = differentiate(e, "x")
    assert abs(evaluate(d, {"x": 0.7}) - (3 * 0.49 * math.sin(0.7) + 0.343 * math.cos(0.7))) < 1e-12


atoms = st.sampled_from(["x", "y", "2", "3/4", "pi"])


def exprs():
    return st.recursive(
        atoms,
        lambda kids: st.one_of(
            st.tuples(kids, st.sampled_from(["+", "-", "*"]), kids).map(lambda t: f"({t[0]}) {t[1]} ({t[2]})"),
            st.tuples(st.sampled_from(["sin", "cos", "exp"]), kids).map(lambda t: f"{t[0]}({t[1]})"),
            st.tuples(kids, st.integers(0, 3)).map(lambda t: f"({t[0]})^{t[1]}"),
            kids.map(lambda k: f"-({k})"),
        ),
        max_leaves=6,
    )


@settings(max_examples=100, deadline=None)
@given(exprs())
def test_printer_round_trip_preserves_the_tree(src):
    e = parse_expr(src)
    again = parse_expr(to_source(e))
    assert again == e


# -- standard form -----------------------------------------------------------------

def test_fixture_b_unperturbed_standard_form(rng):
    sys = load_b().system
    for _ in range(20):
        th = rng.uniform(0, 2 * math.pi)
        z = rng.uniform([3, -2, -1], [5, 2, 1])
        assert np.allclose(sys.block(0, th, z), [0.0, 0.0, -z[2]], atol=1e-12)


def test_fixture_a_unperturbed_standard_form(rng):
    sys = load_a().system
    for _ in range(20):
        th = rng.uniform(0, 2 * math.pi)
        z = rng.uniform([0.5, 0.5, 1.0], [1.5, 1.5, 2.0])
        assert np.allclose(sys.block(0, th, z), 0.0, atol=1e-12)


def test_identity_transform_matches_direct_file(rng):
    via = """
[states]
th r
[params]
k = 3/2
[order 0]
dth/dt = 1
dr/dt = -r
[order 1]
dth/dt = 0
dr/dt = k*cos(th)*r^2
[transform]
angle = theta
states = r
th = theta
order = 1
"""
    direct = """
[states]
r
[period]
2*pi
[params]
k = 3/2
[order 0]
dr/dt = -r
[order 1]
dr/dt = k*cos(t)*r^2
"""
    a = load_system(via).system
    b = load_system(direct).system
    for _ in range(10):
        t, x, e = rng.uniform(0, 6), rng.uniform(0.2, 2), rng.uniform(0, 0.1)
        assert abs(a.rhs_array(t, np.array([x]), e)[0] - b.rhs_array(t, np.array([x]), e)[0]) < 1e-12


def test_vanishing_angular_rate_is_rejected():
    text = """
[states]
x y
[order 0]
dx/dt = 0
dy/dt = 0
[order 1]
dx/dt = y
dy/dt = -x
[transform]
angle = theta
states = rho
x = rho*cos(theta)
y = rho*sin(theta)
order = 1
[manifold]
rho in (1, 2)
"""
    with pytest.raises(TransformError):
        load_system(text)


def test_transformed_field_over_jets_matches_finite_differences():
    sys = load_a().system
    th, z, eps = 0.9, np.array([1.1, 0.8, 1.3]), 0.01
    xs = jet_lift(list(z), p=1)
    out = sys.field(th, xs, eps)
    h = 1e-6
    for j in range(3):
        dz = np.zeros(3)
        dz[j] = h
        fd = (sys.rhs_array(th, z + dz, eps) - sys.rhs_array(th, z - dz, eps)) / (2 * h)
        idx = tuple(1 if k == j else 0 for k in range(3))
        got = np.array([extract(v, idx) for v in out])
        assert np.allclose(got, fd, atol=1e-6)

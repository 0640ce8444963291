import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from averon.jets import (
    JetError,
    JetScalar,
    cos,
    derivative_tensor,
    exp,
    extract,
    faa_di_bruno_sum,
    jet_lift,
    partitions,
    sin,
)
from averon.series import EpsSeries


def test_partition_counts_match_partition_numbers():
    # p(1..6) = 1, 2, 3, 5, 7, 11
    assert [len(partitions(l)) for l in range(1, 7)] == [1, 2, 3, 5, 7, 11]


def test_product_rule_and_quotient():
    x, y = jet_lift([0.5, 2.0], p=3)
    f = x * x * y / (1 + x)
    h = 1e-4
    fd = ((0.5 + h) ** 2 * 2 / 1.5001 - (0.5 - h) ** 2 * 2 / 1.4999) / (2 * h)
    assert abs(extract(f, (1, 0)) - fd) < 1e-7
    assert abs(extract(f, (0, 1)) - 0.25 / 1.5) < 1e-12


def test_elementary_functions_derivatives():
    (x,) = jet_lift([0.7], p=4)
    for fn, derivs in ((sin, [math.sin, math.cos, lambda t: -math.sin(t), lambda t: -math.cos(t)]),
                       (cos, [math.cos, lambda t: -math.sin(t), lambda t: -math.cos(t), math.sin]),
                       (exp, [math.exp] * 4)):
        j = fn(x)
        for k in range(4):
            assert abs(extract(j, (k,)) - derivs[k](0.7)) < 1e-12


def test_dispatch_on_plain_numbers_and_series():
    assert sin(0.3) == math.sin(0.3)
    s = exp(EpsSeries.variable(3))
    assert np.allclose(s.coeffs, [1, 1, 0.5, 1 / 6])


def test_compose_requires_vanishing_arguments():
    x, y = jet_lift([1.0, 1.0], p=2)
    with pytest.raises(JetError):
        (x * y).compose([x, y])


def test_compose_is_chain_rule():
    # f(h) = (1 + h)^3 expanded about 0; substitute h = 2t + t^2
    (h,) = jet_lift([0.0], p=3)
    f = (1 + h) ** 3
    (t,) = jet_lift([0.0], p=3)
    g = f.compose([2 * t + t * t])
    # (1 + 2t + t^2)^3 = (1 + t)^6
    assert np.allclose([extract(g, (k,)) / math.factorial(k) for k in range(4)], [1, 6, 15, 20])


def test_derivative_tensor_is_symmetric_hessian():
    x, y = jet_lift([0.3, -0.4], p=2)
    H = derivative_tensor([x * x * y + y * y * y], 2, [0, 1])[0]
    exact = np.array([[2 * -0.4, 2 * 0.3], [2 * 0.3, 6 * -0.4]])
    assert np.allclose(H, exact)


def test_fixed_direction_selects_taylor_coefficient():
    # f(eps, x) = eps^2 * x^2: the eps^2 Taylor coefficient is x^2, with d/dx = 2x.
    e, x = jet_lift([0.0, 1.5], p=3)
    T = derivative_tensor([e * e * x * x], 1, [1], fixed={0: 2})
    assert np.allclose(T, [[3.0]])


# -- Faa di Bruno versus direct differentiation ------------------------------------

def _poly_table(rng, J, m, out, deg=3):
    """u_j(x) = sum_L T_jL[x,...,x] / L! with symmetric T; returns table[j][L] at 0."""
    table = []
    for _ in range(J + 1):
        row = [rng.standard_normal(out)]
        for L in range(1, deg + 1):
            T = rng.standard_normal((out,) + (m,) * L)
            # symmetrise the trailing axes
            sym = np.zeros_like(T)
            import itertools
            perms = list(itertools.permutations(range(1, L + 1)))
            for p in perms:
                sym += np.transpose(T, (0,) + p)
            row.append(sym / len(perms))
        row += [np.zeros((out,) + (m,) * L) for L in range(deg + 1, 6)]
        table.append(row)
    return table


def _direct(table, v, K, m, out):
    """Taylor coefficients of sum_j eps^j u_j(v(eps)) by series arithmetic."""
    vs = [EpsSeries(np.array([v[s][k] if s > 0 else 0.0 for s in range(K + 1)])) for k in range(m)]
    total = [EpsSeries(np.zeros(K + 1)) for _ in range(out)]
    for j, row in enumerate(table):
        if j > K:
            break
        epsj = EpsSeries(np.eye(K + 1)[j])
        for L, T in enumerate(row):
            if not np.any(T):
                continue
            import itertools
            for idx in itertools.product(range(m), repeat=L):
                prod = EpsSeries(np.eye(K + 1)[0])
                for k in idx:
                    prod = prod * vs[k]
                for a in range(out):
                    c = T[(a,) + idx] / math.factorial(L)
                    if c:
                        total[a] = total[a] + epsj * prod * c
    return np.array([t.coeffs for t in total]).T


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 4), st.integers(1, 3))
def test_faa_di_bruno_matches_direct_expansion(seed, K, m):
    rng = np.random.default_rng(seed)
    out = 2
    table = _poly_table(rng, K, m, out)
    v = [None] + [rng.standard_normal(m) for _ in range(K)]
    direct = _direct(table, v, K, m, out)
    for i in range(1, K + 1):
        got = faa_di_bruno_sum(table, v, i)
        assert np.allclose(got, direct[i], atol=1e-9)


def test_exclude_top_drops_only_linear_top_term(rng):
    table = _poly_table(rng, 3, 2, 2)
    v = [None] + [rng.standard_normal(2) for _ in range(3)]
    full = faa_di_bruno_sum(table, v, 3)
    part = faa_di_bruno_sum(table, v, 3, exclude_top=True)
    assert np.allclose(full - part, table[0][1] @ v[3])

import math

import numpy as np
import pytest
from scipy.integrate import simpson

from averon.flow import integrate_samples
from averon.oracle import (
    ShootingError,
    compare,
    monodromy_multipliers,
    oracle_verdict,
    poincare_iterates,
    run_oracle,
    shoot_periodic,
)
from averon.system import SystemDef

from conftest import B_PAPER, analysis_b, load_b


def damped_forced():
    # x' = -eps x + eps cos(t)^2: unique periodic orbit, multiplier exp(-2 pi eps)
    return SystemDef.from_blocks([lambda t, x: [0 * x[0]], lambda t, x: [math.cos(t) ** 2 - x[0]]],
                                 1, 2 * math.pi)


def test_eps_zero_is_rejected():
    with pytest.raises(ValueError):
        shoot_periodic(damped_forced(), 0.0, [0.0])


def test_shooting_on_a_scalar_problem():
    sys = damped_forced()
    eps = 0.1
    res = run_oracle(sys, eps, [0.0], ell=1)
    # x(0) of the periodic orbit: 1/2 + eps^2 / (2 (eps^2 + 4))
    assert abs(res.z[0] - (0.5 + eps**2 / (2 * (eps**2 + 4)))) < 1e-9
    assert abs(res.multipliers[0] - math.exp(-2 * math.pi * eps)) < 1e-10
    assert res.verdict == "Stable" and res.residual <= 1e-10


def test_non_isolated_fixed_points_are_rejected():
    # x' = 0: every point is fixed, the shooting Jacobian is singular
    sys = SystemDef.from_blocks([lambda t, x: [0 * x[0]], lambda t, x: [0 * x[0]]], 1, 1.0)
    with pytest.raises(ShootingError):
        shoot_periodic(sys, 0.1, [0.3])


def test_verdict_band():
    eps = 0.01
    v, band = oracle_verdict(np.array([1 - 1e-6, 0.5]), eps)
    assert v == "Undecided" and band == pytest.approx(5 * eps**2)
    assert oracle_verdict(np.array([1 - 1e-3, 0.5]), eps)[0] == "Stable"
    assert oracle_verdict(np.array([1 + 1e-3, 0.5]), eps)[0] == "Unstable"


def test_monodromy_determinant_follows_liouville():
    loaded = load_b()
    sys = loaded.system
    eps = 0.02
    z = np.array([4.1, 0.9, 0.0])
    mults, Y = monodromy_multipliers(sys, eps, z)
    assert abs(np.prod(mults) - np.linalg.det(Y)) < 1e-12 * abs(np.linalg.det(Y)) + 1e-14
    ts = np.linspace(0.0, sys.period, 4001)
    xs = integrate_samples(sys, z, eps, ts, rtol=1e-12, atol=1e-14)
    eps_jac = []
    h = 1e-6
    for t, x in zip(ts, xs):
        tr = 0.0
        for j in range(3):
            dx = np.zeros(3)
            dx[j] = h
            tr += (sys.rhs_array(t, x + dx, eps)[j] - sys.rhs_array(t, x - dx, eps)[j]) / (2 * h)
        eps_jac.append(tr)
    liouville = math.exp(simpson(eps_jac, x=ts))
    assert abs(np.linalg.det(Y) - liouville) < 1e-6 * abs(liouville)


def test_fixed_point_is_smooth_in_eps():
    an = analysis_b(B_PAPER, 1)
    sys = load_b().system
    z0, z1 = an.reduction.z_coeffs[0], an.reduction.z_coeffs[1]
    second = []
    for k in (200, 400, 800):
        eps = 1 / k
        z, *_ = shoot_periodic(sys, eps, an.guess(eps))
        assert np.linalg.norm(z - z0) / eps < 2 * np.linalg.norm(z1)
        second.append((z - z0 - eps * z1) / eps**2)
    # (z* - z0 - eps z1) / eps^2 converges: successive differences halve
    d1 = np.linalg.norm(second[1] - second[0])
    d2 = np.linalg.norm(second[2] - second[1])
    assert d2 < 0.7 * d1


def test_compare_reports_agreement_and_order():
    an = analysis_b(B_PAPER, 1)
    sys = load_b().system
    results = [run_oracle(sys, 1 / k, an.guess(1 / k), ell=an.report.ell) for k in (100, 200, 400)]
    table = compare(an.report, results, an.reduction.z0)
    assert table["agreement"] == table["total"] == 3
    assert table["expected_order"] == 3
    assert [r["eps"] for r in table["rows"]] == sorted(r["eps"] for r in table["rows"])
    orders = [r["observed_order"] for r in table["rows"][1:]]
    assert all(o > 2.5 for o in orders)


def test_poincare_iterates_approach_the_stable_orbit():
    an = analysis_b(B_PAPER, 1)
    sys = load_b().system
    eps = 1 / 50
    z_star, *_ = shoot_periodic(sys, eps, an.guess(eps))
    start = an.reduction.z0 + np.array([0.05, -0.05, 0.02])
    pts, _ = poincare_iterates(sys, eps, start, count=150)
    dist = np.linalg.norm(pts - z_star, axis=1)
    # critical multiplier modulus is about 0.984 at this eps
    assert dist[-1] < 0.25 * dist[0]
    pts2, traj = poincare_iterates(sys, eps, start, count=3, samples=8)
    assert np.allclose(pts2, pts[:4], atol=1e-8)
    assert len(traj) == 3 * 8 and len(traj[0]) == 4

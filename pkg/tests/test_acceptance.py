"""Acceptance criteria, one test per criterion.

Each test collects named sub-checks, records a single PASS/FAIL line (shown
in the terminal summary and on stdout) and fails if any sub-check fails.
"""

import math

import numpy as np
import pytest

import conftest
from conftest import B_PAPER, analysis_a, analysis_b, load_a, load_b, paper_R_a, paper_R_b

from averon.flow import flow_eps_jet, integrate, recursion_yi
from averon.jets import faa_di_bruno_sum
from averon.oracle import compare, run_oracle
from averon.reduction import bifurcation_f
from averon.series import EpsSeries, SeriesMatrix, series_det, series_inv
from averon.stability import build_L

from frozen import fixture_b_f1_exact
from test_jets import _direct, _poly_table
from test_stability import random_reduced
from test_system_flow import forced_oscillator

PI = math.pi


class Criterion:
    def __init__(self, number: int, title: str):
        self.number, self.title = number, title
        self.checks: list[tuple[str, bool, str]] = []

    def check(self, name: str, ok: bool, detail: str = ""):
        self.checks.append((name, bool(ok), detail))

    def finish(self):
        failed = [c for c in self.checks if not c[1]]
        status = "PASS" if not failed else "FAIL"
        parts = [f"{n}: {'ok' if ok else 'FAILED'}{' (' + d + ')' if d else ''}" for n, ok, d in self.checks]
        line = f"criterion {self.number} [{status}] {self.title} | " + "; ".join(parts)
        conftest.ACCEPTANCE[self.number] = line
        print(line)
        assert not failed, "failed sub-checks: " + "; ".join(f"{n} ({d})" for n, _, d in failed)


# -- 1 --------------------------------------------------------------------------

def test_criterion_1_fixture_a_zero_and_determinant():
    c = Criterion(1, "fixture A simple zero and det Dg_1")
    red = analysis_a().reduction
    err = float(np.max(np.abs(red.alpha_star - [1.0, 1.0, PI / 2])))
    res = float(np.max(np.abs(red.f[1])))
    c.check("zero (1, 1, pi/2)", err <= 1e-10, f"max error {err:.1e}")
    c.check("residual <= 1e-10", res <= 1e-10, f"{res:.1e}")
    want = -246677 / 1271376
    det = float(np.linalg.det(red.df_r))
    c.check("det Dg_1 = -246677/1271376", abs(det - want) <= 1e-6 * abs(want), f"{det:.12g}")
    c.finish()


# -- 2 --------------------------------------------------------------------------

def test_criterion_2_fixture_a_eigen_jets():
    c = Criterion(2, "fixture A eigenvalue jets of eps^-1 A(eps)")
    rep = analysis_a().report
    w = math.sqrt(246677 / 109) / 108
    crit = sorted(rep.critical, key=lambda b: b.root0.imag)
    c.check("two critical branches", len(crit) == 2, f"{len(crit)}")
    if len(crit) == 2:
        dev = max(abs(crit[0].root0 - (-1j * w)), abs(crit[1].root0 - 1j * w))
        c.check("Im lambda_1,2 = +-(1/108) sqrt(246677/109)", dev <= 1e-6, f"deviation {dev:.1e}")
    third = [b for b in rep.branches if b.position != "critical"]
    c.check("one non-critical branch", len(third) == 1)
    if third:
        dev = abs(third[0].root0 + 1)
        c.check("lambda_3 = -1 + O(eps)", dev <= 1e-6, f"deviation {dev:.1e}")
    c.finish()


# -- 3 --------------------------------------------------------------------------

def test_criterion_3_fixture_a_stability_constant():
    c = Criterion(3, "fixture A stability constant R(b, c, d, e)")
    R = analysis_a().report.R
    c.check("R(1/250, 150, -1, -1) = -22.913", abs(R - (-22.913)) <= 1e-2, f"R = {R:.6f}")
    c.check("verdict Stable", analysis_a().report.verdict == "Stable")
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(5):
        b, cc, d, e = rng.uniform(-0.5, 0.5), rng.uniform(50, 250), rng.uniform(-3, 3), rng.uniform(-3, 3)
        got = analysis_a(b, cc, d, e).report.R
        worst = max(worst, abs(got - paper_R_a(b, cc, d, e)))
    c.check("closed form at 5 random tuples", worst <= 1e-6, f"max deviation {worst:.1e}")
    c.finish()


# -- 4 --------------------------------------------------------------------------

def displayed_f1(a1, a2):
    return np.array([PI * a1 * (a1**2 - 28 * a2**2 + 12) / 28,
                     PI * a1**2 * a2 - 4 / 7 * PI * a2 * (a2**2 + 27)])


def test_criterion_4_fixture_b_reduction():
    c = Criterion(4, "fixture B bifurcation function and zeros")
    loaded = load_b()
    rng = np.random.default_rng(4)
    dev_display = dev_exact = dev_flipped = 0.0
    for _ in range(20):
        a = rng.uniform([3.0, -2.0], [5.0, 2.0])
        f1 = bifurcation_f(loaded.system, loaded.manifold, a, 1)
        dev_display = max(dev_display, float(np.max(np.abs(f1 - displayed_f1(*a)))))
        dev_flipped = max(dev_flipped, float(np.max(np.abs(f1 + displayed_f1(*a)))))
        dev_exact = max(dev_exact, float(np.max(np.abs(f1 - fixture_b_f1_exact(*a)))))
    c.check("f_1 = displayed closed form at 20 points", dev_display <= 1e-9,
            f"max deviation {dev_display:.3g}; f_1 equals minus the display to {dev_flipped:.1e}")
    c.check("f_1 = independent exact average", dev_exact <= 1e-9, f"{dev_exact:.1e}")
    for s in (1, -1):
        red = analysis_b(B_PAPER, s).reduction
        err = float(np.max(np.abs(red.alpha_star - [4.0, s])))
        res = float(np.max(np.abs(red.f[1])))
        c.check(f"zero (4, {s:+d})", err <= 1e-10 and res <= 1e-10, f"residual {res:.1e}")
    c.finish()


# -- 5 --------------------------------------------------------------------------

def displayed_Q(b):
    """Rows eps^2, eps^3 of the displayed J_3 Q, columns lambda^0, lambda^1, lambda^2."""
    return np.array([[3072 * PI**2 / 49, 0.0, 1.0],
                     [5 / 343 * PI**2 * (2877 * b - 37297), PI * (336665 * b + 184320 * PI + 1509827) / 2940, 0.0]])


def test_criterion_5_fixture_b_blocks_and_jets():
    c = Criterion(5, "fixture B blocks, J_0 P and J_3 Q")
    rep = analysis_b(B_PAPER, 1).report
    A1 = np.asarray(rep.matrices["A"])[1]
    shown = np.array([[8 * PI / 7, 8 * PI], [-8 * PI, -8 * PI / 7]])
    dev = float(np.max(np.abs(A1 - shown)))
    c.check("eps-coefficient of A(eps) = display", dev <= 1e-6,
            f"got [[{A1[0, 0]:.6g}, {A1[0, 1]:.6g}], [{A1[1, 0]:.6g}, {A1[1, 1]:.6g}]], deviation {dev:.3g}")
    P = np.asarray(rep.matrices["P"])
    devP = float(np.max(np.abs(P[0, :2] - [math.exp(-2 * PI), -1.0])))
    extra = float(np.max(np.abs(P[0, 2:]))) if P.shape[1] > 2 else 0.0
    c.check("J_0 P = exp(-2 pi) - omega", max(devP, extra) <= 1e-8 and rep.matrices["P_factor_power"] == 0,
            f"{devP:.1e}")
    for b in (0.0, B_PAPER, 10.0):
        Q = np.asarray(analysis_b(b, 1).report.matrices["Q"])[:2, :3]
        want = displayed_Q(b)
        rel = np.abs(Q - want) / np.maximum(np.abs(want), 1e-300)
        mask = np.abs(want) > 0
        ok_entries = np.where(mask, rel <= 1e-6, np.abs(Q) <= 1e-6)
        lead_ok = bool(np.all(ok_entries[0]))
        bad = [f"[eps^{2 + i}] lambda^{j}: {Q[i, j]:.8g} vs {want[i, j]:.8g}"
               for i in range(2) for j in range(3) if not ok_entries[i, j]]
        c.check(f"J_3 Q at b = {b:g}", not bad, ("eps^2 row ok; " if lead_ok else "") + "; ".join(bad))
    c.finish()


# -- 6 --------------------------------------------------------------------------

def test_criterion_6_fixture_b_verdicts():
    c = Criterion(6, "fixture B verdicts and R")
    plus, minus = analysis_b(B_PAPER, 1).report, analysis_b(B_PAPER, -1).report
    c.check("R(-1.1267) = -913.4", abs(plus.R - (-913.4)) <= 0.5,
            f"R = {plus.R:.4f}; closed form pi(16485 b - 122880 pi - 157337)/3920 = {paper_R_b(B_PAPER):.4f}")
    c.check("phi_+ Stable at b = -1.1267", plus.verdict == "Stable", plus.verdict)
    c.check("phi_- Unstable at b = -1.1267", minus.verdict == "Unstable",
            f"{minus.verdict} (real-part rule: {minus.real_part_verdict})")
    p100, m100 = analysis_b(100.0, 1).report, analysis_b(100.0, -1).report
    c.check("b = 100: phi_+ Unstable, phi_- Stable (swapped)",
            p100.verdict == "Unstable" and m100.verdict == "Stable", f"{p100.verdict}, {m100.verdict}")
    c.finish()


# -- 7 --------------------------------------------------------------------------

def test_criterion_7_oracle_agreement():
    c = Criterion(7, "oracle agreement")
    an = analysis_a()
    sys_a = load_a().system
    res = run_oracle(sys_a, 1 / 45, an.guess(1 / 45), ell=an.report.ell, guess_fn=an.guess)
    path = " -> ".join(f"1/{round(1 / e)}" if abs(1 / e - round(1 / e)) < 1e-9 else f"{e:.4g}" for e in res.path)
    c.check("fixture A eps = 1/45 shooting from z0 + eps z1", res.residual <= 1e-10,
            f"residual {res.residual:.1e}, continuation path {path}" if res.continued else f"residual {res.residual:.1e}")
    c.check("fixture A verdicts agree", res.verdict == an.report.verdict,
            f"oracle {res.verdict} (max |omega| = {np.abs(res.multipliers).max():.6f}), predicted {an.report.verdict}")
    C_a = float(np.linalg.norm(res.z - an.reduction.z0) * 45)
    z1n = float(np.linalg.norm(an.reduction.z_coeffs[1]))
    c.check("fixture A |z* - z0| <= C eps", C_a <= 2 * z1n, f"C = {C_a:.3g}, |z1| = {z1n:.3g}")

    sys_b = load_b().system
    for s in (1, -1):
        an = analysis_b(B_PAPER, s)
        Cs, verdicts, direct = [], [], True
        for k in (200, 100, 50):
            r = run_oracle(sys_b, 1 / k, an.guess(1 / k), ell=an.report.ell)
            direct &= not r.continued
            verdicts.append(r.verdict)
            Cs.append(float(np.linalg.norm(r.z - an.reduction.z0) * k))
        tag = "phi_+" if s > 0 else "phi_-"
        c.check(f"fixture B {tag} shooting converges directly", direct)
        c.check(f"fixture B {tag} verdicts agree", all(v == an.report.verdict for v in verdicts),
                f"oracle {verdicts}, predicted {an.report.verdict}")
        spread = max(Cs) / min(Cs)
        c.check(f"fixture B {tag} C stable", spread <= 1.5, "C = " + ", ".join(f"{x:.3g}" for x in Cs))
    c.finish()


# -- 8 --------------------------------------------------------------------------

def test_criterion_8_property_suites():
    c = Criterion(8, "property suites")
    rng = np.random.default_rng(8)

    worst = 0.0
    for _ in range(100):
        K = int(rng.integers(0, 5))
        a, b, d = (EpsSeries(rng.uniform(-3, 3, K + 1)) for _ in range(3))
        for lhs, rhs in (((a * b) * d, a * (b * d)), (a * (b + d), a * b + a * d), (a * b, b * a)):
            worst = max(worst, float(np.max(np.abs(lhs.coeffs - rhs.coeffs))))
        worst = max(worst, float(np.max(np.abs((a * b).coeffs - np.convolve(a.coeffs, b.coeffs)[: K + 1]))))
    c.check("series ring axioms", worst <= 1e-10, f"{worst:.1e}")

    worst = 0.0
    for _ in range(100):
        n, K = int(rng.integers(1, 5)), int(rng.integers(0, 5))
        A = SeriesMatrix(rng.standard_normal((K + 1, n, n)))
        B = SeriesMatrix(rng.standard_normal((K + 1, n, n)))
        lhs, rhs = series_det(A @ B).coeffs, (series_det(A) * series_det(B)).coeffs
        worst = max(worst, float(np.max(np.abs(lhs - rhs)) / max(1.0, np.abs(rhs).max())))
    c.check("det multiplicativity", worst <= 1e-10, f"{worst:.1e}")

    worst = 0.0
    for _ in range(100):
        m, p, K = int(rng.integers(1, 4)), int(rng.integers(1, 4)), int(rng.integers(0, 4))
        S = SeriesMatrix(rng.standard_normal((K + 1, m + p, m + p))) + SeriesMatrix.identity(m + p, K) * 3.0
        M1, M2, M3, M4 = S[:m, :m], S[:m, m:], S[m:, :m], S[m:, m:]
        lhs = series_det(S).coeffs
        rhs = (series_det(M1) * series_det(M4 - M3 @ series_inv(M1) @ M2)).coeffs
        worst = max(worst, float(np.max(np.abs(lhs - rhs)) / max(1.0, np.abs(lhs).max())))
    c.check("Schur determinant identity", worst <= 1e-10, f"{worst:.1e}")

    worst = 0.0
    for sys, z in ((forced_oscillator(), [0.3, -0.2]), (load_b().system, [4.2, -0.8, 0.1])):
        fj = flow_eps_jet(sys, z, order=2)
        for i in (1, 2):
            worst = max(worst, float(np.max(np.abs(fj.c(i) * math.factorial(i) - recursion_yi(sys, z, i)))))
    c.check("flow_eps_jet vs recursion_yi", worst <= 1e-6, f"{worst:.1e}")

    worst = 0.0
    for _ in range(100):
        K, m = int(rng.integers(1, 5)), int(rng.integers(1, 4))
        table = _poly_table(rng, K, m, 2)
        v = [None] + [rng.standard_normal(m) for _ in range(K)]
        direct = _direct(table, v, K, m, 2)
        for i in range(1, K + 1):
            worst = max(worst, float(np.max(np.abs(faa_di_bruno_sum(table, v, i) - direct[i]))))
    c.check("Faa di Bruno vs direct", worst <= 1e-9, f"{worst:.1e}")

    worst = 0.0
    for _ in range(100):
        m, p = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        A, Delta, Gamma, dbeta = random_reduced(rng, m, p)
        _, resid = build_L(Delta, Gamma, dbeta)
        worst = max(worst, resid / max(1.0, np.abs(A[0]).max()))
    c.check("block-diagonalisation residual", worst <= 1e-10, f"{worst:.1e}")
    c.finish()


# -- 9 --------------------------------------------------------------------------

def test_criterion_9_remainder_orders():
    c = Criterion(9, "remainder orders")
    sys = load_b().system
    z = np.array([4.1, 0.9, 0.05])
    epss = [1 / 50, 1 / 100, 1 / 200, 1 / 400]
    for k in (1, 2):
        fj = flow_eps_jet(sys, z, order=k)
        errs = []
        for e in epss:
            exact = integrate(sys, z, e, rtol=1e-13, atol=1e-15)
            errs.append(float(np.linalg.norm(exact - sum(e**i * fj.c(i) for i in range(k + 1)))))
        orders = [math.log2(errs[j] / errs[j + 1]) for j in range(len(errs) - 1)]
        c.check(f"|x(T) - sum_(i<={k}) eps^i c_i| ~ eps^{k + 1}", abs(orders[-1] - (k + 1)) <= 0.3,
                "orders " + ", ".join(f"{o:.2f}" for o in orders))

    def moduli_order(an, sys, ks, guess_fn=None):
        results = [run_oracle(sys, 1 / k, an.guess(1 / k), ell=an.report.ell, guess_fn=guess_fn) for k in ks]
        table = compare(an.report, results)
        orders = [r["observed_order"] for r in table["rows"][1:]]
        return orders, table["expected_order"]

    orders, want = moduli_order(analysis_b(B_PAPER, 1), load_b().system, (100, 200, 400))
    c.check("fixture B predicted moduli converge", abs(orders[0] - want) <= 0.5,
            f"observed {', '.join(f'{o:.2f}' for o in orders)}, expected {want}")
    an = analysis_a()
    orders, want = moduli_order(an, load_a().system, (400, 800, 1600), an.guess)
    c.check("fixture A predicted moduli converge", abs(orders[0] - want) <= 0.5,
            f"observed {', '.join(f'{o:.2f}' for o in orders)}, expected {want}")
    c.finish()

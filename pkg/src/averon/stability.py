"""Stability of the bifurcating periodic orbit from finite eps-jets.

Full-dimensional case (``m = n``): the eigenvalue branches of
``eps^-l A(eps)`` with ``A(eps) = d_z Pi(z(eps), eps) - Y_0(T)`` are obtained
by implicit-function recursion on the characteristic polynomial.

Reduced case (``m < n``): the Jacobian is conjugated by ``L``, which
block-diagonalises ``Y_0(T)``, and the multipliers split into the roots of two
polynomials: ``P(omega; eps)`` (transverse block, multipliers near the
spectrum of ``I + Delta'``) and ``Q(lambda; eps)`` (tangent block, multipliers
``1 + eps^l lambda``), both built from Schur complements in series arithmetic.

Verdicts use the sign of the expanded multiplier modulus ``|omega(eps)|^2 - 1``
on critical branches.  The sign of ``Re J_mu lambda(eps)`` is reported
alongside; when ``l = 1`` and a critical ``lambda(0)`` is purely imaginary the
two differ by ``|lambda(0)|^2`` at order ``eps^2``, and the report flags it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .series import EpsSeries, SeriesMatrix, SeriesPoly, poly_det, series_inv

__all__ = [
    "StabilityError",
    "NoLeadingOrder",
    "H4Violation",
    "RootBranch",
    "StabilityReport",
    "leading_order",
    "build_A_eps",
    "char_poly",
    "classify_full_dim",
    "build_L",
    "conjugated_blocks",
    "build_NM",
    "poly_P_jet",
    "poly_Q_jet",
    "root_branches",
    "modulus_series",
    "classify_reduced",
    "LEADING_RTOL",
    "GAP_TOL",
]

LEADING_RTOL = 1e-9
GAP_TOL = 1e-6
BOUNDARY_TOL = 1e-7


class StabilityError(ArithmeticError):
    pass


class NoLeadingOrder(StabilityError):
    pass


class H4Violation(StabilityError):
    pass


@dataclass
class RootBranch:
    """One root of a characteristic polynomial continued in eps."""

    label: str
    boundary: str  # "imaginary-axis" or "unit-circle"
    root0: complex
    position: str  # "critical", "inside" or "outside"
    jet: EpsSeries | None = None
    modulus: EpsSeries | None = None  # |omega(eps)|^2 - 1 as a series
    modulus_sign: int | None = None
    modulus_order: int | None = None
    real_part_sign: int | None = None
    real_part_order: int | None = None

    def multiplier(self, eps: float, ell: int = 0) -> complex:
        """Predicted Floquet multiplier at ``eps``."""
        lam = self.jet(eps) if self.jet is not None else self.root0
        if self.boundary == "imaginary-axis":
            return 1.0 + eps ** ell * lam
        return lam

    def as_dict(self) -> dict:
        d = {"label": self.label, "boundary": self.boundary, "position": self.position,
             "root0": self.root0}
        if self.jet is not None:
            d["jet"] = list(self.jet.coeffs)
        if self.modulus is not None:
            d["modulus_series"] = list(self.modulus.coeffs)
            d["modulus_sign"] = self.modulus_sign
            d["modulus_order"] = self.modulus_order
        if self.real_part_sign is not None:
            d["real_part_sign"] = self.real_part_sign
            d["real_part_order"] = self.real_part_order
        return d


@dataclass
class StabilityReport:
    case: str  # "FullDim" or "Reduced"
    ell: int
    mu: dict
    matrices: dict
    branches: list[RootBranch]
    verdict: str
    flags: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    real_part_verdict: str | None = None

    @property
    def critical(self) -> list[RootBranch]:
        return [b for b in self.branches if b.position == "critical"]

    @property
    def R(self) -> float | None:
        """eps-coefficient of the real part of the first critical tangent branch."""
        for b in self.critical:
            if b.boundary == "imaginary-axis" and b.jet is not None and b.jet.order >= 1:
                return float(b.jet.coeffs[1].real)
        return None

    def predicted_multipliers(self, eps: float) -> np.ndarray:
        return np.array([b.multiplier(eps, self.ell) for b in self.branches])

    def counts(self) -> dict:
        out = {"critical": 0, "inside": 0, "outside": 0}
        for b in self.branches:
            out[b.position] += 1
        return out


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def leading_order(S: SeriesMatrix, rtol: float = LEADING_RTOL) -> int:
    norms = np.array([np.abs(c).max(initial=0.0) for c in S.coeffs])
    scale = norms.max(initial=0.0)
    if scale == 0:
        raise NoLeadingOrder("no leading order within the computed jet (all coefficients vanish)")
    nz = np.nonzero(norms > rtol * scale)[0]
    return int(nz[0])


def _first_sign(coeffs, start: int, tol: float):
    """Sign and index of the first coefficient above ``tol`` from ``start``."""
    for i in range(start, len(coeffs)):
        c = float(np.real(coeffs[i]))
        if abs(c) > tol:
            return (1 if c > 0 else -1), i
    return None, None


def _poly_rows(S: SeriesMatrix, shift_lambda: bool = True, scale=-1.0) -> list[list[SeriesPoly]]:
    """Entries of ``S - x I`` as :class:`SeriesPoly` (``scale`` multiplies x on the diagonal)."""
    r, c = S.shape
    rows = []
    for i in range(r):
        row = []
        for j in range(c):
            p = SeriesPoly.from_series(S[i, j])
            if shift_lambda and i == j:
                p = p + SeriesPoly.variable(S.order, 0, scale)
            row.append(p)
        rows.append(row)
    return rows


def char_poly(S: SeriesMatrix) -> SeriesPoly:
    """``det(S(eps) - lambda I)`` with eps-series coefficients."""
    return poly_det(_poly_rows(S))


def _polish(coeffs_asc: np.ndarray, r: complex) -> complex:
    p = np.polynomial.Polynomial(coeffs_asc)
    dp = p.deriv()
    for _ in range(3):
        d = dp(r)
        if d == 0:
            break
        r = r - p(r) / d
    return complex(r)


def root_branches(poly: SeriesPoly, boundary: str, mu: int, label: str = "root",
                  exclude: list[complex] | None = None, tol: float = BOUNDARY_TOL,
                  gap: float = GAP_TOL) -> tuple[list[RootBranch], dict]:
    """Continue the roots of ``poly(x; 0)`` in eps.

    Critical roots (on the imaginary axis or the unit circle) get an eps-jet of
    order ``mu`` from ``x_j = -[eps^j] poly(X_{j-1}(eps), eps) / poly_x(x_0, 0)``;
    other roots are classified by their position at ``eps = 0``.  Roots listed
    in ``exclude`` (with multiplicity) are dropped.
    """
    if boundary not in ("imaginary-axis", "unit-circle"):
        raise ValueError("boundary must be 'imaginary-axis' or 'unit-circle'")
    mu = min(mu, poly.order)
    c0 = poly.eps_coeff(0)
    nz = np.nonzero(np.abs(c0) > 0)[0]
    deg = int(nz[-1]) if len(nz) else 0
    c0 = c0[: deg + 1]
    roots = [_polish(c0, r) for r in np.polynomial.polynomial.polyroots(c0)] if deg > 0 else []
    for ex in exclude or []:
        if roots:
            k = int(np.argmin([abs(r - ex) for r in roots]))
            if abs(roots[k] - ex) < 1e-6 * (1 + abs(ex)):
                roots.pop(k)
    scale = max([1.0] + [abs(r) for r in roots])
    flags = {"simple_critical": True}
    dpoly = poly.derivative()
    out = []
    for idx, r0 in enumerate(roots):
        if boundary == "imaginary-axis":
            dist = r0.real
        else:
            dist = abs(r0) - 1.0
        if abs(dist) <= tol * scale:
            position = "critical"
        elif dist < 0:
            position = "inside"
        else:
            position = "outside"
        br = RootBranch(f"{label}{idx + 1}", boundary, r0, position)
        if position == "critical":
            others = [abs(r0 - s) for j, s in enumerate(roots) if j != idx]
            if others and min(others) < gap:
                flags["simple_critical"] = False
            else:
                br.jet = _continue_root(poly, dpoly, r0, mu)
        out.append(br)
    # order the output deterministically
    out.sort(key=lambda b: (round(b.root0.real, 9), round(b.root0.imag, 9)))
    for k, b in enumerate(out):
        b.label = f"{label}{k + 1}"
    return out, flags


def _continue_root(poly: SeriesPoly, dpoly: SeriesPoly, r0: complex, mu: int) -> EpsSeries:
    d0 = dpoly(r0, 0.0)
    if d0 == 0:
        raise StabilityError("root is not simple")
    coeffs = np.zeros(mu + 1, dtype=complex)
    coeffs[0] = r0
    sub = poly.jet(mu) if poly.order > mu else poly
    for j in range(1, mu + 1):
        val = sub.compose_series(EpsSeries(coeffs.copy()))
        coeffs[j] = -val.coeffs[j] / d0
    return EpsSeries(coeffs)


def modulus_series(jet: EpsSeries, ell: int, boundary: str) -> EpsSeries:
    """``|omega(eps)|^2 - 1`` with ``omega = 1 + eps^l lambda`` or ``omega`` itself.

    Known through order ``l + mu`` for tangent branches and ``mu`` for
    transverse ones.
    """
    mu = jet.order
    if boundary == "unit-circle":
        w = jet
        val = (w * w.conj()) - 1.0
        return EpsSeries(np.real(val.coeffs))
    K = ell + mu
    lam = EpsSeries(np.concatenate([np.zeros(ell, dtype=complex), jet.coeffs]))  # eps^l lambda
    lam = EpsSeries(lam.coeffs[: K + 1])
    val = 2.0 * lam.real + lam * lam.conj()
    return EpsSeries(np.real(val.coeffs[: K + 1]))


def _assess(branch: RootBranch, ell: int, tol: float):
    """Fill in modulus and real-part signs for a critical branch."""
    if branch.jet is None:
        return
    m = modulus_series(branch.jet, ell, branch.boundary)
    branch.modulus = m
    scale = max(1.0, float(np.max(np.abs(m.coeffs))))
    start = ell + 1 if branch.boundary == "imaginary-axis" else 1
    branch.modulus_sign, branch.modulus_order = _first_sign(m.coeffs, start, tol * scale)
    if branch.boundary == "imaginary-axis":
        rs = np.real(branch.jet.coeffs)
        sc = max(1.0, float(np.max(np.abs(branch.jet.coeffs))))
        branch.real_part_sign, branch.real_part_order = _first_sign(rs, 1, tol * sc)
    else:
        # on the unit circle the real-part rule reads |omega| directly
        branch.real_part_sign, branch.real_part_order = branch.modulus_sign, branch.modulus_order


def _verdict(branches: list[RootBranch], use: str) -> str:
    if any(b.position == "outside" for b in branches):
        return "Unstable"
    undecided = False
    for b in branches:
        if b.position != "critical":
            continue
        s = b.modulus_sign if use == "modulus" else b.real_part_sign
        if s is None:
            undecided = True
        elif s > 0:
            return "Unstable"
    return "Inconclusive" if undecided else "Stable"


def _imag_axis_positions(branches):
    # tangent roots: left half-plane is "inside", right half-plane "outside"
    return branches


# ---------------------------------------------------------------------------
# Full-dimensional case
# ---------------------------------------------------------------------------

def build_A_eps(A_coeffs, Y0: np.ndarray | None = None) -> tuple[SeriesMatrix, int]:
    """``A(eps) = sum_j eps^j A_j - Y_0(T)`` and its leading order ``l``."""
    A = [np.asarray(a, float) for a in A_coeffs]
    Y0 = A[0] if Y0 is None else np.asarray(Y0, float)
    coeffs = np.array([A[0] - Y0] + A[1:])
    S = SeriesMatrix(coeffs)
    if len(A) == 1 or not np.any([np.abs(c).max() > 0 for c in coeffs[1:]]):
        raise NoLeadingOrder("no leading order within k: all perturbation coefficients vanish")
    ell = leading_order(S)
    if ell == 0:
        raise StabilityError("A(eps) does not vanish at eps = 0; branch data are inconsistent")
    return S, ell


def classify_full_dim(A_eps: SeriesMatrix, ell: int, mu: int, tol: float = 1e-8) -> StabilityReport:
    """Eigenvalue branches of ``J_mu(eps^-l A(eps))`` and the resulting verdict."""
    if ell + mu > A_eps.order:
        raise StabilityError(f"mu = {mu} needs A(eps) through order {ell + mu}, have {A_eps.order}")
    M = A_eps.shift(ell).jet(mu)
    P = char_poly(M)
    branches, flags = root_branches(P, "imaginary-axis", mu, "lambda")
    for b in branches:
        if b.position == "critical":
            _assess(b, ell, tol)
    report = StabilityReport(
        case="FullDim", ell=ell, mu={"mu": mu},
        matrices={"A_ell": M.coeffs[0], "A_eps": A_eps.coeffs},
        branches=branches, verdict="", flags=dict(flags),
    )
    _finish(report)
    return report


def _finish(report: StabilityReport):
    if not report.flags.get("simple_critical", True):
        report.verdict = "Inconclusive"
        report.real_part_verdict = "Inconclusive"
        report.notes.append("multiple critical root: hypotheses of the jet criterion fail")
        return
    report.verdict = _verdict(report.branches, "modulus")
    report.real_part_verdict = _verdict(report.branches, "real-part")
    agree = report.verdict == report.real_part_verdict
    report.flags["real_part_rule_agrees"] = agree
    if not agree:
        report.notes.append(
            "sign of Re J_mu lambda(eps) and sign of |1 + eps^l lambda(eps)|^2 - 1 differ on a "
            "critical branch; the verdict follows the multiplier modulus")


# ---------------------------------------------------------------------------
# Reduced case
# ---------------------------------------------------------------------------

def build_L(Delta, Gamma, dbeta, tol: float = 1e-10):
    """Matrix ``L`` with ``L Y_0 L^-1 = diag(I_m, I + Delta - dbeta Gamma)``.

    Returns ``(L, residual)``; the residual is measured on ``Y_0`` rebuilt
    from the blocks ``dg_0 = [[-Gamma dbeta, Gamma], [-Delta dbeta, Delta]]``.
    """
    Delta = np.atleast_2d(np.asarray(Delta, float))
    Gamma = np.atleast_2d(np.asarray(Gamma, float))
    dbeta = np.atleast_2d(np.asarray(dbeta, float))
    p = Delta.shape[0]
    m = Gamma.shape[0]
    Dp = Delta - dbeta @ Gamma
    if abs(np.linalg.det(Dp)) < 1e-12:
        raise H4Violation("Delta - dbeta Gamma is singular (hypothesis H4 fails)")
    Dpi = np.linalg.inv(Dp)
    L = np.block([[np.eye(m) + Gamma @ Dpi @ dbeta, -Gamma @ Dpi], [-dbeta, np.eye(p)]])
    G = np.block([[-Gamma @ dbeta, Gamma], [-Delta @ dbeta, Delta]])
    Y0 = np.eye(m + p) + G
    target = np.block([[np.eye(m), np.zeros((m, p))], [np.zeros((p, m)), np.eye(p) + Dp]])
    resid = float(np.max(np.abs(L @ Y0 @ np.linalg.inv(L) - target)))
    if resid > tol * max(1.0, np.abs(Y0).max()):
        raise StabilityError(f"block-diagonalisation residual {resid:.2e} too large")
    return L, resid


def conjugated_blocks(A_coeffs, L: np.ndarray, m: int, Y0: np.ndarray | None = None, tol: float = 1e-8):
    """``L (d_z Pi(z(eps), eps) - Y_0) L^-1`` split into ``(A, B, C, D)``."""
    A = [np.asarray(a, float) for a in A_coeffs]
    Y0 = A[0] if Y0 is None else np.asarray(Y0, float)
    Linv = np.linalg.inv(L)
    coeffs = np.array([L @ (A[0] - Y0) @ Linv] + [L @ a @ Linv for a in A[1:]])
    if np.abs(coeffs[0]).max() > tol * max(1.0, np.abs(Y0).max()):
        raise StabilityError("conjugated Jacobian does not vanish at eps = 0")
    coeffs[0] = 0.0
    S = SeriesMatrix(coeffs)
    return S[:m, :m], S[:m, m:], S[m:, :m], S[m:, m:]


def build_NM(blocks, Delta, Gamma, dbeta):
    """``N = I + Delta' + D`` and ``M = A - B (Delta' + D)^-1 C`` with their leading order."""
    A, B, C, D = blocks
    Delta = np.atleast_2d(np.asarray(Delta, float))
    Dp = Delta - np.atleast_2d(dbeta) @ np.atleast_2d(Gamma)
    K = D + SeriesMatrix.constant(Dp, D.order)
    N = K + SeriesMatrix.identity(Dp.shape[0], D.order)
    M = A - B @ series_inv(K) @ C
    ell = leading_order(M)
    if ell == 0:
        raise StabilityError("M(eps) does not vanish at eps = 0")
    return N, M, ell


def poly_P_jet(blocks, N: SeriesMatrix, mu1: int):
    """``(1 - omega)^s P(omega; eps)`` truncated at ``eps^mu1``.

    ``P = det[N - omega I - C ((1 - omega) I + A)^-1 B]``; the inverse is the
    finite expansion ``sum_k (-1)^k A^k / (1 - omega)^(k + 1)`` (``A = O(eps)``)
    and the factor ``(1 - omega)^s`` with ``s = (n - m) max(0, mu1 - 1)``
    clears denominators.  Returns ``(poly, s)``.
    """
    A, B, C, D = blocks
    if mu1 > N.order:
        raise StabilityError(f"mu1 = {mu1} exceeds the available order {N.order}")
    Nj = N.jet(mu1)
    p = Nj.shape[0]
    K = mu1
    kmax = mu1 - 2
    e = max(0, mu1 - 1)
    one_minus = SeriesPoly(np.array([[1.0, -1.0]] + [[0.0, 0.0]] * K))
    pw = [SeriesPoly(np.eye(K + 1, 1))]
    for _ in range(e):
        pw.append(pw[-1] * one_minus)
    rows = _poly_rows(Nj)
    if e > 0:
        rows = [[x * pw[e] for x in r] for r in rows]
        Ak = SeriesMatrix.identity(A.shape[0], K)
        Aj, Bj, Cj = A.jet(K), B.jet(K), C.jet(K)
        for k in range(kmax + 1):
            T = Cj @ Ak @ Bj
            fac = pw[e - k - 1] * ((-1) ** k)
            for i in range(p):
                for j in range(p):
                    rows[i][j] = rows[i][j] - SeriesPoly.from_series(T[i, j]) * fac
            Ak = Ak @ Aj
    return poly_det(rows), p * e


def poly_Q_jet(blocks, M: SeriesMatrix, ell: int, mu2: int, Delta, Gamma, dbeta):
    """``Q(lambda; eps) / eps^(m l)`` truncated at ``eps^mu2``.

    Uses ``Q = det[-eps^l lambda I + A - B M_4^-1 C]`` with
    ``M_4^-1 = sum_k (eps^l lambda)^k (Delta' + D)^-(k + 1)``.
    """
    A, B, C, D = blocks
    K = ell + mu2
    if K > A.order:
        raise StabilityError(f"mu2 = {mu2} needs blocks through order {K}, have {A.order}")
    Dp = np.atleast_2d(Delta) - np.atleast_2d(dbeta) @ np.atleast_2d(Gamma)
    Kinv = series_inv(D.jet(K) + SeriesMatrix.constant(Dp, K))
    Aj, Bj, Cj = A.jet(K), B.jet(K), C.jet(K)
    m = A.shape[0]
    E = [[SeriesPoly.from_series(Aj[i, j]) for j in range(m)] for i in range(m)]
    lam_eps = SeriesPoly.variable(K, ell, 1.0)  # eps^l * lambda
    lam_pow = SeriesPoly(np.eye(K + 1, 1))
    Kpow = Kinv
    for k in range(K // max(ell, 1) + 1):
        T = Bj @ Kpow @ Cj
        for i in range(m):
            for j in range(m):
                E[i][j] = E[i][j] - SeriesPoly.from_series(T[i, j]) * lam_pow
        lam_pow = lam_pow * lam_eps
        Kpow = Kpow @ Kinv
    rows = []
    for i in range(m):
        row = []
        for j in range(m):
            low = E[i][j].coeffs[:ell]
            if np.abs(low).max(initial=0.0) > 1e-8 * max(1.0, np.abs(E[i][j].coeffs).max()):
                raise StabilityError("Schur complement does not vanish to order l")
            x = E[i][j].shift(ell).jet(mu2)
            if i == j:
                x = x - SeriesPoly.variable(mu2, 0, 1.0)
            row.append(x)
        rows.append(row)
    return poly_det(rows)


def classify_reduced(P: SeriesPoly, s: int, Q: SeriesPoly, ell: int, mu1: int, mu2: int,
                     tol: float = 1e-8) -> tuple[list[RootBranch], dict]:
    """Branches of P (unit circle) and Q (imaginary axis) with their critical jets."""
    pb, pflags = root_branches(P, "unit-circle", mu1, "omega", exclude=[1.0] * s)
    qb, qflags = root_branches(Q, "imaginary-axis", mu2, "lambda")
    for b in pb + qb:
        if b.position == "critical":
            _assess(b, ell, tol)
    flags = {"simple_critical": pflags["simple_critical"] and qflags["simple_critical"]}
    return pb + qb, flags


def reduced_report(A_coeffs, Delta, Gamma, dbeta, m: int, mu1: int, mu2: int,
                   tol: float = 1e-8) -> StabilityReport:
    """Full reduced-case pipeline from the Jacobian coefficients ``A_j``."""
    L, resid = build_L(Delta, Gamma, dbeta)
    blocks = conjugated_blocks(A_coeffs, L, m)
    N, M, ell = build_NM(blocks, Delta, Gamma, dbeta)
    P, s = poly_P_jet(blocks, N, mu1)
    Q = poly_Q_jet(blocks, M, ell, mu2, Delta, Gamma, dbeta)
    branches, flags = classify_reduced(P, s, Q, ell, mu1, mu2, tol)
    flags["L_residual"] = resid
    Dp = np.atleast_2d(Delta) - np.atleast_2d(dbeta) @ np.atleast_2d(Gamma)
    ev = np.linalg.eigvals(np.eye(Dp.shape[0]) + Dp)
    flags["H4"] = bool(np.all(np.abs(ev - 1) > 1e-9))
    report = StabilityReport(
        case="Reduced", ell=ell, mu={"mu1": mu1, "mu2": mu2},
        matrices={"L": L, "N0": N.coeffs[0], "M_ell": M.coeffs[ell], "A": blocks[0].coeffs,
                  "B": blocks[1].coeffs, "C": blocks[2].coeffs, "D": blocks[3].coeffs,
                  "P": P.coeffs, "Q": Q.coeffs, "P_factor_power": s},
        branches=branches, verdict="", flags=flags,
    )
    report.notes.append("P uses the block (1 - omega) I + A(eps); Q uses the Schur complement "
                        "with (Delta' + D - eps^l lambda I)^-1")
    _finish(report)
    return report

"""Independent check of stability predictions by direct shooting.

The periodic orbit at a fixed ``eps > 0`` is found by Newton iteration on
``Pi(z, eps) - z`` with the Jacobian from the variational equation; its
Floquet multipliers are the eigenvalues of the monodromy matrix.  Nothing here
uses the series machinery, so agreement with :mod:`averon.stability` is a
genuine cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .flow import IntegrationError, integrate, integrate_samples, integrate_with_jacobian
from .system import SystemDef

__all__ = [
    "ShootingError",
    "OracleResult",
    "shoot_periodic",
    "monodromy_multipliers",
    "oracle_verdict",
    "run_oracle",
    "compare",
    "poincare_iterates",
    "BAND_FACTOR",
]

BAND_FACTOR = 5.0


class ShootingError(RuntimeError):
    """Newton shooting failed to converge from the given guess."""


@dataclass
class OracleResult:
    eps: float
    z: np.ndarray
    residual: float
    iterations: int
    multipliers: np.ndarray
    verdict: str
    band: float
    monodromy: np.ndarray | None = None
    agreement: bool | None = None
    path: list[float] = field(default_factory=list)

    @property
    def continued(self) -> bool:
        """True when the fixed point was reached by continuation in eps."""
        return len(self.path) > 1

    def as_dict(self) -> dict:
        return {
            "eps": self.eps,
            "z": list(self.z),
            "residual": self.residual,
            "iterations": self.iterations,
            "multipliers": list(self.multipliers),
            "moduli": list(np.abs(self.multipliers)),
            "verdict": self.verdict,
            "band": self.band,
            "agreement": self.agreement,
            "continuation_path": list(self.path),
        }


def _newton(sys, eps, z, tol, max_iter, rtol, atol, isolation):
    n = len(z)

    def resid(zz):
        x, Y = integrate_with_jacobian(sys, zz, eps, rtol=rtol, atol=atol)
        return x - zz, Y

    try:
        d, Y = resid(z)
    except IntegrationError as exc:
        raise ShootingError(f"integration failed at the initial guess: {exc}") from exc
    r = float(np.linalg.norm(d))
    it = 0
    while r > tol:
        it += 1
        if it > max_iter:
            raise ShootingError(f"no convergence after {max_iter} iterations, residual {r:.3e}")
        try:
            step = np.linalg.solve(Y - np.eye(n), -d)
        except np.linalg.LinAlgError as exc:
            raise ShootingError("singular shooting Jacobian") from exc
        lam = 1.0
        for _ in range(13):
            trial = z + lam * step
            try:
                d_new, Y_new = resid(trial)
            except IntegrationError:
                lam *= 0.5
                continue
            r_new = float(np.linalg.norm(d_new))
            if r_new < r or r_new <= tol:
                break
            lam *= 0.5
        else:
            raise ShootingError(f"line search failed at iteration {it}, residual {r:.3e}")
        z, d, Y, r = trial, d_new, Y_new, r_new
    smin = np.linalg.svd(Y - np.eye(n), compute_uv=False)[-1]
    if smin < isolation:
        raise ShootingError(f"converged to a non-isolated fixed point (smallest singular value "
                            f"of the shooting Jacobian {smin:.2e})")
    return z, r, it


def shoot_periodic(sys: SystemDef, eps: float, z_guess, tol: float = 1e-10, max_iter: int = 40,
                   rtol: float = 1e-11, atol: float = 1e-13, guess_fn=None, isolation: float = 1e-8,
                   factor: float = 1.5, max_halvings: int = 8):
    """Isolated fixed point of the time-T map by damped Newton.

    Returns ``(z, residual, iterations, path)`` where ``path`` lists the eps
    values visited.  A step that increases the residual or breaks the
    integrator is halved.  Fixed points with a (numerically) singular
    shooting Jacobian are rejected: the bifurcating orbit is isolated.

    When the direct solve fails and ``guess_fn(eps)`` is given, the guess is
    evaluated at ``eps / 2^j`` until Newton converges there, and the solution
    is continued back up to ``eps`` with secant predictors.
    """
    if eps == 0:
        raise ValueError("eps = 0 is degenerate: the unperturbed flow is periodic on the whole manifold")
    z0 = np.asarray(z_guess, float).copy()
    try:
        z, r, it = _newton(sys, eps, z0, tol, max_iter, rtol, atol, isolation)
        return z, r, it, [eps]
    except ShootingError as exc:
        if guess_fn is None:
            raise
        first = exc
    e = eps
    for _ in range(max_halvings):
        e /= 2
        try:
            z, r, it = _newton(sys, e, np.asarray(guess_fn(e), float), tol, max_iter, rtol, atol, isolation)
            break
        except ShootingError:
            continue
    else:
        raise ShootingError(f"direct shooting failed ({first}) and no smaller eps converged either")
    path = [e]
    pts = [(e, z)]
    total = it
    while e < eps:
        e_next = min(eps, e * factor)
        if len(pts) >= 2:
            (ea, za), (eb, zb) = pts[-2], pts[-1]
            g = zb + (zb - za) * (e_next - eb) / (eb - ea)
        else:
            g = z
        z, r, it = _newton(sys, e_next, g, tol, max_iter, rtol, atol, isolation)
        total += it
        e = e_next
        pts.append((e, z))
        path.append(e)
    return z, r, total, path


def monodromy_multipliers(sys: SystemDef, eps: float, z, rtol: float = 1e-12, atol: float = 1e-14):
    """Eigenvalues of ``d_z Pi(z, eps)`` and the matrix itself."""
    _, Y = integrate_with_jacobian(sys, np.asarray(z, float), eps, rtol=rtol, atol=atol)
    return np.linalg.eigvals(Y), Y


def oracle_verdict(multipliers, eps: float, ell: int = 1, factor: float = BAND_FACTOR):
    """Verdict from multiplier moduli with an undecided band around 1."""
    band = factor * eps ** (ell + 1)
    mod = np.abs(multipliers)
    if np.any(mod >= 1 + band):
        return "Unstable", band
    if np.all(mod <= 1 - band):
        return "Stable", band
    return "Undecided", band


def run_oracle(sys: SystemDef, eps: float, z_guess, ell: int = 1, tol: float = 1e-10,
               guess_fn=None) -> OracleResult:
    z, r, its, path = shoot_periodic(sys, eps, z_guess, tol=tol, guess_fn=guess_fn)
    mults, Y = monodromy_multipliers(sys, eps, z)
    verdict, band = oracle_verdict(mults, eps, ell)
    return OracleResult(eps, z, r, its, mults, verdict, band, monodromy=Y, path=path)


def _match(pred, actual):
    """Greedy nearest matching of predicted multipliers to the oracle ones."""
    actual = list(actual)
    out = []
    for p in pred:
        k = int(np.argmin([abs(p - a) for a in actual]))
        out.append(actual.pop(k))
    return out


def compare(report, results: list[OracleResult], z0=None) -> dict:
    """Agreement table between a stability report and oracle runs.

    For each eps the predicted moduli ``|omega(eps)|`` of the critical
    branches are matched to the nearest oracle multipliers; the observed
    order of the deviation is ``log(dev_i / dev_j) / log(eps_i / eps_j)``
    between successive sweep points.
    """
    rows = []
    crit = [b for b in report.branches if b.position == "critical" and b.jet is not None]
    for res in results:
        pred = [b.multiplier(res.eps, report.ell) for b in crit]
        matched = _match(pred, res.multipliers) if pred else []
        devs = [abs(abs(p) - abs(a)) for p, a in zip(pred, matched)]
        agree = res.verdict == "Undecided" or res.verdict == report.verdict
        res.agreement = agree
        row = {
            "eps": res.eps,
            "predicted_verdict": report.verdict,
            "oracle_verdict": res.verdict,
            "agree": agree,
            "predicted_moduli": [abs(p) for p in pred],
            "oracle_moduli": [abs(a) for a in matched],
            "deviation": max(devs) if devs else 0.0,
            "residual": res.residual,
        }
        if z0 is not None:
            dist = float(np.linalg.norm(res.z - np.asarray(z0, float)))
            row["distance_to_z0"] = dist
            row["distance_over_eps"] = dist / res.eps
        rows.append(row)
    rows.sort(key=lambda r: r["eps"])
    for a, b in zip(rows, rows[1:]):
        if a["deviation"] > 0 and b["deviation"] > 0:
            b["observed_order"] = math.log(b["deviation"] / a["deviation"]) / math.log(b["eps"] / a["eps"])
    mu = report.mu.get("mu", report.mu.get("mu2", 0))
    return {
        "rows": rows,
        "agreement": sum(r["agree"] for r in rows),
        "total": len(rows),
        "expected_order": report.ell + mu + 1,
    }


def poincare_iterates(sys: SystemDef, eps: float, z_start, count: int = 20, samples: int = 0):
    """Iterates of the time-T map from ``z_start``.

    With ``samples > 0`` also returns the orbit sampled ``samples`` times per
    period as rows ``(t, *x)``.
    """
    z = np.asarray(z_start, float)
    pts = [z.copy()]
    traj = []
    T = sys.period
    for k in range(count):
        if samples:
            ts = k * T + np.linspace(0.0, T, samples + 1)
            xs = integrate_samples(sys, z, eps, ts)
            traj.extend((t, *x) for t, x in zip(ts[:-1], xs[:-1]))
            z = xs[-1]
        else:
            z = integrate(sys, z, eps, k * T)
        pts.append(z.copy())
    return np.array(pts), traj

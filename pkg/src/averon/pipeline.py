"""End-to-end analysis of one bifurcating orbit: zero, branch jets, verdict."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .averaging import check_h1, check_h2
from .dsl.compile import LoadedSystem
from .reduction import (
    ConvergenceError,
    NonSimpleZeroError,
    ReductionData,
    _zero_function,
    find_simple_zero,
    first_nonzero_order,
    reduce,
)
from .stability import StabilityError, StabilityReport, build_A_eps, classify_full_dim, reduced_report

__all__ = ["OrbitAnalysis", "analyze_orbit", "scan_zeros", "hypothesis_checks"]


@dataclass
class OrbitAnalysis:
    reduction: ReductionData
    report: StabilityReport

    @property
    def alpha_star(self) -> np.ndarray:
        return self.reduction.alpha_star

    def guess(self, eps: float) -> np.ndarray:
        """Shooting guess ``z_0 + eps z_1``."""
        return self.reduction.predicted_start(eps, 1)


def analyze_orbit(loaded: LoadedSystem, alpha_guess, r: int | None = None, mu: int | None = None,
                  mu1: int | None = None, mu2: int | None = None, tol: float = 1e-12) -> OrbitAnalysis:
    """Reduce at the zero nearest ``alpha_guess`` and classify the orbit.

    Jet orders default to ``mu = 1`` (full-dimensional) and ``mu1 = 0``,
    ``mu2 = 1`` (reduced), capped by what the system order provides.
    """
    sys, mfd = loaded.system, loaded.manifold
    if mfd is None:
        raise StabilityError("system file declares no [manifold] block")
    red = reduce(sys, mfd, alpha_guess, r=r, tol=tol)
    avail = len(red.A) - 1
    if red.m == red.n:
        A_eps, ell = build_A_eps(red.A)
        mu = min(1, avail - ell) if mu is None else mu
        if mu < 0 or ell + mu > avail:
            raise StabilityError(f"jet order mu = {mu} exceeds k - l = {avail - ell}")
        rep = classify_full_dim(A_eps, ell, mu)
    else:
        mu1 = 0 if mu1 is None else mu1
        mu2 = 1 if mu2 is None else mu2
        rep = reduced_report(red.A, red.Delta, red.Gamma, red.dbeta, red.m, mu1, mu2)
        if rep.ell + mu2 > avail:
            raise StabilityError(f"jet order mu2 = {mu2} exceeds k - l = {avail - rep.ell}")
    return OrbitAnalysis(red, rep)


def scan_zeros(loaded: LoadedSystem, r: int | None = None, points: int = 4, keep: int = 6,
               tol: float = 1e-12) -> list[np.ndarray]:
    """Simple zeros of ``f_r`` found by Newton from the best grid points."""
    sys, mfd = loaded.system, loaded.manifold
    r = first_nonzero_order(sys, mfd, points=3) if r is None else r
    fr = _zero_function(sys, mfd, r)
    grid = mfd.grid(points)
    vals = [float(np.linalg.norm(fr(a)[0])) for a in grid]
    order = np.argsort(vals)[:keep]
    zeros: list[np.ndarray] = []
    for k in order:
        try:
            a, _ = find_simple_zero(fr, grid[k], tol=tol)
        except (ConvergenceError, NonSimpleZeroError):
            continue
        if not mfd.contains(a):
            continue
        if all(np.linalg.norm(a - b) > 1e-6 * (1 + np.linalg.norm(b)) for b in zeros):
            zeros.append(a)
    zeros.sort(key=lambda a: tuple(np.round(a, 9)))
    return zeros


def hypothesis_checks(loaded: LoadedSystem) -> dict:
    out = {"H1": check_h1(loaded.system, loaded.manifold, points=3).as_dict()}
    if loaded.manifold.m < loaded.system.dim:
        out["H2"] = check_h2(loaded.system, loaded.manifold, points=3).as_dict()
    return out

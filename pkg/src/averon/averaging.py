"""Averaged functions ``g_i`` and the displacement function."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .flow import FlowJet, flow_eps_jet, integrate
from .manifold import ManifoldDef
from .system import SystemDef

__all__ = [
    "AveragedData",
    "NoTransverseBlock",
    "HypothesisCheck",
    "averaged_data",
    "averaged_function",
    "displacement",
    "g0_jacobian_blocks",
    "check_h1",
    "check_h2",
]


class NoTransverseBlock(ValueError):
    """Raised when ``m = n``: there is no transverse block to split off."""


@dataclass
class AveragedData:
    z: np.ndarray
    g: list[np.ndarray]
    jacobians: list[np.ndarray] | None = None


@dataclass
class HypothesisCheck:
    name: str
    grid: list[list[float]]
    values: list[float]
    threshold: float
    ok: bool
    worst: float = field(default=0.0)

    def as_dict(self) -> dict:
        return {"name": self.name, "grid_points": len(self.grid), "threshold": self.threshold,
                "ok": self.ok, "worst": self.worst}


def averaged_data(sys: SystemDef, z, k: int | None = None, jacobians: bool = False,
                  flow: FlowJet | None = None) -> AveragedData:
    k = sys.order if k is None else k
    if flow is None:
        flow = flow_eps_jet(sys, z, order=k + (1 if jacobians else 0))
    g = [flow.g(i) for i in range(k + 1)]
    jac = [flow.g_tensor(i, 1) for i in range(k + 1)] if jacobians else None
    return AveragedData(np.asarray(z, float).copy(), g, jac)


def averaged_function(sys: SystemDef, z, i: int) -> np.ndarray:
    """``g_i(z) = y_i(T, z) / i!`` (and ``g_0(z) = x(T, z, 0) - z``)."""
    if i < 0:
        raise ValueError("order must be non-negative")
    if i > sys.order:
        raise ValueError(f"g_{i} needs perturbation order {i} but the system declares {sys.order}")
    return flow_eps_jet(sys, z, order=i).g(i)


def displacement(sys: SystemDef, z, eps: float, **kw) -> np.ndarray:
    """Exact ``d(z, eps) = Pi(z, eps) - z``."""
    z = np.asarray(z, float)
    return integrate(sys, z, eps, **kw) - z


def g0_jacobian_blocks(sys: SystemDef, mfd: ManifoldDef, alpha) -> tuple[np.ndarray, np.ndarray]:
    """``(Gamma(alpha), Delta(alpha))``: right-hand column blocks of ``dg_0(z_alpha)``."""
    m = mfd.m
    if m >= sys.dim:
        raise NoTransverseBlock("m = n: no transverse block (hypothesis H2 does not apply)")
    J = flow_eps_jet(sys, mfd.z_of(alpha), order=1).g_tensor(0, 1)
    return J[:m, m:], J[m:, m:]


def check_h1(sys: SystemDef, mfd: ManifoldDef, points: int = 5, tol: float = 1e-9) -> HypothesisCheck:
    """Sampled check that every ``z_alpha`` is T-periodic at ``eps = 0``."""
    grid = mfd.grid(points)
    vals = []
    for a in grid:
        z = mfd.z_of(a)
        vals.append(float(np.max(np.abs(displacement(sys, z, 0.0)))))
    worst = max(vals) if vals else 0.0
    return HypothesisCheck("H1", [list(map(float, a)) for a in grid], vals, tol, worst <= tol, worst)


def check_h2(sys: SystemDef, mfd: ManifoldDef, points: int = 5, tol: float = 1e-6) -> HypothesisCheck:
    """Sampled check that ``det Delta(alpha)`` stays away from zero."""
    grid = mfd.grid(points)
    vals = []
    for a in grid:
        _, Delta = g0_jacobian_blocks(sys, mfd, a)
        vals.append(float(abs(np.linalg.det(Delta))))
    worst = min(vals) if vals else np.inf
    return HypothesisCheck("H2", [list(map(float, a)) for a in grid], vals, tol, worst >= tol, worst)

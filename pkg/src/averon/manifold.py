"""Manifold of unperturbed periodic initial conditions ``z_alpha = (alpha, beta(alpha))``."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .jets import JetScalar, derivative_tensor

__all__ = ["ManifoldDef"]


@dataclass(frozen=True)
class ManifoldDef:
    """``m``-dimensional manifold over the box ``V``.

    ``beta(alpha)`` returns the ``n - m`` transverse coordinates and must be
    generic over floats and :class:`JetScalar`.  For ``m = n`` pass
    ``beta=None``.  The first ``m`` state coordinates are the manifold
    coordinates.
    """

    m: int
    bounds: tuple[tuple[float, float], ...]
    beta: Callable[[Sequence], Sequence] | None = None
    n: int | None = None

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("manifold dimension must be at least 1")
        if len(self.bounds) != self.m:
            raise ValueError("need one (lo, hi) pair per manifold coordinate")
        for lo, hi in self.bounds:
            if not lo < hi:
                raise ValueError("empty manifold box")
        object.__setattr__(self, "bounds", tuple((float(a), float(b)) for a, b in self.bounds))

    @property
    def codim(self) -> int:
        return 0 if self.n is None else self.n - self.m

    def beta_values(self, alpha) -> list:
        if self.beta is None or self.codim == 0:
            return []
        out = list(self.beta(list(alpha)))
        if len(out) != self.codim:
            raise ValueError(f"beta returned {len(out)} values, expected {self.codim}")
        return out

    def z_of(self, alpha) -> np.ndarray:
        alpha = [float(a) for a in alpha]
        return np.array(alpha + [float(v) for v in self.beta_values(alpha)])

    def beta_jets(self, alpha, d: int, p: int, offset: int = 0) -> list[JetScalar]:
        """``beta(alpha + h)`` as jets, ``h_a`` living in direction ``offset + a``."""
        xs = [JetScalar.variable(float(a), offset + i, d, p) for i, a in enumerate(alpha)]
        out = []
        for v in self.beta_values(xs):
            out.append(v if isinstance(v, JetScalar) else JetScalar.constant(float(v), d, p))
        return out

    def beta_jacobian(self, alpha) -> np.ndarray:
        if self.codim == 0:
            return np.zeros((0, self.m))
        jets = self.beta_jets(alpha, self.m, 1)
        return derivative_tensor(jets, 1, list(range(self.m)))

    def contains(self, alpha) -> bool:
        return all(lo <= a <= hi for a, (lo, hi) in zip(alpha, self.bounds))

    def grid(self, points: int = 5, interior: bool = True) -> list[np.ndarray]:
        """Tensor grid over ``V``; interior grids avoid the box faces."""
        axes = []
        for lo, hi in self.bounds:
            if interior:
                axes.append(lo + (hi - lo) * (np.arange(points) + 0.5) / points)
            else:
                axes.append(np.linspace(lo, hi, points))
        return [np.array(p) for p in itertools.product(*axes)]

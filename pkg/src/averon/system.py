"""T-periodic eps-graded vector fields."""

from __future__ import annotations

import numbers
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .jets import JetScalar, derivative_tensor
from .series import EpsSeries

__all__ = ["SystemDef", "PeriodicityError"]


class PeriodicityError(ValueError):
    pass


def _coefficient(v, i: int) -> float:
    if isinstance(v, EpsSeries):
        return float(np.real(v.coeffs[i])) if i <= v.order else 0.0
    return float(v) if i == 0 else 0.0


@dataclass(frozen=True)
class SystemDef:
    """``x' = F_0(t, x) + sum_i eps^i F_i(t, x) + eps^(k+1) R(t, x, eps)``.

    ``field(t, x, eps)`` evaluates the full right-hand side.  It must be
    written generically: ``x`` may hold floats, :class:`JetScalar` or
    :class:`EpsSeries` values and ``eps`` may be a float or a jet/series
    variable.  The blocks ``F_i`` are recovered by expanding in ``eps``.
    """

    field: Callable[[float, Sequence, object], Sequence]
    dim: int
    period: float
    order: int
    names: tuple[str, ...] = ()
    label: str = ""
    meta: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        if self.period <= 0:
            raise ValueError("period must be positive")
        if self.order < 0:
            raise ValueError("perturbation order must be non-negative")
        if not self.names:
            object.__setattr__(self, "names", tuple(f"x{i + 1}" for i in range(self.dim)))

    @classmethod
    def from_blocks(cls, blocks: Sequence[Callable], dim: int, period: float, **kw) -> "SystemDef":
        """Build from explicit blocks ``F_i(t, x) -> sequence``; ``order`` is ``len(blocks) - 1``."""
        blocks = tuple(blocks)

        def fld(t, x, eps):
            acc = None
            for F in reversed(blocks):
                vals = list(F(t, x))
                if acc is None:
                    acc = vals
                else:
                    acc = [v + eps * a for v, a in zip(vals, acc)]
            return acc

        return cls(fld, dim, period, len(blocks) - 1, **kw)

    # -- evaluation -------------------------------------------------------------
    def rhs(self, t: float, x: Sequence, eps=0.0) -> list:
        return list(self.field(t, x, eps))

    def rhs_array(self, t: float, x: np.ndarray, eps: float = 0.0) -> np.ndarray:
        return np.array([float(v) for v in self.field(t, list(map(float, x)), eps)])

    def block(self, i: int, t: float, x: Sequence[float]) -> np.ndarray:
        """Numeric value of ``F_i(t, x)``."""
        out = self.field(t, [float(v) for v in x], EpsSeries.variable(max(i, 1)))
        return np.array([_coefficient(v, i) for v in out])

    def block_derivatives(self, i: int, t: float, x: Sequence[float], max_order: int) -> list[np.ndarray]:
        """Derivative tensors ``d^L F_i(t, x)`` for ``L = 0..max_order``."""
        n = self.dim
        p = i + max_order
        d = n + 1
        xs = [JetScalar.variable(float(v), a + 1, d, max(p, 1)) for a, v in enumerate(x)]
        eps = JetScalar.variable(0.0, 0, d, max(p, 1))
        out = [_as_jet(v, d, max(p, 1)) for v in self.field(t, xs, eps)]
        dirs = list(range(1, d))
        return [derivative_tensor(out, L, dirs, fixed={0: i}) for L in range(max_order + 1)]

    def remainder(self, t: float, x: Sequence[float], eps: float) -> np.ndarray:
        """``R(t, x, eps)`` recovered from the full field and the blocks."""
        if eps == 0:
            raise ValueError("remainder is defined for eps != 0")
        full = self.rhs_array(t, np.asarray(x, float), eps)
        trunc = sum(eps ** i * self.block(i, t, x) for i in range(self.order + 1))
        return (full - trunc) / eps ** (self.order + 1)

    def check_periodicity(self, samples: int = 5, rng=None, tol: float = 1e-10,
                          box: Sequence[tuple[float, float]] | None = None) -> float:
        """Spot-check ``F_i(t + T, x) = F_i(t, x)``; returns the worst deviation."""
        rng = np.random.default_rng(0) if rng is None else rng
        box = box or [(-1.0, 1.0)] * self.dim
        lo = np.array([b[0] for b in box])
        hi = np.array([b[1] for b in box])
        worst = 0.0
        for _ in range(samples):
            t = rng.uniform(0, self.period)
            x = lo + (hi - lo) * rng.uniform(size=self.dim)
            for i in range(self.order + 1):
                a = self.block(i, t, x)
                b = self.block(i, t + self.period, x)
                dev = float(np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(a))))
                worst = max(worst, dev)
        if worst > tol:
            raise PeriodicityError(f"field is not {self.period}-periodic in t (deviation {worst:.3e})")
        return worst


def _as_jet(v, d: int, p: int) -> JetScalar:
    if isinstance(v, JetScalar):
        return v
    if isinstance(v, numbers.Number):
        return JetScalar.constant(v, d, p)
    raise TypeError(f"unexpected field value of type {type(v).__name__}")

"""Higher-order averaging, Lyapunov-Schmidt reduction and jet-based stability
for periodic orbits of eps-perturbed T-periodic systems."""

from .series import EpsSeries, SeriesMatrix, SeriesPoly
from .system import SystemDef
from .manifold import ManifoldDef
from .flow import flow_eps_jet, integrate, integrate_with_jacobian
from .reduction import reduce
from .dsl import load_system

__version__ = "0.1.0"

__all__ = [
    "EpsSeries", "SeriesMatrix", "SeriesPoly", "SystemDef", "ManifoldDef",
    "flow_eps_jet", "integrate", "integrate_with_jacobian", "reduce", "load_system",
    "__version__",
]

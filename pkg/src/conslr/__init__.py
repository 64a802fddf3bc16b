"""Conservative low-rank solvers for the Vlasov-Poisson system.

1D1V solutions are truncated-SVD matrices (:mod:`conslr.lowrank`), 2D2V
solutions hierarchical Tucker tensors (:mod:`conslr.htucker`).  The
conservative truncations keep the discrete mass, momentum and kinetic
energy densities of every spatial cell.
"""

__version__ = "0.1.0"

from .config import SimulationConfig, make_config, parse_config  # noqa: E402
from .grid import build_weights, periodic_axis, velocity_axis  # noqa: E402
from .htucker import HTensor, ht_truncate  # noqa: E402
from .lowrank import LowRankMatrix, conservative_truncate, truncate_svd  # noqa: E402
from .conservative_ht import build_vbasis2d, conservative_truncate_2d2v  # noqa: E402

__all__ = [
    "HTensor", "LowRankMatrix", "SimulationConfig", "build_vbasis2d", "build_weights",
    "conservative_truncate", "conservative_truncate_2d2v", "ht_truncate",
    "make_config", "parse_config", "periodic_axis", "truncate_svd", "velocity_axis",
]

"""Phase reductions of coupled oscillators with phase-dependent cycle shape."""

from .hypergraph import check_decomposition, decompose, export_json, load_json
from .model import (DomainError, Network, Params, ShapeFn, full_jacobian,
                    full_rhs, parse_config)
from .reduction import (ReducedSystem, ReductionOrder, TorusExpansion,
                        assemble)
from .stability import (FullSystem, MonodromyResult, PeriodicOrbit,
                        continue_orbit, monodromy, prmm_sync_closed,
                        splay_eigs_reduced, splay_orbit_delta0, sync_orbit)

__version__ = "0.1.0"

__all__ = [
    "DomainError", "Network", "Params", "ShapeFn",
    "full_jacobian", "full_rhs", "parse_config",
    "ReducedSystem", "ReductionOrder", "TorusExpansion", "assemble",
    "FullSystem", "MonodromyResult", "PeriodicOrbit",
    "continue_orbit", "monodromy", "prmm_sync_closed",
    "splay_eigs_reduced", "splay_orbit_delta0", "sync_orbit",
    "check_decomposition", "decompose", "export_json", "load_json",
    "__version__",
]

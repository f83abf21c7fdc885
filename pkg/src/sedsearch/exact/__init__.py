from ._backend import BACKEND
from .iso import is_isomorphic, is_subgraph_isomorphic, subgraph_embedding
from .policy import (
    DistanceBounds,
    DistancePolicy,
    MappingError,
    Mode,
    NodeMapping,
    ged_under_mapping,
    label_multiset_lower_bound,
)
from .search import (
    ExactResult,
    check_witness,
    closest_subgraph,
    exact_ged,
    exact_sed,
    verify_sed_triangle,
)

__all__ = [
    "BACKEND",
    "DistanceBounds",
    "DistancePolicy",
    "ExactResult",
    "MappingError",
    "Mode",
    "NodeMapping",
    "check_witness",
    "closest_subgraph",
    "exact_ged",
    "exact_sed",
    "ged_under_mapping",
    "is_isomorphic",
    "is_subgraph_isomorphic",
    "label_multiset_lower_bound",
    "subgraph_embedding",
    "verify_sed_triangle",
]

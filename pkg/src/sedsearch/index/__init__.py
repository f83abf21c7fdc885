from .distances import Distance, by_tag, custom_distance, head_ged_distance, head_sed_distance
from .storage import (
    FormatError,
    load_embeddings,
    load_tree,
    save_embeddings,
    save_tree,
)
from .tree import MetricTree, QueryStats, TreeNode, linear_scan_knn, linear_scan_range

__all__ = [
    "Distance",
    "FormatError",
    "MetricTree",
    "QueryStats",
    "TreeNode",
    "by_tag",
    "custom_distance",
    "head_ged_distance",
    "head_sed_distance",
    "linear_scan_knn",
    "linear_scan_range",
    "load_embeddings",
    "load_tree",
    "save_embeddings",
    "save_tree",
]

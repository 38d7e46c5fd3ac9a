from .distances import hellinger, to_euclidean_space
from .knn import NeighborGraph, exact_knn, knn_graph, nn_descent
from .umap import Embedding, export_scatter, find_ab_params, fit_umap, fuzzy_union, t_conorm

__all__ = [
    "Embedding",
    "NeighborGraph",
    "exact_knn",
    "export_scatter",
    "find_ab_params",
    "fit_umap",
    "fuzzy_union",
    "hellinger",
    "knn_graph",
    "nn_descent",
    "t_conorm",
    "to_euclidean_space",
]

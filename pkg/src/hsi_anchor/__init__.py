"""Semi-supervised hyperspectral classification with random anchor-graph ensembles."""
from .anchor_graph import (AnchorGraph, adaptive_weights, anchor_distances, build_graph,
                           normalized_adjacency, reduced_laplacian)
from .anchors import AnchorSet, kmeans_anchors
from .ensemble import EnsembleConfig, MemberResult, train_members, vote
from .features import (BandSelection, FeatureMatrix, LbpParams, lbp_histogram_image,
                       sample_feature_subset, select_bands_lpe, stack_features)
from .hsi_io import HsiCube, LabelField, SyntheticSpec, load_cube, load_labels, make_synthetic_cube
from .metrics import average_accuracy, confusion, kappa, overall_accuracy, summarize
from .pipeline import RunConfig, run_pipeline, split_labels
from .ssl_solver import LabeledSet, SslSolution, predict, solve_anchor_ssl

__version__ = "0.1.0"

"""Chirality-aware vertex features for 3D shapes.

Aggregates per-view image features into per-vertex chiral feature pairs,
trains a small unsupervised network whose scalar output separates left
from right, and evaluates disentanglement, shape matching, and part
segmentation.
"""

__version__ = "0.1.0"

from .cameras import CameraView, generate_camera_ring
from .errors import (ChiralisError, CheckpointError, ContainerError,
                     MeshFormatError, NumericError, ParameterError,
                     ValidationError)
from .losses import (LossBreakdown, LossWeights, balance_loss, combined_loss,
                     dissimilarity_loss, loss_gradients, reconstruction_loss,
                     smoothness_loss)
from .mesh import (ChiralityAnnotation, PointCloud, TriangleMesh,
                   build_knn_graph, load_annotations, load_mesh,
                   mutual_knn_edges)
from .metrics import (MatchResult, PckCurve, augment_features,
                      chirality_accuracy, match_nearest, matching_accuracy,
                      matching_error, pck_curve)
from .network import (ChiralityField, NetworkParams, chirality_score, encode,
                      infer_field, init_params)
from .projection import (ChiralPair, FeatureMap, backproject_aggregate,
                         build_chiral_pair, flip_feature_map_horizontal,
                         normalize_concat, visible_vertex_pixels)
from .segmentation import kmeans_segment
from .synthetic import SyntheticSpec, generate_synthetic_pair, make_bilateral_mesh
from .training import AdamState, TrainConfig, TrainSample, adam_step, train

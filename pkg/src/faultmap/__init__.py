"""Low-dimensional maps of multivariate sensor data for fault detection.

t-SNE and kernel PCA (exact or Nystrom) embeddings, STFT band features for
vibration signals, Davies-Bouldin cluster validation and drift scoring of
points that leave normal-operation clusters.
"""

from .detect import BaselineModel, DriftReport, drift_score, fit_baseline
from .exceptions import ConvergenceError, DataFormatError
from .kpca import KernelSpec, KpcaModel, kernel_matrix, kpca_fit_exact, kpca_fit_nystrom, kpca_project, median_gamma
from .metrics import davies_bouldin, label_purity, nearest_centroid_labels
from .numerics import kmeans, pairwise_sq_dists, standardize, sym_eigen
from .spectral import (SegmentationScheme, SignalTrace, average_spectra, band_features, cumulative_magnitude,
                       featurize_trace, fit_scheme, segment_curve, stft_frames)
from .svgplot import scatter_svg
from .tsne import Embedding, TsneConfig, tsne_fit
from .turbofan import TurbofanData, ingest_turbofan, operating_condition_labels

__all__ = [
    "BaselineModel",
    "ConvergenceError",
    "DataFormatError",
    "DriftReport",
    "Embedding",
    "KernelSpec",
    "KpcaModel",
    "SegmentationScheme",
    "SignalTrace",
    "TsneConfig",
    "TurbofanData",
    "average_spectra",
    "band_features",
    "cumulative_magnitude",
    "davies_bouldin",
    "drift_score",
    "featurize_trace",
    "fit_baseline",
    "fit_scheme",
    "ingest_turbofan",
    "kernel_matrix",
    "kmeans",
    "kpca_fit_exact",
    "kpca_fit_nystrom",
    "kpca_project",
    "label_purity",
    "median_gamma",
    "nearest_centroid_labels",
    "operating_condition_labels",
    "pairwise_sq_dists",
    "scatter_svg",
    "segment_curve",
    "standardize",
    "stft_frames",
    "sym_eigen",
    "tsne_fit",
]

__version__ = "0.1.0"

"""Dual coresets for Wasserstein distributionally robust learning."""

__version__ = "0.1.0"

from .coreset import Anchors, Coreset, compute_anchors, sample_coreset, uniform_coreset
from .dataio import Dataset, MetricSpec, load_dataset, normalize, synth_blobs
from .losses import LossModel
from .wdro import WdroProblem, brute_force_risk, train, worst_case_risk

__all__ = [
    "Anchors", "Coreset", "Dataset", "LossModel", "MetricSpec", "WdroProblem",
    "brute_force_risk", "compute_anchors", "load_dataset", "normalize", "sample_coreset",
    "synth_blobs", "train", "uniform_coreset", "worst_case_risk",
]

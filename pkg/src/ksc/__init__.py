"""Kernel spectral clustering: training, model selection, soft, hierarchical and sparse variants."""

__version__ = "0.1.0"

from .data import Dataset, SplitSpec, split
from .kernels import KernelSpec, gram
from .model import Codebook, KscModel, predict, train
from .metrics import ari, nmi, silhouette, modularity

__all__ = [
    "Dataset", "SplitSpec", "split", "KernelSpec", "gram", "Codebook", "KscModel",
    "predict", "train", "ari", "nmi", "silhouette", "modularity",
]

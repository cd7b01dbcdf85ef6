"""Image segmentation with KSC on local color histograms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import image_to_histograms
from .kernels import KernelSpec
from .model import KscModel, predict, train


@dataclass
class SegmentConfig:
    k: int = 3
    bandwidth: float = 0.5     # sigma^2 of the chi-square kernel
    window: int = 5
    levels: int = 8            # palette size for the histograms
    n_train: int = 500
    seed: int = 0


def segment_image(image, cfg: SegmentConfig = SegmentConfig()) -> tuple[np.ndarray, KscModel]:
    """Per-pixel cluster ids (H x W) from a model trained on a random pixel subset."""
    image = np.asarray(image)
    h, w = image.shape[:2]
    hist = image_to_histograms(image, cfg.window, cfg.levels)
    n = len(hist)
    rng = np.random.default_rng(cfg.seed)
    idx = np.sort(rng.choice(n, size=min(cfg.n_train, n), replace=False))
    model = train(hist.subset(idx), KernelSpec("chi2_rbf", cfg.bandwidth), cfg.k)
    labels = predict(model, hist)
    return labels.reshape(h, w), model


def label_raster(labels: np.ndarray) -> np.ndarray:
    """Grey-level image with the cluster ids spread over 0..255."""
    labels = np.asarray(labels, dtype=int)
    top = max(int(labels.max()), 1)
    return (labels * (255 // top)).astype(np.uint8)

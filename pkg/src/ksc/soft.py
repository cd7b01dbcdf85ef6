"""Soft cluster memberships from cosine distances to projection-space prototypes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .kernels import KernelSpec
from .model import KscModel, train as train_ksc


@dataclass
class SoftAssignment:
    memberships: np.ndarray  # M x k, rows sum to 1
    prototypes: np.ndarray   # k x (k-1)

    def hard_labels(self) -> np.ndarray:
        return np.argmax(self.memberships, axis=1)


def prototypes(proj, labels, k: int | None = None) -> np.ndarray:
    """Per-cluster mean of the projection rows."""
    proj = np.atleast_2d(np.asarray(proj, dtype=float))
    labels = np.asarray(labels, dtype=int).ravel()
    if k is None:
        k = int(labels.max()) + 1
    out = np.empty((k, proj.shape[1]))
    for p in range(k):
        members = labels == p
        if not members.any():
            raise ValueError(f"cluster {p} is empty; cannot form its prototype")
        out[p] = proj[members].mean(axis=0)
    return out


def cosine_distance(e, s) -> float:
    e = np.asarray(e, dtype=float).ravel()
    s = np.asarray(s, dtype=float).ravel()
    ne, ns = np.linalg.norm(e), np.linalg.norm(s)
    if ne == 0 or ns == 0:
        raise ValueError("cosine distance undefined for a zero vector")
    return float(np.clip(1.0 - (e @ s) / (ne * ns), 0.0, 2.0))


def cosine_distances(proj, protos) -> np.ndarray:
    proj = np.atleast_2d(np.asarray(proj, dtype=float))
    protos = np.atleast_2d(np.asarray(protos, dtype=float))
    pn = np.linalg.norm(proj, axis=1)
    sn = np.linalg.norm(protos, axis=1)
    if (pn == 0).any():
        raise ValueError(f"zero projection row {int(np.flatnonzero(pn == 0)[0])}")
    if (sn == 0).any():
        raise ValueError(f"zero prototype {int(np.flatnonzero(sn == 0)[0])}")
    cos = (proj / pn[:, None]) @ (protos / sn[:, None]).T
    return np.clip(1.0 - cos, 0.0, 2.0)


def memberships_from_distances(dist) -> np.ndarray:
    """Row-wise membership ``prod_{j!=q} d_j / sum_p prod_{j!=p} d_j``.

    Rows containing zero distances are the limit of that formula: the mass is
    shared equally among the zero-distance clusters.
    """
    dist = np.atleast_2d(np.asarray(dist, dtype=float))
    n, k = dist.shape
    out = np.empty_like(dist)
    zero = dist == 0
    has_zero = zero.any(axis=1)
    out[has_zero] = zero[has_zero] / zero[has_zero].sum(axis=1, keepdims=True)
    d = dist[~has_zero]
    if d.size:
        # prod_{j!=q} d_j is proportional to 1/d_q; work in logs against underflow
        logd = np.log(d)
        logp = logd.sum(axis=1, keepdims=True) - logd
        logp -= logp.max(axis=1, keepdims=True)
        p = np.exp(logp)
        out[~has_zero] = p / p.sum(axis=1, keepdims=True)
    return out


def soft_assign(proj, protos) -> SoftAssignment:
    protos = np.atleast_2d(np.asarray(protos, dtype=float))
    if protos.shape[0] < 2:
        raise ValueError("soft assignment needs at least two prototypes")
    return SoftAssignment(memberships_from_distances(cosine_distances(proj, protos)), protos)


def model_prototypes(model: KscModel, omega=None) -> np.ndarray:
    """Prototypes from the training projections and the hard training labels."""
    return prototypes(model.training_projections(omega), model.train_labels, model.k)


def sksc(train: Dataset, test: Dataset, kernel: KernelSpec, k: int):
    """Hard KSC initialization followed by soft assignment of the test points.

    Returns (labels, SoftAssignment, model); labels are the argmax memberships.
    """
    model = train_ksc(train, kernel, k)
    protos = model_prototypes(model)
    soft = soft_assign(model.project(test), protos)
    return soft.hard_labels(), soft, model

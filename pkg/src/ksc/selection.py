"""Validation criteria (BLF, BAF, AMS, modularity, Fisher) and grid search."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .data import Dataset
from .kernels import KernelSpec, gram
from .metrics import modularity
from .model import hamming_decode, binarize, train_kernel
from .soft import SoftAssignment, cosine_distances, memberships_from_distances, model_prototypes

CRITERIA = ("blf", "baf", "ams", "modularity", "fisher")
FISHER_SENTINEL = 1e12


def _groups(labels, k=None):
    labels = np.asarray(labels, dtype=int).ravel()
    k = int(labels.max()) + 1 if k is None else k
    groups = [np.flatnonzero(labels == p) for p in range(k)]
    for p, g in enumerate(groups):
        if g.size == 0:
            raise ValueError(f"cluster {p} is empty")
    return groups


def linefit(points) -> float:
    """Collinearity score of a point cloud: 0 when isotropic, 1 when on a line."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    dim = points.shape[1]
    if dim == 1 or points.shape[0] < 2:
        return 1.0
    cov = np.cov(points, rowvar=False, bias=True)
    ev = np.linalg.eigvalsh(cov)
    total = ev.sum()
    if total <= 0:
        return 1.0
    ratio = ev[-1] / total
    return float(np.clip((ratio - 1.0 / dim) / (1.0 - 1.0 / dim), 0.0, 1.0))


def blf(val_proj, labels, eta: float = 0.75, k: Optional[int] = None) -> float:
    """Balanced line fit: eta * mean linefit + (1 - eta) * min/max cluster size."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    val_proj = np.atleast_2d(np.asarray(val_proj, dtype=float))
    groups = _groups(labels, k)
    if len(groups) < 2:
        raise ValueError("BLF needs at least two clusters")
    fits = [linefit(val_proj[g]) for g in groups]
    sizes = [g.size for g in groups]
    return float(eta * np.mean(fits) + (1.0 - eta) * min(sizes) / max(sizes))


def baf(val_proj, labels, k: Optional[int] = None) -> float:
    """Balanced angular fit: mean per-cluster cosine similarity to the cluster prototype.

    Zero-norm projection rows are skipped; ``baf.skipped`` holds how many were.
    """
    val_proj = np.atleast_2d(np.asarray(val_proj, dtype=float))
    groups = _groups(labels, k)
    norms = np.linalg.norm(val_proj, axis=1)
    skipped = 0
    total = 0.0
    for g in groups:
        proto = val_proj[g].mean(axis=0)
        pn = np.linalg.norm(proto)
        keep = g[norms[g] > 0]
        skipped += g.size - keep.size
        if keep.size == 0 or pn == 0:
            continue
        cos = (val_proj[keep] @ proto) / (norms[keep] * pn)
        total += cos.mean()
    if skipped:
        warnings.warn(f"BAF skipped {skipped} zero-norm projection rows", stacklevel=2)
    baf.skipped = skipped
    return float(total / len(groups))


baf.skipped = 0


def ams(soft, labels, k: Optional[int] = None) -> float:
    """Average membership strength of each cluster's members, averaged over clusters."""
    sm = soft.memberships if isinstance(soft, SoftAssignment) else np.asarray(soft, dtype=float)
    if not np.allclose(sm.sum(axis=1), 1.0, atol=1e-9):
        raise ValueError("soft memberships must sum to 1 per row")
    groups = _groups(labels, sm.shape[1] if k is None else k)
    return float(np.mean([sm[g, p].mean() for p, g in enumerate(groups)]))


def fisher(val_proj, labels, k: Optional[int] = None) -> float:
    """Ratio of between-cluster to pooled within-cluster scatter traces."""
    val_proj = np.atleast_2d(np.asarray(val_proj, dtype=float))
    groups = _groups(labels, k)
    if len(groups) < 2:
        raise ValueError("Fisher criterion needs at least two clusters")
    mean = val_proj.mean(axis=0)
    between = within = 0.0
    for g in groups:
        mp = val_proj[g].mean(axis=0)
        between += g.size * float(((mp - mean) ** 2).sum())
        within += float(((val_proj[g] - mp) ** 2).sum())
    if within < 1e-12:
        return FISHER_SENTINEL
    return between / within


@dataclass
class GridEntry:
    k: int
    bandwidth: Optional[float]
    value: float
    error: Optional[str] = None


@dataclass
class GridResult:
    entries: list = field(default_factory=list)
    best: int = 0
    criterion: str = "blf"

    @property
    def best_entry(self) -> GridEntry:
        return self.entries[self.best]

    def to_csv(self, path):
        from .data import format_float

        with open(path, "w", newline="") as fh:
            fh.write("k,bandwidth,criterion,value\n")
            for e in self.entries:
                bw = "" if e.bandwidth is None else format_float(e.bandwidth)
                val = format_float(e.value) if math.isfinite(e.value) else "-inf"
                fh.write(f"{e.k},{bw},{self.criterion},{val}\n")


def _pick_best(entries) -> int:
    order = sorted(
        range(len(entries)),
        key=lambda i: (-entries[i].value, entries[i].k,
                       -math.inf if entries[i].bandwidth is None else entries[i].bandwidth),
    )
    return order[0]


def evaluate_criterion(model, criterion: str, val_rows, val_adj=None, eta: float = 0.75,
                       train_omega=None) -> float:
    """Score one trained model on validation kernel rows (N_val x N_tr)."""
    proj = model.project_kernel(val_rows)
    k = model.k
    if criterion == "ams":
        protos = model_prototypes(model, train_omega)
        sm = memberships_from_distances(cosine_distances(proj, protos))
        return ams(sm, np.argmax(sm, axis=1), k)
    labels = hamming_decode(binarize(proj), model.codebook)
    if criterion == "blf":
        return blf(proj, labels, eta, k)
    if criterion == "baf":
        return baf(proj, labels, k)
    if criterion == "fisher":
        return fisher(proj, labels, k)
    if criterion == "modularity":
        if val_adj is None:
            raise ValueError("modularity criterion needs a validation adjacency")
        return modularity(val_adj, labels)
    raise ValueError(f"unknown criterion {criterion!r}; choose from {CRITERIA}")


def grid_search(train: Dataset, val: Dataset, kernel, k_range: Sequence[int],
                param_range: Sequence[float], criterion: str = "blf", eta: float = 0.75,
                val_adjacency=None) -> GridResult:
    """Train a model for every (k, bandwidth) pair and score it on the validation set.

    ``kernel`` is a kind name or a KernelSpec template whose bandwidth is
    replaced by each grid value. For the modularity criterion on vector data
    the validation Gram matrix serves as the weighted graph unless
    ``val_adjacency`` is given. Failed entries score -inf.
    """
    if criterion not in CRITERIA:
        raise ValueError(f"unknown criterion {criterion!r}; choose from {CRITERIA}")
    k_range = list(k_range)
    param_range = list(param_range)
    if not k_range or not param_range:
        raise ValueError("grid ranges must be nonempty")
    template = kernel if isinstance(kernel, KernelSpec) else KernelSpec(kernel, 1.0)
    entries = []
    for bw in param_range:
        spec = template.with_bandwidth(bw) if bw is not None else template
        try:
            omega = gram(spec, train.points)
            rows = gram(spec, val.points, train.points)
            adj = val_adjacency
            if criterion == "modularity" and adj is None:
                adj = gram(spec, val.points)
        except ValueError as exc:
            entries.extend(GridEntry(k, bw, -math.inf, str(exc)) for k in k_range)
            continue
        for k in k_range:
            entries.append(_score(omega, rows, k, bw, criterion, adj, eta, spec, train.points))
    entries.sort(key=lambda e: (e.k, -math.inf if e.bandwidth is None else e.bandwidth))
    return GridResult(entries, _pick_best(entries), criterion)


def grid_search_kernel(omega_train, omega_val_train, k_range, criterion: str = "modularity",
                       val_adjacency=None, eta: float = 0.75) -> GridResult:
    """Grid over k only, for precomputed kernels such as graph adjacencies."""
    entries = [
        _score(omega_train, omega_val_train, k, None, criterion, val_adjacency, eta, None, None)
        for k in k_range
    ]
    return GridResult(entries, _pick_best(entries), criterion)


def _score(omega, rows, k, bw, criterion, adj, eta, spec, points) -> GridEntry:
    try:
        model = train_kernel(omega, k, spec, points)
        value = evaluate_criterion(model, criterion, rows, adj, eta, omega)
    except (ValueError, np.linalg.LinAlgError) as exc:
        return GridEntry(k, bw, -math.inf, str(exc))
    return GridEntry(k, bw, float(value))

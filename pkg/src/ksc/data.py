"""Ingestion of vectors, graphs and images, plus reproducible data splits."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np


class ParseError(ValueError):
    """Raised when an input file cannot be turned into a dataset."""


@dataclass
class Dataset:
    """Dense point matrix with optional integer labels and string ids."""

    points: np.ndarray
    labels: Optional[np.ndarray] = None
    ids: Optional[Sequence[str]] = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[1] == 0:
            raise ValueError("points must be a 2-D array with at least one column")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points contain non-finite entries")
        self.points = pts
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=int)
            if self.labels.shape != (pts.shape[0],):
                raise ValueError(
                    f"labels have length {self.labels.size}, expected {pts.shape[0]}"
                )
        if self.ids is not None:
            self.ids = [str(i) for i in self.ids]
            if len(self.ids) != pts.shape[0]:
                raise ValueError(f"ids have length {len(self.ids)}, expected {pts.shape[0]}")

    def __len__(self):
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def row_ids(self) -> list[str]:
        return list(self.ids) if self.ids is not None else [str(i) for i in range(len(self))]

    def subset(self, index) -> "Dataset":
        index = np.asarray(index, dtype=int)
        return Dataset(
            self.points[index],
            None if self.labels is None else self.labels[index],
            None if self.ids is None else [self.ids[i] for i in index],
        )


@dataclass(frozen=True)
class SplitSpec:
    fractions: tuple = (1.0, 0.0, 0.0)
    seed: int = 0

    def __post_init__(self):
        fr = tuple(float(f) for f in self.fractions)
        if len(fr) != 3:
            raise ValueError("split needs exactly three fractions (train, validation, test)")
        if any(f < 0 or f > 1 for f in fr):
            raise ValueError(f"fractions must lie in [0, 1], got {fr}")
        if abs(sum(fr) - 1.0) > 1e-12:
            raise ValueError(f"fractions must sum to 1, got {sum(fr)!r}")
        if int(self.seed) < 0:
            raise ValueError("seed must be nonnegative")
        object.__setattr__(self, "fractions", fr)


def load_vectors(path, format: Optional[str] = None, labels_last: bool = False,
                 header: Optional[bool] = None) -> Dataset:
    """Read a rectangular numeric CSV/TSV table.

    A header line is skipped when every cell of the first line is non-numeric
    and more lines follow (or when ``header=True``). With ``labels_last`` the final column is parsed
    as integer cluster labels.
    """
    path = Path(path)
    if format is None:
        format = "tsv" if path.suffix.lower() in (".tsv", ".tab") else "csv"
    if format not in ("csv", "tsv"):
        raise ValueError(f"unsupported format {format!r}")
    delim = "\t" if format == "tsv" else ","
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh, delimiter=delim) if r and any(c.strip() for c in r)]
    # an all-text first line is a header only when data rows follow it
    if rows and (header or (header is None and len(rows) > 1
                            and not any(_is_number(c) for c in rows[0]))):
        rows = rows[1:]
        offset = 2
    else:
        offset = 1
    if not rows:
        raise ParseError(f"{path}: no rows")
    width = len(rows[0])
    values = np.empty((len(rows), width))
    for i, row in enumerate(rows):
        if len(row) != width:
            raise ParseError(
                f"{path}: row {i + offset} has {len(row)} columns, expected {width}"
            )
        for j, cell in enumerate(row):
            try:
                values[i, j] = float(cell)
            except ValueError:
                raise ParseError(
                    f"{path}: non-numeric cell {cell!r} at row {i + offset}, column {j + 1}"
                ) from None
    if labels_last:
        if width < 2:
            raise ParseError(f"{path}: need at least one feature column besides labels")
        lab = values[:, -1]
        if not np.all(lab == np.round(lab)):
            raise ParseError(f"{path}: label column must hold integers")
        return Dataset(values[:, :-1], lab.astype(int))
    return Dataset(values)


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def load_graph(path) -> tuple[np.ndarray, list[str]]:
    """Read a whitespace edge list ``u v [w]`` into a symmetric adjacency matrix.

    Node ids are kept in order of first appearance; integer ids that already
    form ``0..n-1`` keep their numeric positions. Duplicate edges add up.
    Returns the adjacency and the node names.
    """
    edges = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) not in (2, 3):
                raise ParseError(f"{path}: line {lineno} must be 'u v [w]'")
            w = 1.0
            if len(parts) == 3:
                try:
                    w = float(parts[2])
                except ValueError:
                    raise ParseError(f"{path}: bad weight {parts[2]!r} on line {lineno}") from None
                if not np.isfinite(w) or w < 0:
                    raise ParseError(f"{path}: negative or non-finite weight on line {lineno}")
            edges.append((parts[0], parts[1], w))
    if not edges:
        raise ParseError(f"{path}: no rows")

    names = []
    seen = set()
    for u, v, _ in edges:
        for n in (u, v):
            if n not in seen:
                seen.add(n)
                names.append(n)
    if all(n.isdigit() for n in names) and sorted(int(n) for n in names) == list(range(len(names))):
        names = sorted(names, key=int)
    index = {n: i for i, n in enumerate(names)}

    adj = np.zeros((len(names), len(names)))
    for u, v, w in edges:
        i, j = index[u], index[v]
        adj[i, j] += w
        if i != j:
            adj[j, i] += w
    return adj, names


def load_matrix(path) -> np.ndarray:
    """Dense precomputed kernel stored as a headerless CSV."""
    ds = load_vectors(path, "csv", header=False)
    if ds.points.shape[0] != ds.points.shape[1]:
        raise ParseError(f"{path}: kernel matrix must be square, got {ds.points.shape}")
    return ds.points


def load_image(path) -> np.ndarray:
    from PIL import Image

    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def save_image(path, raster: np.ndarray):
    from PIL import Image

    Image.fromarray(np.asarray(raster, dtype=np.uint8)).save(path)


def quantize_colors(pixels: np.ndarray, levels: int, tol: float = 1e-6,
                    max_iter: int = 300) -> tuple[np.ndarray, np.ndarray]:
    """Minimum-variance palette by Lloyd iterations in RGB space.

    Centers start from the mean colors of ``levels`` equal-count groups of
    the luminance-sorted pixels. Returns (palette, per-pixel bin index).
    """
    pixels = np.asarray(pixels, dtype=float).reshape(-1, 3)
    lum = pixels @ np.array([0.299, 0.587, 0.114])
    order = np.argsort(lum, kind="stable")
    groups = np.array_split(order, levels)
    centers = np.array([pixels[g].mean(axis=0) if g.size else pixels[order[-1]] for g in groups])

    for _ in range(max_iter):
        d2 = ((pixels[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        assign = np.argmin(d2, axis=1)
        new = centers.copy()
        for c in range(levels):
            members = assign == c
            if members.any():
                new[c] = pixels[members].mean(axis=0)
        shift = np.abs(new - centers).max()
        centers = new
        if shift < tol:
            break
    d2 = ((pixels[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    return centers, np.argmin(d2, axis=1)


def image_to_histograms(image: np.ndarray, window: int = 5, levels: int = 8) -> Dataset:
    """Local color histograms, one row per pixel in row-major order.

    Each row counts the quantized colors of the ``window`` x ``window``
    neighbourhood (clipped at the image border) and is normalized to sum 1.
    """
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3 or image.shape[0] == 0 or image.shape[1] == 0:
        raise ValueError("image must be a nonempty H x W x 3 raster")
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be an odd integer >= 1, got {window}")
    if levels < 2:
        raise ValueError(f"levels must be >= 2, got {levels}")
    h, w = image.shape[:2]
    if window > h and window > w:
        raise ValueError(f"window {window} larger than both image dimensions {h}x{w}")

    _, bins = quantize_colors(image.reshape(-1, 3), levels)
    onehot = np.zeros((h, w, levels))
    onehot.reshape(-1, levels)[np.arange(h * w), bins] = 1.0

    # box sums through a zero-padded integral image
    integral = np.zeros((h + 1, w + 1, levels))
    integral[1:, 1:] = onehot.cumsum(axis=0).cumsum(axis=1)
    r = window // 2
    rows = np.arange(h)
    cols = np.arange(w)
    top, bottom = np.clip(rows - r, 0, h), np.clip(rows + r + 1, 0, h)
    left, right = np.clip(cols - r, 0, w), np.clip(cols + r + 1, 0, w)
    counts = (
        integral[bottom[:, None], right[None, :]]
        - integral[top[:, None], right[None, :]]
        - integral[bottom[:, None], left[None, :]]
        + integral[top[:, None], left[None, :]]
    )
    hist = counts / counts.sum(axis=2, keepdims=True)
    return Dataset(hist.reshape(h * w, levels))


def split(ds: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset, Dataset]:
    """Seeded shuffle into train/validation/test; the rounding remainder goes to train."""
    n = len(ds)
    _, f_val, f_test = spec.fractions
    n_val = int(np.floor(f_val * n + 0.5))
    n_test = int(np.floor(f_test * n + 0.5))
    n_train = n - n_val - n_test
    if n_train <= 0:
        raise ValueError(f"split leaves an empty training set (N={n}, fractions={spec.fractions})")
    perm = np.random.default_rng(spec.seed).permutation(n)
    tr = np.sort(perm[:n_train])
    va = np.sort(perm[n_train:n_train + n_val])
    te = np.sort(perm[n_train + n_val:])
    return ds.subset(tr), ds.subset(va), ds.subset(te)


def split_indices(n: int, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    ds = Dataset(np.arange(n, dtype=float)[:, None])
    parts = split(ds, spec)
    return tuple(p.points[:, 0].astype(int) for p in parts)


def write_labels(path, ids: Sequence[str], labels: Sequence[int]):
    with open(path, "w", newline="") as fh:
        fh.write("id,cluster\n")
        for i, c in zip(ids, labels):
            fh.write(f"{i},{int(c)}\n")


def read_labels(path) -> tuple[list[str], np.ndarray]:
    ids, labels = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        head = next(reader, None)
        if head is None:
            raise ParseError(f"{path}: no rows")
        if _is_number(head[-1]):
            ids.append(head[0] if len(head) > 1 else str(len(ids)))
            labels.append(int(float(head[-1])))
        for lineno, row in enumerate(reader, 2):
            if not row:
                continue
            try:
                labels.append(int(float(row[-1])))
            except ValueError:
                raise ParseError(f"{path}: bad label {row[-1]!r} on row {lineno}") from None
            ids.append(row[0] if len(row) > 1 else str(len(ids)))
    if not labels:
        raise ParseError(f"{path}: no rows")
    return ids, np.asarray(labels, dtype=int)


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def write_matrix_csv(path, header: Sequence[str], ids: Sequence[str], rows: np.ndarray):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for i, row in zip(ids, np.asarray(rows)):
            fh.write(",".join([str(i)] + [format_float(v) for v in row]) + "\n")

"""Binary model archive.

Byte layout::

    8 bytes   magic b"KSCMODEL"
    uint32    format version (little-endian)
    uint32    header length H in bytes
    H bytes   UTF-8 JSON header
    ...       numeric blocks, back to back

The header holds ``model`` ("dense" or "reduced"), ``kernel`` (kind and
parameters), ``k``, ``n_train`` and ``blocks``: an ordered list of
``{"name", "shape"}``. Each block is little-endian float64 in C order;
integer-valued blocks (codebook, labels, indices) are stored as floats,
which is exact below 2**53.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .kernels import KernelSpec
from .model import Codebook, KscModel
from .sparse import ReducedModel

MAGIC = b"KSCMODEL"
VERSION = 1
_DTYPE = np.dtype("<f8")


def _kernel_from(params: dict) -> KernelSpec:
    return KernelSpec(params["kind"], params.get("bandwidth"), params.get("correlation", "pearson"))


def _write(path, header: dict, blocks: dict):
    header = dict(header)
    header["blocks"] = [{"name": n, "shape": list(np.shape(a))} for n, a in blocks.items()]
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(head)))
        fh.write(head)
        for arr in blocks.values():
            fh.write(np.ascontiguousarray(arr, dtype=_DTYPE).tobytes())


def _read(path):
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise ValueError(f"{path}: not a model archive (bad magic)")
    if len(raw) < 16:
        raise ValueError(f"{path}: truncated archive")
    version, hlen = struct.unpack("<II", raw[8:16])
    if version != VERSION:
        raise ValueError(f"{path}: unsupported archive version {version}")
    header = json.loads(raw[16:16 + hlen].decode("utf-8"))
    pos = 16 + hlen
    blocks = {}
    for b in header["blocks"]:
        shape = tuple(b["shape"])
        count = int(np.prod(shape)) if shape else 1
        end = pos + count * 8
        if end > len(raw):
            raise ValueError(f"{path}: truncated block {b['name']!r}")
        blocks[b["name"]] = np.frombuffer(raw[pos:end], dtype=_DTYPE).reshape(shape).copy()
        pos = end
    if pos != len(raw):
        raise ValueError(f"{path}: {len(raw) - pos} trailing bytes")
    return header, blocks


def save_model(path, model: KscModel):
    blocks = {
        "alphas": model.alphas,
        "biases": model.biases,
        "codebook": model.codebook.codewords,
        "eigenvalues": model.eigenvalues,
    }
    for name in ("train_points", "degrees", "train_labels"):
        value = getattr(model, name)
        if value is not None:
            blocks[name] = value
    _write(path, {"model": "dense", "kernel": model.kernel.params(), "k": model.k,
                  "n_train": model.n_train}, blocks)


def save_reduced(path, model: ReducedModel):
    blocks = {
        "reduced_indices": model.reduced_indices,
        "coefficients": model.coefficients.reshape(model.size, -1),
        "biases": model.biases,
    }
    if model.codebook is not None:
        blocks["codebook"] = model.codebook.codewords
    if model.reduced_points is not None:
        blocks["reduced_points"] = model.reduced_points
    if model.eigenvalues is not None:
        blocks["eigenvalues"] = model.eigenvalues
    k = model.biases.size + 1
    _write(path, {"model": "reduced", "kernel": model.kernel.params(), "k": k,
                  "n_train": model.n_train, "source": model.source}, blocks)


def load(path):
    """Read either model type; returns a KscModel or a ReducedModel."""
    header, b = _read(path)
    kernel = _kernel_from(header["kernel"])
    if header["model"] == "dense":
        labels = b.get("train_labels")
        return KscModel(
            kernel=kernel,
            alphas=b["alphas"],
            biases=b["biases"],
            codebook=Codebook(b["codebook"].astype(int)),
            eigenvalues=b["eigenvalues"],
            train_points=b.get("train_points"),
            degrees=b.get("degrees"),
            train_labels=None if labels is None else labels.astype(int),
        )
    if header["model"] == "reduced":
        cb = b.get("codebook")
        return ReducedModel(
            reduced_indices=b["reduced_indices"].astype(int),
            coefficients=b["coefficients"],
            biases=b["biases"],
            kernel=kernel,
            source=header["source"],
            codebook=None if cb is None else Codebook(cb.astype(int)),
            reduced_points=b.get("reduced_points"),
            n_train=header.get("n_train"),
            eigenvalues=b.get("eigenvalues"),
        )
    raise ValueError(f"{path}: unknown model type {header['model']!r}")


def read_header(path) -> dict:
    return _read(path)[0]

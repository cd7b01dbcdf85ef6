"""Command-line front end: ``ksc <subcommand> [flags]``.

Every artifact-writing run leaves ``manifest.json`` in ``--out-dir`` next to
its outputs. Errors go to stderr with exit code 2.
"""

from __future__ import annotations

import argparse
import datetime
import json
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import archive
from .data import (Dataset, ParseError, SplitSpec, format_float, load_graph, load_image,
                   load_vectors, read_labels, save_image, split, split_indices, write_labels,
                   write_matrix_csv)
from .hierarchy import ahksc, hksc
from .kernels import KernelSpec, gram
from .metrics import ari, cluster_sizes, modularity, nmi, silhouette
from .model import KscModel, predict, predict_kernel, train, train_kernel
from .segmentation import SegmentConfig, label_raster, segment_image
from .selection import CRITERIA, grid_search, grid_search_kernel
from .soft import model_prototypes, soft_assign
from .sparse import (ReducedModel, cluster_weights, sparse_predict, sparsify, train_icd,
                     zero_threshold)

KERNEL_FLAGS = {"rbf": "rbf", "chi2": "chi2_rbf", "cosine": "cosine", "corr": "corr_rbf"}
DEFAULT_SPLIT = (0.5, 0.2, 0.3)
DEFAULT_SIGMA_GRID = {"logspace": [-3.5, -1.5, 9]}
HKSC_SIGMA_GRID = {"logspace": [-3.5, -0.5, 13]}


class CliError(Exception):
    pass


# ---------------------------------------------------------------- helpers

def _kernel(args, bandwidth=None) -> KernelSpec:
    kind = KERNEL_FLAGS[args.kernel]
    bw = args.sigma2 if bandwidth is None else bandwidth
    if kind == "cosine":
        bw = None
    elif bw is None:
        raise CliError(f"--sigma2 is required for the {args.kernel} kernel")
    return KernelSpec(kind, bw)


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_data(args) -> Dataset:
    if not args.data:
        raise CliError("--data is required")
    return load_vectors(args.data, labels_last=args.labels_last)


def _manifest(out: Path, args, outputs, extra=None):
    flags = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    doc = {
        "command": args.command,
        "flags": flags,
        "seed": args.seed,
        "versions": {
            "ksc": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": __import__("scipy").__version__,
        },
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "outputs": sorted(outputs),
    }
    if extra:
        doc.update(extra)
    (out / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n")


def _sigma_grid(spec) -> list:
    if isinstance(spec, dict) and "logspace" in spec:
        a, b, n = spec["logspace"]
        return [float(x) for x in np.logspace(a, b, int(n))]
    if isinstance(spec, (list, tuple)) and spec:
        return [float(x) for x in spec]
    raise CliError("sigma2 grid must be a nonempty list or {\"logspace\": [lo, hi, n]}")


def _k_range(spec) -> list:
    if isinstance(spec, dict):
        return list(range(int(spec["min"]), int(spec["max"]) + 1))
    if isinstance(spec, (list, tuple)) and spec:
        return [int(k) for k in spec]
    raise CliError("k range must be a nonempty list or {\"min\": a, \"max\": b}")


def _load_model(args):
    if not args.model:
        raise CliError("--model is required")
    return archive.load(args.model)


# ---------------------------------------------------------------- subcommands

def cmd_train(args):
    out = _out_dir(args)
    if args.k is None:
        raise CliError("--k is required")
    if args.graph:
        adj, names = load_graph(args.graph)
        model = train_kernel(adj, args.k)
        ids = names
    else:
        ds = _load_data(args)
        model = train(ds, _kernel(args), args.k)
        ids = ds.row_ids()
    archive.save_model(out / "model.ksc", model)
    write_labels(out / "train_labels.csv", ids, model.train_labels)
    _manifest(out, args, ["model.ksc", "train_labels.csv"])


def cmd_predict(args):
    out = _out_dir(args)
    model = _load_model(args)
    ds = _load_data(args)
    if isinstance(model, ReducedModel):
        labels = sparse_predict(model, ds)
    elif model.train_points is None:
        if ds.dim != model.n_train:
            raise CliError(f"kernel rows have {ds.dim} columns, expected d={model.n_train}")
        labels = predict_kernel(model, ds.points)
    else:
        labels = predict(model, ds)
    write_labels(out / "labels.csv", ds.row_ids(), labels)
    _manifest(out, args, ["labels.csv"])


def _select_config(args) -> dict:
    cfg = {}
    if args.config:
        cfg = json.loads(Path(args.config).read_text())
        if not isinstance(cfg, dict):
            raise CliError("config must be a JSON object")
    cfg.setdefault("kernel", args.kernel)
    cfg.setdefault("sigma2", [args.sigma2] if args.sigma2 is not None else DEFAULT_SIGMA_GRID)
    cfg.setdefault("k", [args.k] if args.k is not None else {"min": 2, "max": 5})
    cfg.setdefault("criterion", args.criterion)
    cfg.setdefault("split", list(DEFAULT_SPLIT))
    cfg.setdefault("blf_eta", args.blf_eta)
    if cfg["kernel"] not in KERNEL_FLAGS:
        raise CliError(f"unknown kernel {cfg['kernel']!r}; choose from {sorted(KERNEL_FLAGS)}")
    if cfg["criterion"] not in CRITERIA:
        raise CliError(f"unknown criterion {cfg['criterion']!r}; choose from {CRITERIA}")
    return cfg


def cmd_select(args):
    out = _out_dir(args)
    cfg = _select_config(args)
    spec = SplitSpec(tuple(cfg["split"]), args.seed)
    k_range = _k_range(cfg["k"])
    outputs = ["grid.csv", "model.ksc", "test_labels.csv"]
    if args.graph:
        adj, names = load_graph(args.graph)
        tr, va, te = split_indices(len(names), spec)
        result = grid_search_kernel(adj[np.ix_(tr, tr)], adj[np.ix_(va, tr)], k_range,
                                    cfg["criterion"], adj[np.ix_(va, va)], cfg["blf_eta"])
        best = result.best_entry
        model = train_kernel(adj[np.ix_(tr, tr)], best.k)
        test_ids = [names[i] for i in te]
        test_labels = predict_kernel(model, adj[np.ix_(te, tr)])
    else:
        ds = _load_data(args)
        tr, va, te = split(ds, spec)
        kind = KERNEL_FLAGS[cfg["kernel"]]
        grid = [None] if kind == "cosine" else _sigma_grid(cfg["sigma2"])
        template = KernelSpec(kind, 1.0) if kind != "cosine" else KernelSpec("cosine")
        result = grid_search(tr, va, template, k_range, grid, cfg["criterion"], cfg["blf_eta"])
        best = result.best_entry
        kernel = template if best.bandwidth is None else template.with_bandwidth(best.bandwidth)
        model = train(tr, kernel, best.k)
        test_ids = te.row_ids()
        test_labels = predict(model, te)
    if not np.isfinite(best.value):
        raise CliError("every grid entry failed; no model selected")
    result.to_csv(out / "grid.csv")
    archive.save_model(out / "model.ksc", model)
    write_labels(out / "test_labels.csv", test_ids, test_labels)
    _manifest(out, args, outputs, {"config": cfg, "best": {
        "k": best.k, "sigma2": best.bandwidth, "value": best.value}})


def cmd_soft(args):
    out = _out_dir(args)
    model = _load_model(args)
    if not isinstance(model, KscModel) or model.train_points is None:
        raise CliError("soft assignment needs a dense model trained on vector data")
    ds = _load_data(args)
    soft = soft_assign(model.project(ds), model_prototypes(model))
    ids = ds.row_ids()
    write_labels(out / "labels.csv", ids, soft.hard_labels())
    write_matrix_csv(out / "memberships.csv", ["id"] + [f"sm_{p + 1}" for p in range(model.k)],
                     ids, soft.memberships)
    _manifest(out, args, ["labels.csv", "memberships.csv"])


def cmd_hier(args):
    out = _out_dir(args)
    ds = _load_data(args)
    tr, va, te = split(ds, SplitSpec(DEFAULT_SPLIT, args.seed))
    if args.mode == "hksc":
        if args.theta is None:
            raise CliError("--theta is required for hksc")
        if args.config:
            grid = _sigma_grid(json.loads(Path(args.config).read_text()).get("sigma2", HKSC_SIGMA_GRID))
        else:
            grid = _sigma_grid([args.sigma2] if args.sigma2 is not None else HKSC_SIGMA_GRID)
        link = hksc(tr, va, te, grid, args.k or 6, args.theta)
    else:
        if args.k is None:
            raise CliError("--k is required for ahksc")
        link = ahksc(tr, va, te, _kernel(args), args.k, args.levels)
    link.check()
    (out / "linkage.txt").write_text(link.to_text())
    outputs = ["linkage.txt"]
    ids = te.row_ids()
    for t, lab in enumerate(link.level_labels):
        name = f"level_{t}.csv"
        write_labels(out / name, ids, lab)
        outputs.append(name)
    extra = {"level_sizes": [int(np.unique(l).size) for l in link.level_labels]}
    if link.thresholds is not None:
        extra["thresholds"] = [format_float(x) for x in link.thresholds]
    _manifest(out, args, outputs, extra)


def cmd_sparsify(args):
    out = _out_dir(args)
    model = _load_model(args)
    if not isinstance(model, KscModel) or model.train_points is None:
        raise CliError("sparsify needs a dense model trained on vector data")
    omega = gram(model.kernel, model.train_points)
    report = {"method": args.method, "n_train": model.n_train}
    if args.method == "icd":
        reduced = train_icd(model.train_points, model.kernel, model.k, args.icd_tol,
                            args.icd_rmax, omega=omega)
        report.update(icd_tol=args.icd_tol, icd_rmax=args.icd_rmax)
    elif args.method == "glasso":
        if args.lam is None:
            raise CliError("--lambda is required for glasso")
        reduced = sparsify(model, "group_lasso", lam=args.lam, omega=omega)
        report.update(lam=args.lam, zero_threshold=zero_threshold(
            omega, model.alphas, cluster_weights(model.train_labels)))
    else:
        if args.rho is None:
            raise CliError("--rho is required for rl1")
        reduced = sparsify(model, "reweighted_l1", rho=args.rho, omega=omega)
        report.update(rho=args.rho)
    report.update(n_reduced=reduced.size, fraction=reduced.size / model.n_train,
                  reduced_indices=reduced.reduced_indices.tolist())
    if reduced.size:
        archive.save_reduced(out / "reduced.ksc", reduced)
    (out / "sparsity.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    _manifest(out, args, (["reduced.ksc"] if reduced.size else []) + ["sparsity.json"])


def cmd_eval(args):
    out = _out_dir(args)
    if not args.labels:
        raise CliError("--labels A B is required")
    ids_a, a = read_labels(args.labels[0])
    ids_b, b = read_labels(args.labels[1])
    if len(a) != len(b):
        raise CliError(f"label files differ in length: {len(a)} vs {len(b)}")
    metrics = {"ari": ari(a, b), "nmi": nmi(a, b), "sizes": cluster_sizes(b)}
    if args.data:
        ds = _load_data(args)
        if len(ds) != len(b):
            raise CliError(f"data has {len(ds)} rows, labels have {len(b)}")
        if np.unique(b).size > 1:
            if args.silhouette_space == "projection":
                model = _load_model(args)
                if isinstance(model, ReducedModel):
                    raise CliError("projection-space silhouette needs a dense model")
                proj = model.project(ds)
                metrics["msv"] = silhouette(Dataset(proj), b)
            else:
                metrics["msv"] = silhouette(ds, b)
    if args.graph:
        adj, _ = load_graph(args.graph)
        if adj.shape[0] != len(b):
            raise CliError(f"graph has {adj.shape[0]} nodes, labels have {len(b)}")
        metrics["modularity"] = modularity(adj, b)
    text = json.dumps(metrics, sort_keys=True)
    (out / "metrics.json").write_text(text + "\n")
    print(text)
    _manifest(out, args, ["metrics.json"])


def cmd_segment(args):
    out = _out_dir(args)
    if not args.image:
        raise CliError("--image is required")
    image = load_image(args.image)
    cfg = SegmentConfig(k=args.k or 3, bandwidth=args.sigma2 if args.sigma2 is not None else 0.5,
                        window=args.window, levels=args.palette, n_train=args.n_train,
                        seed=args.seed)
    labels, _ = segment_image(image, cfg)
    save_image(out / "segments.png", label_raster(labels))
    write_labels(out / "labels.csv", [str(i) for i in range(labels.size)], labels.ravel())
    _manifest(out, args, ["segments.png", "labels.csv"], {"segment_config": vars(cfg)})


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--data", help="CSV/TSV of vectors (one row per point)")
    common.add_argument("--labels-last", action="store_true", help="last data column holds labels")
    common.add_argument("--graph", help="edge list: src dst [weight]")
    common.add_argument("--image", help="RGB image for segment")
    common.add_argument("--kernel", choices=sorted(KERNEL_FLAGS), default="rbf")
    common.add_argument("--sigma2", type=float, help="kernel bandwidth")
    common.add_argument("--k", type=int, help="number of clusters")
    common.add_argument("--criterion", choices=CRITERIA, default="blf")
    common.add_argument("--config", help="JSON config for select / hier")
    common.add_argument("--model", help="model archive")
    common.add_argument("--out-dir", default="ksc_out")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, help="cap BLAS threads")
    common.add_argument("--blf-eta", type=float, default=0.75)
    common.add_argument("--levels", type=int, default=3, help="ahksc threshold count")
    common.add_argument("--theta", type=float, help="Fisher threshold for hksc")
    common.add_argument("--lambda", dest="lam", type=float, help="group lasso penalty")
    common.add_argument("--rho", type=float, help="reweighted L1 regularizer")
    common.add_argument("--icd-tol", type=float)
    common.add_argument("--icd-rmax", type=int)

    p = argparse.ArgumentParser(prog="ksc", description="Kernel spectral clustering toolkit")
    p.add_argument("--version", action="version", version=f"ksc {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, func, help_ in [
        ("train", cmd_train, "fit a model and write model.ksc"),
        ("predict", cmd_predict, "label new points with a model"),
        ("select", cmd_select, "grid search over k and sigma2"),
        ("soft", cmd_soft, "soft memberships"),
        ("hier", cmd_hier, "hierarchical clustering"),
        ("sparsify", cmd_sparsify, "reduced-set model"),
        ("eval", cmd_eval, "compare two labelings"),
        ("segment", cmd_segment, "segment an image"),
    ]:
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.set_defaults(func=func)
        if name == "hier":
            sp.add_argument("--mode", choices=("hksc", "ahksc"), default="hksc")
        if name == "sparsify":
            sp.add_argument("--method", choices=("icd", "glasso", "rl1"), default="glasso")
        if name == "eval":
            sp.add_argument("--labels", nargs=2, metavar=("A", "B"))
            sp.add_argument("--silhouette-space", choices=("input", "projection"), default="input",
                            help="projection space needs --model")
        if name == "segment":
            sp.add_argument("--window", type=int, default=5)
            sp.add_argument("--palette", type=int, default=8, help="quantized colors")
            sp.add_argument("--n-train", type=int, default=500)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.threads is not None:
            from threadpoolctl import threadpool_limits

            with threadpool_limits(limits=args.threads):
                args.func(args)
        else:
            args.func(args)
    except (CliError, ParseError, ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"ksc {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

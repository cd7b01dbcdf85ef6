"""Regenerate the bundled data files under data/."""

import argparse
from pathlib import Path

import numpy as np

from ksc.data import format_float, save_image
from ksc.synthetic import nested_blobs, three_gaussians, three_region_image


def write_points(path, ds, labels=None):
    labels = ds.labels if labels is None else labels
    with open(path, "w", newline="") as fh:
        fh.write("x,y,label\n")
        for p, c in zip(ds.points, labels):
            fh.write(f"{format_float(p[0])},{format_float(p[1])},{int(c)}\n")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "data"))
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_points(out / "three_gaussians.csv", three_gaussians(600, seed=args.seed))
    ds, _ = nested_blobs(seed=args.seed)
    write_points(out / "nested_blobs.csv", ds)
    image, regions = three_region_image(seed=args.seed)
    save_image(out / "three_regions.png", image)
    np.savetxt(out / "three_regions_truth.csv", regions, fmt="%d", delimiter=",")
    print(f"fixtures written to {out}")


if __name__ == "__main__":
    main()

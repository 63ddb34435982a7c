"""Convert the 5,000-image MNIST CSV shipped inside the mlxtend wheel into IDX files.

Usage: python3 scripts/make_mnist_subset.py MLXTEND_WHEEL_OR_CSV_GZ OUT_DIR

Rows are shuffled with a fixed seed so the validation tail is class-balanced.
"""

import gzip
import io
import os
import sys
import zipfile

import numpy as np

from eunn.tasks import write_idx

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def load_rows(src):
    if src.endswith(".whl"):
        with zipfile.ZipFile(src) as zf:
            raw = zf.read(MEMBER)
    else:
        with open(src, "rb") as fh:
            raw = fh.read()
    text = gzip.decompress(raw).decode()
    return np.loadtxt(io.StringIO(text), delimiter=",", dtype=np.int64)


def main(src, out_dir):
    rows = load_rows(src)
    rows = rows[np.random.Generator(np.random.PCG64(0)).permutation(len(rows))]
    images = rows[:, :784].reshape(-1, 28, 28).astype(np.uint8)
    labels = rows[:, 784].astype(np.uint8)
    os.makedirs(out_dir, exist_ok=True)
    write_idx(os.path.join(out_dir, "train-images-idx3-ubyte.gz"), images)
    write_idx(os.path.join(out_dir, "train-labels-idx1-ubyte.gz"), labels)
    print(f"wrote {len(labels)} images to {out_dir}; label counts {np.bincount(labels).tolist()}")


if __name__ == "__main__":
    main(*sys.argv[1:3])

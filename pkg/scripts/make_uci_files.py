"""Regenerate the two UCI-layout CSV files under data/.

The UCI repository is the original source of both datasets. This script
rebuilds byte-compatible copies from redistributed mirrors so the package
does not need network access at run time:

* WBC  (breast-cancer-wisconsin.data): R ``MASS::biopsy`` via ``rdatasets``
* WDBC (wdbc.data): the copy bundled with scikit-learn. scikit-learn drops
  the patient ID column, so IDs are replaced by the 1-based row number.

Usage: python scripts/make_uci_files.py [outdir]
"""
import os
import sys

import numpy as np


def write_wbc(path):
    import rdatasets

    df = rdatasets.data("MASS", "biopsy")
    cols = ["V%d" % i for i in range(1, 10)]
    with open(path, "w") as fh:
        for _, row in df.iterrows():
            cells = [str(int(row["ID"]))]
            for c in cols:
                v = row[c]
                cells.append("?" if v != v else str(int(v)))
            cells.append("2" if row["class"] == "benign" else "4")
            fh.write(",".join(cells) + "\n")


def write_wdbc(path):
    import sklearn.datasets

    src = os.path.join(os.path.dirname(sklearn.datasets.__file__), "data", "breast_cancer.csv")
    with open(src) as fh:
        lines = fh.read().splitlines()[1:]
    with open(path, "w") as fh:
        for i, line in enumerate(lines, start=1):
            cells = line.split(",")
            # scikit-learn encodes 0 = malignant, 1 = benign
            diagnosis = "M" if cells[-1] == "0" else "B"
            fh.write(",".join([str(i), diagnosis] + cells[:-1]) + "\n")


if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else os.path.join(os.path.dirname(__file__), "..", "data")
    os.makedirs(out, exist_ok=True)
    write_wbc(os.path.join(out, "breast-cancer-wisconsin.data"))
    write_wdbc(os.path.join(out, "wdbc.data"))

#!/usr/bin/env python3
"""Convert a DeepSurv-format HDF5 survival file to the CSVs coxmix reads.

The file holds groups (e.g. "train", "test") with datasets x, t and e.
Each group becomes <prefix>_<group>.csv with columns time, status, x1..xp.

    python3 tools/deepsurv_h5_to_csv.py gbsg_cancer_train_test.h5 data/gbsg
"""

import argparse
import csv
import sys

import h5py


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("h5")
    ap.add_argument("prefix", help="output path prefix, e.g. data/gbsg")
    args = ap.parse_args()
    with h5py.File(args.h5, "r") as f:
        for group in f:
            x, t, e = f[group]["x"][:], f[group]["t"][:], f[group]["e"][:]
            out = f"{args.prefix}_{group}.csv"
            with open(out, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["time", "status"] + [f"x{j + 1}" for j in range(x.shape[1])])
                for i in range(x.shape[0]):
                    w.writerow([repr(float(t[i])), int(e[i])] + [repr(float(v)) for v in x[i]])
            print(f"{out}: {x.shape[0]} rows, {x.shape[1]} covariates")
    return 0


if __name__ == "__main__":
    sys.exit(main())

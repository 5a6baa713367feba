#!/usr/bin/env python3
"""Build the cmc and sf CSV fixtures under data/.

The raw files come from two PyPI wheels that bundle the UCI tables:
  keel-ds               keel_ds/data/balanced/raw/contraceptive.dat
  imbalanced-databases  imbalanced_databases/data/flare-F/flare-F.dat

Usage:
  pip download --no-deps keel-ds imbalanced-databases -d /tmp/wheels
  python3 tools/prepare_datasets.py /tmp/wheels data/
"""
import csv
import glob
import os
import sys
import zipfile

CMC_COLUMNS = [
    "Wifes_age", "Wifes_education", "Husbands_education",
    "Number_of_children_ever_born", "Wifes_religion", "Wifes_now_working",
    "Husbands_occupation", "Standard_of_living_index", "Media_exposure",
    "Contraceptive_method_used",
]

SF_COLUMNS = [
    "Largest_spot_size", "Spot_distribution", "Activity", "Evolution",
    "Previous_24_hour_flare_activity", "Historically_complex",
    "Did_region_become_historically_complex", "Area",
    "C-class_flares_production_by_this_region",
    "M-class_flares_production_by_this_region",
    "X-class_flares_production_by_this_region",
]


def read_member(wheel_glob, member):
    paths = glob.glob(wheel_glob)
    if not paths:
        sys.exit(f"missing wheel matching {wheel_glob}")
    with zipfile.ZipFile(paths[0]) as z:
        return z.read(member).decode()


def data_lines(text):
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("@"):
            yield [c.strip() for c in line.split(",")]


def main():
    wheels, out = sys.argv[1], sys.argv[2]
    os.makedirs(out, exist_ok=True)

    # cmc: anomalies are women with ten or more children. Age and child
    # count are dropped, leaving the 8 categorical features.
    raw = read_member(os.path.join(wheels, "keel_ds-*.whl"),
                      "keel_ds/data/balanced/raw/contraceptive.dat")
    keep = [c for c in CMC_COLUMNS
            if c not in ("Wifes_age", "Number_of_children_ever_born")]
    with open(os.path.join(out, "cmc.csv"), "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(keep + ["is_anomaly"])
        for cells in data_lines(raw):
            row = dict(zip(CMC_COLUMNS, cells))
            label = "1" if int(row["Number_of_children_ever_born"]) >= 10 else "0"
            w.writerow([row[c] for c in keep] + [label])

    # sf: flare-F, positive class (Zurich class F) is the anomaly.
    raw = read_member(os.path.join(wheels, "imbalanced_databases-*.whl"),
                      "imbalanced_databases/data/flare-F/flare-F.dat")
    with open(os.path.join(out, "sf.csv"), "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(SF_COLUMNS + ["is_anomaly"])
        for cells in data_lines(raw):
            label = "1" if cells[-1] == "positive" else "0"
            w.writerow(cells[:-1] + [label])


if __name__ == "__main__":
    main()

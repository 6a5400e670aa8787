"""Shared bits for the figure scripts."""

import argparse
import csv
from pathlib import Path


def parser(description, default_out):
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--runs", type=int, default=100, help="Monte Carlo runs per point")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=Path(default_out))
    return p


def write_rows(path, series, table):
    """Append one row per sweep point: series label, value, distance and savings."""
    new = not path.exists()
    with open(path, "a", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if new:
            w.writerow(["series", "value", "distance", "total_saved", "lower_bound_empirical",
                        "lower_bound_limit", "calibrated_b", "alarms"])
        for v, rep in table:
            w.writerow([series, v, rep.distance, rep.total_saved, rep.lower_bound_empirical,
                        rep.lower_bound_limit, rep.calibrated_b, rep.alarms])
            print(f"{series:>14}  {v:>6}  saved {rep.total_saved:9.1f}  "
                  f"bound {rep.lower_bound_empirical:9.1f}  b {rep.calibrated_b}")


def fresh(path):
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.exists():
        path.unlink()
    return path

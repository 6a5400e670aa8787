"""Savings against the number of cliques K for chains at several shift sizes.

Writes ``fig3.csv`` with one series per shift size.
"""

from _common import fresh, parser, write_rows
from ordered_qcd.montecarlo import ExperimentConfig, ScenarioSpec, sweep

KS = [10, 20, 30, 40, 50]
SHIFTS = [1, 5, 40]


def main():
    args = parser(__doc__.splitlines()[0], "out/fig3").parse_args()
    path = fresh(args.out / "fig3.csv")
    for c in SHIFTS:
        cfg = ExperimentConfig(
            ScenarioSpec({"kind": "chain", "K": 10}, {"kind": "mean_shift", "c": c}),
            runs=args.runs, master_seed=args.seed)
        write_rows(path, f"chain c={c}", sweep(cfg, "K", KS))
    print(f"wrote {path}")


if __name__ == "__main__":
    main()

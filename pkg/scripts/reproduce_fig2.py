"""Savings against scenario distance for a 50-clique chain (mean shift).

Sweeps the shift size c at tau = inf, and adds the four-node changed-structure
example. Writes ``fig2.csv``.
"""

from dataclasses import replace

from _common import fresh, parser, write_rows
from ordered_qcd.montecarlo import ExperimentConfig, ScenarioSpec, sweep

SHIFTS = [0.5, 1, 2, 5, 10, 20, 40]


def main():
    args = parser(__doc__.splitlines()[0], "out/fig2").parse_args()
    path = fresh(args.out / "fig2.csv")
    chain = ExperimentConfig(
        ScenarioSpec({"kind": "chain", "K": 50}, {"kind": "mean_shift", "c": 1.0}),
        runs=args.runs, master_seed=args.seed)
    write_rows(path, "chain K=50", sweep(chain, "c", SHIFTS))

    pair = ScenarioSpec(
        {"kind": "pair",
         "pre": {"M": 4, "edges": [[1, 2], [1, 3], [2, 3], [2, 4]]},
         "post": {"M": 4, "edges": [[1, 2], [1, 3], [2, 3], [3, 4]]}},
        {"kind": "mean_shift", "c": 1.0, "w": 0.25, "w_post": 0.35})
    write_rows(path, "changed graph", sweep(replace(chain, scenario=pair), "c", SHIFTS))
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
